use super::NumericsError;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Maximum relative error between `grad_f(theta)` and central differences
/// of `f` with step `h`. Relative error per coordinate is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn finite_diff_check<F, G>(f: F, grad_f: G, theta: &[f64], h: f64) -> Result<f64, NumericsError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let analytic = grad_f(theta);
    if analytic.len() != theta.len() {
        return Err(NumericsError::DimensionMismatch {
            expected: theta.len(),
            got: analytic.len(),
        });
    }
    let mut point = theta.to_vec();
    let mut worst = 0.0_f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = point[i];
        point[i] = orig + h;
        let fp = f(&point);
        point[i] = orig - h;
        let fm = f(&point);
        point[i] = orig;
        if !fp.is_finite() || !fm.is_finite() || !a.is_finite() {
            return Err(NumericsError::NonFiniteValue { coord: i });
        }
        let numeric = (fp - fm) / (2.0 * h);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_sq(t: &[f64]) -> f64 {
        0.5 * t.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn exact_quadratic() {
        let theta = [0.3, -1.2, 4.0, 1e-3];
        let e = finite_diff_check(half_sq, |t| t.to_vec(), &theta, DEFAULT_FD_STEP).unwrap();
        assert!(e <= 1e-6, "{e}");
    }

    #[test]
    fn sine() {
        let e = finite_diff_check(|t| t[0].sin(), |t| vec![t[0].cos()], &[0.3], 1e-5).unwrap();
        assert!(e <= 1e-6, "{e}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let e = finite_diff_check(half_sq, |t| t.iter().map(|v| 2.0 * v).collect(), &[1.0], 1e-5).unwrap();
        assert!((e - 0.5).abs() < 1e-6, "{e}");
    }

    #[test]
    fn non_finite_reported() {
        let err = finite_diff_check(|t| 1.0 / t[0], |_| vec![0.0], &[0.0], 1e-5);
        // 1/(±h) is finite; use ln instead to hit -inf/NaN.
        assert!(err.is_ok());
        let err = finite_diff_check(|t| t[0].ln(), |_| vec![0.0], &[0.0], 1e-5).unwrap_err();
        assert_eq!(err, NumericsError::NonFiniteValue { coord: 0 });
    }
}
