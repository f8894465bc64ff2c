//! Finite-difference verification of every hand-written gradient.
//!
//! Each [`Component`] exposes a scalar function of a flat parameter vector
//! and its claimed gradient; [`run_suite`] compares the two with central
//! differences. The default suite covers the backbone, the GP blur draw,
//! the ELBO and the full DG pipeline at toy dimensions.

use ndarray::Array2;

use crate::backbone::{self, BackboneKind};
use crate::data::Window;
use crate::gp::{self, GpInit, GpParams};
use crate::numerics::{finite_diff_check, NoiseSource, RngStream, DEFAULT_FD_STEP};
use crate::pipeline::{pipeline_backward, pipeline_forward, Dims, Mode, PipelineParams, Variant};

pub const BACKBONE_TOL: f64 = 1e-4;
pub const GP_TOL: f64 = 1e-3;

/// Toy geometry of the default suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyDims {
    pub kappa: usize,
    pub tau: usize,
    pub inducing: usize,
}

impl Default for ToyDims {
    fn default() -> Self {
        Self {
            kappa: 8,
            tau: 4,
            inducing: 2,
        }
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64>>;

pub struct Component {
    pub name: String,
    pub tolerance: f64,
    pub theta: Vec<f64>,
    pub value: ScalarFn,
    pub grad: GradFn,
}

impl Component {
    pub fn new(
        name: impl Into<String>,
        tolerance: f64,
        theta: Vec<f64>,
        value: impl Fn(&[f64]) -> f64 + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            tolerance,
            theta,
            value: Box::new(value),
            grad: Box::new(grad),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub component: String,
    /// `NaN` when the check could not be evaluated.
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub dims: ToyDims,
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    /// Human-readable report, one line per component.
    pub fn render(&self) -> String {
        let d = self.dims;
        let mut out = format!("toy dims: kappa={} tau={} M={}\n", d.kappa, d.tau, d.inducing);
        for r in &self.results {
            out.push_str(&format!(
                "{:<10} max_rel_err={:.3e} tol={:.0e} {}\n",
                r.component,
                r.max_rel_err,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

pub fn run_suite(dims: ToyDims, components: &[Component]) -> SuiteReport {
    let results = components
        .iter()
        .map(|c| {
            let err = finite_diff_check(&c.value, &c.grad, &c.theta, DEFAULT_FD_STEP).unwrap_or(f64::NAN);
            CheckResult {
                component: c.name.clone(),
                max_rel_err: err,
                tolerance: c.tolerance,
                passed: err <= c.tolerance,
            }
        })
        .collect();
    SuiteReport { dims, results }
}

fn normal_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.standard_normal())
}

fn toy_window(dims: &Dims, rng: &mut RngStream) -> Window {
    Window {
        cutoff: dims.kappa,
        history: normal_matrix(rng, dims.kappa, dims.channels()),
        future_features: normal_matrix(rng, dims.tau, dims.d_x),
        future: normal_matrix(rng, dims.tau, dims.d_y),
    }
}

fn perturbed_gp(tau: usize, m: usize, rng: &mut RngStream) -> GpParams {
    let init = GpInit {
        inducing: Some(m),
        lengthscale: 0.3,
        amplitude: 0.7,
        noise: 0.1,
    };
    let flat: Vec<f64> = GpParams::init(tau, &init)
        .expect("toy GP init")
        .to_flat()
        .iter()
        .map(|v| v + rng.uniform(-0.1, 0.1))
        .collect();
    GpParams::from_flat(m, &flat).expect("toy GP params")
}

/// `⟨w, forward(params, x)⟩` for an MLP backbone.
pub fn backbone_component(dims: ToyDims, seed: u64) -> Component {
    let mut rng = RngStream::new(seed, 11);
    let kind = BackboneKind::Mlp { hidden: 5, layers: 2 };
    let (in_c, out_c) = (3, 1);
    let params = backbone::init_params(kind, dims.kappa, in_c, dims.tau, out_c, &mut rng).expect("toy backbone");
    let x = normal_matrix(&mut rng, dims.kappa, in_c);
    let w = normal_matrix(&mut rng, dims.tau, out_c);
    let theta = params.values.clone();
    let (p1, x1, w1) = (params.clone(), x.clone(), w.clone());
    Component::new(
        "backbone",
        BACKBONE_TOL,
        theta,
        move |t| {
            let mut p = p1.clone();
            p.values.copy_from_slice(t);
            let (y, _) = backbone::forward(&p, &x1.view()).expect("forward");
            (&y * &w1).sum()
        },
        move |t| {
            let mut p = params.clone();
            p.values.copy_from_slice(t);
            let (_, cache) = backbone::forward(&p, &x.view()).expect("forward");
            backbone::backward(&p, &cache, &w.view()).expect("backward").0
        },
    )
}

/// `⟨w, Y_B(ψ)⟩` with the standard-normal draw held fixed.
pub fn blur_component(dims: ToyDims, seed: u64) -> Component {
    let mut rng = RngStream::new(seed, 12);
    let m = dims.inducing;
    let psi = perturbed_gp(dims.tau, m, &mut rng);
    let y_f = normal_matrix(&mut rng, dims.tau, 2);
    let w = normal_matrix(&mut rng, dims.tau, 2);
    let noise_seed = rng.next_u64();
    let (y_f1, w1) = (y_f.clone(), w.clone());
    Component::new(
        "blur",
        GP_TOL,
        psi.to_flat(),
        move |t| {
            let p = GpParams::from_flat(m, t).expect("flat");
            let draw = gp::sample_blur(&y_f1, &p, &mut RngStream::new(noise_seed, 0)).expect("draw");
            (&draw.blurred * &w1).sum()
        },
        move |t| {
            let p = GpParams::from_flat(m, t).expect("flat");
            let draw = gp::sample_blur(&y_f, &p, &mut RngStream::new(noise_seed, 0)).expect("draw");
            gp::blur_backward(&draw, &w, &p, &y_f).expect("backward").0
        },
    )
}

pub fn elbo_component(dims: ToyDims, seed: u64) -> Component {
    let mut rng = RngStream::new(seed, 13);
    let m = dims.inducing;
    let psi = perturbed_gp(dims.tau, m, &mut rng);
    let obs = normal_matrix(&mut rng, dims.tau, 2) * 0.5;
    let points = gp::horizon_points(dims.tau);
    let (obs1, points1) = (obs.clone(), points.clone());
    Component::new(
        "elbo",
        GP_TOL,
        psi.to_flat(),
        move |t| gp::elbo(&GpParams::from_flat(m, t).expect("flat"), &obs1, &points1).expect("elbo"),
        move |t| gp::elbo_backward(&GpParams::from_flat(m, t).expect("flat"), &obs, &points).expect("elbo grad"),
    )
}

/// Training MSE of the DG pipeline over all of `φ | ξ | ψ`, blur noise fixed.
pub fn pipeline_component(dims: ToyDims, seed: u64) -> Component {
    let mut rng = RngStream::new(seed, 14);
    let pdims = Dims {
        kappa: dims.kappa,
        tau: dims.tau,
        d_x: 2,
        d_y: 1,
    };
    let gp_init = GpInit {
        inducing: Some(dims.inducing),
        lengthscale: 0.3,
        amplitude: 0.7,
        noise: 0.1,
    };
    let kind = BackboneKind::Mlp { hidden: 4, layers: 1 };
    let params = PipelineParams::init(Variant::Dg, kind, pdims, &gp_init, 0.05, &mut rng).expect("toy pipeline");
    let window = toy_window(&pdims, &mut rng);
    let noise_seed = rng.next_u64();
    let theta = params.to_flat();
    let (p1, w1) = (params.clone(), window.clone());
    let run = move |p: &PipelineParams, w: &Window, t: &[f64]| {
        let mut p = p.clone();
        p.set_flat(t).expect("flat");
        let mut noise = RngStream::new(noise_seed, 0);
        let out = pipeline_forward(&p, w, Mode::Train, &mut noise).expect("forward");
        (p, out)
    };
    Component::new(
        "pipeline",
        GP_TOL,
        theta,
        move |t| {
            let (_, out) = run(&p1, &w1, t);
            crate::eval::mse(&w1.future, &out.y_d).expect("shapes")
        },
        move |t| {
            let (p, out) = run(&params, &window, t);
            let err = &out.y_d - &window.future;
            let g = err * (2.0 / out.y_d.len() as f64);
            pipeline_backward(&p, &out, &g).expect("backward").to_flat()
        },
    )
}

pub fn default_components(dims: ToyDims, seed: u64) -> Vec<Component> {
    vec![
        backbone_component(dims, seed),
        blur_component(dims, seed),
        elbo_component(dims, seed),
        pipeline_component(dims, seed),
    ]
}

pub fn run_default_suite(seed: u64) -> SuiteReport {
    let dims = ToyDims::default();
    run_suite(dims, &default_components(dims, seed))
}
