//! Trains several variants on the default synthetic series and prints the
//! mean test MSE over seeds.
//!
//! ```text
//! cargo run --release -p fbd --example synth_ablation -- [epochs] [seeds]
//! ```

use fbd::data::{make_windows, split_windows, synth_multiscale, zscore_apply, zscore_fit, DEFAULT_FRACTIONS};
use fbd::eval::{evaluate, mean_stderr, Split};
use fbd::trainer::{train, TrainConfig};
use fbd::{SynthConfig, Variant};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let epochs = args.first().copied().unwrap_or(50);
    let seeds = args.get(1).copied().unwrap_or(5) as u64;
    let (kappa, tau) = (48, 24);

    let series = synth_multiscale(&SynthConfig::default()).unwrap();
    let stats = zscore_fit(&series, DEFAULT_FRACTIONS[0]).unwrap();
    let series = zscore_apply(&series, &stats).unwrap();
    let split = split_windows(make_windows(&series, kappa, tau, 1).unwrap(), DEFAULT_FRACTIONS).unwrap();

    let variants = [
        Variant::BackboneOnly,
        Variant::Dg,
        Variant::Di,
        Variant::Dt,
        Variant::Dwb,
        Variant::Rb,
    ];
    for variant in variants {
        let start = std::time::Instant::now();
        let mses: Vec<f64> = (0..seeds)
            .map(|seed| {
                let cfg = TrainConfig {
                    variant,
                    seed,
                    epochs,
                    ..TrainConfig::default()
                };
                let ckpt = train(&split, &cfg).unwrap();
                evaluate(&ckpt, &split.test, "synth", Split::Test).unwrap().mse
            })
            .collect();
        let (mean, se) = mean_stderr(&mses);
        println!(
            "{variant:>8}: {mean:.5} ±{se:.5}  ({:.1}s)  {mses:.5?}",
            start.elapsed().as_secs_f64()
        );
    }
}
