mod common;

use common::{coarsen, discrete_kalman};
use oufreq::filter::run_filter;
use oufreq::inference::log_likelihood;
use oufreq::{simulate, ModelConfig, SignalSpec};

fn refinement_ratios(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let spec = SignalSpec::default();
    let base = ModelConfig::reference(0.05).with_seed(seed);
    let n0 = base.n_steps();
    let fine = simulate(&base.clone().with_steps(n0 * 8), &spec).unwrap();
    let mut dm = Vec::new();
    let mut gap = Vec::new();
    for r in [1usize, 2, 4, 8] {
        let cfg = base.clone().with_steps(n0 * r);
        let obs = coarsen(&fine, 8 / r);
        let out = run_filter(1.0, &obs, &cfg, &spec, false).unwrap();
        let (means, _) = discrete_kalman(1.0, &obs.dx, &cfg, &spec);
        dm.push((0..=n0).map(|j| (out.m[j * r] - means[j * r]).abs()).fold(0.0, f64::max));

        let th = 1.02;
        let cont = log_likelihood(th, &obs, &cfg, &spec).unwrap() - log_likelihood(1.0, &obs, &cfg, &spec).unwrap();
        let disc = discrete_kalman(th, &obs.dx, &cfg, &spec).1 - discrete_kalman(1.0, &obs.dx, &cfg, &spec).1;
        gap.push((cont - disc).abs());
    }
    let ratio = |v: &[f64]| v.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>();
    (ratio(&dm), ratio(&gap))
}

#[test]
fn mean_gap_to_discrete_kalman_halves_with_step() {
    for seed in [5, 6] {
        let (dm, _) = refinement_ratios(seed);
        for r in &dm {
            assert!((r - 2.0).abs() <= 0.3, "{dm:?}");
        }
    }
}

#[test]
fn likelihood_difference_matches_discrete_oracle_to_first_order() {
    let (_, gap) = refinement_ratios(9);
    for r in &gap {
        assert!((r - 2.0).abs() <= 0.3, "{gap:?}");
    }
}

#[test]
fn discrete_and_continuous_variance_agree_for_constant_signal() {
    let spec = SignalSpec::offset_cosine(2.0, 0.0).unwrap();
    let cfg = ModelConfig::reference(0.05);
    let gamma = oufreq::filter::riccati_solve(1.0, &cfg, &spec).unwrap();
    let target = oufreq::filter::gamma_hat(2.0, 1.0, 1.0, 0.05);
    assert!((gamma.last().unwrap() / target - 1.0).abs() < 1e-9);
}
