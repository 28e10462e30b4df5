#![allow(dead_code)]

use oufreq::{ModelConfig, Observations, SamplePath, SignalSpec};

/// Exact Kalman filter for the discretized model
/// `dx_i = f(theta t_i) h y_i + eps dw_i`, `y_{i+1} = e^{-ah} y_i + OU noise`.
/// Returns the predicted means `E[y_i | dx_0..dx_{i-1}]` and the log-likelihood
/// ratio against the zero signal written with those means.
pub fn discrete_kalman(theta: f64, dx: &[f64], cfg: &ModelConfig, spec: &SignalSpec) -> (Vec<f64>, f64) {
    let h = cfg.step;
    let decay = (-cfg.a * h).exp();
    let q = cfg.b * cfg.b * (1.0 - decay * decay) / (2.0 * cfg.a);
    let r = cfg.epsilon * cfg.epsilon * h;
    let (mut m, mut p) = (cfg.y0, 0.0);
    let mut means = vec![m];
    let mut ll = 0.0;
    for (i, &z) in dx.iter().enumerate() {
        let gain_h = spec.value(theta * i as f64 * h) * h;
        let s = gain_h * gain_h * p + r;
        ll += (gain_h * m * z - 0.5 * gain_h * gain_h * m * m) / r;
        let k = p * gain_h / s;
        m += k * (z - gain_h * m);
        p *= 1.0 - k * gain_h;
        m *= decay;
        p = decay * decay * p + q;
        means.push(m);
    }
    (means, ll)
}

/// Observations of `path` aggregated by summing `factor` consecutive increments.
pub fn coarsen(path: &SamplePath, factor: usize) -> Observations {
    let dx: Vec<f64> = path.obs.dx.chunks(factor).map(|c| c.iter().sum()).collect();
    let mut x = Vec::with_capacity(dx.len() + 1);
    x.push(path.obs.x[0]);
    for d in &dx {
        x.push(x.last().unwrap() + d);
    }
    Observations {
        step: path.obs.step * factor as f64,
        x,
        dx,
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
