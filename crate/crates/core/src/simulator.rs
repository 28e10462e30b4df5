//! Sample paths of the partially observed system
//! `dX = f(theta t) Y dt + eps dW`, `dY = -a Y dt + b dV`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalSpec;

/// Model parameters and discretization controls.
/// Missing fields take their values from [`ModelConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// True frequency used for simulation.
    pub theta: f64,
    /// Lower end of the open parameter interval.
    pub alpha: f64,
    /// Upper end of the open parameter interval.
    pub beta: f64,
    /// Mean-reversion rate of the hidden state.
    pub a: f64,
    /// Diffusion coefficient of the hidden state.
    pub b: f64,
    /// Observation noise level.
    pub epsilon: f64,
    pub y0: f64,
    /// Observation horizon `T`.
    pub horizon: f64,
    /// Grid step `h`; `horizon / step` must be an integer. Zero (the default
    /// when omitted) selects [`ModelConfig::max_stable_step`].
    pub step: f64,
    pub seed: u64,
}

/// The reference setup at `eps = 0.02` with the step left unset.
impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            step: 0.0,
            ..ModelConfig::reference(0.02)
        }
    }
}

impl ModelConfig {
    /// The reference setup: `theta = 1` in `(0.5, 1.5)`, `a = b = y0 = 1`, `T = 10`,
    /// with the largest step allowed by the stiffness guard for `f = 2 + cos(2 pi s)`.
    pub fn reference(epsilon: f64) -> Self {
        let mut cfg = ModelConfig {
            theta: 1.0,
            alpha: 0.5,
            beta: 1.5,
            a: 1.0,
            b: 1.0,
            epsilon,
            y0: 1.0,
            horizon: 10.0,
            step: 0.0,
            seed: 0,
        };
        cfg.step = cfg.max_stable_step(&SignalSpec::default());
        cfg
    }

    /// Largest `h = T / N` satisfying both `h <= T/100` and the stiffness guard.
    pub fn max_stable_step(&self, spec: &SignalSpec) -> f64 {
        let mut h_max = self.horizon / 100.0;
        if self.b > 0.0 {
            let sup = spec.bounds().map(|(_, k)| k).unwrap_or(f64::INFINITY);
            h_max = h_max.min(self.epsilon / (20.0 * self.b * sup));
        }
        let n = (self.horizon / h_max * (1.0 - 1e-12)).ceil().max(1.0);
        self.horizon / n
    }

    /// Replaces an unset (zero) step by the largest stable one.
    pub fn resolve_step(mut self, spec: &SignalSpec) -> Self {
        if self.step == 0.0 {
            self.step = self.max_stable_step(spec);
        }
        self
    }

    /// Same configuration with the step replaced by `horizon / n`.
    pub fn with_steps(mut self, n: usize) -> Self {
        self.step = self.horizon / n as f64;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.alpha && theta <= self.beta
    }

    pub fn check_candidate(&self, theta: f64) -> Result<()> {
        if !theta.is_finite() || !self.contains(theta) {
            return Err(Error::OutOfRange {
                theta,
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        Ok(())
    }

    pub fn validate(&self, spec: &SignalSpec) -> Result<()> {
        spec.validate()?;
        let fields = [
            ("theta", self.theta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("a", self.a),
            ("b", self.b),
            ("epsilon", self.epsilon),
            ("y0", self.y0),
            ("horizon", self.horizon),
            ("step", self.step),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} is not finite")));
        }
        if !(self.alpha < self.theta && self.theta < self.beta) {
            return Err(Error::InvalidConfig(format!(
                "theta = {} must lie strictly inside ({}, {})",
                self.theta, self.alpha, self.beta
            )));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        if self.a <= 0.0 {
            return Err(Error::InvalidConfig("a must be positive".into()));
        }
        if self.b < 0.0 {
            return Err(Error::InvalidConfig("b must be non-negative".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.horizon <= 0.0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if self.step <= 0.0 || self.step > self.horizon / 100.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "step {} must satisfy 0 < h <= T/100 = {}",
                self.step,
                self.horizon / 100.0
            )));
        }
        let n = self.horizon / self.step;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "horizon / step = {n} is not an integer"
            )));
        }
        if self.b > 0.0 {
            let (_, sup) = spec.bounds()?;
            let guard = self.epsilon / (20.0 * self.b * sup);
            if self.step > guard * (1.0 + 1e-9) {
                return Err(Error::InvalidConfig(format!(
                    "stiffness guard violated: step {} exceeds eps/(20 b K) = {guard}",
                    self.step
                )));
            }
        }
        Ok(())
    }
}

/// The observable part of a sample path. Estimators that must not see the
/// hidden state take this type.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub step: f64,
    /// `X(t_i)`, `i = 0..=N`.
    pub x: Vec<f64>,
    /// `X(t_{i+1}) - X(t_i)`, exactly as generated.
    pub dx: Vec<f64>,
}

impl Observations {
    pub fn n_steps(&self) -> usize {
        self.dx.len()
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.dx.len() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub obs: Observations,
    /// Hidden state `Y(t_i)`, `i = 0..=N`.
    pub y: Vec<f64>,
    /// Wiener increments `W(t_{i+1}) - W(t_i)` of the observation noise.
    pub dw: Vec<f64>,
    /// Standard normal draws driving the exact state transition of step `i`.
    pub dv: Vec<f64>,
}

impl SamplePath {
    pub fn observations(&self) -> &Observations {
        &self.obs
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.obs.n_steps()).map(|i| self.obs.time(i)).collect()
    }

    /// CSV with columns `t,X,Y`.
    pub fn to_csv(&self, header_comment: &str) -> String {
        let mut out = String::with_capacity(64 * self.y.len());
        crate::io::push_comment(&mut out, header_comment);
        out.push_str("t,X,Y\n");
        for i in 0..self.y.len() {
            crate::io::push_row(&mut out, &[self.obs.time(i), self.obs.x[i], self.y[i]]);
        }
        out
    }
}

/// Independent ChaCha streams for the observation and state noise.
pub(crate) fn noise_streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut w = ChaCha8Rng::seed_from_u64(seed);
    w.set_stream(0);
    let mut v = ChaCha8Rng::seed_from_u64(seed);
    v.set_stream(1);
    (w, v)
}

/// Generates one path: exact OU transition for `Y`, left-point increments for `X`.
pub fn simulate(config: &ModelConfig, spec: &SignalSpec) -> Result<SamplePath> {
    config.validate(spec)?;
    let n = config.n_steps();
    let h = config.step;
    let decay = (-config.a * h).exp();
    let spread = config.b * ((1.0 - (-2.0 * config.a * h).exp()) / (2.0 * config.a)).sqrt();
    let sqrt_h = h.sqrt();
    let (mut rng_w, mut rng_v) = noise_streams(config.seed);

    let mut x = Vec::with_capacity(n + 1);
    let mut dx = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n + 1);
    let mut dw = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    x.push(0.0);
    y.push(config.y0);
    for i in 0..n {
        let t = i as f64 * h;
        let xi_w: f64 = StandardNormal.sample(&mut rng_w);
        let xi_v: f64 = StandardNormal.sample(&mut rng_v);
        let w_inc = sqrt_h * xi_w;
        let inc = spec.value(config.theta * t) * y[i] * h + config.epsilon * w_inc;
        let y_next = y[i] * decay + spread * xi_v;
        if !inc.is_finite() || !y_next.is_finite() {
            return Err(Error::NonFinite("simulated path"));
        }
        dx.push(inc);
        x.push(x[i] + inc);
        y.push(y_next);
        dw.push(w_inc);
        dv.push(xi_v);
    }
    Ok(SamplePath {
        obs: Observations { step: h, x, dx },
        y,
        dw,
        dv,
    })
}

/// Stationary autocovariance `b^2/(2a) exp(-a|tau|)` of the OU state.
pub fn ou_covariance(a: f64, b: f64, tau: f64) -> f64 {
    debug_assert!(a > 0.0);
    b * b / (2.0 * a) * (-a * tau.abs()).exp()
}
