//! Kalman–Bucy filtering for a fixed candidate frequency.
//!
//! All recursions run on the simulation grid `t_i = i h`. The error variance
//! advances by the exact solution of the Riccati equation with `f` frozen at
//! the step midpoint; the conditional mean advances by an exponential
//! (integrating-factor) step in which the stiff decay rate
//! `q = a + gamma f^2 / eps^2` enters through `exp(-q h)`.
//!
//! The sensitivity recursions for `d gamma / d theta` and `d m / d theta` are
//! the exact tangents of those two schemes, so the discrete score equals the
//! derivative of the discrete log-likelihood to rounding error.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::signal::SignalSpec;
use crate::simulator::{ModelConfig, Observations, SamplePath};

/// One frozen-coefficient Riccati step and its partial derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RiccatiStep {
    pub value: f64,
    /// d(value) / d(gamma at step start)
    pub d_start: f64,
    /// d(value) / d(c), where `c = f^2 / eps^2`
    pub d_coef: f64,
}

/// Solves `g' = b^2 - 2 a g - c g^2` exactly over one step of length `h`.
#[inline]
pub(crate) fn riccati_step(g0: f64, a: f64, b2: f64, c: f64, h: f64) -> RiccatiStep {
    let r = (a * a + b2 * c).sqrt();
    let g_inf = b2 / (a + r);
    let delta = g0 - g_inf;
    let e = (-2.0 * r * h).exp();
    let one_minus_e = -(-2.0 * r * h).exp_m1();
    let s = c / (2.0 * r);
    let den = 1.0 + delta * s * one_minus_e;
    let num = delta * e;
    let value = g_inf + num / den;

    let dr = b2 / (2.0 * r);
    let dg_inf = -b2 / ((a + r) * (a + r)) * dr;
    let de = -2.0 * h * e * dr;
    let ds = 1.0 / (2.0 * r) - c / (2.0 * r * r) * dr;
    let ddelta = -dg_inf;
    let dden = ddelta * s * one_minus_e + delta * ds * one_minus_e - delta * s * de;
    let dnum = ddelta * e + delta * de;
    RiccatiStep {
        value,
        d_start: e / (den * den),
        d_coef: dg_inf + dnum / den - num * dden / (den * den),
    }
}

/// `(1 - e^{-z}) / z`, continuous at zero.
#[inline]
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        -(-z).exp_m1() / z
    }
}

/// Derivative of [`phi1`].
#[inline]
pub(crate) fn phi1_prime(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        -0.5 + z / 3.0 - z * z / 8.0 + z * z * z / 30.0
    } else {
        ((-z).exp() * (1.0 + z) - 1.0) / (z * z)
    }
}

/// Per-step quantities of the conditional-mean recursion.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MeanStep {
    pub next: f64,
    pub innovation: f64,
    /// `-a m h + k * innovation`, the Euler increment before the exponential weight.
    pub drift: f64,
    pub weight: f64,
    pub rate: f64,
}

#[inline]
pub(crate) fn mean_step(m: f64, gamma: f64, f: f64, dx: f64, a: f64, eps2: f64, h: f64) -> MeanStep {
    let gain = gamma * f / eps2;
    let rate = a + gain * f;
    let weight = phi1(rate * h);
    let innovation = dx - f * m * h;
    let drift = -a * m * h + gain * innovation;
    MeanStep {
        next: m + weight * drift,
        innovation,
        drift,
        weight,
        rate,
    }
}

/// `c = f(theta (t + h/2))^2 / eps^2` for step `i`.
#[inline]
fn midpoint_coef(spec: &SignalSpec, theta: f64, t_mid: f64, eps2: f64) -> (f64, f64) {
    let (f, fp) = spec.value_and_slope(theta * t_mid);
    let c = f * f / eps2;
    // d c / d theta
    let dc = 2.0 * f * t_mid * fp / eps2;
    (c, dc)
}

fn stiffness(quantity: &'static str, i: usize, h: f64) -> Error {
    Error::Stiffness {
        quantity,
        time: i as f64 * h,
        step: h,
    }
}

/// Error variance `gamma(theta, t_i)` on the configuration grid, `gamma(theta, 0) = 0`.
pub fn riccati_solve(theta: f64, config: &ModelConfig, spec: &SignalSpec) -> Result<Vec<f64>> {
    let n = config.n_steps();
    let h = config.step;
    let eps2 = config.epsilon * config.epsilon;
    let b2 = config.b * config.b;
    let mut gamma = Vec::with_capacity(n + 1);
    gamma.push(0.0);
    let mut g = 0.0;
    for i in 0..n {
        let (c, _) = midpoint_coef(spec, theta, (i as f64 + 0.5) * h, eps2);
        g = riccati_step(g, config.a, b2, c, h).value;
        if !g.is_finite() || g < 0.0 {
            return Err(stiffness("gamma", i + 1, h));
        }
        gamma.push(g);
    }
    Ok(gamma)
}

/// `d gamma / d theta` as the tangent of [`riccati_solve`], given its output.
pub fn riccati_tangent(
    theta: f64,
    gamma: &[f64],
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<Vec<f64>> {
    let h = config.step;
    let eps2 = config.epsilon * config.epsilon;
    let b2 = config.b * config.b;
    let mut gdot = Vec::with_capacity(gamma.len());
    gdot.push(0.0);
    let mut gd = 0.0;
    for i in 0..gamma.len() - 1 {
        let (c, dc) = midpoint_coef(spec, theta, (i as f64 + 0.5) * h, eps2);
        let st = riccati_step(gamma[i], config.a, b2, c, h);
        gd = st.d_start * gd + st.d_coef * dc;
        if !gd.is_finite() {
            return Err(stiffness("gamma_dot", i + 1, h));
        }
        gdot.push(gd);
    }
    Ok(gdot)
}

/// Closed-form solution of the comparison Riccati equation with `f` replaced by
/// the constant `f0`, started from `g_start` at time zero.
pub fn gamma_star_explicit_from(t: f64, g_start: f64, f0: f64, a: f64, b: f64, epsilon: f64) -> f64 {
    let eps2 = epsilon * epsilon;
    let r = (a * a + b * b * f0 * f0 / eps2).sqrt();
    let g_inf = gamma_hat(f0, a, b, epsilon);
    let delta = g_start - g_inf;
    if delta == 0.0 {
        return g_inf;
    }
    let e = (-2.0 * r * t).exp();
    let bracket = 1.0 / delta + f0 * f0 / (2.0 * r * eps2) * (-(-2.0 * r * t).exp_m1());
    e / bracket + g_inf
}

/// Comparison solution `gamma*(t)` with `gamma*(0) = 0`.
pub fn gamma_star_explicit(t: f64, f0: f64, a: f64, b: f64, epsilon: f64) -> f64 {
    gamma_star_explicit_from(t, 0.0, f0, a, b, epsilon)
}

/// Stationary point of the constant-coefficient Riccati equation,
/// `(a eps^2 / f0^2) (sqrt(1 + b^2 f0^2 / (a^2 eps^2)) - 1)`.
pub fn gamma_hat(f0: f64, a: f64, b: f64, epsilon: f64) -> f64 {
    let eps2 = epsilon * epsilon;
    let r = (a * a + b * b * f0 * f0 / eps2).sqrt();
    // algebraically equal to the displayed form, without the cancellation
    b * b / (a + r)
}

/// Filter state on the grid for one candidate frequency and one path.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub theta: f64,
    pub step: f64,
    pub epsilon: f64,
    /// Conditional mean `m(theta, t_i)`.
    pub m: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Innovation increments `dX_i - f(theta t_i) m_i h`.
    pub innov: Vec<f64>,
    /// `f(theta t_i)` and `t_i f'(theta t_i)`, cached for the derived series.
    pub f: Vec<f64>,
    pub f_dtheta: Vec<f64>,
    pub m_dot: Option<Vec<f64>>,
    pub gamma_dot: Option<Vec<f64>>,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// `M = f(theta t) m`.
    pub fn big_m(&self) -> Vec<f64> {
        self.m.iter().zip(&self.f).map(|(m, f)| f * m).collect()
    }

    /// `dM/dtheta = t f'(theta t) m + f(theta t) dm/dtheta`; `None` until sensitivities are attached.
    pub fn big_m_dot(&self) -> Option<Vec<f64>> {
        let md = self.m_dot.as_ref()?;
        Some(
            (0..self.m.len())
                .map(|i| self.f_dtheta[i] * self.m[i] + self.f[i] * md[i])
                .collect(),
        )
    }

    /// Innovation increments of the normalized process `(dX - M dt) / eps`.
    pub fn innovation_wiener(&self) -> Vec<f64> {
        self.innov.iter().map(|v| v / self.epsilon).collect()
    }

    /// Innovations scaled to unit variance under the true model.
    pub fn normalized_innovations(&self) -> Vec<f64> {
        let s = self.epsilon * self.step.sqrt();
        self.innov.iter().map(|v| v / s).collect()
    }

    /// CSV with columns `t,m,gamma,m_dot,gamma_dot,innovation`.
    pub fn to_csv(&self, header_comment: &str) -> String {
        let mut out = String::with_capacity(128 * self.m.len());
        crate::io::push_comment(&mut out, header_comment);
        out.push_str("t,m,gamma,m_dot,gamma_dot,innovation\n");
        let nan = f64::NAN;
        for i in 0..self.m.len() {
            let md = self.m_dot.as_ref().map_or(nan, |v| v[i]);
            let gd = self.gamma_dot.as_ref().map_or(nan, |v| v[i]);
            let inn = self.innov.get(i).copied().unwrap_or(nan);
            crate::io::push_row(&mut out, &[self.time(i), self.m[i], self.gamma[i], md, gd, inn]);
        }
        out
    }
}

fn signal_grid(theta: f64, n: usize, h: f64, spec: &SignalSpec) -> (Vec<f64>, Vec<f64>) {
    let mut f = Vec::with_capacity(n + 1);
    let mut fd = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * h;
        let (v, slope) = spec.value_and_slope(theta * t);
        f.push(v);
        fd.push(t * slope);
    }
    (f, fd)
}

fn check_grid(obs: &Observations, config: &ModelConfig) -> Result<()> {
    if obs.n_steps() != config.n_steps() || (obs.step - config.step).abs() > 1e-12 * config.step {
        return Err(Error::InvalidConfig(format!(
            "path grid ({} steps of {}) does not match configuration ({} steps of {})",
            obs.n_steps(),
            obs.step,
            config.n_steps(),
            config.step
        )));
    }
    Ok(())
}

/// Conditional mean and innovations given a precomputed error-variance grid.
pub fn filter_mean(
    theta: f64,
    obs: &Observations,
    gamma: &[f64],
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<FilterOutput> {
    check_grid(obs, config)?;
    let n = obs.n_steps();
    if gamma.len() != n + 1 {
        return Err(Error::InvalidConfig("gamma grid length mismatch".into()));
    }
    let h = config.step;
    let eps2 = config.epsilon * config.epsilon;
    let (f, f_dtheta) = signal_grid(theta, n, h, spec);
    let mut m = Vec::with_capacity(n + 1);
    let mut innov = Vec::with_capacity(n);
    m.push(config.y0);
    for i in 0..n {
        let st = mean_step(m[i], gamma[i], f[i], obs.dx[i], config.a, eps2, h);
        if !st.next.is_finite() {
            return Err(stiffness("m", i + 1, h));
        }
        innov.push(st.innovation);
        m.push(st.next);
    }
    Ok(FilterOutput {
        theta,
        step: h,
        epsilon: config.epsilon,
        m,
        gamma: gamma.to_vec(),
        innov,
        f,
        f_dtheta,
        m_dot: None,
        gamma_dot: None,
    })
}

/// `(m_dot, gamma_dot)`: exact tangents of the mean and variance recursions.
///
/// The mean tangent is the discretization of
/// `d m_dot = -q m_dot dt - h m dt + g [dX - f m dt]` with
/// `g = (gamma_dot f + t gamma f') / eps^2`, `h = t gamma f f' / eps^2`, using the
/// same exponential weight as the mean, plus the derivative of that weight.
pub fn filter_sensitivity(
    obs: &Observations,
    out: &FilterOutput,
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(obs, config)?;
    let theta = out.theta;
    let gamma_dot = riccati_tangent(theta, &out.gamma, config, spec)?;
    let n = obs.n_steps();
    let h = config.step;
    let a = config.a;
    let eps2 = config.epsilon * config.epsilon;
    let mut m_dot = Vec::with_capacity(n + 1);
    m_dot.push(0.0);
    for i in 0..n {
        let (m, md) = (out.m[i], m_dot[i]);
        let (f, fdot) = (out.f[i], out.f_dtheta[i]);
        let gamma = out.gamma[i];
        let st = mean_step(m, gamma, f, obs.dx[i], a, eps2, h);
        let gain = gamma * f / eps2;
        let g_coef = (gamma_dot[i] * f + gamma * fdot) / eps2;
        let h_coef = gain * fdot;
        let drift_dot = -st.rate * md * h - h_coef * m * h + g_coef * st.innovation;
        let rate_dot = g_coef * f + gain * fdot;
        let weight_dot = phi1_prime(st.rate * h) * rate_dot * h;
        let next = md + st.weight * drift_dot + weight_dot * st.drift;
        if !next.is_finite() {
            return Err(stiffness("m_dot", i + 1, h));
        }
        m_dot.push(next);
    }
    Ok((m_dot, gamma_dot))
}

/// Runs the variance, mean and (optionally) sensitivity recursions.
pub fn run_filter(
    theta: f64,
    obs: &Observations,
    config: &ModelConfig,
    spec: &SignalSpec,
    with_sensitivity: bool,
) -> Result<FilterOutput> {
    let gamma = riccati_solve(theta, config, spec)?;
    let mut out = filter_mean(theta, obs, &gamma, config, spec)?;
    if with_sensitivity {
        let (md, gd) = filter_sensitivity(obs, &out, config, spec)?;
        out.m_dot = Some(md);
        out.gamma_dot = Some(gd);
    }
    Ok(out)
}

/// `(m_dot, gamma_dot)` by central differences in theta with the given step.
pub fn filter_sensitivity_fd(
    theta: f64,
    obs: &Observations,
    config: &ModelConfig,
    spec: &SignalSpec,
    dtheta: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let up = run_filter(theta + dtheta, obs, config, spec, false)?;
    let dn = run_filter(theta - dtheta, obs, config, spec, false)?;
    let d = |u: &[f64], v: &[f64]| -> Vec<f64> {
        u.iter().zip(v).map(|(a, b)| (a - b) / (2.0 * dtheta)).collect()
    };
    Ok((d(&up.m, &dn.m), d(&up.gamma, &dn.gamma)))
}

/// `gamma_dot` from the Duhamel representation
/// `-2 int_0^t s exp(-2 int_s^t q) gamma_*^2 f f' ds`, by trapezoidal
/// quadrature on the grid of `gamma`. Independent of the tangent recursion.
pub fn gamma_dot_duhamel(
    theta: f64,
    gamma: &[f64],
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Vec<f64> {
    let h = config.step;
    let eps = config.epsilon;
    let eps2 = eps * eps;
    let rate_and_source = |i: usize| {
        let t = i as f64 * h;
        let (f, fp) = spec.value_and_slope(theta * t);
        let g_star = gamma[i] / eps;
        (config.a + gamma[i] * f * f / eps2, -2.0 * t * g_star * g_star * f * fp)
    };
    let mut out = Vec::with_capacity(gamma.len());
    out.push(0.0);
    let mut acc = 0.0;
    let (mut q0, mut s0) = rate_and_source(0);
    for i in 0..gamma.len() - 1 {
        let (q1, s1) = rate_and_source(i + 1);
        let decay = (-h * (q0 + q1)).exp();
        acc = decay * acc + 0.5 * h * (decay * s0 + s1);
        out.push(acc);
        q0 = q1;
        s0 = s1;
    }
    out
}

/// Oracle-only diagnostics that compare the filter with the hidden state.
#[derive(Debug, Clone)]
pub struct FilterDiagnostics {
    /// `m(theta, t) - Y_t`.
    pub r: Vec<f64>,
    /// `m_dot(theta, t) + (t f'(theta t) / f(theta t)) Y_t`.
    pub k: Vec<f64>,
}

pub fn diagnostics(path: &SamplePath, out: &FilterOutput) -> Result<FilterDiagnostics> {
    let md = out
        .m_dot
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("diagnostics need filter sensitivities".into()))?;
    let r = out.m.iter().zip(&path.y).map(|(m, y)| m - y).collect();
    let k = (0..out.m.len())
        .map(|i| md[i] + out.f_dtheta[i] / out.f[i] * path.y[i])
        .collect();
    Ok(FilterDiagnostics { r, k })
}

/// The two sides of the Laplace-type estimate
/// `int_0^t exp(-(1/eps) int_s^t F) G(s) ds ~ eps G(t) / F(t)`.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceComparison {
    pub quadrature: f64,
    pub asymptotic: f64,
}

impl LaplaceComparison {
    pub fn ratio(&self) -> f64 {
        self.quadrature / self.asymptotic
    }
}

pub fn laplace_asymptotic<F, G>(big_f: F, big_g: G, t: f64, epsilon: f64) -> Result<LaplaceComparison>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let inner = |s: f64| quadrature::integrate(&big_f, s, t, 1e-13);
    let integrand = |s: f64| match inner(s) {
        Ok(v) => (-v / epsilon).exp() * big_g(s),
        Err(_) => f64::NAN,
    };
    let mut breaks = vec![0.0];
    for k in [200.0, 50.0, 10.0, 2.0] {
        let p = t - k * epsilon;
        if p > *breaks.last().unwrap() {
            breaks.push(p);
        }
    }
    breaks.push(t);
    let quad = quadrature::integrate_pieces(integrand, &breaks, 1e-12)?;
    if !quad.is_finite() {
        return Err(Error::Quadrature("Laplace integrand is not finite".into()));
    }
    Ok(LaplaceComparison {
        quadrature: quad,
        asymptotic: epsilon * big_g(t) / big_f(t),
    })
}
