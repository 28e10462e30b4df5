//! Log-likelihood, score, Fisher information and their small-noise limits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{mean_step, riccati_step, run_filter, FilterOutput};
use crate::quadrature;
use crate::signal::SignalSpec;
use crate::simulator::{ModelConfig, Observations};

/// `ln V = (1/eps^2) sum M_i dX_i - (1/(2 eps^2)) sum M_i^2 h` from a filter run.
pub fn log_likelihood_from(out: &FilterOutput, obs: &Observations) -> f64 {
    let eps2 = out.epsilon * out.epsilon;
    let h = out.step;
    let mut acc = 0.0;
    for i in 0..obs.n_steps() {
        let big_m = out.f[i] * out.m[i];
        acc += big_m * obs.dx[i] - 0.5 * big_m * big_m * h;
    }
    acc / eps2
}

/// Log-likelihood ratio at one candidate, computed in a single pass without
/// storing the filter grids. Arithmetic is identical to [`run_filter`] followed
/// by [`log_likelihood_from`].
pub fn log_likelihood(
    theta: f64,
    obs: &Observations,
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<f64> {
    let n = obs.n_steps();
    if n != config.n_steps() {
        return Err(Error::InvalidConfig("path grid does not match configuration".into()));
    }
    let h = config.step;
    let a = config.a;
    let b2 = config.b * config.b;
    let eps2 = config.epsilon * config.epsilon;
    let mut m = config.y0;
    let mut g = 0.0;
    let mut acc = 0.0;
    for i in 0..n {
        let t = i as f64 * h;
        let f = spec.value(theta * t);
        let big_m = f * m;
        acc += big_m * obs.dx[i] - 0.5 * big_m * big_m * h;
        m = mean_step(m, g, f, obs.dx[i], a, eps2, h).next;
        let f_mid = spec.value(theta * (i as f64 + 0.5) * h);
        g = riccati_step(g, a, b2, f_mid * f_mid / eps2, h).value;
    }
    if !acc.is_finite() || !m.is_finite() {
        return Err(Error::Stiffness {
            quantity: "log-likelihood",
            time: config.horizon,
            step: h,
        });
    }
    Ok(acc / eps2)
}

fn require_m_dot(out: &FilterOutput) -> Result<Vec<f64>> {
    out.big_m_dot()
        .ok_or_else(|| Error::InvalidConfig("filter output lacks sensitivities".into()))
}

/// `d ln V / d theta = (1/eps^2) sum M_dot_i (dX_i - M_i h)`.
pub fn log_likelihood_gradient_from(out: &FilterOutput) -> Result<f64> {
    let md = require_m_dot(out)?;
    let eps2 = out.epsilon * out.epsilon;
    Ok(md.iter().zip(&out.innov).map(|(d, v)| d * v).sum::<f64>() / eps2)
}

/// `Delta_eps = eps^{-1/2} sum M_dot_i dWbar_i` with `dWbar_i = (dX_i - M_i h) / eps`.
pub fn score_from(out: &FilterOutput) -> Result<f64> {
    let md = require_m_dot(out)?;
    let eps = out.epsilon;
    let s: f64 = md.iter().zip(&out.innov).map(|(d, v)| d * v / eps).sum();
    Ok(s / eps.sqrt())
}

/// Same statistic with the integrand `t f' m - f m_dot` instead of `M_dot`.
/// Kept as a diagnostic for the alternative sign convention; it is not the
/// derivative of the log-likelihood.
pub fn score_alternate_sign_from(out: &FilterOutput) -> Result<f64> {
    let md = out
        .m_dot
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("filter output lacks sensitivities".into()))?;
    let eps = out.epsilon;
    let s: f64 = (0..out.innov.len())
        .map(|i| (out.f_dtheta[i] * out.m[i] - out.f[i] * md[i]) * out.innov[i] / eps)
        .sum();
    Ok(s / eps.sqrt())
}

/// `eps I_eps(theta) = (1/eps) sum M_dot_i^2 h`.
pub fn fisher_eps_from(out: &FilterOutput) -> Result<f64> {
    let md = require_m_dot(out)?;
    let n = out.innov.len();
    Ok(md[..n].iter().map(|d| d * d).sum::<f64>() * out.step / out.epsilon)
}

/// Unnormalized `int M_dot^2 dt = eps^2 I_eps`.
pub fn m_dot_energy_from(out: &FilterOutput) -> Result<f64> {
    let md = require_m_dot(out)?;
    let n = out.innov.len();
    Ok(md[..n].iter().map(|d| d * d).sum::<f64>() * out.step)
}

pub fn score(theta: f64, obs: &Observations, config: &ModelConfig, spec: &SignalSpec) -> Result<f64> {
    score_from(&run_filter(theta, obs, config, spec, true)?)
}

pub fn fisher_eps(
    theta: f64,
    obs: &Observations,
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<f64> {
    fisher_eps_from(&run_filter(theta, obs, config, spec, true)?)
}

fn oscillation_breaks(theta_max: f64, horizon: f64) -> Vec<f64> {
    let pieces = ((theta_max * horizon * 4.0).ceil() as usize).max(1);
    (0..=pieces).map(|k| horizon * k as f64 / pieces as f64).collect()
}

/// `I_0(theta) = (b/2) int_0^T t^2 f'(theta t)^2 dt`.
pub fn fisher_limit(theta: f64, horizon: f64, b: f64, spec: &SignalSpec) -> Result<f64> {
    if spec.is_constant() {
        return Ok(0.0);
    }
    let integrand = |t: f64| {
        let fp = spec.eval(theta * t).f_prime;
        t * t * fp * fp
    };
    let v = quadrature::integrate_pieces(integrand, &oscillation_breaks(theta.abs(), horizon), 1e-11)?;
    Ok(0.5 * b * v)
}

/// `(b/2) int_0^T t^2 f'(theta t)^2 / f(theta t) dt`: the value that `eps I_eps`
/// approaches along a single path as `eps -> 0`. It differs from
/// [`fisher_limit`] by the weight `1/f`, which comes from the stationary
/// variance `b eps / (2 f)` of the fast filter error components.
pub fn fisher_limit_weighted(theta: f64, horizon: f64, b: f64, spec: &SignalSpec) -> Result<f64> {
    if spec.is_constant() {
        return Ok(0.0);
    }
    let integrand = |t: f64| {
        let v = spec.eval(theta * t);
        t * t * v.f_prime * v.f_prime / v.f
    };
    let v = quadrature::integrate_pieces(integrand, &oscillation_breaks(theta.abs(), horizon), 1e-11)?;
    Ok(0.5 * b * v)
}

/// `G(theta, theta0) = b int_0^T [f(theta t) - f(theta0 t)]^2 / (4 f(theta t)) dt`.
pub fn contrast_limit(
    theta: f64,
    theta0: f64,
    b: f64,
    horizon: f64,
    spec: &SignalSpec,
) -> Result<f64> {
    if theta == theta0 {
        return Ok(0.0);
    }
    let integrand = |t: f64| {
        let f = spec.value(theta * t);
        let d = f - spec.value(theta0 * t);
        d * d / (4.0 * f)
    };
    let breaks = oscillation_breaks(theta.abs().max(theta0.abs()), horizon);
    Ok(b * quadrature::integrate_pieces(integrand, &breaks, 1e-11)?)
}

/// Log-likelihood, score and normalized Fisher information over a candidate grid.
#[derive(Debug, Clone)]
pub struct LikelihoodProfile {
    pub thetas: Vec<f64>,
    pub loglik: Vec<f64>,
    pub score: Vec<f64>,
    pub fisher_eps: Vec<f64>,
}

impl LikelihoodProfile {
    pub fn argmax(&self) -> usize {
        self.loglik
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// CSV with columns `theta,loglik,score,fisher_eps`.
    pub fn to_csv(&self, header_comment: &str) -> String {
        let mut out = String::new();
        crate::io::push_comment(&mut out, header_comment);
        out.push_str("theta,loglik,score,fisher_eps\n");
        for i in 0..self.thetas.len() {
            crate::io::push_row(
                &mut out,
                &[self.thetas[i], self.loglik[i], self.score[i], self.fisher_eps[i]],
            );
        }
        out
    }
}

pub fn likelihood_profile(
    thetas: &[f64],
    obs: &Observations,
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<LikelihoodProfile> {
    let rows: Vec<(f64, f64, f64)> = thetas
        .par_iter()
        .map(|&th| {
            let out = run_filter(th, obs, config, spec, true)?;
            Ok((
                log_likelihood_from(&out, obs),
                score_from(&out)?,
                fisher_eps_from(&out)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(LikelihoodProfile {
        thetas: thetas.to_vec(),
        loglik: rows.iter().map(|r| r.0).collect(),
        score: rows.iter().map(|r| r.1).collect(),
        fisher_eps: rows.iter().map(|r| r.2).collect(),
    })
}

/// Both sides of the local quadratic expansion at `theta = config.theta`:
/// `lhs = ln V(theta + sqrt(eps) u) - ln V(theta)`,
/// `rhs = u Delta_eps - u^2/2 eps I_eps`.
pub fn lan_expansion_check(
    u: f64,
    obs: &Observations,
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<(f64, f64)> {
    let theta = config.theta;
    if u == 0.0 {
        return Ok((0.0, 0.0));
    }
    let shifted = theta + config.epsilon.sqrt() * u;
    config.check_candidate(shifted)?;
    let base = run_filter(theta, obs, config, spec, true)?;
    let lhs = log_likelihood(shifted, obs, config, spec)? - log_likelihood_from(&base, obs);
    let rhs = u * score_from(&base)? - 0.5 * u * u * fisher_eps_from(&base)?;
    Ok((lhs, rhs))
}

/// Contrast values on a grid and the fitted quadratic lower-bound constant.
#[derive(Debug, Clone)]
pub struct ContrastLimit {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub c_lower: f64,
}

/// `min G(theta, theta0) / (theta - theta0)^2` over a 200-point grid on the
/// parameter interval, excluding a `sqrt(eps)` neighbourhood of `theta0`.
pub fn quadratic_lower_bound(
    theta0: f64,
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<ContrastLimit> {
    const GRID: usize = 200;
    let radius = config.epsilon.sqrt();
    let thetas: Vec<f64> = (0..GRID)
        .map(|k| config.alpha + (config.beta - config.alpha) * k as f64 / (GRID - 1) as f64)
        .collect();
    let values: Vec<f64> = thetas
        .iter()
        .map(|&th| contrast_limit(th, theta0, config.b, config.horizon, spec))
        .collect::<Result<_>>()?;
    let c_lower = thetas
        .iter()
        .zip(&values)
        .filter(|(th, _)| (**th - theta0).abs() >= radius)
        .map(|(th, g)| g / (th - theta0).powi(2))
        .fold(f64::INFINITY, f64::min);
    if !(c_lower > 0.0) || !c_lower.is_finite() {
        return Err(Error::Unidentifiable(format!(
            "contrast lower bound constant is {c_lower}"
        )));
    }
    Ok(ContrastLimit {
        thetas,
        values,
        c_lower,
    })
}
