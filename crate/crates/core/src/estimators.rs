//! Maximum likelihood estimation and the kernel-smoothing estimators of the frequency.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::run_filter;
use crate::inference::{fisher_limit, log_likelihood, log_likelihood_from, log_likelihood_gradient_from};
use crate::quadrature;
use crate::signal::SignalSpec;
use crate::simulator::{ModelConfig, Observations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mle,
    KernelPsi,
    LimitOracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::KernelPsi => "kernel-psi",
            Method::LimitOracle => "limit-oracle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Method::Mle),
            "kernel-psi" => Ok(Method::KernelPsi),
            "limit-oracle" => Ok(Method::LimitOracle),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub seed: u64,
    pub theta_true: f64,
    pub theta_hat: f64,
    /// `(theta_hat - theta_true) / sqrt(eps)`.
    pub normalized_error: f64,
    pub loglik_at_hat: f64,
    /// `sqrt(eps / I_0(theta_hat))`; infinite when `I_0 = 0`.
    pub se_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Estimate lies within one coarse grid step of an end of the parameter interval.
    pub boundary: bool,
}

impl EstimateReport {
    fn new(method: Method, theta_hat: f64, config: &ModelConfig, spec: &SignalSpec) -> Result<Self> {
        let i0 = fisher_limit(theta_hat, config.horizon, config.b, spec)?;
        Ok(EstimateReport {
            method,
            seed: config.seed,
            theta_true: config.theta,
            theta_hat,
            normalized_error: (theta_hat - config.theta) / config.epsilon.sqrt(),
            loglik_at_hat: f64::NAN,
            se_hat: if i0 > 0.0 {
                (config.epsilon / i0).sqrt()
            } else {
                f64::INFINITY
            },
            iterations: 0,
            converged: true,
            boundary: false,
        })
    }

    /// Usable for distributional summaries.
    pub fn is_clean(&self) -> bool {
        self.converged && !self.boundary
    }

    pub const CSV_HEADER: &'static str =
        "seed,method,theta_true,theta_hat,normalized_error,se_hat,converged";

    pub fn csv_row(&self) -> String {
        use crate::io::fmt_f64;
        format!(
            "{},{},{},{},{},{},{}",
            self.seed,
            self.method.as_str(),
            fmt_f64(self.theta_true),
            fmt_f64(self.theta_hat),
            fmt_f64(self.normalized_error),
            fmt_f64(self.se_hat),
            self.is_clean()
        )
    }
}

fn golden_max<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    width: f64,
) -> Result<(f64, f64, usize)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut iters = 0;
    while hi - lo > width && iters < 200 {
        iters += 1;
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1, iters) } else { (x2, f2, iters) })
}

/// Coarse grid spacing: `sqrt(eps)/4`, capped at `1/(8T)` so the main lobe of
/// the likelihood (width of order `1/T`) always holds several grid points.
pub fn mle_grid_spacing(config: &ModelConfig) -> f64 {
    (config.epsilon.sqrt() / 4.0).min(1.0 / (8.0 * config.horizon))
}

/// Number of coarse-grid local maxima refined by golden section.
const MLE_CANDIDATES: usize = 3;

/// Maximizer of the likelihood over the parameter interval: coarse grid,
/// golden-section refinement of the best local maxima, then Newton steps on the
/// exact log-likelihood gradient.
pub fn mle(obs: &Observations, config: &ModelConfig, spec: &SignalSpec) -> Result<EstimateReport> {
    config.validate(spec)?;
    let sqrt_eps = config.epsilon.sqrt();
    let span = config.beta - config.alpha;
    let n_grid = (span / mle_grid_spacing(config)).ceil() as usize + 1;
    let spacing = span / (n_grid - 1) as f64;
    let grid: Vec<f64> = (0..n_grid).map(|k| config.alpha + spacing * k as f64).collect();
    let ll: Vec<f64> = grid
        .par_iter()
        .map(|&th| log_likelihood(th, obs, config, spec))
        .collect::<Result<_>>()?;
    if ll.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log-likelihood on the coarse grid"));
    }

    let mut peaks: Vec<usize> = (0..n_grid)
        .filter(|&k| (k == 0 || ll[k] >= ll[k - 1]) && (k + 1 == n_grid || ll[k] >= ll[k + 1]))
        .collect();
    peaks.sort_by(|&i, &j| ll[j].total_cmp(&ll[i]));
    peaks.truncate(MLE_CANDIDATES);

    let width = 1e-4 * sqrt_eps;
    let mut iterations = n_grid;
    let mut best: Option<(f64, f64, bool)> = None;
    for &k in &peaks {
        let lo = (grid[k] - spacing).max(config.alpha);
        let hi = (grid[k] + spacing).min(config.beta);
        let (th, v, it) = golden_max(|x| log_likelihood(x, obs, config, spec), lo, hi, width)?;
        iterations += it;
        // a refined value below its own grid point means the bracket was not unimodal
        let unimodal = v >= ll[k] - 1e-9 * ll[k].abs().max(1.0);
        let (th, v) = if unimodal { (th, v) } else { (grid[k], ll[k]) };
        if best.is_none_or(|b| v > b.1) {
            best = Some((th, v, unimodal));
        }
    }
    let (mut theta, mut value, mut converged) =
        best.ok_or(Error::NonFinite("no local maximum on the coarse grid"))?;

    // Newton polish within one golden bracket width of the refined point
    let (lo, hi) = (theta - width, theta + width);
    let delta = 1e-5 * sqrt_eps;
    let grad = |th: f64| -> Result<f64> {
        log_likelihood_gradient_from(&run_filter(th, obs, config, spec, true)?)
    };
    let mut stationary = false;
    for _ in 0..8 {
        iterations += 1;
        let out = run_filter(theta, obs, config, spec, true)?;
        let g = log_likelihood_gradient_from(&out)?;
        let curv = (grad(theta + delta)? - grad(theta - delta)?) / (2.0 * delta);
        if g.abs() <= 1e-7 * curv.abs() * sqrt_eps {
            value = log_likelihood_from(&out, obs);
            stationary = true;
            break;
        }
        if !(curv < 0.0) {
            break;
        }
        let next = (theta - g / curv).clamp(lo, hi);
        let v = log_likelihood(next, obs, config, spec)?;
        if v < value - 1e-12 * value.abs().max(1.0) {
            break;
        }
        theta = next;
        value = v;
    }
    converged &= stationary;
    theta = theta.clamp(config.alpha, config.beta);

    let mut rep = EstimateReport::new(Method::Mle, theta, config, spec)?;
    rep.loglik_at_hat = value;
    rep.iterations = iterations;
    rep.converged = converged;
    rep.boundary = theta - config.alpha <= spacing || config.beta - theta <= spacing;
    Ok(rep)
}

/// Biweight kernel `K(u) = (15/16)(1 - u^2)^2` on `(-1, 1)` with bandwidth `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidth: f64,
}

impl KernelSpec {
    /// Bandwidth `phi = eps`.
    pub fn optimal(epsilon: f64) -> Self {
        KernelSpec { bandwidth: epsilon }
    }

    pub fn weight(u: f64) -> f64 {
        if u.abs() >= 1.0 {
            0.0
        } else {
            let v = 1.0 - u * u;
            15.0 / 16.0 * v * v
        }
    }

    /// `sum_i K((t_i - t)/phi) h / phi` over the grid points of `obs`.
    pub fn discrete_mass(&self, obs: &Observations, t: f64) -> f64 {
        let (lo, hi) = self.index_range(obs, t);
        (lo..hi)
            .map(|i| Self::weight((obs.time(i) - t) / self.bandwidth))
            .sum::<f64>()
            * obs.step
            / self.bandwidth
    }

    fn index_range(&self, obs: &Observations, t: f64) -> (usize, usize) {
        let n = obs.n_steps();
        let lo = ((t - self.bandwidth) / obs.step).floor().max(0.0) as usize;
        let hi = (((t + self.bandwidth) / obs.step).ceil() as usize + 1).min(n);
        (lo.min(n), hi)
    }
}

/// `z_hat_t = (1/phi) sum_i K((t_i - t)/phi) dX_i`, requiring the kernel
/// support `[t - phi, t + phi]` to lie inside `[0, T]`.
pub fn kernel_derivative(obs: &Observations, t: f64, kernel: &KernelSpec) -> Result<f64> {
    let phi = kernel.bandwidth;
    if !(phi > 0.0) {
        return Err(Error::InvalidConfig("kernel bandwidth must be positive".into()));
    }
    let horizon = obs.horizon();
    let slack = 1e-9 * obs.step;
    if t - phi < -slack || t + phi > horizon + slack {
        return Err(Error::KernelBoundary {
            lo: t - phi,
            hi: t + phi,
            horizon,
        });
    }
    let (lo, hi) = kernel.index_range(obs, t);
    let s: f64 = (lo..hi)
        .map(|i| KernelSpec::weight((obs.time(i) - t) / phi) * obs.dx[i])
        .sum();
    Ok(s / phi)
}

/// Kernel derivative with the kernel truncated to `[0, T]` and renormalized by
/// its discrete mass; equals [`kernel_derivative`] up to the mass in the interior.
fn kernel_derivative_truncated(obs: &Observations, t: f64, kernel: &KernelSpec) -> Result<f64> {
    let phi = kernel.bandwidth;
    let (lo, hi) = kernel.index_range(obs, t);
    let (mut s, mut mass) = (0.0, 0.0);
    for i in lo..hi {
        let w = KernelSpec::weight((obs.time(i) - t) / phi);
        s += w * obs.dx[i];
        mass += w;
    }
    if !(mass > 0.0) {
        return Err(Error::KernelBoundary {
            lo: t - phi,
            hi: t + phi,
            horizon: obs.horizon(),
        });
    }
    Ok(s / (mass * obs.step))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiHat {
    /// `z_t^2 - 2 sum z_k (z_{k+1} - z_k) - z_0^2`, an estimate of `b^2 int_0^t f^2`.
    pub value: f64,
    /// The same statistic without subtracting `z_0^2`.
    pub raw: f64,
    pub k_sub: usize,
    /// `t = 0`: no subdivision, value is identically zero.
    pub degenerate: bool,
}

/// The quadratic-variation statistic on an already evaluated sequence `z_0..z_K`.
pub fn psi_statistic(z: &[f64]) -> (f64, f64) {
    let (first, last) = (z[0], z[z.len() - 1]);
    let cross: f64 = z.windows(2).map(|w| w[0] * (w[1] - w[0])).sum();
    let raw = last * last - 2.0 * cross;
    (raw - first * first, raw)
}

/// `K_sub = ceil(t / sqrt(phi))`, at least 2.
pub fn default_subdivision(t: f64, kernel: &KernelSpec) -> usize {
    ((t / kernel.bandwidth.sqrt()).ceil() as usize).max(2)
}

/// `Psi_hat(t)` from kernel derivatives at `t_k = k t / K_sub`. Points whose
/// kernel support leaves `[0, T]` use the truncated, renormalized kernel.
pub fn psi_hat(
    obs: &Observations,
    t: f64,
    kernel: &KernelSpec,
    k_sub: Option<usize>,
) -> Result<PsiHat> {
    if t + kernel.bandwidth > obs.horizon() + 1e-9 * obs.step || t < 0.0 {
        return Err(Error::KernelBoundary {
            lo: t - kernel.bandwidth,
            hi: t + kernel.bandwidth,
            horizon: obs.horizon(),
        });
    }
    let z0 = kernel_derivative_truncated(obs, 0.0, kernel)?;
    if t == 0.0 {
        return Ok(PsiHat {
            value: 0.0,
            raw: z0 * z0,
            k_sub: 0,
            degenerate: true,
        });
    }
    let k_sub = k_sub.unwrap_or_else(|| default_subdivision(t, kernel));
    if k_sub < 2 {
        return Err(Error::InvalidConfig("subdivision count must be at least 2".into()));
    }
    let z: Vec<f64> = (0..=k_sub)
        .map(|k| {
            let tk = t * k as f64 / k_sub as f64;
            if tk - kernel.bandwidth >= 0.0 && tk + kernel.bandwidth <= obs.horizon() {
                kernel_derivative(obs, tk, kernel)
            } else {
                kernel_derivative_truncated(obs, tk, kernel)
            }
        })
        .collect::<Result<_>>()?;
    let (value, raw) = psi_statistic(&z);
    Ok(PsiHat {
        value,
        raw,
        k_sub,
        degenerate: false,
    })
}

/// `b^2 int_0^t f(theta s)^2 ds`.
pub fn psi_exact(theta: f64, t: f64, b: f64, spec: &SignalSpec) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let pieces = ((theta.abs() * t * 4.0).ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=pieces).map(|k| t * k as f64 / pieces as f64).collect();
    let v = quadrature::integrate_pieces(
        |s| {
            let f = spec.value(theta * s);
            f * f
        },
        &breaks,
        1e-12,
    )?;
    Ok(b * b * v)
}

/// Fractions of the horizon at which `Psi_hat` is matched.
pub const PSI_PANEL: [f64; 3] = [0.3, 0.5, 0.7];

/// Minimizer over the parameter interval of `sum_j [psi_j - b^2 int_0^{t_j} f(theta s)^2 ds]^2`.
/// Returns `(theta, objective, evaluations)`.
pub fn fit_psi_panel(
    times: &[f64],
    psi: &[f64],
    config: &ModelConfig,
    spec: &SignalSpec,
) -> Result<(f64, f64, usize)> {
    let objective = |th: f64| -> Result<f64> {
        let mut acc = 0.0;
        for (&t, &p) in times.iter().zip(psi) {
            let d = p - psi_exact(th, t, config.b, spec)?;
            acc += d * d;
        }
        Ok(acc)
    };
    const GRID: usize = 1001;
    let span = config.beta - config.alpha;
    let grid: Vec<f64> = (0..GRID)
        .map(|k| config.alpha + span * k as f64 / (GRID - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid.par_iter().map(|&th| objective(th)).collect::<Result<_>>()?;
    let (kbest, vbest) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k, *v))
        .unwrap();
    let vmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if vmax - vbest <= 1e-12 * vmax.abs().max(1.0) {
        return Err(Error::Unidentifiable("Psi objective is flat in theta".into()));
    }
    let step = span / (GRID - 1) as f64;
    let lo = (grid[kbest] - step).max(config.alpha);
    let hi = (grid[kbest] + step).min(config.beta);
    let (th, neg, it) = golden_max(|x| objective(x).map(|v| -v), lo, hi, 1e-10)?;
    Ok((th, -neg, GRID + it))
}

/// Kernel estimator matching `Psi_hat` to its deterministic counterpart on the
/// panel `t_j in {0.3T, 0.5T, 0.7T}`.
pub fn psi_estimator(
    obs: &Observations,
    config: &ModelConfig,
    spec: &SignalSpec,
    kernel: &KernelSpec,
) -> Result<EstimateReport> {
    if !(config.b > 0.0) {
        return Err(Error::InvalidConfig("the Psi estimator needs b > 0".into()));
    }
    let times: Vec<f64> = PSI_PANEL.iter().map(|p| p * config.horizon).collect();
    let psi: Vec<f64> = times
        .iter()
        .map(|&t| psi_hat(obs, t, kernel, None).map(|p| p.value))
        .collect::<Result<_>>()?;
    let (theta, _, evals) = fit_psi_panel(&times, &psi, config, spec)?;
    let mut rep = EstimateReport::new(Method::KernelPsi, theta, config, spec)?;
    rep.loglik_at_hat = log_likelihood(theta, obs, config, spec)?;
    rep.iterations = evals;
    let step = (config.beta - config.alpha) / 1000.0;
    rep.boundary = theta - config.alpha <= step || config.beta - theta <= step;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitModelOracle {
    pub psi_tilde: Vec<f64>,
    pub tau: f64,
    pub theta_recovered: f64,
}

/// Noise-free recovery of the frequency of `f(theta t) = A cos(theta t)` from
/// `Psi(t) = b^2 (A^2 t/2 + A^2 sin(2 theta t)/(4 theta))`:
/// `tau` is the first root of `Psi(t)/b^2 - A^2 t/2` after the first positive
/// grid time, and `theta = pi / (2 tau)`.
pub fn limit_model_oracle(theta: f64, amp: f64, b: f64, t_grid: &[f64]) -> Result<LimitModelOracle> {
    if !(theta > 0.0 && amp != 0.0 && b > 0.0) {
        return Err(Error::InvalidConfig("limit model needs theta > 0, A != 0, b > 0".into()));
    }
    let a2 = amp * amp;
    let psi = |t: f64| b * b * (a2 * t / 2.0 + a2 * (2.0 * theta * t).sin() / (4.0 * theta));
    let tilde = |t: f64| psi(t) / (b * b) - a2 * t / 2.0;
    let psi_tilde: Vec<f64> = t_grid.iter().map(|&t| tilde(t)).collect();

    let start = t_grid
        .iter()
        .position(|&t| t > 0.0)
        .ok_or_else(|| Error::RootNotFound("no positive time on the grid".into()))?;
    let bracket = (start + 1..t_grid.len())
        .find(|&k| psi_tilde[k] == 0.0 || psi_tilde[k].signum() != psi_tilde[k - 1].signum())
        .ok_or_else(|| Error::RootNotFound("no sign change of the reduced Psi on the grid".into()))?;
    let (mut lo, mut hi) = (t_grid[bracket - 1], t_grid[bracket]);
    let tau = if psi_tilde[bracket] == 0.0 {
        hi
    } else {
        let s_lo = psi_tilde[bracket - 1].signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if tilde(mid).signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(LimitModelOracle {
        psi_tilde,
        tau,
        theta_recovered: std::f64::consts::PI / (2.0 * tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::simulate;
    use std::f64::consts::PI;

    #[test]
    fn kernel_integrates_to_one_and_is_smooth_at_edges() {
        let n = 200_000;
        let s: f64 = (0..n)
            .map(|k| KernelSpec::weight(-1.0 + 2.0 * (k as f64 + 0.5) / n as f64))
            .sum::<f64>()
            * 2.0
            / n as f64;
        assert!((s - 1.0).abs() < 1e-9);
        let d = 1e-6;
        assert!(KernelSpec::weight(1.0 - d) / d < 1e-5);
        assert_eq!(KernelSpec::weight(1.0), 0.0);
    }

    #[test]
    fn discrete_kernel_mass() {
        let spec = SignalSpec::default();
        let cfg = ModelConfig::reference(0.02).with_seed(1);
        let path = simulate(&cfg, &spec).unwrap();
        let k = KernelSpec::optimal(cfg.epsilon);
        for t in [0.5, 3.3, 5.0, 9.9] {
            assert!((k.discrete_mass(&path.obs, t) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn kernel_boundary_errors() {
        let spec = SignalSpec::default();
        let cfg = ModelConfig::reference(0.05).with_seed(1);
        let path = simulate(&cfg, &spec).unwrap();
        let k = KernelSpec::optimal(0.05);
        assert!(matches!(
            kernel_derivative(&path.obs, 0.01, &k),
            Err(Error::KernelBoundary { .. })
        ));
        assert!(matches!(
            kernel_derivative(&path.obs, 9.99, &k),
            Err(Error::KernelBoundary { .. })
        ));
        assert!(kernel_derivative(&path.obs, 0.05, &k).is_ok());
    }

    #[test]
    fn kernel_derivative_of_pure_drift() {
        let spec = SignalSpec::default();
        let mut cfg = ModelConfig::reference(1e-4);
        cfg.b = 0.0;
        cfg = cfg.with_steps(100_000);
        let path = simulate(&cfg, &spec).unwrap();
        for phi in [0.02, 0.01] {
            let k = KernelSpec { bandwidth: phi };
            for t in [1.0, 2.5, 7.3] {
                let z = kernel_derivative(&path.obs, t, &k).unwrap();
                let exact = spec.value(t) * (-t).exp();
                assert!((z - exact).abs() < 2.0 * phi, "t={t} {z} vs {exact}");
            }
        }
    }

    #[test]
    fn psi_statistic_telescopes() {
        let z = [3.0, 2.5, 2.7, 1.0, 1.2];
        let (value, raw) = psi_statistic(&z);
        let qv: f64 = z.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        assert!((value - qv).abs() < 1e-12);
        assert!((raw - 9.0 - qv).abs() < 1e-12);
    }

    #[test]
    fn psi_statistic_with_exact_z_recovers_psi() {
        let spec = SignalSpec::default();
        let t = 5.0;
        let exact = psi_exact(1.0, t, 1.0, &spec).unwrap();
        for y0 in [0.0, 1.0] {
            let mut cfg = ModelConfig::reference(0.05).with_steps(400_000).with_seed(4);
            cfg.y0 = y0;
            let path = simulate(&cfg, &spec).unwrap();
            let mut errs = Vec::new();
            for k_sub in [500usize, 2000, 8000] {
                let stride = (t / cfg.step) as usize / k_sub;
                let z: Vec<f64> = (0..=k_sub)
                    .map(|k| {
                        let i = k * stride;
                        spec.value(cfg.time(i)) * path.y[i]
                    })
                    .collect();
                errs.push((psi_statistic(&z).0 - exact).abs() / exact);
            }
            // realized variance error scales like sqrt(2 / K_sub)
            assert!(errs[2] < 0.05, "{errs:?}");
            assert!(errs[2] < errs[0] + 0.01, "{errs:?}");
        }
    }

    #[test]
    fn psi_hat_at_zero_is_degenerate() {
        let spec = SignalSpec::default();
        let cfg = ModelConfig::reference(0.05).with_seed(2);
        let path = simulate(&cfg, &spec).unwrap();
        let p = psi_hat(&path.obs, 0.0, &KernelSpec::optimal(0.05), None).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.value, 0.0);
        assert!(p.raw > 0.0);
    }

    #[test]
    fn psi_fit_on_exact_values() {
        let spec = SignalSpec::default();
        let cfg = ModelConfig::reference(0.02);
        let times: Vec<f64> = PSI_PANEL.iter().map(|p| p * cfg.horizon).collect();
        let psi: Vec<f64> = times.iter().map(|&t| psi_exact(1.0, t, 1.0, &spec).unwrap()).collect();
        let (th, obj, _) = fit_psi_panel(&times, &psi, &cfg, &spec).unwrap();
        assert!((th - 1.0).abs() < 1e-3, "{th}");
        assert!(obj < 1e-10);
    }

    #[test]
    fn psi_fit_flat_for_constant_signal() {
        let spec = SignalSpec::offset_cosine(2.0, 0.0).unwrap();
        let cfg = ModelConfig::reference(0.02);
        let times = [3.0, 5.0, 7.0];
        let psi = [12.0, 20.0, 28.0];
        assert!(matches!(
            fit_psi_panel(&times, &psi, &cfg, &spec),
            Err(Error::Unidentifiable(_))
        ));
    }

    #[test]
    fn psi_exact_closed_form() {
        let spec = SignalSpec::default();
        let (th, t) = (1.3, 4.2);
        let w = 2.0 * PI * th;
        let closed = 4.0 * t + 4.0 * (w * t).sin() / w + t / 2.0 + (2.0 * w * t).sin() / (4.0 * w);
        let v = psi_exact(th, t, 2.0, &spec).unwrap();
        assert!((v / (4.0 * closed) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_oracle_examples() {
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let o = limit_model_oracle(1.0, 1.0, 1.0, &grid).unwrap();
        assert!((o.tau - PI / 2.0).abs() < 1e-12);
        assert!((o.theta_recovered - 1.0).abs() < 1e-12);
        assert!((o.psi_tilde[100] - (2.0f64).sin() / 4.0).abs() < 1e-14);
        let o2 = limit_model_oracle(2.0, 1.0, 3.0, &grid).unwrap();
        assert!((o2.tau - PI / 4.0).abs() < 1e-12);
        let short = [0.0, 0.1, 0.2];
        assert!(matches!(
            limit_model_oracle(1.0, 1.0, 1.0, &short),
            Err(Error::RootNotFound(_))
        ));
    }

    #[test]
    fn mle_noiseless_identifiability() {
        let spec = SignalSpec::default();
        let mut cfg = ModelConfig::reference(1e-4);
        cfg.b = 0.0;
        cfg = cfg.with_steps(20_000);
        let path = simulate(&cfg, &spec).unwrap();
        let rep = mle(&path.obs, &cfg, &spec).unwrap();
        assert!((rep.theta_hat - 1.0).abs() < 1e-2, "{rep:?}");
    }

    #[test]
    fn mle_single_seed_and_stationarity() {
        let spec = SignalSpec::default();
        let cfg = ModelConfig::reference(0.02).with_seed(20);
        let path = simulate(&cfg, &spec).unwrap();
        let rep = mle(&path.obs, &cfg, &spec).unwrap();
        let i0 = fisher_limit(1.0, 10.0, 1.0, &spec).unwrap();
        assert!(rep.converged && !rep.boundary, "{rep:?}");
        assert!((rep.theta_hat - 1.0).abs() <= 4.0 * (0.02 / i0).sqrt(), "{rep:?}");
        let ll = |th: f64| log_likelihood(th, &path.obs, &cfg, &spec).unwrap();
        let d = 1e-6;
        let th = rep.theta_hat;
        let (lm, l0, lp) = (ll(th - d), ll(th), ll(th + d));
        let grad = (lp - lm) / (2.0 * d);
        let dd = 1e-4;
        let curv = (ll(th + dd) - 2.0 * l0 + ll(th - dd)) / (dd * dd);
        assert!(grad.abs() <= 1e-6 * curv.abs() * 0.02f64.sqrt(), "{grad} {curv}");
        assert!((l0 - rep.loglik_at_hat).abs() < 1e-9 * l0.abs());
    }

    #[test]
    fn report_csv_row() {
        let spec = SignalSpec::default();
        let cfg = ModelConfig::reference(0.04).with_seed(7);
        let rep = EstimateReport::new(Method::Mle, 1.01, &cfg, &spec).unwrap();
        let row = rep.csv_row();
        assert!(row.starts_with("7,mle,"));
        assert_eq!(row.split(',').count(), EstimateReport::CSV_HEADER.split(',').count());
        assert!(rep.se_hat > 0.0);
    }
}
