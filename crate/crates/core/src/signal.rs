//! The known periodic modulation `f` (period 1) and its derivatives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Shape of the periodic modulation. All kinds have period 1 in their argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    /// `f(s) = offset + amplitude * cos(2 pi s)`.
    OffsetCosine { offset: f64, amplitude: f64 },
    /// `f(s) = offset + amplitude * (1 + cos(2 pi s)) / 2`.
    RaisedCosine { offset: f64, amplitude: f64 },
    /// `f(s) = offset + sum_k cos[k-1] cos(2 pi k s) + sin[k-1] sin(2 pi k s)`.
    CustomHarmonic {
        offset: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec::OffsetCosine {
            offset: 2.0,
            amplitude: 1.0,
        }
    }
}

/// Value and first two derivatives of `f` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalValue {
    pub f: f64,
    pub f_prime: f64,
    pub f_double_prime: f64,
}

impl SignalSpec {
    pub fn offset_cosine(offset: f64, amplitude: f64) -> Result<Self> {
        SignalSpec::OffsetCosine { offset, amplitude }.validated()
    }

    pub fn raised_cosine(offset: f64, amplitude: f64) -> Result<Self> {
        SignalSpec::RaisedCosine { offset, amplitude }.validated()
    }

    pub fn custom_harmonic(offset: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        SignalSpec::CustomHarmonic { offset, cos, sin }.validated()
    }

    /// Checks finiteness and strict positivity; returns the spec unchanged on success.
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match self {
            SignalSpec::OffsetCosine { offset, amplitude }
            | SignalSpec::RaisedCosine { offset, amplitude } => {
                offset.is_finite() && amplitude.is_finite()
            }
            SignalSpec::CustomHarmonic { offset, cos, sin } => {
                offset.is_finite() && cos.iter().chain(sin).all(|v| v.is_finite())
            }
        };
        if !finite {
            return Err(Error::InvalidSignal("non-finite coefficient".into()));
        }
        if let SignalSpec::OffsetCosine { offset, amplitude } = self {
            if *offset <= amplitude.abs() {
                return Err(Error::InvalidSignal(format!(
                    "offset-cosine requires offset > |amplitude| (got offset {offset}, amplitude {amplitude})"
                )));
            }
        }
        let (kappa, _) = self.bounds_unchecked();
        if kappa <= 0.0 {
            return Err(Error::InvalidSignal(format!(
                "infimum of f over one period is {kappa}, must be positive"
            )));
        }
        Ok(())
    }

    /// True when `f` does not depend on its argument.
    pub fn is_constant(&self) -> bool {
        match self {
            SignalSpec::OffsetCosine { amplitude, .. } | SignalSpec::RaisedCosine { amplitude, .. } => {
                *amplitude == 0.0
            }
            SignalSpec::CustomHarmonic { cos, sin, .. } => {
                cos.iter().chain(sin).all(|&v| v == 0.0)
            }
        }
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match self {
            SignalSpec::OffsetCosine { offset, amplitude } => offset + amplitude * (TWO_PI * s).cos(),
            SignalSpec::RaisedCosine { offset, amplitude } => {
                offset + 0.5 * amplitude * (1.0 + (TWO_PI * s).cos())
            }
            SignalSpec::CustomHarmonic { .. } => self.eval(s).f,
        }
    }

    /// `(f(s), f'(s))`, the pair needed in the filter inner loops.
    #[inline]
    pub fn value_and_slope(&self, s: f64) -> (f64, f64) {
        match self {
            SignalSpec::OffsetCosine { offset, amplitude } => {
                let (sn, cs) = (TWO_PI * s).sin_cos();
                (offset + amplitude * cs, -TWO_PI * amplitude * sn)
            }
            SignalSpec::RaisedCosine { offset, amplitude } => {
                let (sn, cs) = (TWO_PI * s).sin_cos();
                (offset + 0.5 * amplitude * (1.0 + cs), -PI * amplitude * sn)
            }
            SignalSpec::CustomHarmonic { .. } => {
                let v = self.eval(s);
                (v.f, v.f_prime)
            }
        }
    }

    pub fn eval(&self, s: f64) -> SignalValue {
        match self {
            SignalSpec::OffsetCosine { offset, amplitude } => {
                let (sn, cs) = (TWO_PI * s).sin_cos();
                SignalValue {
                    f: offset + amplitude * cs,
                    f_prime: -TWO_PI * amplitude * sn,
                    f_double_prime: -TWO_PI * TWO_PI * amplitude * cs,
                }
            }
            SignalSpec::RaisedCosine { offset, amplitude } => {
                let (sn, cs) = (TWO_PI * s).sin_cos();
                SignalValue {
                    f: offset + 0.5 * amplitude * (1.0 + cs),
                    f_prime: -PI * amplitude * sn,
                    f_double_prime: -2.0 * PI * PI * amplitude * cs,
                }
            }
            SignalSpec::CustomHarmonic { offset, cos, sin } => {
                let mut out = SignalValue {
                    f: *offset,
                    f_prime: 0.0,
                    f_double_prime: 0.0,
                };
                let n = cos.len().max(sin.len());
                for k in 1..=n {
                    let w = TWO_PI * k as f64;
                    let (sn, cs) = (w * s).sin_cos();
                    let ac = cos.get(k - 1).copied().unwrap_or(0.0);
                    let bs = sin.get(k - 1).copied().unwrap_or(0.0);
                    out.f += ac * cs + bs * sn;
                    out.f_prime += w * (bs * cs - ac * sn);
                    out.f_double_prime -= w * w * (ac * cs + bs * sn);
                }
                out
            }
        }
    }

    /// `(kappa, K)`: infimum and supremum of `f` over one period.
    pub fn bounds(&self) -> Result<(f64, f64)> {
        let (kappa, sup) = self.bounds_unchecked();
        if kappa <= 0.0 {
            return Err(Error::InvalidSignal(format!("kappa = {kappa} is not positive")));
        }
        Ok((kappa, sup))
    }

    fn bounds_unchecked(&self) -> (f64, f64) {
        match self {
            SignalSpec::OffsetCosine { offset, amplitude } => {
                (offset - amplitude.abs(), offset + amplitude.abs())
            }
            SignalSpec::RaisedCosine { offset, amplitude } => {
                let lo = offset.min(offset + amplitude);
                let hi = offset.max(offset + amplitude);
                (lo, hi)
            }
            SignalSpec::CustomHarmonic { .. } => self.grid_bounds(),
        }
    }

    /// Dense grid scan followed by Newton refinement on `f'` at the extremal cells.
    fn grid_bounds(&self) -> (f64, f64) {
        const GRID: usize = 16_384;
        let (mut imin, mut imax) = (0, 0);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..GRID {
            let v = self.value(i as f64 / GRID as f64);
            if v < vmin {
                vmin = v;
                imin = i;
            }
            if v > vmax {
                vmax = v;
                imax = i;
            }
        }
        let refine = |i: usize, best: f64, better: fn(f64, f64) -> bool| {
            let mut s = i as f64 / GRID as f64;
            let mut best = best;
            let cell = 1.0 / GRID as f64;
            let (lo, hi) = (s - cell, s + cell);
            for _ in 0..30 {
                let v = self.eval(s);
                if v.f_double_prime == 0.0 {
                    break;
                }
                let next = (s - v.f_prime / v.f_double_prime).clamp(lo, hi);
                if (next - s).abs() < 1e-15 {
                    s = next;
                    break;
                }
                s = next;
            }
            let v = self.value(s);
            if better(v, best) {
                best = v;
            }
            best
        };
        let kappa = refine(imin, vmin, |a, b| a < b);
        let sup = refine(imax, vmax, |a, b| a > b);
        (kappa, sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn offset_cosine_points() {
        let s = SignalSpec::offset_cosine(2.0, 1.0).unwrap();
        let v = s.eval(0.0);
        assert!(close(v.f, 3.0, 1e-12) && close(v.f_prime, 0.0, 1e-12));
        assert!(close(v.f_double_prime, -4.0 * PI * PI, 1e-10));
        let v = s.eval(0.5);
        assert!(close(v.f, 1.0, 1e-12) && close(v.f_prime, 0.0, 1e-10));
        assert!(close(v.f_double_prime, 4.0 * PI * PI, 1e-10));
        let v = s.eval(0.25);
        assert!(close(v.f, 2.0, 1e-12) && close(v.f_prime, -2.0 * PI, 1e-12));
        assert!(close(v.f_double_prime, 0.0, 1e-10));
    }

    #[test]
    fn positivity_violation_rejected() {
        assert!(SignalSpec::offset_cosine(1.0, 1.0).is_err());
        assert!(SignalSpec::offset_cosine(0.5, -1.0).is_err());
        assert!(SignalSpec::raised_cosine(0.0, 1.0).is_err());
        assert!(SignalSpec::custom_harmonic(0.5, vec![1.0], vec![]).is_err());
    }

    #[test]
    fn analytic_bounds() {
        let s = SignalSpec::offset_cosine(2.0, 1.0).unwrap();
        assert_eq!(s.bounds().unwrap(), (1.0, 3.0));
        let s = SignalSpec::offset_cosine(5.0, 0.0).unwrap();
        assert_eq!(s.bounds().unwrap(), (5.0, 5.0));
        assert!(s.is_constant());
        let s = SignalSpec::raised_cosine(0.5, 2.0).unwrap();
        assert_eq!(s.bounds().unwrap(), (0.5, 2.5));
    }

    #[test]
    fn custom_harmonic_bounds_match_dense_grid() {
        let s = SignalSpec::custom_harmonic(2.0, vec![0.5], vec![0.0, 0.25]).unwrap();
        let (kappa, sup) = s.bounds().unwrap();
        // independent oracle: 10^6-point scan
        let n = 1_000_000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let x = i as f64 / n as f64;
            let f = 2.0 + 0.5 * (2.0 * PI * x).cos() + 0.25 * (4.0 * PI * x).sin();
            lo = lo.min(f);
            hi = hi.max(f);
        }
        assert!(kappa <= lo + 1e-12 && lo - kappa < 1e-9, "{kappa} vs {lo}");
        assert!(sup >= hi - 1e-12 && sup - hi < 1e-9, "{sup} vs {hi}");
    }

    #[test]
    fn bounds_bracket_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for spec in [
            SignalSpec::default(),
            SignalSpec::custom_harmonic(2.0, vec![0.5], vec![0.0, 0.25]).unwrap(),
        ] {
            let (kappa, sup) = spec.bounds().unwrap();
            for _ in 0..100_000 {
                let s: f64 = rng.gen_range(-50.0..50.0);
                let f = spec.value(s);
                assert!(f >= kappa - 1e-12 && f <= sup + 1e-12);
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let s = SignalSpec::custom_harmonic(2.0, vec![0.5], vec![0.0, 0.25]).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"kind\":\"custom-harmonic\""));
        let back: SignalSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
    }

    fn any_spec() -> impl Strategy<Value = SignalSpec> {
        prop_oneof![
            (-2.0..2.0f64).prop_map(|a| SignalSpec::OffsetCosine { offset: a.abs() + 0.5, amplitude: a }),
            (0.1..3.0f64, 0.0..3.0f64).prop_map(|(c, a)| SignalSpec::RaisedCosine { offset: c, amplitude: a }),
            (
                proptest::collection::vec(-0.5..0.5f64, 0..3),
                proptest::collection::vec(-0.5..0.5f64, 0..3)
            )
                .prop_map(|(c, s)| SignalSpec::CustomHarmonic { offset: 4.0, cos: c, sin: s }),
        ]
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(spec in any_spec(), s in -3.0..3.0f64) {
            let h = 1e-6;
            let v = spec.eval(s);
            let fd1 = (spec.value(s + h) - spec.value(s - h)) / (2.0 * h);
            prop_assert!((fd1 - v.f_prime).abs() <= 1e-6 * (1.0 + v.f_prime.abs()));
            let fd2 = (spec.eval(s + h).f_prime - spec.eval(s - h).f_prime) / (2.0 * h);
            prop_assert!((fd2 - v.f_double_prime).abs() <= 1e-6 * (1.0 + v.f_double_prime.abs()));
        }

        #[test]
        fn periodic(spec in any_spec(), s in 0.0..1.0f64, n in 1i32..100) {
            prop_assert!((spec.value(s) - spec.value(s + n as f64)).abs() <= 1e-10);
        }

        #[test]
        fn value_and_slope_agree_with_eval(spec in any_spec(), s in -3.0..3.0f64) {
            let (f, fp) = spec.value_and_slope(s);
            let v = spec.eval(s);
            prop_assert!((f - v.f).abs() < 1e-13 && (fp - v.f_prime).abs() < 1e-12);
        }
    }
}
