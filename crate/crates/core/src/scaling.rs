//! Slowly varying functions and the deterministic norming functions.
//!
//! `H(y)` inverts `x ↦ x^{−α} L(x)`, `h(t) = H(e^{−λt})` normalizes the
//! running maximum, and `r(t)` solves `h(r(t)) = Λ(t)` for a threshold
//! curve Λ. With `L ≡ 1` these collapse to the closed forms
//! `H(y) = y^{−1/α}`, `h(t) = e^{λt/α}` and `r(t) = ct` for
//! `Λ(t) = e^{cλt/α}`.

use std::sync::Arc;

use crate::{Error, Result};

/// Supported slowly varying families. Both have `L(0⁺)` finite and positive
/// and keep `x ↦ x^{−α} L(x)` strictly decreasing for every `α ∈ (0, 2)`
/// and `|r| ≤ 4` (validated numerically on a log grid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowVariationSpec {
    /// `L(x) = c` with `c > 0`.
    Constant(f64),
    /// `L(x) = (log(e + x))^r`.
    LogPower(f64),
}

impl SlowVariationSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowVariationSpec::Constant(c) => c,
            SlowVariationSpec::LogPower(r) => (std::f64::consts::E + x).ln().powf(r),
        }
    }

    /// Checks positivity and the strict monotonicity of `x^{−α} L(x)` on a
    /// log grid spanning `[1e−8, 1e12]`.
    pub fn validate_for(&self, alpha: f64) -> Result<()> {
        match *self {
            SlowVariationSpec::Constant(c) if !(c > 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "constant slowly varying factor must be positive, got {c}"
                )));
            }
            SlowVariationSpec::LogPower(r) if !(r.is_finite() && r.abs() <= 4.0) => {
                return Err(Error::InvalidParameter(format!(
                    "log-power exponent {r} outside the validated range |r| <= 4"
                )));
            }
            _ => {}
        }
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let x = 10f64.powf(-8.0 + 20.0 * i as f64 / 400.0);
            let g = x.powf(-alpha) * self.eval(x);
            if !(g < prev) {
                return Err(Error::InvalidParameter(format!(
                    "x^(-alpha) L(x) fails to decrease near x = {x:.3e} for alpha = {alpha}"
                )));
            }
            prev = g;
        }
        Ok(())
    }
}

/// `H(y)`: the inverse of `x ↦ x^{−α} L(x)`, so `H(y)^{−α} L(H(y)) = y`.
pub fn big_h(l: &SlowVariationSpec, alpha: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("big_h argument {y} must be positive")));
    }
    if let SlowVariationSpec::Constant(c) = *l {
        return Ok((y / c).powf(-1.0 / alpha));
    }
    l.validate_for(alpha)?;
    // solve -alpha u + ln L(e^u) = ln y by bisection in u = ln x
    let target = y.ln();
    let g = |u: f64| -alpha * u + l.eval(u.exp()).ln();
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut step = 1.0f64;
    if g(0.0) >= target {
        // decreasing g: root is above
        while g(hi) >= target {
            hi += step;
            step *= 2.0;
            if hi > 1e6 {
                return Err(Error::NoConvergence("big_h bracket expansion failed".into()));
            }
        }
    } else {
        while g(lo) < target {
            lo -= step;
            step *= 2.0;
            if lo < -1e6 {
                return Err(Error::NoConvergence("big_h bracket expansion failed".into()));
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `h(t) = H(e^{−λt})`, strictly increasing in `t`.
pub fn h_of_t(l: &SlowVariationSpec, alpha: f64, lambda: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("h_of_t time {t} negative")));
    }
    big_h(l, alpha, (-lambda * t).exp())
}

/// `r(t) = −(1/λ) log(Λ(t)^{−α} L(Λ(t)))`, the time at which `h` reaches
/// the threshold: `h(r(t)) = Λ(t)`.
pub fn r_of_t(
    l: &SlowVariationSpec,
    alpha: f64,
    lambda: f64,
    threshold: &ThresholdSpec,
    t: f64,
) -> Result<f64> {
    let lam = threshold.eval(t);
    if !(lam > 0.0) {
        return Err(Error::Domain(format!("threshold {lam} must be positive at t = {t}")));
    }
    Ok(-(lam.powf(-alpha) * l.eval(lam)).ln() / lambda)
}

/// Norming sequences for the almost-sure results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormingKind {
    /// `H(e^{−λt} log t)` — the liminf scale.
    Liminf,
    /// `H(t^{−1} e^{−λt})` — the log-asymptotics scale.
    LogScale,
}

pub fn as_norming(
    l: &SlowVariationSpec,
    alpha: f64,
    lambda: f64,
    t: f64,
    kind: NormingKind,
) -> Result<f64> {
    if t <= 1.0 {
        return Err(Error::Domain(format!("as_norming needs t > 1, got {t}")));
    }
    let y = match kind {
        NormingKind::Liminf => (-lambda * t).exp() * t.ln(),
        NormingKind::LogScale => (-lambda * t).exp() / t,
    };
    big_h(l, alpha, y)
}

/// Declared growth regime of a threshold curve relative to `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `Λ(t)/h(t) → ∞` (upper deviations); constant multiples of `h`
    /// are also declared here — they sit at the regime boundary and are
    /// normalized the same way.
    Super,
    /// `Λ(t)/h(t) → 0` (lower deviations).
    Sub,
}

/// A threshold curve `t ↦ Λ(t) > 0` with its declared regime.
#[derive(Clone)]
pub struct ThresholdSpec {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    regime: Regime,
    monotone: bool,
    label: String,
}

impl std::fmt::Debug for ThresholdSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThresholdSpec")
            .field("regime", &self.regime)
            .field("monotone", &self.monotone)
            .field("label", &self.label)
            .finish()
    }
}

impl ThresholdSpec {
    pub fn new<F>(f: F, regime: Regime, monotone: bool, label: impl Into<String>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            regime,
            monotone,
            label: label.into(),
        }
    }

    /// `Λ(t) = x · h(t)`.
    pub fn multiple_of_h(x: f64, l: SlowVariationSpec, alpha: f64, lambda: f64) -> Self {
        Self::new(
            move |t| x * h_of_t(&l, alpha, lambda, t).expect("h defined for t >= 0"),
            Regime::Super,
            true,
            format!("{x}*h(t)"),
        )
    }

    /// `Λ(t) = a e^{c λ t / α}`; super regime for `c > 1`, sub for `c < 1`.
    pub fn exponential(a: f64, c: f64, alpha: f64, lambda: f64) -> Self {
        let regime = if c >= 1.0 { Regime::Super } else { Regime::Sub };
        Self::new(
            move |t| a * (c * lambda * t / alpha).exp(),
            regime,
            true,
            format!("{a}*exp({c}*lambda*t/alpha)"),
        )
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Grid sanity check: positivity, monotonicity when flagged, and no
    /// clear contradiction with the declared regime.
    pub fn validate(&self, l: &SlowVariationSpec, alpha: f64, lambda: f64) -> Result<()> {
        let grid = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
        let mut prev = None;
        let mut first_ratio = None;
        let mut last_ratio = None;
        for &t in &grid {
            let v = self.eval(t);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "threshold {} nonpositive at t = {t}",
                    self.label
                )));
            }
            if self.monotone {
                if let Some(p) = prev {
                    if v < p {
                        return Err(Error::InvalidParameter(format!(
                            "threshold {} declared monotone but decreases at t = {t}",
                            self.label
                        )));
                    }
                }
            }
            prev = Some(v);
            let ratio = v / h_of_t(l, alpha, lambda, t)?;
            if first_ratio.is_none() {
                first_ratio = Some(ratio);
            }
            last_ratio = Some(ratio);
        }
        let (first, last) = (first_ratio.unwrap(), last_ratio.unwrap());
        match self.regime {
            Regime::Super if last < 0.5 * first => Err(Error::InvalidParameter(format!(
                "threshold {} declared super but Λ/h fell from {first:.3e} to {last:.3e}",
                self.label
            ))),
            Regime::Sub if last > 0.5 * first => Err(Error::InvalidParameter(format!(
                "threshold {} declared sub but Λ/h moved from {first:.3e} to {last:.3e}",
                self.label
            ))),
            _ => Ok(()),
        }
    }

    /// Partial-sum heuristic for `Σ n Λ(n)^{−α} L(Λ(n)) < ∞`. Returns a
    /// warning string when the tail has not visibly settled; this is a
    /// plausibility check, not a proof.
    pub fn summability_warning(&self, l: &SlowVariationSpec, alpha: f64) -> Option<String> {
        let term = |n: usize| {
            let lam = self.eval(n as f64);
            n as f64 * lam.powf(-alpha) * l.eval(lam)
        };
        let s128: f64 = (1..=128).map(term).sum();
        let s256: f64 = (1..=256).map(term).sum();
        if s256 - s128 > 0.02 * s256.max(1e-300) {
            Some(format!(
                "partial sums of n Λ(n)^(-α) L(Λ(n)) still growing ({s128:.4e} -> {s256:.4e}); \
                 summability hypothesis doubtful for {}",
                self.label
            ))
        } else {
            None
        }
    }

    /// Numeric check that `Λ(t) ≥ e^{γt}` for some fixed `γ > 0`:
    /// `log Λ(t)/t` must stay bounded away from zero and must not keep
    /// halving along the grid (which is how polynomial growth looks here).
    pub fn grows_exponentially(&self) -> bool {
        let rate_at = |t: f64| self.eval(t).ln() / t;
        let early = rate_at(8.0);
        let late = rate_at(64.0);
        late > 1e-4 && late > 0.5 * early
    }
}
