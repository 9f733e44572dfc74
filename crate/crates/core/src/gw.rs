//! Deterministic numerics for the continuous-time Galton–Watson skeleton.
//!
//! The skeleton `Z_t` of the particle system is a continuous-time
//! Galton–Watson process with branching rate β and offspring law `{p_k}`.
//! This module computes the deterministic objects attached to it:
//!
//! * the offspring pgf `f(s) = Σ p_k s^k` and its flow
//!   `F(s, t) = E s^{Z_t}`, solved from `∂_t F = β (f(F) − F)`;
//! * the extinction probability `q` (smallest root of `f(s) = s` on `[0,1)`),
//!   the growth rate `λ = β(μ − 1)` and the decay rate `ρ = β(1 − f'(q))`;
//! * the limit `A(s) = lim e^{ρt}(F(s,t) − q)`, computed from
//!   `A(s) = s − q + ∫₀^∞ β e^{ρr} V(F(s,r)) dr` with
//!   `V(s) = f(s) − f'(q)s − q(1 − f'(q))`;
//! * the Laplace transform `φ(θ) = E e^{−θW}` of the martingale limit
//!   `W = lim e^{−λt} Z_t`;
//! * `ϑ = ∫₀^∞ e^{−λr} P(Z_r > 0) dr` and `ϑ* = (q₁/α) ϑ`;
//! * the cluster-size law `P(T = k) = ϑ^{-1} ∫₀^∞ e^{−λr} P(Z_r = k) dr`,
//!   with `P(Z_r = k)` extracted as a Taylor coefficient of `F(·, r)` on a
//!   circle in the unit disk;
//! * the functional `C(φ) = ∫₀^∞ e^{−λr} ∫ (1 − F(φ(x), r)) v_α(dx) dr`.
//!
//! Offspring laws are restricted to finite support, which guarantees the
//! `Σ k log k p_k < ∞` moment condition and a finite `f''` everywhere on
//! `[0, 1]`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::ode::rk45;
use crate::quad::adaptive_simpson;
use crate::stable::StableMotionParams;
use crate::{Error, Result};

const PMF_SUM_TOL: f64 = 1e-12;
const ODE_TOL: f64 = 1e-11;
const DOMAIN_SLACK: f64 = 1e-12;

/// Finite-support offspring distribution together with the branching rate β.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    beta: f64,
    mean: f64,
}

impl OffspringLaw {
    /// Builds a law from `(k, p_k)` pairs. Probabilities must sum to one,
    /// the mean must exceed one (supercritical) and `p_1 < 1`.
    pub fn new(pmf: &[(u32, f64)], beta: f64) -> Result<Self> {
        let max_k = pmf.iter().map(|&(k, _)| k).max().unwrap_or(0) as usize;
        let mut probs = vec![0.0; max_k + 1];
        for &(k, p) in pmf {
            probs[k as usize] += p;
        }
        Self::from_probs(probs, beta)
    }

    /// Builds a law from a dense vector `probs[k] = p_k`.
    pub fn from_probs(probs: Vec<f64>, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "branching rate must be positive, got {beta}"
            )));
        }
        let mut probs = probs;
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty offspring pmf".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter(
                "offspring probabilities must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "offspring pmf sums to {total}, expected 1 within {PMF_SUM_TOL:e}"
            )));
        }
        let mean: f64 = probs.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
        if mean <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "offspring mean {mean} must exceed 1 (supercritical)"
            )));
        }
        if probs.len() > 1 && probs[1] >= 1.0 {
            return Err(Error::InvalidParameter("p_1 = 1 is degenerate".into()));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(Self {
            probs,
            cumulative,
            beta,
            mean,
        })
    }

    /// The binary fission law `p_2 = 1` (a Yule process for any β).
    pub fn yule(beta: f64) -> Self {
        Self::from_probs(vec![0.0, 0.0, 1.0], beta).expect("yule law is valid")
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_family_size(&self) -> usize {
        self.probs.len() - 1
    }

    /// True when `p_k = 0` for all `k ≥ 3`, the regime where λ = ρ.
    pub fn is_binary(&self) -> bool {
        self.probs.len() <= 3
    }

    /// True when the law is pure binary fission (`p_2 = 1`), in which case
    /// the martingale limit `W` is exactly Exp(1).
    pub fn is_pure_fission(&self) -> bool {
        self.probs.len() == 3 && (self.probs[2] - 1.0).abs() <= PMF_SUM_TOL
    }

    /// Offspring pgf `f(s) = Σ p_k s^k` for `s ∈ [0, 1]`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&s) {
            return Err(Error::Domain(format!("pgf argument {s} outside [0, 1]")));
        }
        Ok(self.pgf_unchecked(s.clamp(0.0, 1.0)))
    }

    #[inline]
    pub(crate) fn pgf_unchecked(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for &p in self.probs.iter().rev() {
            acc = acc * s + p;
        }
        acc
    }

    #[inline]
    pub(crate) fn pgf_complex(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &p in self.probs.iter().rev() {
            acc = acc * s + p;
        }
        acc
    }

    /// `f'(s)`.
    pub fn pgf_prime(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for k in (1..self.probs.len()).rev() {
            acc = acc * s + k as f64 * self.probs[k];
        }
        acc
    }

    /// `f''(s)`.
    pub fn pgf_second(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for k in (2..self.probs.len()).rev() {
            acc = acc * s + (k * (k - 1)) as f64 * self.probs[k];
        }
        acc
    }

    /// Draws an offspring count by inverse transform on the pmf.
    pub fn sample_count<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        match self
            .cumulative
            .iter()
            .position(|&c| u < c)
        {
            Some(k) => k as u32,
            None => (self.probs.len() - 1) as u32,
        }
    }
}

/// Derived scalar constants of the skeleton.
#[derive(Debug, Clone, Copy)]
pub struct GwDerived {
    /// Extinction probability `q ∈ [0, 1)`.
    pub q: f64,
    /// Growth rate `λ = β(μ − 1)`.
    pub lambda: f64,
    /// Decay rate `ρ = β(1 − f'(q))`; always `ρ ≤ λ`.
    pub rho: f64,
    /// `ϑ = ∫₀^∞ e^{−λr} P(Z_r > 0) dr`.
    pub vartheta: f64,
    /// `ϑ* = (q₁/α) ϑ`; present when stable-motion parameters were supplied.
    pub vartheta_star: Option<f64>,
}

impl GwDerived {
    pub fn new(law: &OffspringLaw) -> Result<Self> {
        let q = extinction_prob(law)?;
        let (lambda, rho) = rates(law);
        let vt = vartheta(law)?;
        Ok(Self {
            q,
            lambda,
            rho,
            vartheta: vt,
            vartheta_star: None,
        })
    }

    pub fn with_stable(law: &OffspringLaw, stable: &StableMotionParams) -> Result<Self> {
        let mut d = Self::new(law)?;
        d.vartheta_star = Some(stable.q1() / stable.alpha() * d.vartheta);
        Ok(d)
    }
}

/// Smallest root of `f(s) = s` on `[0, 1)`.
///
/// Bisection on `[0, 1 − 1e−9]` (the trivial root `s = 1` is excluded by the
/// bracket), followed by a few Newton polishing steps.
pub fn extinction_prob(law: &OffspringLaw) -> Result<f64> {
    if law.probs[0] == 0.0 {
        return Ok(0.0);
    }
    let g = |s: f64| law.pgf_unchecked(s) - s;
    let mut lo = 0.0f64;
    let mut hi = 1.0 - 1e-9;
    if g(lo) <= 0.0 {
        return Ok(0.0);
    }
    if g(hi) >= 0.0 {
        return Err(Error::NoConvergence(
            "extinction bracket failed; law not supercritical enough".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..4 {
        let denom = law.pgf_prime(q) - 1.0;
        if denom.abs() < 1e-12 {
            break;
        }
        q -= (law.pgf_unchecked(q) - q) / denom;
    }
    Ok(q.clamp(0.0, 1.0))
}

/// `(λ, ρ) = (β(μ − 1), β(1 − f'(q)))`.
pub fn rates(law: &OffspringLaw) -> (f64, f64) {
    let q = extinction_prob(law).expect("valid law has extinction probability");
    let lambda = law.beta() * (law.mean() - 1.0);
    let rho = law.beta() * (1.0 - law.pgf_prime(q));
    (lambda, rho)
}

/// `F(s, t) = E s^{Z_t}`, solved from the backward equation
/// `∂_t F = β (f(F) − F)` with `F(s, 0) = s`.
pub fn pgf_flow(law: &OffspringLaw, s: f64, t: f64) -> Result<f64> {
    if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&s) {
        return Err(Error::Domain(format!("pgf_flow argument {s} outside [0, 1]")));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("pgf_flow time {t} negative")));
    }
    let s = s.clamp(0.0, 1.0);
    if t == 0.0 {
        return Ok(s);
    }
    let beta = law.beta();
    let y = rk45(
        |_, y: &[f64; 1]| [beta * (law.pgf_unchecked(y[0].clamp(0.0, 1.0)) - y[0])],
        0.0,
        t,
        [s],
        ODE_TOL,
        1.0,
    )?;
    Ok(y[0].clamp(0.0, 1.0))
}

/// Complex-argument flow, used for Taylor-coefficient extraction. Requires
/// `|s| ≤ 1`; the disk is invariant under the flow.
pub(crate) fn pgf_flow_complex(law: &OffspringLaw, s: Complex64, t: f64) -> Result<Complex64> {
    let beta = law.beta();
    let y = rk45(
        |_, y: &[f64; 2]| {
            let z = Complex64::new(y[0], y[1]);
            let d = (law.pgf_complex(z) - z) * beta;
            [d.re, d.im]
        },
        0.0,
        t,
        [s.re, s.im],
        ODE_TOL,
        1.0,
    )?;
    Ok(Complex64::new(y[0], y[1]))
}

/// `P(Z_t > 0) = 1 − F(0, t)`.
pub fn survival_prob(law: &OffspringLaw, t: f64) -> Result<f64> {
    Ok(1.0 - pgf_flow(law, 0.0, t)?)
}

/// `V(s) = f(s) − f'(q) s − q (1 − f'(q))`; nonnegative on `[0, 1]` and
/// quadratically small around `q`.
pub fn v_function(law: &OffspringLaw, s: f64) -> f64 {
    let q = extinction_prob(law).expect("valid law");
    let fq = law.pgf_prime(q);
    law.pgf_unchecked(s.clamp(0.0, 1.0)) - fq * s - q * (1.0 - fq)
}

// Integration horizon after which e^{-λ r} closures are below 1e-16.
fn decay_horizon(rate: f64) -> f64 {
    38.0 / rate
}

/// `A(s) = lim_{t→∞} e^{ρt} (F(s, t) − q)`, evaluated through
/// `A(s) = s − q + ∫₀^∞ β e^{ρr} V(F(s, r)) dr`.
///
/// The integral is accumulated in unit chunks while `|F − q| > 1e−7`; once
/// the flow is that close to the extinction level, the remaining tail is
/// closed analytically with the quadratic approximation of `V`:
/// `∫_T^∞ β e^{ρr} V(F) dr ≈ β f''(q) (F_T − q)² e^{ρT} / (2ρ)`.
/// Integrating further is not an option: past `|F − q| ≈ 1e−8` the f64
/// residual of `V` at the fixed point, amplified by `e^{ρr}`, would swamp
/// the answer.
pub fn a_function(law: &OffspringLaw, s: f64) -> Result<f64> {
    if !(-DOMAIN_SLACK..1.0).contains(&s) {
        return Err(Error::Domain(format!("a_function argument {s} outside [0, 1)")));
    }
    let s = s.max(0.0);
    let q = extinction_prob(law)?;
    let (_, rho) = rates(law);
    let beta = law.beta();
    let fq = law.pgf_prime(q);

    let mut state = [s, 0.0];
    let mut t = 0.0;
    let cap = 80.0 / rho + 10.0;
    while (state[0] - q).abs() > 1e-7 {
        state = rk45(
            |r, y: &[f64; 2]| {
                let f_val = y[0].clamp(0.0, 1.0);
                let v = law.pgf_unchecked(f_val) - fq * f_val - q * (1.0 - fq);
                [
                    beta * (law.pgf_unchecked(f_val) - f_val),
                    beta * (rho * r).exp() * v.max(0.0),
                ]
            },
            t,
            t + 1.0,
            state,
            ODE_TOL,
            1.0,
        )?;
        t += 1.0;
        if t > cap {
            return Err(Error::NoConvergence(format!(
                "a_function flow still {:.2e} from q at t = {t:.1}",
                (state[0] - q).abs()
            )));
        }
    }
    let gap = state[0] - q;
    let closure = beta * law.pgf_second(q) * gap * gap * (rho * t).exp() / (2.0 * rho);
    Ok(s - q + state[1] + closure)
}

/// Complex-argument variant of [`a_function`] on the open unit disk, used to
/// expand probability generating functions built from `A`.
pub(crate) fn a_function_complex(law: &OffspringLaw, s: Complex64) -> Result<Complex64> {
    if s.norm() >= 1.0 {
        return Err(Error::Domain("a_function argument outside unit disk".into()));
    }
    let q = extinction_prob(law)?;
    let (_, rho) = rates(law);
    let beta = law.beta();
    let fq = law.pgf_prime(q);

    let mut state = [s.re, s.im, 0.0, 0.0];
    let mut t = 0.0;
    let cap = 80.0 / rho + 10.0;
    while (Complex64::new(state[0], state[1]) - q).norm() > 1e-7 {
        state = rk45(
            |r, y: &[f64; 4]| {
                let z = Complex64::new(y[0], y[1]);
                let v = law.pgf_complex(z) - fq * z - q * (1.0 - fq);
                let dz = (law.pgf_complex(z) - z) * beta;
                let di = v * beta * (rho * r).exp();
                [dz.re, dz.im, di.re, di.im]
            },
            t,
            t + 1.0,
            state,
            ODE_TOL,
            1.0,
        )?;
        t += 1.0;
        if t > cap {
            return Err(Error::NoConvergence(
                "complex a_function flow did not settle at the extinction level".into(),
            ));
        }
    }
    let gap = Complex64::new(state[0], state[1]) - q;
    let closure = gap * gap * beta * law.pgf_second(q) * (rho * t).exp() / (2.0 * rho);
    Ok(s - q + Complex64::new(state[2], state[3]) + closure)
}

/// Second moment `E W² = 1 + β(f''(1) − μ + 1)/λ` of the martingale limit
/// (from the second-moment equation of `Z_t`).
pub fn w_second_moment(law: &OffspringLaw) -> f64 {
    let (lambda, _) = rates(law);
    let f2 = law.pgf_second(1.0);
    1.0 + law.beta() * (f2 - law.mean() + 1.0) / lambda
}

/// Laplace transform `φ(θ) = E e^{−θW}` of the martingale limit.
///
/// Differentiating the cascade identity `φ(θ e^{λs}) = F(φ(θ), s)` in `s`
/// shows that `u ↦ φ(e^u)` rides the same flow: `λθ φ'(θ) = β(f(φ) − φ)`.
/// The trajectory is started from the exact second-order expansion
/// `φ(θ') = 1 − θ' + (E W²/2) θ'²` at `θ' = 1e−6` and integrated in
/// `u = ln θ`. While `1 − φ` is small the equation is solved in the
/// log-distance variable `v = ln(1 − φ)`, where `dv/du = 1 − (β/λ) R(ε)/ε`
/// with `R(ε) = f(1−ε) − 1 + με = O(ε²)`; this keeps the near-fixed-point
/// stretch perfectly conditioned. (The naive discrete iteration
/// `F(exp(−θe^{−λn}), n)` loses `e^{λn}` of precision through the same
/// region and cannot reach 1e−8 in f64.)
pub fn w_laplace(law: &OffspringLaw, theta: f64) -> Result<f64> {
    if theta < 0.0 {
        return Err(Error::Domain(format!("w_laplace argument {theta} negative")));
    }
    let theta_small = 1e-6;
    let m2 = w_second_moment(law);
    if theta <= theta_small {
        return Ok(1.0 - theta + 0.5 * m2 * theta * theta);
    }
    let (lambda, _) = rates(law);
    let beta = law.beta();
    let u_end = theta.ln();
    let mut u = theta_small.ln();
    let mut v = theta_small.ln() + (-0.5 * m2 * theta_small).ln_1p();

    // phase 1: log-distance coordinates until 1 - φ reaches 0.05
    let switch = 0.05f64.ln();
    let r_over_eps = |eps: f64| {
        let mut acc = 0.0;
        for (k, &p) in law.probs().iter().enumerate() {
            if p > 0.0 {
                acc += p * ((1.0 - eps).powi(k as i32) - 1.0 + k as f64 * eps);
            }
        }
        acc / eps
    };
    let mut rounds = 0;
    while v < switch && u < u_end {
        let target = (u + (switch - v) * 1.02).min(u_end);
        let y = rk45(
            |_, y: &[f64; 1]| [1.0 - beta / lambda * r_over_eps(y[0].exp().min(1.0))],
            u,
            target,
            [v],
            1e-12,
            1.0,
        )?;
        v = y[0];
        u = target;
        rounds += 1;
        if rounds > 64 {
            break;
        }
    }
    if u >= u_end {
        return Ok((1.0 - v.exp()).clamp(0.0, 1.0));
    }

    // phase 2: plain flow in u = ln θ down toward the extinction level
    let phi0 = 1.0 - v.exp();
    let y = rk45(
        |_, y: &[f64; 1]| {
            let p = y[0].clamp(0.0, 1.0);
            [beta / lambda * (law.pgf_unchecked(p) - p)]
        },
        u,
        u_end,
        [phi0],
        1e-12,
        1.0,
    )?;
    Ok(y[0].clamp(0.0, 1.0))
}

/// `ϑ = ∫₀^∞ e^{−λr} P(Z_r > 0) dr`, with an analytic closure for the tail
/// beyond the integration horizon.
pub fn vartheta(law: &OffspringLaw) -> Result<f64> {
    let (lambda, rho) = rates(law);
    let beta = law.beta();
    let horizon = decay_horizon(lambda);
    let y = rk45(
        |r, y: &[f64; 2]| {
            let f_val = y[0].clamp(0.0, 1.0);
            [
                beta * (law.pgf_unchecked(f_val) - f_val),
                (-lambda * r).exp() * (1.0 - f_val),
            ]
        },
        0.0,
        horizon,
        [0.0, 0.0],
        ODE_TOL,
        1.0,
    )?;
    let q = extinction_prob(law)?;
    let f_end = y[0];
    let tail = (1.0 - q) * (-lambda * horizon).exp() / lambda
        - (f_end - q) * (-lambda * horizon).exp() / (lambda + rho);
    Ok(y[1] + tail)
}

/// `ϑ* = (q₁/α) ϑ`.
pub fn vartheta_star(law: &OffspringLaw, stable: &StableMotionParams) -> Result<f64> {
    Ok(stable.q1() / stable.alpha() * vartheta(law)?)
}

/// `Φ(s) = ∫₀^∞ e^{−λr} F(s, r) dr` on a circle point, with tail closure.
fn survival_transform(law: &OffspringLaw, s: Complex64, lambda: f64, rho: f64, q: f64) -> Result<Complex64> {
    let beta = law.beta();
    let horizon = decay_horizon(lambda);
    let y = rk45(
        |r, y: &[f64; 4]| {
            let z = Complex64::new(y[0], y[1]);
            let dz = (law.pgf_complex(z) - z) * beta;
            let di = z * (-lambda * r).exp();
            [dz.re, dz.im, di.re, di.im]
        },
        0.0,
        horizon,
        [s.re, s.im, 0.0, 0.0],
        ODE_TOL,
        1.0,
    )?;
    let f_end = Complex64::new(y[0], y[1]);
    let decay = (-lambda * horizon).exp();
    let tail = q * decay / lambda + (f_end - q) * decay / (lambda + rho);
    Ok(Complex64::new(y[2], y[3]) + tail)
}

/// Taylor coefficients `G_k = ∫₀^∞ e^{−λr} P(Z_r = k) dr` for
/// `k ∈ [k_lo, k_hi]`, extracted on the circle `|s| = radius` with
/// `n_points` trapezoid nodes.
fn weighted_mass_coeffs(
    law: &OffspringLaw,
    radius: f64,
    n_points: usize,
    k_lo: usize,
    k_hi: usize,
) -> Result<Vec<f64>> {
    let (lambda, rho) = rates(law);
    let q = extinction_prob(law)?;
    let half = n_points / 2;
    let mut values = Vec::with_capacity(half + 1);
    for j in 0..=half {
        let angle = 2.0 * std::f64::consts::PI * j as f64 / n_points as f64;
        let s = Complex64::from_polar(radius, angle);
        values.push(survival_transform(law, s, lambda, rho, q)?);
    }
    let mut out = Vec::with_capacity(k_hi - k_lo + 1);
    for k in k_lo..=k_hi {
        // Conjugate symmetry folds the full circle onto the upper half.
        let mut acc = values[0].re;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * values[half].re;
        for (j, v) in values.iter().enumerate().take(half).skip(1) {
            let angle = -2.0 * std::f64::consts::PI * (j * k % n_points) as f64 / n_points as f64;
            acc += 2.0 * (v * Complex64::from_polar(1.0, angle)).re;
        }
        out.push(acc / (n_points as f64 * radius.powi(k as i32)));
    }
    Ok(out)
}

/// The cluster-size law table `P(T = k)`, `k = 1..=k_max`.
///
/// The radius-0.5 circle with 4096 nodes is numerically sound only for
/// small `k`: the extraction error grows like `2^k` times the roundoff
/// floor. Larger `k` use wider circles chosen so that the amplification
/// `radius^{-k}` stays below 1e6.
pub fn t_law_table(law: &OffspringLaw, k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::Domain("t_law_table needs k_max >= 1".into()));
    }
    if k_max > 2048 {
        return Err(Error::Domain("t_law_table capped at k_max = 2048".into()));
    }
    let vt = vartheta(law)?;
    let mut pmf = Vec::with_capacity(k_max);
    // radius 0.5 amplifies the roundoff floor by 2^k; past k = 24 wider
    // circles keep the amplification below 1e6
    let tiers: [(usize, f64, usize); 4] = [
        (24, 0.5, 4096),
        (128, (-(1e6f64).ln() / 128.0).exp(), 512),
        (512, (-(1e6f64).ln() / 512.0).exp(), 2048),
        (2048, (-(1e6f64).ln() / 2048.0).exp(), 8192),
    ];
    let mut k_done = 0usize;
    for &(k_cap, radius, n_points) in &tiers {
        if k_done >= k_max {
            break;
        }
        let hi = k_max.min(k_cap);
        let coeffs = weighted_mass_coeffs(law, radius, n_points, k_done + 1, hi)?;
        for g in coeffs {
            pmf.push((g / vt).max(0.0));
        }
        k_done = hi;
    }
    Ok(pmf)
}

/// `P(T = k)`. Prefer [`t_law_table`] when several values are needed; each
/// call re-runs the circle extraction.
pub fn t_law_pmf(law: &OffspringLaw, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("cluster sizes start at k = 1".into()));
    }
    Ok(t_law_table(law, k)?[k - 1])
}

/// Population pmf `P(Z_t = k)` for `k = 0..=k_max`, extracted as Taylor
/// coefficients of `F(·, t)` on a circle.
pub fn population_pmf(law: &OffspringLaw, t: f64, k_max: usize) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::Domain(format!("population_pmf time {t} negative")));
    }
    if k_max > 2048 {
        return Err(Error::Domain("population_pmf capped at k_max = 2048".into()));
    }
    let radius: f64 = (-(1e6f64).ln() / k_max.max(16) as f64).exp().min(0.5);
    let n_points = (4 * k_max.next_power_of_two()).max(256);
    let half = n_points / 2;
    let mut values = Vec::with_capacity(half + 1);
    for j in 0..=half {
        let angle = 2.0 * std::f64::consts::PI * j as f64 / n_points as f64;
        let s = Complex64::from_polar(radius, angle);
        values.push(pgf_flow_complex(law, s, t)?);
    }
    let mut pmf = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut acc = values[0].re;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * values[half].re;
        for (j, v) in values.iter().enumerate().take(half).skip(1) {
            let angle = -2.0 * std::f64::consts::PI * (j * k % n_points) as f64 / n_points as f64;
            acc += 2.0 * (v * Complex64::from_polar(1.0, angle)).re;
        }
        pmf.push((acc / (n_points as f64 * radius.powi(k as i32))).max(0.0));
    }
    Ok(pmf)
}

/// Tail mass `P(T > k)` computed on the time side:
/// `ϑ^{-1} ∫₀^∞ e^{−λr} P(Z_r > k) dr`, with `P(Z_r ≤ k)` assembled from a
/// per-time coefficient extraction. Serves as an independent check that the
/// pmf table sums to one.
pub fn t_law_tail_mass(law: &OffspringLaw, k: usize) -> Result<f64> {
    if k == 0 || k > 256 {
        return Err(Error::Domain("t_law_tail_mass supports 1 <= k <= 256".into()));
    }
    let (lambda, _) = rates(law);
    let q = extinction_prob(law)?;
    let vt = vartheta(law)?;
    let beta = law.beta();
    let horizon = decay_horizon(lambda);

    // radius keeping radius^{-k} <= 1e6, and enough nodes to kill aliasing
    let radius: f64 = (-(1e6f64).ln() / k as f64).exp().min(0.75);
    let n_points = (4 * k.next_power_of_two()).max(256);
    let half = n_points / 2;
    let n_times = 1024usize; // composite Simpson nodes on [0, horizon]
    let dt = horizon / n_times as f64;

    // trajectory samples F(s_j, r_i) for the upper half circle
    let mut samples = vec![Complex64::default(); (half + 1) * (n_times + 1)];
    for j in 0..=half {
        let angle = 2.0 * std::f64::consts::PI * j as f64 / n_points as f64;
        let s = Complex64::from_polar(radius, angle);
        let mut state = [s.re, s.im];
        samples[j * (n_times + 1)] = s;
        for i in 1..=n_times {
            state = rk45(
                |_, y: &[f64; 2]| {
                    let z = Complex64::new(y[0], y[1]);
                    let d = (law.pgf_complex(z) - z) * beta;
                    [d.re, d.im]
                },
                (i - 1) as f64 * dt,
                i as f64 * dt,
                state,
                ODE_TOL,
                1.0,
            )?;
            samples[j * (n_times + 1) + i] = Complex64::new(state[0], state[1]);
        }
    }

    // cumulative mass: sum_{m=1..k} P(Z_r = m) at each grid time
    let mut low_mass = vec![0.0; n_times + 1];
    for (i, val) in low_mass.iter_mut().enumerate() {
        let mut cum = 0.0;
        for m in 1..=k {
            let mut acc = samples[i].re;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * samples[half * (n_times + 1) + i].re;
            for j in 1..half {
                let angle =
                    -2.0 * std::f64::consts::PI * (j * m % n_points) as f64 / n_points as f64;
                acc += 2.0 * (samples[j * (n_times + 1) + i] * Complex64::from_polar(1.0, angle)).re;
            }
            cum += acc / (n_points as f64 * radius.powi(m as i32));
        }
        *val = cum;
    }

    // survival P(Z_r > 0) on the same time grid from the real flow
    let mut surv = vec![0.0; n_times + 1];
    let mut f0 = [0.0f64];
    surv[0] = 1.0;
    for (i, sv) in surv.iter_mut().enumerate().skip(1) {
        f0 = rk45(
            |_, y: &[f64; 1]| [beta * (law.pgf_unchecked(y[0].clamp(0.0, 1.0)) - y[0])],
            (i - 1) as f64 * dt,
            i as f64 * dt,
            f0,
            ODE_TOL,
            1.0,
        )?;
        *sv = 1.0 - f0[0];
    }

    // Simpson over the grid; n_times is even.
    let mut total = 0.0;
    for i in 0..=n_times {
        let r = i as f64 * dt;
        let w = if i == 0 || i == n_times {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let excess = (surv[i] - low_mass[i]).max(0.0);
        total += w * (-lambda * r).exp() * excess;
    }
    total *= dt / 3.0;
    // tail beyond the horizon: P(Z_r > k) <= P(Z_r > 0) -> 1 - q
    let tail = (1.0 - q) * (-lambda * horizon).exp() / lambda;
    Ok(((total + tail) / vt).clamp(0.0, 1.0))
}

/// Uniformly continuous test function `φ : ℝ → [0, 1]` that is identically
/// one on `[−δ, δ]` and optionally identically zero on `(c, ∞)`.
#[derive(Clone)]
pub struct TestFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    one_radius: f64,
    zero_tail: Option<f64>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("one_radius", &self.one_radius)
            .field("zero_tail", &self.zero_tail)
            .finish()
    }
}

impl TestFunction {
    pub fn new<F>(f: F, one_radius: f64, zero_tail: Option<f64>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(one_radius > 0.0) {
            return Err(Error::InvalidParameter(
                "test function needs a positive radius of identity".into(),
            ));
        }
        let tf = Self {
            f: Arc::new(f),
            one_radius,
            zero_tail,
        };
        tf.validate()?;
        Ok(tf)
    }

    fn validate(&self) -> Result<()> {
        let reach = 4.0 * self.one_radius.max(self.zero_tail.unwrap_or(self.one_radius));
        for i in 0..=200 {
            let x = -reach + 2.0 * reach * i as f64 / 200.0;
            let v = (self.f)(x);
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "test function value {v} at {x} outside [0, 1]"
                )));
            }
            if x.abs() <= self.one_radius && (v - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "test function is {v} at {x}, expected 1 on [-{0}, {0}]",
                    self.one_radius
                )));
            }
            if let Some(c) = self.zero_tail {
                if x > c && v.abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "test function is {v} at {x}, expected 0 beyond {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        ((self.f)(x)).clamp(0.0, 1.0)
    }

    pub fn one_radius(&self) -> f64 {
        self.one_radius
    }

    pub fn zero_tail(&self) -> Option<f64> {
        self.zero_tail
    }

    /// The half-line indicator `1_{(−∞, a]}` for `a > 0`.
    pub fn indicator_leq(a: f64) -> Self {
        Self {
            f: Arc::new(move |x| if x <= a { 1.0 } else { 0.0 }),
            one_radius: a,
            zero_tail: Some(a),
        }
    }

    /// Constant one.
    pub fn one() -> Self {
        Self {
            f: Arc::new(|_| 1.0),
            one_radius: 1.0,
            zero_tail: None,
        }
    }

    /// `φ(· / x)` — the spatially rescaled function.
    pub fn scaled(&self, x: f64) -> Self {
        let inner = Arc::clone(&self.f);
        Self {
            f: Arc::new(move |y| inner(y / x)),
            one_radius: self.one_radius * x,
            zero_tail: self.zero_tail.map(|c| c * x),
        }
    }

    /// `e^{−g}` for a nonnegative exponent `g` vanishing near the origin.
    pub fn exp_neg<G>(g: G, one_radius: f64) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(move |x| (-g(x)).exp(), one_radius, None)
    }
}

/// `C(φ) = ∫₀^∞ e^{−λr} ∫ (1 − F(φ(x), r)) v_α(dx) dr`.
///
/// The substitution `y = x^{−α}` turns each side of the Lévy tail measure
/// into Lebesgue measure on a bounded interval, and the time integral is the
/// map `s ↦ ∫ e^{−λr}(1 − F(s, r)) dr`, solved once per quadrature node.
pub fn c_functional(
    phi: &TestFunction,
    law: &OffspringLaw,
    stable: &StableMotionParams,
) -> Result<f64> {
    let (lambda, rho) = rates(law);
    let q = extinction_prob(law)?;
    let beta = law.beta();
    let alpha = stable.alpha();
    let delta = phi.one_radius();
    let horizon = decay_horizon(lambda);

    let w_integral = |s: f64| -> Result<f64> {
        if s >= 1.0 {
            return Ok(0.0);
        }
        let y = rk45(
            |r, y: &[f64; 2]| {
                let f_val = y[0].clamp(0.0, 1.0);
                [
                    beta * (law.pgf_unchecked(f_val) - f_val),
                    (-lambda * r).exp() * (1.0 - f_val),
                ]
            },
            0.0,
            horizon,
            [s.clamp(0.0, 1.0), 0.0],
            ODE_TOL,
            1.0,
        )?;
        let f_end = y[0];
        let decay = (-lambda * horizon).exp();
        Ok(y[1] + (1.0 - q) * decay / lambda - (f_end - q) * decay / (lambda + rho))
    };

    let y_max = delta.powf(-alpha);
    let mut failure: Option<Error> = None;
    // The substitution y = x^{-alpha} maps each side onto (0, delta^{-alpha}]
    // with Lebesgue measure. Features of φ at spatial scale c occupy a
    // dyadically thin slice near y = c^{-alpha}, so the quadrature is seeded
    // with dyadic panels (one per factor-of-2 in y, i.e. geometric
    // resolution in x) and refined adaptively inside each.
    let mut side = |sign: f64, weight: f64| -> f64 {
        if weight == 0.0 {
            return 0.0;
        }
        let mut integrand = |y: f64| -> f64 {
            if failure.is_some() || y <= 0.0 {
                return 0.0;
            }
            let x = sign * y.powf(-1.0 / alpha);
            match w_integral(phi.eval(x)) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        };
        let tol = 1e-11 * (1.0 + y_max);
        let mut total = 0.0;
        let mut hi = y_max;
        for _ in 0..52 {
            let lo = 0.5 * hi;
            total += adaptive_simpson(&mut integrand, lo, hi, tol);
            hi = lo;
        }
        total
    };

    let pos = side(1.0, stable.q1());
    let neg = side(-1.0, stable.q2());
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(stable.q1() / alpha * pos + stable.q2() / alpha * neg)
}
