//! Strictly α-stable spatial motion.
//!
//! A strictly α-stable process with Lévy exponent `ψ(θ) = −c*|θ|^α`
//! (conjugated for `θ < 0`) has Lévy measure
//!
//! ```text
//! v_α(dx) = q₁ x^{−1−α} 1_{(0,∞)}(x) dx + q₂ |x|^{−1−α} 1_{(−∞,0)}(x) dx,
//! ```
//!
//! and for `α ≠ 1` the exponent coefficient and the tail weights determine
//! each other through
//!
//! ```text
//! c* = (Γ(1−α)/α) (q₁ e^{−iπα/2} + q₂ e^{iπα/2}),
//! ```
//!
//! which is the value of `∫ (e^{iθy} − 1 [− iθy]) v_α(dy)` with the
//! compensation appropriate to `α < 1` or `α > 1`. (A unit test pins this
//! constant against direct numerical integration of the exponent.) For
//! `α = 1` the process is required to be symmetric and driftless, and
//! `q₁ = q₂ = Re(c*)/π`.
//!
//! Sampling uses the Chambers–Mallows–Stuck transform in the
//! 1-parametrization, where strict stability for `α ≠ 1` is exactly the
//! absence of a shift: `σ^α = Re(c*)` and skewness `(q₁ − q₂)/(q₁ + q₂)`.
//! Increments are exact: `ξ_s = s^{1/α} ξ_1` in law.

use num_complex::Complex64;
use rand::Rng;

use crate::{Error, Result};

use std::f64::consts::{FRAC_PI_2, PI};

/// Which tail of the motion a query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Compensation branch of the Lévy exponent, fixed by α.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftConvention {
    /// `α ∈ (0, 1)`: no compensation term.
    NoCompensation,
    /// `α ∈ (1, 2)`: full compensation, zero mean.
    FullCompensation,
    /// `α = 1`: symmetric, zero drift.
    SymmetricNoDrift,
}

/// Parameters of the strictly α-stable motion.
#[derive(Debug, Clone, Copy)]
pub struct StableMotionParams {
    alpha: f64,
    q1: f64,
    q2: f64,
    c_star: Complex64,
    convention: DriftConvention,
    // Chambers-Mallows-Stuck parameters in the 1-parametrization.
    sigma: f64,
    skew: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0 < alpha && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "stability index alpha = {alpha} outside (0, 2)"
        )));
    }
    Ok(())
}

/// `c*` from the tail weights, `α ≠ 1` branch of the correspondence.
pub fn c_star_from_tails(alpha: f64, q1: f64, q2: f64) -> Result<Complex64> {
    check_alpha(alpha)?;
    if q1 < 0.0 || q2 < 0.0 || q1 + q2 <= 0.0 {
        return Err(Error::InvalidParameter(
            "tail weights must be nonnegative with q1 + q2 > 0".into(),
        ));
    }
    if (alpha - 1.0).abs() < 1e-12 {
        if (q1 - q2).abs() > 1e-12 * (q1 + q2) {
            return Err(Error::InvalidParameter(
                "alpha = 1 requires symmetric tails (q1 = q2)".into(),
            ));
        }
        return Ok(Complex64::new(PI * q1, 0.0));
    }
    let gamma_factor = libm::tgamma(1.0 - alpha) / alpha;
    let rot = Complex64::from_polar(1.0, -FRAC_PI_2 * alpha);
    Ok(gamma_factor * (q1 * rot + q2 * rot.conj()))
}

/// Tail weights from `c*`; inverse of [`c_star_from_tails`].
pub fn tails_from_c_star(alpha: f64, c_star: Complex64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if c_star.re <= 0.0 {
        return Err(Error::InvalidParameter("Re(c*) must be positive".into()));
    }
    if (alpha - 1.0).abs() < 1e-12 {
        if c_star.im.abs() > 1e-12 * c_star.re {
            return Err(Error::InvalidParameter(
                "alpha = 1 supports only the symmetric driftless case (Im(c*) = 0)".into(),
            ));
        }
        let q = c_star.re / PI;
        return Ok((q, q));
    }
    let tan_bound = (FRAC_PI_2 * alpha).tan().abs() * c_star.re;
    if c_star.im.abs() > tan_bound * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "|Im(c*)| = {} exceeds |tan(pi alpha/2)| Re(c*) = {}; not a strictly stable exponent",
            c_star.im.abs(),
            tan_bound
        )));
    }
    let gamma_factor = libm::tgamma(1.0 - alpha) / alpha;
    let sum = c_star.re / (gamma_factor * (FRAC_PI_2 * alpha).cos());
    let diff = c_star.im / (gamma_factor * (FRAC_PI_2 * alpha).sin()); // q2 - q1
    let q1 = 0.5 * (sum - diff);
    let q2 = 0.5 * (sum + diff);
    Ok((q1.max(0.0), q2.max(0.0)))
}

impl StableMotionParams {
    /// Primary constructor: tail weights `(q₁, q₂)` with `q₁ > 0`.
    pub fn from_tails(alpha: f64, q1: f64, q2: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(q1 > 0.0) {
            return Err(Error::InvalidParameter(
                "q1 must be strictly positive (right tail drives the extremes)".into(),
            ));
        }
        if q2 < 0.0 {
            return Err(Error::InvalidParameter("q2 must be nonnegative".into()));
        }
        let c_star = c_star_from_tails(alpha, q1, q2)?;
        let convention = if alpha < 1.0 {
            DriftConvention::NoCompensation
        } else if alpha > 1.0 {
            DriftConvention::FullCompensation
        } else {
            DriftConvention::SymmetricNoDrift
        };
        Ok(Self {
            alpha,
            q1,
            q2,
            c_star,
            convention,
            sigma: c_star.re.powf(1.0 / alpha),
            skew: (q1 - q2) / (q1 + q2),
        })
    }

    /// Constructor from the exponent coefficient.
    pub fn from_c_star(alpha: f64, c_star: Complex64) -> Result<Self> {
        let (q1, q2) = tails_from_c_star(alpha, c_star)?;
        Self::from_tails(alpha, q1, q2)
    }

    /// Symmetric motion with `ψ(θ) = −scale·|θ|^α`.
    pub fn symmetric(alpha: f64, scale: f64) -> Result<Self> {
        Self::from_c_star(alpha, Complex64::new(scale, 0.0))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    pub fn c_star(&self) -> Complex64 {
        self.c_star
    }

    pub fn convention(&self) -> DriftConvention {
        self.convention
    }

    /// Lévy exponent `ψ(θ)`, with `ψ(−θ) = conj(ψ(θ))`.
    pub fn exponent(&self, theta: f64) -> Complex64 {
        let base = -self.c_star * theta.abs().powf(self.alpha);
        if theta >= 0.0 {
            base
        } else {
            base.conj()
        }
    }

    /// One increment of duration `s`, exact in law.
    pub fn sample_increment<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        debug_assert!(s > 0.0);
        self.sigma * s.powf(1.0 / self.alpha) * self.sample_standard(rng)
    }

    /// A draw from the standardized law (`σ = 1`).
    fn sample_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = PI * (rng.random::<f64>() - 0.5); // Uniform(-pi/2, pi/2)
        let w = -(1.0 - rng.random::<f64>()).ln(); // Exp(1)
        let a = self.alpha;
        if (a - 1.0).abs() < 1e-12 {
            // symmetric Cauchy
            return u.tan();
        }
        if self.skew == 0.0 {
            let factor = (a * u).sin() / u.cos().powf(1.0 / a);
            let rest = (((1.0 - a) * u).cos() / w).powf((1.0 - a) / a);
            return factor * rest;
        }
        let t = self.skew * (FRAC_PI_2 * a).tan();
        let b = t.atan() / a;
        let s_fac = (1.0 + t * t).powf(0.5 / a);
        let factor = s_fac * (a * (u + b)).sin() / u.cos().powf(1.0 / a);
        let rest = ((u - a * (u + b)).cos() / w).powf((1.0 - a) / a);
        factor * rest
    }

    /// `v_α` tail: `v_α((x, ∞)) = (q₁/α) x^{−α}` or the mirror image.
    pub fn levy_tail(&self, x: f64, side: Side) -> f64 {
        debug_assert!(x > 0.0);
        let w = match side {
            Side::Upper => self.q1,
            Side::Lower => self.q2,
        };
        w / self.alpha * x.powf(-self.alpha)
    }

    /// Regularly varying tail approximation
    /// `P(ξ_s ≥ x) ≈ (q₁/α) s x^{−α} L(x)` (upper side shown).
    pub fn tail_asymptote(
        &self,
        l: &crate::scaling::SlowVariationSpec,
        s: f64,
        x: f64,
        side: Side,
    ) -> f64 {
        debug_assert!(x > 0.0 && s > 0.0);
        self.levy_tail(x, side) * s * l.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn cauchy() -> StableMotionParams {
        StableMotionParams::symmetric(1.0, 1.0).unwrap()
    }

    /// Standard Lévy(1) subordinator: α = 1/2, q₂ = 0, q₁ = (2π)^{−1/2}.
    fn levy_half() -> StableMotionParams {
        StableMotionParams::from_tails(0.5, 1.0 / (2.0 * PI).sqrt(), 0.0).unwrap()
    }

    #[test]
    fn round_trip_tails() {
        for &(alpha, a, b) in &[(0.5, 0.7, 0.7), (1.3, 0.2, 0.9), (1.7, 1.0, 0.0)] {
            let c = c_star_from_tails(alpha, a, b).unwrap();
            let (ra, rb) = tails_from_c_star(alpha, c).unwrap();
            assert!((ra - a).abs() < 1e-12 && (rb - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cauchy_rule() {
        let (q1, q2) = tails_from_c_star(1.0, Complex64::new(PI, 0.0)).unwrap();
        assert!((q1 - 1.0).abs() < 1e-14 && (q2 - 1.0).abs() < 1e-14);
        assert!(tails_from_c_star(1.0, Complex64::new(PI, 0.3)).is_err());
        assert!(c_star_from_tails(1.0, 0.4, 0.2).is_err());
    }

    #[test]
    fn validity_constraint_enforced() {
        // |Im| > |tan(pi a / 2)| Re is not a strictly stable exponent
        let bad = Complex64::new(1.0, 2.0 * (FRAC_PI_2 * 1.5f64).tan().abs());
        assert!(StableMotionParams::from_c_star(1.5, bad).is_err());
        // constructed-from-tails parameters always satisfy it
        let p = StableMotionParams::from_tails(1.5, 0.9, 0.1).unwrap();
        assert!(p.c_star().im.abs() <= (FRAC_PI_2 * 1.5f64).tan().abs() * p.c_star().re + 1e-12);
    }

    #[test]
    fn symmetric_input_gives_real_c_star() {
        let c = c_star_from_tails(0.5, 0.4, 0.4).unwrap();
        assert!(c.im.abs() < 1e-15);
        let expected = libm::tgamma(0.5) / 0.5 * 0.8 * (FRAC_PI_2 * 0.5).cos();
        assert!((c.re - expected).abs() < 1e-12);
    }

    #[test]
    fn levy_half_matches_known_parametrization() {
        let p = levy_half();
        assert!((p.sigma - 1.0).abs() < 1e-12, "sigma = {}", p.sigma);
        assert!((p.skew - 1.0).abs() < 1e-14);
        assert!((p.c_star().re - 1.0).abs() < 1e-12);
        assert!((p.c_star().im + 1.0).abs() < 1e-12);
    }

    /// ψ(θ) computed by direct numerical integration of the Lévy measure,
    /// pinning the Γ(1−α)/α constant in the correspondence.
    ///
    /// The one-sided integral `I(a) = ∫_0^∞ (e^{iu} − 1 [− iu]) u^{−1−a} du`
    /// is split at 1: on `[0,1]` the fully compensated kernel expands into a
    /// rapidly converging power series, on `[1,∞)` the oscillatory part is
    /// rotated onto `u = 1 + iv` where it decays exponentially.
    fn exponent_by_quadrature(alpha: f64, q1: f64, q2: f64, theta: f64) -> Complex64 {
        let one_sided = |a: f64| -> Complex64 {
            // ∫_0^1 (e^{iu} - 1 - iu) u^{-1-a} du, term by term
            let mut series = Complex64::new(0.0, 0.0);
            let mut factorial = 1.0f64;
            for m in 1..=24u32 {
                factorial *= (2 * m - 1) as f64 * (2 * m) as f64;
                let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
                series.re += sign / (factorial * (2.0 * m as f64 - a));
                series.im += sign / (factorial * (2.0 * m as f64 + 1.0) * (2.0 * m as f64 + 1.0 - a));
            }
            // ∫_1^∞ e^{iu} u^{-1-a} du  =  i e^{i} ∫_0^∞ e^{-v} (1+iv)^{-1-a} dv
            let kernel = |v: f64| -> Complex64 {
                Complex64::new(0.0, 1.0)
                    * Complex64::from_polar(1.0, 1.0)
                    * (-v).exp()
                    * Complex64::new(1.0, v).powc(Complex64::new(-1.0 - a, 0.0))
            };
            let rotated = Complex64::new(
                adaptive_simpson(&mut |v| kernel(v).re, 0.0, 60.0, 1e-13),
                adaptive_simpson(&mut |v| kernel(v).im, 0.0, 60.0, 1e-13),
            );
            // elementary pieces: -∫_1^∞ u^{-1-a} du and the compensation terms
            let mut total = series + rotated + Complex64::new(-1.0 / a, 0.0);
            if a > 1.0 {
                total += Complex64::new(0.0, -1.0 / (a - 1.0)); // -i ∫_1^∞ u^{-a} du
            } else {
                total += Complex64::new(0.0, 1.0 / (1.0 - a)); // +i ∫_0^1 u^{-a} du
            }
            total
        };
        let i_pos = one_sided(alpha);
        // negative side: y -> -y turns e^{iθy} into the conjugate kernel
        theta.powf(alpha) * (q1 * i_pos + q2 * i_pos.conj())
    }

    #[test]
    fn exponent_matches_brute_force_integration() {
        for &(alpha, q1, q2) in &[(0.5, 1.0, 1.0), (0.5, 0.8, 0.2), (1.5, 0.3, 0.3), (1.5, 0.5, 0.1)]
        {
            let params = StableMotionParams::from_tails(alpha, q1, q2).unwrap();
            for &theta in &[0.7, 1.3] {
                let direct = exponent_by_quadrature(alpha, q1, q2, theta);
                let formula = params.exponent(theta);
                assert!(
                    (direct - formula).norm() < 1e-6 * formula.norm(),
                    "alpha={alpha} theta={theta}: quadrature {direct}, formula {formula}"
                );
            }
        }
    }

    fn ks_against_cdf<F: Fn(f64) -> f64>(draws: &mut [f64], cdf: F) -> f64 {
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        let mut d = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let f = cdf(x);
            d = d.max((f - i as f64 / n).abs());
            d = d.max(((i + 1) as f64 / n - f).abs());
        }
        d
    }

    #[test]
    fn sampler_matches_cauchy_cdf() {
        let p = cauchy();
        let mut rng = Pcg64::seed_from_u64(7);
        let mut draws: Vec<f64> = (0..20_000).map(|_| p.sample_increment(1.0, &mut rng)).collect();
        let d = ks_against_cdf(&mut draws, |x| 0.5 + x.atan() / PI);
        assert!(d < 0.015, "Cauchy KS = {d}");
    }

    #[test]
    fn sampler_matches_levy_cdf() {
        let p = levy_half();
        let mut rng = Pcg64::seed_from_u64(11);
        let mut draws: Vec<f64> = (0..20_000).map(|_| p.sample_increment(1.0, &mut rng)).collect();
        assert!(draws.iter().all(|&x| x > 0.0), "subordinator draws are positive");
        // Lévy(1) CDF = erfc(1/sqrt(2x))
        let d = ks_against_cdf(&mut draws, |x| libm::erfc((0.5 / x).sqrt()));
        assert!(d < 0.015, "Levy KS = {d}");
    }

    #[test]
    fn self_similarity_in_distribution() {
        let p = StableMotionParams::from_tails(1.5, 0.4, 0.2).unwrap();
        let mut rng = Pcg64::seed_from_u64(3);
        let mut a: Vec<f64> = (0..20_000).map(|_| p.sample_increment(2.0, &mut rng)).collect();
        let mut b: Vec<f64> = (0..20_000)
            .map(|_| 2.0f64.powf(1.0 / 1.5) * p.sample_increment(1.0, &mut rng))
            .collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let d = crate::extremes::ks::two_sample_sorted(&a, &b);
        assert!(d < 0.02, "self-similarity two-sample KS = {d}");
    }

    #[test]
    fn levy_tail_values() {
        let p = StableMotionParams::from_tails(1.5, 1.5, 0.5).unwrap();
        assert!((p.levy_tail(1.0, Side::Upper) - 1.0).abs() < 1e-14);
        let p2 = StableMotionParams::from_tails(1.5, 0.3, 0.3).unwrap();
        let v = p2.levy_tail(2.0, Side::Upper);
        assert!((v - 0.2 * 2.0f64.powf(-1.5)).abs() < 1e-14);
        assert!(p2.levy_tail(4.0, Side::Upper) < p2.levy_tail(2.0, Side::Upper));
    }

    #[test]
    fn tail_asymptote_linear_in_duration() {
        let l = crate::scaling::SlowVariationSpec::Constant(1.0);
        let p = cauchy();
        let one = p.tail_asymptote(&l, 1.0, 10.0, Side::Upper);
        let two = p.tail_asymptote(&l, 2.0, 10.0, Side::Upper);
        assert!((two - 2.0 * one).abs() < 1e-15);
        assert!((one - 1.0 / (10.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn empirical_tail_ratio_approaches_asymptote() {
        let p = StableMotionParams::symmetric(1.5, 1.0).unwrap();
        let l = crate::scaling::SlowVariationSpec::Constant(1.0);
        let mut rng = Pcg64::seed_from_u64(19);
        let n = 600_000usize;
        let draws: Vec<f64> = (0..n).map(|_| p.sample_increment(1.0, &mut rng)).collect();
        let ratio_at = |x: f64| {
            let hits = draws.iter().filter(|&&v| v >= x).count() as f64;
            hits / n as f64 / p.tail_asymptote(&l, 1.0, x, Side::Upper)
        };
        let r10 = ratio_at(10.0);
        let r20 = ratio_at(20.0);
        assert!((r10 - 1.0).abs() < 0.12, "x = 10: empirical/asymptote = {r10}");
        assert!((r20 - 1.0).abs() < 0.12, "x = 20: empirical/asymptote = {r20}");
        // the finite-x bias shrinks with x; allow two SE of slack
        let se20 = 2.0 / (n as f64 * p.tail_asymptote(&l, 1.0, 20.0, Side::Upper)).sqrt();
        assert!((r20 - 1.0).abs() <= (r10 - 1.0).abs() + 2.0 * se20);
    }
}
