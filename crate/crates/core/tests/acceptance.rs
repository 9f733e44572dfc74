//! Acceptance suite. Reference model: pure binary fission at rate one
//! (so λ = ρ = 1, q = 0, ϑ = 1, W ~ Exp(1)) with symmetric 1.5-stable
//! motion ψ(θ) = −|θ|^{1.5}, L ≡ 1. Every target is computed by the
//! library — never hard-coded. One pass/fail line per criterion.
//!
//! Monte Carlo passes at several horizons are shared between criteria via
//! lazily built statics; totals stay around two minutes on two cores.

use std::sync::OnceLock;
use std::time::Instant;

use branching_levy::extremes::{self, ks, mean_and_se, LimitLawBundle};
use branching_levy::gw::{
    a_function, pgf_flow, rates, t_law_table, vartheta, w_laplace, OffspringLaw, TestFunction,
};
use branching_levy::measure::i_functional;
use branching_levy::scaling::{big_h, h_of_t, r_of_t, Regime, SlowVariationSpec, ThresholdSpec};
use branching_levy::tree::{
    simulate, sup_path_standalone, ModelParams, SimOptions, SUP_SUBDIVISIONS,
};
use branching_levy::StableMotionParams;
use rayon::prelude::*;

const MASTER_SEED: u64 = 0x5EED_2024;
const L1: SlowVariationSpec = SlowVariationSpec::Constant(1.0);

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(block: u64, index: u64) -> rand_pcg::Pcg64 {
    let a = splitmix64(MASTER_SEED ^ splitmix64(block << 40 | index));
    let b = splitmix64(a);
    let c = splitmix64(b);
    let d = splitmix64(c);
    rand_pcg::Pcg64::new((a as u128) << 64 | b as u128, ((c as u128) << 64 | d as u128) | 1)
}

fn reference_model() -> ModelParams {
    ModelParams::new(
        OffspringLaw::yule(1.0),
        StableMotionParams::symmetric(1.5, 1.0).unwrap(),
    )
}

fn reference_bundle() -> &'static LimitLawBundle {
    static BUNDLE: OnceLock<LimitLawBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        LimitLawBundle::new(
            OffspringLaw::yule(1.0),
            StableMotionParams::symmetric(1.5, 1.0).unwrap(),
            L1,
        )
        .unwrap()
    })
}

/// Laplace-panel exponents: bounded, uniformly continuous, zero on
/// (−0.1, 0.1).
fn panel_g(k: usize, x: f64) -> f64 {
    let ramp = |a: f64, b: f64, y: f64| ((y - a) / (b - a)).clamp(0.0, 1.0);
    match k {
        0 => 0.2 * ramp(0.15, 0.5, x.abs()),
        1 => 0.3 * ramp(0.2, 0.6, x.abs()),
        _ => {
            if x > 0.0 {
                0.2 * ramp(0.25, 0.6, x)
            } else {
                0.0
            }
        }
    }
}

/// One minus a smooth bump supported on 1 < |x| < 3.
fn bump_gap() -> TestFunction {
    TestFunction::new(
        |x| {
            let y = x.abs();
            if y <= 1.0 || y >= 3.0 {
                1.0
            } else {
                let u = y - 2.0;
                1.0 - (1.0 - 1.0 / (1.0 - u * u)).exp()
            }
        },
        1.0,
        None,
    )
    .unwrap()
}

/// Per-tree statistics captured by the shared Monte Carlo passes.
struct TreeStat {
    r: Option<f64>,
    /// Σ_u g_k(ξ_u / h(t)) for the three panel exponents (t = 9 pass only).
    g_sums: [f64; 3],
    /// |I(g_bump, X/a(t)) − I(g_bump, Y/a(t))| with a(t) = e^{0.8t}.
    bj_gap: f64,
}

struct Pass {
    t: f64,
    stats: Vec<TreeStat>,
}

fn run_pass(block: u64, t: f64, reps: u64, with_panel: bool) -> Pass {
    let model = reference_model();
    let bundle = reference_bundle();
    let h = h_of_t(&L1, bundle.alpha(), bundle.lambda, t).unwrap();
    let a = (0.8 * t).exp();
    let g_bump = bump_gap();
    let opts = SimOptions::default();
    let stats: Vec<TreeStat> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(block, i);
            let snap = simulate(&model, t, &mut rng, &opts).expect("population cap generous");
            let mut g_sums = [0.0f64; 3];
            if with_panel {
                for p in snap.particles().iter().filter(|p| p.alive) {
                    for (k, sum) in g_sums.iter_mut().enumerate() {
                        *sum += panel_g(k, p.position_end / h);
                    }
                }
            }
            let (x_meas, y_meas) = snap.point_measures(a);
            let bj_gap =
                (i_functional(&g_bump, &x_meas) - i_functional(&g_bump, &y_meas)).abs();
            TreeStat {
                r: snap.r_t,
                g_sums,
                bj_gap,
            }
        })
        .collect();
    Pass { t, stats }
}

fn pass9() -> &'static Pass {
    static P: OnceLock<Pass> = OnceLock::new();
    P.get_or_init(|| run_pass(9, 9.0, 40_000, true))
}

fn pass5() -> &'static Pass {
    static P: OnceLock<Pass> = OnceLock::new();
    P.get_or_init(|| run_pass(5, 5.0, 6_000, false))
}

fn pass7() -> &'static Pass {
    static P: OnceLock<Pass> = OnceLock::new();
    P.get_or_init(|| run_pass(7, 7.0, 6_000, false))
}

/// Lower-deviation horizons: plain (r, z) maxima at t ∈ {6, 8, 10}.
fn lower_pass(t_key: u64, t: f64, reps: u64) -> Vec<Option<f64>> {
    let model = reference_model();
    let opts = SimOptions::default();
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(100 + t_key, i);
            simulate(&model, t, &mut rng, &opts).unwrap().r_t
        })
        .collect()
}

fn lower6() -> &'static Vec<Option<f64>> {
    static P: OnceLock<Vec<Option<f64>>> = OnceLock::new();
    P.get_or_init(|| lower_pass(6, 6.0, 20_000))
}

fn lower8() -> &'static Vec<Option<f64>> {
    static P: OnceLock<Vec<Option<f64>>> = OnceLock::new();
    P.get_or_init(|| lower_pass(8, 8.0, 20_000))
}

fn lower10() -> &'static Vec<Option<f64>> {
    static P: OnceLock<Vec<Option<f64>>> = OnceLock::new();
    P.get_or_init(|| lower_pass(10, 10.0, 10_000))
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_oracle_suite() {
    let started = Instant::now();
    let yule = OffspringLaw::yule(1.0);
    // Yule closed forms to 1e-8
    for &(s, t) in &[(0.25, 0.7), (0.5, 1.0), (0.75, 2.3)] {
        let e = (-t as f64).exp();
        let exact = s * e / (1.0 - (1.0 - e) * s);
        assert!((pgf_flow(&yule, s, t).unwrap() - exact).abs() < 1e-8);
    }
    for &s in &[0.2, 0.5, 0.8] {
        assert!((a_function(&yule, s).unwrap() - s / (1.0 - s)).abs() < 1e-8);
    }
    for &theta in &[0.3, 1.0, 5.0] {
        assert!((w_laplace(&yule, theta).unwrap() - 1.0 / (1.0 + theta)).abs() < 1e-8);
    }
    assert!((vartheta(&yule).unwrap() - 1.0).abs() < 1e-8);
    let t_pmf = t_law_table(&yule, 20).unwrap();
    for (i, &p) in t_pmf.iter().enumerate() {
        let k = (i + 1) as f64;
        assert!((p - 1.0 / (k * (k + 1.0))).abs() < 1e-8, "P(T={})", i + 1);
    }

    // residual grids for three offspring laws
    let laws = [
        OffspringLaw::yule(1.0),
        OffspringLaw::new(&[(0, 0.25), (2, 0.75)], 1.0).unwrap(),
        OffspringLaw::new(&[(0, 0.2), (1, 0.3), (2, 0.5)], 1.0).unwrap(),
    ];
    for law in &laws {
        let (lambda, rho) = rates(law);
        for &s in &[0.0, 0.25, 0.5, 0.75] {
            for &t in &[0.5, 1.0, 2.0] {
                let conj = (a_function(law, pgf_flow(law, s, t).unwrap()).unwrap()
                    - (-rho * t).exp() * a_function(law, s).unwrap())
                .abs();
                assert!(conj < 1e-6, "A-conjugation residual {conj}");
            }
        }
        for &theta in &[0.1, 1.0, 10.0] {
            for &s in &[0.5, 1.0, 2.0] {
                let resid = (w_laplace(law, theta * (lambda * s).exp()).unwrap()
                    - pgf_flow(law, w_laplace(law, theta).unwrap(), s).unwrap())
                .abs();
                assert!(resid < 1e-8, "phi functional-equation residual {resid}");
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 1.0, "oracle suite took {secs:.2}s, budget 1s");
    println!("ACCEPTANCE 01 oracle suite: PASS ({secs:.2}s)");
}

#[test]
fn acceptance_02_scaling_solver() {
    for l in [
        L1,
        SlowVariationSpec::LogPower(1.0),
        SlowVariationSpec::LogPower(-1.0),
    ] {
        for &alpha in &[0.7, 1.5] {
            for i in 0..=30 {
                let y = 10f64.powf(-12.0 + 15.0 * i as f64 / 30.0);
                let h = big_h(&l, alpha, y).unwrap();
                let resid = (h.powf(-alpha) * l.eval(h) - y).abs();
                assert!(resid <= 1e-10 * y, "residual {resid:.2e} at y={y:.2e}");
            }
        }
    }
    // closed forms with L ≡ 1 (λ = 1, α = 1.5): h(t) = e^{λt/α}, r(t) = ct
    let (alpha, lambda) = (1.5, 1.0);
    for &t in &[2.0, 5.0, 9.0] {
        let h = h_of_t(&L1, alpha, lambda, t).unwrap();
        let exact = (lambda * t / alpha).exp();
        assert!((h - exact).abs() <= 1e-12 * exact);
        let lam = ThresholdSpec::exponential(1.0, 0.5, alpha, lambda);
        let r = r_of_t(&L1, alpha, lambda, &lam, t).unwrap();
        assert!((r - 0.5 * t).abs() <= 1e-12 * (0.5 * t));
    }
    println!("ACCEPTANCE 02 scaling solver: PASS");
}

#[test]
fn acceptance_03_stable_sampler() {
    let started = Instant::now();
    let n = 100_000usize;

    let cauchy = StableMotionParams::symmetric(1.0, 1.0).unwrap();
    let mut rng = stream(3, 0);
    let mut draws: Vec<f64> = (0..n).map(|_| cauchy.sample_increment(1.0, &mut rng)).collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d_cauchy = ks::statistic_sorted(&draws, |x| 0.5 + x.atan() / std::f64::consts::PI);
    assert!(d_cauchy < 0.006, "Cauchy KS = {d_cauchy}");

    let levy = StableMotionParams::from_tails(
        0.5,
        1.0 / (2.0 * std::f64::consts::PI).sqrt(),
        0.0,
    )
    .unwrap();
    let mut draws: Vec<f64> = (0..n).map(|_| levy.sample_increment(1.0, &mut rng)).collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d_levy = ks::statistic_sorted(&draws, |x| libm::erfc((0.5 / x).sqrt()));
    assert!(d_levy < 0.006, "Levy KS = {d_levy}");

    // self-similarity: ξ_2 = 2^{1/α} ξ_1 in law
    let p = StableMotionParams::symmetric(1.5, 1.0).unwrap();
    let m = 50_000usize;
    let mut a: Vec<f64> = (0..m).map(|_| p.sample_increment(2.0, &mut rng)).collect();
    let mut b: Vec<f64> = (0..m)
        .map(|_| 2.0f64.powf(1.0 / 1.5) * p.sample_increment(1.0, &mut rng))
        .collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let d2 = ks::two_sample_sorted(&a, &b);
    let p_val = ks::p_value(d2, 0.5 * m as f64);
    assert!(p_val > 0.01, "self-similarity KS p = {p_val}");

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 10.0, "sampler checks took {secs:.1}s, budget 10s");
    println!(
        "ACCEPTANCE 03 stable sampler: PASS (KS {d_cauchy:.4}/{d_levy:.4}, self-sim p {p_val:.3}, {secs:.1}s)"
    );
}

#[test]
fn acceptance_04_weak_limit_rt() {
    let bundle = reference_bundle();
    let pass = pass9();
    let h = h_of_t(&L1, bundle.alpha(), bundle.lambda, pass.t).unwrap();
    let mut scaled: Vec<f64> = pass.stats[..5000]
        .iter()
        .filter_map(|s| s.r)
        .map(|r| r / h)
        .collect();
    scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(scaled.len(), 5000, "pure fission never dies");
    let cdf = bundle.limit_cdf_fn().unwrap();
    let d = ks::statistic_sorted(&scaled, cdf);
    assert!(d <= 0.05, "weak-limit KS = {d}");
    println!("ACCEPTANCE 04 weak limit of R_t/h(t): PASS (KS {d:.4} over 5000 trees)");
}

#[test]
fn acceptance_05_upper_deviation() {
    let bundle = reference_bundle();
    let pass = pass9();
    let t = pass.t;
    let h = h_of_t(&L1, bundle.alpha(), bundle.lambda, t).unwrap();
    let n = pass.stats.len() as u64;
    let mut summary = Vec::new();
    for &x in &[2.0, 4.0, 8.0] {
        let lam = x * h;
        let exceed = pass
            .stats
            .iter()
            .filter(|s| s.r.map_or(false, |r| r > lam))
            .count() as u64;
        let est = extremes::upper_deviation_from_counts(
            n,
            exceed,
            t,
            lam,
            &L1,
            bundle.alpha(),
            bundle.lambda,
        );
        let target = bundle.upper_target_at_multiple(x).unwrap();
        summary.push(format!(
            "x={x}: {:.4} vs target {:.4} (se {:.4})",
            est.estimate, target, est.stderr
        ));
        if x == 8.0 {
            let rel = (est.estimate - bundle.vartheta_star).abs() / bundle.vartheta_star;
            assert!(
                rel <= 0.15,
                "x=8 estimate {0} deviates {rel:.3} from vartheta* {1}",
                est.estimate,
                bundle.vartheta_star
            );
        } else {
            assert!(
                (est.estimate - target).abs() <= 3.0 * est.stderr,
                "x={x}: estimate {} vs finite-scale target {target} +- 3*{}",
                est.estimate,
                est.stderr
            );
        }
    }
    println!("ACCEPTANCE 05 upper deviation: PASS ({})", summary.join("; "));
}

#[test]
fn acceptance_06_conditional_pareto() {
    let bundle = reference_bundle();
    let pass = pass9();
    let h = h_of_t(&L1, bundle.alpha(), bundle.lambda, pass.t).unwrap();
    let lam = 2.0 * h;
    let mut ratios: Vec<f64> = pass
        .stats
        .iter()
        .filter_map(|s| s.r)
        .filter(|&r| r > lam)
        .map(|r| r / lam)
        .collect();
    let n = ratios.len();
    assert!(n >= 300, "only {n} exceedances pooled");
    let (d, _) = extremes::conditional_pareto_ks(&mut ratios, bundle.alpha()).unwrap();
    assert!(d <= 0.1, "conditional Pareto KS = {d} over {n} exceedances");
    println!("ACCEPTANCE 06 conditional Pareto: PASS (KS {d:.4} over {n} exceedances)");
}

#[test]
fn acceptance_07_lower_deviation() {
    let bundle = reference_bundle();
    let target = bundle.lower_deviation_target().unwrap();
    let threshold = ThresholdSpec::exponential(1.0, 0.5, bundle.alpha(), bundle.lambda);
    assert_eq!(threshold.regime(), Regime::Sub);
    assert!(threshold.grows_exponentially());

    let mut estimates = Vec::new();
    for (t, maxima) in [
        (6.0, lower6()),
        (8.0, lower8()),
        (10.0, lower10()),
    ] {
        let lam = threshold.eval(t);
        let r = r_of_t(&L1, bundle.alpha(), bundle.lambda, &threshold, t).unwrap();
        let n = maxima.len() as f64;
        let below = maxima
            .iter()
            .filter(|m| m.map_or(false, |v| v <= lam))
            .count() as f64;
        let est = (bundle.rho * (t - r)).exp() * below / n;
        estimates.push((t, est));
    }
    let at8 = estimates[1].1;
    assert!(
        at8 >= 0.5 * target && at8 <= 2.0 * target,
        "t=8 estimate {at8} outside [0.5, 2] x target {target}"
    );
    let d: Vec<f64> = estimates.iter().map(|(_, e)| (e - target).abs()).collect();
    assert!(
        d[0] >= d[1] && d[1] >= d[2],
        "approach not monotone: distances {d:?} toward {target}"
    );
    println!(
        "ACCEPTANCE 07 lower deviation: PASS (estimates {:?} -> target {target:.4})",
        estimates
    );
}

#[test]
fn acceptance_08_one_big_jump() {
    let bundle = reference_bundle();
    let mut values = Vec::new();
    for pass in [pass5(), pass7(), pass9()] {
        let t = pass.t;
        let a = (0.8 * t).exp();
        let gaps: Vec<f64> = pass.stats.iter().map(|s| s.bj_gap).collect();
        let (mean, _) = mean_and_se(&gaps);
        let norm = (-bundle.lambda * t).exp() * a.powf(bundle.alpha());
        values.push((t, norm * mean));
    }
    assert!(
        values[2].1 < 0.1,
        "normalized discrepancy at t=9 is {}",
        values[2].1
    );
    assert!(
        values[0].1 >= values[1].1 && values[1].1 >= values[2].1,
        "discrepancy not decreasing: {values:?}"
    );
    println!("ACCEPTANCE 08 one-big-jump: PASS ({values:?})");
}

#[test]
fn acceptance_09_point_process_chain() {
    let bundle = reference_bundle();
    let pass = pass9();
    // quadrature side
    let mut quads = [0.0f64; 3];
    for (k, q) in quads.iter_mut().enumerate() {
        let phi_g = TestFunction::new(move |x| (-panel_g(k, x)).exp(), 0.1, None).unwrap();
        *q = bundle.phi(bundle.c_of(&phi_g).unwrap()).unwrap();
    }
    // tree side
    let mut tree_side = [(0.0f64, 0.0f64); 3];
    for k in 0..3 {
        let vals: Vec<f64> = pass.stats.iter().map(|s| (-s.g_sums[k]).exp()).collect();
        tree_side[k] = mean_and_se(&vals);
    }
    // sampled-measure side: 5000 draws, cutoff 0.05 (panel vanishes on
    // (-0.1, 0.1), twice the cutoff)
    let cutoff = 0.05;
    let samples: Vec<branching_levy::PointMeasure> = (0..5000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(200, i);
            let w = bundle.sample_w(&mut rng).unwrap();
            bundle.sample_n_infinity(w, cutoff, &mut rng).unwrap()
        })
        .collect();
    let mut lines = Vec::new();
    for k in 0..3 {
        let (meas, _) = extremes::empirical_laplace_measures(&samples, &|x| panel_g(k, x));
        let (tree, _) = tree_side[k];
        let quad = quads[k];
        for (a, b, la, lb) in [
            (tree, quad, "tree", "quad"),
            (meas, quad, "measure", "quad"),
            (tree, meas, "tree", "measure"),
        ] {
            let rel = (a - b).abs() / b.abs();
            assert!(
                rel <= 0.05,
                "panel {k}: {la} {a:.4} vs {lb} {b:.4} differ by {rel:.3}"
            );
        }
        lines.push(format!("g{k}: tree {:.4} quad {:.4} meas {:.4}", tree, quad, meas));
    }
    println!("ACCEPTANCE 09 point-process chain: PASS ({})", lines.join("; "));
}

#[test]
fn acceptance_10_sup_r_inequality() {
    let bundle = reference_bundle();
    let model = reference_model();
    let t = 3.0;
    let h3 = h_of_t(&L1, bundle.alpha(), bundle.lambda, t).unwrap();
    let opts = SimOptions {
        record_sup_path: true,
        ..Default::default()
    };
    let tree_sups: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(300, i);
            simulate(&model, t, &mut rng, &opts).unwrap().sup_r.unwrap()
        })
        .collect();
    let n_sub = (SUP_SUBDIVISIONS as f64 * model.law.beta() * t).ceil() as u32;
    let path_sups: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(301, i);
            sup_path_standalone(&model.stable, t, n_sub, &mut rng).0
        })
        .collect();
    let xs: Vec<f64> = [2.0, 5.0, 10.0].iter().map(|x| x * h3).collect();
    let rows = extremes::sup_r_inequality_check(&tree_sups, &path_sups, t, bundle.lambda, &xs);
    let mut lines = Vec::new();
    for row in &rows {
        assert!(
            row.holds,
            "inequality fails at x = {}: lhs {} vs bound {}",
            row.x, row.lhs, row.rhs
        );
        lines.push(format!("x/h={:.0}: {:.4} <= {:.4}", row.x / h3, row.lhs, row.rhs));
    }
    println!("ACCEPTANCE 10 sup-R inequality: PASS ({})", lines.join("; "));
}

#[test]
fn acceptance_11_as_proxies() {
    let bundle = reference_bundle();
    let (alpha, lambda) = (bundle.alpha(), bundle.lambda);
    let g = |t: f64| (2.0 * lambda * t / alpha).exp();

    // G-threshold exceedance fractions decreasing, < 1e-3 at t = 9
    let mut fracs = Vec::new();
    for pass in [pass5(), pass7(), pass9()] {
        let gv = g(pass.t);
        let above = pass
            .stats
            .iter()
            .filter(|s| s.r.map_or(false, |r| r > gv))
            .count() as f64;
        fracs.push((pass.t, above / pass.stats.len() as f64));
    }
    assert!(fracs[2].1 < 1e-3, "P(R_9 > G(9)) = {}", fracs[2].1);
    assert!(
        fracs[0].1 >= fracs[1].1 && fracs[1].1 >= fracs[2].1,
        "exceedance fractions not decreasing: {fracs:?}"
    );

    // liminf-norming quantile table (inspection only, per the criterion)
    let norm9 = big_h(&L1, alpha, (-lambda * 9.0f64).exp() * 9.0f64.ln()).unwrap();
    let mut scaled: Vec<f64> = pass9().stats.iter().filter_map(|s| s.r).map(|r| r / norm9).collect();
    scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| scaled[((p * scaled.len() as f64) as usize).min(scaled.len() - 1)];
    println!(
        "as_proxies t=9 quantiles of R/H(e^(-lambda t) log t): p10 {:.3} p25 {:.3} p50 {:.3} p75 {:.3} p90 {:.3}",
        quantile(0.1),
        quantile(0.25),
        quantile(0.5),
        quantile(0.75),
        quantile(0.9)
    );

    println!("ACCEPTANCE 11 a.s. proxies (G-threshold + quantile table): PASS (fracs {fracs:?})");
}

/// The 10%-of-λ/α criterion for the median of `log R_t⁺/t` at `t = 9`.
///
/// Stated as given, this cannot hold together with the weak limit of
/// `R_t/h(t)` (which this suite verifies separately at KS ≤ 0.05): under
/// that limit the median of `R_9` sits at `ϑ*^{1/α} h(9)`, so the median of
/// `log R_9/9` is `λ/α + ln(ϑ*)/(9α)` — about 18% below `λ/α` for this
/// model, and a ±0.05 CDF perturbation can move it by at most ~2%. The
/// statistic is asserted here exactly as stated; the companion assertion
/// checks that the measurement does match the weak-limit prediction.
#[test]
fn acceptance_11_median_log_over_t() {
    let bundle = reference_bundle();
    let (alpha, lambda) = (bundle.alpha(), bundle.lambda);
    let mut logs: Vec<f64> = pass9()
        .stats
        .iter()
        .filter_map(|s| s.r)
        .map(|r| if r > 0.0 { r.ln() / 9.0 } else { f64::NEG_INFINITY })
        .collect();
    logs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = logs[logs.len() / 2];

    // consistency with the weak limit: median log R_9/9 should sit near
    // lambda/alpha + ln(vartheta*)/(9 alpha)
    let predicted = lambda / alpha + bundle.vartheta_star.ln() / (9.0 * alpha);
    assert!(
        (median - predicted).abs() < 0.03,
        "median log R_9/9 = {median:.4} vs weak-limit prediction {predicted:.4}"
    );

    let target = lambda / alpha;
    let rel = (median - target).abs() / target;
    assert!(
        rel <= 0.10,
        "median log R_9/9 = {median:.4} deviates {:.1}% from lambda/alpha = {target:.4}; \
         the weak limit of R_t/h(t) pins this statistic at {predicted:.4} \
         (= lambda/alpha + ln(vartheta*)/(9 alpha)), so the 10% band is unreachable at t = 9",
        100.0 * rel
    );
    println!("ACCEPTANCE 11 median log R_t/t: PASS (median {median:.4})");
}
