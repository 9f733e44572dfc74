//! Experiment implementations. Every emitted estimate row carries
//! `(estimate, stderr, target, ratio)`, with the target always computed
//! from the deterministic layer — never hard-coded.

use std::io::Write;

use branching_levy::extremes::{
    self, conditional_pareto_ks, empirical_laplace_measures, ks, mean_and_se, LimitLawBundle,
};
use branching_levy::gw::TestFunction;
use branching_levy::scaling::{self, NormingKind, ThresholdSpec};
use branching_levy::tree::{simulate, sup_path_standalone, ModelParams, SimOptions};
use branching_levy::Error;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::seed::seed_stream;

#[derive(Debug)]
pub enum RunError {
    Validation(String),
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "validation error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

fn validation(e: impl std::fmt::Display) -> RunError {
    RunError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> RunError {
    RunError::Runtime(e.to_string())
}

/// One CSV row of the stable output schema.
#[derive(Debug, Clone)]
pub struct Row {
    pub experiment: String,
    pub t: f64,
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub ratio: f64,
    pub failures: u64,
}

impl Row {
    fn new(experiment: &str, t: f64, x: f64, estimate: f64, stderr: f64, target: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            t,
            x,
            estimate,
            stderr,
            target,
            ratio: estimate / target,
            failures: 0,
        }
    }

    fn with_failures(mut self, failures: u64) -> Self {
        self.failures = failures;
        self
    }
}

/// Writes the fixed-schema CSV with 17-significant-digit floats.
pub fn write_csv<W: Write>(w: &mut W, rows: &[Row]) -> std::io::Result<()> {
    writeln!(w, "experiment,t,x,estimate,stderr,target,ratio,failures")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.experiment, r.t, r.x, r.estimate, r.stderr, r.target, r.ratio, r.failures
        )?;
    }
    Ok(())
}

/// Everything a run produces besides the CSV file itself.
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub constants: ModelConstants,
    pub failures_total: u64,
    pub notes: Vec<String>,
}

/// Constants echoed into every manifest; reproducible from the config alone.
pub struct ModelConstants {
    pub lambda: f64,
    pub rho: f64,
    pub q: f64,
    pub vartheta: f64,
    pub vartheta_star: f64,
    pub alpha: f64,
    pub lower_deviation_target: f64,
    pub a_phi_vartheta_star: f64,
}

fn bundle_of(cfg: &ExperimentConfig) -> Result<LimitLawBundle, RunError> {
    LimitLawBundle::new(cfg.law.clone(), cfg.stable, cfg.lspec).map_err(validation)
}

fn constants_of(bundle: &LimitLawBundle) -> Result<ModelConstants, RunError> {
    let a_phi = bundle
        .a_of(bundle.phi(bundle.vartheta_star).map_err(runtime)?)
        .map_err(runtime)?;
    Ok(ModelConstants {
        lambda: bundle.lambda,
        rho: bundle.rho,
        q: bundle.q,
        vartheta: bundle.vartheta,
        vartheta_star: bundle.vartheta_star,
        alpha: bundle.alpha(),
        lower_deviation_target: a_phi / (1.0 - bundle.q),
        a_phi_vartheta_star: a_phi,
    })
}

fn thread_pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool, RunError> {
    let threads = std::env::var("BLP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(cfg.parallelism)
        .max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(runtime)
}

/// Runs `reps` seeded replications in index order. The seed space is split
/// by `stream_block` so distinct phases of one run never share a stream.
fn replicate<T: Send>(
    pool: &rayon::ThreadPool,
    cfg: &ExperimentConfig,
    stream_block: u64,
    reps: u64,
    f: impl Fn(&mut rand_pcg::Pcg64) -> Result<T, Error> + Sync,
) -> Vec<Result<T, Error>> {
    pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = seed_stream(cfg.master_seed, stream_block << 40 | i);
                f(&mut rng)
            })
            .collect()
    })
}

fn split_failures<T>(results: Vec<Result<T, Error>>) -> (Vec<T>, u64) {
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(_) => failures += 1,
        }
    }
    (ok, failures)
}

/// The named panel of Laplace test-function exponents: bounded, uniformly
/// continuous, vanishing on a neighborhood of the origin (all supported
/// outside (−0.1, 0.1), compatible with the measure-sampler cutoff rule).
pub fn default_panel() -> Vec<(String, std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>)> {
    fn ramp(a: f64, b: f64, x: f64) -> f64 {
        ((x.abs() - a) / (b - a)).clamp(0.0, 1.0)
    }
    vec![
        (
            "0.2*ramp(|x|,0.15,0.5)".into(),
            std::sync::Arc::new(move |x| 0.2 * ramp(0.15, 0.5, x)),
        ),
        (
            "0.3*ramp(|x|,0.2,0.6)".into(),
            std::sync::Arc::new(move |x| 0.3 * ramp(0.2, 0.6, x)),
        ),
        (
            "0.2*ramp(x,0.25,0.6)+".into(),
            std::sync::Arc::new(move |x| if x > 0.0 { 0.2 * ramp(0.25, 0.6, x) } else { 0.0 }),
        ),
    ]
}

/// The one-big-jump test function: one minus a smooth bump supported on
/// `1 < |x| < 3`, so it is identically one on `[−1, 1]`.
pub fn bump_gap_function() -> TestFunction {
    TestFunction::new(
        |x| {
            let y = x.abs();
            if y <= 1.0 || y >= 3.0 {
                1.0
            } else {
                let u = y - 2.0; // in (-1, 1)
                1.0 - (1.0 - 1.0 / (1.0 - u * u)).exp()
            }
        },
        1.0,
        None,
    )
    .expect("bump function is a valid test function")
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let bundle = bundle_of(cfg)?;
    let constants = constants_of(&bundle)?;
    let pool = thread_pool(cfg)?;
    let model = ModelParams {
        law: cfg.law.clone(),
        stable: cfg.stable,
        start_position: cfg.start_position,
    };
    let mut rows = Vec::new();
    let mut failures_total = 0u64;
    let mut notes = Vec::new();

    let opts = SimOptions {
        record_delayed: cfg.record_delta,
        record_sup_path: cfg.kind == ExperimentKind::SupRCheck,
        population_cap: cfg.population_cap,
    };

    match cfg.kind {
        ExperimentKind::GwTables => {
            rows.extend(gw_tables(cfg, &bundle).map_err(runtime)?);
        }

        ExperimentKind::WeakLimitRt => {
            let cdf = bundle.limit_cdf_fn().map_err(runtime)?;
            for (ti, &t) in cfg.horizons.iter().enumerate() {
                let h = scaling::h_of_t(&cfg.lspec, bundle.alpha(), bundle.lambda, t)
                    .map_err(runtime)?;
                let results = replicate(&pool, cfg, ti as u64, cfg.replications, |rng| {
                    Ok(simulate(&model, t, rng, &opts)?.r_t)
                });
                let (maxima, failures) = split_failures(results);
                failures_total += failures;
                let mut scaled: Vec<f64> = maxima.into_iter().flatten().map(|r| r / h).collect();
                scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let d = ks::statistic_sorted(&scaled, &cdf);
                rows.push(
                    Row::new("weak_limit_rt_ks", t, f64::NAN, d, f64::NAN, f64::NAN)
                        .with_failures(failures),
                );
                rows.push(Row::new(
                    "weak_limit_rt_survivors",
                    t,
                    f64::NAN,
                    scaled.len() as f64,
                    f64::NAN,
                    f64::NAN,
                ));
            }
        }

        ExperimentKind::UpperDeviation => {
            for (ti, &t) in cfg.horizons.iter().enumerate() {
                let h = scaling::h_of_t(&cfg.lspec, bundle.alpha(), bundle.lambda, t)
                    .map_err(runtime)?;
                let results = replicate(&pool, cfg, ti as u64, cfg.replications, |rng| {
                    Ok(simulate(&model, t, rng, &opts)?.r_t)
                });
                let (maxima, failures) = split_failures(results);
                failures_total += failures;
                for &x in &cfg.x_grid {
                    let lam = x * h;
                    let exceed = maxima
                        .iter()
                        .filter(|r| r.map_or(false, |v| v > lam))
                        .count() as u64;
                    let est = extremes::upper_deviation_from_counts(
                        maxima.len() as u64,
                        exceed,
                        t,
                        lam,
                        &cfg.lspec,
                        bundle.alpha(),
                        bundle.lambda,
                    );
                    let target = bundle.upper_target_at_multiple(x).map_err(runtime)?;
                    rows.push(
                        Row::new("upper_deviation", t, x, est.estimate, est.stderr, target)
                            .with_failures(failures),
                    );
                    if est.underpowered {
                        notes.push(format!("upper_deviation t={t} x={x}: zero exceedances"));
                    }
                }
            }
        }

        ExperimentKind::ParetoConditional => {
            let x = cfg.x_grid.first().copied().unwrap_or(2.0);
            for (ti, &t) in cfg.horizons.iter().enumerate() {
                let h = scaling::h_of_t(&cfg.lspec, bundle.alpha(), bundle.lambda, t)
                    .map_err(runtime)?;
                let lam = x * h;
                let results = replicate(&pool, cfg, ti as u64, cfg.replications, |rng| {
                    Ok(simulate(&model, t, rng, &opts)?.r_t)
                });
                let (maxima, failures) = split_failures(results);
                failures_total += failures;
                let mut ratios: Vec<f64> = maxima
                    .into_iter()
                    .flatten()
                    .filter(|&r| r > lam)
                    .map(|r| r / lam)
                    .collect();
                let (d, n) = conditional_pareto_ks(&mut ratios, bundle.alpha())
                    .map_err(|e| runtime(format!("t={t}: {e}")))?;
                if n < 100 {
                    notes.push(format!("pareto_conditional t={t}: only {n} exceedances"));
                }
                rows.push(
                    Row::new("pareto_conditional_ks", t, x, d, f64::NAN, f64::NAN)
                        .with_failures(failures),
                );
                rows.push(Row::new(
                    "pareto_conditional_exceedances",
                    t,
                    x,
                    n as f64,
                    f64::NAN,
                    f64::NAN,
                ));
            }
        }

        ExperimentKind::LowerDeviation => {
            let threshold = ThresholdSpec::exponential(
                1.0,
                cfg.lambda_exp_rate,
                bundle.alpha(),
                bundle.lambda,
            );
            threshold
                .validate(&cfg.lspec, bundle.alpha(), bundle.lambda)
                .map_err(validation)?;
            if let Some(w) = threshold.summability_warning(&cfg.lspec, bundle.alpha()) {
                notes.push(w);
            }
            if cfg.law.is_binary() && !threshold.grows_exponentially() {
                return Err(RunError::Validation(
                    "binary offspring law requires exponentially growing Λ".into(),
                ));
            }
            let target = constants.lower_deviation_target;
            for (ti, &t) in cfg.horizons.iter().enumerate() {
                let lam = threshold.eval(t);
                let r = scaling::r_of_t(&cfg.lspec, bundle.alpha(), bundle.lambda, &threshold, t)
                    .map_err(runtime)?;
                let results = replicate(&pool, cfg, ti as u64, cfg.replications, |rng| {
                    let snap = simulate(&model, t, rng, &opts)?;
                    Ok((snap.z > 0, snap.r_t))
                });
                let (stats, failures) = split_failures(results);
                failures_total += failures;
                let surviving: Vec<&(bool, Option<f64>)> =
                    stats.iter().filter(|(alive, _)| *alive).collect();
                let below = surviving
                    .iter()
                    .filter(|(_, rt)| rt.map_or(false, |v| v <= lam))
                    .count() as f64;
                let n = surviving.len() as f64;
                let p = below / n;
                let norm = (bundle.rho * (t - r)).exp();
                rows.push(
                    Row::new(
                        "lower_deviation",
                        t,
                        lam,
                        norm * p,
                        norm * (p * (1.0 - p) / n).sqrt(),
                        target,
                    )
                    .with_failures(failures),
                );
            }
        }

        ExperimentKind::OneBigJump => {
            let g = bump_gap_function();
            for (ti, &t) in cfg.horizons.iter().enumerate() {
                let a = (cfg.a_exp_rate * t).exp();
                let results = replicate(&pool, cfg, ti as u64, cfg.replications, |rng| {
                    let snap = simulate(&model, t, rng, &opts)?;
                    let (x_meas, y_meas) = snap.point_measures(a);
                    Ok((branching_levy::measure::i_functional(&g, &x_meas)
                        - branching_levy::measure::i_functional(&g, &y_meas))
                    .abs())
                });
                let (gaps, failures) = split_failures(results);
                failures_total += failures;
                let (mean, se) = mean_and_se(&gaps);
                let norm =
                    (-bundle.lambda * t).exp() * a.powf(bundle.alpha()) / cfg.lspec.eval(a);
                rows.push(
                    Row::new("one_big_jump", t, a, norm * mean, norm * se, 0.0)
                        .with_failures(failures),
                );
            }
        }

        ExperimentKind::NInfinityCompare => {
            let t = *cfg.horizons.last().unwrap();
            let h = scaling::h_of_t(&cfg.lspec, bundle.alpha(), bundle.lambda, t)
                .map_err(runtime)?;
            let bundle = attach_w_samples(cfg, &pool, bundle, &model)?;
            // empirical side: one tree pass shared by the whole panel
            let panel = default_panel();
            let results = replicate(&pool, cfg, 0, cfg.replications, |rng| {
                let snap = simulate(&model, t, rng, &opts)?;
                let mut sums = vec![0.0f64; panel.len()];
                for p in snap.particles().iter().filter(|p| p.alive) {
                    for (k, (_, g)) in panel.iter().enumerate() {
                        sums[k] += g(p.position_end / h);
                    }
                }
                Ok((snap.z > 0, sums))
            });
            let (stats, failures) = split_failures(results);
            failures_total += failures;
            // measure side
            let cutoff = cfg.cutoff;
            let samples = replicate(&pool, cfg, 1, cfg.n_measure_samples, |rng| {
                let w = bundle.sample_w(rng)?;
                bundle.sample_n_infinity(w, cutoff, rng)
            });
            let (measures, m_failures) = split_failures(samples);
            failures_total += m_failures;
            for (k, (label, g)) in panel.iter().enumerate() {
                let phi_g = TestFunction::new(
                    {
                        let g = std::sync::Arc::clone(g);
                        move |x| (-g(x)).exp()
                    },
                    0.1,
                    None,
                )
                .map_err(runtime)?;
                let quad = bundle
                    .phi(bundle.c_of(&phi_g).map_err(runtime)?)
                    .map_err(runtime)?;
                let tree_vals: Vec<f64> =
                    stats.iter().map(|(_, sums)| (-sums[k]).exp()).collect();
                let (tree_mc, tree_se) = mean_and_se(&tree_vals);
                let (meas_mc, meas_se) = empirical_laplace_measures(&measures, g.as_ref());
                notes.push(format!("panel[{k}] = {label}"));
                rows.push(
                    Row::new("n_infinity_tree_laplace", t, k as f64, tree_mc, tree_se, quad)
                        .with_failures(failures),
                );
                rows.push(
                    Row::new("n_infinity_measure_laplace", t, k as f64, meas_mc, meas_se, quad)
                        .with_failures(m_failures),
                );
            }
        }

        ExperimentKind::XiCompare => {
            let bundle = attach_w_samples(cfg, &pool, bundle, &model)?;
            let cutoff = cfg.cutoff;
            let draws = replicate(&pool, cfg, 0, cfg.n_measure_samples, |rng| {
                bundle.sample_xi_detailed(cutoff, rng).map(|(k, _)| k)
            });
            let (ks_drawn, failures) = split_failures(draws);
            failures_total += failures;
            let phi_star = bundle.phi(bundle.vartheta_star).map_err(runtime)?;
            let denom = bundle.a_of(phi_star).map_err(runtime)?;
            for &s in &[0.2f64, 0.5, 0.8] {
                let vals: Vec<f64> = ks_drawn.iter().map(|&k| s.powf(k as f64)).collect();
                let (mc, se) = mean_and_se(&vals);
                let analytic = bundle
                    .a_of((phi_star - bundle.q) * s + bundle.q)
                    .map_err(runtime)?
                    / denom;
                rows.push(
                    Row::new("xi_component_pgf", f64::NAN, s, mc, se, analytic)
                        .with_failures(failures),
                );
            }
        }

        ExperimentKind::AsProxies => {
            let g_rate = cfg.g_exp_rate;
            let (alpha, lambda) = (bundle.alpha(), bundle.lambda);
            let g = move |t: f64| (g_rate * lambda * t / alpha).exp();
            let mut groups = Vec::new();
            for (ti, &t) in cfg.horizons.iter().enumerate() {
                let results = replicate(&pool, cfg, ti as u64, cfg.replications, |rng| {
                    let snap = simulate(&model, t, rng, &opts)?;
                    Ok((snap.z > 0).then_some(snap.r_t).flatten())
                });
                let (maxima, failures) = split_failures(results);
                failures_total += failures;
                groups.push((t, maxima));
            }
            let proxy_rows =
                extremes::as_proxies(&groups, &g, &cfg.lspec, &bundle).map_err(runtime)?;
            for row in proxy_rows {
                rows.push(Row::new(
                    "as_proxies_median_log_r_over_t",
                    row.t,
                    f64::NAN,
                    row.median_log_r_over_t,
                    f64::NAN,
                    bundle.lambda / bundle.alpha(),
                ));
                rows.push(Row::new(
                    "as_proxies_frac_above_g",
                    row.t,
                    row.g_value,
                    row.frac_above_g,
                    f64::NAN,
                    f64::NAN,
                ));
                for (p, v) in [0.10, 0.25, 0.50, 0.75, 0.90]
                    .iter()
                    .zip(row.liminf_quantiles.iter())
                {
                    rows.push(Row::new(
                        "as_proxies_liminf_quantile",
                        row.t,
                        *p,
                        *v,
                        f64::NAN,
                        f64::NAN,
                    ));
                }
            }
        }

        ExperimentKind::SupRCheck => {
            let t = *cfg.horizons.last().unwrap();
            let h =
                scaling::h_of_t(&cfg.lspec, bundle.alpha(), bundle.lambda, t).map_err(runtime)?;
            let results = replicate(&pool, cfg, 0, cfg.replications, |rng| {
                Ok(simulate(&model, t, rng, &opts)?.sup_r)
            });
            let (sups, failures) = split_failures(results);
            failures_total += failures;
            let tree_sups: Vec<f64> = sups.into_iter().flatten().collect();
            let n_sub = (16.0 * cfg.law.beta() * t).ceil().max(16.0) as u32;
            let n_paths = cfg.replications * 10;
            let stable = cfg.stable;
            let path_results = replicate(&pool, cfg, 1, n_paths, |rng| {
                Ok(sup_path_standalone(&stable, t, n_sub, rng).0)
            });
            let (path_sups, p_failures) = split_failures(path_results);
            failures_total += p_failures;
            let xs: Vec<f64> = cfg.x_grid.iter().map(|&x| x * h).collect();
            for row in extremes::sup_r_inequality_check(&tree_sups, &path_sups, t, bundle.lambda, &xs)
            {
                rows.push(
                    Row::new("sup_r_lhs_vs_bound", t, row.x, row.lhs, row.lhs_se, row.rhs)
                        .with_failures(failures),
                );
                if !row.holds {
                    notes.push(format!("sup_r inequality violated at x = {}", row.x));
                }
            }
        }
    }

    // optional per-tree dumps, deterministic streams past the main blocks
    if cfg.dump_trees > 0 {
        std::fs::create_dir_all(&cfg.output).map_err(runtime)?;
        let t = *cfg.horizons.last().unwrap();
        for i in 0..cfg.dump_trees {
            let mut rng = seed_stream(cfg.master_seed, (1 << 50) | i);
            let snap = simulate(&model, t, &mut rng, &opts).map_err(runtime)?;
            let mut buf = Vec::new();
            snap.write_tsv(&mut buf).map_err(runtime)?;
            std::fs::write(cfg.output.join(format!("tree_{i}.tsv")), buf).map_err(runtime)?;
        }
    }

    Ok(RunOutput {
        rows,
        constants,
        failures_total,
        notes,
    })
}

/// For laws without an exact `W`, attach empirical survivors' `e^{−λT}Z_T`
/// from a burn-in pass at the largest horizon (documented bias).
fn attach_w_samples(
    cfg: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    bundle: LimitLawBundle,
    model: &ModelParams,
) -> Result<LimitLawBundle, RunError> {
    if cfg.law.is_pure_fission() {
        return Ok(bundle);
    }
    let t = *cfg.horizons.last().unwrap();
    let opts = SimOptions {
        population_cap: cfg.population_cap,
        ..Default::default()
    };
    let results = replicate(pool, cfg, 9, cfg.w_burn_reps, |rng| {
        let snap = simulate(model, t, rng, &opts)?;
        Ok((snap.z > 0).then_some(snap.w_hat))
    });
    let (whats, _) = split_failures(results);
    let positives: Vec<f64> = whats.into_iter().flatten().collect();
    if positives.is_empty() {
        return Err(RunError::Runtime(
            "burn-in produced no surviving trees for W samples".into(),
        ));
    }
    Ok(bundle.with_w_samples(positives))
}

/// Deterministic tables of the skeleton objects.
fn gw_tables(cfg: &ExperimentConfig, bundle: &LimitLawBundle) -> branching_levy::Result<Vec<Row>> {
    let mut rows = Vec::new();
    let law = &cfg.law;
    for &t in &cfg.horizons {
        for &s in &[0.0, 0.25, 0.5, 0.75] {
            let f = branching_levy::gw::pgf_flow(law, s, t)?;
            rows.push(Row::new("gw_pgf_flow", t, s, f, f64::NAN, f64::NAN));
        }
        let surv = branching_levy::gw::survival_prob(law, t)?;
        rows.push(Row::new("gw_survival", t, f64::NAN, surv, f64::NAN, f64::NAN));
    }
    for &s in &[0.0, 0.25, 0.5, 0.75, 0.9] {
        rows.push(Row::new(
            "gw_a_function",
            f64::NAN,
            s,
            bundle.a_of(s)?,
            f64::NAN,
            f64::NAN,
        ));
    }
    for &theta in &[0.1, 0.5, 1.0, 2.0, 5.0] {
        rows.push(Row::new(
            "gw_w_laplace",
            f64::NAN,
            theta,
            bundle.phi(theta)?,
            f64::NAN,
            f64::NAN,
        ));
    }
    let t_table = bundle.t_table()?;
    for k in 1..=20usize {
        rows.push(Row::new(
            "gw_t_law",
            f64::NAN,
            k as f64,
            t_table[k - 1],
            f64::NAN,
            f64::NAN,
        ));
    }
    let norming = scaling::as_norming(
        &cfg.lspec,
        bundle.alpha(),
        bundle.lambda,
        cfg.horizons.last().unwrap().max(2.0),
        NormingKind::Liminf,
    )?;
    rows.push(Row::new(
        "scaling_liminf_norming",
        *cfg.horizons.last().unwrap(),
        f64::NAN,
        norming,
        f64::NAN,
        f64::NAN,
    ));
    Ok(rows)
}
