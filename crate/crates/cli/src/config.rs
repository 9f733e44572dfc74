//! Flat sectioned `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use branching_levy::{Complex64, OffspringLaw, SlowVariationSpec, StableMotionParams};

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    WeakLimitRt,
    UpperDeviation,
    ParetoConditional,
    LowerDeviation,
    OneBigJump,
    NInfinityCompare,
    XiCompare,
    AsProxies,
    SupRCheck,
    GwTables,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "weak_limit_rt" => Some(Self::WeakLimitRt),
            "upper_deviation" => Some(Self::UpperDeviation),
            "pareto_conditional" => Some(Self::ParetoConditional),
            "lower_deviation" => Some(Self::LowerDeviation),
            "one_big_jump" => Some(Self::OneBigJump),
            "n_infinity_compare" => Some(Self::NInfinityCompare),
            "xi_compare" => Some(Self::XiCompare),
            "as_proxies" => Some(Self::AsProxies),
            "sup_r_check" => Some(Self::SupRCheck),
            "gw_tables" => Some(Self::GwTables),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::WeakLimitRt => "weak_limit_rt",
            Self::UpperDeviation => "upper_deviation",
            Self::ParetoConditional => "pareto_conditional",
            Self::LowerDeviation => "lower_deviation",
            Self::OneBigJump => "one_big_jump",
            Self::NInfinityCompare => "n_infinity_compare",
            Self::XiCompare => "xi_compare",
            Self::AsProxies => "as_proxies",
            Self::SupRCheck => "sup_r_check",
            Self::GwTables => "gw_tables",
        }
    }
}

/// Parsed and validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub law: OffspringLaw,
    pub stable: StableMotionParams,
    pub lspec: SlowVariationSpec,
    pub start_position: f64,
    pub kind: ExperimentKind,
    pub horizons: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub lambda_exp_rate: f64,
    pub a_exp_rate: f64,
    pub g_exp_rate: f64,
    pub cutoff: f64,
    pub n_measure_samples: u64,
    pub w_burn_reps: u64,
    pub replications: u64,
    pub population_cap: usize,
    pub record_delta: Option<f64>,
    pub dump_trees: u64,
    pub master_seed: u64,
    pub parallelism: usize,
    pub output: PathBuf,
    /// Canonical text echoed into the manifest.
    pub echo: String,
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>, ConfigError> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            current = line[1..line.len() - 1].trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(
                &format!("line {}", lineno + 1),
                format!("expected key = value, got {raw:?}"),
            ));
        };
        if current.is_empty() {
            return Err(err(
                &format!("line {}", lineno + 1),
                "key before any [section] header",
            ));
        }
        sections
            .get_mut(&current)
            .unwrap()
            .insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(sections)
}

struct Section<'a> {
    name: &'a str,
    map: &'a BTreeMap<String, String>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn f64(&self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        match self.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| err(&format!("{}.{}", self.name, key), format!("not a number: {v:?}"))),
            None => default.ok_or_else(|| err(&format!("{}.{}", self.name, key), "missing")),
        }
    }

    fn u64(&self, key: &str, default: Option<u64>) -> Result<u64, ConfigError> {
        match self.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| err(&format!("{}.{}", self.name, key), format!("not an integer: {v:?}"))),
            None => default.ok_or_else(|| err(&format!("{}.{}", self.name, key), "missing")),
        }
    }

    fn f64_list(&self, key: &str, default: Option<Vec<f64>>) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            Some(v) => v
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        err(&format!("{}.{}", self.name, key), format!("bad entry {tok:?}"))
                    })
                })
                .collect(),
            None => default.ok_or_else(|| err(&format!("{}.{}", self.name, key), "missing")),
        }
    }
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let sections = parse_sections(text)?;
        let model = Section {
            name: "model",
            map: sections
                .get("model")
                .ok_or_else(|| err("model", "missing [model] section"))?,
        };
        let experiment = Section {
            name: "experiment",
            map: sections
                .get("experiment")
                .ok_or_else(|| err("experiment", "missing [experiment] section"))?,
        };
        let run = Section {
            name: "run",
            map: sections
                .get("run")
                .ok_or_else(|| err("run", "missing [run] section"))?,
        };

        // --- model ---
        let offspring_raw = model
            .get("offspring")
            .ok_or_else(|| err("model.offspring", "missing (format: k:p, k:p, ...)"))?;
        let mut pmf = Vec::new();
        for tok in offspring_raw.split(',') {
            let tok = tok.trim();
            let Some((k, p)) = tok.split_once(':') else {
                return Err(err("model.offspring", format!("bad entry {tok:?}")));
            };
            let k: u32 = k
                .trim()
                .parse()
                .map_err(|_| err("model.offspring", format!("bad count {k:?}")))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| err("model.offspring", format!("bad probability {p:?}")))?;
            pmf.push((k, p));
        }
        let beta = model.f64("beta", Some(1.0))?;
        let law = OffspringLaw::new(&pmf, beta)
            .map_err(|e| err("model.offspring", e.to_string()))?;

        let alpha = model.f64("alpha", None)?;
        let stable = if let Some(re) = model.get("c_star") {
            let re: f64 = re
                .parse()
                .map_err(|_| err("model.c_star", format!("not a number: {re:?}")))?;
            let im = model.f64("c_star_im", Some(0.0))?;
            StableMotionParams::from_c_star(alpha, Complex64::new(re, im))
                .map_err(|e| err("model.c_star", e.to_string()))?
        } else {
            let q1 = model.f64("q1", None)?;
            let q2 = model.f64("q2", Some(0.0))?;
            StableMotionParams::from_tails(alpha, q1, q2)
                .map_err(|e| err("model.q1", e.to_string()))?
        };

        let lspec = match model.get("slow_variation").unwrap_or("const:1.0") {
            s if s.starts_with("const:") => {
                let c: f64 = s[6..]
                    .trim()
                    .parse()
                    .map_err(|_| err("model.slow_variation", format!("bad constant in {s:?}")))?;
                SlowVariationSpec::Constant(c)
            }
            s if s.starts_with("logpow:") => {
                let r: f64 = s[7..]
                    .trim()
                    .parse()
                    .map_err(|_| err("model.slow_variation", format!("bad exponent in {s:?}")))?;
                SlowVariationSpec::LogPower(r)
            }
            other => {
                return Err(err(
                    "model.slow_variation",
                    format!("expected const:<c> or logpow:<r>, got {other:?}"),
                ))
            }
        };
        lspec
            .validate_for(alpha)
            .map_err(|e| err("model.slow_variation", e.to_string()))?;
        let start_position = model.f64("start_position", Some(0.0))?;

        // --- experiment ---
        let kind_raw = experiment
            .get("kind")
            .ok_or_else(|| err("experiment.kind", "missing"))?;
        let kind = ExperimentKind::parse(kind_raw)
            .ok_or_else(|| err("experiment.kind", format!("unknown kind {kind_raw:?}")))?;
        let horizons = experiment.f64_list("horizons", Some(vec![5.0]))?;
        if horizons.is_empty() {
            return Err(err("experiment.horizons", "empty"));
        }
        for w in horizons.windows(2) {
            if w[1] <= w[0] {
                return Err(err("experiment.horizons", "must be strictly increasing"));
            }
        }
        if horizons[0] <= 0.0 {
            return Err(err("experiment.horizons", "must be positive"));
        }
        let replications = experiment.u64("replications", Some(1000))?;
        if replications == 0 {
            return Err(err("experiment.replications", "must be at least 1"));
        }
        let x_grid = experiment.f64_list("x_grid", Some(vec![2.0, 4.0, 8.0]))?;
        if x_grid.iter().any(|&x| x <= 0.0) {
            return Err(err("experiment.x_grid", "entries must be positive"));
        }
        let lambda_exp_rate = experiment.f64("lambda_exp_rate", Some(0.5))?;
        let a_exp_rate = experiment.f64("a_exp_rate", Some(0.8))?;
        let g_exp_rate = experiment.f64("g_exp_rate", Some(2.0))?;
        let cutoff = experiment.f64("cutoff", Some(1e-3))?;
        if cutoff <= 0.0 {
            return Err(err("experiment.cutoff", "must be positive"));
        }
        let n_measure_samples = experiment.u64("n_measure_samples", Some(5000))?;
        let w_burn_reps = experiment.u64("w_burn_reps", Some(2000))?;
        let population_cap = experiment.u64("population_cap", Some(1_000_000))? as usize;
        let record_delta = match experiment.get("record_delta") {
            None | Some("") => None,
            Some(v) => Some(v.parse::<f64>().map_err(|_| {
                err("experiment.record_delta", format!("not a number: {v:?}"))
            })?),
        };
        let dump_trees = experiment.u64("dump_trees", Some(0))?;

        // --- run ---
        let master_seed = run.u64("master_seed", Some(1))?;
        let parallelism = run.u64("parallelism", Some(1))? as usize;
        if parallelism == 0 {
            return Err(err("run.parallelism", "must be at least 1"));
        }
        let output = PathBuf::from(run.get("output").unwrap_or("out"));

        let mut echo = String::new();
        for (name, map) in &sections {
            echo.push_str(&format!("[{name}]\n"));
            for (k, v) in map {
                echo.push_str(&format!("{k} = {v}\n"));
            }
        }

        Ok(Self {
            law,
            stable,
            lspec,
            start_position,
            kind,
            horizons,
            x_grid,
            lambda_exp_rate,
            a_exp_rate,
            g_exp_rate,
            cutoff,
            n_measure_samples,
            w_burn_reps,
            replications,
            population_cap,
            record_delta,
            dump_trees,
            master_seed,
            parallelism,
            output,
            echo,
        })
    }
}
