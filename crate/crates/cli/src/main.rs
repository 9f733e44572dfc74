use std::path::Path;
use std::process::ExitCode;

use branching_levy_cli::{run, RunError};

const USAGE: &str = "usage:
  blp run <config>              run the configured experiment
  blp print-constants <config>  resolve and print the model constants
  blp selftest                  run the deterministic oracle checks

exit codes: 0 ok, 1 validation error, 2 runtime error
environment: BLP_THREADS overrides the configured parallelism";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    match args.get(1).map(String::as_str) {
        Some("run") => {
            let Some(path) = args.get(2) else {
                eprintln!("{USAGE}");
                return ExitCode::from(1);
            };
            match run(Path::new(path)) {
                Ok(out) => {
                    println!(
                        "ok: {} rows, {} replication failures",
                        out.rows.len(),
                        out.failures_total
                    );
                    for note in &out.notes {
                        println!("note: {note}");
                    }
                    ExitCode::SUCCESS
                }
                Err(RunError::Validation(m)) => {
                    eprintln!("validation error: {m}");
                    ExitCode::from(1)
                }
                Err(RunError::Runtime(m)) => {
                    eprintln!("runtime error: {m}");
                    ExitCode::from(2)
                }
            }
        }
        Some("print-constants") => {
            let Some(path) = args.get(2) else {
                eprintln!("{USAGE}");
                return ExitCode::from(1);
            };
            match print_constants(Path::new(path)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(RunError::Validation(m)) => {
                    eprintln!("validation error: {m}");
                    ExitCode::from(1)
                }
                Err(RunError::Runtime(m)) => {
                    eprintln!("runtime error: {m}");
                    ExitCode::from(2)
                }
            }
        }
        Some("selftest") => {
            if selftest() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        _ => {
            eprintln!("{USAGE}");
            ExitCode::from(1)
        }
    }
}

fn print_constants(path: &Path) -> Result<(), RunError> {
    use branching_levy::LimitLawBundle;
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let cfg = branching_levy_cli::ExperimentConfig::from_str(&text)
        .map_err(|e| RunError::Validation(e.to_string()))?;
    let bundle = LimitLawBundle::new(cfg.law.clone(), cfg.stable, cfg.lspec)
        .map_err(|e| RunError::Validation(e.to_string()))?;
    let a_phi = bundle
        .a_of(
            bundle
                .phi(bundle.vartheta_star)
                .map_err(|e| RunError::Runtime(e.to_string()))?,
        )
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    println!("alpha = {:.16e}", bundle.alpha());
    println!("lambda = {:.16e}", bundle.lambda);
    println!("rho = {:.16e}", bundle.rho);
    println!("q = {:.16e}", bundle.q);
    println!("vartheta = {:.16e}", bundle.vartheta);
    println!("vartheta_star = {:.16e}", bundle.vartheta_star);
    println!("a_phi_vartheta_star = {:.16e}", a_phi);
    println!(
        "lower_deviation_target = {:.16e}",
        a_phi / (1.0 - bundle.q)
    );
    Ok(())
}

/// Deterministic oracle suite: Yule closed forms and the scaling solver.
fn selftest() -> bool {
    use branching_levy::gw::{a_function, pgf_flow, t_law_table, vartheta, w_laplace, OffspringLaw};
    use branching_levy::scaling::{big_h, SlowVariationSpec};

    let yule = OffspringLaw::yule(1.0);
    let ok = std::cell::Cell::new(true);
    let check = |name: &str, got: f64, want: f64, tol: f64| {
        let pass = (got - want).abs() <= tol;
        println!(
            "{}: {name}: got {got:.12e}, want {want:.12e}",
            if pass { "PASS" } else { "FAIL" }
        );
        ok.set(ok.get() && pass);
    };

    match pgf_flow(&yule, 0.5, 1.0) {
        Ok(v) => {
            let e = (-1.0f64).exp();
            check("yule F(1/2, 1)", v, 0.5 * e / (1.0 - (1.0 - e) * 0.5), 1e-8);
        }
        Err(e) => {
            println!("FAIL: yule F(1/2, 1): {e}");
            ok.set(false);
        }
    }
    match a_function(&yule, 0.5) {
        Ok(v) => check("yule A(1/2)", v, 1.0, 1e-8),
        Err(e) => {
            println!("FAIL: yule A(1/2): {e}");
            ok.set(false);
        }
    }
    match w_laplace(&yule, 1.0) {
        Ok(v) => check("yule phi(1)", v, 0.5, 1e-8),
        Err(e) => {
            println!("FAIL: yule phi(1): {e}");
            ok.set(false);
        }
    }
    match vartheta(&yule) {
        Ok(v) => check("yule vartheta", v, 1.0, 1e-8),
        Err(e) => {
            println!("FAIL: yule vartheta: {e}");
            ok.set(false);
        }
    }
    match t_law_table(&yule, 5) {
        Ok(t) => {
            for (i, &p) in t.iter().enumerate() {
                let k = (i + 1) as f64;
                check(&format!("yule P(T={})", i + 1), p, 1.0 / (k * (k + 1.0)), 1e-8);
            }
        }
        Err(e) => {
            println!("FAIL: yule T-law: {e}");
            ok.set(false);
        }
    }
    match big_h(&SlowVariationSpec::LogPower(1.0), 1.5, 1e-3) {
        Ok(h) => {
            let resid = (h.powf(-1.5) * (std::f64::consts::E + h).ln() - 1e-3).abs();
            check("H inversion residual", resid, 0.0, 1e-13);
        }
        Err(e) => {
            println!("FAIL: H inversion: {e}");
            ok.set(false);
        }
    }
    println!("{}", if ok.get() { "selftest: PASS" } else { "selftest: FAIL" });
    ok.get()
}
