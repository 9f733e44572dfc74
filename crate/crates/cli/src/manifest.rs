//! Run manifest: resolved constants, config echo, row counts, wall time.

use crate::config::ExperimentConfig;
use crate::experiments::RunOutput;

pub fn render(cfg: &ExperimentConfig, out: &RunOutput, wall_seconds: f64) -> String {
    let c = &out.constants;
    let mut s = String::new();
    s.push_str("# branching-levy run manifest\n");
    s.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("kind = {}\n", cfg.kind.name()));
    s.push_str(&format!("master_seed = {}\n", cfg.master_seed));
    s.push_str(&format!("replications = {}\n", cfg.replications));
    s.push_str(&format!("alpha = {:.16e}\n", c.alpha));
    s.push_str(&format!("lambda = {:.16e}\n", c.lambda));
    s.push_str(&format!("rho = {:.16e}\n", c.rho));
    s.push_str(&format!("q = {:.16e}\n", c.q));
    s.push_str(&format!("vartheta = {:.16e}\n", c.vartheta));
    s.push_str(&format!("vartheta_star = {:.16e}\n", c.vartheta_star));
    s.push_str(&format!(
        "a_phi_vartheta_star = {:.16e}\n",
        c.a_phi_vartheta_star
    ));
    s.push_str(&format!(
        "lower_deviation_target = {:.16e}\n",
        c.lower_deviation_target
    ));
    s.push_str(&format!("rows = {}\n", out.rows.len()));
    s.push_str(&format!("failures_total = {}\n", out.failures_total));
    for note in &out.notes {
        s.push_str(&format!("note = {note}\n"));
    }
    s.push_str(&format!("wall_seconds = {wall_seconds:.3}\n"));
    s.push_str("config_echo_begin\n");
    s.push_str(&cfg.echo);
    s.push_str("config_echo_end\n");
    s
}
