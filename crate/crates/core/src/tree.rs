//! Forward Monte Carlo of the branching Lévy process.
//!
//! Each particle lives an Exp(β) time, then splits according to the
//! offspring law; along its lifetime it is displaced by one stable
//! increment of the corresponding duration (legitimate because the motion
//! has stationary independent increments and only the endpoint
//! displacements `X_{u,t} = ξ_{σ_u∧t} − ξ_{b_u∧t}` enter the statistics).
//!
//! Traversal is an explicit depth-first worklist — no recursion — with a
//! hard population cap guarding against the `e^{λt}` growth. Records are
//! stored in preorder, which is also the lexicographic order of the
//! Ulam–Harris labels.
//!
//! When the running supremum of the whole system is requested, every edge
//! is subdivided into `K = 16` equal sub-increments and the discrete
//! maximum over the grid is recorded. This is a lower bound on the true
//! supremum; the same subdivision density is used for the standalone
//! reference paths so both sides of the supremum inequality carry the same
//! discretization bias.

use std::io::{self, Write};

use rand::Rng;

use crate::gw::OffspringLaw;
use crate::measure::PointMeasure;
use crate::stable::StableMotionParams;
use crate::{Error, Result};

/// Sub-increments per edge when path suprema are recorded.
pub const SUP_SUBDIVISIONS: u32 = 16;

/// Full model: skeleton law plus spatial motion.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub law: OffspringLaw,
    pub stable: StableMotionParams,
    pub start_position: f64,
}

impl ModelParams {
    pub fn new(law: OffspringLaw, stable: StableMotionParams) -> Self {
        Self {
            law,
            stable,
            start_position: 0.0,
        }
    }
}

/// Simulation switches.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Record δ-delayed survival flags by extending the skeleton to `t + δ`.
    pub record_delayed: Option<f64>,
    /// Record the discrete running-supremum proxy.
    pub record_sup_path: bool,
    /// Hard cap on particles per tree.
    pub population_cap: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_delayed: None,
            record_sup_path: false,
            population_cap: 1_000_000,
        }
    }
}

/// One particle of a simulated tree.
#[derive(Debug, Clone)]
pub struct ParticleRecord {
    /// Index of the parent record; `None` for the root.
    pub parent: Option<u32>,
    /// 1-based index among siblings; 0 for the root.
    pub child_index: u32,
    /// Birth time `b_u`.
    pub birth: f64,
    /// `σ_u ∧ t` — death or horizon, whichever comes first.
    pub end: f64,
    /// Full death time `σ_u` (may exceed the horizon).
    pub death: f64,
    /// Displacement `X_{u,t}` over `[b_u, σ_u ∧ t]`.
    pub displacement: f64,
    /// Position at `σ_u ∧ t`.
    pub position_end: f64,
    /// Alive at the horizon (`b_u ≤ t < σ_u`).
    pub alive: bool,
    /// Has a living descendant at the horizon (or is itself alive).
    pub surviving: bool,
    /// δ-delayed survival flag, when requested.
    pub delayed_surviving: Option<bool>,
    /// `max(0, running max of sub-increment partial sums)`, when recorded.
    pub sup_offset: Option<f64>,
}

/// δ-delayed extreme statistics.
#[derive(Debug, Clone, Copy)]
pub struct DelayedStats {
    pub delta: f64,
    /// Max position among alive particles whose line survives to `t + δ`.
    pub r: Option<f64>,
    /// Max displacement over the delayed surviving set.
    pub m: Option<f64>,
}

/// One simulated tree at its horizon.
#[derive(Debug, Clone)]
pub struct TreeSnapshot {
    pub t: f64,
    particles: Vec<ParticleRecord>,
    /// Number of particles alive at the horizon.
    pub z: u64,
    /// Max position over alive particles; `None` when extinct.
    pub r_t: Option<f64>,
    /// Max displacement over the surviving set; `None` when extinct.
    pub m_t: Option<f64>,
    /// `e^{−λt} Z_t`.
    pub w_hat: f64,
    /// Discrete running-supremum proxy of `sup_{s≤t} R_s`, when recorded.
    pub sup_r: Option<f64>,
    pub delayed: Option<DelayedStats>,
}

/// Simulates one tree to horizon `t`.
pub fn simulate<R: Rng + ?Sized>(
    model: &ModelParams,
    t: f64,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<TreeSnapshot> {
    if t < 0.0 {
        return Err(Error::Domain(format!("horizon {t} negative")));
    }
    let law = &model.law;
    let beta = law.beta();
    let mut particles: Vec<ParticleRecord> = Vec::new();
    // (parent, child_index, birth, start position)
    let mut stack: Vec<(Option<u32>, u32, f64, f64)> = vec![(None, 0, 0.0, model.start_position)];

    while let Some((parent, child_index, birth, start_pos)) = stack.pop() {
        if particles.len() >= opts.population_cap {
            return Err(Error::PopulationCap {
                cap: opts.population_cap,
                at: birth,
            });
        }
        let lifetime = -(1.0 - rng.random::<f64>()).ln() / beta;
        let death = birth + lifetime;
        let end = death.min(t);
        let duration = end - birth;
        let (displacement, sup_offset) = if duration > 0.0 {
            if opts.record_sup_path {
                let step = duration / SUP_SUBDIVISIONS as f64;
                let mut partial = 0.0;
                let mut peak = 0.0f64;
                for _ in 0..SUP_SUBDIVISIONS {
                    partial += model.stable.sample_increment(step, rng);
                    peak = peak.max(partial);
                }
                (partial, Some(peak))
            } else {
                (model.stable.sample_increment(duration, rng), None)
            }
        } else {
            (0.0, opts.record_sup_path.then_some(0.0))
        };
        let alive = death > t;
        let idx = particles.len() as u32;
        particles.push(ParticleRecord {
            parent,
            child_index,
            birth,
            end,
            death,
            displacement,
            position_end: start_pos + displacement,
            alive,
            surviving: false,
            delayed_surviving: None,
            sup_offset,
        });
        if death <= t {
            let count = law.sample_count(rng);
            // reversed so children pop in sibling order
            for c in (1..=count).rev() {
                stack.push((Some(idx), c, death, start_pos + displacement));
            }
        }
    }

    // survival flags propagate child -> parent (children have larger indices)
    for i in (0..particles.len()).rev() {
        if particles[i].alive {
            particles[i].surviving = true;
        }
        if particles[i].surviving {
            if let Some(p) = particles[i].parent {
                particles[p as usize].surviving = true;
            }
        }
    }

    // delayed survival: extend the bare skeleton over (t, t + δ]
    let mut delayed = None;
    if let Some(delta) = opts.record_delayed {
        if delta < 0.0 {
            return Err(Error::Domain(format!("delay {delta} negative")));
        }
        let alive_idx: Vec<usize> = (0..particles.len()).filter(|&i| particles[i].alive).collect();
        for &i in &alive_idx {
            let remaining = particles[i].death - t;
            let survives =
                skeleton_survives(law, remaining, delta, rng, opts.population_cap)?;
            particles[i].delayed_surviving = Some(survives);
        }
        for i in (0..particles.len()).rev() {
            if particles[i].delayed_surviving == Some(true) {
                if let Some(p) = particles[i].parent {
                    particles[p as usize].delayed_surviving = Some(true);
                }
            } else if particles[i].delayed_surviving.is_none() && !particles[i].alive {
                particles[i].delayed_surviving = Some(false);
            }
        }
        let r = particles
            .iter()
            .filter(|p| p.alive && p.delayed_surviving == Some(true))
            .map(|p| p.position_end)
            .fold(None, fold_max);
        let m = particles
            .iter()
            .filter(|p| p.delayed_surviving == Some(true))
            .map(|p| p.displacement)
            .fold(None, fold_max);
        delayed = Some(DelayedStats { delta, r, m });
    }

    Ok(TreeSnapshot::assemble(t, model, particles, delayed))
}

fn fold_max(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(acc.map_or(v, |a| a.max(v)))
}

/// Whether a single particle with a given residual lifetime has living
/// descendants `delta` later. Only the skeleton is simulated.
fn skeleton_survives<R: Rng + ?Sized>(
    law: &OffspringLaw,
    first_lifetime: f64,
    delta: f64,
    rng: &mut R,
    cap: usize,
) -> Result<bool> {
    let beta = law.beta();
    let mut stack: Vec<(f64, Option<f64>)> = vec![(0.0, Some(first_lifetime))];
    let mut events = 0usize;
    while let Some((birth, preset)) = stack.pop() {
        events += 1;
        if events > cap {
            return Err(Error::PopulationCap { cap, at: delta });
        }
        let life = preset.unwrap_or_else(|| -(1.0 - rng.random::<f64>()).ln() / beta);
        let death = birth + life;
        if death > delta {
            return Ok(true);
        }
        let count = law.sample_count(rng);
        for _ in 0..count {
            stack.push((death, None));
        }
    }
    Ok(false)
}

impl TreeSnapshot {
    fn assemble(
        t: f64,
        model: &ModelParams,
        particles: Vec<ParticleRecord>,
        delayed: Option<DelayedStats>,
    ) -> Self {
        let lambda = model.law.beta() * (model.law.mean() - 1.0);
        let z = particles.iter().filter(|p| p.alive).count() as u64;
        let r_t = particles
            .iter()
            .filter(|p| p.alive)
            .map(|p| p.position_end)
            .fold(None, fold_max);
        let m_t = particles
            .iter()
            .filter(|p| p.surviving)
            .map(|p| p.displacement)
            .fold(None, fold_max);
        let sup_r = if particles.iter().all(|p| p.sup_offset.is_some()) {
            particles
                .iter()
                .map(|p| p.position_end - p.displacement + p.sup_offset.unwrap_or(0.0))
                .fold(None, fold_max)
                .map(|s| s.max(model.start_position))
        } else {
            None
        };
        Self {
            t,
            particles,
            z,
            r_t,
            m_t,
            w_hat: (-lambda * t).exp() * z as f64,
            sup_r,
            delayed,
        }
    }

    /// Builds a snapshot from hand-assembled records (used in tests and by
    /// readers of dumped trees). Survival flags are recomputed.
    pub fn from_particles(t: f64, model: &ModelParams, mut particles: Vec<ParticleRecord>) -> Self {
        for i in (0..particles.len()).rev() {
            particles[i].surviving = particles[i].alive;
        }
        for i in (0..particles.len()).rev() {
            if particles[i].surviving {
                if let Some(p) = particles[i].parent {
                    particles[p as usize].surviving = true;
                }
            }
        }
        Self::assemble(t, model, particles, None)
    }

    pub fn particles(&self) -> &[ParticleRecord] {
        &self.particles
    }

    /// Ulam–Harris label of a record, e.g. `0.2.1`.
    pub fn label(&self, idx: usize) -> String {
        let mut path = Vec::new();
        let mut cur = Some(idx);
        while let Some(i) = cur {
            path.push(self.particles[i].child_index);
            cur = self.particles[i].parent.map(|p| p as usize);
        }
        path.reverse();
        path.iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }

    /// Number of strict ancestors (generation number) per particle.
    pub fn depths(&self) -> Vec<u32> {
        let mut depths = vec![0u32; self.particles.len()];
        for i in 0..self.particles.len() {
            if let Some(p) = self.particles[i].parent {
                depths[i] = depths[p as usize] + 1;
            }
        }
        depths
    }

    /// Alive-descendant counts (including self when alive): the Y-measure
    /// multiplicities.
    pub fn descendant_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.particles.len()];
        for i in (0..self.particles.len()).rev() {
            if self.particles[i].alive {
                counts[i] += 1;
            }
            if let Some(p) = self.particles[i].parent {
                counts[p as usize] += counts[i];
            }
        }
        counts
    }

    /// The rescaled position and displacement measures
    /// `(Σ_{u alive} δ_{ξ_u/a},  Σ_{u surviving} Z_t^u δ_{X_u/a})`.
    pub fn point_measures(&self, a: f64) -> (PointMeasure, PointMeasure) {
        debug_assert!(a > 0.0);
        let mut x_meas = PointMeasure::empty();
        for p in &self.particles {
            if p.alive {
                x_meas.push(p.position_end / a, 1);
            }
        }
        let counts = self.descendant_counts();
        let mut y_meas = PointMeasure::empty();
        for (p, &c) in self.particles.iter().zip(counts.iter()) {
            if p.surviving {
                debug_assert!(c >= 1);
                y_meas.push(p.displacement / a, c);
            }
        }
        (x_meas, y_meas)
    }

    /// `max |X_{u,t}|` over particles born by `t − s`; `None` if none
    /// qualify (only possible for `s > t`).
    pub fn m_window(&self, s: f64) -> Option<f64> {
        let cutoff = self.t - s;
        self.particles
            .iter()
            .filter(|p| p.birth <= cutoff)
            .map(|p| p.displacement.abs())
            .fold(None, fold_max)
    }

    /// Tab-separated dump, one row per particle in label order.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "label\tbirth\tend\tdisplacement\talive\tsurviving")?;
        for (i, p) in self.particles.iter().enumerate() {
            writeln!(
                w,
                "{}\t{:.17e}\t{:.17e}\t{:.17e}\t{}\t{}",
                self.label(i),
                p.birth,
                p.end,
                p.displacement,
                p.alive as u8,
                p.surviving as u8
            )?;
        }
        Ok(())
    }
}

/// Monte Carlo estimate of `E Σ_{v alive} g(n^v)` where `n^v` counts the
/// strict ancestors of `v`.
pub fn ancestor_count_stats<F: Fn(u32) -> f64>(snaps: &[TreeSnapshot], g: F) -> f64 {
    let mut total = 0.0;
    for snap in snaps {
        let depths = snap.depths();
        for (p, &d) in snap.particles().iter().zip(depths.iter()) {
            if p.alive {
                total += g(d);
            }
        }
    }
    total / snaps.len() as f64
}

/// The companion exact value `e^{λt} E g(n_t)` with `n_t` Poisson of
/// intensity `βμ` — the ancestral branch-point rate seen from a surviving
/// line. (The expected number of alive particles at depth `k` solves
/// `m_k' = −β m_k + βμ m_{k−1}`, i.e. `m_k(t) = e^{−βt} (βμt)^k / k!`,
/// whose total is `e^{λt}` and whose profile is Poisson(βμt).)
pub fn many_to_one_exact<F: Fn(u32) -> f64>(law: &OffspringLaw, t: f64, g: F) -> f64 {
    let lambda = law.beta() * (law.mean() - 1.0);
    let mean = law.beta() * law.mean() * t;
    let mut pmf = (-mean).exp();
    let mut acc = 0.0;
    let mut cum = 0.0;
    let mut k = 0u32;
    loop {
        acc += g(k) * pmf;
        cum += pmf;
        k += 1;
        if cum > 1.0 - 1e-14 && k as f64 > mean + 20.0 * mean.sqrt().max(1.0) {
            break;
        }
        pmf *= mean / k as f64;
    }
    (lambda * t).exp() * acc
}

/// Running-supremum proxy and endpoint of one standalone motion path over
/// `[0, t]`, on a grid of `n_sub` equal increments.
pub fn sup_path_standalone<R: Rng + ?Sized>(
    stable: &StableMotionParams,
    t: f64,
    n_sub: u32,
    rng: &mut R,
) -> (f64, f64) {
    debug_assert!(t > 0.0 && n_sub > 0);
    let step = t / n_sub as f64;
    let mut partial = 0.0;
    let mut peak = 0.0f64;
    for _ in 0..n_sub {
        partial += stable.sample_increment(step, rng);
        peak = peak.max(partial);
    }
    (peak, partial)
}
