//! Finite point measures and the multiplicative functional
//! `I(g, ν) = Π_k g(x_k)` (with multiplicities as powers, and the empty
//! product equal to one).

use crate::gw::TestFunction;

/// A finite multiset of atoms `(location, multiplicity)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointMeasure {
    atoms: Vec<(f64, u64)>,
}

impl PointMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: Vec<(f64, u64)>) -> Self {
        debug_assert!(atoms.iter().all(|&(_, m)| m >= 1));
        Self { atoms }
    }

    pub fn push(&mut self, location: f64, multiplicity: u64) {
        debug_assert!(multiplicity >= 1);
        self.atoms.push((location, multiplicity));
    }

    pub fn atoms(&self) -> &[(f64, u64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of atoms, ignoring multiplicities.
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Total mass `Σ multiplicities`.
    pub fn total_mass(&self) -> u64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }

    /// The rescaled measure `ν/x`, whose atoms sit at `location / x`.
    pub fn scaled(&self, x: f64) -> Self {
        debug_assert!(x != 0.0);
        Self {
            atoms: self.atoms.iter().map(|&(a, m)| (a / x, m)).collect(),
        }
    }

    /// Largest atom location, `None` for the empty measure.
    pub fn max_location(&self) -> Option<f64> {
        self.atoms
            .iter()
            .map(|&(a, _)| a)
            .fold(None, |acc, a| Some(acc.map_or(a, |b: f64| b.max(a))))
    }

    /// Mass in `(threshold, ∞)`.
    pub fn mass_above(&self, threshold: f64) -> u64 {
        self.atoms
            .iter()
            .filter(|&&(a, _)| a > threshold)
            .map(|&(_, m)| m)
            .sum()
    }

    /// `ν(g) = Σ m_k g(x_k)` for a plain function.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.atoms.iter().map(|&(a, m)| m as f64 * g(a)).sum()
    }

    /// Merges another measure into this one.
    pub fn extend_from(&mut self, other: &PointMeasure) {
        self.atoms.extend_from_slice(&other.atoms);
    }
}

/// `I(g, ν) = Π g(x_k)^{m_k}`, with `I(g, 0) = 1`.
pub fn i_functional(g: &TestFunction, nu: &PointMeasure) -> f64 {
    let mut acc = 1.0;
    for &(a, m) in nu.atoms() {
        let v = g.eval(a);
        if v == 0.0 {
            return 0.0;
        }
        acc *= if m == 1 { v } else { v.powi(m as i32) };
    }
    acc
}
