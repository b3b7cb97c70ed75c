use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass and on mass comparisons between measures.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

/// A finitely supported probability measure with pairwise distinct atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct EmpiricalMeasure {
    atoms: Vec<Atom>,
}

pub(crate) fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y)
}

impl EmpiricalMeasure {
    /// Validates masses and dimensions; atoms at bit-equal points are merged.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let measure = Self::merged(atoms)?;
        let total: f64 = measure.atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!("atom masses sum to {total}, not 1")));
        }
        Ok(measure)
    }

    /// Same checks as [`EmpiricalMeasure::new`] except the unit total.
    pub(crate) fn merged(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("measure needs at least one atom"));
        }
        let d = atoms[0].point.len();
        if d == 0 {
            return Err(Error::domain("atom points need dimension >= 1"));
        }
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            if atom.point.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: atom.point.len(),
                });
            }
            if atom.point.iter().any(|x| !x.is_finite()) {
                return Err(Error::domain("atom coordinates must be finite"));
            }
            if !(atom.mass > 0.0 && atom.mass <= 1.0 + MASS_TOL) {
                return Err(Error::domain(format!(
                    "atom mass {} outside (0, 1]",
                    atom.mass
                )));
            }
            match out.iter_mut().find(|a| same_point(&a.point, &atom.point)) {
                Some(existing) => existing.mass += atom.mass,
                None => out.push(atom),
            }
        }
        Ok(Self { atoms: out })
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![Atom { point, mass: 1.0 }])
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        Self::new(points.into_iter().map(|point| Atom { point, mass: w }).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].point.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * a.point.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// Mass of the atom at exactly `point`, zero if absent.
    pub fn mass_at(&self, point: &[f64]) -> f64 {
        self.atoms
            .iter()
            .find(|a| same_point(&a.point, point))
            .map_or(0.0, |a| a.mass)
    }

    /// Atoms sorted lexicographically by point.
    pub fn sorted(&self) -> Vec<Atom> {
        let mut atoms = self.atoms.clone();
        atoms.sort_by(|a, b| cmp_points(&a.point, &b.point));
        atoms
    }

    /// Atom-for-atom comparison: bit-equal points, masses within `mass_tol`.
    /// Returns a description of each offending atom.
    pub fn mismatches(&self, other: &EmpiricalMeasure, mass_tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for a in &self.atoms {
            let m = other.mass_at(&a.point);
            if m == 0.0 {
                out.push(format!("atom {:?} (mass {}) missing on right", a.point, a.mass));
            } else if (m - a.mass).abs() > mass_tol {
                out.push(format!(
                    "atom {:?} has mass {} on left, {} on right",
                    a.point, a.mass, m
                ));
            }
        }
        for b in &other.atoms {
            if self.mass_at(&b.point) == 0.0 {
                out.push(format!("atom {:?} (mass {}) missing on left", b.point, b.mass));
            }
        }
        out
    }

    pub fn approx_eq(&self, other: &EmpiricalMeasure, mass_tol: f64) -> bool {
        self.dim() == other.dim() && self.mismatches(other, mass_tol).is_empty()
    }

    /// Canonical cache key: atoms sorted by point then mass, quantized.
    pub fn canonical_key(&self, quantum: f64) -> Vec<(Vec<i64>, i64)> {
        let q = |x: f64| (x / quantum).round() as i64;
        let mut key: Vec<(Vec<i64>, i64)> = self
            .atoms
            .iter()
            .map(|a| (a.point.iter().map(|&x| q(x)).collect(), q(a.mass)))
            .collect();
        key.sort();
        key
    }
}

impl TryFrom<Vec<Atom>> for EmpiricalMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<EmpiricalMeasure> for Vec<Atom> {
    fn from(m: EmpiricalMeasure) -> Self {
        m.atoms
    }
}
