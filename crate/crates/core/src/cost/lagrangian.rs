use serde::{Deserialize, Serialize};

use crate::error::ValidationIssue;
use crate::poly::Polynomial;

/// Running Lagrangian `L(t, x, z, mu)`, convex in the velocity `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Lagrangian {
    ConstantOne,
    /// `|z|^2 / 2`
    Kinetic,
    /// `|z|^2 / 2 + U(x)`
    KineticPlusPotential { potential: Polynomial },
    /// `|z|^2 / 2 + c * (second moment of mu)`
    Congestion { c: f64 },
}

impl Lagrangian {
    /// `second_moment` is only read by the congestion form.
    pub fn eval(&self, _t: f64, x: &[f64], z: &[f64], second_moment: f64) -> f64 {
        let kinetic = || 0.5 * z.iter().map(|v| v * v).sum::<f64>();
        match self {
            Self::ConstantOne => 1.0,
            Self::Kinetic => kinetic(),
            Self::KineticPlusPotential { potential } => kinetic() + potential.eval(0.0, x),
            Self::Congestion { c } => kinetic() + c * second_moment,
        }
    }

    pub fn needs_measure(&self) -> bool {
        matches!(self, Self::Congestion { .. })
    }

    /// True when the value depends on neither position nor velocity.
    pub fn is_path_independent(&self) -> bool {
        matches!(self, Self::ConstantOne)
    }

    pub fn validate(&self, path: &str, d: usize) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        match self {
            Self::KineticPlusPotential { potential } => {
                potential.check_nonnegative_potential(&format!("{path}/params/potential"), d, &mut out)
            }
            Self::Congestion { c } if !(c.is_finite() && *c >= 0.0) => {
                out.push(ValidationIssue::new(format!("{path}/params/c"), "must be >= 0"))
            }
            _ => {}
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    #[test]
    fn forms() {
        let z = [3.0, 4.0];
        assert_eq!(Lagrangian::ConstantOne.eval(0.0, &[0.0, 0.0], &z, 0.0), 1.0);
        assert_eq!(Lagrangian::Kinetic.eval(0.0, &[0.0, 0.0], &z, 0.0), 12.5);
        let u = Polynomial {
            constant: 1.0,
            terms: vec![Monomial { coeff: 1.0, t_power: 0, x_powers: vec![2, 0] }],
        };
        let l = Lagrangian::KineticPlusPotential { potential: u };
        assert_eq!(l.eval(0.0, &[2.0, 0.0], &z, 0.0), 12.5 + 5.0);
        assert_eq!(Lagrangian::Congestion { c: 2.0 }.eval(0.0, &[0.0, 0.0], &z, 1.5), 15.5);
    }

    proptest::proptest! {
        #[test]
        fn kinetic_is_midpoint_convex(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let l = Lagrangian::Kinetic;
            let mid = l.eval(0.0, &[0.0], &[0.5 * (a + b)], 0.0);
            let avg = 0.5 * (l.eval(0.0, &[0.0], &[a], 0.0) + l.eval(0.0, &[0.0], &[b], 0.0));
            proptest::prop_assert!(mid <= avg + 1e-12);
        }
    }
}
