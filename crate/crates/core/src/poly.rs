//! Sparse polynomials in `(t, x)` used for potentials and speed fields.

use serde::{Deserialize, Serialize};

use crate::error::ValidationIssue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub t_power: u32,
    #[serde(default)]
    pub x_powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|m| {
                    let xs: f64 = m
                        .x_powers
                        .iter()
                        .zip(x)
                        .map(|(&p, &xi)| xi.powi(p as i32))
                        .product();
                    m.coeff * t.powi(m.t_power as i32) * xs
                })
                .sum::<f64>()
    }

    pub(crate) fn check_shape(&self, path: &str, d: usize, out: &mut Vec<ValidationIssue>) {
        if !self.constant.is_finite() {
            out.push(ValidationIssue::new(format!("{path}/constant"), "must be finite"));
        }
        for (i, m) in self.terms.iter().enumerate() {
            if !m.coeff.is_finite() {
                out.push(ValidationIssue::new(format!("{path}/terms/{i}/coeff"), "must be finite"));
            }
            if m.x_powers.len() > d {
                out.push(ValidationIssue::new(
                    format!("{path}/terms/{i}/x_powers"),
                    format!("has {} entries for dimension {d}", m.x_powers.len()),
                ));
            }
        }
    }

    /// Sufficient condition for `U(x) >= 0`: nonnegative constant and
    /// coefficients, even powers, no time dependence.
    pub(crate) fn check_nonnegative_potential(&self, path: &str, d: usize, out: &mut Vec<ValidationIssue>) {
        self.check_shape(path, d, out);
        if self.constant < 0.0 {
            out.push(ValidationIssue::new(format!("{path}/constant"), "must be >= 0"));
        }
        for (i, m) in self.terms.iter().enumerate() {
            if m.coeff < 0.0 {
                out.push(ValidationIssue::new(format!("{path}/terms/{i}/coeff"), "must be >= 0"));
            }
            if m.t_power != 0 {
                out.push(ValidationIssue::new(
                    format!("{path}/terms/{i}/t_power"),
                    "potential may not depend on time",
                ));
            }
            if m.x_powers.iter().any(|p| p % 2 != 0) {
                out.push(ValidationIssue::new(
                    format!("{path}/terms/{i}/x_powers"),
                    "powers must be even",
                ));
            }
        }
    }
}
