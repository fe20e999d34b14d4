//! Sparse multivariate polynomials for inline problem files: evaluation
//! and exact partial derivatives, so parsed frames and Lagrangians get
//! analytic gradients rather than finite-difference ones.

use crate::error::{Error, Result};

/// Σ c · Π xᵥ^{powers[v]} over a fixed variable count.
#[derive(Debug, Clone)]
pub struct Polynomial {
    vars: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    /// Validates that every term has one exponent per variable.
    pub fn new(vars: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        for (_, powers) in &terms {
            if powers.len() != vars {
                return Err(Error::Schema {
                    detail: format!(
                        "polynomial term has {} exponents, expected {vars}",
                        powers.len()
                    ),
                });
            }
        }
        Ok(Polynomial { vars, terms })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.vars);
        self.terms
            .iter()
            .map(|(c, powers)| {
                c * powers
                    .iter()
                    .zip(x)
                    .map(|(&e, &xi)| xi.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Polynomial {
        assert!(var < self.vars, "variable index out of range");
        let terms = self
            .terms
            .iter()
            .filter(|(_, powers)| powers[var] > 0)
            .map(|(c, powers)| {
                let mut p = powers.clone();
                p[var] -= 1;
                (c * powers[var] as f64, p)
            })
            .collect();
        Polynomial { vars: self.vars, terms }
    }
}
