//! Newton root-finding for small dense systems, with optional analytic
//! Jacobian and residual-norm line search.

use crate::error::{Error, Result};
use crate::numerics::fd::fd_jacobian;
use crate::numerics::linalg::{all_finite, norm2, norm_inf, sub, Mat};

/// Tolerances and budgets for Newton solves.
#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Convergence threshold on ‖F(x)‖∞.
    pub abs_tolerance: f64,
    /// Iteration budget.
    pub max_iterations: usize,
    /// Base step for finite-difference Jacobians (scaled by 1+|xᵢ|).
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { abs_tolerance: 1e-10, max_iterations: 50, fd_step: 1e-6 }
    }
}

impl NewtonConfig {
    /// Same budgets with a different convergence threshold.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.abs_tolerance = tol;
        self
    }
}

/// Extra knobs for [`newton_solve_with`].
pub struct NewtonOptions<'a> {
    /// Analytic Jacobian; finite differences when absent.
    pub jacobian: Option<&'a dyn Fn(&[f64]) -> Result<Mat>>,
    /// Number of step halvings to try when the full step does not reduce
    /// the residual; 0 disables damping.
    pub line_search_halvings: usize,
}

impl Default for NewtonOptions<'_> {
    fn default() -> Self {
        NewtonOptions { jacobian: None, line_search_halvings: 0 }
    }
}

/// Converged Newton iterate with diagnostics.
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Solve F(x) = 0 starting from `x0`; Jacobian by finite differences.
pub fn newton_solve(
    f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    x0: &[f64],
    cfg: &NewtonConfig,
) -> Result<Vec<f64>> {
    newton_solve_with(f, x0, cfg, &NewtonOptions::default()).map(|s| s.x)
}

/// Solve F(x) = 0 with optional analytic Jacobian and damping.
///
/// Each iteration solves J d = F and steps x ← x − d, halving the step up to
/// `line_search_halvings` times until the residual decreases. A Jacobian
/// whose condition estimate exceeds 1e12 aborts with `SingularJacobian`;
/// exhausting the iteration budget (or the line search, when damping is on)
/// reports the best residual seen.
pub fn newton_solve_with(
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    x0: &[f64],
    cfg: &NewtonConfig,
    opts: &NewtonOptions<'_>,
) -> Result<NewtonSolution> {
    const MAX_CONDITION: f64 = 1e12;
    let mut x = x0.to_vec();
    let mut r = checked_eval(&mut f, &x)?;
    if r.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: r.len(),
            context: "newton residual map".into(),
        });
    }
    let mut best = norm_inf(&r);
    for iteration in 0..cfg.max_iterations {
        if norm_inf(&r) <= cfg.abs_tolerance {
            return Ok(NewtonSolution { x, iterations: iteration, residual_norm: norm_inf(&r) });
        }
        let jac = match opts.jacobian {
            Some(j) => j(&x)?,
            None => fd_jacobian(&mut f, &x, Some(cfg.fd_step))?,
        };
        let condition = jac.cond();
        if condition > MAX_CONDITION {
            return Err(Error::SingularJacobian { condition });
        }
        let d = jac
            .solve(&r)
            .ok_or(Error::SingularJacobian { condition })?;
        let r_norm = norm2(&r);
        let mut accepted = false;
        for halving in 0..=opts.line_search_halvings {
            let step = 0.5f64.powi(halving as i32);
            let candidate = sub(&x, &crate::numerics::linalg::scale(&d, step));
            let r_new = match checked_eval(&mut f, &candidate) {
                Ok(v) => v,
                // A shorter step may stay inside the domain when the full
                // step leaves it; only give up when damping is exhausted.
                Err(e) => {
                    if halving == opts.line_search_halvings {
                        return Err(e);
                    }
                    continue;
                }
            };
            if opts.line_search_halvings == 0 || norm2(&r_new) < r_norm {
                x = candidate;
                r = r_new;
                accepted = true;
                break;
            }
        }
        best = best.min(norm_inf(&r));
        if !accepted {
            return Err(Error::MaxIterations { iterations: iteration + 1, best_residual: best });
        }
    }
    if norm_inf(&r) <= cfg.abs_tolerance {
        return Ok(NewtonSolution {
            x,
            iterations: cfg.max_iterations,
            residual_norm: norm_inf(&r),
        });
    }
    Err(Error::MaxIterations { iterations: cfg.max_iterations, best_residual: best })
}

fn checked_eval(
    f: &mut impl FnMut(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
) -> Result<Vec<f64>> {
    let r = f(x)?;
    if !all_finite(&r) {
        return Err(Error::NonFiniteEvaluation { at: format!("residual at {x:?}") });
    }
    Ok(r)
}
