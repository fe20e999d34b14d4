//! Problem-file schema: JSON documents naming a built-in problem or
//! spelling out an inline polynomial one, plus an optional boundary-value
//! block. Everything is schema-validated before any numerics run.

use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{
    ChartProblem, DistributionFrame, MatrixField, Submanifold, VectorField,
};
use crate::hamiltonian::{ConstrainedLagrangian, DegenerateHamiltonian};
use crate::numerics::linalg::Mat;
use crate::numerics::newton::NewtonConfig;
use crate::problems::builtin;

use super::poly::Polynomial;

/// Top-level problem file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub bvp: Option<BvpBlock>,
}

/// Either a catalog name or an inline polynomial problem.
#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ProblemSpec {
    Builtin(String),
    Inline(InlineProblem),
}

/// One monomial: c · Π qᵥ^{powers[v]}.
#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub c: f64,
    pub powers: Vec<u32>,
}

/// Inline problem: polynomial frame fields in q (time-independent) and a
/// polynomial Lagrangian in (q, u).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub n: usize,
    pub k: usize,
    /// k frame fields, each n component polynomials in q.
    pub x: Vec<Vec<Vec<PolyTerm>>>,
    /// n−k annihilator one-forms, each n component polynomials in q.
    #[serde(default)]
    pub theta: Vec<Vec<Vec<PolyTerm>>>,
    /// n−k complement fields, each n component polynomials in q.
    #[serde(default)]
    pub xprime: Vec<Vec<Vec<PolyTerm>>>,
    /// Lagrangian as a polynomial in (q₁..q_n, u₁..u_k).
    pub lagrangian: Vec<PolyTerm>,
}

/// Boundary submanifold: a point, a polynomial level set, or the whole
/// chart.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointSpec {
    Point(Vec<f64>),
    /// One polynomial constraint in q per codimension.
    LevelSet(Vec<Vec<PolyTerm>>),
    Whole,
}

/// Boundary-value block: endpoints, time span, resolution, tolerance, and
/// the shooting anchor.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpBlock {
    pub start: EndpointSpec,
    pub end: EndpointSpec,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_t1")]
    pub t1: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    #[serde(default)]
    pub p_guess: Option<Vec<f64>>,
}

fn default_t0() -> f64 {
    0.0
}
fn default_t1() -> f64 {
    1.0
}
fn default_steps() -> usize {
    400
}
fn default_tolerance() -> f64 {
    1e-10
}

/// A fully resolved boundary problem.
#[derive(Clone)]
pub struct ResolvedBvp {
    pub start: Submanifold,
    pub end: Submanifold,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub tolerance: f64,
    pub anchor: Vec<f64>,
    pub p_guess: Vec<f64>,
}

/// A problem ready for the commands: chart, Lagrangian, Hamiltonian, and
/// the resolved boundary block when one is available.
pub struct LoadedProblem {
    pub name: String,
    pub problem: Arc<ChartProblem>,
    pub lagrangian: Arc<ConstrainedLagrangian>,
    pub hamiltonian: Arc<DegenerateHamiltonian>,
    pub bvp: Option<ResolvedBvp>,
    pub autonomous: bool,
}

impl LoadedProblem {
    /// The boundary block, or a schema error for commands that need one.
    pub fn require_bvp(&self) -> Result<&ResolvedBvp> {
        self.bvp.as_ref().ok_or_else(|| Error::Schema {
            detail: "this command needs a bvp block in the problem file".into(),
        })
    }
}

fn schema_err(detail: impl Into<String>) -> Error {
    Error::Schema { detail: detail.into() }
}

/// Parse and resolve a problem file.
pub fn load_problem(path: &std::path::Path) -> Result<LoadedProblem> {
    let text = std::fs::read_to_string(path)?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| schema_err(format!("{}: {e}", path.display())))?;
    let (name, problem, lagrangian, hamiltonian, default_bvp, autonomous) =
        match &file.problem {
            ProblemSpec::Builtin(name) => {
                let b = builtin(name)?;
                (
                    b.name.to_string(),
                    b.problem,
                    b.lagrangian,
                    b.hamiltonian,
                    Some(b.default_bvp),
                    b.autonomous,
                )
            }
            ProblemSpec::Inline(inline) => {
                let (problem, lagrangian, hamiltonian) = assemble_inline(inline)?;
                ("inline".to_string(), problem, lagrangian, hamiltonian, None, true)
            }
        };
    let n = problem.n;
    let bvp = match file.bvp {
        Some(block) => Some(resolve_bvp(block, n, default_bvp.as_ref())?),
        None => default_bvp.map(|d| ResolvedBvp {
            start: d.start,
            end: d.end,
            t0: d.t0,
            t1: d.t1,
            steps: d.steps,
            tolerance: default_tolerance(),
            anchor: d.anchor,
            p_guess: d.p_guess,
        }),
    };
    Ok(LoadedProblem { name, problem, lagrangian, hamiltonian, bvp, autonomous })
}

fn convert_poly(terms: &[PolyTerm], vars: usize) -> Result<Polynomial> {
    Polynomial::new(vars, terms.iter().map(|t| (t.c, t.powers.clone())).collect())
}

/// Vector field from per-component polynomials in q (time-independent).
fn poly_vector_field(components: &[Vec<PolyTerm>], n: usize) -> Result<VectorField> {
    if components.len() != n {
        return Err(schema_err(format!(
            "vector field has {} components, expected {n}",
            components.len()
        )));
    }
    let polys: Vec<Polynomial> =
        components.iter().map(|c| convert_poly(c, n)).collect::<Result<_>>()?;
    Ok(Arc::new(move |_t, q| polys.iter().map(|p| p.eval(q)).collect()))
}

/// Analytic spatial derivative of a polynomial vector field: entry (r, c)
/// is ∂(component r)/∂q_c.
fn poly_matrix_field(components: &[Vec<PolyTerm>], n: usize) -> Result<MatrixField> {
    let partials: Vec<Vec<Polynomial>> = components
        .iter()
        .map(|c| {
            let p = convert_poly(c, n)?;
            Ok((0..n).map(|v| p.partial(v)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(Arc::new(move |_t, q| {
        Mat::from_fn(partials.len(), q.len(), |r, c| partials[r][c].eval(q))
    }))
}

fn assemble_inline(
    inline: &InlineProblem,
) -> Result<(Arc<ChartProblem>, Arc<ConstrainedLagrangian>, Arc<DegenerateHamiltonian>)> {
    let (n, k) = (inline.n, inline.k);
    if n == 0 || k == 0 || k > n {
        return Err(schema_err(format!("invalid dimensions n={n}, k={k}")));
    }
    if inline.x.len() != k {
        return Err(schema_err(format!("{} frame fields, expected {k}", inline.x.len())));
    }
    if inline.theta.len() != n - k || inline.xprime.len() != n - k {
        return Err(schema_err(format!(
            "{} annihilator rows and {} complement fields, expected {}",
            inline.theta.len(),
            inline.xprime.len(),
            n - k
        )));
    }
    let frame = DistributionFrame {
        x: inline.x.iter().map(|f| poly_vector_field(f, n)).collect::<Result<_>>()?,
        theta: inline
            .theta
            .iter()
            .map(|f| poly_vector_field(f, n))
            .collect::<Result<_>>()?,
        xprime: inline
            .xprime
            .iter()
            .map(|f| poly_vector_field(f, n))
            .collect::<Result<_>>()?,
        dx_dq: Some(
            inline.x.iter().map(|f| poly_matrix_field(f, n)).collect::<Result<_>>()?,
        ),
        dtheta_dq: Some(
            inline
                .theta
                .iter()
                .map(|f| poly_matrix_field(f, n))
                .collect::<Result<_>>()?,
        ),
        dxprime_dq: Some(
            inline
                .xprime
                .iter()
                .map(|f| poly_matrix_field(f, n))
                .collect::<Result<_>>()?,
        ),
    };
    let problem = Arc::new(ChartProblem::new(n, k, frame));
    // The annihilator must actually annihilate the frame; probe a few
    // deterministic points before any numerics trust the file.
    for probe in [0usize, 1, 2] {
        let q: Vec<f64> = (0..n).map(|j| 0.3 * (probe as f64) - 0.1 * j as f64).collect();
        for i in 0..k {
            let r = crate::numerics::linalg::norm_inf(
                &problem.theta_apply(0.0, &q, &problem.x(i, 0.0, &q)),
            );
            if r > 1e-8 {
                return Err(schema_err(format!(
                    "annihilator row does not annihilate frame field {i} (residual {r:.3e})"
                )));
            }
        }
        problem.eval_split(0.0, &q).map_err(|e| {
            schema_err(format!("frame is not a basis at a probe point: {e}"))
        })?;
    }
    let l_poly = convert_poly(&inline.lagrangian, n + k)?;
    let dl_dq: Vec<Polynomial> = (0..n).map(|v| l_poly.partial(v)).collect();
    let dl_du: Vec<Polynomial> = (0..k).map(|v| l_poly.partial(n + v)).collect();
    let d2l: Vec<Vec<Polynomial>> = dl_du
        .iter()
        .map(|row| (0..k).map(|v| row.partial(n + v)).collect())
        .collect();
    let cat = |q: &[f64], u: &[f64]| {
        let mut x = q.to_vec();
        x.extend_from_slice(u);
        x
    };
    let lp = l_poly.clone();
    let (gq, gu, hess) = (dl_dq.clone(), dl_du.clone(), d2l.clone());
    let lagrangian = Arc::new(
        ConstrainedLagrangian::new(problem.clone(), move |_t, q, u| lp.eval(&cat(q, u)))
            .with_grad_q(move |_t, q, u| {
                let x = cat(q, u);
                gq.iter().map(|p| p.eval(&x)).collect()
            })
            .with_grad_u(move |_t, q, u| {
                let x = cat(q, u);
                gu.iter().map(|p| p.eval(&x)).collect()
            })
            .with_hessian_u(move |_t, q, u| {
                let x = cat(q, u);
                Mat::from_fn(hess.len(), hess.len(), |r, c| hess[r][c].eval(&x))
            }),
    );
    let hamiltonian =
        Arc::new(DegenerateHamiltonian::new(lagrangian.clone(), NewtonConfig::default()));
    Ok((problem, lagrangian, hamiltonian))
}

fn endpoint_to_submanifold(spec: &EndpointSpec, n: usize) -> Result<Submanifold> {
    match spec {
        EndpointSpec::Point(q) => {
            if q.len() != n {
                return Err(schema_err(format!(
                    "endpoint point has dimension {}, expected {n}",
                    q.len()
                )));
            }
            Ok(Submanifold::Point(q.clone()))
        }
        EndpointSpec::LevelSet(constraints) => {
            if constraints.is_empty() || constraints.len() >= n {
                return Err(schema_err(format!(
                    "level set with {} constraints in dimension {n}",
                    constraints.len()
                )));
            }
            let polys: Vec<Polynomial> =
                constraints.iter().map(|c| convert_poly(c, n)).collect::<Result<_>>()?;
            let partials: Vec<Vec<Polynomial>> = polys
                .iter()
                .map(|p| (0..n).map(|v| p.partial(v)).collect())
                .collect();
            let codim = polys.len();
            let g_polys = polys.clone();
            Ok(Submanifold::LevelSet {
                g: Arc::new(move |q| g_polys.iter().map(|p| p.eval(q)).collect()),
                jacobian: Some(Arc::new(move |q| {
                    Mat::from_fn(partials.len(), q.len(), |r, c| partials[r][c].eval(q))
                })),
                codim,
            })
        }
        EndpointSpec::Whole => Ok(Submanifold::Whole),
    }
}

fn resolve_bvp(
    block: BvpBlock,
    n: usize,
    builtin_default: Option<&crate::problems::DefaultBvp>,
) -> Result<ResolvedBvp> {
    if block.t1 <= block.t0 {
        return Err(schema_err(format!("empty time span [{}, {}]", block.t0, block.t1)));
    }
    if block.steps == 0 {
        return Err(schema_err("steps must be at least 1".to_string()));
    }
    if !(block.tolerance > 0.0) {
        return Err(schema_err("tolerance must be positive".to_string()));
    }
    let start = endpoint_to_submanifold(&block.start, n)?;
    let end = endpoint_to_submanifold(&block.end, n)?;
    let anchor = match (&block.anchor, &block.start) {
        (Some(a), _) => {
            if a.len() != n {
                return Err(schema_err(format!(
                    "anchor has dimension {}, expected {n}",
                    a.len()
                )));
            }
            a.clone()
        }
        (None, EndpointSpec::Point(q)) => q.clone(),
        (None, _) => {
            return Err(schema_err(
                "an anchor point is required when the start is not a point".to_string(),
            ))
        }
    };
    let p_guess = match (&block.p_guess, builtin_default) {
        (Some(p), _) => {
            if p.len() != n {
                return Err(schema_err(format!(
                    "p_guess has dimension {}, expected {n}",
                    p.len()
                )));
            }
            p.clone()
        }
        (None, Some(d)) => d.p_guess.clone(),
        (None, None) => {
            return Err(schema_err(
                "p_guess is required for inline problems".to_string(),
            ))
        }
    };
    Ok(ResolvedBvp {
        start,
        end,
        t0: block.t0,
        t1: block.t1,
        steps: block.steps,
        tolerance: block.tolerance,
        anchor,
        p_guess,
    })
}
