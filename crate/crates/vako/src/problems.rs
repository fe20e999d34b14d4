//! Built-in problem catalog: flat full-rank charts, the Heisenberg frame
//! (with and without a potential), the Martinet frame, and a time-driven
//! flat problem. Each entry bundles the chart, a Lagrangian with analytic
//! derivatives, the ready-made Hamiltonian, and a default boundary problem
//! whose solution is known in closed form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{
    ChartProblem, CovectorField, DistributionFrame, MatrixField, Submanifold, VectorField,
};
use crate::hamiltonian::{
    make_subriemannian, ConstrainedLagrangian, DegenerateHamiltonian, ScalarField,
    SubRiemannianData,
};
use crate::numerics::linalg::{dot, Mat};
use crate::numerics::newton::NewtonConfig;

/// Default endpoint data for a problem: start/end submanifolds, time span,
/// a shooting anchor on the start manifold, and an initial covector guess.
#[derive(Clone)]
pub struct DefaultBvp {
    pub start: Submanifold,
    pub end: Submanifold,
    pub t0: f64,
    pub t1: f64,
    /// A point on the start manifold from which shooting is anchored.
    pub anchor: Vec<f64>,
    /// Initial covector guess for the shooting unknowns.
    pub p_guess: Vec<f64>,
    /// Default number of integration steps.
    pub steps: usize,
}

/// A fully-assembled built-in problem.
#[derive(Clone)]
pub struct BuiltinProblem {
    pub name: &'static str,
    pub summary: &'static str,
    pub problem: Arc<ChartProblem>,
    pub lagrangian: Arc<ConstrainedLagrangian>,
    pub hamiltonian: Arc<DegenerateHamiltonian>,
    pub default_bvp: DefaultBvp,
    /// Whether the frame and Lagrangian are time-independent (so H is
    /// conserved along its own flow).
    pub autonomous: bool,
}

/// Names accepted by [`builtin`], in catalog order.
pub fn builtin_names() -> &'static [&'static str] {
    &[
        "flat-1",
        "flat-2",
        "flat-3",
        "heisenberg",
        "heisenberg-potential",
        "martinet",
        "driven-flat",
    ]
}

/// Look up a built-in problem by name. Construction re-runs the catalog
/// self-checks (annihilation, frame regularity, derivative spot checks).
pub fn builtin(name: &str) -> Result<BuiltinProblem> {
    let entry = match name {
        "flat-1" => flat(1),
        "flat-2" => flat(2),
        "flat-3" => flat(3),
        "heisenberg" => heisenberg(false),
        "heisenberg-potential" => heisenberg(true),
        "martinet" => martinet(),
        "driven-flat" => driven_flat(),
        _ => {
            return Err(Error::UnknownProblem { name: name.to_string() });
        }
    }?;
    validate_catalog_entry(&entry)?;
    Ok(entry)
}

fn coordinate_field(n: usize, i: usize) -> VectorField {
    Arc::new(move |_, _| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    })
}

fn coordinate_form(n: usize, i: usize) -> CovectorField {
    Arc::new(move |_, _| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    })
}

fn zero_matrix_field(n: usize) -> MatrixField {
    Arc::new(move |_, _| Mat::zeros(n, n))
}

/// Kinetic-minus-potential Lagrangian L = ½|u|² − V(t, q) with analytic
/// derivatives.
fn kinetic_lagrangian(
    problem: Arc<ChartProblem>,
    potential: ScalarField,
    dpotential: CovectorField,
) -> ConstrainedLagrangian {
    ConstrainedLagrangian::new(problem, move |t, q, u| 0.5 * dot(u, u) - potential(t, q))
        .with_grad_q(move |t, q, _| dpotential(t, q).iter().map(|g| -g).collect())
        .with_grad_u(|_, _, u| u.to_vec())
        .with_hessian_u(|_, _, u| Mat::identity(u.len()))
}

fn zero_potential() -> (ScalarField, CovectorField) {
    (
        Arc::new(|_, _| 0.0),
        Arc::new(|_, q: &[f64]| vec![0.0; q.len()]),
    )
}

fn assemble_subriemannian(
    problem: Arc<ChartProblem>,
    potential: ScalarField,
    dpotential: CovectorField,
) -> Result<(Arc<ConstrainedLagrangian>, Arc<DegenerateHamiltonian>)> {
    let k = problem.k;
    let lagrangian = Arc::new(kinetic_lagrangian(
        problem.clone(),
        potential.clone(),
        dpotential,
    ));
    let data = SubRiemannianData {
        metric: Arc::new(move |_, _| Mat::identity(k)),
        potential,
    };
    let origin = vec![0.0; problem.n];
    let hamiltonian = Arc::new(make_subriemannian(
        lagrangian.clone(),
        data,
        NewtonConfig::default(),
        (0.0, &origin),
    )?);
    Ok((lagrangian, hamiltonian))
}

/// Full- or partial-rank coordinate frame on ℝ³ with L = ½|u|².
fn flat(k: usize) -> Result<BuiltinProblem> {
    let n = 3;
    let frame = DistributionFrame {
        x: (0..k).map(|i| coordinate_field(n, i)).collect(),
        theta: (k..n).map(|i| coordinate_form(n, i)).collect(),
        xprime: (k..n).map(|i| coordinate_field(n, i)).collect(),
        dx_dq: Some((0..k).map(|_| zero_matrix_field(n)).collect()),
        dtheta_dq: Some((k..n).map(|_| zero_matrix_field(n)).collect()),
        dxprime_dq: Some((k..n).map(|_| zero_matrix_field(n)).collect()),
    };
    let problem = Arc::new(ChartProblem::new(n, k, frame));
    let (potential, dpotential) = zero_potential();
    let (lagrangian, hamiltonian) =
        assemble_subriemannian(problem.clone(), potential, dpotential)?;
    let (name, summary, end, p_guess): (&'static str, &'static str, Vec<f64>, Vec<f64>) = match k {
        1 => (
            "flat-1",
            "rank-1 coordinate distribution on R^3, L = |u|^2/2",
            vec![1.0, 0.0, 0.0],
            vec![0.8, 0.1, -0.1],
        ),
        2 => (
            "flat-2",
            "rank-2 coordinate distribution on R^3, L = |u|^2/2",
            vec![1.0, 1.0, 0.0],
            vec![0.9, 1.1, 0.05],
        ),
        _ => (
            "flat-3",
            "full-rank chart on R^3, L = |u|^2/2 (classical free motion)",
            vec![1.0, 1.0, 1.0],
            vec![0.9, 1.1, 0.8],
        ),
    };
    Ok(BuiltinProblem {
        name,
        summary,
        problem,
        lagrangian,
        hamiltonian,
        default_bvp: DefaultBvp {
            start: Submanifold::Point(vec![0.0; n]),
            end: Submanifold::Point(end),
            t0: 0.0,
            t1: 1.0,
            anchor: vec![0.0; n],
            p_guess,
            steps: 400,
        },
        autonomous: true,
    })
}

/// Heisenberg frame X₁ = ∂x − (y/2)∂z, X₂ = ∂y + (x/2)∂z with annihilator
/// θ = (y/2)dx − (x/2)dy + dz, optionally with the potential V = z²/2.
fn heisenberg(with_potential: bool) -> Result<BuiltinProblem> {
    let n = 3;
    let x1: VectorField = Arc::new(|_, q: &[f64]| vec![1.0, 0.0, -0.5 * q[1]]);
    let x2: VectorField = Arc::new(|_, q: &[f64]| vec![0.0, 1.0, 0.5 * q[0]]);
    let theta: CovectorField = Arc::new(|_, q: &[f64]| vec![0.5 * q[1], -0.5 * q[0], 1.0]);
    let dx1: MatrixField = Arc::new(|_, _| {
        let mut m = Mat::zeros(3, 3);
        m[(2, 1)] = -0.5;
        m
    });
    let dx2: MatrixField = Arc::new(|_, _| {
        let mut m = Mat::zeros(3, 3);
        m[(2, 0)] = 0.5;
        m
    });
    let dtheta: MatrixField = Arc::new(|_, _| {
        let mut m = Mat::zeros(3, 3);
        m[(0, 1)] = 0.5;
        m[(1, 0)] = -0.5;
        m
    });
    let frame = DistributionFrame {
        x: vec![x1, x2],
        theta: vec![theta],
        xprime: vec![coordinate_field(n, 2)],
        dx_dq: Some(vec![dx1, dx2]),
        dtheta_dq: Some(vec![dtheta]),
        dxprime_dq: Some(vec![zero_matrix_field(n)]),
    };
    let problem = Arc::new(ChartProblem::new(n, 2, frame));
    let (potential, dpotential): (ScalarField, CovectorField) = if with_potential {
        (
            Arc::new(|_, q: &[f64]| 0.5 * q[2] * q[2]),
            Arc::new(|_, q: &[f64]| vec![0.0, 0.0, q[2]]),
        )
    } else {
        zero_potential()
    };
    let (lagrangian, hamiltonian) =
        assemble_subriemannian(problem.clone(), potential, dpotential)?;
    let (name, summary): (&'static str, &'static str) = if with_potential {
        (
            "heisenberg-potential",
            "Heisenberg frame with potential V = z^2/2 added to L = |u|^2/2",
        )
    } else {
        ("heisenberg", "Heisenberg frame on R^3, L = |u|^2/2 (contact case)")
    };
    Ok(BuiltinProblem {
        name,
        summary,
        problem,
        lagrangian,
        hamiltonian,
        default_bvp: DefaultBvp {
            start: Submanifold::Point(vec![0.0; n]),
            end: Submanifold::Point(vec![1.0, 0.0, 0.0]),
            t0: 0.0,
            t1: 1.0,
            anchor: vec![0.0; n],
            p_guess: vec![0.9, 0.1, 0.2],
            steps: 400,
        },
        autonomous: true,
    })
}

/// Martinet frame X₁ = ∂x + (y²/2)∂z, X₂ = ∂y with annihilator
/// θ = −(y²/2)dx + dz: the line y = 0 carries an abnormal direction.
fn martinet() -> Result<BuiltinProblem> {
    let n = 3;
    let x1: VectorField = Arc::new(|_, q: &[f64]| vec![1.0, 0.0, 0.5 * q[1] * q[1]]);
    let theta: CovectorField = Arc::new(|_, q: &[f64]| vec![-0.5 * q[1] * q[1], 0.0, 1.0]);
    let dx1: MatrixField = Arc::new(|_, q: &[f64]| {
        let mut m = Mat::zeros(3, 3);
        m[(2, 1)] = q[1];
        m
    });
    let dtheta: MatrixField = Arc::new(|_, q: &[f64]| {
        let mut m = Mat::zeros(3, 3);
        m[(0, 1)] = -q[1];
        m
    });
    let frame = DistributionFrame {
        x: vec![x1, coordinate_field(n, 1)],
        theta: vec![theta],
        xprime: vec![coordinate_field(n, 2)],
        dx_dq: Some(vec![dx1, zero_matrix_field(n)]),
        dtheta_dq: Some(vec![dtheta]),
        dxprime_dq: Some(vec![zero_matrix_field(n)]),
    };
    let problem = Arc::new(ChartProblem::new(n, 2, frame));
    let (potential, dpotential) = zero_potential();
    let (lagrangian, hamiltonian) =
        assemble_subriemannian(problem.clone(), potential, dpotential)?;
    Ok(BuiltinProblem {
        name: "martinet",
        summary: "Martinet frame on R^3, L = |u|^2/2 (abnormal line at y = 0)",
        problem,
        lagrangian,
        hamiltonian,
        default_bvp: DefaultBvp {
            start: Submanifold::Point(vec![0.0; n]),
            end: Submanifold::Point(vec![1.0, 1.0, 1.0 / 6.0]),
            t0: 0.0,
            t1: 1.0,
            anchor: vec![0.0; n],
            p_guess: vec![0.9, 1.1, 0.1],
            steps: 400,
        },
        autonomous: true,
    })
}

/// Full-rank chart with the time-dependent Lagrangian
/// L = ½|u|² − sin(t)·q₁ and a level-set end manifold, so the default
/// problem exercises transversality rather than point targeting.
fn driven_flat() -> Result<BuiltinProblem> {
    let n = 3;
    let k = 3;
    let frame = DistributionFrame {
        x: (0..k).map(|i| coordinate_field(n, i)).collect(),
        theta: Vec::new(),
        xprime: Vec::new(),
        dx_dq: Some((0..k).map(|_| zero_matrix_field(n)).collect()),
        dtheta_dq: Some(Vec::new()),
        dxprime_dq: Some(Vec::new()),
    };
    let problem = Arc::new(ChartProblem::new(n, k, frame));
    let potential: ScalarField = Arc::new(|t, q: &[f64]| t.sin() * q[0]);
    let dpotential: CovectorField = Arc::new(|t, _| vec![t.sin(), 0.0, 0.0]);
    let (lagrangian, hamiltonian) =
        assemble_subriemannian(problem.clone(), potential, dpotential)?;
    let end = Submanifold::LevelSet {
        g: Arc::new(|q: &[f64]| vec![q[0] - 0.7, q[1] - 0.3]),
        jacobian: Some(Arc::new(|_q: &[f64]| {
            Mat::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])
        })),
        codim: 2,
    };
    Ok(BuiltinProblem {
        name: "driven-flat",
        summary: "full-rank chart with L = |u|^2/2 - sin(t) q_1, level-set target",
        problem,
        lagrangian,
        hamiltonian,
        default_bvp: DefaultBvp {
            start: Submanifold::Point(vec![0.0; n]),
            end,
            t0: 0.0,
            t1: 1.0,
            anchor: vec![0.0; n],
            p_guess: vec![0.8, 0.25, 0.1],
            steps: 400,
        },
        autonomous: false,
    })
}

/// Catalog self-checks: annihilation θᵃ(Xᵢ) = 0, frame regularity, the
/// anchor lying on the start manifold, and analytic derivative callbacks
/// agreeing with finite differences.
fn validate_catalog_entry(entry: &BuiltinProblem) -> Result<()> {
    let problem = &entry.problem;
    let sample_points: [(f64, Vec<f64>); 3] = [
        (entry.default_bvp.t0, vec![0.0; problem.n]),
        (0.37, vec![0.4, -0.7, 0.9]),
        (0.81, vec![-1.2, 0.5, -0.3]),
    ];
    for (t, q) in &sample_points {
        for a in 0..problem.n - problem.k {
            let theta = problem.theta_row(a, *t, q);
            for i in 0..problem.k {
                let pairing = dot(&theta, &problem.x(i, *t, q)).abs();
                if pairing > 1e-10 {
                    return Err(Error::Schema {
                        detail: format!(
                            "catalog entry {}: theta^{a}(X_{i}) = {pairing:.3e} at q={q:?}",
                            entry.name
                        ),
                    });
                }
            }
        }
        problem.eval_split(*t, q)?;
        for i in 0..problem.k {
            let analytic = problem.dx_dq(i, *t, q)?;
            let field = entry.problem.frame.x[i].clone();
            let tt = *t;
            let numeric =
                crate::numerics::fd::fd_jacobian(move |y| Ok(field(tt, y)), q, None)?;
            if analytic.add_scaled(-1.0, &numeric).max_abs() > 1e-6 {
                return Err(Error::Schema {
                    detail: format!(
                        "catalog entry {}: dX_{i}/dq disagrees with finite differences",
                        entry.name
                    ),
                });
            }
        }
    }
    entry.lagrangian.spot_check_derivatives(0.25, &sample_points[1].1, 0xB00C)?;
    let anchor_residual = entry.default_bvp.start.residual_norm(&entry.default_bvp.anchor);
    if anchor_residual > 1e-8 {
        return Err(Error::Schema {
            detail: format!(
                "catalog entry {}: anchor off the start manifold by {anchor_residual:.3e}",
                entry.name
            ),
        });
    }
    Ok(())
}
