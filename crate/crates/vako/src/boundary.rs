//! Two-point boundary-value solver: find a Hamiltonian trajectory whose
//! endpoints lie on given submanifolds with the covector annihilating their
//! tangent spaces (the transversality conditions), by damped-Newton
//! shooting on the initial state, with an optional deterministic
//! multi-start layer for non-unique problems.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{integrate_hamilton, PhasePath};
use crate::geometry::Submanifold;
use crate::hamiltonian::DegenerateHamiltonian;
use crate::numerics::linalg::{dot, norm2, norm_inf};
use crate::numerics::newton::{newton_solve_with, NewtonConfig, NewtonOptions};
use crate::problems::BuiltinProblem;
use crate::variation::action;

/// A shooting problem: trajectory from the start submanifold at `t0` to the
/// end submanifold at `t1`, with the covector annihilating both tangent
/// spaces. The anchor is the initial guess (a point on the start
/// submanifold and an initial covector).
#[derive(Clone)]
pub struct BvpSpec {
    pub dh: Arc<DegenerateHamiltonian>,
    pub start: Submanifold,
    pub end: Submanifold,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub anchor_q: Vec<f64>,
    pub anchor_p: Vec<f64>,
}

impl BvpSpec {
    /// Validates the anchor (on the start submanifold within 1e−8, covector
    /// of chart dimension) and the unknown/equation count.
    pub fn new(
        dh: Arc<DegenerateHamiltonian>,
        start: Submanifold,
        end: Submanifold,
        t0: f64,
        t1: f64,
        steps: usize,
        anchor_q: Vec<f64>,
        anchor_p: Vec<f64>,
    ) -> Result<Self> {
        assert!(t1 > t0, "empty time interval");
        assert!(steps >= 1, "at least one integration step");
        let n = dh.problem().n;
        if anchor_q.len() != n || anchor_p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if anchor_q.len() != n { anchor_q.len() } else { anchor_p.len() },
                context: "shooting anchor".into(),
            });
        }
        let residual = start.residual_norm(&anchor_q);
        if residual > 1e-8 {
            return Err(Error::NotOnSubmanifold { residual });
        }
        // Unknowns: dim P (position within P) + n (initial covector).
        // Equations: dim P (start transversality) + codim Q (membership)
        // + dim Q (end transversality). Equal since dim Q + codim Q = n.
        let unknowns = start.dim(n) + n;
        let equations = start.dim(n) + end.codim(n) + end.dim(n);
        assert_eq!(unknowns, equations, "boundary condition counting");
        Ok(BvpSpec { dh, start, end, t0, t1, steps, anchor_q, anchor_p })
    }

    /// The spec for a built-in catalog entry's default boundary problem.
    pub fn for_builtin(b: &BuiltinProblem) -> Result<Self> {
        BvpSpec::new(
            b.hamiltonian.clone(),
            b.default_bvp.start.clone(),
            b.default_bvp.end.clone(),
            b.default_bvp.t0,
            b.default_bvp.t1,
            b.default_bvp.steps,
            b.default_bvp.anchor.clone(),
            b.default_bvp.p_guess.clone(),
        )
    }
}

/// A converged shooting solution. The residual triple is re-evaluated from
/// the returned path (max-norm per group): start transversality ‖p(a)·T_P‖,
/// end membership ‖g_Q(γ(b))‖, end transversality ‖p(b)·T_Q‖.
#[derive(Clone)]
pub struct BvpSolution {
    pub path: PhasePath,
    pub residuals: (f64, f64, f64),
    pub newton_iterations: usize,
}

struct ResidualLayout {
    start_rows: usize,
    member_rows: usize,
    end_rows: usize,
}

/// Assemble the shooting residual for unknowns x = [s; p0]: the start point
/// is the projection of anchor_q + Σsⱼ Tⱼ onto the start submanifold (Tⱼ a
/// fixed tangent frame at the anchor), and the trajectory is integrated
/// from (q0(s), p0).
fn shooting_residual(
    spec: &BvpSpec,
    t_start: &[Vec<f64>],
    x: &[f64],
) -> Result<(Vec<f64>, PhasePath, ResidualLayout)> {
    let dim_p = t_start.len();
    let (s, p0) = x.split_at(dim_p);
    let mut q0 = spec.anchor_q.clone();
    for (sj, tj) in s.iter().zip(t_start) {
        for (qc, tc) in q0.iter_mut().zip(tj) {
            *qc += sj * tc;
        }
    }
    let q0 = spec.start.project(&q0)?;
    let path = integrate_hamilton(&spec.dh, spec.t0, spec.t1, &q0, p0, spec.steps)?;
    let qb = path.q_end().to_vec();
    let pb = path.p_end().to_vec();
    let mut rows = Vec::new();
    for tj in t_start {
        rows.push(dot(p0, tj));
    }
    let start_rows = rows.len();
    rows.extend(spec.end.residual(&qb));
    let member_rows = rows.len() - start_rows;
    // The end tangent space is evaluated at the current (not yet converged)
    // endpoint, so membership is not enforced here.
    for tj in spec.end.tangent_basis_unchecked(&qb)? {
        rows.push(dot(&pb, &tj));
    }
    let end_rows = rows.len() - start_rows - member_rows;
    Ok((rows, path, ResidualLayout { start_rows, member_rows, end_rows }))
}

fn group_norms(rows: &[f64], layout: &ResidualLayout) -> (f64, f64, f64) {
    let a = norm_inf(&rows[..layout.start_rows]);
    let b = norm_inf(&rows[layout.start_rows..layout.start_rows + layout.member_rows]);
    let c = norm_inf(&rows[layout.start_rows + layout.member_rows..]);
    debug_assert_eq!(
        rows.len(),
        layout.start_rows + layout.member_rows + layout.end_rows
    );
    (a, b, c)
}

fn shoot_from(spec: &BvpSpec, tol: f64, p_start: &[f64]) -> Result<BvpSolution> {
    let t_start = spec.start.tangent_basis(&spec.anchor_q)?;
    let dim_p = t_start.len();
    let mut x0 = vec![0.0; dim_p];
    x0.extend_from_slice(p_start);
    let cfg = NewtonConfig { abs_tolerance: tol, ..NewtonConfig::default() };
    let opts = NewtonOptions { jacobian: None, line_search_halvings: 12 };
    let sol = newton_solve_with(
        |x| shooting_residual(spec, &t_start, x).map(|(rows, _, _)| rows),
        &x0,
        &cfg,
        &opts,
    )?;
    // Re-evaluate the accepted unknowns rather than trusting the solver.
    let (rows, path, layout) = shooting_residual(spec, &t_start, &sol.x)?;
    let residuals = group_norms(&rows, &layout);
    if norm_inf(&rows) > tol {
        return Err(Error::MaxIterations {
            iterations: sol.iterations,
            best_residual: norm_inf(&rows),
        });
    }
    Ok(BvpSolution { path, residuals, newton_iterations: sol.iterations })
}

/// Solve the boundary problem by damped-Newton shooting from the spec's
/// anchor. All three residual groups of the returned solution are ≤ tol
/// (max-norm), re-evaluated on the final path.
pub fn shoot(spec: &BvpSpec, tol: f64) -> Result<BvpSolution> {
    shoot_from(spec, tol, &spec.anchor_p)
}

/// One solution of a multi-start run, ranked by its action.
#[derive(Clone)]
pub struct RankedSolution {
    pub solution: BvpSolution,
    pub action: f64,
}

/// All distinct solutions found by a multi-start run, best (least action)
/// first.
#[derive(Clone)]
pub struct MultiStartReport {
    pub solutions: Vec<RankedSolution>,
    pub attempts: usize,
}

impl MultiStartReport {
    pub fn best(&self) -> &RankedSolution {
        &self.solutions[0]
    }
}

/// Thread budget for parallel sections: `VAKO_THREADS` when set (≥ 1),
/// otherwise the machine's available parallelism.
pub fn thread_budget() -> usize {
    std::env::var("VAKO_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Shoot from `n_starts` deterministic seeded initial covectors (the
/// anchor first, then samples in nested balls of radii 0.5, 1, 2, 4 times
/// (1 + ‖anchor_p‖) around it), deduplicate solutions whose initial data
/// agree within 1e−6, and rank by action, ties broken lexicographically by
/// initial covector. Starts run concurrently up to [`thread_budget`];
/// aggregation is index-ordered, so results are deterministic regardless
/// of scheduling.
pub fn multi_start_shoot(
    spec: &BvpSpec,
    tol: f64,
    n_starts: usize,
    seed: u64,
) -> Result<MultiStartReport> {
    const DEDUP_TOLERANCE: f64 = 1e-6;
    assert!(n_starts >= 1, "at least one start");
    let n = spec.dh.problem().n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radii = [0.5, 1.0, 2.0, 4.0];
    let ball_scale = 1.0 + norm2(&spec.anchor_p);
    let mut starts = vec![spec.anchor_p.clone()];
    for i in 1..n_starts {
        let radius = radii[(i - 1) % radii.len()] * ball_scale;
        let mut dir: Vec<f64>;
        loop {
            dir = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = norm2(&dir);
            if len > 1e-3 {
                let r = radius * rng.random_range(0.0f64..1.0).powf(1.0 / n as f64);
                dir = dir.iter().map(|d| d / len * r).collect();
                break;
            }
        }
        starts.push(spec.anchor_p.iter().zip(&dir).map(|(a, d)| a + d).collect());
    }

    let results: Vec<Mutex<Option<Result<BvpSolution>>>> =
        (0..n_starts).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread_budget().min(n_starts);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_starts {
                    break;
                }
                let outcome = shoot_from(spec, tol, &starts[i]);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut best_failure = f64::INFINITY;
    let mut accepted: Vec<BvpSolution> = Vec::new();
    for cell in results {
        let outcome = cell.into_inner().unwrap().expect("worker filled every slot");
        match outcome {
            Ok(sol) => {
                let duplicate = accepted.iter().any(|kept| {
                    let dq = kept
                        .path
                        .q[0]
                        .iter()
                        .zip(&sol.path.q[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    let dp = kept
                        .path
                        .p[0]
                        .iter()
                        .zip(&sol.path.p[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    dq.max(dp) < DEDUP_TOLERANCE
                });
                if !duplicate {
                    accepted.push(sol);
                }
            }
            Err(e) => {
                if let Error::MaxIterations { best_residual, .. } = &e {
                    best_failure = best_failure.min(*best_residual);
                }
            }
        }
    }
    if accepted.is_empty() {
        return Err(Error::NoSolutionFound { best_residual: best_failure });
    }
    let mut ranked = Vec::with_capacity(accepted.len());
    for sol in accepted {
        let a = action(spec.dh.lagrangian(), &sol.path.q_curve())?;
        ranked.push(RankedSolution { solution: sol, action: a });
    }
    ranked.sort_by(|a, b| {
        a.action
            .total_cmp(&b.action)
            .then_with(|| {
                let pa = &a.solution.path.p[0];
                let pb = &b.solution.path.p[0];
                pa.iter()
                    .zip(pb)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    Ok(MultiStartReport { solutions: ranked, attempts: n_starts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::problems::builtin;

    fn point(q: &[f64]) -> Submanifold {
        Submanifold::Point(q.to_vec())
    }

    #[test]
    fn flat_point_to_point_recovers_free_particle() {
        let b = builtin("flat-3").unwrap();
        let spec = BvpSpec::new(
            b.hamiltonian.clone(),
            point(&[0.0; 3]),
            point(&[1.0, 2.0, 3.0]),
            0.0,
            1.0,
            200,
            vec![0.0; 3],
            vec![0.5, 1.5, 2.5],
        )
        .unwrap();
        let sol = shoot(&spec, 1e-10).unwrap();
        for (i, expect) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert_abs_diff_eq!(sol.path.p[0][i], expect, epsilon = 1e-9);
        }
        assert!(sol.residuals.0 <= 1e-10);
        assert!(sol.residuals.1 <= 1e-10);
        assert!(sol.residuals.2 <= 1e-10);
    }

    #[test]
    fn heisenberg_converges_from_nearby_anchors() {
        let b = builtin("heisenberg").unwrap();
        for anchor_p in [[0.9, 0.2, 0.2], [1.2, -0.15, 0.1], [0.75, 0.0, -0.2]] {
            let spec = BvpSpec::new(
                b.hamiltonian.clone(),
                point(&[0.0; 3]),
                point(&[1.0, 0.0, 0.0]),
                0.0,
                1.0,
                400,
                vec![0.0; 3],
                anchor_p.to_vec(),
            )
            .unwrap();
            let sol = shoot(&spec, 1e-10).unwrap();
            for (i, expect) in [1.0, 0.0, 0.0].iter().enumerate() {
                assert_abs_diff_eq!(sol.path.p[0][i], expect, epsilon = 1e-7);
            }
            let a = action(b.hamiltonian.lagrangian(), &sol.path.q_curve()).unwrap();
            assert_abs_diff_eq!(a, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn plane_start_forces_orthogonal_launch() {
        // Start anywhere on {q₃=0}, end at (0,0,1): transversality forces
        // p0 ⟂ plane, so the solution is the vertical segment.
        let b = builtin("flat-3").unwrap();
        let spec = BvpSpec::new(
            b.hamiltonian.clone(),
            Submanifold::level_set(1, |q| vec![q[2]]),
            point(&[0.0, 0.0, 1.0]),
            0.0,
            1.0,
            200,
            vec![0.3, -0.2, 0.0],
            vec![0.1, 0.1, 0.9],
        )
        .unwrap();
        let sol = shoot(&spec, 1e-10).unwrap();
        let q0 = &sol.path.q[0];
        let p0 = &sol.path.p[0];
        assert_abs_diff_eq!(q0[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(q0[1], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p0[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(p0[1], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(p0[2], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rejects_anchor_off_the_start_submanifold() {
        let b = builtin("flat-3").unwrap();
        let err = match BvpSpec::new(
            b.hamiltonian.clone(),
            Submanifold::level_set(1, |q| vec![q[2]]),
            point(&[0.0, 0.0, 1.0]),
            0.0,
            1.0,
            100,
            vec![0.0, 0.0, 0.1],
            vec![0.0; 3],
        ) {
            Err(e) => e,
            Ok(_) => panic!("anchor off the plane accepted"),
        };
        assert!(matches!(err, Error::NotOnSubmanifold { .. }));
    }

    #[test]
    fn multi_start_on_flat_dedups_to_one_solution() {
        let b = builtin("flat-3").unwrap();
        let spec = BvpSpec::new(
            b.hamiltonian.clone(),
            point(&[0.0; 3]),
            point(&[1.0, 1.0, 1.0]),
            0.0,
            1.0,
            100,
            vec![0.0; 3],
            vec![0.4, 0.4, 0.4],
        )
        .unwrap();
        let report = multi_start_shoot(&spec, 1e-10, 8, 7).unwrap();
        assert_eq!(report.solutions.len(), 1);
        assert_abs_diff_eq!(report.best().action, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn single_start_matches_plain_shoot() {
        let b = builtin("heisenberg").unwrap();
        let spec = BvpSpec::for_builtin(&b).unwrap();
        let plain = shoot(&spec, 1e-10).unwrap();
        let multi = multi_start_shoot(&spec, 1e-10, 1, 3).unwrap();
        assert_eq!(multi.attempts, 1);
        for (a, b) in multi.best().solution.path.p[0].iter().zip(&plain.path.p[0]) {
            assert_eq!(a, b, "identical start must give the identical solution");
        }
    }

    #[test]
    fn heisenberg_vertical_target_has_equal_action_families() {
        let b = builtin("heisenberg").unwrap();
        let spec = BvpSpec::new(
            b.hamiltonian.clone(),
            point(&[0.0; 3]),
            point(&[0.0, 0.0, 0.5]),
            0.0,
            1.0,
            400,
            vec![0.0; 3],
            vec![1.5, 0.0, 5.0],
        )
        .unwrap();
        let report = multi_start_shoot(&spec, 1e-9, 16, 11).unwrap();
        assert!(
            report.solutions.len() >= 2,
            "found {} distinct solutions",
            report.solutions.len()
        );
        let a0 = report.solutions[0].action;
        let a1 = report.solutions[1].action;
        assert_abs_diff_eq!(a0, a1, epsilon = 1e-8);
        assert_abs_diff_eq!(a0, std::f64::consts::PI, epsilon = 1e-4);
        let p_first = &report.solutions[0].solution.path.p[0];
        let p_second = &report.solutions[1].solution.path.p[0];
        let gap = p_first
            .iter()
            .zip(p_second)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap >= 1e-6, "dedup should keep distinct covectors, gap {gap:.3e}");
        for ranked in &report.solutions {
            let qb = ranked.solution.path.q_end();
            assert_abs_diff_eq!(qb[0], 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(qb[1], 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(qb[2], 0.5, epsilon = 1e-8);
        }
    }
}
