//! Command-line front end: JSON problem files in, machine-readable JSON
//! reports and CSV trajectories out. One command per process; exit codes
//! are 0 (ok), 2 (schema error), 3 (numerical failure), 4 (no solution).

pub mod output;
pub mod poly;
pub mod schema;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::{multi_start_shoot, BvpSpec};
use crate::error::{Error, Result};
use crate::extremals::{
    abnormal_test, endpoint_map_oracle, max_principal_angle, AbnormalVerdict,
};
use crate::flow::{flow_report, integrate_hamilton};
use crate::geometry::{ChartProblem, DiscreteCurve, Submanifold};
use crate::legendre::{envelope_check, involution_check, mutual_inversion_check};
use crate::numerics::linalg::Mat;
use crate::variation::{
    default_variation_basis, el_residual, extended_lagrangian, first_variation,
    recover_multiplier,
};

use schema::{load_problem, ResolvedBvp};

/// Variational solver for frame-constrained Lagrangian problems.
#[derive(Parser)]
#[command(name = "vako", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Integrate the Hamiltonian flow from an initial phase point.
    SolveIvp {
        /// Problem file (JSON).
        file: PathBuf,
        /// Initial configuration, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q0: Vec<f64>,
        /// Initial covector, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p0: Vec<f64>,
        /// Integration steps (default: the problem's bvp block, else 400).
        #[arg(long)]
        steps: Option<usize>,
        /// Output CSV trajectory path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the boundary problem by multi-start shooting.
    SolveBvp {
        /// Problem file (JSON) with a bvp block.
        file: PathBuf,
        /// Number of seeded shooting starts.
        #[arg(long, default_value_t = 1)]
        starts: usize,
        /// Seed for the start sampler.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; solution i is written to PREFIX-i.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagnose discrete criticality of a trajectory.
    CheckCritical {
        /// Problem file (JSON).
        file: PathBuf,
        /// Trajectory CSV (as written by solve-ivp / solve-bvp).
        #[arg(long)]
        trajectory: PathBuf,
        /// Variation step for the first-variation quotients.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
    },
    /// Test a horizontal curve for abnormality (singular endpoint map).
    Abnormal {
        /// Problem file (JSON).
        file: PathBuf,
        /// Trajectory CSV to test.
        #[arg(long, conflicts_with = "line_probe", required_unless_present = "line_probe")]
        trajectory: Option<PathBuf>,
        /// Probe the integral curve of the first frame field instead.
        #[arg(long)]
        line_probe: bool,
    },
    /// Check the Legendre-transform invariants at random fiber points.
    LegendreCheck {
        /// Problem file (JSON).
        file: PathBuf,
        /// Number of sampled fiber points.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        /// Seed for the point sampler.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Execute a parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveIvp { file, q0, p0, steps, out } => {
            cmd_solve_ivp(&file, &q0, &p0, steps, &out)
        }
        Command::SolveBvp { file, starts, seed, out } => {
            cmd_solve_bvp(&file, starts, seed, &out)
        }
        Command::CheckCritical { file, trajectory, eps } => {
            cmd_check_critical(&file, &trajectory, eps)
        }
        Command::Abnormal { file, trajectory, line_probe } => {
            cmd_abnormal(&file, trajectory.as_deref(), line_probe)
        }
        Command::LegendreCheck { file, samples, seed } => {
            cmd_legendre_check(&file, samples, seed)
        }
    }
}

fn check_dim(v: &[f64], n: usize, context: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
            context: context.to_string(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct IvpReport {
    problem: String,
    steps: usize,
    samples: usize,
    energy_drift: Option<f64>,
    horizontality_max: f64,
    trajectory: String,
}

fn cmd_solve_ivp(
    file: &Path,
    q0: &[f64],
    p0: &[f64],
    steps: Option<usize>,
    out: &Path,
) -> Result<()> {
    let loaded = load_problem(file)?;
    let n = loaded.problem.n;
    check_dim(q0, n, "--q0")?;
    check_dim(p0, n, "--p0")?;
    let (t0, t1, default_steps) = match &loaded.bvp {
        Some(b) => (b.t0, b.t1, b.steps),
        None => (0.0, 1.0, 400),
    };
    let steps = steps.unwrap_or(default_steps);
    if steps == 0 {
        return Err(Error::Schema { detail: "--steps must be at least 1".to_string() });
    }
    // Integrate and diagnose before touching the filesystem, so failed runs
    // leave no partial trajectory behind.
    let path = integrate_hamilton(&loaded.hamiltonian, t0, t1, q0, p0, steps)?;
    let report = flow_report(&path, &loaded.problem, loaded.autonomous)?;
    output::write_trajectory(out, &path, n, loaded.problem.k)?;
    output::print_json(&IvpReport {
        problem: loaded.name,
        steps: report.steps,
        samples: path.len(),
        energy_drift: report.energy_drift,
        horizontality_max: report.horizontality_max,
        trajectory: out.display().to_string(),
    })
}

#[derive(Serialize)]
struct ResidualReport {
    start_transversality: f64,
    end_membership: f64,
    end_transversality: f64,
}

#[derive(Serialize)]
struct SolutionReport {
    initial_q: Vec<f64>,
    initial_p: Vec<f64>,
    action: f64,
    residuals: ResidualReport,
    newton_iterations: usize,
    csv: String,
}

#[derive(Serialize)]
struct BvpReport {
    problem: String,
    attempts: usize,
    solutions: Vec<SolutionReport>,
}

fn cmd_solve_bvp(file: &Path, starts: usize, seed: u64, out: &Path) -> Result<()> {
    if starts == 0 {
        return Err(Error::Schema { detail: "--starts must be at least 1".to_string() });
    }
    let loaded = load_problem(file)?;
    let bvp = loaded.require_bvp()?;
    let spec = BvpSpec::new(
        loaded.hamiltonian.clone(),
        bvp.start.clone(),
        bvp.end.clone(),
        bvp.t0,
        bvp.t1,
        bvp.steps,
        bvp.anchor.clone(),
        bvp.p_guess.clone(),
    )?;
    let report = multi_start_shoot(&spec, bvp.tolerance, starts, seed)?;
    let n = loaded.problem.n;
    let k = loaded.problem.k;
    let mut solutions = Vec::with_capacity(report.solutions.len());
    for (i, ranked) in report.solutions.iter().enumerate() {
        let csv = format!("{}-{}.csv", out.display(), i + 1);
        output::write_trajectory(Path::new(&csv), &ranked.solution.path, n, k)?;
        let (start_transversality, end_membership, end_transversality) =
            ranked.solution.residuals;
        solutions.push(SolutionReport {
            initial_q: ranked.solution.path.q[0].clone(),
            initial_p: ranked.solution.path.p[0].clone(),
            action: ranked.action,
            residuals: ResidualReport {
                start_transversality,
                end_membership,
                end_transversality,
            },
            newton_iterations: ranked.solution.newton_iterations,
            csv,
        });
    }
    output::print_json(&BvpReport {
        problem: loaded.name,
        attempts: report.attempts,
        solutions,
    })
}

/// The file's boundary submanifold when the sample point already lies on
/// it, otherwise the point itself (pinning the variation there).
fn resolve_endpoint(bvp: Option<&ResolvedBvp>, at_start: bool, q: &[f64]) -> Submanifold {
    const MEMBERSHIP_TOL: f64 = 1e-8;
    if let Some(b) = bvp {
        let sub = if at_start { &b.start } else { &b.end };
        if sub.residual_norm(q) <= MEMBERSHIP_TOL {
            return sub.clone();
        }
    }
    Submanifold::Point(q.to_vec())
}

#[derive(Serialize)]
struct CriticalReport {
    first_variation_max: f64,
    el_residual_max: f64,
    multiplier_smoothness: f64,
}

fn cmd_check_critical(file: &Path, trajectory: &Path, eps: f64) -> Result<()> {
    if !(1e-6..=1e-2).contains(&eps) {
        return Err(Error::Schema {
            detail: format!("--eps must lie in [1e-6, 1e-2], got {eps}"),
        });
    }
    let loaded = load_problem(file)?;
    let n = loaded.problem.n;
    let k = loaded.problem.k;
    let phase = output::read_trajectory(trajectory, n, k)?;
    if phase.len() < 5 {
        return Err(Error::Schema {
            detail: format!("trajectory has {} samples, need at least 5", phase.len()),
        });
    }
    // Controls are deliberately left off: perturbed trajectories should be
    // diagnosed (large first variation, exit 0), not rejected against the
    // file's stale control columns.
    let curve = DiscreteCurve::new(phase.times.clone(), phase.q.clone());
    let start = resolve_endpoint(loaded.bvp.as_ref(), true, &phase.q[0]);
    let end = resolve_endpoint(loaded.bvp.as_ref(), false, phase.q.last().unwrap());
    let multiplier = recover_multiplier(&loaded.problem, &phase)?;
    let ltilde = extended_lagrangian(loaded.lagrangian.clone(), Mat::identity(n - k))?
        .with_multiplier(phase.times.clone(), multiplier.lambda.clone());
    let el = el_residual(&ltilde, &curve)?;
    let basis = default_variation_basis(&loaded.problem, &curve, &start, &end)?;
    let fv = first_variation(&loaded.lagrangian, &curve, &basis, eps)?;
    output::print_json(&CriticalReport {
        first_variation_max: fv.max,
        el_residual_max: el.max,
        multiplier_smoothness: multiplier.max_second_difference,
    })
}

#[derive(Serialize)]
struct AbnormalReport {
    verdict: &'static str,
    basis_dimension: usize,
    oracle_annihilator_dimension: usize,
    oracle_agreement_angle: Option<f64>,
    constraint_residual: Option<f64>,
}

/// Integral curve of the first frame field (controls u = e₁) from `q0`,
/// classic fourth-order Runge–Kutta on a uniform grid.
fn first_field_curve(
    problem: &ChartProblem,
    q0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> DiscreteCurve {
    let h = (t1 - t0) / steps as f64;
    let f = |t: f64, y: &[f64]| problem.x(0, t, y);
    let shift = |y: &[f64], s: f64, d: &[f64]| -> Vec<f64> {
        y.iter().zip(d).map(|(a, b)| a + s * b).collect()
    };
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut q = q0.to_vec();
    times.push(t0);
    points.push(q.clone());
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, &q);
        let k2 = f(t + 0.5 * h, &shift(&q, 0.5 * h, &k1));
        let k3 = f(t + 0.5 * h, &shift(&q, 0.5 * h, &k2));
        let k4 = f(t + h, &shift(&q, h, &k3));
        for i in 0..q.len() {
            q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        times.push(if s + 1 == steps { t1 } else { t0 + (s + 1) as f64 * h });
        points.push(q.clone());
    }
    let mut e1 = vec![0.0; problem.k];
    e1[0] = 1.0;
    let samples = points.len();
    DiscreteCurve::new(times, points).with_controls(vec![e1; samples])
}

fn cmd_abnormal(file: &Path, trajectory: Option<&Path>, line_probe: bool) -> Result<()> {
    let loaded = load_problem(file)?;
    let n = loaded.problem.n;
    let k = loaded.problem.k;
    let (curve, start, end) = match (trajectory, line_probe) {
        (Some(path), false) => {
            let phase = output::read_trajectory(path, n, k)?;
            let curve = DiscreteCurve::new(phase.times.clone(), phase.q.clone())
                .with_controls(phase.u.clone());
            let start = resolve_endpoint(loaded.bvp.as_ref(), true, &phase.q[0]);
            let end = resolve_endpoint(loaded.bvp.as_ref(), false, phase.q.last().unwrap());
            (curve, start, end)
        }
        (None, true) => {
            let (q0, t0, t1, steps) = match &loaded.bvp {
                Some(b) => (b.anchor.clone(), b.t0, b.t1, b.steps),
                None => (vec![0.0; n], 0.0, 1.0, 400),
            };
            let curve = first_field_curve(&loaded.problem, &q0, t0, t1, steps);
            // The probe is its own boundary problem: both endpoints pinned.
            let start = Submanifold::Point(curve.q[0].clone());
            let end = Submanifold::Point(curve.q.last().unwrap().clone());
            (curve, start, end)
        }
        _ => {
            return Err(Error::Schema {
                detail: "pass exactly one of --trajectory or --line-probe".to_string(),
            });
        }
    };
    let verdict = abnormal_test(&loaded.problem, &curve, &start, &end, 1e-7)?;
    let oracle = endpoint_map_oracle(&loaded.problem, &curve, &start)?;
    let report = match &verdict {
        AbnormalVerdict::Regular => AbnormalReport {
            verdict: "regular",
            basis_dimension: 0,
            oracle_annihilator_dimension: oracle.len(),
            oracle_agreement_angle: None,
            constraint_residual: None,
        },
        AbnormalVerdict::Singular(basis) => {
            let dim = basis.basis.len();
            let angle = if dim > 0 && oracle.len() == dim {
                let at_end: Vec<Vec<f64>> =
                    basis.basis.iter().map(|p| p.last().unwrap().clone()).collect();
                Some(max_principal_angle(&at_end, &oracle))
            } else {
                None
            };
            AbnormalReport {
                verdict: "singular",
                basis_dimension: dim,
                oracle_annihilator_dimension: oracle.len(),
                oracle_agreement_angle: angle,
                constraint_residual: Some(basis.constraint_residuals),
            }
        }
    };
    output::print_json(&report)
}

#[derive(Serialize)]
struct LegendreReport {
    involution_max_dev: f64,
    mutual_inverse_max_dev: f64,
    envelope_max_dev: f64,
    samples: usize,
}

fn cmd_legendre_check(file: &Path, samples: usize, seed: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::Schema { detail: "--samples must be at least 1".to_string() });
    }
    let loaded = load_problem(file)?;
    let fiber = loaded.lagrangian.fiber_map();
    let cfg = loaded.hamiltonian.newton_config().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = loaded.problem.n;
    let k = loaded.problem.k;
    let (mut inv_max, mut mut_max, mut env_max) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let t = if loaded.autonomous { 0.0 } else { rng.random_range(0.0..1.0) };
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = [v];
        inv_max = inv_max.max(involution_check(&fiber, t, &q, &batch, &cfg)?);
        mut_max = mut_max.max(mutual_inversion_check(&fiber, t, &q, &batch, &cfg)?);
        env_max = env_max.max(envelope_check(&fiber, t, &q, &batch, &cfg)?);
    }
    output::print_json(&LegendreReport {
        involution_max_dev: inv_max,
        mutual_inverse_max_dev: mut_max,
        envelope_max_dev: env_max,
        samples,
    })
}
