//! Two-point and point-to-submanifold boundary value problems by shooting,
//! plus a deterministic multi-start run on a target reached by a whole
//! family of extremals with the same action.

use vako::boundary::{multi_start_shoot, shoot, BvpSpec};
use vako::geometry::Submanifold;
use vako::problems::builtin;
use vako::variation::action;

fn main() -> vako::Result<()> {
    let b = builtin("heisenberg")?;

    // 1. The catalog's default two-point problem.
    let spec = BvpSpec::for_builtin(&b)?;
    let sol = shoot(&spec, 1e-10)?;
    let act = action(&b.lagrangian, &sol.path.q_curve())?;
    let (start_t, end_m, end_t) = sol.residuals;
    println!("point-to-point:");
    println!("  p(0)      = {}", fmt(&sol.path.p[0]));
    println!("  action    = {act:.12}");
    println!(
        "  residuals = start transversality {start_t:.2e}, end membership {end_m:.2e}, \
         end transversality {end_t:.2e}  ({} Newton iterations)",
        sol.newton_iterations
    );

    // 2. A point-to-plane problem: reach the plane x = 1 with free (y, z).
    //    Transversality forces p_y(1) = p_z(1) = 0, so the shot picks the
    //    straight horizontal segment.
    let plane = Submanifold::level_set(1, |q: &[f64]| vec![q[0] - 1.0]);
    let spec = BvpSpec::new(
        b.hamiltonian.clone(),
        Submanifold::Point(vec![0.0, 0.0, 0.0]),
        plane,
        0.0,
        1.0,
        400,
        vec![0.0, 0.0, 0.0],
        vec![0.9, 0.1, 0.1],
    )?;
    let sol = shoot(&spec, 1e-10)?;
    println!("\npoint-to-plane (x = 1):");
    println!("  q(1)   = {}", fmt(sol.path.q_end()));
    println!("  p(1)   = {}", fmt(sol.path.p_end()));
    println!("  action = {:.12}", action(&b.lagrangian, &sol.path.q_curve())?);

    // 3. The vertical target (0, 0, 1/2): every rotation of a minimizing
    //    extremal about the z-axis is again a minimizer, so multi-start
    //    finds several distinct initial covectors with equal action.
    let spec = BvpSpec::new(
        b.hamiltonian.clone(),
        Submanifold::Point(vec![0.0, 0.0, 0.0]),
        Submanifold::Point(vec![0.0, 0.0, 0.5]),
        0.0,
        1.0,
        400,
        vec![0.0, 0.0, 0.0],
        vec![1.5, 0.0, 5.0],
    )?;
    let report = multi_start_shoot(&spec, 1e-9, 32, 11)?;
    println!("\nvertical target (0, 0, 1/2): {} distinct solutions from 32 starts", report.solutions.len());
    println!("  {:>28}  {:>14}", "p(0)", "action");
    for ranked in report.solutions.iter().take(6) {
        println!("  {:>28}  {:>14.9}", fmt(&ranked.solution.path.p[0]), ranked.action);
    }
    let best = report.best().action;
    let ties = report.solutions.iter().filter(|r| (r.action - best).abs() <= 1e-8).count();
    println!("  least action {best:.9} shared by {ties} solutions (a one-parameter family)");
    Ok(())
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:+.6}")).collect();
    format!("[{}]", parts.join(", "))
}
