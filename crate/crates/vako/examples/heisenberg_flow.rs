//! Integrate the degenerate Hamiltonian flow of the Heisenberg problem and
//! check its structural invariants: energy conservation (the problem is
//! autonomous), horizontality of the base curve, and the fourth-order
//! convergence of the RK4 energy drift under grid refinement.

use vako::flow::{flow_report, integrate_hamilton};
use vako::problems::builtin;

fn main() -> vako::Result<()> {
    let b = builtin("heisenberg")?;
    let q0 = [0.0, 0.0, 0.0];
    let p0 = [1.5, 0.5, 5.0];

    // A single flow, with the Hamiltonian and maximizing controls at launch.
    let hv = b.hamiltonian.eval(0.0, &q0, &p0, None)?;
    println!("H(0, q0, p0)   = {:.9}", hv.value);
    println!("controls u*(0) = [{:+.6}, {:+.6}]", hv.controls[0], hv.controls[1]);

    println!("\n{:>6}  {:>12}  {:>12}  {:>9}", "steps", "energy drift", "horizontality", "order");
    let mut previous_drift: Option<f64> = None;
    for &steps in &[250usize, 500, 1000, 2000] {
        let path = integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &q0, &p0, steps)?;
        let report = flow_report(&path, &b.problem, b.autonomous)?;
        let drift = report.energy_drift.expect("autonomous problem conserves H");
        let order = previous_drift
            .map(|prev| format!("{:.2}", (prev / drift).log2()))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>6}  {:>12.3e}  {:>12.3e}  {:>9}",
            steps, drift, report.horizontality_max, order
        );
        previous_drift = Some(drift);
    }

    // The base curve stays on the distribution to the accuracy of the
    // finite-difference velocities, and the endpoint is reproducible.
    let path = integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &q0, &p0, 1000)?;
    let qe = path.q_end();
    println!("\nendpoint q(1) = [{:+.9}, {:+.9}, {:+.9}]", qe[0], qe[1], qe[2]);
    Ok(())
}
