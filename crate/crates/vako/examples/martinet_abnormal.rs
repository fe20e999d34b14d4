//! Abnormal (singular) extremal detection: transport covectors along a
//! candidate curve, assemble the characteristic system, and compare its
//! nullspace against a finite-difference endpoint-map oracle. The Martinet
//! line through the surface y = 0 is the classical singular example; the
//! same line in the Heisenberg problem is regular.

use vako::extremals::{
    abnormal_test, contact_test, endpoint_map_oracle, max_principal_angle, AbnormalVerdict,
    ContactSample, ContactVerdict,
};
use vako::geometry::{DiscreteCurve, Submanifold};
use vako::problems::builtin;

/// The straight curve t ↦ t·target on a uniform grid with constant controls.
fn line_curve(target: &[f64], samples: usize, controls: Vec<f64>) -> DiscreteCurve {
    let times: Vec<f64> = (0..samples).map(|s| s as f64 / (samples - 1) as f64).collect();
    let q: Vec<Vec<f64>> =
        times.iter().map(|&t| target.iter().map(|x| t * x).collect()).collect();
    let u = vec![controls; samples];
    DiscreteCurve::new(times, q).with_controls(u)
}

fn main() -> vako::Result<()> {
    // The x-axis, traversed with controls (1, 0), lies inside the Martinet
    // surface where the distribution fails to be contact.
    let mart = builtin("martinet")?;
    let curve = line_curve(&[1.0, 0.0, 0.0], 801, vec![1.0, 0.0]);
    let start = Submanifold::Point(vec![0.0, 0.0, 0.0]);
    let end = Submanifold::Point(vec![1.0, 0.0, 0.0]);

    match abnormal_test(&mart.problem, &curve, &start, &end, 1e-7)? {
        AbnormalVerdict::Singular(basis) => {
            println!("martinet x-axis: SINGULAR");
            println!("  characteristic space dimension = {}", basis.basis.len());
            println!("  constraint residual max        = {:.3e}", basis.constraint_residuals);
            // Cross-check against covectors annihilating the image of the
            // finite-difference endpoint map.
            let oracle = endpoint_map_oracle(&mart.problem, &curve, &start)?;
            let at_end: Vec<Vec<f64>> =
                basis.basis.iter().map(|path| path.last().unwrap().clone()).collect();
            let angle = max_principal_angle(&at_end, &oracle);
            println!("  endpoint-map oracle dimension  = {}", oracle.len());
            println!("  principal angle to oracle      = {angle:.3e} rad");
        }
        AbnormalVerdict::Regular => println!("martinet x-axis: regular (unexpected)"),
    }

    // The same straight curve is a regular point of the Heisenberg
    // endpoint map: no characteristic survives.
    let heis = builtin("heisenberg")?;
    let curve = line_curve(&[1.0, 0.0, 0.0], 801, vec![1.0, 0.0]);
    match abnormal_test(&heis.problem, &curve, &start, &end, 1e-7)? {
        AbnormalVerdict::Regular => println!("\nheisenberg x-axis: regular"),
        AbnormalVerdict::Singular(_) => println!("\nheisenberg x-axis: singular (unexpected)"),
    }

    // Pointwise contact test: the symplectic form restricted to the
    // annihilator bundle degenerates exactly on the Martinet surface y = 0.
    println!("\ncontact test on the annihilator bundle (martinet):");
    for &y in &[0.0, 0.3] {
        let samples = vec![ContactSample { t: 0.0, q: vec![0.5, y, 0.0], rho: vec![1.0] }];
        let verdict = &contact_test(&mart.problem, &samples, 1e-9)?[0];
        let label = match verdict {
            ContactVerdict::NondegenerateOnAnnihilator => "nondegenerate".to_string(),
            ContactVerdict::Degenerate { directions } => {
                format!("DEGENERATE (kernel dimension {})", directions.len())
            }
        };
        println!("  at y = {y:+.1}: {label}");
    }
    Ok(())
}
