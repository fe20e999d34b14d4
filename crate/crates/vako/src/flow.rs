//! Integration of the Hamilton equations dq/dt = ∂H/∂p, dp/dt = −∂H/∂q of
//! a degenerate Hamiltonian, with warm-started fiber solves, plus lifts of
//! frame velocities to covectors and post-hoc conservation/horizontality
//! reports.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{ChartProblem, DiscreteCurve};
use crate::hamiltonian::{ConstrainedLagrangian, DegenerateHamiltonian};
use crate::numerics::linalg::{all_finite, norm2};

/// A sampled phase-space trajectory: positions, covectors, maximizing
/// controls, and Hamiltonian values on a shared grid.
#[derive(Debug, Clone)]
pub struct PhasePath {
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub h_values: Vec<f64>,
    /// Wall-clock seconds spent integrating.
    pub wall_seconds: f64,
}

impl PhasePath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.q[0].len()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn q_end(&self) -> &[f64] {
        self.q.last().unwrap()
    }

    pub fn p_end(&self) -> &[f64] {
        self.p.last().unwrap()
    }

    /// The base curve with the recorded controls attached.
    pub fn q_curve(&self) -> DiscreteCurve {
        DiscreteCurve::new(self.times.clone(), self.q.clone()).with_controls(self.u.clone())
    }
}

/// Conservation and horizontality diagnostics of an integrated path.
#[derive(Debug, Clone)]
pub struct FlowReport {
    /// max |H(t) − H(t0)| over the grid; `None` for time-dependent
    /// problems, where H is not conserved.
    pub energy_drift: Option<f64>,
    /// Max annihilator residual ‖θ(γ′)‖ of the base curve (finite
    /// differencing of q, so this decays at O(h²), not to zero).
    pub horizontality_max: f64,
    pub steps: usize,
    pub wall_seconds: f64,
}

/// Integrate the Hamilton equations by classical RK4 on the fixed grid
/// t0 + s·h, recording q, p, the maximizing controls, and H per sample.
/// Fiber solves warm-start from the previous stage's controls, so smooth
/// non-quadratic problems never solve cold mid-flow.
pub fn integrate_hamilton(
    dh: &DegenerateHamiltonian,
    t0: f64,
    t1: f64,
    q0: &[f64],
    p0: &[f64],
    steps: usize,
) -> Result<PhasePath> {
    assert!(steps >= 1, "need at least one step");
    assert!(t1 > t0, "time span must be positive");
    let n = dh.problem().n;
    assert_eq!(q0.len(), n, "initial position dimension");
    assert_eq!(p0.len(), n, "initial covector dimension");
    let started = Instant::now();
    let h = (t1 - t0) / steps as f64;

    let mut warm: Option<Vec<f64>> = None;
    // One Hamiltonian-gradient evaluation; threads the warm start through.
    let rhs = |t: f64, z: &[f64], warm: &mut Option<Vec<f64>>| -> Result<Vec<f64>> {
        let (q, p) = z.split_at(n);
        let g = dh.grad(t, q, p, warm.as_deref()).map_err(|e| attach_time(e, t))?;
        *warm = Some(g.controls);
        let mut dz = g.dp;
        dz.extend(g.dq.iter().map(|x| -x));
        Ok(dz)
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut qs = Vec::with_capacity(steps + 1);
    let mut ps = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    let mut hs = Vec::with_capacity(steps + 1);

    let mut z: Vec<f64> = q0.iter().chain(p0).copied().collect();
    for s in 0..=steps {
        let t = t0 + s as f64 * h;
        let (q, p) = z.split_at(n);
        let ev = dh.eval(t, q, p, warm.as_deref()).map_err(|e| attach_time(e, t))?;
        times.push(t);
        qs.push(q.to_vec());
        ps.push(p.to_vec());
        us.push(ev.controls.clone());
        hs.push(ev.value);
        warm = Some(ev.controls);
        if s == steps {
            break;
        }
        let k1 = rhs(t, &z, &mut warm)?;
        let z2: Vec<f64> = z.iter().zip(&k1).map(|(zi, ki)| zi + 0.5 * h * ki).collect();
        let k2 = rhs(t + 0.5 * h, &z2, &mut warm)?;
        let z3: Vec<f64> = z.iter().zip(&k2).map(|(zi, ki)| zi + 0.5 * h * ki).collect();
        let k3 = rhs(t + 0.5 * h, &z3, &mut warm)?;
        let z4: Vec<f64> = z.iter().zip(&k3).map(|(zi, ki)| zi + h * ki).collect();
        let k4 = rhs(t + h, &z4, &mut warm)?;
        for i in 0..z.len() {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !all_finite(&z) {
            return Err(Error::NonFiniteEvaluation {
                at: format!("phase state after step at t={:.6}", t + h),
            });
        }
    }
    Ok(PhasePath {
        times,
        q: qs,
        p: ps,
        u: us,
        h_values: hs,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

fn attach_time(e: Error, t: f64) -> Error {
    match e {
        Error::NotHyperRegular { detail } => Error::NotHyperRegular {
            detail: format!("at t={t:.6}: {detail}"),
        },
        Error::NonFiniteEvaluation { at } => Error::NonFiniteEvaluation {
            at: format!("t={t:.6}: {at}"),
        },
        other => other,
    }
}

/// Post-hoc diagnostics of an integrated path. Energy drift is reported only
/// for autonomous problems; horizontality always, via the annihilator
/// residual of the finite-differenced base curve.
pub fn flow_report(
    path: &PhasePath,
    problem: &ChartProblem,
    autonomous: bool,
) -> Result<FlowReport> {
    assert!(!path.is_empty(), "report of an empty path");
    let energy_drift = if autonomous {
        let h0 = path.h_values[0];
        Some(path.h_values.iter().fold(0.0f64, |m, &hv| m.max((hv - h0).abs())))
    } else {
        None
    };
    let curve = DiscreteCurve::new(path.times.clone(), path.q.clone());
    let horizontality = problem.horizontality_residual(&curve)?;
    Ok(FlowReport {
        energy_drift,
        horizontality_max: horizontality.max,
        steps: path.len() - 1,
        wall_seconds: path.wall_seconds,
    })
}

/// The Hamiltonian lift of a frame velocity: the unique covector p with
/// p·Xᵢ = (∂L/∂u)ᵢ on the distribution and prescribed components
/// p·X′ⱼ = λⱼ on the complement (defaulting to 0).
pub fn lift_from_velocity(
    lagr: &ConstrainedLagrangian,
    t: f64,
    q: &[f64],
    u: &[f64],
    lambda_dprime: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let problem = lagr.problem();
    let n = problem.n;
    let k = problem.k;
    if let Some(l) = lambda_dprime {
        if l.len() != n - k {
            return Err(Error::DimensionMismatch {
                expected: n - k,
                found: l.len(),
                context: "complement components of a lift".into(),
            });
        }
    }
    let frame = problem.frame_matrix(t, q);
    let condition = frame.cond();
    if !(condition < 1e10) {
        return Err(Error::DegenerateFrame { t, condition });
    }
    let mut rhs = lagr.grad_u(t, q, u)?;
    match lambda_dprime {
        Some(l) => rhs.extend_from_slice(l),
        None => rhs.extend(std::iter::repeat(0.0).take(n - k)),
    }
    // p·(columns of F) = rhs ⇔ Fᵀ p = rhs.
    frame
        .transpose()
        .solve(&rhs)
        .ok_or(Error::DegenerateFrame { t, condition })
}

/// Velocity reconstruction residual: max over samples of
/// ‖Σᵢ uᵢXᵢ − ∂H/∂p‖ along a path. This is the discrete form of the
/// identity that the Hamiltonian velocity lies in the distribution with the
/// recorded controls as coefficients.
pub fn control_velocity_residual(
    dh: &DegenerateHamiltonian,
    path: &PhasePath,
) -> Result<f64> {
    let problem = dh.problem();
    let mut max_res: f64 = 0.0;
    for s in 0..path.len() {
        let t = path.times[s];
        let g = dh.grad(t, &path.q[s], &path.p[s], Some(&path.u[s]))?;
        let mut v = vec![0.0; problem.n];
        for i in 0..problem.k {
            let xi = problem.x(i, t, &path.q[s]);
            for (dst, &c) in v.iter_mut().zip(&xi) {
                *dst += path.u[s][i] * c;
            }
        }
        let res = norm2(&crate::numerics::linalg::sub(&v, &g.dp));
        max_res = max_res.max(res);
    }
    Ok(max_res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::numerics::linalg::dot;
    use crate::problems::builtin;

    #[test]
    fn free_particle_is_a_straight_line() {
        let b = builtin("flat-3").unwrap();
        let path =
            integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &[1.0, 0.0, 0.0], 100)
                .unwrap();
        let qe = path.q_end();
        assert_abs_diff_eq!(qe[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(qe[1], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(qe[2], 0.0, epsilon = 1e-10);
        for p in &path.p {
            assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn heisenberg_flat_momentum_gives_straight_line() {
        // With p₃ = 0 the q₃-coupling vanishes and the system reduces to
        // free motion along x.
        let b = builtin("heisenberg").unwrap();
        let path =
            integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &[1.0, 0.0, 0.0], 400)
                .unwrap();
        let qe = path.q_end();
        assert_abs_diff_eq!(qe[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(qe[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(qe[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn heisenberg_vertical_momentum_closes_a_loop() {
        // p0 = (1, 0, 2π): the planar projection is a circle traversed
        // once, so x and y return to 0 while q₃ picks up the swept area
        // 1/(4π) (reference value confirmed by a 20000-step integration).
        let b = builtin("heisenberg").unwrap();
        let p0 = [1.0, 0.0, 2.0 * std::f64::consts::PI];
        let path = integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &p0, 2000).unwrap();
        let qe = path.q_end();
        assert!(qe[0].abs() <= 1e-6, "x(1) = {:.3e}", qe[0]);
        assert!(qe[1].abs() <= 1e-6, "y(1) = {:.3e}", qe[1]);
        let z_star = 1.0 / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(qe[2], z_star, epsilon = 1e-8);
    }

    #[test]
    fn flat_free_particle_conserves_energy_exactly() {
        let b = builtin("flat-3").unwrap();
        let path =
            integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &[1.0, 2.0, 3.0], 100)
                .unwrap();
        let report = flow_report(&path, &b.problem, b.autonomous).unwrap();
        assert!(report.energy_drift.unwrap() <= 1e-12);
        assert_eq!(report.steps, 100);
    }

    #[test]
    fn heisenberg_horizontality_decays_at_second_order() {
        let b = builtin("heisenberg").unwrap();
        let p0 = [1.0, 0.0, 2.0 * std::f64::consts::PI];
        let mut maxima = Vec::new();
        for steps in [500, 1000, 2000] {
            let path =
                integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &p0, steps).unwrap();
            let report = flow_report(&path, &b.problem, true).unwrap();
            maxima.push(report.horizontality_max);
        }
        assert!(maxima[2] <= 1e-4, "2000-step residual {:.3e}", maxima[2]);
        // O(h²): each halving divides the residual by ≈4.
        assert!(maxima[0] / maxima[1] > 3.0, "ratios {maxima:?}");
        assert!(maxima[1] / maxima[2] > 3.0, "ratios {maxima:?}");
    }

    #[test]
    fn energy_drift_absent_for_time_dependent_problems() {
        let b = builtin("driven-flat").unwrap();
        let path =
            integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &[0.5, 0.3, 0.0], 50)
                .unwrap();
        let report = flow_report(&path, &b.problem, b.autonomous).unwrap();
        assert!(report.energy_drift.is_none());
    }

    #[test]
    fn autonomous_builtins_conserve_energy_at_rk4_order() {
        for name in ["heisenberg", "heisenberg-potential", "martinet"] {
            let b = builtin(name).unwrap();
            let p0 = [1.0, 0.4, 6.0];
            let path =
                integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &p0, 1000).unwrap();
            let report = flow_report(&path, &b.problem, true).unwrap();
            let drift = report.energy_drift.unwrap();
            assert!(drift <= 1e-8, "{name}: drift {drift:.3e}");
        }
    }

    #[test]
    fn lifts_are_coordinate_momenta_on_flat_charts() {
        let b = builtin("flat-3").unwrap();
        let p = lift_from_velocity(&b.lagrangian, 0.0, &[0.0; 3], &[1.0, 2.0, 3.0], None)
            .unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn heisenberg_lift_at_origin_is_coordinate_aligned() {
        let b = builtin("heisenberg").unwrap();
        let p = lift_from_velocity(&b.lagrangian, 0.0, &[0.0; 3], &[1.0, 0.0], None).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lift_round_trips_through_the_hamiltonian() {
        // Evaluating H at the lifted covector must recover the controls.
        for name in ["heisenberg", "martinet", "heisenberg-potential"] {
            let b = builtin(name).unwrap();
            let q = [0.4, -0.2, 0.7];
            let u = [0.8, -0.3];
            let p = lift_from_velocity(&b.lagrangian, 0.0, &q, &u, None).unwrap();
            let ev = b.hamiltonian.eval(0.0, &q, &p, None).unwrap();
            for (a, e) in ev.controls.iter().zip(&u) {
                assert_abs_diff_eq!(a, e, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn lift_with_prescribed_complement_components() {
        let b = builtin("heisenberg").unwrap();
        let q = [0.4, -0.2, 0.7];
        let p =
            lift_from_velocity(&b.lagrangian, 0.0, &q, &[0.8, -0.3], Some(&[2.5])).unwrap();
        let xprime = b.problem.xprime(0, 0.0, &q);
        assert_abs_diff_eq!(dot(&p, &xprime), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn recorded_controls_reconstruct_the_phase_velocity() {
        let b = builtin("heisenberg").unwrap();
        let path = integrate_hamilton(
            &b.hamiltonian,
            0.0,
            1.0,
            &[0.1, -0.2, 0.3],
            &[0.7, 0.4, 1.3],
            200,
        )
        .unwrap();
        let res = control_velocity_residual(&b.hamiltonian, &path).unwrap();
        assert!(res <= 1e-9, "velocity identity residual {res:.3e}");
    }

    #[test]
    fn annihilator_shifts_of_the_covector_change_the_path_but_not_h0() {
        // Adding w with w|_D = 0 to p0 preserves H at t0 exactly, yet the
        // flow differs: H depends on p only through ρ, dp/dt does not.
        let b = builtin("heisenberg").unwrap();
        let q0 = [0.3, 0.4, 0.0];
        let p0 = [1.0, 0.5, 0.0];
        let theta = b.problem.theta_row(0, 0.0, &q0);
        let shifted: Vec<f64> = p0.iter().zip(&theta).map(|(&p, &th)| p + 2.0 * th).collect();
        let h_a = b.hamiltonian.eval(0.0, &q0, &p0, None).unwrap().value;
        let h_b = b.hamiltonian.eval(0.0, &q0, &shifted, None).unwrap().value;
        assert_abs_diff_eq!(h_a, h_b, epsilon = 1e-10);
        let path_a = integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &q0, &p0, 200).unwrap();
        let path_b = integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &q0, &shifted, 200).unwrap();
        let dq: f64 = path_a
            .q_end()
            .iter()
            .zip(path_b.q_end())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dq > 1e-3, "paths unexpectedly coincide (Δq = {dq:.3e})");
    }

    #[test]
    fn q_velocity_matches_dh_dp_at_interior_samples() {
        let b = builtin("martinet").unwrap();
        let path =
            integrate_hamilton(&b.hamiltonian, 0.0, 1.0, &[0.0; 3], &[0.9, 0.8, 0.5], 400)
                .unwrap();
        let curve = DiscreteCurve::new(path.times.clone(), path.q.clone());
        let h2 = (1.0f64 / 400.0).powi(2);
        for s in (40..360).step_by(40) {
            let v = curve.velocity(s);
            let g = b
                .hamiltonian
                .grad(path.times[s], &path.q[s], &path.p[s], Some(&path.u[s]))
                .unwrap();
            for (vi, di) in v.iter().zip(&g.dp) {
                assert!((vi - di).abs() <= 50.0 * h2, "velocity mismatch {}", (vi - di).abs());
            }
        }
    }

    #[test]
    fn lift_requires_matching_complement_dimension() {
        let b = builtin("heisenberg").unwrap();
        let err = lift_from_velocity(&b.lagrangian, 0.0, &[0.0; 3], &[1.0, 0.0], Some(&[1.0, 2.0]))
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
