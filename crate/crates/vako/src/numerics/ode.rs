//! Classical fixed-step RK4.
//!
//! Fixed step keeps output deterministic and the sample grid shared with
//! downstream quadrature; the flows integrated here are smooth in their
//! charts, so adaptivity would buy little.

use crate::error::{Error, Result};
use crate::numerics::linalg::all_finite;

/// Sampled solution including both endpoints.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// One RK4 step of size `h` from `(t, x)`.
pub fn rk4_step(
    rhs: &mut impl FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    t: f64,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let k1 = eval(rhs, t, x)?;
    let k2 = eval(rhs, t + 0.5 * h, &combine(x, &k1, 0.5 * h))?;
    let k3 = eval(rhs, t + 0.5 * h, &combine(x, &k2, 0.5 * h))?;
    let k4 = eval(rhs, t + h, &combine(x, &k3, h))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrate `x' = rhs(t, x)` from `t0` to `t1` in `steps` equal steps,
/// recording every sample.
pub fn rk4_integrate(
    mut rhs: impl FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    x0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Trajectory> {
    assert!(steps >= 1, "rk4_integrate needs at least one step");
    let h = (t1 - t0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    for step in 0..steps {
        let t = t0 + h * step as f64;
        x = rk4_step(&mut rhs, t, &x, h)?;
        if !all_finite(&x) {
            return Err(Error::NonFiniteEvaluation { at: format!("state at t={}", t + h) });
        }
        // Recompute the grid time from the index so accumulated roundoff
        // cannot shift late samples.
        times.push(if step + 1 == steps { t1 } else { t0 + h * (step + 1) as f64 });
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

fn eval(
    rhs: &mut impl FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let v = rhs(t, x)?;
    if !all_finite(&v) {
        return Err(Error::NonFiniteEvaluation { at: format!("vector field at t={t}") });
    }
    Ok(v)
}

fn combine(x: &[f64], k: &[f64], s: f64) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + s * ki).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_field_is_constant() {
        let traj = rk4_integrate(|_, x| Ok(vec![0.0; x.len()]), &[1.0, -2.0], 0.0, 3.0, 7)
            .unwrap();
        for state in &traj.states {
            assert_eq!(state, &vec![1.0, -2.0]);
        }
    }

    #[test]
    fn unit_field_is_exact() {
        let traj = rk4_integrate(|_, _| Ok(vec![1.0]), &[0.0], 0.0, 1.0, 10).unwrap();
        assert_abs_diff_eq!(traj.states.last().unwrap()[0], 1.0, epsilon = 1e-15);
    }

    fn harmonic_endpoint_error(steps: usize) -> f64 {
        let traj = rk4_integrate(
            |_, x| Ok(vec![x[1], -x[0]]),
            &[1.0, 0.0],
            0.0,
            2.0 * std::f64::consts::PI,
            steps,
        )
        .unwrap();
        let end = traj.states.last().unwrap();
        ((end[0] - 1.0).powi(2) + end[1].powi(2)).sqrt()
    }

    #[test]
    fn harmonic_oscillator_accuracy_and_order() {
        let e1000 = harmonic_endpoint_error(1000);
        let e2000 = harmonic_endpoint_error(2000);
        assert!(e1000 <= 1e-9, "endpoint error {e1000:.3e}");
        let order = (e1000 / e2000).log2();
        assert!(order >= 3.7, "observed order {order:.2}");
    }

    #[test]
    fn non_finite_rhs_reports_time() {
        let err = rk4_integrate(
            |t, _| Ok(vec![if t > 0.5 { f64::NAN } else { 1.0 }]),
            &[0.0],
            0.0,
            1.0,
            10,
        )
        .unwrap_err();
        match err {
            Error::NonFiniteEvaluation { at } => assert!(at.contains("t="), "at={at}"),
            other => panic!("expected NonFiniteEvaluation, got {other:?}"),
        }
    }
}
