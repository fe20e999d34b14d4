//! Lagrangians restricted to a distribution and their degenerate
//! Hamiltonians.
//!
//! A [`ConstrainedLagrangian`] is a cost on frame controls, L(t, q, u) with
//! u ∈ ℝᵏ the coefficients of the velocity in the X-frame. Its Hamiltonian
//! depends on the full covector p ∈ ℝⁿ only through the k reduced momenta
//! ρᵢ = p·Xᵢ(t, q), which makes H degenerate whenever k < n: adding any
//! annihilator covector to p changes nothing. Evaluation is a fiberwise
//! Legendre transform in u at ρ; gradients come from the envelope formula,
//! so the optimal controls are computed but never differentiated.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{ChartProblem, MatrixField};
use crate::legendre::{legendre_transform, FiberMap};
use crate::numerics::fd::fd_gradient_fallible;
use crate::numerics::linalg::{all_finite, dot, Mat};
use crate::numerics::newton::NewtonConfig;
use crate::numerics::{sample_unit_ball, seeded_rng};

/// Time-dependent scalar field (t, q) ↦ ℝ.
pub type ScalarField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

type ControlScalar = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
type ControlVector = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type ControlMatrix = Arc<dyn Fn(f64, &[f64], &[f64]) -> Mat + Send + Sync>;

/// A Lagrangian on frame controls: L(t, q, u), with optional analytic
/// derivatives. Missing derivatives fall back to central differences.
#[derive(Clone)]
pub struct ConstrainedLagrangian {
    problem: Arc<ChartProblem>,
    l: ControlScalar,
    dl_dq: Option<ControlVector>,
    dl_du: Option<ControlVector>,
    d2l_du2: Option<ControlMatrix>,
}

impl ConstrainedLagrangian {
    pub fn new(
        problem: Arc<ChartProblem>,
        l: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ConstrainedLagrangian {
            problem,
            l: Arc::new(l),
            dl_dq: None,
            dl_du: None,
            d2l_du2: None,
        }
    }

    pub fn with_grad_q(
        mut self,
        dl_dq: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dl_dq = Some(Arc::new(dl_dq));
        self
    }

    pub fn with_grad_u(
        mut self,
        dl_du: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dl_du = Some(Arc::new(dl_du));
        self
    }

    pub fn with_hessian_u(
        mut self,
        d2l_du2: impl Fn(f64, &[f64], &[f64]) -> Mat + Send + Sync + 'static,
    ) -> Self {
        self.d2l_du2 = Some(Arc::new(d2l_du2));
        self
    }

    pub fn problem(&self) -> &Arc<ChartProblem> {
        &self.problem
    }

    /// Number of controls (rank of the distribution).
    pub fn control_dim(&self) -> usize {
        self.problem.k
    }

    pub fn value(&self, t: f64, q: &[f64], u: &[f64]) -> Result<f64> {
        let l = (self.l)(t, q, u);
        if !l.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                at: format!("Lagrangian at t={t}, q={q:?}, u={u:?}"),
            });
        }
        Ok(l)
    }

    /// ∂L/∂q at fixed controls.
    pub fn grad_q(&self, t: f64, q: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if let Some(dl) = &self.dl_dq {
            let g = dl(t, q, u);
            if !all_finite(&g) {
                return Err(Error::NonFiniteEvaluation {
                    at: format!("dL/dq at t={t}, q={q:?}"),
                });
            }
            return Ok(g);
        }
        fd_gradient_fallible(|y| self.value(t, y, u), q)
    }

    /// ∂L/∂u at fixed base point.
    pub fn grad_u(&self, t: f64, q: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if let Some(dl) = &self.dl_du {
            let g = dl(t, q, u);
            if !all_finite(&g) {
                return Err(Error::NonFiniteEvaluation {
                    at: format!("dL/du at t={t}, q={q:?}"),
                });
            }
            return Ok(g);
        }
        fd_gradient_fallible(|w| self.value(t, q, w), u)
    }

    /// ∂²L/∂u² at fixed base point.
    pub fn hessian_u(&self, t: f64, q: &[f64], u: &[f64]) -> Result<Mat> {
        if let Some(d2l) = &self.d2l_du2 {
            let h = d2l(t, q, u);
            if !h.is_finite() {
                return Err(Error::NonFiniteEvaluation {
                    at: format!("d2L/du2 at t={t}, q={q:?}"),
                });
            }
            return Ok(h);
        }
        crate::numerics::fd::fd_jacobian(|w| self.grad_u(t, q, w), u, None)
    }

    /// The control fiber map u ↦ L(t, q, u) as a [`FiberMap`], carrying the
    /// analytic u-derivatives when present.
    pub fn fiber_map(&self) -> FiberMap {
        let this = self.clone();
        let mut fm = FiberMap::new_fallible(
            self.control_dim(),
            Arc::new(move |t, q, u| this.value(t, q, u)),
        );
        if self.dl_du.is_some() {
            let this = self.clone();
            fm = fm.with_gradient_fallible(Arc::new(move |t, q, u| this.grad_u(t, q, u)));
        }
        if self.d2l_du2.is_some() {
            let this = self.clone();
            fm = fm.with_hessian_fallible(Arc::new(move |t, q, u| this.hessian_u(t, q, u)));
        }
        fm
    }

    /// Construction-time check of all supplied derivative callbacks against
    /// finite differences at seeded sample points near (t, q).
    pub fn spot_check_derivatives(&self, t: f64, q: &[f64], seed: u64) -> Result<()> {
        self.fiber_map().spot_check_derivatives(t, q, seed)?;
        if self.dl_dq.is_none() {
            return Ok(());
        }
        let mut rng = seeded_rng(seed ^ 0x5f5f);
        for _ in 0..5 {
            let u = sample_unit_ball(&mut rng, self.control_dim());
            let mut y = q.to_vec();
            for (yi, d) in y.iter_mut().zip(sample_unit_ball(&mut rng, q.len())) {
                *yi += 0.5 * d;
            }
            let analytic = self.grad_q(t, &y, &u)?;
            let numeric = fd_gradient_fallible(|z| self.value(t, z, &u), &y)?;
            let err = crate::numerics::linalg::norm_inf(&crate::numerics::linalg::sub(
                &analytic, &numeric,
            ));
            let tol = 1e-5 * (1.0 + crate::numerics::linalg::norm_inf(&numeric));
            if err > tol {
                return Err(Error::NotHyperRegular {
                    detail: format!(
                        "dL/dq callback disagrees with finite differences by {err:.3e} \
                         at q={y:?}, u={u:?}"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Metric and potential for the quadratic fast path
/// L = ½ uᵀG(t,q)u − V(t,q), for which the transform in u is closed-form:
/// H = ½ ρᵀG(t,q)⁻¹ρ + V(t,q).
#[derive(Clone)]
pub struct SubRiemannianData {
    /// k×k fiber metric, symmetric positive definite on the chart.
    pub metric: MatrixField,
    /// Scalar potential subtracted from the kinetic term.
    pub potential: ScalarField,
}

/// H(t, q, p) evaluated through the reduced momenta.
#[derive(Debug, Clone)]
pub struct HamiltonianValue {
    pub value: f64,
    /// Maximizing controls u*(t, q, p).
    pub controls: Vec<f64>,
    /// Reduced momenta ρᵢ = p·Xᵢ(t, q).
    pub rho: Vec<f64>,
}

/// Value plus chart-coordinate gradients of H.
#[derive(Debug, Clone)]
pub struct HamiltonianGradient {
    pub value: f64,
    pub controls: Vec<f64>,
    pub rho: Vec<f64>,
    /// ∂H/∂q (length n).
    pub dq: Vec<f64>,
    /// ∂H/∂p (length n): the chart velocity Σᵢ uᵢ*Xᵢ.
    pub dp: Vec<f64>,
}

/// The degenerate Hamiltonian of a constrained Lagrangian.
#[derive(Clone)]
pub struct DegenerateHamiltonian {
    lagrangian: Arc<ConstrainedLagrangian>,
    sr: Option<SubRiemannianData>,
    newton: NewtonConfig,
}

impl DegenerateHamiltonian {
    /// Generic construction: every evaluation runs a Newton solve in the
    /// control fiber.
    pub fn new(lagrangian: Arc<ConstrainedLagrangian>, newton: NewtonConfig) -> Self {
        DegenerateHamiltonian { lagrangian, sr: None, newton }
    }

    pub fn lagrangian(&self) -> &Arc<ConstrainedLagrangian> {
        &self.lagrangian
    }

    pub fn problem(&self) -> &Arc<ChartProblem> {
        self.lagrangian.problem()
    }

    pub fn newton_config(&self) -> &NewtonConfig {
        &self.newton
    }

    /// Whether evaluations take the closed-form quadratic path.
    pub fn has_fast_path(&self) -> bool {
        self.sr.is_some()
    }

    /// Reduced momenta ρᵢ = p·Xᵢ(t, q).
    pub fn reduced_momenta(&self, t: f64, q: &[f64], p: &[f64]) -> Vec<f64> {
        let problem = self.problem();
        (0..problem.k).map(|i| dot(p, &problem.x(i, t, q))).collect()
    }

    /// Evaluate H(t, q, p). `warm` is a guess for the maximizing controls
    /// (previous step of a flow); without it the generic path solves cold.
    pub fn eval(&self, t: f64, q: &[f64], p: &[f64], warm: Option<&[f64]>) -> Result<HamiltonianValue> {
        let rho = self.reduced_momenta(t, q, p);
        if let Some(sr) = &self.sr {
            let g = (sr.metric)(t, q);
            let u = g.solve(&rho).ok_or_else(|| Error::NotPositiveDefinite {
                detail: format!("fiber metric singular at t={t}, q={q:?}"),
            })?;
            let value = 0.5 * dot(&rho, &u) + (sr.potential)(t, q);
            if !value.is_finite() || !all_finite(&u) {
                return Err(Error::NonFiniteEvaluation {
                    at: format!("Hamiltonian at t={t}, q={q:?}"),
                });
            }
            return Ok(HamiltonianValue { value, controls: u, rho });
        }
        let fiber = self.lagrangian.fiber_map();
        let (value, controls) = legendre_transform(&fiber, t, q, &rho, warm, &self.newton)?;
        Ok(HamiltonianValue { value, controls, rho })
    }

    /// Evaluate H through the generic Newton path even when a fast path is
    /// installed (used to cross-check the two).
    pub fn eval_generic(
        &self,
        t: f64,
        q: &[f64],
        p: &[f64],
        warm: Option<&[f64]>,
    ) -> Result<HamiltonianValue> {
        let rho = self.reduced_momenta(t, q, p);
        let fiber = self.lagrangian.fiber_map();
        let (value, controls) = legendre_transform(&fiber, t, q, &rho, warm, &self.newton)?;
        Ok(HamiltonianValue { value, controls, rho })
    }

    /// Value and chart gradients of H by the envelope formula:
    /// ∂H/∂p = Σᵢ uᵢ*Xᵢ and ∂H/∂q = Σᵢ uᵢ*(∂Xᵢ/∂q)ᵀp − ∂L/∂q|_{u*},
    /// with u* from [`Self::eval`]. The optimal controls are never
    /// differentiated: their first-order sensitivity cancels.
    pub fn grad(
        &self,
        t: f64,
        q: &[f64],
        p: &[f64],
        warm: Option<&[f64]>,
    ) -> Result<HamiltonianGradient> {
        let ev = self.eval(t, q, p, warm)?;
        let problem = self.problem();
        let n = problem.n;
        let mut dp = vec![0.0; n];
        let mut dq = crate::numerics::linalg::scale(
            &self.lagrangian.grad_q(t, q, &ev.controls)?,
            -1.0,
        );
        for i in 0..problem.k {
            let ui = ev.controls[i];
            let xi = problem.x(i, t, q);
            for (dst, &c) in dp.iter_mut().zip(&xi) {
                *dst += ui * c;
            }
            let di = problem.dx_dq(i, t, q)?;
            for (dst, c) in dq.iter_mut().zip(di.matvec_t(p)) {
                *dst += ui * c;
            }
        }
        if !(all_finite(&dq) && all_finite(&dp)) {
            return Err(Error::NonFiniteEvaluation {
                at: format!("Hamiltonian gradient at t={t}, q={q:?}"),
            });
        }
        Ok(HamiltonianGradient { value: ev.value, controls: ev.controls, rho: ev.rho, dq, dp })
    }
}

/// Build the quadratic Hamiltonian of L = ½uᵀG u − V with the closed-form
/// fast path. The metric is checked for symmetry and positive-definiteness
/// at seeded points near the given base point.
pub fn make_subriemannian(
    lagrangian: Arc<ConstrainedLagrangian>,
    data: SubRiemannianData,
    newton: NewtonConfig,
    check_at: (f64, &[f64]),
) -> Result<DegenerateHamiltonian> {
    let (t, q0) = check_at;
    let k = lagrangian.control_dim();
    let mut rng = seeded_rng(0x5352_4d45);
    for trial in 0..5 {
        let mut q = q0.to_vec();
        if trial > 0 {
            for (qi, d) in q.iter_mut().zip(sample_unit_ball(&mut rng, q0.len())) {
                *qi += 0.5 * d;
            }
        }
        let g = (data.metric)(t, &q);
        if g.rows() != k || g.cols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: g.rows(),
                context: "fiber metric size".into(),
            });
        }
        let sym_err = g.add_scaled(-1.0, &g.transpose()).max_abs();
        if sym_err > 1e-10 * (1.0 + g.max_abs()) {
            return Err(Error::NotPositiveDefinite {
                detail: format!("fiber metric asymmetric by {sym_err:.3e} at q={q:?}"),
            });
        }
        if g.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                detail: format!("fiber metric not positive definite at q={q:?}"),
            });
        }
    }
    Ok(DegenerateHamiltonian { lagrangian, sr: Some(data), newton })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::numerics::linalg::{norm_inf, sub};
    use crate::problems::builtin;

    fn heisenberg() -> crate::problems::BuiltinProblem {
        builtin("heisenberg").unwrap()
    }

    #[test]
    fn reduced_momenta_on_heisenberg() {
        let b = heisenberg();
        let rho = b.hamiltonian.reduced_momenta(0.0, &[1.0, 2.0, 3.0], &[0.4, -0.1, 0.2]);
        assert_abs_diff_eq!(rho[0], 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(rho[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn heisenberg_gradients_match_hand_computation() {
        // At q = (1, 2, 3), p = (0.4, −0.1, 0.2): ρ = (0.2, 0),
        // H = 0.02, ∂H/∂p = 0.2·X₁ = (0.2, 0, −0.2),
        // ∂H/∂q = u₁(∂X₁/∂q)ᵀp = (0, −0.02, 0).
        let b = heisenberg();
        let g = b.hamiltonian.grad(0.0, &[1.0, 2.0, 3.0], &[0.4, -0.1, 0.2], None).unwrap();
        assert_abs_diff_eq!(g.value, 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(g.dp[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(g.dp[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.dp[2], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(g.dq[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.dq[1], -0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(g.dq[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degeneracy_along_the_annihilator() {
        // Shifting p by any multiple of θ = (y/2, −x/2, 1) leaves H fixed.
        let b = heisenberg();
        let q = [0.7, -1.3, 0.4];
        let p = [0.3, 0.8, -0.5];
        let h0 = b.hamiltonian.eval(0.0, &q, &p, None).unwrap().value;
        let theta = b.problem.theta_row(0, 0.0, &q);
        for mu in [-2.0, -0.3, 0.5, 4.0] {
            let shifted: Vec<f64> =
                p.iter().zip(&theta).map(|(&pi, &th)| pi + mu * th).collect();
            let h = b.hamiltonian.eval(0.0, &q, &shifted, None).unwrap().value;
            assert_abs_diff_eq!(h, h0, epsilon = 1e-13 * (1.0 + h0.abs()));
        }
    }

    #[test]
    fn fast_path_matches_generic_newton_path() {
        let b = heisenberg();
        assert!(b.hamiltonian.has_fast_path());
        let q = [0.2, 0.5, -0.8];
        let p = [1.1, -0.4, 0.9];
        let fast = b.hamiltonian.eval(0.0, &q, &p, None).unwrap();
        let generic = b.hamiltonian.eval_generic(0.0, &q, &p, None).unwrap();
        assert_abs_diff_eq!(fast.value, generic.value, epsilon = 1e-9);
        assert!(norm_inf(&sub(&fast.controls, &generic.controls)) <= 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = builtin("heisenberg-potential").unwrap();
        let q = [0.3, -0.2, 0.6];
        let p = [0.9, 0.1, -0.7];
        let g = b.hamiltonian.grad(0.0, &q, &p, None).unwrap();
        let h = b.hamiltonian.clone();
        let fd_q = crate::numerics::fd::fd_gradient_fallible(
            |y| h.eval(0.0, y, &p, None).map(|e| e.value),
            &q,
        )
        .unwrap();
        let fd_p = crate::numerics::fd::fd_gradient_fallible(
            |pp| h.eval(0.0, &q, pp, None).map(|e| e.value),
            &p,
        )
        .unwrap();
        assert!(norm_inf(&sub(&g.dq, &fd_q)) <= 1e-5, "dq={:?} fd={:?}", g.dq, fd_q);
        assert!(norm_inf(&sub(&g.dp, &fd_p)) <= 1e-5, "dp={:?} fd={:?}", g.dp, fd_p);
    }

    #[test]
    fn optimal_controls_invert_the_fiber_derivative() {
        // 𝔽L(u*) must equal ρ: the controls returned by eval solve the
        // transform's stationarity condition.
        let b = heisenberg();
        let q = [0.1, 0.2, 0.3];
        let p = [0.5, -0.6, 0.25];
        let ev = b.hamiltonian.eval(0.0, &q, &p, None).unwrap();
        let back = b.lagrangian.grad_u(0.0, &q, &ev.controls).unwrap();
        assert!(norm_inf(&sub(&back, &ev.rho)) <= 1e-10);
    }

    #[test]
    fn non_positive_metric_is_rejected() {
        let b = heisenberg();
        let data = SubRiemannianData {
            metric: Arc::new(|_, _| {
                Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]])
            }),
            potential: Arc::new(|_, _| 0.0),
        };
        let err = match make_subriemannian(
            b.lagrangian.clone(),
            data,
            NewtonConfig::default(),
            (0.0, &[0.0, 0.0, 0.0]),
        ) {
            Err(e) => e,
            Ok(_) => panic!("indefinite metric was accepted"),
        };
        assert!(matches!(err, Error::NotPositiveDefinite { .. }), "got {err:?}");
    }

    #[test]
    fn time_dependent_lagrangian_gradients() {
        let b = builtin("driven-flat").unwrap();
        let q = [0.4, 0.1, -0.3];
        let p = [0.2, -0.5, 0.7];
        let t = 0.8;
        let g = b.hamiltonian.grad(t, &q, &p, None).unwrap();
        let h = b.hamiltonian.clone();
        let fd_q = crate::numerics::fd::fd_gradient_fallible(
            |y| h.eval(t, y, &p, None).map(|e| e.value),
            &q,
        )
        .unwrap();
        assert!(norm_inf(&sub(&g.dq, &fd_q)) <= 1e-5, "dq={:?} fd={:?}", g.dq, fd_q);
    }
}
