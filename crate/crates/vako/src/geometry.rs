//! Chart-level geometry: the distribution D as a time-dependent frame with
//! annihilator, the complement D′, tangent-space splittings, boundary
//! submanifolds, and discrete curves.
//!
//! Everything lives in a single global chart on ℝⁿ. The frame fields are
//! plain callbacks, so problems can be assembled from closures (built-ins)
//! or from parsed polynomial data (CLI inline problems) alike.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::fd::fd_jacobian;
use crate::numerics::linalg::{self, norm2, norm_inf, nullspace, Mat};

/// Time-dependent vector field (t, q) ↦ ℝⁿ.
pub type VectorField = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
/// Time-dependent one-form (t, q) ↦ covector row.
pub type CovectorField = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
/// Spatial derivative of a field: (t, q) ↦ matrix with entry (r, c) equal to
/// ∂(component r)/∂q_c.
pub type MatrixField = Arc<dyn Fn(f64, &[f64]) -> Mat + Send + Sync>;

/// Convenience constructor for a time-independent vector field.
pub fn constant_field(v: Vec<f64>) -> VectorField {
    Arc::new(move |_, _| v.clone())
}

/// Frame data for the splitting TM = D ⊕ D′: k spanning fields for D, the
/// n−k annihilator one-forms, and n−k spanning fields for D′.
#[derive(Clone)]
pub struct DistributionFrame {
    /// X₁…X_k spanning D.
    pub x: Vec<VectorField>,
    /// θ¹…θ^{n−k} with θᵃ(Xᵢ) = 0.
    pub theta: Vec<CovectorField>,
    /// X′₁…X′_{n−k} spanning a complement D′ with θ(X′) invertible.
    pub xprime: Vec<VectorField>,
    /// Optional analytic ∂Xᵢ/∂q, one matrix field per frame field.
    pub dx_dq: Option<Vec<MatrixField>>,
    /// Optional analytic ∂θᵃ/∂q, one matrix field per one-form.
    pub dtheta_dq: Option<Vec<MatrixField>>,
    /// Optional analytic ∂X′ⱼ/∂q, one matrix field per complement field.
    pub dxprime_dq: Option<Vec<MatrixField>>,
}

/// A constrained problem chart: dimensions, frame, and optionally the open
/// set where the frame is valid.
#[derive(Clone)]
pub struct ChartProblem {
    pub n: usize,
    pub k: usize,
    pub frame: DistributionFrame,
    pub domain_check: Option<Arc<dyn Fn(f64, &[f64]) -> bool + Send + Sync>>,
}

impl ChartProblem {
    /// Assemble and sanity-check dimensions (1 ≤ k ≤ n, frame counts).
    pub fn new(n: usize, k: usize, frame: DistributionFrame) -> Self {
        assert!(k >= 1 && k <= n, "distribution rank must satisfy 1 <= k <= n");
        assert_eq!(frame.x.len(), k, "need k frame fields");
        assert_eq!(frame.theta.len(), n - k, "need n-k annihilator forms");
        assert_eq!(frame.xprime.len(), n - k, "need n-k complement fields");
        ChartProblem { n, k, frame, domain_check: None }
    }

    pub fn with_domain_check(
        mut self,
        check: impl Fn(f64, &[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.domain_check = Some(Arc::new(check));
        self
    }

    pub fn in_domain(&self, t: f64, q: &[f64]) -> bool {
        self.domain_check.as_ref().map_or(true, |c| c(t, q))
    }

    /// Evaluate frame field i.
    pub fn x(&self, i: usize, t: f64, q: &[f64]) -> Vec<f64> {
        let v = (self.frame.x[i])(t, q);
        debug_assert_eq!(v.len(), self.n);
        v
    }

    /// Evaluate complement field j.
    pub fn xprime(&self, j: usize, t: f64, q: &[f64]) -> Vec<f64> {
        let v = (self.frame.xprime[j])(t, q);
        debug_assert_eq!(v.len(), self.n);
        v
    }

    /// Evaluate annihilator row a.
    pub fn theta_row(&self, a: usize, t: f64, q: &[f64]) -> Vec<f64> {
        let row = (self.frame.theta[a])(t, q);
        debug_assert_eq!(row.len(), self.n);
        row
    }

    /// The (n−k)×n matrix stacking the annihilator rows.
    pub fn theta_matrix(&self, t: f64, q: &[f64]) -> Mat {
        let rows: Vec<Vec<f64>> = (0..self.n - self.k).map(|a| self.theta_row(a, t, q)).collect();
        if rows.is_empty() {
            Mat::zeros(0, self.n)
        } else {
            Mat::from_rows(&rows)
        }
    }

    /// θ applied to a vector: the n−k annihilator pairings.
    pub fn theta_apply(&self, t: f64, q: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.n - self.k).map(|a| linalg::dot(&self.theta_row(a, t, q), v)).collect()
    }

    /// The n×n matrix [X₁ … X_k | X′₁ … X′_{n−k}] by columns.
    pub fn frame_matrix(&self, t: f64, q: &[f64]) -> Mat {
        let mut cols: Vec<Vec<f64>> = (0..self.k).map(|i| self.x(i, t, q)).collect();
        cols.extend((0..self.n - self.k).map(|j| self.xprime(j, t, q)));
        Mat::from_columns(&cols)
    }

    /// ∂Xᵢ/∂q, analytic when supplied, otherwise central differences.
    pub fn dx_dq(&self, i: usize, t: f64, q: &[f64]) -> Result<Mat> {
        if let Some(d) = &self.frame.dx_dq {
            return Ok((d[i])(t, q));
        }
        let field = self.frame.x[i].clone();
        fd_jacobian(move |y| Ok(field(t, y)), q, None)
    }

    /// ∂θᵃ/∂q, analytic when supplied, otherwise central differences.
    pub fn dtheta_dq(&self, a: usize, t: f64, q: &[f64]) -> Result<Mat> {
        if let Some(d) = &self.frame.dtheta_dq {
            return Ok((d[a])(t, q));
        }
        let form = self.frame.theta[a].clone();
        fd_jacobian(move |y| Ok(form(t, y)), q, None)
    }

    /// ∂X′ⱼ/∂q, analytic when supplied, otherwise central differences.
    pub fn dxprime_dq(&self, j: usize, t: f64, q: &[f64]) -> Result<Mat> {
        if let Some(d) = &self.frame.dxprime_dq {
            return Ok((d[j])(t, q));
        }
        let field = self.frame.xprime[j].clone();
        fd_jacobian(move |y| Ok(field(t, y)), q, None)
    }

    /// Whether analytic frame derivatives are available.
    pub fn has_frame_derivatives(&self) -> bool {
        self.frame.dx_dq.is_some()
    }

    /// The pointwise splitting TM = D ⊕ D′ at (t, q).
    pub fn eval_split(&self, t: f64, q: &[f64]) -> Result<TangentSplit> {
        const MAX_CONDITION: f64 = 1e10;
        let frame = self.frame_matrix(t, q);
        if !frame.is_finite() {
            return Err(Error::NonFiniteEvaluation { at: format!("frame at t={t}, q={q:?}") });
        }
        let condition = frame.cond();
        if !(condition < MAX_CONDITION) {
            return Err(Error::DegenerateFrame { t, condition });
        }
        let frame_inv = frame.inverse().ok_or(Error::DegenerateFrame { t, condition })?;
        // π_D = F · diag(1_k, 0) · F⁻¹ and complementarily for π_{D′}.
        let mut selector = Mat::zeros(self.n, self.n);
        for i in 0..self.k {
            selector[(i, i)] = 1.0;
        }
        let pi_d = frame.matmul(&selector).matmul(&frame_inv);
        let pi_dprime = Mat::identity(self.n).add_scaled(-1.0, &pi_d);
        Ok(TangentSplit { k: self.k, frame, frame_inv, pi_d, pi_dprime })
    }

    /// Per-sample annihilator residuals ‖θ(γ′)‖ of a discrete curve, with
    /// velocities by centered differences (one-sided at the endpoints).
    pub fn horizontality_residual(&self, curve: &DiscreteCurve) -> Result<HorizontalityReport> {
        let mut per_sample = Vec::with_capacity(curve.len());
        let mut velocity_scale: f64 = 0.0;
        for s in 0..curve.len() {
            let v = curve.velocity(s);
            velocity_scale = velocity_scale.max(norm2(&v));
            let residual = self.theta_apply(curve.times[s], &curve.q[s], &v);
            if !linalg::all_finite(&residual) {
                return Err(Error::NonFiniteEvaluation {
                    at: format!("annihilator at t={}", curve.times[s]),
                });
            }
            per_sample.push(norm2(&residual));
        }
        let max = per_sample.iter().fold(0.0f64, |m, r| m.max(*r));
        Ok(HorizontalityReport { per_sample, max, velocity_scale })
    }
}

/// Horizontality diagnostics for a discrete curve.
#[derive(Debug, Clone)]
pub struct HorizontalityReport {
    /// ‖θ(γ′(t_s))‖ per sample.
    pub per_sample: Vec<f64>,
    /// Max over samples.
    pub max: f64,
    /// Max velocity norm, for relative comparisons.
    pub velocity_scale: f64,
}

impl HorizontalityReport {
    /// Max residual relative to 1 + velocity scale.
    pub fn relative_max(&self) -> f64 {
        self.max / (1.0 + self.velocity_scale)
    }
}

/// Projections and frame-coordinate maps of TM = D ⊕ D′ at one point.
pub struct TangentSplit {
    k: usize,
    frame: Mat,
    frame_inv: Mat,
    /// Projection onto D along D′ in chart coordinates.
    pub pi_d: Mat,
    /// Projection onto D′ along D.
    pub pi_dprime: Mat,
}

impl TangentSplit {
    /// Frame coordinates (u, w) of a vector: v = Σuᵢ Xᵢ + Σw_j X′_j.
    pub fn to_frame_coords(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let coords = self.frame_inv.matvec(v);
        (coords[..self.k].to_vec(), coords[self.k..].to_vec())
    }

    /// Rebuild a vector from frame coordinates.
    pub fn from_frame_coords(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let mut coords = u.to_vec();
        coords.extend_from_slice(w);
        self.frame.matvec(&coords)
    }

    /// The D-coefficients of a vector (its control coordinates).
    pub fn control_coords(&self, v: &[f64]) -> Vec<f64> {
        self.frame_inv.matvec(v)[..self.k].to_vec()
    }
}

/// Boundary submanifold: a point, a level set g⁻¹(0), or all of the chart.
#[derive(Clone)]
pub enum Submanifold {
    Point(Vec<f64>),
    LevelSet {
        /// Constraint map ℝⁿ → ℝᶜ whose zero set is the submanifold.
        g: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
        /// Optional analytic c×n Jacobian.
        jacobian: Option<Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>>,
        codim: usize,
    },
    Whole,
}

impl Submanifold {
    /// Level set from a closure, Jacobian by finite differences.
    pub fn level_set(
        codim: usize,
        g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Submanifold::LevelSet { g: Arc::new(g), jacobian: None, codim }
    }

    pub fn codim(&self, n: usize) -> usize {
        match self {
            Submanifold::Point(_) => n,
            Submanifold::LevelSet { codim, .. } => *codim,
            Submanifold::Whole => 0,
        }
    }

    pub fn dim(&self, n: usize) -> usize {
        n - self.codim(n)
    }

    /// Constraint residual vector at q (empty for Whole).
    pub fn residual(&self, q: &[f64]) -> Vec<f64> {
        match self {
            Submanifold::Point(p) => linalg::sub(q, p),
            Submanifold::LevelSet { g, codim, .. } => {
                let r = g(q);
                debug_assert_eq!(r.len(), *codim);
                r
            }
            Submanifold::Whole => Vec::new(),
        }
    }

    /// Max-norm of the constraint residual.
    pub fn residual_norm(&self, q: &[f64]) -> f64 {
        norm_inf(&self.residual(q))
    }

    /// Constraint Jacobian for level sets (analytic or finite-difference).
    fn level_set_jacobian(&self, q: &[f64]) -> Result<Option<Mat>> {
        match self {
            Submanifold::LevelSet { g, jacobian, .. } => {
                if let Some(j) = jacobian {
                    return Ok(Some(j(q)));
                }
                let g = g.clone();
                Ok(Some(fd_jacobian(move |y| Ok(g(y)), q, None)?))
            }
            _ => Ok(None),
        }
    }

    /// Orthonormal basis of the tangent space at q, verifying membership
    /// within 1e−8 first.
    pub fn tangent_basis(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        let residual = self.residual_norm(q);
        if residual > 1e-8 {
            return Err(Error::NotOnSubmanifold { residual });
        }
        self.tangent_basis_unchecked(q)
    }

    /// Tangent basis without the membership check. Shooting residual maps
    /// evaluate constraint tangent spaces at iterates that are still off the
    /// manifold; the checked variant is for final verification.
    pub fn tangent_basis_unchecked(&self, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        match self {
            Submanifold::Point(_) => Ok(Vec::new()),
            Submanifold::Whole => {
                Ok((0..q.len())
                    .map(|i| {
                        let mut e = vec![0.0; q.len()];
                        e[i] = 1.0;
                        e
                    })
                    .collect())
            }
            Submanifold::LevelSet { codim, .. } => {
                let jac = self.level_set_jacobian(q)?.expect("level set has a Jacobian");
                let basis = nullspace(&jac, 1e-9);
                if basis.len() != q.len() - codim {
                    return Err(Error::RankDeficientConstraint {
                        detail: format!(
                            "level-set Jacobian at {q:?} has nullity {} (expected {})",
                            basis.len(),
                            q.len() - codim
                        ),
                    });
                }
                Ok(basis)
            }
        }
    }

    /// Nearest-point projection onto the submanifold by Gauss-Newton
    /// (5 corrections, target residual 1e−12).
    pub fn project(&self, q: &[f64]) -> Result<Vec<f64>> {
        match self {
            Submanifold::Point(p) => Ok(p.clone()),
            Submanifold::Whole => Ok(q.to_vec()),
            Submanifold::LevelSet { .. } => {
                let mut x = q.to_vec();
                for _ in 0..5 {
                    let r = self.residual(&x);
                    if norm_inf(&r) <= 1e-12 {
                        break;
                    }
                    let jac = self.level_set_jacobian(&x)?.expect("level set has a Jacobian");
                    // Minimum-norm correction: x ← x − Jᵀ(JJᵀ)⁻¹ r.
                    let jjt = jac.matmul(&jac.transpose());
                    let y = jjt.solve(&r).ok_or_else(|| Error::RankDeficientConstraint {
                        detail: format!("level-set Jacobian rank-deficient near {x:?}"),
                    })?;
                    let correction = jac.matvec_t(&y);
                    x = linalg::sub(&x, &correction);
                }
                let residual = self.residual_norm(&x);
                if residual > 1e-8 {
                    return Err(Error::NotOnSubmanifold { residual });
                }
                Ok(x)
            }
        }
    }
}

/// Verdict of the sufficient endpoint-regularity test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularityVerdict {
    /// T_qS + D_q spans the chart, so no curve from/to (S, q) is singular.
    Regular,
    /// The sufficient condition fails; nothing can be concluded.
    Inconclusive,
}

/// Sufficient regularity test at an endpoint: Regular when the submanifold
/// tangent space together with D spans ℝⁿ. The condition is one-sided, so
/// the negative outcome is only ever Inconclusive.
pub fn endpoint_regularity_sufficient(
    problem: &ChartProblem,
    s: &Submanifold,
    t: f64,
    q: &[f64],
) -> Result<RegularityVerdict> {
    let mut cols = s.tangent_basis(q)?;
    cols.extend((0..problem.k).map(|i| problem.x(i, t, q)));
    let m = Mat::from_columns(&cols);
    if m.rank(1e-8) == problem.n {
        Ok(RegularityVerdict::Regular)
    } else {
        Ok(RegularityVerdict::Inconclusive)
    }
}

/// A sampled curve in the chart: strictly increasing grid, one point per
/// sample, optionally frame controls per sample.
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub u: Option<Vec<Vec<f64>>>,
}

impl DiscreteCurve {
    pub fn new(times: Vec<f64>, q: Vec<Vec<f64>>) -> Self {
        assert_eq!(times.len(), q.len(), "one point per sample");
        assert!(times.len() >= 2, "a curve needs at least two samples");
        assert!(
            times.windows(2).all(|w| w[1] > w[0]),
            "sample times must be strictly increasing"
        );
        let dim = q[0].len();
        assert!(q.iter().all(|p| p.len() == dim), "ragged sample points");
        DiscreteCurve { times, q, u: None }
    }

    pub fn with_controls(mut self, u: Vec<Vec<f64>>) -> Self {
        assert_eq!(u.len(), self.times.len(), "one control per sample");
        self.u = Some(u);
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.q[0].len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Velocity at sample s by the 3-point stencil that is exact for
    /// quadratics on nonuniform grids (centered inside, one-sided at the
    /// ends; falls back to a chord for 2-sample curves).
    pub fn velocity(&self, s: usize) -> Vec<f64> {
        let n = self.len();
        if n == 2 {
            let dt = self.times[1] - self.times[0];
            return linalg::scale(&linalg::sub(&self.q[1], &self.q[0]), 1.0 / dt);
        }
        let dim = self.dim();
        let (i0, i1, i2, at) = if s == 0 {
            (0, 1, 2, 0)
        } else if s == n - 1 {
            (n - 3, n - 2, n - 1, 2)
        } else {
            (s - 1, s, s + 1, 1)
        };
        let h1 = self.times[i1] - self.times[i0];
        let h2 = self.times[i2] - self.times[i1];
        let (c0, c1, c2) = match at {
            0 => (
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
                (h1 + h2) / (h1 * h2),
                -h1 / (h2 * (h1 + h2)),
            ),
            1 => (
                -h2 / (h1 * (h1 + h2)),
                (h2 - h1) / (h1 * h2),
                h1 / (h2 * (h1 + h2)),
            ),
            _ => (
                h2 / (h1 * (h1 + h2)),
                -(h1 + h2) / (h1 * h2),
                (h1 + 2.0 * h2) / (h2 * (h1 + h2)),
            ),
        };
        (0..dim)
            .map(|d| c0 * self.q[i0][d] + c1 * self.q[i1][d] + c2 * self.q[i2][d])
            .collect()
    }
}
