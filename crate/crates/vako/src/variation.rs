//! The Lagrangian side of the correspondence: action quadrature, extended
//! (unconstrained) Lagrangians on ambient velocities, Euler–Lagrange
//! residuals, a discretized first-variation test, and recovery of the
//! constraint multiplier from a phase path.
//!
//! Everything here works on sampled curves and is deliberately independent
//! of the Hamiltonian flow machinery, so it can certify flow output rather
//! than restate it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::PhasePath;
use crate::geometry::{ChartProblem, Submanifold};
use crate::hamiltonian::ConstrainedLagrangian;
use crate::numerics::linalg::{dot, norm2, norm_inf, scale, sub, Mat};

pub use crate::geometry::DiscreteCurve;

/// Quadrature weights for ∫f dt on the grid: composite Simpson on uniform
/// grids (with a 3/8 tail when the interval count is odd), trapezoid on
/// nonuniform grids.
pub fn quadrature_weights(times: &[f64]) -> Vec<f64> {
    let s = times.len();
    assert!(s >= 2, "quadrature needs at least two samples");
    let span = times[s - 1] - times[0];
    let h = (times[1] - times[0]).abs();
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * span.abs().max(1.0));
    let intervals = s - 1;
    let mut w = vec![0.0; s];
    if !uniform || intervals == 1 {
        for i in 0..intervals {
            let half = 0.5 * (times[i + 1] - times[i]);
            w[i] += half;
            w[i + 1] += half;
        }
        return w;
    }
    // Simpson needs an even interval count; peel three intervals off for a
    // 3/8 block when it is odd.
    let simpson_end = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    let mut i = 0;
    while i + 1 < simpson_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if simpson_end < intervals {
        let c = 3.0 * h / 8.0;
        w[simpson_end] += c;
        w[simpson_end + 1] += 3.0 * c;
        w[simpson_end + 2] += 3.0 * c;
        w[simpson_end + 3] += c;
    }
    w
}

/// Per-sample least-squares fit of frame controls to the curve's
/// finite-difference velocities: uₛ = argmin ‖Σᵢ uᵢXᵢ − γ′(tₛ)‖.
/// Returns the controls and the max relative fit residual
/// ‖Σuᵢ Xᵢ − γ′‖ / (1 + ‖γ′‖).
pub fn recover_controls(
    problem: &ChartProblem,
    curve: &DiscreteCurve,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let k = problem.k;
    let mut controls = Vec::with_capacity(curve.len());
    let mut max_rel: f64 = 0.0;
    for s in 0..curve.len() {
        let t = curve.times[s];
        let q = &curve.q[s];
        let v = curve.velocity(s);
        let x = Mat::from_columns(&(0..k).map(|i| problem.x(i, t, q)).collect::<Vec<_>>());
        let gram = x.transpose().matmul(&x);
        let rhs = x.matvec_t(&v);
        let u = gram.solve(&rhs).ok_or_else(|| Error::DegenerateFrame {
            t,
            condition: gram.cond(),
        })?;
        let res = norm2(&sub(&x.matvec(&u), &v));
        max_rel = max_rel.max(res / (1.0 + norm2(&v)));
        controls.push(u);
    }
    Ok((controls, max_rel))
}

/// Action 𝓛(γ) = ∫ L(t, γ, u) dt by quadrature on the sample grid. Controls
/// come from the curve when attached, otherwise from a least-squares fit,
/// which must reproduce the velocities within 1e−4 (relative) — otherwise
/// the curve is not horizontal and its constrained action is undefined.
pub fn action(lagr: &ConstrainedLagrangian, curve: &DiscreteCurve) -> Result<f64> {
    const HORIZONTALITY_GATE: f64 = 1e-4;
    let controls_owned;
    let controls: &[Vec<f64>] = match &curve.u {
        Some(u) => u,
        None => {
            let (u, max_rel) = recover_controls(lagr.problem(), curve)?;
            if max_rel > HORIZONTALITY_GATE {
                return Err(Error::NonHorizontal {
                    max_residual: max_rel,
                    tolerance: HORIZONTALITY_GATE,
                });
            }
            controls_owned = u;
            &controls_owned
        }
    };
    action_with_controls(lagr, &curve.times, &curve.q, controls)
}

fn action_with_controls(
    lagr: &ConstrainedLagrangian,
    times: &[f64],
    q: &[Vec<f64>],
    u: &[Vec<f64>],
) -> Result<f64> {
    let w = quadrature_weights(times);
    let mut total = 0.0;
    for s in 0..times.len() {
        total += w[s] * lagr.value(times[s], &q[s], &u[s])?;
    }
    Ok(total)
}

/// Vector fields along a curve used as test variations: one n-vector per
/// sample per field. Interior fields vanish at both endpoints; endpoint
/// fields are tangent to the start/end submanifolds there.
#[derive(Debug, Clone)]
pub struct VariationBasis {
    pub fields: Vec<Vec<Vec<f64>>>,
}

impl VariationBasis {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Default test-variation basis: k·⌈S/25⌉ interior sine bumps in the frame
/// directions, plus tangent ramps at the endpoints when the start/end
/// submanifolds are not points (those directions move the endpoints within
/// the submanifolds, which the transversality conditions must annihilate).
pub fn default_variation_basis(
    problem: &ChartProblem,
    curve: &DiscreteCurve,
    start: &Submanifold,
    end: &Submanifold,
) -> Result<VariationBasis> {
    let s_count = curve.len();
    let (a, b) = (curve.t_start(), curve.t_end());
    let span = b - a;
    let modes = s_count.div_ceil(25);
    let mut fields = Vec::new();
    for i in 0..problem.k {
        for m in 1..=modes {
            let mut field = Vec::with_capacity(s_count);
            for s in 0..s_count {
                let tau = (curve.times[s] - a) / span;
                let bump = if s == 0 || s == s_count - 1 {
                    0.0
                } else {
                    (m as f64 * std::f64::consts::PI * tau).sin()
                };
                field.push(scale(&problem.x(i, curve.times[s], &curve.q[s]), bump));
            }
            fields.push(field);
        }
    }
    if !matches!(start, Submanifold::Point(_)) {
        for dir in start.tangent_basis(&curve.q[0])? {
            let field = (0..s_count)
                .map(|s| {
                    let tau = (curve.times[s] - a) / span;
                    scale(&dir, 1.0 - tau)
                })
                .collect();
            fields.push(field);
        }
    }
    if !matches!(end, Submanifold::Point(_)) {
        for dir in end.tangent_basis(&curve.q[s_count - 1])? {
            let field = (0..s_count)
                .map(|s| {
                    let tau = (curve.times[s] - a) / span;
                    scale(&dir, tau)
                })
                .collect();
            fields.push(field);
        }
    }
    Ok(VariationBasis { fields })
}

/// Central directional derivatives of the action along each variation
/// field, with the perturbed curves re-projected onto the distribution
/// (the frame-split control fit drops the θ-component of the
/// finite-difference velocities).
#[derive(Debug, Clone)]
pub struct FirstVariationReport {
    pub per_field: Vec<f64>,
    pub max: f64,
}

/// Discrete action on the polygonal interpolant: per-interval chord
/// velocity w = Δq/Δt, frame-split control fit at the interval midpoint
/// (dropping the θ-component along D′), midpoint quadrature. Unlike the
/// sample-stencil quadrature of [`action`], exact discrete minimizers (flat
/// straight lines) are exactly critical for this functional, so it is the
/// right objective to differentiate. The split projection (rather than a
/// Euclidean least-squares fit) matters: projecting along D′ keeps the
/// derivative defect proportional to the constraint multiplier, so the
/// test stays exact to first order wherever the multiplier vanishes, even
/// for frames whose complement is not Euclidean-orthogonal. Returns
/// (action, max relative chord fit residual).
fn chord_action(
    lagr: &ConstrainedLagrangian,
    times: &[f64],
    q: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let problem = lagr.problem();
    let complement = problem.n - problem.k;
    let mut total = 0.0;
    let mut max_rel: f64 = 0.0;
    for i in 0..times.len() - 1 {
        let h = times[i + 1] - times[i];
        let tm = 0.5 * (times[i] + times[i + 1]);
        let qm: Vec<f64> =
            q[i].iter().zip(&q[i + 1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let w: Vec<f64> = q[i + 1].iter().zip(&q[i]).map(|(a, b)| (a - b) / h).collect();
        let split = problem.eval_split(tm, &qm)?;
        let u = split.control_coords(&w);
        let fit = split.from_frame_coords(&u, &vec![0.0; complement]);
        let res = norm2(&sub(&fit, &w));
        max_rel = max_rel.max(res / (1.0 + norm2(&w)));
        total += h * lagr.value(tm, &qm, &u)?;
    }
    Ok((total, max_rel))
}

/// Discrete first-variation test: (𝓛(γ+εv) − 𝓛(γ−εv)) / 2ε per field, with
/// 𝓛 the chord-discretized action (so exact discrete critical curves report
/// zero to roundoff rather than a quadrature-bias floor). Fails with
/// `NonHorizontal` when a perturbed curve's chords leave the distribution
/// by more than 1e−2 (relative) — the variation is then too large for the
/// re-projection to stay meaningful.
pub fn first_variation(
    lagr: &ConstrainedLagrangian,
    curve: &DiscreteCurve,
    basis: &VariationBasis,
    eps: f64,
) -> Result<FirstVariationReport> {
    const PERTURBED_GATE: f64 = 1e-2;
    assert!(
        (1e-6..=1e-2).contains(&eps),
        "variation step must lie in [1e-6, 1e-2], got {eps}"
    );
    let mut per_field = Vec::with_capacity(basis.fields.len());
    for field in &basis.fields {
        assert_eq!(field.len(), curve.len(), "one variation vector per sample");
        let mut actions = [0.0f64; 2];
        for (slot, sign) in [(0usize, 1.0f64), (1, -1.0)] {
            let q: Vec<Vec<f64>> = curve
                .q
                .iter()
                .zip(field)
                .map(|(qs, vs)| qs.iter().zip(vs).map(|(a, b)| a + sign * eps * b).collect())
                .collect();
            let (a, max_rel) = chord_action(lagr, &curve.times, &q)?;
            if max_rel > PERTURBED_GATE {
                return Err(Error::NonHorizontal {
                    max_residual: max_rel,
                    tolerance: PERTURBED_GATE,
                });
            }
            actions[slot] = a;
        }
        per_field.push((actions[0] - actions[1]) / (2.0 * eps));
    }
    let max = per_field.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(FirstVariationReport { per_field, max })
}

/// Piecewise-linear multiplier path λ₀(t), clamped outside its grid.
#[derive(Clone)]
struct MultiplierInterp {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl MultiplierInterp {
    fn at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let idx = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.values[i].clone(),
            Err(i) => i,
        };
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        self.values[idx - 1]
            .iter()
            .zip(&self.values[idx])
            .map(|(a, b)| a * (1.0 - w) + b * w)
            .collect()
    }
}

/// The extended Lagrangian L̃(t, q, w) = L(t, q, u(w)) + ½ η(w)ᵀG′η(w) on
/// unconstrained ambient velocities w, where (u, η) are the frame
/// coordinates of w and G′ is an SPD metric on the complement D′.
/// Optionally carries a multiplier path turning it into
/// L̃_λ = L̃ − λ₀(t)·θ(w), whose Euler–Lagrange equation is satisfied by
/// every constrained extremal (not just those with vanishing complement
/// momentum).
#[derive(Clone)]
pub struct AmbientLagrangian {
    lagrangian: Arc<ConstrainedLagrangian>,
    gprime: Mat,
    multiplier: Option<MultiplierInterp>,
}

/// Build the extended Lagrangian, verifying G′ is symmetric positive
/// definite of size (n−k)×(n−k).
pub fn extended_lagrangian(
    lagr: Arc<ConstrainedLagrangian>,
    gprime: Mat,
) -> Result<AmbientLagrangian> {
    let complement = lagr.problem().n - lagr.problem().k;
    if gprime.rows() != complement || gprime.cols() != complement {
        return Err(Error::DimensionMismatch {
            expected: complement,
            found: gprime.rows(),
            context: "complement metric size".into(),
        });
    }
    if complement > 0 {
        let sym = gprime.add_scaled(-1.0, &gprime.transpose()).max_abs();
        if sym > 1e-10 * (1.0 + gprime.max_abs()) {
            return Err(Error::NotPositiveDefinite {
                detail: format!("complement metric asymmetric by {sym:.3e}"),
            });
        }
        if gprime.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                detail: "complement metric not positive definite".into(),
            });
        }
    }
    Ok(AmbientLagrangian { lagrangian: lagr, gprime, multiplier: None })
}

impl AmbientLagrangian {
    pub fn problem(&self) -> &Arc<ChartProblem> {
        self.lagrangian.problem()
    }

    pub fn lagrangian(&self) -> &Arc<ConstrainedLagrangian> {
        &self.lagrangian
    }

    /// Attach a sampled multiplier path (linearly interpolated), switching
    /// evaluations to L̃_λ = L̃ − λ₀(t)·θ(w).
    pub fn with_multiplier(mut self, times: Vec<f64>, lambda: Vec<Vec<f64>>) -> Self {
        assert_eq!(times.len(), lambda.len(), "one multiplier per sample");
        assert!(!times.is_empty(), "empty multiplier path");
        self.multiplier = Some(MultiplierInterp { times, values: lambda });
        self
    }

    /// Frame coordinates (u, η) of an ambient velocity, plus the frame
    /// matrix for reuse.
    fn split(&self, t: f64, q: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Mat)> {
        let problem = self.problem();
        let frame = problem.frame_matrix(t, q);
        let condition = frame.cond();
        if !(condition < 1e10) {
            return Err(Error::DegenerateFrame { t, condition });
        }
        let coords = frame.solve(w).ok_or(Error::DegenerateFrame { t, condition })?;
        let (u, eta) = coords.split_at(problem.k);
        Ok((u.to_vec(), eta.to_vec(), frame))
    }

    pub fn value(&self, t: f64, q: &[f64], w: &[f64]) -> Result<f64> {
        let (u, eta, _) = self.split(t, q, w)?;
        let mut val = self.lagrangian.value(t, q, &u)?;
        if !eta.is_empty() {
            val += 0.5 * dot(&eta, &self.gprime.matvec(&eta));
        }
        if let Some(interp) = &self.multiplier {
            let lambda = interp.at(t);
            for (a, l) in lambda.iter().enumerate() {
                val -= l * dot(&self.problem().theta_row(a, t, q), w);
            }
        }
        Ok(val)
    }

    /// ∂L̃/∂w = F⁻ᵀ[∂L/∂u; G′η] (− Θᵀλ with a multiplier attached).
    pub fn grad_w(&self, t: f64, q: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let (u, eta, frame) = self.split(t, q, w)?;
        let mut rhs = self.lagrangian.grad_u(t, q, &u)?;
        if !eta.is_empty() {
            rhs.extend(self.gprime.matvec(&eta));
        }
        let mut g = frame
            .transpose()
            .solve(&rhs)
            .ok_or(Error::DegenerateFrame { t, condition: frame.cond() })?;
        if let Some(interp) = &self.multiplier {
            let lambda = interp.at(t);
            for (a, l) in lambda.iter().enumerate() {
                let theta = self.problem().theta_row(a, t, q);
                for (gi, th) in g.iter_mut().zip(&theta) {
                    *gi -= l * th;
                }
            }
        }
        Ok(g)
    }

    /// ∂L̃/∂q with the frame-coordinate correction: since the frame
    /// coordinates of a fixed w move with q, ∂L̃/∂q = ∂L/∂q − D_mixᵀ y with
    /// D_mix = Σuᵢ ∂Xᵢ/∂q + Ση_a ∂X′_a/∂q and y = F⁻ᵀ[∂L/∂u; G′η]
    /// (− λ·∂(θ(w))/∂q with a multiplier attached).
    pub fn grad_q(&self, t: f64, q: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let problem = self.problem().clone();
        let (u, eta, frame) = self.split(t, q, w)?;
        let mut rhs = self.lagrangian.grad_u(t, q, &u)?;
        if !eta.is_empty() {
            rhs.extend(self.gprime.matvec(&eta));
        }
        let y = frame
            .transpose()
            .solve(&rhs)
            .ok_or(Error::DegenerateFrame { t, condition: frame.cond() })?;
        let n = problem.n;
        let mut dmix = Mat::zeros(n, n);
        for i in 0..problem.k {
            dmix = dmix.add_scaled(u[i], &problem.dx_dq(i, t, q)?);
        }
        for (a, &e) in eta.iter().enumerate() {
            dmix = dmix.add_scaled(e, &problem.dxprime_dq(a, t, q)?);
        }
        let mut g = self.lagrangian.grad_q(t, q, &u)?;
        for (gi, corr) in g.iter_mut().zip(dmix.matvec_t(&y)) {
            *gi -= corr;
        }
        if let Some(interp) = &self.multiplier {
            let lambda = interp.at(t);
            for (a, l) in lambda.iter().enumerate() {
                let dtheta = problem.dtheta_dq(a, t, q)?;
                for (gi, corr) in g.iter_mut().zip(dtheta.matvec_t(w)) {
                    *gi -= l * corr;
                }
            }
        }
        Ok(g)
    }
}

/// Interior Euler–Lagrange residuals ‖d/dt(∂L̃/∂q̇) − ∂L̃/∂q‖ of a curve,
/// with the momentum time derivative by centered differences.
#[derive(Debug, Clone)]
pub struct ElReport {
    /// Residual 2-norm per interior sample (indices 1..S−1).
    pub per_sample: Vec<f64>,
    pub max: f64,
}

/// Evaluate the Euler–Lagrange residual of the extended Lagrangian along a
/// curve (≥ 5 samples). Velocities are the curve's finite-difference
/// stencils, so the residual of a true solution decays as O(h²).
pub fn el_residual(ltilde: &AmbientLagrangian, curve: &DiscreteCurve) -> Result<ElReport> {
    let s_count = curve.len();
    assert!(s_count >= 5, "Euler-Lagrange residual needs at least 5 samples");
    let mut momenta = Vec::with_capacity(s_count);
    for s in 0..s_count {
        let w = curve.velocity(s);
        momenta.push(ltilde.grad_w(curve.times[s], &curve.q[s], &w)?);
    }
    let mut per_sample = Vec::with_capacity(s_count - 2);
    let mut max: f64 = 0.0;
    for s in 1..s_count - 1 {
        // The endpoint momenta come from one-sided velocity stencils whose
        // h² error coefficient differs from the interior ones; differencing
        // across that mismatch costs an order of accuracy. So the first and
        // last interior samples use one-sided momentum differences over
        // interior samples only.
        let (i0, i1, i2) = if s == 1 {
            (1, 2, 3)
        } else if s == s_count - 2 {
            (s_count - 2, s_count - 3, s_count - 4)
        } else {
            (s - 1, s, s + 1)
        };
        let (t0, t1, t2) = (curve.times[i0], curve.times[i1], curve.times[i2]);
        let t = curve.times[s];
        // Derivative at t of the quadratic through (t0,m0),(t1,m1),(t2,m2).
        let c0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
        let c1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
        let c2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
        let dm: Vec<f64> = (0..momenta[s].len())
            .map(|r| c0 * momenta[i0][r] + c1 * momenta[i1][r] + c2 * momenta[i2][r])
            .collect();
        let w = curve.velocity(s);
        let gq = ltilde.grad_q(curve.times[s], &curve.q[s], &w)?;
        let res = norm2(&sub(&dm, &gq));
        max = max.max(res);
        per_sample.push(res);
    }
    Ok(ElReport { per_sample, max })
}

/// The recovered constraint multiplier along a phase path, with a
/// smoothness diagnostic.
#[derive(Debug, Clone)]
pub struct MultiplierPath {
    /// λ₀ per sample, each of length n−k.
    pub lambda: Vec<Vec<f64>>,
    /// Max centered second difference ‖λ(s+1) − 2λ(s) + λ(s−1)‖∞ — a C¹
    /// plausibility indicator (small means no kinks at the grid scale).
    pub max_second_difference: f64,
}

/// Solve λ₀·θ(X′ⱼ) = −p·X′ⱼ per sample: the multiplier that cancels the
/// complement components of the covector, making p + λ₀θ vanish on D′.
pub fn recover_multiplier(problem: &ChartProblem, path: &PhasePath) -> Result<MultiplierPath> {
    let complement = problem.n - problem.k;
    let mut lambda = Vec::with_capacity(path.len());
    for s in 0..path.len() {
        if complement == 0 {
            lambda.push(Vec::new());
            continue;
        }
        let t = path.times[s];
        let q = &path.q[s];
        let m = Mat::from_fn(complement, complement, |j, a| {
            dot(&problem.theta_row(a, t, q), &problem.xprime(j, t, q))
        });
        let rhs: Vec<f64> =
            (0..complement).map(|j| -dot(&path.p[s], &problem.xprime(j, t, q))).collect();
        let condition = m.cond();
        if !(condition < 1e10) {
            return Err(Error::DegenerateFrame { t, condition });
        }
        let l = m.solve(&rhs).ok_or(Error::DegenerateFrame { t, condition })?;
        lambda.push(l);
    }
    let mut max_second_difference: f64 = 0.0;
    for s in 1..path.len().saturating_sub(1) {
        let dd: Vec<f64> = (0..complement)
            .map(|a| lambda[s + 1][a] - 2.0 * lambda[s][a] + lambda[s - 1][a])
            .collect();
        max_second_difference = max_second_difference.max(norm_inf(&dd));
    }
    Ok(MultiplierPath { lambda, max_second_difference })
}
