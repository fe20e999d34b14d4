//! Abnormal-extremal machinery: covector transport along a horizontal
//! curve, detection of singular curves (nonzero annihilator-valued
//! characteristics vanishing on the endpoint tangent spaces), a
//! finite-difference endpoint-map oracle for cross-validation, and a
//! pointwise nondegeneracy test of the symplectic form on the annihilator
//! bundle.

use crate::error::{Error, Result};
use crate::geometry::{ChartProblem, DiscreteCurve, Submanifold};
use crate::numerics::linalg::{dot, norm2, nullspace, orthonormalize, sub, Mat};
use crate::variation::recover_controls;

/// A basis of characteristics along a curve: covector paths p(t) that
/// annihilate the distribution at every sample and solve the transport
/// equation ṗ = −Σᵢ uᵢ (∂Xᵢ/∂q)ᵀ p.
#[derive(Clone)]
pub struct CharacteristicBasis {
    /// The base horizontal curve, with the controls used for transport.
    pub curve: DiscreteCurve,
    /// Covector paths: basis[j][s] is the j-th characteristic at sample s.
    pub basis: Vec<Vec<Vec<f64>>>,
    /// Max over samples, basis paths, and frame fields of |p(t)·Xᵢ(t,γ(t))|.
    pub constraint_residuals: f64,
}

/// Controls for a curve: attached ones when present, otherwise a
/// least-squares fit; either way the reproduction of the curve's velocities
/// is gated at 1e−6.
fn consistent_controls(
    problem: &ChartProblem,
    curve: &DiscreteCurve,
) -> Result<Vec<Vec<f64>>> {
    const CONSISTENCY_GATE: f64 = 1e-6;
    let controls = match &curve.u {
        Some(u) => u.clone(),
        None => recover_controls(problem, curve)?.0,
    };
    let mut max_residual: f64 = 0.0;
    for s in 0..curve.len() {
        let v = curve.velocity(s);
        let mut fit = vec![0.0; problem.n];
        for (i, ui) in controls[s].iter().enumerate() {
            let xi = problem.x(i, curve.times[s], &curve.q[s]);
            for (f, &c) in fit.iter_mut().zip(&xi) {
                *f += ui * c;
            }
        }
        max_residual = max_residual.max(norm2(&sub(&fit, &v)));
    }
    if max_residual > CONSISTENCY_GATE {
        return Err(Error::InconsistentControls { max_residual });
    }
    Ok(controls)
}

/// System matrix A(t) = −Σᵢ uᵢ (∂Xᵢ/∂q)ᵀ of the covector transport.
fn transport_generator(
    problem: &ChartProblem,
    t: f64,
    q: &[f64],
    u: &[f64],
) -> Result<Mat> {
    let n = problem.n;
    let mut a = Mat::zeros(n, n);
    for (i, &ui) in u.iter().enumerate() {
        a = a.add_scaled(-ui, &problem.dx_dq(i, t, q)?.transpose());
    }
    Ok(a)
}

/// Fundamental matrices Φ(tₛ) of ṗ = −Σᵢ uᵢ(t) (∂Xᵢ/∂q)ᵀ p along the curve,
/// Φ(t₀) = I, integrated column-wise by RK4 with (q, u) linearly
/// interpolated between samples. Controls must reproduce the curve's
/// velocities within 1e−6 (attached or least-squares recovered).
pub fn transport_covectors(
    problem: &ChartProblem,
    curve: &DiscreteCurve,
) -> Result<Vec<Mat>> {
    let controls = consistent_controls(problem, curve)?;
    let n = problem.n;
    let mut phis = Vec::with_capacity(curve.len());
    let mut phi = Mat::identity(n);
    phis.push(phi.clone());
    for s in 0..curve.len() - 1 {
        let h = curve.times[s + 1] - curve.times[s];
        let t_mid = 0.5 * (curve.times[s] + curve.times[s + 1]);
        let q_mid: Vec<f64> = curve.q[s]
            .iter()
            .zip(&curve.q[s + 1])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let u_mid: Vec<f64> = controls[s]
            .iter()
            .zip(&controls[s + 1])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let a0 = transport_generator(problem, curve.times[s], &curve.q[s], &controls[s])?;
        let am = transport_generator(problem, t_mid, &q_mid, &u_mid)?;
        let a1 =
            transport_generator(problem, curve.times[s + 1], &curve.q[s + 1], &controls[s + 1])?;
        let k1 = a0.matmul(&phi);
        let k2 = am.matmul(&phi.add_scaled(0.5 * h, &k1));
        let k3 = am.matmul(&phi.add_scaled(0.5 * h, &k2));
        let k4 = a1.matmul(&phi.add_scaled(h, &k3));
        phi = phi
            .add_scaled(h / 6.0, &k1)
            .add_scaled(h / 3.0, &k2)
            .add_scaled(h / 3.0, &k3)
            .add_scaled(h / 6.0, &k4);
        phis.push(phi.clone());
    }
    Ok(phis)
}

/// Outcome of the abnormality test along a curve with endpoint submanifolds.
pub enum AbnormalVerdict {
    /// No nonzero characteristic vanishes on both endpoint tangent spaces:
    /// the curve is a regular point of the constrained endpoint map.
    Regular,
    /// The curve is singular; carries a basis of the characteristics.
    Singular(CharacteristicBasis),
}

/// Decide whether the curve is singular between `start` and `end`: assemble
/// the linear system on p(a) — vanishing on T_P at a, annihilating every
/// frame field at every sample after transport, and vanishing on T_Q at b —
/// and test its nullspace at the given relative tolerance (1e−7 is the
/// calibrated default).
pub fn abnormal_test(
    problem: &ChartProblem,
    curve: &DiscreteCurve,
    start: &Submanifold,
    end: &Submanifold,
    tol: f64,
) -> Result<AbnormalVerdict> {
    let phis = transport_covectors(problem, curve)?;
    let controls = consistent_controls(problem, curve)?;
    let s_count = curve.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for v in start.tangent_basis(&curve.q[0])? {
        rows.push(v);
    }
    // p(t)·Xᵢ = p(a)·(Φ(t)ᵀ Xᵢ): one row per sample and frame field.
    for s in 0..s_count {
        for i in 0..problem.k {
            let xi = problem.x(i, curve.times[s], &curve.q[s]);
            rows.push(phis[s].matvec_t(&xi));
        }
    }
    for v in end.tangent_basis(&curve.q[s_count - 1])? {
        rows.push(phis[s_count - 1].matvec_t(&v));
    }
    let m = Mat::from_rows(&rows);
    let kernel = nullspace(&m, tol);
    if kernel.is_empty() {
        return Ok(AbnormalVerdict::Regular);
    }
    let mut basis = Vec::with_capacity(kernel.len());
    let mut constraint_residuals: f64 = 0.0;
    for pa in &kernel {
        let mut path = Vec::with_capacity(s_count);
        for s in 0..s_count {
            let ps = phis[s].matvec(pa);
            for i in 0..problem.k {
                let xi = problem.x(i, curve.times[s], &curve.q[s]);
                constraint_residuals = constraint_residuals.max(dot(&ps, &xi).abs());
            }
            path.push(ps);
        }
        basis.push(path);
    }
    let curve = DiscreteCurve::new(curve.times.clone(), curve.q.clone()).with_controls(controls);
    Ok(AbnormalVerdict::Singular(CharacteristicBasis {
        curve,
        basis,
        constraint_residuals,
    }))
}

/// Endpoint of γ̇ = Σᵢ uᵢ(t) Xᵢ(t, γ) from q0 by RK4 on the curve's grid,
/// with controls linearly interpolated and perturbed by `bump` (a control
/// index and a function of t added to that control).
fn reintegrate_endpoint(
    problem: &ChartProblem,
    curve: &DiscreteCurve,
    controls: &[Vec<f64>],
    q0: &[f64],
    bump: Option<(usize, &dyn Fn(f64) -> f64)>,
) -> Result<Vec<f64>> {
    let eval = |t: f64, q: &[f64], u_base: &[f64]| -> Result<Vec<f64>> {
        let mut u = u_base.to_vec();
        if let Some((i, f)) = bump {
            u[i] += f(t);
        }
        let mut v = vec![0.0; problem.n];
        for (i, &ui) in u.iter().enumerate() {
            let xi = problem.x(i, t, q);
            for (vc, &c) in v.iter_mut().zip(&xi) {
                *vc += ui * c;
            }
        }
        Ok(v)
    };
    let mut q = q0.to_vec();
    for s in 0..curve.len() - 1 {
        let h = curve.times[s + 1] - curve.times[s];
        let t0 = curve.times[s];
        let t_mid = t0 + 0.5 * h;
        let u_mid: Vec<f64> = controls[s]
            .iter()
            .zip(&controls[s + 1])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let k1 = eval(t0, &q, &controls[s])?;
        let q2: Vec<f64> = q.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = eval(t_mid, &q2, &u_mid)?;
        let q3: Vec<f64> = q.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = eval(t_mid, &q3, &u_mid)?;
        let q4: Vec<f64> = q.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = eval(curve.times[s + 1], &q4, &controls[s + 1])?;
        for (qc, (((a, b), c), d)) in
            q.iter_mut().zip(k1.iter().zip(&k2).zip(&k3).zip(&k4))
        {
            *qc += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        }
    }
    Ok(q)
}

/// Brute-force annihilator of the endpoint-map image: perturb each control
/// along 4 interior sine bumps and the initial point along the start
/// submanifold's tangent directions, finite-difference the re-integrated
/// endpoint (central, ε = 1e−5), and return the nullspace of the resulting
/// Jacobian's transpose at relative tolerance 1e−6. Empty means the
/// endpoint map is a submersion onto the constrained directions.
pub fn endpoint_map_oracle(
    problem: &ChartProblem,
    curve: &DiscreteCurve,
    start: &Submanifold,
) -> Result<Vec<Vec<f64>>> {
    const BUMPS_PER_CONTROL: usize = 4;
    const FD_EPS: f64 = 1e-5;
    const ORACLE_TOL: f64 = 1e-6;
    let controls = consistent_controls(problem, curve)?;
    let (a, b) = (curve.t_start(), curve.t_end());
    let span = b - a;
    let q0 = curve.q[0].clone();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for i in 0..problem.k {
        for m in 1..=BUMPS_PER_CONTROL {
            let omega = m as f64 * std::f64::consts::PI / span;
            for_sign_pair(&mut columns, |sign| {
                let bump = move |t: f64| sign * FD_EPS * (omega * (t - a)).sin();
                reintegrate_endpoint(problem, curve, &controls, &q0, Some((i, &bump)))
            })?;
        }
    }
    for dir in start.tangent_basis(&q0)? {
        for_sign_pair(&mut columns, |sign| {
            let q0_shift: Vec<f64> =
                q0.iter().zip(&dir).map(|(qc, d)| qc + sign * FD_EPS * d).collect();
            reintegrate_endpoint(problem, curve, &controls, &q0_shift, None)
        })?;
    }
    let jacobian = Mat::from_columns(&columns);
    Ok(nullspace(&jacobian.transpose(), ORACLE_TOL))
}

/// Evaluate a perturbation at ±ε and push the central difference as a new
/// Jacobian column.
fn for_sign_pair(
    columns: &mut Vec<Vec<f64>>,
    mut endpoint: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<()> {
    const FD_EPS: f64 = 1e-5;
    let plus = endpoint(1.0)?;
    let minus = endpoint(-1.0)?;
    columns.push(
        plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * FD_EPS)).collect(),
    );
    Ok(())
}

/// Largest principal angle (radians) between the spans of two equal-sized
/// families of vectors.
pub fn max_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let qa = orthonormalize(a, 1e-12);
    let qb = orthonormalize(b, 1e-12);
    assert_eq!(qa.len(), qb.len(), "subspace dimensions differ");
    if qa.is_empty() {
        return 0.0;
    }
    let cross = Mat::from_fn(qa.len(), qb.len(), |i, j| dot(&qa[i], &qb[j]));
    let sigma = cross.svd().sigma;
    let smin = sigma.last().copied().unwrap_or(0.0);
    smin.clamp(-1.0, 1.0).acos()
}

/// A point of the annihilator bundle in graph coordinates: base point and
/// the coefficients ρ of p = Σₐ ραθᵃ(q).
pub struct ContactSample {
    pub t: f64,
    pub q: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Pointwise verdict on the symplectic form restricted to the annihilator
/// bundle.
pub enum ContactVerdict {
    NondegenerateOnAnnihilator,
    /// The restriction drops rank; carries a basis of the kernel as ambient
    /// (δq, δp) directions.
    Degenerate { directions: Vec<Vec<f64>> },
}

/// Test ω = Σ dqᵢ∧dpᵢ restricted to the tangent of the annihilator bundle
/// at each sample: tangent vectors are (e_j, Σₐ ρₐ ∂θᵃ/∂q · e_j) for base
/// directions and (0, θᵃ) for fiber directions; the verdict is rank
/// fullness of the skew pairing matrix at the given relative tolerance.
/// Full-rank distributions (n = k) have an empty annihilator and report
/// nondegenerate by convention.
pub fn contact_test(
    problem: &ChartProblem,
    samples: &[ContactSample],
    tol: f64,
) -> Result<Vec<ContactVerdict>> {
    let n = problem.n;
    let complement = n - problem.k;
    let mut verdicts = Vec::with_capacity(samples.len());
    for sample in samples {
        if complement == 0 {
            verdicts.push(ContactVerdict::NondegenerateOnAnnihilator);
            continue;
        }
        assert_eq!(sample.rho.len(), complement, "one ρ coefficient per annihilator row");
        assert!(
            norm2(&sample.rho) > 0.0,
            "the annihilator zero section is excluded from the nondegeneracy claim"
        );
        // Tangent columns of the bundle in ambient (δq, δp) coordinates.
        let mut tangent: Vec<Vec<f64>> = Vec::with_capacity(n + complement);
        let dthetas: Vec<Mat> = (0..complement)
            .map(|a| problem.dtheta_dq(a, sample.t, &sample.q))
            .collect::<Result<_>>()?;
        for j in 0..n {
            let mut col = vec![0.0; 2 * n];
            col[j] = 1.0;
            for (a, da) in dthetas.iter().enumerate() {
                for r in 0..n {
                    col[n + r] += sample.rho[a] * da[(r, j)];
                }
            }
            tangent.push(col);
        }
        for a in 0..complement {
            let theta = problem.theta_row(a, sample.t, &sample.q);
            let mut col = vec![0.0; 2 * n];
            col[n..].copy_from_slice(&theta);
            tangent.push(col);
        }
        // ω((v¹,w¹),(v²,w²)) = v¹·w² − w¹·v².
        let dim = tangent.len();
        let pairing = Mat::from_fn(dim, dim, |alpha, beta| {
            let (va, wa) = tangent[alpha].split_at(n);
            let (vb, wb) = tangent[beta].split_at(n);
            dot(va, wb) - dot(wa, vb)
        });
        if pairing.rank(tol) == dim {
            verdicts.push(ContactVerdict::NondegenerateOnAnnihilator);
        } else {
            let kernel = nullspace(&pairing, tol);
            let directions = kernel
                .iter()
                .map(|c| {
                    let mut dir = vec![0.0; 2 * n];
                    for (coeff, col) in c.iter().zip(&tangent) {
                        for (d, &x) in dir.iter_mut().zip(col) {
                            *d += coeff * x;
                        }
                    }
                    dir
                })
                .collect();
            verdicts.push(ContactVerdict::Degenerate { directions });
        }
    }
    Ok(verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use crate::problems::builtin;

    fn line_curve(samples: usize, k: usize) -> DiscreteCurve {
        let times: Vec<f64> =
            (0..samples).map(|s| s as f64 / (samples - 1) as f64).collect();
        let q = times.iter().map(|&t| vec![t, 0.0, 0.0]).collect();
        let mut u0 = vec![0.0; k];
        u0[0] = 1.0;
        let u = vec![u0; samples];
        DiscreteCurve::new(times, q).with_controls(u)
    }

    #[test]
    fn transport_matches_matrix_exponential_on_heisenberg_line() {
        // Along (t,0,0) with u=(1,0) the generator A = −(∂X₁/∂q)ᵀ is
        // constant and nilpotent, so Φ(t) = I + tA with A[1][2] = 1/2.
        let b = builtin("heisenberg").unwrap();
        let curve = line_curve(201, 2);
        let phis = transport_covectors(&b.problem, &curve).unwrap();
        for (s, phi) in phis.iter().enumerate() {
            let t = curve.times[s];
            let mut expected = Mat::identity(3);
            expected[(1, 2)] = 0.5 * t;
            let diff = phi.add_scaled(-1.0, &expected).max_abs();
            assert!(diff <= 1e-9, "Φ({t}) off by {diff:.3e}");
        }
    }

    #[test]
    fn transport_is_identity_on_the_martinet_singular_line() {
        let b = builtin("martinet").unwrap();
        let curve = line_curve(101, 2);
        let phis = transport_covectors(&b.problem, &curve).unwrap();
        for phi in &phis {
            let diff = phi.add_scaled(-1.0, &Mat::identity(3)).max_abs();
            assert!(diff <= 1e-12, "Φ off identity by {diff:.3e}");
        }
    }

    #[test]
    fn transport_rejects_inconsistent_controls() {
        let b = builtin("heisenberg").unwrap();
        let mut curve = line_curve(101, 2);
        if let Some(u) = &mut curve.u {
            for us in u.iter_mut() {
                us[1] = 0.3;
            }
        }
        let err = match transport_covectors(&b.problem, &curve) {
            Err(e) => e,
            Ok(_) => panic!("inconsistent controls accepted"),
        };
        assert!(matches!(err, Error::InconsistentControls { .. }));
    }

    #[test]
    fn martinet_singular_line_is_detected_with_a_one_dimensional_basis() {
        let b = builtin("martinet").unwrap();
        let curve = line_curve(101, 2);
        let p = Submanifold::Point(vec![0.0; 3]);
        let q = Submanifold::Point(vec![1.0, 0.0, 0.0]);
        let verdict = abnormal_test(&b.problem, &curve, &p, &q, 1e-7).unwrap();
        let basis = match verdict {
            AbnormalVerdict::Singular(basis) => basis,
            AbnormalVerdict::Regular => panic!("Martinet singular line reported Regular"),
        };
        assert_eq!(basis.basis.len(), 1);
        assert!(basis.constraint_residuals <= 1e-10);
        for ps in &basis.basis[0] {
            // Characteristic stays along (0,0,c).
            assert!(ps[0].abs() <= 1e-10 && ps[1].abs() <= 1e-10);
            assert!(ps[2].abs() >= 1e-3);
        }
        // Zero-or-nowhere-zero: norms along the grid stay comparable.
        let norms: Vec<f64> = basis.basis[0].iter().map(|p| norm2(p)).collect();
        let (lo, hi) = norms
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        assert!(lo / hi > 1e-6, "characteristic norm ratio {lo:.3e}/{hi:.3e}");
    }

    #[test]
    fn heisenberg_nonconstant_curves_are_regular() {
        let b = builtin("heisenberg").unwrap();
        let curve = line_curve(101, 2);
        let p = Submanifold::Point(vec![0.0; 3]);
        let q = Submanifold::Point(vec![1.0, 0.0, 0.0]);
        let verdict = abnormal_test(&b.problem, &curve, &p, &q, 1e-7).unwrap();
        assert!(matches!(verdict, AbnormalVerdict::Regular));
    }

    #[test]
    fn full_rank_distributions_are_always_regular() {
        let b = builtin("flat-3").unwrap();
        let curve = line_curve(51, 3);
        let p = Submanifold::Point(vec![0.0; 3]);
        let q = Submanifold::Point(vec![1.0, 0.0, 0.0]);
        let verdict = abnormal_test(&b.problem, &curve, &p, &q, 1e-7).unwrap();
        assert!(matches!(verdict, AbnormalVerdict::Regular));
    }

    #[test]
    fn verdict_is_invariant_under_grid_reparametrization() {
        let b = builtin("martinet").unwrap();
        // Same singular line sampled on a quadratically stretched grid.
        let times: Vec<f64> = (0..101).map(|s| (s as f64 / 100.0).powi(2)).collect();
        let q: Vec<Vec<f64>> = times.iter().map(|&t| vec![t, 0.0, 0.0]).collect();
        let u = vec![vec![1.0, 0.0]; 101];
        let curve = DiscreteCurve::new(times, q).with_controls(u);
        let p = Submanifold::Point(vec![0.0; 3]);
        let qe = Submanifold::Point(vec![1.0, 0.0, 0.0]);
        let verdict = abnormal_test(&b.problem, &curve, &p, &qe, 1e-7).unwrap();
        assert!(matches!(verdict, AbnormalVerdict::Singular(_)));
    }

    #[test]
    fn oracle_agrees_with_the_transport_basis_on_martinet() {
        let b = builtin("martinet").unwrap();
        let curve = line_curve(201, 2);
        let p = Submanifold::Point(vec![0.0; 3]);
        let q = Submanifold::Point(vec![1.0, 0.0, 0.0]);
        let annihilator = endpoint_map_oracle(&b.problem, &curve, &p).unwrap();
        assert_eq!(annihilator.len(), 1);
        let basis = match abnormal_test(&b.problem, &curve, &p, &q, 1e-7).unwrap() {
            AbnormalVerdict::Singular(basis) => basis,
            AbnormalVerdict::Regular => panic!("expected Singular"),
        };
        let at_end: Vec<Vec<f64>> =
            basis.basis.iter().map(|path| path.last().unwrap().clone()).collect();
        let angle = max_principal_angle(&annihilator, &at_end);
        assert!(angle <= 1e-3, "principal angle {angle:.3e}");
    }

    #[test]
    fn oracle_is_empty_where_the_endpoint_map_submerses() {
        let heis = builtin("heisenberg").unwrap();
        let curve = line_curve(201, 2);
        let p = Submanifold::Point(vec![0.0; 3]);
        assert!(endpoint_map_oracle(&heis.problem, &curve, &p).unwrap().is_empty());
        let flat = builtin("flat-3").unwrap();
        let curve = line_curve(101, 3);
        assert!(endpoint_map_oracle(&flat.problem, &curve, &p).unwrap().is_empty());
    }

    #[test]
    fn heisenberg_annihilator_is_nowhere_degenerate() {
        let b = builtin("heisenberg").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x434f_4e54);
        let samples: Vec<ContactSample> = (0..20)
            .map(|_| ContactSample {
                t: 0.0,
                q: (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
                rho: vec![1.0],
            })
            .collect();
        for verdict in contact_test(&b.problem, &samples, 1e-8).unwrap() {
            assert!(matches!(verdict, ContactVerdict::NondegenerateOnAnnihilator));
        }
    }

    #[test]
    fn martinet_surface_is_the_degeneracy_locus() {
        let b = builtin("martinet").unwrap();
        let samples = vec![
            ContactSample { t: 0.0, q: vec![0.0, 0.0, 0.0], rho: vec![1.0] },
            ContactSample { t: 0.0, q: vec![0.4, 0.0, 0.1], rho: vec![1.0] },
            ContactSample { t: 0.0, q: vec![0.0, 0.3, 0.0], rho: vec![1.0] },
        ];
        let verdicts = contact_test(&b.problem, &samples, 1e-8).unwrap();
        // On y=0 the form degenerates along the x-direction of the base.
        for verdict in &verdicts[..2] {
            let directions = match verdict {
                ContactVerdict::Degenerate { directions } => directions,
                ContactVerdict::NondegenerateOnAnnihilator => {
                    panic!("Martinet surface point reported nondegenerate")
                }
            };
            let x_transport = {
                let mut d = vec![0.0; 6];
                d[0] = 1.0;
                d
            };
            // The x-direction must lie in the kernel span.
            let mut residual = x_transport.clone();
            for dir in orthonormalize(directions, 1e-12) {
                let c = dot(&residual, &dir);
                for (r, d) in residual.iter_mut().zip(&dir) {
                    *r -= c * d;
                }
            }
            assert!(norm2(&residual) <= 1e-8, "x-direction not in kernel");
        }
        assert!(matches!(verdicts[2], ContactVerdict::NondegenerateOnAnnihilator));
    }

    #[test]
    fn full_rank_contact_verdict_is_vacuously_nondegenerate() {
        let b = builtin("flat-3").unwrap();
        let samples =
            vec![ContactSample { t: 0.0, q: vec![0.5, -0.5, 0.2], rho: vec![] }];
        let verdicts = contact_test(&b.problem, &samples, 1e-8).unwrap();
        assert!(matches!(verdicts[0], ContactVerdict::NondegenerateOnAnnihilator));
    }

    #[test]
    fn verdict_is_invariant_under_frame_scaling() {
        // Martinet with the frame scaled by c: same distribution, same
        // singular line, controls scaled by 1/c.
        use crate::geometry::{DistributionFrame, ChartProblem};
        let c = 3.7;
        let frame = DistributionFrame {
            x: vec![
                std::sync::Arc::new(move |_t: f64, q: &[f64]| {
                    vec![c, 0.0, c * q[1] * q[1] / 2.0]
                }),
                std::sync::Arc::new(move |_t: f64, _q: &[f64]| vec![0.0, c, 0.0]),
            ],
            xprime: vec![std::sync::Arc::new(|_t: f64, _q: &[f64]| vec![0.0, 0.0, 1.0])],
            theta: vec![std::sync::Arc::new(|_t: f64, q: &[f64]| {
                vec![-q[1] * q[1] / 2.0, 0.0, 1.0]
            })],
            dx_dq: None,
            dtheta_dq: None,
            dxprime_dq: None,
        };
        let problem = ChartProblem::new(3, 2, frame);
        let times: Vec<f64> = (0..101).map(|s| s as f64 / 100.0).collect();
        let q: Vec<Vec<f64>> = times.iter().map(|&t| vec![t, 0.0, 0.0]).collect();
        let u = vec![vec![1.0 / c, 0.0]; 101];
        let curve = DiscreteCurve::new(times, q).with_controls(u);
        let p = Submanifold::Point(vec![0.0; 3]);
        let qe = Submanifold::Point(vec![1.0, 0.0, 0.0]);
        let verdict = abnormal_test(&problem, &curve, &p, &qe, 1e-7).unwrap();
        assert!(matches!(verdict, AbnormalVerdict::Singular(_)));
    }
}
