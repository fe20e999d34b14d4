//! Fiberwise Legendre transform: energy function, fiber derivative,
//! numerical inversion by Newton, hyper-regularity diagnostics, and the
//! involution check Z** = Z.
//!
//! A [`FiberMap`] is a scalar function on the fibers of a bundle over
//! (t, q); its transform is computed pointwise on demand by inverting the
//! fiber derivative, never tabulated. Flows pass the previous step's fiber
//! point as a warm start; cold calls fall back to a deterministic set of
//! restarts and use the spread of converged roots to detect failure of
//! hyper-regularity.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::fd::{fd_gradient_fallible, fd_jacobian};
use crate::numerics::linalg::{axpy, dot, norm2, scale, sub, Mat};
use crate::numerics::newton::{newton_solve_with, NewtonConfig, NewtonOptions};
use crate::numerics::{sample_unit_ball, seeded_rng};

type FiberScalar = Arc<dyn Fn(f64, &[f64], &[f64]) -> Result<f64> + Send + Sync>;
type FiberGradient = Arc<dyn Fn(f64, &[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync>;
type FiberHessian = Arc<dyn Fn(f64, &[f64], &[f64]) -> Result<Mat> + Send + Sync>;

/// Hessian condition beyond which a critical fiber point is treated as a
/// hyper-regularity failure.
const HESSIAN_MAX_CONDITION: f64 = 1e10;

/// Number of deterministic restarts used by cold inversions.
const COLD_RESTARTS: usize = 8;

/// A C² scalar map on the fibers of a bundle over (t, q), with optional
/// analytic fiber gradient and Hessian.
#[derive(Clone)]
pub struct FiberMap {
    dim: usize,
    z: FiberScalar,
    dz: Option<FiberGradient>,
    d2z: Option<FiberHessian>,
}

impl FiberMap {
    /// From an infallible scalar callback.
    pub fn new(dim: usize, z: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FiberMap { dim, z: Arc::new(move |t, q, v| Ok(z(t, q, v))), dz: None, d2z: None }
    }

    /// From a fallible scalar callback (used for numerically-defined maps
    /// such as transforms, whose evaluation is itself a solve).
    pub fn new_fallible(dim: usize, z: FiberScalar) -> Self {
        FiberMap { dim, z, dz: None, d2z: None }
    }

    pub fn with_gradient(
        mut self,
        dz: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dz = Some(Arc::new(move |t, q, v| Ok(dz(t, q, v))));
        self
    }

    pub fn with_gradient_fallible(mut self, dz: FiberGradient) -> Self {
        self.dz = Some(dz);
        self
    }

    pub fn with_hessian(
        mut self,
        d2z: impl Fn(f64, &[f64], &[f64]) -> Mat + Send + Sync + 'static,
    ) -> Self {
        self.d2z = Some(Arc::new(move |t, q, v| Ok(d2z(t, q, v))));
        self
    }

    pub fn with_hessian_fallible(mut self, d2z: FiberHessian) -> Self {
        self.d2z = Some(d2z);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, t: f64, q: &[f64], v: &[f64]) -> Result<f64> {
        debug_assert_eq!(v.len(), self.dim);
        let z = (self.z)(t, q, v)?;
        if !z.is_finite() {
            return Err(Error::NonFiniteEvaluation { at: format!("fiber map at v={v:?}") });
        }
        Ok(z)
    }

    /// Fiber gradient: analytic callback or central differences of `value`.
    pub fn gradient(&self, t: f64, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        if let Some(dz) = &self.dz {
            let g = dz(t, q, v)?;
            if !crate::numerics::linalg::all_finite(&g) {
                return Err(Error::NonFiniteEvaluation {
                    at: format!("fiber gradient at v={v:?}"),
                });
            }
            return Ok(g);
        }
        fd_gradient_fallible(|w| self.value(t, q, w), v)
    }

    /// Fiber Hessian: analytic callback or central differences of the
    /// gradient.
    pub fn hessian(&self, t: f64, q: &[f64], v: &[f64]) -> Result<Mat> {
        if let Some(d2z) = &self.d2z {
            let h = d2z(t, q, v)?;
            if !h.is_finite() {
                return Err(Error::NonFiniteEvaluation {
                    at: format!("fiber Hessian at v={v:?}"),
                });
            }
            return Ok(h);
        }
        fd_jacobian(|w| self.gradient(t, q, w), v, None)
    }

    /// Construction-time sanity check: supplied derivative callbacks must
    /// agree with finite differences at 5 seeded fiber points.
    pub fn spot_check_derivatives(&self, t: f64, q: &[f64], seed: u64) -> Result<()> {
        if self.dz.is_none() && self.d2z.is_none() {
            return Ok(());
        }
        let mut rng = seeded_rng(seed);
        for _ in 0..5 {
            let v = scale(&sample_unit_ball(&mut rng, self.dim), 1.5);
            if let Some(dz) = &self.dz {
                let analytic = dz(t, q, &v)?;
                let numeric = fd_gradient_fallible(|w| self.value(t, q, w), &v)?;
                let err = crate::numerics::linalg::norm_inf(&sub(&analytic, &numeric));
                let tol = 1e-5 * (1.0 + crate::numerics::linalg::norm_inf(&numeric));
                if err > tol {
                    return Err(Error::NotHyperRegular {
                        detail: format!(
                            "fiber gradient callback disagrees with finite differences \
                             by {err:.3e} at v={v:?}"
                        ),
                    });
                }
            }
            if let Some(d2z) = &self.d2z {
                let analytic = d2z(t, q, &v)?;
                let numeric = fd_jacobian(|w| self.gradient(t, q, w), &v, None)?;
                let err = analytic.add_scaled(-1.0, &numeric).max_abs();
                let tol = 1e-5 * (1.0 + numeric.max_abs());
                if err > tol {
                    return Err(Error::NotHyperRegular {
                        detail: format!(
                            "fiber Hessian callback disagrees with finite differences \
                             by {err:.3e} at v={v:?}"
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Energy function E_Z(v) = dZ(v)·v − Z(v).
pub fn energy(z: &FiberMap, t: f64, q: &[f64], v: &[f64]) -> Result<f64> {
    Ok(dot(&z.gradient(t, q, v)?, v) - z.value(t, q, v)?)
}

/// Fiber derivative 𝔽Z(v): the gradient of Z along the fiber, base frozen.
pub fn fiber_derivative(z: &FiberMap, t: f64, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    z.gradient(t, q, v)
}

/// Invert the fiber derivative: find v with 𝔽Z(v) = p.
///
/// With a warm-start guess this is a single Newton run (falling back to the
/// cold path if it fails). Cold calls run Newton from v = 0 and from
/// deterministic restarts in a ball of radius 1 + ‖p‖; finding two distinct
/// roots among them is a hyper-regularity failure (the fiber derivative is
/// not injective), as is a singular fiber Hessian at the root.
pub fn invert_fiber_derivative(
    z: &FiberMap,
    t: f64,
    q: &[f64],
    p: &[f64],
    guess: Option<&[f64]>,
    cfg: &NewtonConfig,
) -> Result<Vec<f64>> {
    debug_assert_eq!(p.len(), z.dim());
    let residual = |v: &[f64]| -> Result<Vec<f64>> { Ok(sub(&z.gradient(t, q, v)?, p)) };
    let jacobian = |v: &[f64]| z.hessian(t, q, v);
    let opts = NewtonOptions { jacobian: Some(&jacobian), line_search_halvings: 0 };

    if let Some(g) = guess {
        if let Ok(sol) = newton_solve_with(residual, g, cfg, &opts) {
            check_hessian_regularity(z, t, q, &sol.x)?;
            return Ok(sol.x);
        }
    }

    // Cold path: collect every root the deterministic starts converge to.
    let mut rng = seeded_rng(0x4c45_4721);
    let radius = 1.0 + norm2(p);
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; z.dim()]];
    for _ in 0..COLD_RESTARTS {
        starts.push(scale(&sample_unit_ball(&mut rng, z.dim()), radius));
    }
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let mut last_err: Option<Error> = None;
    for start in &starts {
        match newton_solve_with(residual, start, cfg, &opts) {
            Ok(sol) => {
                let is_new = roots
                    .iter()
                    .all(|r| norm2(&sub(r, &sol.x)) > 1e-6 * (1.0 + norm2(r)));
                if is_new {
                    roots.push(sol.x);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match roots.len() {
        0 => Err(last_err.unwrap_or(Error::MaxIterations {
            iterations: cfg.max_iterations,
            best_residual: f64::INFINITY,
        })),
        1 => {
            let v = roots.pop().unwrap();
            check_hessian_regularity(z, t, q, &v)?;
            Ok(v)
        }
        count => Err(Error::NotHyperRegular {
            detail: format!(
                "fiber derivative has {count} distinct preimages of p={p:?} \
                 (found across restarts)"
            ),
        }),
    }
}

fn check_hessian_regularity(z: &FiberMap, t: f64, q: &[f64], v: &[f64]) -> Result<()> {
    let condition = z.hessian(t, q, v)?.cond();
    if !(condition < HESSIAN_MAX_CONDITION) {
        return Err(Error::NotHyperRegular {
            detail: format!("singular fiber Hessian at v={v:?} (condition {condition:.3e})"),
        });
    }
    Ok(())
}

/// Legendre transform at one dual point: returns (Z*(p), v = 𝔽Z⁻¹(p)).
pub fn legendre_transform(
    z: &FiberMap,
    t: f64,
    q: &[f64],
    p: &[f64],
    guess: Option<&[f64]>,
    cfg: &NewtonConfig,
) -> Result<(f64, Vec<f64>)> {
    let v = invert_fiber_derivative(z, t, q, p, guess, cfg)?;
    // E_Z(v) = dZ(v)·v − Z(v) = p·v − Z(v) at the solution; using p avoids
    // re-evaluating the gradient.
    let value = dot(p, &v) - z.value(t, q, &v)?;
    Ok((value, v))
}

/// The transform as a bundle map: Z* as a [`FiberMap`] on the dual fiber
/// plus the mutually inverse fiber-derivative maps.
pub struct LegendreResult {
    /// Z* with analytic dual gradient dZ*(p) = 𝔽Z⁻¹(p) and Hessian
    /// d²Z*(p) = d²Z(v)⁻¹.
    pub zstar: FiberMap,
    z: FiberMap,
    cfg: NewtonConfig,
}

/// Build the full transform of a fiber map. Z* evaluations solve the
/// inversion on demand (cold, deterministic), so they are self-contained.
pub fn transform(z: &FiberMap, cfg: &NewtonConfig) -> LegendreResult {
    let zstar_value = {
        let z = z.clone();
        let cfg = *cfg;
        move |t: f64, q: &[f64], p: &[f64]| -> Result<f64> {
            legendre_transform(&z, t, q, p, None, &cfg).map(|(value, _)| value)
        }
    };
    let zstar_grad = {
        let z = z.clone();
        let cfg = *cfg;
        move |t: f64, q: &[f64], p: &[f64]| -> Result<Vec<f64>> {
            invert_fiber_derivative(&z, t, q, p, None, &cfg)
        }
    };
    let zstar_hess = {
        let z = z.clone();
        let cfg = *cfg;
        move |t: f64, q: &[f64], p: &[f64]| -> Result<Mat> {
            let v = invert_fiber_derivative(&z, t, q, p, None, &cfg)?;
            z.hessian(t, q, &v)?.inverse().ok_or_else(|| Error::NotHyperRegular {
                detail: format!("fiber Hessian not invertible at v={v:?}"),
            })
        }
    };
    let zstar = FiberMap::new_fallible(z.dim(), Arc::new(zstar_value))
        .with_gradient_fallible(Arc::new(zstar_grad))
        .with_hessian_fallible(Arc::new(zstar_hess));
    LegendreResult { zstar, z: z.clone(), cfg: *cfg }
}

impl LegendreResult {
    /// 𝔽Z: primal fiber point to dual.
    pub fn forward(&self, t: f64, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        fiber_derivative(&self.z, t, q, v)
    }

    /// 𝔽Z⁻¹ = 𝔽Z*: dual fiber point back to primal (cold solve).
    pub fn inverse(&self, t: f64, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        invert_fiber_derivative(&self.z, t, q, p, None, &self.cfg)
    }

    /// Warm-started inverse.
    pub fn inverse_from(&self, t: f64, q: &[f64], p: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        invert_fiber_derivative(&self.z, t, q, p, Some(guess), &self.cfg)
    }
}

/// Max |Z**(v) − Z(v)| over the given fiber points: the double transform
/// must reproduce the original map.
pub fn involution_check(
    z: &FiberMap,
    t: f64,
    q: &[f64],
    samples: &[Vec<f64>],
    cfg: &NewtonConfig,
) -> Result<f64> {
    let result = transform(z, cfg);
    let mut max_dev: f64 = 0.0;
    for v in samples {
        let p = fiber_derivative(z, t, q, v)?;
        // Z**(v) via the transform of Z*, warm-started at the forward image
        // so the outer solve starts from the analytically-correct point.
        let (zdd, _) = legendre_transform(&result.zstar, t, q, v, Some(&p), cfg)?;
        max_dev = max_dev.max((zdd - z.value(t, q, v)?).abs());
    }
    Ok(max_dev)
}

/// Max deviations of 𝔽Z*∘𝔽Z and 𝔽Z∘𝔽Z* from the identity over samples
/// (primal points; duals are their forward images).
pub fn mutual_inversion_check(
    z: &FiberMap,
    t: f64,
    q: &[f64],
    samples: &[Vec<f64>],
    cfg: &NewtonConfig,
) -> Result<f64> {
    let result = transform(z, cfg);
    let mut max_dev: f64 = 0.0;
    for v in samples {
        let p = result.forward(t, q, v)?;
        let v_back = result.inverse(t, q, &p)?;
        max_dev = max_dev.max(norm2(&sub(&v_back, v)));
        // And the dual direction: 𝔽Z* then 𝔽Z.
        let v_dual = result.zstar.gradient(t, q, &p)?;
        let p_back = result.forward(t, q, &v_dual)?;
        max_dev = max_dev.max(norm2(&sub(&p_back, &p)));
    }
    Ok(max_dev)
}

/// Max deviation of the envelope identity ∂Z*/∂q|_p = −∂Z/∂q|_{v=𝔽Z⁻¹(p)}
/// over samples, both sides by central differences in q.
pub fn envelope_check(
    z: &FiberMap,
    t: f64,
    q: &[f64],
    samples: &[Vec<f64>],
    cfg: &NewtonConfig,
) -> Result<f64> {
    let result = transform(z, cfg);
    let mut max_dev: f64 = 0.0;
    for v in samples {
        let p = result.forward(t, q, v)?;
        let zstar = &result.zstar;
        let lhs = fd_gradient_fallible(|y| zstar.value(t, y, &p), q)?;
        // The inverse image moves with q; v must be re-solved inside the
        // stencil, which zstar.value does. The right side freezes v.
        let v_solved = result.inverse(t, q, &p)?;
        let rhs = fd_gradient_fallible(|y| z.value(t, y, &v_solved), q)?;
        max_dev = max_dev.max(crate::numerics::linalg::norm_inf(&axpy(&lhs, 1.0, &rhs)));
    }
    Ok(max_dev)
}
