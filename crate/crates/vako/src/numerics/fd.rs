//! Central finite differences for gradients and Jacobians.
//!
//! Used wherever a derivative callback is absent. The default step is
//! 1e−6·(1+|xᵢ|) componentwise, balancing truncation against roundoff for
//! doubles; callers with smoother or rougher functions can pass their own.

use crate::error::{Error, Result};
use crate::numerics::linalg::Mat;

/// Componentwise default step 1e−6·(1+|x|).
pub fn default_step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

fn non_finite(point: &[f64]) -> Error {
    Error::NonFiniteEvaluation { at: format!("stencil point {point:?}") }
}

/// Central-difference gradient with a fixed step `h` in every coordinate:
/// (f(x+heᵢ) − f(x−heᵢ)) / (2h).
pub fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    assert!(h > 0.0, "finite-difference step must be positive");
    fd_gradient_impl(|y| Ok(f(y)), x, |_| h)
}

/// Central-difference gradient with the default scaled step per coordinate.
pub fn fd_gradient_scaled(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Result<Vec<f64>> {
    fd_gradient_impl(|y| Ok(f(y)), x, default_step)
}

/// As [`fd_gradient_scaled`] but for fallible integrands (evaluation errors
/// propagate instead of poisoning the stencil).
pub fn fd_gradient_fallible(
    f: impl FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
) -> Result<Vec<f64>> {
    fd_gradient_impl(f, x, default_step)
}

fn fd_gradient_impl(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    step: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(x.len());
    let mut point = x.to_vec();
    for i in 0..x.len() {
        let h = step(x[i]);
        point[i] = x[i] + h;
        let fp = f(&point)?;
        point[i] = x[i] - h;
        let fm = f(&point)?;
        point[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(non_finite(&point));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector map, column by column. The step
/// in coordinate i is `base_step.unwrap_or(1e-6) * (1 + |xᵢ|)`.
pub fn fd_jacobian(
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    base_step: Option<f64>,
) -> Result<Mat> {
    let base = base_step.unwrap_or(1e-6);
    let mut point = x.to_vec();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    let mut out_dim = None;
    for i in 0..x.len() {
        let h = base * (1.0 + x[i].abs());
        point[i] = x[i] + h;
        let fp = f(&point)?;
        point[i] = x[i] - h;
        let fm = f(&point)?;
        point[i] = x[i];
        if !crate::numerics::linalg::all_finite(&fp) || !crate::numerics::linalg::all_finite(&fm) {
            return Err(non_finite(&point));
        }
        out_dim.get_or_insert(fp.len());
        columns.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let rows = out_dim.unwrap_or(0);
    Ok(Mat::from_fn(rows, x.len(), |r, c| columns[c][r]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::{dot, Mat};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gradient_of_square() {
        let g = fd_gradient(|x| x[0] * x[0], &[2.0], 1e-5).unwrap();
        assert_abs_diff_eq!(g[0], 4.0, epsilon = 1e-9);
    }

    #[test]
    fn gradient_of_constant_is_exactly_zero() {
        let g = fd_gradient(|_| 7.5, &[0.3, -1.2, 9.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_stencil_is_reported() {
        let err = fd_gradient(|x| x[0].ln(), &[1e-7], 1e-5).unwrap_err();
        assert!(matches!(err, crate::error::Error::NonFiniteEvaluation { .. }));
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let a2 = a.clone();
        let j = fd_jacobian(move |x| Ok(a2.matvec(x)), &[0.7, -0.2], None).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(j[(r, c)], a[(r, c)], epsilon = 1e-9);
            }
        }
    }

    proptest! {
        // Gradient of ½xᵀAx + bᵀx matches Ax + b for random symmetric A.
        #[test]
        fn quadratic_form_gradient(
            dim in 1usize..=6,
            seed in proptest::collection::vec(-2.0..2.0f64, 6 * 6 + 6 + 6),
        ) {
            let mut a = Mat::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let raw = seed[i * dim + j];
                    let rawt = seed[j * dim + i];
                    a[(i, j)] = 0.5 * (raw + rawt);
                }
            }
            let b = &seed[36..36 + dim];
            let x = &seed[42..42 + dim];
            let (ac, bc) = (a.clone(), b.to_vec());
            let g = fd_gradient(
                move |y| 0.5 * dot(y, &ac.matvec(y)) + dot(&bc, y),
                x,
                1e-5,
            ).unwrap();
            let expected: Vec<f64> = a
                .matvec(x)
                .iter()
                .zip(b)
                .map(|(ax, bi)| ax + bi)
                .collect();
            for (gi, ei) in g.iter().zip(&expected) {
                prop_assert!((gi - ei).abs() < 1e-6);
            }
        }
    }
}
