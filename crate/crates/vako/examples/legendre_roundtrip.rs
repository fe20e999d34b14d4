//! Fiberwise Legendre transform on a non-quadratic convex Lagrangian:
//! build Z(v) = ¼‖v‖⁴ + ½‖v‖², transform it, and verify the classical
//! identities numerically — involution Z** = Z, mutual inversion of the
//! fiber derivatives, and the envelope identity Z(v) + Z*(p) = p·v.

use rand::Rng;
use vako::legendre::{
    envelope_check, involution_check, mutual_inversion_check, transform, FiberMap,
};
use vako::numerics::{seeded_rng, NewtonConfig};

fn main() -> vako::Result<()> {
    // A strictly convex fiber map on a 2-dimensional fiber. Only the value
    // is supplied; gradients and Hessians fall back to finite differences.
    let z = FiberMap::new(2, |_t, _q, v: &[f64]| {
        let s = v[0] * v[0] + v[1] * v[1];
        0.25 * s * s + 0.5 * s
    });

    let cfg = NewtonConfig::default();
    let (t, q) = (0.0, [0.0, 0.0]);

    // The dual map Z* and the two fiber derivatives v ↦ p and p ↦ v.
    let result = transform(&z, &cfg);
    let v = [0.8, -0.5];
    let p = result.forward(t, &q, &v)?;
    let v_back = result.inverse(t, &q, &p)?;
    println!("sample fiber point   v       = [{:+.6}, {:+.6}]", v[0], v[1]);
    println!("fiber derivative     p = FZ(v) = [{:+.6}, {:+.6}]", p[0], p[1]);
    println!("inverse derivative   FZ*(p)  = [{:+.6}, {:+.6}]", v_back[0], v_back[1]);

    let zv = z.value(t, &q, &v)?;
    let zsp = result.zstar.value(t, &q, &p)?;
    let pv = p[0] * v[0] + p[1] * v[1];
    println!("envelope identity    Z(v) + Z*(p) - p·v = {:+.3e}", zv + zsp - pv);

    // Property sweep over a seeded sample cloud.
    let mut rng = seeded_rng(42);
    let samples: Vec<Vec<f64>> =
        (0..200).map(|_| (0..2).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();

    let inv = involution_check(&z, t, &q, &samples, &cfg)?;
    let mut_inv = mutual_inversion_check(&z, t, &q, &samples, &cfg)?;
    let env = envelope_check(&z, t, &q, &samples, &cfg)?;
    println!("max involution deviation       |Z**(v) - Z(v)|        = {inv:.3e}");
    println!("max mutual-inversion deviation |FZ*(FZ(v)) - v|       = {mut_inv:.3e}");
    println!("max envelope deviation         |Z + Z* - p·v|          = {env:.3e}");

    assert!(inv < 1e-7 && mut_inv < 1e-6 && env < 1e-6);
    println!("all identities hold within tolerance");
    Ok(())
}
