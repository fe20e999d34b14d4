//! Constrained variational problems on distributions, solved through their
//! degenerate Hamiltonians.
//!
//! The library works in a single global chart on ℝⁿ. A rank-k distribution D
//! is given by a frame of vector fields X₁…X_k with annihilator one-forms
//! θ¹…θ^{n−k}, and a Lagrangian L(t, q, u) is expressed in frame
//! coordinates u of horizontal velocities v = Σuᵢ Xᵢ. The core
//! correspondence implemented here: horizontal curves that are critical
//! points of the action ∫L among curves joining two submanifolds P → Q are
//! exactly the projections of solutions of the Hamilton equations of the
//! degenerate Hamiltonian H(t, q, p) = L*(t, q, p|_D), with transversality
//! Γ(a)|_{T_P} = 0, Γ(b)|_{T_Q} = 0 at the endpoints.
//!
//! What's here:
//! - [`legendre`]: fiberwise Legendre transform, energy function, numerical
//!   inversion of the fiber derivative, involution checks.
//! - [`hamiltonian`]: the degenerate Hamiltonian with envelope-theorem
//!   gradients and a sub-Riemannian fast path.
//! - [`flow`]: RK4 integration of the Hamilton equations with warm-started
//!   fiber solves, plus conservation/horizontality reports.
//! - [`boundary`]: shooting solver for the two-point problem with
//!   submanifold endpoints and transversality residuals.
//! - [`extremals`]: abnormal-extremal (characteristic) detection along a
//!   curve, endpoint-map oracle, contact-type nondegeneracy test.
//! - [`variation`]: independent discrete checks — action quadrature,
//!   Euler-Lagrange residuals, first variation, multiplier recovery.
//! - [`problems`]: built-in corpus (flat, Heisenberg, Martinet, driven)
//!   with analytic derivatives and known ground truth.
//! - [`cli`]: JSON/CSV front end used by the `vako` binary.
//!
//! Start with the runnable examples in `examples/` — each one exercises a
//! major capability end to end.

pub mod error;
pub mod numerics;

pub mod geometry;
pub mod legendre;

pub mod hamiltonian;

pub mod flow;

pub mod problems;

pub mod variation;

pub mod boundary;

pub mod extremals;

pub mod cli;

pub use error::{Error, Result};
