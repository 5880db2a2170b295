//! Numerical laboratory for the time-delayed Lohe hermitian sphere (LHS)
//! aggregation model
//!
//! ```text
//! dz_j/dt = Ω_j z_j
//!         + (κ₀/N) Σ_{k≠j} a_jk (⟨z_j,z_j⟩ z_k^τ − ⟨z_k^τ,z_j⟩ z_j)
//!         + (κ₁/N) Σ_{k≠j} a_jk (⟨z_j,z_k^τ⟩ − ⟨z_k^τ,z_j⟩) z_j
//! ```
//!
//! where z_j(t) ∈ ℂ^d lives on the unit hermitian sphere, z^τ(t) = z(t−τ) is
//! the uniformly delayed state, ⟨w,z⟩ = Σ_α conj(w_α) z_α conjugates the first
//! slot, Ω_j is skew-hermitian, and a_jk ≥ 0 is a symmetric coupling network.
//!
//! The crate provides the state-space types ([`sphere`]), the right-hand sides
//! of the general model and its special forms ([`model`]), a fixed-step
//! method-of-steps delay integrator with dense output ([`integrator`]),
//! aggregation diagnostics ([`diagnostics`]), hypothesis checkers for the
//! known sufficient-condition theorems ([`theorem`]), and a config-driven
//! run/sweep/compare harness ([`harness`]).

pub mod diagnostics;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod sphere;
pub mod theorem;

pub use num_complex::Complex64;
