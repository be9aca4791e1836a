//! Verification toolkit for polymer-gas cluster expansions of a lattice
//! complex |ψ|⁴ model.
//!
//! The model lives on a finite volume Λ ⊂ ℤ^d with Hamiltonian
//! Σ J(x−y)ψ*(x)ψ(y) + (λ/4)Σ|ψ(x)|⁴.  The crate provides
//!
//! * exact combinatorics: spanning trees and forests, Ursell functions,
//!   chromatic polynomials, the forest interpolation identity, tree-level
//!   Wick counts (`combinatorics`);
//! * the free propagator C = J̃⁻¹ with certified exponential decay
//!   constants (`propagator`);
//! * single-site quadrature and moment bounds (`single_site`);
//! * Isserlis–Wick moments, interpolated covariances, a weighted
//!   field-polynomial algebra, Gaussian sampling (`gaussian`);
//! * high-temperature polymer activity bounds, convergence criteria and
//!   explicit clustering-bound constants (`polymer`);
//! * the small-coupling interpolated cluster expansion, its constant
//!   ledger and the near-Gaussian clustering bounds (`small_lambda`);
//! * brute-force oracles for moments and truncated correlations on tiny
//!   volumes (`oracle`);
//! * batch verification suites and reporting (`suites`, `report`).
//!
//! Every inequality implemented here is a theorem of the underlying
//! analysis: checks are expected to pass, and a failure indicates a bug
//! in the implementation rather than in the mathematics.

pub mod combinatorics;
pub mod gaussian;
pub mod model;
pub mod oracle;
pub mod polymer;
pub mod propagator;
pub mod quad;
pub mod report;
pub mod single_site;
pub mod small_lambda;
pub mod suites;
