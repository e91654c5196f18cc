//! Adler-Kostant-Symes (AKS) flows on matrix Lie algebras.
//!
//! The engine realizes the same integrable dynamics three independent ways
//! and lets them be cross-checked against each other:
//!
//! * direct Runge-Kutta integration of the Lax equation
//!   `dL/dt = [proj_B(L), L]` ([`flow::integrate_lax`]),
//! * exact solving through group factorization of `exp(t L0)`
//!   ([`flow::factorization_solve`]),
//! * Hamiltonian dynamics of a gauged Lagrangian on the cotangent bundle
//!   of the group, with the full Dirac constraint analysis
//!   ([`dirac::constrained_integrate`]).
//!
//! The building blocks are a dense real-matrix kernel ([`mat`], [`factor`]),
//! a Lie algebra splitting `G = A + B` with its four projectors ([`algebra`]),
//! coadjoint-orbit phase spaces with Lie-Poisson brackets ([`orbit`]), the
//! gauge-Lagrangian check layer ([`gauge`]) and the Dirac bracket engine
//! ([`dirac`]). [`preset`] ships the triangular (Toda) and Iwasawa set-ups.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats and the
//! command line live in the companion `aks-cli` crate.
//!
//! ```
//! use aks_core::flow::{factorization_solve, integrate_lax};
//! use aks_core::preset::preset_toda;
//!
//! let aks = preset_toda(2);
//! let l0 = aks.lax_from_matrix(&(aks.mu() + aks.nu()));
//!
//! // the same flow two ways
//! let rk4 = integrate_lax(&aks, &l0, 1.0, 1e-3).unwrap();
//! let exact = factorization_solve(&aks, &l0, &[1.0]).unwrap();
//! let dev = (rk4.last_state().matrix() - exact.last_state().matrix()).norm_max();
//! assert!(dev < 1e-9);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod algebra;
pub mod dirac;
pub mod error;
pub mod factor;
pub mod flow;
pub mod gauge;
pub mod mat;
pub mod numeric;
pub mod orbit;
pub mod preset;

pub use algebra::{MatrixAlgebra, Splitting, SplittingKind, Subspace};
pub use error::Error;
pub use mat::Mat;
pub use orbit::{AksData, LaxElement};

