//! Solvers and certificates for weak optimal transport between finitely
//! supported probability measures on R^d.
//!
//! The central quantity is
//!
//! ```text
//! V(mu, nu) = inf over couplings pi of (mu, nu) of
//!             sum_i mu_i C(x_i, pi_{x_i})
//! ```
//!
//! where the cost C sees the whole conditional distribution `pi_{x_i}`
//! rather than a single destination point. The crate provides
//!
//! * measure, coupling, and kernel types with validated construction
//!   ([`measures`]),
//! * barycentric cost families `theta(x - mean(p))` and user-supplied
//!   costs ([`costs`]),
//! * an exact transportation-simplex solver for classical linear
//!   transport, used as the linear-minimization oracle everywhere
//!   ([`classical_ot`]),
//! * a conditional-gradient solver for V with a computable optimality
//!   gap certificate, plus a grid oracle for tiny instances
//!   ([`weak_solver`]),
//! * dual potentials, conjugation, and a projected supergradient
//!   ascent with duality-gap reporting ([`duality`]),
//! * monotonicity certificates: necessity checks and, under a
//!   Lipschitz hypothesis, sufficiency on small supports
//!   ([`monotonicity`]),
//! * convex-order checks with martingale-coupling or separating
//!   witnesses, and the quadratic projection onto the convex-order
//!   cone with its 1-Lipschitz barycentric map ([`order`]),
//! * an embedding of couplings into plans over (point, distribution)
//!   pairs with intensity and admissibility checks ([`lifted`]).
//!
//! All routines are deterministic: identical inputs produce identical
//! outputs, bit for bit. Nothing here performs IO; serialization and
//! the command-line surface live in the companion `weakot-cli` crate.
//!
//! The crate is no_std-compatible (alloc required): build with
//! `default-features = false, features = ["libm"]` to drop std.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("weakot-core requires either the `std` or the `libm` feature");

pub mod classical_ot;
pub mod costs;
pub mod duality;
mod error;
mod linalg;
pub mod lifted;
pub mod measures;
pub mod monotonicity;
pub mod order;
mod rng;
mod simplex;
pub mod weak_solver;

pub use error::{Error, Result};

/// Float functions that are inherent methods under std and libm calls
/// otherwise. Everything numeric in the crate goes through these.
pub(crate) mod float {
    #[cfg(feature = "std")]
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }

    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[cfg(feature = "std")]
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }

    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }

    /// |x|, without relying on the std-only inherent method.
    #[inline]
    pub fn abs(x: f64) -> f64 {
        f64::from_bits(x.to_bits() & !(1u64 << 63))
    }
}
