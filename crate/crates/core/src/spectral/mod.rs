//! Truncated Fourier lattice and divergence-free spectral fields.
//!
//! A field on the periodic box `[0, L)^2` is stored through its Fourier
//! series coefficients `c(k)`, `u(x) = sum_k c(k) exp(i k.x)`, one complex
//! 2-vector per wavevector. With this convention the `L^2` inner product of
//! the box is `L^2 * sum_k Re[c_u(k) . conj(c_v(k))]`, which is the
//! normalization behind every Sobolev inner product in the crate.

mod field;
mod lattice;
mod transform;

pub use field::{SobolevIndex, SobolevWeights, SpectralField};
pub use lattice::Lattice;
pub use transform::Transform2d;

pub(crate) use field::ensure_solenoidal;
