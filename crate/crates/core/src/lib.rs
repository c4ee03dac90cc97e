//! Pseudo-spectral laboratory for the stochastic hyperviscous 2D Navier-Stokes
//! equation `dX + [nu A^alpha X + B(X)] dt = sqrt(nu) dW` on a periodic
//! Galerkin truncation, its Ornstein-Uhlenbeck decomposition, stationary
//! sampling and the inviscid limit toward Euler-invariant measures.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod euler;
pub mod measures;
pub mod nonlinearity;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod stochastic;
pub mod verify;

pub use error::{Result, SimError};
