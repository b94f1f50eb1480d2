//! Generalized Laplace-Runge-Lenz vectors for central potentials.
//!
//! The crate is organised bottom-up:
//!
//! - [`specfun`]: elliptic integrals, Jacobi `sn`, sine and cosine integrals.
//! - [`poly_roots`]: closed-form cubic and quartic roots.
//! - [`potentials`]: effective potentials, landmarks and regimes.
//! - [`lrl_engine`]: the `(h, g)` ansatz, closed-form pairs and trajectories.
//! - [`friction_lab`]: gravity with `1/r²` friction.
//! - [`oracle`]: quadrature, finite differences, ODE integration, drift.
//! - [`cli`]: configuration parsing and the `lrl` command implementations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature and series constants are kept as published.
#![allow(clippy::excessive_precision)]

pub mod cli;
pub mod friction_lab;
pub mod lrl_engine;
pub mod oracle;
pub mod poly_roots;
pub mod potentials;
pub mod specfun;
