//! The velocity-switching (Goldstein–Kac) process on the line, computed three
//! independent ways: exact event-driven Monte Carlo, an exact-shift solver for
//! the Chapman-Kolmogorov systems, and closed-form moments checked against a
//! moment ODE. Also included are Lorentz boosts with the covariance check of
//! the transformed system, and the quantized random evolution of wave packets.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analytic;
pub mod bessel;
pub mod error;
pub mod lorentz;
pub mod mc;
pub mod moments;
pub mod ode;
pub mod params;
pub mod pde;
pub mod quad;
pub mod quantum;
pub mod strategy;

pub use error::{Error, Result};
pub use params::{
    path_rng, validate_params, FieldPair, Grid1D, ModelParams, PathRng, RngSeed, SpacetimeEvent,
    Start, VelocitySign,
};
