//! Finite-volume pricing library for the one-dimensional Black-Scholes
//! equation on a truncated spot domain.
//!
//! The equation is treated in time-to-maturity form, so the payoff acts as
//! the initial condition and the solver marches forward to maturity.  The
//! spatial discretisation is a vertex-centred finite-volume method with a
//! harmonic-mean two-point flux; a fitted variant replaces the flux on the
//! cell touching the degenerate boundary x = 0.  Time stepping is a
//! mass-lumped theta scheme solved with the Thomas algorithm.
//!
//! Module map:
//! * [`mesh`]: primal/dual grids on `[0, x_max]`
//! * [`model`]: market data, divergence-form coefficients, boundary lift
//! * [`flux`]: discrete fluxes, operator assembly, bilinear form
//! * [`stepper`]: theta time stepping and price recovery
//! * [`analytics`]: closed-form prices, discrete norms, convergence rates
//! * [`oracles`]: independent reference implementations used for checking

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod flux;
pub mod mesh;
pub mod model;
pub mod oracles;
pub mod stepper;
