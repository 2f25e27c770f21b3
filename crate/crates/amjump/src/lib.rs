//! Semi-analytical pricing engine for American Put options under
//! time-dependent jump-diffusion models (exponential and Kou
//! double-exponential jumps).
//!
//! The engine reduces the pricing PIDE to a heat-equation free-boundary
//! problem via a resolvent (pseudo-differential) collapse of the jump
//! integral, solves for the early-exercise boundary sequentially in
//! transformed time through a coupled nonlinear-algebraic / linear-Volterra
//! system built on heat potentials, and then recovers the price in closed
//! form from a first-order ODE. Lattice (trinomial) and finite-difference
//! PIDE oracles are included for validation.
//!
//! Module map:
//! - [`params`]: parameter curves, PDE coefficients, time change
//! - [`greens`]: Green's-function representation, heat-potential layers,
//!   closed-form kernel integrals
//! - [`volterra`]: the sequential free-boundary solver
//! - [`pricer`]: closed-form price recovery and ODE residual checks
//! - [`kou`]: the double-exponential (Kou) operator reduction
//! - [`collocation`]: exponential Legendre basis on `[x_B, inf)`
//! - [`oracle`]: trinomial tree and FD-PIDE reference solvers
//! - [`cli`]: config parsing, experiment drivers, CSV output

pub mod cli;
pub mod collocation;
pub mod greens;
pub mod kou;
pub mod oracle;
pub mod params;
pub mod pricer;
pub mod quad;
pub mod special;
pub mod volterra;
