//! Reconstruction of unknown, quasi-finite-rank forcings of transport-diffusion
//! and 2D Navier-Stokes equations on the periodic torus from low-mode
//! observations of the solution.
//!
//! The crate provides:
//!
//! * [`spectral`]: full-square pseudo-spectral fields on `[0, 2*pi]^d` with
//!   2/3-rule dealiasing, Sobolev seminorms, and Leray projection;
//! * [`forcing`]: quasi-finite-rank forces `g = P_N g + F(P_N g)` driven by an
//!   enslaving map `F`;
//! * [`solver`]: integrating-factor RK4 time steppers for the truth equations,
//!   the nudged sieve equations, and the coupled nudging systems;
//! * [`sieve`]: the stagewise sieve reconstruction algorithm and its
//!   stationary variant;
//! * [`conditions`]: rigorous parameter checkers (`mu` intervals, nudging
//!   gains, Grashof numbers, Gronwall rates);
//! * [`harness`]: twin-experiment orchestration, decay-rate fitting, and
//!   parameter sweeps;
//! * [`io`]: binary snapshot files, trajectory archives, and map descriptors.

pub mod conditions;
pub mod error;
pub mod forcing;
pub mod harness;
pub mod io;
pub mod sieve;
pub mod solver;
pub mod spectral;
pub mod synth;

pub use error::FluxError;
