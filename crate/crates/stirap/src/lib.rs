//! Simulation and verification toolkit for adiabatic three-level (STIRAP)
//! systems.
//!
//! The crate is organized around one physical setup — a three-level ladder
//! driven by two delayed pulse couplings — and provides several independent
//! routes through it that are required to agree:
//!
//! - [`pulses`]: the pulse families (counterintuitive / intuitive sech pairs,
//!   exponential pair, custom separable) and the adiabatic-frame quantities
//!   (effective Rabi magnitude, mixing angle, mixing-angle rate) they induce.
//! - [`analytic`]: closed-form amplitude solutions, final populations, and
//!   the resonance conditions for complete or null transfer.
//! - [`propagate`]: a fixed-step RK4 integrator for the 2-, 3-, and 4-level
//!   time-dependent Schrödinger equations, used as an independent numerical
//!   oracle for the closed forms, plus the SU(2)→SO(3) amplitude map.
//! - [`splitop`]: a 1-D three-channel split-operator propagator for spatial
//!   wavepackets subject to the same couplings.
//! - [`berry`]: Berry curvature, discrete loop phases, solid angles, and
//!   monopole flux for the underlying two-level Hamiltonian.
//! - [`experiments`]: composite checks (analytic-vs-numeric verification,
//!   parameter sweeps, double-STIRAP phase manipulation, Hadamard-gate
//!   reduction).
//!
//! With the default `parallel` feature, sweep rows, quadrature rows, and
//! per-grid-point work run on rayon; reductions use a fixed pairwise order so
//! results are identical to the sequential build.

pub mod analytic;
pub mod berry;
mod exec;
pub mod experiments;
mod math;
pub mod propagate;
pub mod pulses;
pub mod splitop;
pub mod state;

pub use state::AmplitudeVector;
