//! Simulator for continuous-variable qubits carried by the transverse mode of
//! a laser beam.
//!
//! A qubit is the superposition of a focused Gaussian beam (the vacuum mode)
//! and a displaced copy of it (a coherent state), prepared by a two-beam
//! interferometer with transmittance `T`, relative phase `φ` and displacement
//! `d`. The crate covers:
//!
//! - [`state`] and [`qubit`]: coherent-term superpositions, the eight typical
//!   states and the Bloch-sphere maps;
//! - [`wigner`]: closed-form and quadrature Wigner functions, marginals,
//!   quadrature moments and negativity;
//! - [`propagation`]: Gaussian-beam parameters, ray matrices, analytic and
//!   kernel free-space propagation, phase-space rotations;
//! - [`lab`]: synthetic CCD frames and the profile analysis chain;
//! - [`apps`]: beam-profile sweeps, mode-keyed links, QKD and the dephased
//!   mixture;
//! - [`io`]: CSV, PGM and JSON sidecar formats.

pub mod apps;
pub mod error;
pub mod frame;
pub mod io;
pub mod lab;
pub mod propagation;
pub mod qubit;
pub mod rng;
pub mod state;
pub mod wigner;

pub use error::{Error, Result};
pub use frame::{ModeFrame, HBAR};
pub use qubit::{
    bloch_to_params, make_qubit_state, make_typical_state, normalization_factor, params_to_bloch, BlochVector,
    OverlapAngle, QubitParams, TypicalKind,
};
pub use state::{coherent_overlap, inner_product, CoherentTerm, SuperpositionState};
