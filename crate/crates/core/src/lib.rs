//! Max-min fair resource allocation for hybrid active/passive backscatter
//! networks that share the channel through slotted ALOHA.
//!
//! One multi-antenna active device (AD) talks to a multi-antenna access point
//! (AP) while `N` passive backscatter devices (BDs) ride on its carrier. Each
//! BD harvests part of the incident power through a nonlinear harvester and
//! reflects the rest, and contends for the channel with a per-slot access
//! probability. The solver jointly picks the transmit antenna, transmit
//! power, reflection coefficients, access probabilities and receive beams so
//! that the worst BD's average throughput is as large as possible.
//!
//! The crate is organised bottom-up:
//!
//! * [`config`] scenario parameters and their JSON document form,
//! * [`channel`] geometry, path loss and Rician channel draws,
//! * [`energy`] the nonlinear harvester and its inverse,
//! * [`linkmodel`] SINR/SNR, rates, access probabilities and Jain's index,
//! * [`beamforming`] MRC, max-SINR and MMSE receive beams plus a PSD
//!   rank-one certificate,
//! * [`powerrc`] closed-form power and reflection coefficients,
//! * [`cap`] the access-probability subproblem,
//! * [`bcd`] block-coordinate descent with greedy antenna selection,
//! * [`benchmarks`] ECAP, FRC, RTAS, TDMA and TC comparison schemes,
//! * [`montecarlo`] trial orchestration, aggregation and slot simulation,
//! * [`report`] per-trial reports and CSV output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bcd;
pub mod beamforming;
pub mod benchmarks;
pub mod cap;
pub mod channel;
pub mod config;
pub mod energy;
mod error;
pub mod linkmodel;
pub mod montecarlo;
pub mod powerrc;
pub mod report;

pub use bcd::{greedy_tas, inner_bcd, SolveState, TraceEntry};
pub use beamforming::{BeamPair, BeamSolveDiagnostics};
pub use cap::{solve_cap, CapSolution};
pub use channel::{realize_channels, ChannelRealization, Topology, TrialStreams};
pub use config::{parse_config, render_config, BdPlacement, BenchmarkConfig, SystemConfig};
pub use energy::EhParams;
pub use error::{Error, Result};
pub use montecarlo::{run_trials, AggregateReport, Algorithm};
pub use report::{emit_csv, TrialReport};

/// Complex scalar used for every channel coefficient.
pub type C64 = num_complex::Complex64;
/// Complex column vector (AP receive dimension).
pub type CVector = nalgebra::DVector<C64>;
/// Complex square matrix (AP receive dimension).
pub type CMatrix = nalgebra::DMatrix<C64>;
