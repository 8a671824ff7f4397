//! IRS-assisted passive indoor localization.
//!
//! A narrowband scene simulator plus the localization engine built on top of
//! it: receive beamforming, IRS focusing and quantization, side-lobe nulling
//! by semidefinite relaxation, single- and multi-person scan pipelines, and a
//! Monte Carlo harness.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod channel;
pub mod error;
pub mod grid;
pub mod harness;
pub mod irscontrol;
pub mod locate;
pub mod nullsteer;
pub mod rng;
pub mod scene;
pub mod sdp;

pub use beamform::{aoa_resolution, combine, steering_weights, tof_resolution, BeamWeights};
pub use channel::{
    channel_tior, channel_tor, path_amplitude, subtract, synthesize_snapshot, ChannelModel, ChannelTerms, PhasePattern, Snapshot,
};
pub use error::{Error, Result};
pub use grid::Grid;
pub use harness::{
    compare_patterns, rmse, run_experiment, track, Baseline, ExperimentSpec, PatternComparison, RmseReport, Sweep, TrackFrame, TrackOptions,
};
pub use irscontrol::{beam_pattern, build_codebook, optimal_phases, quantize, BeamPatternMap, Codebook};
pub use locate::{
    apply_mask, locate_multi, locate_single, noise_floor_estimate, scan, Detection, DetectionSet, Heatmap, Level, MeasurementSource,
    MultiOptions, PatternProvider, SimulatedSource, StopReason,
};
pub use nullsteer::{apply_perturbation, build_problem, solve_null, NullProblem, Perturbation};
pub use scene::{distance, irs_element_positions, load_scenario, save_scenario, IrsGeometry, PathLossParams, Scenario, Trajectory, Vec3};
pub use sdp::{hermitian_eig, solve_sdp, HermitianMatrix, SdpResult};
