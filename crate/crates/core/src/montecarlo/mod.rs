//! Photon-pair Monte Carlo of the double-slit bench.

pub mod idler;
pub mod run;
pub mod sampler;
pub mod screen;

pub use idler::{idler_position, propagate_idler, IdlerOutcome};
pub use run::{
    both_access_coherence, incoherent_source_visibility, incoherent_source_visibility_check,
    layout_digest, run_experiment, transmits, CheckError, DetectionRecord, RunCounters, RunModes,
    RunResult, SimulationConfig, SimulationError, VisibilityCheck,
};
pub use sampler::{sample_pair, PhotonPair, StreamKey};
pub use screen::{ScreenDensity, ScreenWindow};
