//! Shared fixtures for the benchmarks.

use gazekit_core::regressor::{Architecture, LossKind, ModelKind, ModelParams};
use gazekit_core::simulator::{simulate_sessions, split_sessions, SessionConfig, SplitRatios};
use gazekit_core::DatasetSplit;

pub const WINDOW: usize = 7;

pub fn desk_arch() -> Architecture {
    Architecture { hidden: 32, feature_dim: 16, state_size: 16, window: WINDOW, ..Default::default() }
}

/// Two simulated sessions split by subject.
pub fn small_dataset() -> DatasetSplit {
    let sessions = simulate_sessions(&SessionConfig::default(), 2).expect("simulation");
    split_sessions(&sessions, SplitRatios::default(), WINDOW, 0).expect("split")
}

pub fn model(kind: ModelKind) -> ModelParams {
    ModelParams::init(kind, LossKind::Pinball, desk_arch(), 0).expect("init")
}
