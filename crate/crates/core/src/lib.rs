//! Gaze estimation toolkit: ground-truth gaze labelling from a panoramic rig,
//! a capture simulator, quantile-regression gaze models with uncertainty,
//! self-supervised domain adaptation and evaluation metrics.

pub mod acquisition;
pub mod adapt;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod regressor;
pub mod rng;
pub mod simulator;

pub use acquisition::{GazeLabel, MarkerObservation, PixelRay, RigConfig, SubjectDetection};
pub use adapt::{AdaptConfig, DiscriminatorParams};
pub use error::{Error, Result};
pub use eval::{AttentionGrid, MetricsReport};
pub use geometry::{SphericalGaze, UnitVec3, Vec3};
pub use regressor::{Architecture, GazePrediction, LossKind, ModelKind, ModelParams, TrainConfig};
pub use simulator::{DatasetSplit, FrameRecord, NoiseConfig, SessionConfig};
