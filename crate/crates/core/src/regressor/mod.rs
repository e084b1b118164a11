//! Gaze regressors, their losses, optimizer and reference baselines.

mod adam;
mod baseline;
mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod params;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use baseline::{mc_dropout_split, mc_dropout_uncertainty, mean_baseline};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TensorRecord};
pub use gradcheck::{away_from_kinks, grad_check, relative_error, GradCheckReport, KINK_MARGIN};
pub use layers::{Dense, GruCell};
pub use loss::{
    loss_grad, mse_loss, mse_loss_grad, pinball_loss, pinball_loss_grad, pinball_residuals, pinball_term, LossKind,
    TAU_HIGH, TAU_LOW,
};
pub use model::{
    forward_sequence, forward_static, forward_trn, trn_scales, Architecture, BiGru, ForwardCache, ModelKind,
    ModelParams,
};
pub use params::{ParamSet, TensorRef};
pub use train::{
    batch_gradient, evaluate_split, mean_angular_error, predict_split, train, train_from, EpochMetrics, TrainConfig,
    TrainOutput,
};

/// A predicted gaze; `sigma` is set for quantile-trained models.
pub type GazePrediction = crate::geometry::SphericalGaze;

pub(crate) use train::CHUNK;
