//! Metrics, figures and the shelf-attention application.

mod attention;
mod metrics;
mod mollweide;
mod plot;

pub use attention::{
    attention_map, simulate_shoppers, world_ray, AttentionGrid, AttentionMap, GazeRay, GridFrame, ShopperSample,
};
pub use metrics::{
    abs_yaw_curve, angle_to_camera, average_ranks, coverage, evaluate_predictions, spearman, subset_errors,
    uncertainty_correlation, write_yaw_curve_csv, yaw_curve, yaw_curve_csv, Coverage, MetricsReport, YawBin,
    DEFAULT_BIN_DEG, FRONT180_DEG, FRONT_FACING_DEG,
};
pub use mollweide::{auxiliary_angle, mollweide_project, NEWTON_MAX_ITER, NEWTON_TOL, X_MAX, Y_MAX};
pub use plot::{
    attention_svg, distribution_histogram, distribution_svg, export_distribution_map, write_yaw_curve_svg, yaw_curve_svg, Histogram2d,
};
