//! Single-image dehazing built from two filters: a global normalization and
//! darkening front-end followed by a local contrast enhancement back-end
//! (CLAHE, ACE or STRESS), with an optional dark-channel prior for the
//! darkening weight and blind restoration metrics for evaluation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod cli;
pub mod error;
pub mod frontend;
pub mod lce;
pub mod metrics;
pub mod pipeline;
pub mod prior;
pub mod raster;

pub use error::{DehazeError, Result};
pub use frontend::{FrontendConfig, LambdaField, LambdaMode};
pub use metrics::{evaluate, MetricsReport};
pub use pipeline::{run_pipeline, Lce, PipelineConfig, PipelineOutput};
pub use prior::PriorConfig;
pub use raster::{load_image, save_image, ImageGray, ImageRgb};
