//! Datasets, configuration, experiment orchestration and file outputs.

mod config;
pub mod idx;
mod labels;
mod metrics;
pub mod pipeline;
mod synthetic;

pub use config::{DatasetSource, ExperimentConfig};
pub use idx::load_idx;
pub use labels::LabelBatch;
pub use metrics::{metrics_csv, MetricsRecord, METRICS_HEADER, METRICS_SCHEMA};
pub use synthetic::{gen_synthetic, perceptron_separable, SyntheticDataset, SyntheticSpec};
