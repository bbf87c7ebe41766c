//! Data formats, synthetic data, configuration and the end-to-end run.

pub mod config;
pub mod dataset;
pub mod io;
pub mod run;
pub mod synth;

pub use config::{DataSource, OutputConfig, PipelineConfig, Preset, SpectralConfig};
pub use dataset::{load_dataset, mnist_subgroups, DatasetFormat, ImageSetGroup, MnistGrouping};
pub use run::{cluster_points, points_from_groups, run_pipeline, ClusterRun, Report};
pub use synth::{synth_grassmann, SyntheticSpec};
