//! Command-line orchestration for simulating, healing, phasing and scoring
//! diffraction patterns.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod preview;
pub mod report;

pub use config::{PipelineConfig, Scale};
pub use manifest::RunManifest;
pub use pipeline::{run_pipeline, HealJob, PhaseJob, PipelineSummary};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "COACS_OUTPUT_ROOT";

/// `explicit` if given, otherwise `<root>/<name>` with the root taken from
/// [`OUTPUT_ROOT_ENV`] or `coacs-out`.
pub fn output_dir(explicit: Option<std::path::PathBuf>, name: &str) -> std::path::PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).unwrap_or_else(|| "coacs-out".into());
        std::path::PathBuf::from(root).join(name)
    })
}
