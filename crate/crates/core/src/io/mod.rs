//! Problem files, reports, CSV artifacts and the end-to-end pipeline.

pub mod csv;
pub mod pipeline;
pub mod problem;
pub mod report;

pub use pipeline::{render_report, run_pipeline, write_artifacts, Command, PipelineOutput, Status};
pub use problem::{emit_problem, parse_problem, to_instance, ProblemFile};
