//! Batch and streaming drivers, file formats, dataset tooling, and the CLI
//! surface for the `salad-core` detector.
//!
//! The core crate owns the algorithms; this crate owns everything that needs
//! the OS: wall-clock decision timing, CSV/JSONL formats, the synthetic
//! dataset generator, and the `salad` binary.

pub mod cli;
pub mod error;
pub mod formats;
pub mod gradcheck;
pub mod pipeline;
pub mod synth;

pub use error::Error;
pub use pipeline::{run_repad_baseline, run_salad, stream, Engine, Mode, PipelineConfig, StreamSummary};

pub use salad_core as core;
