//! File formats, pipeline commands and reports for the GUI-agent
//! localization hallucination toolkit. The numerical core lives in
//! `glens-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod library;
pub mod mock;
pub mod pipeline;
pub mod records;
pub mod report;
pub mod schema;

pub use error::{GlensError, Result};
