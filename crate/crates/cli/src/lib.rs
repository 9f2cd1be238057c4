//! Report generation and command-line front end for `kpt-diagnose`.
//!
//! [`pipeline::analyze`] runs every analysis of the core library over one
//! dataset; [`report::write_report`] turns the result into `summary.json`,
//! CSV tables, SVG plots and a text digest.

pub mod cli;
pub mod error;
pub mod pipeline;
pub mod plots;
pub mod report;
pub mod svg;
pub mod tables;

pub use error::{ReportError, Result};
