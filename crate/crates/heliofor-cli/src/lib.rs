//! Everything behind the `heliofor` binary: run configuration, the CSV and
//! model file formats, report and SVG rendering, and the command
//! implementations. The binary itself only parses arguments and dispatches
//! here; keeping the logic in a library lets integration tests drive the
//! same code paths directly.

pub mod commands;
pub mod config;
pub mod csv;
pub mod model_format;
pub mod report;
pub mod svg;
