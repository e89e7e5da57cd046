//! File formats, run artifacts and the pipeline driver behind the
//! `voromesh` command.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod report;
