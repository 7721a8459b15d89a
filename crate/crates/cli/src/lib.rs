//! File formats, configuration, fixtures and pipeline commands behind the
//! `kbqa-bench` binary.

pub mod config;
pub mod fixture;
pub mod formats;
pub mod pipeline;
pub mod refpreds;
