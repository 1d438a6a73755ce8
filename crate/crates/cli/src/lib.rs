//! Pipeline commands behind the `musattn` binary.

pub mod commands;
pub mod config;
pub mod fsutil;
pub mod svg;
