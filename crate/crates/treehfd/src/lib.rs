//! File formats, parallel fitting and reporting around [`treehfd_core`].
//!
//! * native model documents and boosted-tree JSON dumps ([`formats::model`],
//!   [`formats::boosted`]),
//! * decomposition documents and curve tables ([`formats::decomposition`]),
//! * numeric CSV data ([`data`]),
//! * diagnostics reports ([`report`]),
//! * per-tree parallel fitting ([`parallel`]).

pub mod data;
mod error;
pub mod formats;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
pub use treehfd_core as core;
