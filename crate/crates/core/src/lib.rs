//! Case-based reasoning over incomplete knowledge bases: retrieve similar
//! solved questions, replay their relation chains with KB completion and text
//! support, revise the case base by F1, and evaluate end to end.

pub mod bench;
pub mod casebase;
pub mod embed;
pub mod error;
pub mod kbc;
pub mod kg;
pub mod realign;
pub mod reason;
pub mod retrieve;
pub mod revise;
pub mod rng;

pub use error::{Error, ErrorKind, Result};
