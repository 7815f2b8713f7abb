//! Analysis of repeated two-player win-lose coordination games.

pub mod analysis;
pub mod catalog;
pub mod enumeration;
pub mod error;
pub mod game;
pub mod harness;
pub mod optimizer;
pub mod protocols;
pub mod stage;
pub mod symmetry;

pub use error::{Error, Result};
