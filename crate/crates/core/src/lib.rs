//! Decentralized multi-robot navigation with artificial potential fields,
//! force-rotation wall-following and rule-based or learned mode switching.
//!
//! The crate is organised bottom-up: [`geom`] and [`world`] provide planar
//! geometry, obstacle maps and range scans; [`potential`] computes forces;
//! [`agent`] turns forces into motion; [`switch_rs`] and [`switch_ls`] decide
//! when to wall-follow; [`sim`] runs multi-robot instances; [`batch`] sweeps
//! experiment grids; [`server`] streams a live run over a WebSocket.

pub mod agent;
pub mod batch;
pub mod dataset;
pub mod error;
pub mod geom;
pub mod potential;
pub mod server;
pub mod sim;
pub mod switch_ls;
pub mod switch_rs;
pub mod world;

pub use error::{Error, Result};
