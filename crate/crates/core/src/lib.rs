//! Objective-first inverse design of 2D frequency-domain photonic devices.

pub mod design;
pub mod devices;
pub mod error;
pub mod fdfd;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod physics;

pub use error::{Error, Result};
