//! Marker-based mapping, marker placement, planning and navigation for a
//! planar robot with a pan/tilt camera turret and a 2-D laser scanner.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

pub mod angle;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod mapping;
pub mod mission;
pub mod morphology;
pub mod navigation;
pub mod placement;
pub mod planner;
pub mod raster;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
