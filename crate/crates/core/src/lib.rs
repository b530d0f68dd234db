//! Simulation toolkit for visibility in Brownian interlacements and in the
//! Brownian excursion process of the unit disc.

pub mod brownian;
pub mod capacity;
pub mod covering;
pub mod directions;
pub mod error;
pub mod excursions;
pub mod experiments;
pub mod geometry;
pub mod interlacements;
pub mod quadrature;
pub mod range;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
