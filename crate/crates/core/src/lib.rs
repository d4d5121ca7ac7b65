// Index loops mirror the matrix formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod discretize;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod potential;
pub mod rng;
pub mod semigroup;
pub mod spectral;
pub mod verify;
