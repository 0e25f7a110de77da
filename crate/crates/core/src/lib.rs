//! Linear regions of small fully-connected ReLU networks on 2D inputs.
//!
//! The crate trains networks with mini-batch Adam, enumerates the convex
//! cells on which a network is affine, counts breakpoints along 1D chords,
//! and estimates how many neurons a target number of regions requires.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod nn;
pub mod persist;
pub mod regions;
pub mod report;
pub mod svg;
pub mod trainer;

pub use error::{Error, Result};
pub use geometry::{ConvexPolygon, GeomTolerance, Point2};
pub use nn::{init_network, ActivationPattern, AffineFunction, InitKind, InitScheme, NetSpec, NetworkParams};
pub use regions::{enumerate_regions, EnumerationConfig, LineScan, LinearRegion, RegionArrangement};
