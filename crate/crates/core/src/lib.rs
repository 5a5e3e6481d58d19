//! Translation flows on `Z^d` covers of square-tiled surfaces.
//!
//! The crate is organised bottom-up: [`surface`] builds decorated
//! square-tiled surfaces, [`flow`] runs the straight-line flow on the cover,
//! [`renorm`] builds pseudo-Anosov renormalizations out of cylinder twists,
//! [`stats`] estimates statistics of the resulting index cocycle,
//! [`gauss`] evaluates the oscillatory Gaussian integrals that appear in
//! the asymptotic expansion, and [`asymptotics`] compares predicted leading
//! terms against simulated ergodic integrals.

pub mod asymptotics;
pub mod flow;
pub mod gauss;
pub mod lattice;
pub mod mc;
pub mod numerics;
pub mod renorm;
pub mod stats;
pub mod surface;
pub mod verify;

pub use flow::{CoverPoint, Direction, FlowError, Observable, Poly, SkewIet};
pub use lattice::CoverIndex;
pub use renorm::{AffineAuto, RenormError};
pub use surface::{staircase, windtree_plus, Axis, Origami, SurfaceError};
