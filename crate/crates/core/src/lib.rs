//! Simulation and verification engine for consistent polygonal Markov fields
//! and their dual polygonal webs.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: lines in `(phi, rho)` coordinates, convex windows, the
//!   growing window family and the invariant line measure.
//! - [`activity`]: the activity measure on lines and every sampler derived
//!   from it.
//! - [`field`]: event-driven outward construction of field samples.
//! - [`web`]: the inward branching construction of polygonal webs.
//! - [`crop`]: crop graphs, the crop functional and the signed edge-marker
//!   process.
//! - [`arrangement`]: exact enumeration of admissible configurations on a
//!   finite line set.
//! - [`estimators`]: Monte-Carlo estimators and identity checks.
//! - [`io`]: run configuration, seeding, interchange files, CSV and SVG.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod activity;
pub mod arrangement;
pub mod crop;
pub mod error;
pub mod estimators;
mod events;
pub mod field;
pub mod geometry;
pub mod io;
pub mod markers;
mod quadrature;
pub mod stats;
pub mod web;

pub use activity::ActivityMeasure;
pub use error::{Error, Result};
pub use field::FieldSample;
pub use geometry::{ConvexDomain, Line, Point, Segment, WindowFamily, WindowKind, EPS_GEO};
pub use markers::{Marker, MarkerConfig};
pub use web::{PolygonalWeb, StopRule};
