//! Deterministic simulator and toolkit for a gantry-mounted pan-tilt camera
//! that images potted plants against blue keying fabric and labels the
//! images geometrically.
//!
//! - [`kinematics`]: axis speed, pulse counts and trapezoidal travel times.
//! - [`route`]: nested zig-zag ordering of camera positions, plus
//!   nearest-neighbour and exhaustive baselines.
//! - [`geometry`]: world → camera → image transforms, sphere box
//!   projection, inverse floor projection, aiming and pose rings.
//! - [`scene`]: sphere scenes, ray-cast rendering with label maps, and the
//!   clocked imaging run.
//! - [`segmentation`]: CIELAB b-channel keying, morphology and background
//!   subtraction.
//! - [`dataset`]: cropping and the version 1.5 metadata schema.
//! - [`analytics`]: production rates, class weights and Clopper-Pearson
//!   intervals.
//! - [`pipeline`]: run-directory orchestration used by the CLI.
//!
//! Data-parallel loops (rendering, keying, exhaustive route search) go
//! through [`par::Execution`]; results never depend on the thread count.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod par;
pub mod pipeline;
pub mod raster;
pub mod route;
pub mod scene;
pub mod segmentation;

pub use error::{Error, Result};
pub use par::Execution;
