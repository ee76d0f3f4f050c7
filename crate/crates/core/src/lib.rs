//! Desk-scale digital-twin LiDAR simulation.
//!
//! The pipeline runs mesh preparation ([`prep`]), traffic stepping
//! ([`scenario`]), spinning-LiDAR ray casting ([`sensor`]), ground-truth
//! labelling and export ([`dataset`]), and synthetic-vs-reference fidelity
//! scoring ([`metrics`]). [`config`] holds the scene document that ties the
//! stages together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod geometry;
pub mod metrics;
pub mod palette;
pub mod pipeline;
pub mod prep;
pub mod rng;
pub mod scenario;
pub mod sensor;

pub use geometry::{Aabb, Bvh, Hit, Ray, TriangleMesh, Vec3};
pub use palette::SemanticPalette;
