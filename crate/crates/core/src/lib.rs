//! Bake texture and normal maps onto low-polygon meshes straight from dense
//! colored point clouds, plus the baselines, renderer, metrics and profiler
//! needed to compare against mesh-based workflows.

pub mod assets;
pub mod atlas;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod manifest;
pub mod spatial;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};

/// Double-precision aliases used throughout the pipeline.
pub type Vec3 = geometry::Vec3<f64>;
pub type Vec2 = geometry::Vec2<f64>;
pub type UnitVec3 = geometry::UnitVec3<f64>;
pub type Barycentric = geometry::Barycentric<f64>;
pub type Triangle3 = geometry::Triangle3<f64>;
pub type Triangle2 = geometry::Triangle2<f64>;
pub type TriangleQuery = geometry::TriangleQuery<f64>;
