//! Baselines, rendering, image metrics and the profiling harness.

pub mod baselines;
pub mod metrics;
pub mod profile;
pub mod render;

pub use baselines::{bake_from_mesh, bake_from_mesh_with, bake_lpm};
pub use profile::{profile_pipeline, run_method, Isolation, Method, ProfileReport};
pub use metrics::{psnr, rmse, Psnr};
pub use render::{render, render_surface, Camera, RenderedFrame};
