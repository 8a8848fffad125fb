//! Desk-scale pipeline for language-conditioned tabletop rearrangement:
//! procedural scene and instruction generation, physical validity
//! checking, a diffusion model over 6-DoF goal poses, and evaluation.

pub use rand;
pub use serde;
pub use rayon;

pub mod datagen;
pub mod diffusion;
pub mod encoder;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod physics;
pub mod rng;
pub mod scene;
