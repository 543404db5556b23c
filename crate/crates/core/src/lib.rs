//! Iterative mask denoising for object completion on a synthetic shape world.

pub mod cli;
pub mod engine;
pub mod error;
pub mod harness;
pub mod mask;
pub mod occlusion;
pub mod par;
pub mod pgm;
pub mod seed;
pub mod segmenter;
pub mod shape_world;
pub mod toy;
pub mod voting;

pub use error::{ImdError, Result};
