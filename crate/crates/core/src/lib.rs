//! Training-free noise initialization for camera-controlled video diffusion.
//!
//! The crate covers the numerical core (noise schedules, K-order recursive
//! noise, DDIM inversion), depth-based reprojection, stochastic latent
//! modulation, a toy end-to-end pipeline and the file formats around them.

pub mod analysis;
pub mod cli;
pub mod ddim;
pub mod error;
pub mod geometry;
pub mod io;
pub mod krnr;
pub mod pipeline;
pub mod schedule;
pub mod slm;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{BinaryMask, Dims, LatentTensor, Rng, Tensor};
