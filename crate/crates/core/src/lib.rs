//! Synthetic crack volumes, crack segmentation and tolerance-aware evaluation
//! for 3D computed tomography of concrete.
//!
//! The crate is organised bottom-up:
//!
//! * [`volume`]: dense volumes, packed masks, Gaussian filtering, dilation, file format
//! * [`synth`]: fractional Brownian crack surfaces, concrete phantoms, compositing, datasets
//! * [`hessian`]: scale-space Hessian, closed-form eigenvalues, random-forest feature bank
//! * [`filters`]: sheet and Frangi plate filters, thresholding
//! * [`geometric`]: template matching and adaptive plane morphology
//! * [`paths`]: local minimal paths and Hessian-based percolation
//! * [`forest`]: random-forest voxel classifier
//! * [`eval`]: tolerance-aware confusion counts, metrics, grid search, reports
//! * [`presets`]: method configurations and the shipped parameter table
//! * [`pipeline`]: end-to-end generate / segment / evaluate runs

pub mod error;
pub mod eval;
pub mod filters;
pub mod forest;
pub mod geometric;
pub mod hessian;
pub mod paths;
pub mod pipeline;
pub mod presets;
pub mod seed;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{BinaryMask, Dims, Volume, VoxelCoord};
