//! Training-free dense image matching on convolutional feature pyramids.
//!
//! The matcher works in two stages. Stage-0 runs a dense mutual
//! nearest-neighbour search (DNNS) on the deepest feature map of both
//! images, fits a homography with MSAC and warps the second image onto the
//! first. Stage-1 matches the reference against the warped image at the
//! coarsest pyramid level and refines every match down to pixel resolution
//! by re-running DNNS inside 2×2 receptive windows, one layer at a time.
//!
//! # Layout
//! - [`types`]: images, feature maps, grid points and match sets.
//! - [`homography`]: 3×3 projective transforms and their text format.
//! - [`extractor`]: feature pyramids, either from the built-in seeded
//!   convolutional stack or from DFMT tensor files.
//! - [`dnns`]: exhaustive mutual nearest neighbours with a ratio test.
//! - [`refine`]: hierarchical refinement through receptive windows.
//! - [`geometry`]: normalized DLT, MSAC, warping and corner error.
//! - [`pipeline`]: the full two-stage matcher.
//! - [`eval`]: HPatches loading, MMA curves and homography accuracy.
//! - [`io`]: image decoding and the match/homography text formats.
//! - [`synthetic`]: procedural textures and sequences for testing.
//! - [`rng`]: SplitMix64 and seed derivation.
//!
//! # Quick start
//! ```no_run
//! use dfm::pipeline::{dfm_match, PipelineConfig};
//!
//! # fn run() -> dfm::Result<()> {
//! let a = dfm::io::load_image("a.png")?;
//! let b = dfm::io::load_image("b.png")?;
//! let result = dfm_match(&a, &b, &PipelineConfig::default())?;
//! println!("{} matches", result.matches.len());
//! # Ok(())
//! # }
//! ```

pub mod dnns;
mod error;
pub mod eval;
pub mod extractor;
pub mod geometry;
pub mod homography;
pub mod io;
pub mod pipeline;
pub mod refine;
pub mod rng;
pub mod synthetic;
pub mod types;

pub use error::{DfmError, Result};
pub use homography::Homography;
pub use types::{grid_to_pixel, FeatureMap, FeaturePyramid, GridMatch, GridPoint, ImageBuffer, MatchSet, PixelMatch};
