//! Feature pyramid extraction.
//!
//! Two backends produce [`FeaturePyramid`]s: the seeded convolutional stack
//! in [`builtin`] and the DFMT tensor loader in [`dfmt`], which reads
//! pyramids written by an external VGG export tool.

pub mod builtin;
pub mod dfmt;

use std::path::PathBuf;

use crate::{DfmError, FeaturePyramid, ImageBuffer, Result};

pub use builtin::{BuiltinExtractor, BUILTIN_CHANNELS};
pub use dfmt::{load_pyramid, read_tensor, save_pyramid, write_tensor, Manifest, ManifestLayer};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtractorConfig {
    Builtin { seed: u64 },
    TensorFiles { manifest: PathBuf },
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig::Builtin { seed: 1 }
    }
}

/// Image zero-padded on the right and bottom to multiples of 16.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedImage {
    pub image: ImageBuffer,
    pub original_width: usize,
    pub original_height: usize,
}

pub fn padded_dim(dim: usize) -> usize {
    dim.div_ceil(16) * 16
}

pub fn pad_to_16(image: &ImageBuffer) -> Result<PaddedImage> {
    let (w, h, c) = (image.width(), image.height(), image.channels());
    if w < 16 || h < 16 {
        return Err(DfmError::ImageTooSmall { width: w, height: h });
    }
    let (pw, ph) = (padded_dim(w), padded_dim(h));
    let image = if (pw, ph) == (w, h) {
        image.clone()
    } else {
        let mut data = vec![0.0f32; pw * ph * c];
        for (y, row) in image.data().chunks_exact(w * c).enumerate() {
            data[y * pw * c..y * pw * c + w * c].copy_from_slice(row);
        }
        ImageBuffer::new(pw, ph, c, data)?
    };
    Ok(PaddedImage {
        image,
        original_width: w,
        original_height: h,
    })
}

/// Pyramid for `image`; dims always refer to the zero-padded frame.
pub fn extract(image: &ImageBuffer, config: &ExtractorConfig) -> Result<FeaturePyramid> {
    match config {
        ExtractorConfig::Builtin { seed } => {
            let padded = pad_to_16(image)?;
            BuiltinExtractor::new(*seed).extract(&padded.image)
        }
        ExtractorConfig::TensorFiles { manifest } => {
            let (pyramid, declared) = dfmt::load_pyramid_with_manifest(manifest)?;
            if (declared.source_width, declared.source_height) != (image.width(), image.height()) {
                return Err(DfmError::ManifestMismatch(format!(
                    "manifest describes a {}x{} image, input is {}x{}",
                    declared.source_width,
                    declared.source_height,
                    image.width(),
                    image.height()
                )));
            }
            Ok(pyramid)
        }
    }
}
