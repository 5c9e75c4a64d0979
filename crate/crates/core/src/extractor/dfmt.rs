//! DFMT tensor files and pyramid manifests.
//!
//! A DFMT file is a 28-byte header followed by the payload, all little
//! endian:
//!
//! | offset | field                          |
//! |--------|--------------------------------|
//! | 0      | magic `DFMT`                   |
//! | 4      | `u32` version, always 1        |
//! | 8      | `u32` ndim, always 3           |
//! | 12     | `u32` C, H, W                  |
//! | 24     | `u32` dtype (0 = `f32`)        |
//! | 28     | `C·H·W` values, channel planes |
//!
//! The manifest is JSON with `source_width`, `source_height`,
//! `padded_width`, `padded_height` and a `layers` list of
//! `{name, stride, file}` entries, `name` being one of `l1`..`l5` or
//! `terminal`. Files are resolved relative to the manifest.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::padded_dim;
use crate::types::{check_size_law, NUM_LAYERS};
use crate::{DfmError, FeatureMap, FeaturePyramid, Result};

const MAGIC: &[u8; 4] = b"DFMT";
const VERSION: u32 = 1;
const DTYPE_F32: u32 = 0;
const HEADER_LEN: usize = 28;

pub const LAYER_NAMES: [&str; 6] = ["l1", "l2", "l3", "l4", "l5", "terminal"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub stride: usize,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub source_width: usize,
    pub source_height: usize,
    pub padded_width: usize,
    pub padded_height: usize,
    pub layers: Vec<ManifestLayer>,
}

/// Raw `(C, H, W)` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: [usize; 3],
    pub data: Vec<f32>,
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DfmError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(DfmError::UnsupportedTensor(format!(
            "{}: truncated header",
            path.display()
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, ndim) = (word(0), word(1));
    if version != VERSION {
        return Err(DfmError::UnsupportedTensor(format!("version {version}")));
    }
    if ndim != 3 {
        return Err(DfmError::UnsupportedTensor(format!("ndim {ndim}")));
    }
    let dims = [word(2) as usize, word(3) as usize, word(4) as usize];
    let dtype = word(5);
    if dtype != DTYPE_F32 {
        return Err(DfmError::UnsupportedDtype(dtype));
    }
    let count = dims.iter().product::<usize>();
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(DfmError::UnsupportedTensor(format!(
            "{}: payload has {} bytes, expected {}",
            path.display(),
            payload.len(),
            count * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Tensor { dims, data })
}

pub fn write_tensor(path: &Path, map: &FeatureMap) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    for v in [
        VERSION,
        3,
        map.channels() as u32,
        map.rows() as u32,
        map.cols() as u32,
        DTYPE_F32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in map.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn stride_for(name: &str) -> usize {
    match name {
        "terminal" => 16,
        _ => 1 << (name[1..].parse::<usize>().unwrap() - 1),
    }
}

/// Writes `pyramid` as six DFMT files plus `manifest.json` into `dir`;
/// returns the manifest path.
pub fn save_pyramid(
    dir: &Path,
    pyramid: &FeaturePyramid,
    source_width: usize,
    source_height: usize,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut layers = Vec::new();
    for (i, name) in LAYER_NAMES.iter().enumerate() {
        let map = if i < NUM_LAYERS as usize {
            pyramid.layer(i as u8 + 1)
        } else {
            pyramid.terminal()
        };
        let file = format!("{name}.dfmt");
        write_tensor(&dir.join(&file), map)?;
        layers.push(ManifestLayer {
            name: name.to_string(),
            stride: stride_for(name),
            file,
        });
    }
    let manifest = Manifest {
        source_width,
        source_height,
        padded_width: pyramid.source_width(),
        padded_height: pyramid.source_height(),
        layers,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn load_pyramid(manifest_path: &Path) -> Result<FeaturePyramid> {
    load_pyramid_with_manifest(manifest_path).map(|(p, _)| p)
}

pub(crate) fn load_pyramid_with_manifest(manifest_path: &Path) -> Result<(FeaturePyramid, Manifest)> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let (pw, ph) = (manifest.padded_width, manifest.padded_height);
    if pw != padded_dim(manifest.source_width) || ph != padded_dim(manifest.source_height) {
        return Err(DfmError::ManifestMismatch(format!(
            "padded {pw}x{ph} is not the 16-multiple padding of {}x{}",
            manifest.source_width, manifest.source_height
        )));
    }
    if let Some(extra) = manifest.layers.iter().find(|l| !LAYER_NAMES.contains(&l.name.as_str())) {
        return Err(DfmError::ManifestMismatch(format!(
            "unknown layer name {:?}",
            extra.name
        )));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut maps = Vec::with_capacity(LAYER_NAMES.len());
    for (i, name) in LAYER_NAMES.iter().enumerate() {
        let mut entries = manifest.layers.iter().filter(|l| l.name == *name);
        let entry = entries
            .next()
            .ok_or_else(|| DfmError::ManifestMismatch(format!("layer {name} missing")))?;
        if entries.next().is_some() {
            return Err(DfmError::ManifestMismatch(format!("layer {name} listed twice")));
        }
        if entry.stride != stride_for(name) {
            return Err(DfmError::ManifestMismatch(format!(
                "layer {name} declares stride {}, expected {}",
                entry.stride,
                stride_for(name)
            )));
        }
        let tensor = read_tensor(&base.join(&entry.file))?;
        let [c, h, w] = tensor.dims;
        let s = entry.stride;
        if (w, h) != (pw / s, ph / s) {
            return Err(DfmError::DimMismatch {
                layer: name.to_string(),
                expected: (pw / s, ph / s),
                found: (w, h),
            });
        }
        let layer = if i < NUM_LAYERS as usize {
            i as u8 + 1
        } else {
            NUM_LAYERS
        };
        let map = FeatureMap::new(layer, c, h, w, tensor.data)?;
        check_size_law(name, &map, pw, ph)?;
        maps.push(map);
    }
    let terminal = maps.pop().unwrap();
    Ok((FeaturePyramid::new(maps, terminal, pw, ph)?, manifest))
}
