use std::fs;
use std::path::Path;

use dfm::extractor::{
    extract, load_pyramid, pad_to_16, save_pyramid, write_tensor, BuiltinExtractor, ExtractorConfig, Manifest,
    ManifestLayer, BUILTIN_CHANNELS,
};
use dfm::synthetic::{shift_right, texture};
use dfm::{DfmError, FeatureMap, ImageBuffer};

fn builtin() -> ExtractorConfig {
    ExtractorConfig::Builtin { seed: 1 }
}

#[test]
fn size_law_and_channels() {
    let img = texture(256, 256, 4).unwrap();
    let p = extract(&img, &builtin()).unwrap();
    for (k, c) in (1..=5u8).zip(BUILTIN_CHANNELS) {
        let m = p.layer(k);
        assert_eq!((m.rows(), m.cols(), m.channels()), (256 >> (k - 1), 256 >> (k - 1), c));
    }
    assert_eq!(
        (p.terminal().rows(), p.terminal().cols(), p.terminal().channels()),
        (16, 16, 64)
    );

    let odd = texture(250, 300, 4).unwrap();
    let p = extract(&odd, &builtin()).unwrap();
    assert_eq!((p.source_width(), p.source_height()), (256, 304));
    assert_eq!((p.layer(5).cols(), p.layer(5).rows()), (16, 19));
}

#[test]
fn deterministic_and_seed_dependent() {
    let img = texture(64, 48, 2).unwrap();
    let a = extract(&img, &builtin()).unwrap();
    assert_eq!(a, extract(&img, &builtin()).unwrap());
    let other = extract(&img, &ExtractorConfig::Builtin { seed: 2 }).unwrap();
    assert_ne!(a.terminal(), other.terminal());
}

#[test]
fn too_small() {
    let img = ImageBuffer::zeros(10, 512, 1).unwrap();
    assert!(matches!(
        extract(&img, &builtin()),
        Err(DfmError::ImageTooSmall { width: 10, height: 512 })
    ));
}

#[test]
fn rgb_uses_luma() {
    let grey = texture(32, 32, 9).unwrap();
    let rgb: Vec<f32> = grey.data().iter().flat_map(|&v| [v, v, v]).collect();
    let rgb = ImageBuffer::new(32, 32, 3, rgb).unwrap();
    let a = extract(&grey, &builtin()).unwrap();
    let b = extract(&rgb, &builtin()).unwrap();
    for k in 1..=5 {
        for (x, y) in a.layer(k).data().iter().zip(b.layer(k).data()) {
            assert!((x - y).abs() <= 1e-5);
        }
    }
}

/// Largest terminal-map deviation between B column `j` and A column `j - m`
/// over all rows, for `j` in `cols`.
fn shifted_deviation(a: &FeatureMap, b: &FeatureMap, m: usize, cols: std::ops::RangeInclusive<usize>) -> f32 {
    let mut worst = 0.0f32;
    for c in 0..a.channels() {
        for r in 0..a.rows() {
            for j in cols.clone() {
                worst = worst.max((b.get(c, r, j) - a.get(c, r, j - m)).abs());
            }
        }
    }
    worst
}

// The terminal cell at column i sees pixels [16i - 47, 16i + 62]. A cell i
// is reproduced exactly at B cell i + m when that span needs no padding in
// A (16i - 47 >= 0) and stays inside the content B kept after the shift
// (16i + 62 < 256 - 16m).
#[test]
fn translation_equivariance_at_terminal_layer() {
    let a = texture(256, 256, 5).unwrap();
    let pa = extract(&a, &builtin()).unwrap();
    for (shift, m) in [(16usize, 1usize), (32, 2)] {
        let b = shift_right(&a, shift).unwrap();
        let pb = extract(&b, &builtin()).unwrap();
        let (first_a, last_a) = (47usize.div_ceil(16), (256 - 16 * m - 63) / 16);
        let cols = first_a + m..=last_a + m;
        let dev = shifted_deviation(pa.terminal(), pb.terminal(), m, cols.clone());
        assert!(dev <= 1e-6, "shift {shift}: deviation {dev}");
        let dev5 = shifted_deviation(pa.layer(5), pb.layer(5), m, cols);
        assert!(dev5 <= 1e-6, "layer 5, shift {shift}: deviation {dev5}");
    }
}

#[test]
fn builtin_rejects_unpadded_input() {
    let img = texture(40, 32, 1).unwrap();
    assert!(BuiltinExtractor::new(1).extract(&img).is_err());
    let padded = pad_to_16(&img).unwrap();
    assert_eq!((padded.image.width(), padded.image.height()), (48, 32));
    assert!(BuiltinExtractor::new(1).extract(&padded.image).is_ok());
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> std::path::PathBuf {
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string(manifest).unwrap()).unwrap();
    path
}

fn synthetic_manifest(dir: &Path, w: usize, h: usize, layer4: (usize, usize)) -> std::path::PathBuf {
    let names = ["l1", "l2", "l3", "l4", "l5", "terminal"];
    let mut layers = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let stride = if i == 5 { 16 } else { 1 << i };
        let (cols, rows) = if *name == "l4" {
            layer4
        } else {
            (w / stride, h / stride)
        };
        let layer = if i == 5 { 5 } else { i as u8 + 1 };
        let map = FeatureMap::new(layer, 2, rows, cols, vec![0.5; 2 * rows * cols]).unwrap();
        let file = format!("{name}.dfmt");
        write_tensor(&dir.join(&file), &map).unwrap();
        layers.push(ManifestLayer {
            name: name.to_string(),
            stride,
            file,
        });
    }
    write_manifest(
        dir,
        &Manifest {
            source_width: w,
            source_height: h,
            padded_width: w,
            padded_height: h,
            layers,
        },
    )
}

#[test]
fn manifest_for_256x304_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic_manifest(dir.path(), 256, 304, (32, 38));
    let p = load_pyramid(&path).unwrap();
    assert_eq!((p.layer(5).cols(), p.layer(5).rows()), (16, 19));
    assert_eq!((p.source_width(), p.source_height()), (256, 304));
}

#[test]
fn manifest_layer4_dim_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic_manifest(dir.path(), 256, 304, (31, 38));
    match load_pyramid(&path) {
        Err(DfmError::DimMismatch { layer, expected, found }) => {
            assert_eq!(layer, "l4");
            assert_eq!(expected, (32, 38));
            assert_eq!(found, (31, 38));
        }
        other => panic!("expected DimMismatch, got {other:?}"),
    }
}

#[test]
fn manifest_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic_manifest(dir.path(), 64, 64, (8, 8));
    let l3 = dir.path().join("l3.dfmt");
    let mut bytes = fs::read(&l3).unwrap();
    bytes[..4].copy_from_slice(b"NOPE");
    fs::write(&l3, bytes).unwrap();
    assert!(matches!(load_pyramid(&path), Err(DfmError::BadMagic { .. })));
}

#[test]
fn manifest_structure_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic_manifest(dir.path(), 64, 64, (8, 8));
    let good: Manifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();

    let mut m = good.clone();
    m.layers.pop();
    write_manifest(dir.path(), &m);
    assert!(matches!(load_pyramid(&path), Err(DfmError::ManifestMismatch(_))));

    let mut m = good.clone();
    m.layers[2].stride = 2;
    write_manifest(dir.path(), &m);
    assert!(matches!(load_pyramid(&path), Err(DfmError::ManifestMismatch(_))));

    let mut m = good.clone();
    m.padded_width = 80;
    write_manifest(dir.path(), &m);
    assert!(matches!(load_pyramid(&path), Err(DfmError::ManifestMismatch(_))));

    let mut m = good;
    m.layers[1].file = "missing.dfmt".into();
    write_manifest(dir.path(), &m);
    assert!(matches!(load_pyramid(&path), Err(DfmError::Io(_))));
}

#[test]
fn saved_builtin_pyramid_round_trips_through_tensor_backend() {
    let dir = tempfile::tempdir().unwrap();
    let img = texture(70, 50, 3).unwrap();
    let p = extract(&img, &builtin()).unwrap();
    let manifest = save_pyramid(dir.path(), &p, 70, 50).unwrap();
    let loaded = extract(
        &img,
        &ExtractorConfig::TensorFiles {
            manifest: manifest.clone(),
        },
    )
    .unwrap();
    assert_eq!(loaded, p);

    let other = texture(64, 50, 3).unwrap();
    assert!(matches!(
        extract(&other, &ExtractorConfig::TensorFiles { manifest }),
        Err(DfmError::ManifestMismatch(_))
    ));
}
