//! Dataset split files: `"APDS"`, version u32, count u32, rows u8, cols u8, then
//! `count` records of `[label u8][784 pixel bytes]`, little-endian. Each split has a
//! JSON manifest next to it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, GENERATOR_VERSION};
use crate::gesture::{DigitImage, IMAGE_PIXELS, IMAGE_SIDE};

pub const DATASET_MAGIC: &[u8; 4] = b"APDS";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 1 + 1;
const RECORD_LEN: usize = 1 + IMAGE_PIXELS;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub per_class: usize,
    pub split: String,
    pub generator_version: String,
}

/// Encodes a split. Unlabeled images are written with label 255.
pub fn write_split(images: &[DigitImage]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + images.len() * RECORD_LEN);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(images.len() as u32).to_le_bytes());
    out.push(IMAGE_SIDE as u8);
    out.push(IMAGE_SIDE as u8);
    for img in images {
        out.push(img.label().unwrap_or(u8::MAX));
        out.extend_from_slice(&img.to_bytes());
    }
    out
}

pub fn read_split(bytes: &[u8]) -> Result<Vec<DigitImage>, DatasetError> {
    let fmt = |m: String| DatasetError::Format(m);
    if bytes.len() < HEADER_LEN {
        return Err(fmt(format!("file too short for header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != DATASET_MAGIC {
        return Err(fmt("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let (rows, cols) = (bytes[12] as usize, bytes[13] as usize);
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(fmt(format!("unsupported image size {rows}x{cols}")));
    }
    let expected = HEADER_LEN + count * RECORD_LEN;
    if bytes.len() != expected {
        return Err(fmt(format!("length mismatch: header says {count} records ({expected} bytes), file has {}", bytes.len())));
    }
    bytes[HEADER_LEN..]
        .chunks_exact(RECORD_LEN)
        .map(|rec| {
            let label = match rec[0] {
                u8::MAX => None,
                l => Some(l),
            };
            DigitImage::from_bytes(&rec[1..], label).map_err(|e| fmt(e.to_string()))
        })
        .collect()
}

pub fn save_split(path: impl AsRef<Path>, images: &[DigitImage]) -> Result<(), DatasetError> {
    fs::write(path, write_split(images))?;
    Ok(())
}

pub fn load_split(path: impl AsRef<Path>) -> Result<Vec<DigitImage>, DatasetError> {
    read_split(&fs::read(path)?)
}

/// Writes `train.apds`, `test.apds` and their `.json` manifests into `dir`.
pub fn save_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (split, images) in [("train", &ds.train), ("test", &ds.test)] {
        save_split(dir.join(format!("{split}.apds")), images)?;
        let manifest = Manifest {
            seed: ds.seed,
            per_class: ds.per_class,
            split: split.to_string(),
            generator_version: GENERATOR_VERSION.to_string(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| DatasetError::Format(e.to_string()))?;
        fs::write(dir.join(format!("{split}.json")), json + "\n")?;
    }
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("train.json"))?)
        .map_err(|e| DatasetError::Format(format!("train manifest: {e}")))?;
    Ok(Dataset {
        train: load_split(dir.join("train.apds"))?,
        test: load_split(dir.join("test.apds"))?,
        seed: manifest.seed,
        per_class: manifest.per_class,
    })
}
