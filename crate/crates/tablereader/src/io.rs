//! PNG and checkpoint files.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use image::GrayImage;
use tablereader_core::train::Checkpoint;
use tablereader_core::Raster;

/// Loads any PNG as 8-bit grayscale.
pub fn load_gray(path: &Path) -> Result<Raster> {
    let img = image::open(path).with_context(|| format!("cannot read image {}", path.display()))?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Raster::new(w as usize, h as usize, img.into_raw())?)
}

pub fn save_gray(path: &Path, r: &Raster) -> Result<()> {
    let img = GrayImage::from_raw(r.width() as u32, r.height() as u32, r.pixels().to_vec())
        .context("raster buffer does not match its size")?;
    img.save(path).with_context(|| format!("cannot write image {}", path.display()))
}

/// Writes through a sibling temporary file so a crash never leaves a
/// half-written file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", Path::new(&tmp).display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move checkpoint into {}", path.display()))
}

pub fn save_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    write_atomic(path, &cp.encode())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    Checkpoint::decode(&bytes).with_context(|| format!("invalid checkpoint {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}
