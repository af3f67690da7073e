//! IDX files as distributed with MNIST: big-endian `u32` magic and dimensions
//! followed by unsigned bytes.

use std::fs;
use std::path::Path;

use super::LabelVector;
use crate::error::{Error, Result};
use crate::features::Image;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, "truncated header"))
}

/// Parses an IDX image file; pixels are scaled from `0..=255` to `[0, 1]`.
pub fn read_idx_images(bytes: &[u8], path: &Path) -> Result<Vec<Image>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(
            path,
            format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let size = rows * cols;
    let payload = &bytes[16..];
    if payload.len() < count * size {
        return Err(format_err(
            path,
            format!(
                "truncated payload: {} bytes for {count} images of {rows}x{cols}",
                payload.len()
            ),
        ));
    }
    Ok(payload
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| {
            Image::from_pixels(
                cols,
                rows,
                px.iter().map(|&b| f64::from(b) / 255.0).collect(),
            )
        })
        .collect())
}

/// Parses an IDX label file. The class count is 10 unless a label exceeds 9.
pub fn read_idx_labels(bytes: &[u8], path: &Path) -> Result<LabelVector> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(format_err(
            path,
            format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(format_err(
            path,
            format!(
                "truncated payload: {} bytes for {count} labels",
                payload.len()
            ),
        ));
    }
    let labels: Vec<usize> = payload[..count].iter().map(|&b| b as usize).collect();
    let c = labels.iter().max().map_or(10, |&m| (m + 1).max(10));
    LabelVector::new(labels, c)
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(Vec<Image>, LabelVector)> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let images = read_idx_images(&image_bytes, images_path)?;
    let labels = read_idx_labels(&label_bytes, labels_path)?;
    if images.len() != labels.len() {
        return Err(format_err(
            labels_path,
            format!(
                "{} labels for {} images in {}",
                labels.len(),
                images.len(),
                images_path.display()
            ),
        ));
    }
    Ok((images, labels))
}

/// Serializes images (all the same size) to IDX bytes, quantizing `[0, 1]`
/// pixels to `0..=255`.
pub fn write_idx_images(images: &[Image]) -> Vec<u8> {
    let (w, h) = images
        .first()
        .map_or((0, 0), |im| (im.width(), im.height()));
    let mut out = Vec::with_capacity(16 + images.len() * w * h);
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(h as u32).to_be_bytes());
    out.extend_from_slice(&(w as u32).to_be_bytes());
    for im in images {
        assert_eq!(
            (im.width(), im.height()),
            (w, h),
            "images must share one size"
        );
        out.extend(
            im.pixels()
                .iter()
                .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
