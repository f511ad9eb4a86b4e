use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::dataset::Dataset;
use crate::engine::FeatureMap;
use crate::error::{BifError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw contents of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// One `rows * cols` byte vector per image.
    pub pixels: Vec<Vec<u8>>,
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| BifError::Format(format!("{what}: truncated header")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, "image file")?;
    if magic != IMAGE_MAGIC {
        return Err(BifError::Format(format!(
            "image file: bad magic {magic:#010x}"
        )));
    }
    let n = be_u32(bytes, 4, "image file")? as usize;
    let rows = be_u32(bytes, 8, "image file")? as usize;
    let cols = be_u32(bytes, 12, "image file")? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() < n * size {
        return Err(BifError::Format(format!(
            "image file: expected {} pixel bytes, found {}",
            n * size,
            body.len()
        )));
    }
    let pixels = (0..n)
        .map(|i| body[i * size..(i + 1) * size].to_vec())
        .collect();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "label file")?;
    if magic != LABEL_MAGIC {
        return Err(BifError::Format(format!(
            "label file: bad magic {magic:#010x}"
        )));
    }
    let n = be_u32(bytes, 4, "label file")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(BifError::Format(format!(
            "label file: expected {n} labels, found {}",
            body.len()
        )));
    }
    Ok(body[..n].to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len() * images.rows * images.cols);
    for v in [
        IMAGE_MAGIC,
        images.pixels.len() as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for p in &images.pixels {
        out.extend_from_slice(p);
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Square images cut into non-overlapping square patches, numbered row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchView {
    pub side: usize,
    pub patch: usize,
}

impl Default for PatchView {
    fn default() -> Self {
        Self { side: 28, patch: 4 }
    }
}

impl PatchView {
    pub fn new(side: usize, patch: usize) -> Result<Self> {
        if patch == 0 || side == 0 || !side.is_multiple_of(patch) {
            return Err(BifError::Config(format!(
                "patch size {patch} does not tile a {side}×{side} image"
            )));
        }
        Ok(Self { side, patch })
    }

    pub fn patches_per_side(&self) -> usize {
        self.side / self.patch
    }

    pub fn patch_count(&self) -> usize {
        self.patches_per_side().pow(2)
    }

    pub fn pixel_count(&self) -> usize {
        self.side * self.side
    }

    pub fn patch_of(&self, pixel: usize) -> usize {
        let (r, c) = (pixel / self.side, pixel % self.side);
        (r / self.patch) * self.patches_per_side() + c / self.patch
    }

    /// Group assignment of every pixel to its patch.
    pub fn feature_map(&self) -> FeatureMap {
        let assignment = (0..self.pixel_count()).map(|p| self.patch_of(p)).collect();
        FeatureMap::new(self.patch_count(), assignment).expect("every patch owns pixels")
    }

    pub fn patch_expand(&self, patch_mask: &[bool]) -> Result<Vec<bool>> {
        if patch_mask.len() != self.patch_count() {
            return Err(BifError::Shape(format!(
                "patch mask has {} entries, expected {}",
                patch_mask.len(),
                self.patch_count()
            )));
        }
        Ok((0..self.pixel_count())
            .map(|p| patch_mask[self.patch_of(p)])
            .collect())
    }
}

/// Expands a 49-entry patch mask of a 28×28 image to its 784 pixels.
pub fn patch_expand(patch_mask: &[bool]) -> Result<Vec<bool>> {
    PatchView::default().patch_expand(patch_mask)
}

/// Keeps the images whose digit is in `keep`, relabelled by position in
/// `keep`, with pixels scaled to [0, 1].
pub fn mnist_dataset(images: &IdxImages, labels: &[u8], keep: &[u8]) -> Result<Dataset> {
    if images.pixels.len() != labels.len() {
        return Err(BifError::Format(format!(
            "{} images but {} labels",
            images.pixels.len(),
            labels.len()
        )));
    }
    if keep.is_empty() {
        return Err(BifError::Config("keep list is empty".into()));
    }
    let size = images.rows * images.cols;
    let mut values = Vec::new();
    let mut ys = Vec::new();
    for (img, &lbl) in images.pixels.iter().zip(labels) {
        if let Some(class) = keep.iter().position(|&k| k == lbl) {
            values.extend(img.iter().map(|&b| f64::from(b) / 255.0));
            ys.push(class);
        }
    }
    let n = ys.len();
    let x =
        Array2::from_shape_vec((n, size), values).map_err(|e| BifError::Format(e.to_string()))?;
    let names = (0..size).map(|p| format!("px{p}")).collect();
    Dataset::new(x, ys, keep.len().max(2))?.with_feature_names(names)
}

pub fn load_mnist(
    image_path: &Path,
    label_path: &Path,
    keep: &[u8],
) -> Result<(Dataset, PatchView)> {
    let images = parse_idx_images(&fs::read(image_path)?)?;
    let labels = parse_idx_labels(&fs::read(label_path)?)?;
    if images.rows != images.cols {
        return Err(BifError::Format(format!(
            "images are {}×{}, expected square",
            images.rows, images.cols
        )));
    }
    let view = PatchView::new(images.rows, 4)?;
    Ok((mnist_dataset(&images, &labels, keep)?, view))
}
