//! Shared domain vocabulary: boxes, detections, patch tensors, embeddings,
//! scenes, and the similarity primitives used everywhere else.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, stored as left/top/width/height
/// to match the MOT interchange format directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        if !(left.is_finite() && top.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(Error::invalid("bounding box fields must be finite"));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::invalid(format!(
                "bounding box must have positive size, got {width}x{height}"
            )));
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn center_x(&self) -> f64 {
        self.left + self.width / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.top + self.height / 2.0
    }

    /// Width over height.
    pub fn aspect(&self) -> f64 {
        self.width / self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.left.max(b.left)).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.top.max(b.top)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Cosine similarity in [-1, 1]. Zero-norm inputs yield 0 rather than an
/// error so padded or degenerate detections never crash association.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "cosine similarity needs equal nonzero dims, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Partition of a fixed-resolution crop into non-overlapping patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub image_height: usize,
    pub image_width: usize,
    pub patch_height: usize,
    pub patch_width: usize,
    /// Total patch count `(image_height / patch_height) * (image_width / patch_width)`.
    pub patch_count: usize,
}

impl PatchGrid {
    pub fn new(
        image_height: usize,
        image_width: usize,
        patch_height: usize,
        patch_width: usize,
    ) -> Result<Self> {
        if patch_height == 0 || patch_width == 0 {
            return Err(Error::invalid("patch size must be positive"));
        }
        if image_height % patch_height != 0 || image_width % patch_width != 0 {
            return Err(Error::invalid(format!(
                "patch size {patch_height}x{patch_width} must divide image {image_height}x{image_width}"
            )));
        }
        let patch_count = (image_height / patch_height) * (image_width / patch_width);
        Ok(Self {
            image_height,
            image_width,
            patch_height,
            patch_width,
            patch_count,
        })
    }
}

/// Per-patch pixel values of one detection crop, row-major over patches.
/// Each row holds `patch_dim = patch_height * patch_width * channels`
/// floats; crops are normalized to [0, 1] at ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchTensor {
    pub grid: PatchGrid,
    pub patch_dim: usize,
    values: Vec<f64>,
}

impl PatchTensor {
    pub fn new(grid: PatchGrid, patch_dim: usize, values: Vec<f64>) -> Result<Self> {
        if patch_dim == 0 {
            return Err(Error::invalid("patch dim must be positive"));
        }
        if values.len() != grid.patch_count * patch_dim {
            return Err(Error::invalid(format!(
                "patch tensor needs {} values ({} patches x {}), got {}",
                grid.patch_count * patch_dim,
                grid.patch_count,
                patch_dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("patch tensor values must be finite"));
        }
        Ok(Self {
            grid,
            patch_dim,
            values,
        })
    }

    pub fn patch(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.patch_dim..(idx + 1) * self.patch_dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The two halves of an encoder output: a view-agnostic part used for
/// cross-camera matching and a view-specific part used for within-camera
/// tracking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair {
    pub agnostic: Vec<f64>,
    pub specific: Vec<f64>,
}

impl EmbeddingPair {
    pub fn new(agnostic: Vec<f64>, specific: Vec<f64>) -> Result<Self> {
        if agnostic.is_empty() || agnostic.len() != specific.len() {
            return Err(Error::invalid(format!(
                "embedding halves must have equal nonzero dims, got {} and {}",
                agnostic.len(),
                specific.len()
            )));
        }
        if agnostic.iter().chain(specific.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding values must be finite"));
        }
        Ok(Self { agnostic, specific })
    }

    /// Splits a full embedding of even dimension E into its two E/2 halves.
    pub fn from_full(full: &[f64]) -> Result<Self> {
        if full.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "full embedding dim must be even, got {}",
                full.len()
            )));
        }
        let half = full.len() / 2;
        Self::new(full[..half].to_vec(), full[half..].to_vec())
    }

    /// Total dimension E.
    pub fn dim(&self) -> usize {
        self.agnostic.len() + self.specific.len()
    }
}

/// One person detection in one camera at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u64,
    pub camera: usize,
    pub bbox: BoundingBox,
    pub confidence: f64,
    /// Present when the objective / toy-training pipelines run.
    pub crop: Option<PatchTensor>,
    /// Present after encoding (or when loaded from an embeddings file).
    pub embedding: Option<EmbeddingPair>,
}

impl Detection {
    pub fn new(frame: u64, camera: usize, bbox: BoundingBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!(
                "confidence must lie in [0,1], got {confidence}"
            )));
        }
        Ok(Self {
            frame,
            camera,
            bbox,
            confidence,
            crop: None,
            embedding: None,
        })
    }
}

/// Ground-truth identity labels keyed by (frame, camera, detection index).
pub type GroundTruthMap = BTreeMap<(u64, usize, usize), u32>;

/// A synchronized multi-camera sequence: for every frame index a detection
/// list per camera (possibly empty), over a contiguous frame range.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    num_cameras: usize,
    first_frame: u64,
    /// `frames[t][v]` is the detection list of camera `v` at frame
    /// `first_frame + t`.
    frames: Vec<Vec<Vec<Detection>>>,
    pub ground_truth: Option<GroundTruthMap>,
}

impl Scene {
    pub fn new(
        num_cameras: usize,
        first_frame: u64,
        frames: Vec<Vec<Vec<Detection>>>,
    ) -> Result<Self> {
        if num_cameras == 0 {
            return Err(Error::invalid("scene needs at least one camera"));
        }
        for (t, per_camera) in frames.iter().enumerate() {
            if per_camera.len() != num_cameras {
                return Err(Error::invalid(format!(
                    "frame {} has {} camera lists, expected {}",
                    first_frame + t as u64,
                    per_camera.len(),
                    num_cameras
                )));
            }
            for (camera, dets) in per_camera.iter().enumerate() {
                for det in dets {
                    if det.camera != camera || det.frame != first_frame + t as u64 {
                        return Err(Error::invalid(format!(
                            "detection indexed at frame {} camera {} carries frame {} camera {}",
                            first_frame + t as u64,
                            camera,
                            det.frame,
                            det.camera
                        )));
                    }
                }
            }
        }
        Ok(Self {
            num_cameras,
            first_frame,
            frames,
            ground_truth: None,
        })
    }

    pub fn num_cameras(&self) -> usize {
        self.num_cameras
    }

    pub fn first_frame(&self) -> u64 {
        self.first_frame
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Frame indices of the scene, in order.
    pub fn frame_ids(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.frames.len()).map(move |t| self.first_frame + t as u64)
    }

    pub fn detections_at(&self, frame: u64, camera: usize) -> &[Detection] {
        let t = (frame - self.first_frame) as usize;
        &self.frames[t][camera]
    }

    pub fn frames_mut(&mut self) -> &mut Vec<Vec<Vec<Detection>>> {
        &mut self.frames
    }

    pub fn iter_detections(&self) -> impl Iterator<Item = &Detection> {
        self.frames.iter().flatten().flatten()
    }
}
