//! Deterministic synthetic multi-view scenario generator.
//!
//! Identities perform reflecting random walks on a 2-D plane observed by
//! cameras with partially overlapping axis-aligned view windows. Appearance
//! is generated so the recovery targets are literal: the view-agnostic half
//! of an oracle embedding is the identity latent itself, the view-specific
//! half is an affine per-camera transform of it, and synthetic crops encode
//! the latent in their pixel statistics plus a constant per-camera color
//! shift.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metrics::{TrackRecord, TrackingResult};
use crate::types::{
    BoundingBox, Detection, EmbeddingPair, GroundTruthMap, PatchGrid, PatchTensor, Scene,
};

/// Pixel resolution of every synthetic camera (square images).
pub const CAMERA_RESOLUTION: f64 = 256.0;

/// Synthetic crop geometry: 8x8 RGB images in 2x2 patches.
pub const CROP_SIZE: usize = 8;
pub const CROP_PATCH: usize = 2;
pub const CROP_CHANNELS: usize = 3;

/// Amplitude of the identity signal in crop channel means.
const CHANNEL_MEAN_AMPLITUDE: f64 = 0.15;
/// Amplitude of the patch-periodic identity pattern. Repeating the pattern
/// at the patch period keeps it at full strength under average pooling.
const PERIODIC_PATTERN_AMPLITUDE: f64 = 0.30;
/// Amplitude of the per-pixel identity texture.
const PIXEL_PATTERN_AMPLITUDE: f64 = 0.15;
/// Range of the constant per-camera color shift.
const CAMERA_SHIFT_AMPLITUDE: f64 = 0.12;
/// Pixel noise added to every crop value.
const CROP_NOISE_STD: f64 = 0.02;

/// Axis-aligned world-plane rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Window {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    fn intersects(&self, other: &Window) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_identities: usize,
    pub num_cameras: usize,
    pub num_frames: usize,
    pub plane_size: f64,
    /// Per-camera view rectangles; `None` lays out overlapping vertical
    /// strips across the plane.
    pub camera_windows: Option<Vec<Window>>,
    pub identity_dim: usize,
    /// Std of additive noise on both embedding halves.
    pub view_noise: f64,
    /// Probability that a visible identity goes undetected.
    pub miss_rate: f64,
    /// Use one-hot identity latents (requires identity_dim >= identities).
    pub orthogonal_latents: bool,
    /// Force every camera's embedding transform to identity / zero offset.
    pub identity_views: bool,
    /// Attach synthetic crops to detections.
    pub with_crops: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_identities: 8,
            num_cameras: 3,
            num_frames: 200,
            plane_size: 100.0,
            camera_windows: None,
            identity_dim: 8,
            view_noise: 0.05,
            miss_rate: 0.05,
            orthogonal_latents: false,
            identity_views: false,
            with_crops: true,
            seed: 7,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_identities == 0 || self.num_cameras == 0 || self.num_frames == 0 {
            return Err(Error::invalid("identities, cameras and frames must be positive"));
        }
        if self.plane_size <= 0.0 {
            return Err(Error::invalid("plane size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(Error::invalid("miss rate must lie in [0, 1]"));
        }
        if self.view_noise < 0.0 {
            return Err(Error::invalid("view noise must be nonnegative"));
        }
        if self.orthogonal_latents && self.identity_dim < self.num_identities {
            return Err(Error::invalid(
                "orthogonal latents need identity_dim >= num_identities",
            ));
        }
        if let Some(windows) = &self.camera_windows {
            if windows.len() != self.num_cameras {
                return Err(Error::invalid("one window per camera required"));
            }
        }
        Ok(())
    }

    /// Default windows: vertical strips of width 2/(V+1) of the plane with
    /// 50% overlap between neighbours, full plane height.
    pub fn windows(&self) -> Vec<Window> {
        if let Some(w) = &self.camera_windows {
            return w.clone();
        }
        let v = self.num_cameras;
        let strip = self.plane_size / (v as f64 + 1.0);
        (0..v)
            .map(|i| Window {
                x0: i as f64 * strip,
                y0: 0.0,
                x1: i as f64 * strip + 2.0 * strip,
                y1: self.plane_size,
            })
            .collect()
    }
}

/// Per-camera affine transform applied to identity latents to produce the
/// view-specific embedding half.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTransform {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

/// A generated scenario: the scene (detections with embeddings and crops),
/// the full-visibility ground truth used for evaluation, and the latent
/// factors behind it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub scene: Scene,
    /// Every visible (identity, frame, camera) regardless of detector
    /// misses; this is what evaluation counts false negatives against.
    pub truth: TrackingResult,
    pub latents: Vec<DVector<f64>>,
    pub view_transforms: Vec<ViewTransform>,
    pub camera_shifts: Vec<[f64; 3]>,
    pub config: SynthConfig,
}

fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16] = 0x53; // domain tag for scenario generation
    ChaCha8Rng::from_seed(key)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

pub fn generate(cfg: &SynthConfig) -> Result<Scenario> {
    cfg.validate()?;
    let windows = cfg.windows();
    if cfg.num_cameras >= 2 && !windows.iter().enumerate().any(|(i, a)| {
        windows[i + 1..].iter().any(|b| a.intersects(b))
    }) {
        return Err(Error::invalid("camera windows must overlap for at least one pair"));
    }

    let mut rng_setup = sub_rng(cfg.seed, 0);
    let mut rng_motion = sub_rng(cfg.seed, 1);
    let mut rng_detect = sub_rng(cfg.seed, 2);
    let mut rng_embed = sub_rng(cfg.seed, 3);
    let mut rng_crop = sub_rng(cfg.seed, 4);

    // Setup draws, in a fixed order.
    let pixel_basis: Vec<DVector<f64>> = (0..CROP_SIZE * CROP_SIZE * CROP_CHANNELS)
        .map(|_| gaussian_vec(&mut rng_setup, cfg.identity_dim) / (cfg.identity_dim as f64).sqrt())
        .collect();
    let channel_means: Vec<DVector<f64>> = (0..CROP_CHANNELS)
        .map(|_| {
            let v = gaussian_vec(&mut rng_setup, cfg.identity_dim);
            let n = v.norm();
            if n == 0.0 {
                v
            } else {
                v / n
            }
        })
        .collect();
    let camera_shifts: Vec<[f64; 3]> = (0..cfg.num_cameras)
        .map(|_| {
            let mut s = [0.0; 3];
            for v in &mut s {
                *v = rng_setup.random_range(-CAMERA_SHIFT_AMPLITUDE..CAMERA_SHIFT_AMPLITUDE);
            }
            s
        })
        .collect();
    let view_transforms: Vec<ViewTransform> = (0..cfg.num_cameras)
        .map(|_| {
            let matrix = random_orthogonal(&mut rng_setup, cfg.identity_dim);
            let offset = gaussian_vec(&mut rng_setup, cfg.identity_dim) * 0.3;
            if cfg.identity_views {
                ViewTransform {
                    matrix: DMatrix::identity(cfg.identity_dim, cfg.identity_dim),
                    offset: DVector::zeros(cfg.identity_dim),
                }
            } else {
                ViewTransform { matrix, offset }
            }
        })
        .collect();
    let latents: Vec<DVector<f64>> = (0..cfg.num_identities)
        .map(|i| {
            let g = gaussian_vec(&mut rng_setup, cfg.identity_dim);
            if cfg.orthogonal_latents {
                let mut z = DVector::zeros(cfg.identity_dim);
                z[i] = 1.0;
                z
            } else {
                let n = g.norm();
                if n == 0.0 {
                    g
                } else {
                    g / n
                }
            }
        })
        .collect();
    // World box sizes per identity.
    let sizes: Vec<(f64, f64)> = (0..cfg.num_identities)
        .map(|_| {
            (
                rng_setup.random_range(3.0..5.0),
                rng_setup.random_range(7.0..11.0),
            )
        })
        .collect();
    let mut positions: Vec<(f64, f64)> = (0..cfg.num_identities)
        .map(|_| {
            (
                rng_setup.random_range(0.0..cfg.plane_size),
                rng_setup.random_range(0.0..cfg.plane_size),
            )
        })
        .collect();
    let mut velocities: Vec<(f64, f64)> = (0..cfg.num_identities)
        .map(|_| {
            (
                0.4 * rng_setup.sample::<f64, _>(StandardNormal),
                0.4 * rng_setup.sample::<f64, _>(StandardNormal),
            )
        })
        .collect();

    let grid = PatchGrid::new(CROP_SIZE, CROP_SIZE, CROP_PATCH, CROP_PATCH)?;
    let mut frames: Vec<Vec<Vec<Detection>>> = Vec::with_capacity(cfg.num_frames);
    let mut truth_records: Vec<TrackRecord> = Vec::new();
    let mut gt_map: GroundTruthMap = GroundTruthMap::new();

    for t in 0..cfg.num_frames as u64 {
        // Advance the walks (skip the step at t=0 so initial positions count).
        if t > 0 {
            for i in 0..cfg.num_identities {
                let ax: f64 = rng_motion.sample::<f64, _>(StandardNormal) * 0.15;
                let ay: f64 = rng_motion.sample::<f64, _>(StandardNormal) * 0.15;
                let (vx, vy) = velocities[i];
                let mut vx = vx + ax;
                let mut vy = vy + ay;
                let speed = (vx * vx + vy * vy).sqrt();
                if speed > 1.2 {
                    vx *= 1.2 / speed;
                    vy *= 1.2 / speed;
                }
                let (mut x, mut y) = positions[i];
                x += vx;
                y += vy;
                if x < 0.0 {
                    x = -x;
                    vx = -vx;
                }
                if x > cfg.plane_size {
                    x = 2.0 * cfg.plane_size - x;
                    vx = -vx;
                }
                if y < 0.0 {
                    y = -y;
                    vy = -vy;
                }
                if y > cfg.plane_size {
                    y = 2.0 * cfg.plane_size - y;
                    vy = -vy;
                }
                positions[i] = (x, y);
                velocities[i] = (vx, vy);
            }
        }

        let mut per_camera: Vec<Vec<Detection>> = Vec::with_capacity(cfg.num_cameras);
        for (camera, window) in windows.iter().enumerate() {
            let mut dets = Vec::new();
            for i in 0..cfg.num_identities {
                let (x, y) = positions[i];
                if !window.contains(x, y) {
                    continue;
                }
                let bbox = project_box(window, x, y, sizes[i]);
                truth_records.push(TrackRecord {
                    frame: t,
                    camera,
                    id: i as u32 + 1,
                    bbox,
                });
                if rng_detect.random::<f64>() < cfg.miss_rate {
                    continue;
                }
                let mut det = Detection::new(t, camera, bbox, 1.0)?;
                det.embedding = Some(oracle_embedding(
                    &latents[i],
                    &view_transforms[camera],
                    cfg.view_noise,
                    &mut rng_embed,
                )?);
                if cfg.with_crops {
                    det.crop = Some(render_crop(
                        &grid,
                        &latents[i],
                        &pixel_basis,
                        &channel_means,
                        &camera_shifts[camera],
                        &mut rng_crop,
                    )?);
                }
                gt_map.insert((t, camera, dets.len()), i as u32 + 1);
                dets.push(det);
            }
            per_camera.push(dets);
        }
        frames.push(per_camera);
    }

    let mut scene = Scene::new(cfg.num_cameras, 0, frames)?;
    scene.ground_truth = Some(gt_map);
    Ok(Scenario {
        scene,
        truth: TrackingResult::new(truth_records)?,
        latents,
        view_transforms,
        camera_shifts,
        config: cfg.clone(),
    })
}

fn project_box(window: &Window, x: f64, y: f64, (w, h): (f64, f64)) -> BoundingBox {
    let sx = CAMERA_RESOLUTION / window.width();
    let sy = CAMERA_RESOLUTION / window.height();
    let cx = (x - window.x0) * sx;
    let cy = (y - window.y0) * sy;
    let bw = w * sx;
    let bh = h * sy;
    BoundingBox {
        left: cx - bw / 2.0,
        top: cy - bh / 2.0,
        width: bw,
        height: bh,
    }
}

fn oracle_embedding(
    latent: &DVector<f64>,
    transform: &ViewTransform,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<EmbeddingPair> {
    let dim = latent.len();
    let mut agnostic = Vec::with_capacity(dim);
    for i in 0..dim {
        let eps: f64 = rng.sample(StandardNormal);
        agnostic.push(latent[i] + noise * eps);
    }
    let transformed = &transform.matrix * latent + &transform.offset;
    let mut specific = Vec::with_capacity(dim);
    for i in 0..dim {
        let eps: f64 = rng.sample(StandardNormal);
        specific.push(transformed[i] + noise * eps);
    }
    EmbeddingPair::new(agnostic, specific)
}

fn render_crop(
    grid: &PatchGrid,
    latent: &DVector<f64>,
    pixel_basis: &[DVector<f64>],
    channel_means: &[DVector<f64>],
    shift: &[f64; 3],
    rng: &mut ChaCha8Rng,
) -> Result<PatchTensor> {
    let per_row = CROP_SIZE / CROP_PATCH;
    let patch_dim = CROP_PATCH * CROP_PATCH * CROP_CHANNELS;
    let mut values = Vec::with_capacity(grid.patch_count * patch_dim);
    for p in 0..grid.patch_count {
        let pr = p / per_row;
        let pc = p % per_row;
        for dy in 0..CROP_PATCH {
            for dx in 0..CROP_PATCH {
                let y = pr * CROP_PATCH + dy;
                let x = pc * CROP_PATCH + dx;
                for c in 0..CROP_CHANNELS {
                    let basis = &pixel_basis[(y * CROP_SIZE + x) * CROP_CHANNELS + c];
                    let eps: f64 = rng.sample(StandardNormal);
                    let value = 0.5
                        + CHANNEL_MEAN_AMPLITUDE * channel_means[c].dot(latent)
                        + PIXEL_PATTERN_AMPLITUDE * basis.dot(latent)
                        + shift[c]
                        + CROP_NOISE_STD * eps;
                    values.push(value.clamp(0.0, 1.0));
                }
            }
        }
    }
    PatchTensor::new(*grid, patch_dim, values)
}

/// Replaces one camera's view by a seeded random sub-window covering
/// `crop_area` of the image, dropping content whose center leaves the new
/// window and re-expressing surviving boxes at the original resolution.
/// Both the detections and the ground truth of that camera transform
/// together; other cameras are untouched. `crop_area = 1` is the identity.
pub fn perturb_misalign(
    scenario: &Scenario,
    camera: usize,
    crop_area: f64,
    seed: u64,
) -> Result<Scenario> {
    if !(crop_area > 0.0 && crop_area <= 1.0) {
        return Err(Error::invalid(format!(
            "crop area must lie in (0, 1], got {crop_area}"
        )));
    }
    if camera >= scenario.scene.num_cameras() {
        return Err(Error::invalid(format!(
            "camera {camera} out of range 0..{}",
            scenario.scene.num_cameras()
        )));
    }
    if crop_area == 1.0 {
        return Ok(scenario.clone());
    }

    let side = crop_area.sqrt() * CAMERA_RESOLUTION;
    let margin = CAMERA_RESOLUTION - side;
    let mut rng = sub_rng(seed, 0x4d49_5341); // misalignment stream
    let wx0 = rng.random_range(0.0..margin);
    let wy0 = rng.random_range(0.0..margin);
    let scale = CAMERA_RESOLUTION / side;

    let remap = |bbox: &BoundingBox| -> Option<BoundingBox> {
        let cx = bbox.center_x();
        let cy = bbox.center_y();
        if cx < wx0 || cx >= wx0 + side || cy < wy0 || cy >= wy0 + side {
            return None;
        }
        Some(BoundingBox {
            left: (bbox.left - wx0) * scale,
            top: (bbox.top - wy0) * scale,
            width: bbox.width * scale,
            height: bbox.height * scale,
        })
    };

    let mut out = scenario.clone();
    let first_frame = out.scene.first_frame();
    let mut gt_map = out.scene.ground_truth.take().unwrap_or_default();
    for (t, per_camera) in out.scene.frames_mut().iter_mut().enumerate() {
        let frame = first_frame + t as u64;
        let dets = std::mem::take(&mut per_camera[camera]);
        let mut kept = Vec::with_capacity(dets.len());
        for (old_idx, mut det) in dets.into_iter().enumerate() {
            let label = gt_map.remove(&(frame, camera, old_idx));
            if let Some(bbox) = remap(&det.bbox) {
                det.bbox = bbox;
                if let Some(id) = label {
                    gt_map.insert((frame, camera, kept.len()), id);
                }
                kept.push(det);
            }
        }
        per_camera[camera] = kept;
    }
    out.scene.ground_truth = Some(gt_map);

    let truth_records: Vec<TrackRecord> = scenario
        .truth
        .records()
        .iter()
        .filter_map(|r| {
            if r.camera != camera {
                return Some(r.clone());
            }
            remap(&r.bbox).map(|bbox| TrackRecord { bbox, ..r.clone() })
        })
        .collect();
    out.truth = TrackingResult::new(truth_records)?;
    Ok(out)
}

/// Simulates complete sensor failure: the selected cameras emit no
/// detections in any frame while ground truth is retained for evaluation.
pub fn perturb_malfunction(scenario: &Scenario, cameras: &[usize]) -> Result<Scenario> {
    for &camera in cameras {
        if camera >= scenario.scene.num_cameras() {
            return Err(Error::invalid(format!(
                "camera {camera} out of range 0..{}",
                scenario.scene.num_cameras()
            )));
        }
    }
    let mut out = scenario.clone();
    let first_frame = out.scene.first_frame();
    let mut gt_map = out.scene.ground_truth.take().unwrap_or_default();
    for (t, per_camera) in out.scene.frames_mut().iter_mut().enumerate() {
        let frame = first_frame + t as u64;
        for &camera in cameras {
            for idx in 0..per_camera[camera].len() {
                gt_map.remove(&(frame, camera, idx));
            }
            per_camera[camera].clear();
        }
    }
    out.scene.ground_truth = Some(gt_map);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            num_frames: 30,
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.scene, b.scene);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn zero_miss_rate_detects_every_visible_identity() {
        let cfg = SynthConfig {
            miss_rate: 0.0,
            num_frames: 40,
            with_crops: false,
            ..SynthConfig::default()
        };
        let s = generate(&cfg).unwrap();
        let detected: usize = s.scene.iter_detections().count();
        assert_eq!(detected, s.truth.records().len());
    }

    #[test]
    fn identity_views_and_zero_noise_share_embeddings_across_cameras() {
        let cfg = SynthConfig {
            view_noise: 0.0,
            identity_views: true,
            miss_rate: 0.0,
            num_frames: 20,
            with_crops: false,
            ..SynthConfig::default()
        };
        let s = generate(&cfg).unwrap();
        let gt = s.scene.ground_truth.as_ref().unwrap();
        // Group embeddings by (frame, identity); all must be identical.
        use std::collections::BTreeMap;
        let mut by_key: BTreeMap<(u64, u32), Vec<&EmbeddingPair>> = BTreeMap::new();
        for frame in s.scene.frame_ids() {
            for camera in 0..s.scene.num_cameras() {
                for (idx, det) in s.scene.detections_at(frame, camera).iter().enumerate() {
                    let id = gt[&(frame, camera, idx)];
                    by_key
                        .entry((frame, id))
                        .or_default()
                        .push(det.embedding.as_ref().unwrap());
                }
            }
        }
        let mut saw_multi_view = false;
        for group in by_key.values() {
            if group.len() >= 2 {
                saw_multi_view = true;
                for e in &group[1..] {
                    assert_eq!(group[0].agnostic, e.agnostic);
                    assert_eq!(group[0].specific, e.specific);
                }
            }
        }
        assert!(saw_multi_view, "scenario must contain cross-view overlap");
    }

    #[test]
    fn overlap_covers_at_least_thirty_percent_on_standard_seed() {
        let s = generate(&SynthConfig::default()).unwrap();
        use std::collections::BTreeMap;
        let mut views: BTreeMap<(u64, u32), usize> = BTreeMap::new();
        for r in s.truth.records() {
            *views.entry((r.frame, r.id)).or_default() += 1;
        }
        let total = views.len();
        let multi = views.values().filter(|&&v| v >= 2).count();
        let fraction = multi as f64 / total as f64;
        assert!(
            fraction >= 0.3,
            "only {multi}/{total} = {fraction:.2} of (identity, frame) entries overlap"
        );
    }

    #[test]
    fn gt_labels_are_consistent_and_positive() {
        let s = generate(&SynthConfig {
            num_frames: 30,
            with_crops: false,
            ..SynthConfig::default()
        })
        .unwrap();
        for r in s.truth.records() {
            assert!(r.id >= 1);
            assert!((r.id as usize) <= s.config.num_identities);
        }
    }

    #[test]
    fn crops_are_normalized_and_shaped() {
        let cfg = SynthConfig {
            num_frames: 5,
            ..SynthConfig::default()
        };
        let s = generate(&cfg).unwrap();
        let det = s.scene.iter_detections().next().unwrap();
        let crop = det.crop.as_ref().unwrap();
        assert_eq!(crop.grid.patch_count, 16);
        assert_eq!(crop.patch_dim, 12);
        assert!(crop.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn misalign_identity_when_area_is_one() {
        let s = generate(&SynthConfig {
            num_frames: 20,
            with_crops: false,
            ..SynthConfig::default()
        })
        .unwrap();
        let p = perturb_misalign(&s, 1, 1.0, 99).unwrap();
        assert_eq!(s.scene, p.scene);
        assert_eq!(s.truth, p.truth);
    }

    #[test]
    fn misalign_only_touches_target_camera_and_never_adds() {
        let s = generate(&SynthConfig {
            num_frames: 40,
            with_crops: false,
            ..SynthConfig::default()
        })
        .unwrap();
        let p = perturb_misalign(&s, 1, 0.9, 99).unwrap();
        let count = |sc: &Scenario, cam: usize| -> usize {
            sc.scene
                .iter_detections()
                .filter(|d| d.camera == cam)
                .count()
        };
        assert_eq!(count(&s, 0), count(&p, 0));
        assert_eq!(count(&s, 2), count(&p, 2));
        assert!(count(&p, 1) <= count(&s, 1));
        // Unaffected cameras are bitwise unchanged.
        for frame in s.scene.frame_ids() {
            for cam in [0usize, 2] {
                assert_eq!(
                    s.scene.detections_at(frame, cam),
                    p.scene.detections_at(frame, cam)
                );
            }
        }
    }

    #[test]
    fn malfunction_empties_selected_cameras_and_keeps_truth() {
        let s = generate(&SynthConfig {
            num_frames: 20,
            with_crops: false,
            ..SynthConfig::default()
        })
        .unwrap();
        let p = perturb_malfunction(&s, &[0]).unwrap();
        assert!(p.scene.iter_detections().all(|d| d.camera != 0));
        assert_eq!(s.truth, p.truth);
        // Unchanged on an empty selection.
        let q = perturb_malfunction(&s, &[]).unwrap();
        assert_eq!(s.scene, q.scene);
        // All cameras -> nothing anywhere.
        let r = perturb_malfunction(&s, &[0, 1, 2]).unwrap();
        assert_eq!(r.scene.iter_detections().count(), 0);
    }
}
