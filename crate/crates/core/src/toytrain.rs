//! Desk-scale trainable encoder stack exercising the objective kernels.
//!
//! The stand-in architecture keeps every piece linear and transparent:
//! a per-patch linear encoder whose output splits into view-agnostic and
//! view-specific halves, a fixed random orthonormal-projection teacher over
//! the unmasked crop, a single scaled-dot-product attention layer mixing
//! pooled view-agnostic embeddings across all detections of one frame, a
//! linear distillation head (with a learned token standing in at masked
//! positions), and a linear reconstruction head fed the attended embedding,
//! the refined patch feature and a sinusoidal position code.
//!
//! Training is plain full-batch-per-frame gradient descent with analytic
//! gradients for every linear and attention layer, verified against central
//! finite differences in the test suite. The separation loss uses the
//! histogram NMI estimator, which is piecewise constant in the parameters;
//! its almost-everywhere gradient is zero, so it is monitored in the loss
//! curve while distillation and reconstruction drive the updates.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assignment::{similarity_to_cost, solve_assignment};
use crate::error::{Error, Result};
use crate::objective::{nmi_loss, sample_shared_mask, total_loss, LossReport, MaskPlan};
use crate::types::{cosine_similarity, Detection, EmbeddingPair, PatchGrid, PatchTensor, Scene};

/// Dimension of the sinusoidal patch-position code fed to reconstruction.
pub const POS_DIM: usize = 8;

/// Bin count for the separation (NMI) estimate.
pub const NMI_BINS: usize = 8;

/// Full-scale reference dimensions, kept for documentation; the toy runs
/// with the small defaults below.
pub const REFERENCE_EMBED_DIM: usize = 768;
pub const REFERENCE_DECODER_DIM: usize = 512;
pub const REFERENCE_TEACHER_DIM: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrainConfig {
    /// Encoder output dimension E (even; halves are E/2).
    pub embed_dim: usize,
    /// Decoder feature dimension Ed.
    pub decoder_dim: usize,
    /// Teacher feature dimension Et.
    pub teacher_dim: usize,
    pub rho: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Frames whose gradients are averaged into one update step.
    pub batch_frames: usize,
    pub seed: u64,
    /// (separation, distillation, reconstruction) loss weights.
    pub weights: (f64, f64, f64),
    /// Per-patch, per-channel normalization of reconstruction targets.
    pub normalize_targets: bool,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            decoder_dim: 16,
            teacher_dim: 16,
            rho: 0.75,
            learning_rate: 8.0,
            epochs: 50,
            batch_frames: 1,
            seed: 7,
            weights: (1.0, 1.0, 1.0),
            normalize_targets: true,
        }
    }
}

impl ToyTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.embed_dim % 2 != 0 {
            return Err(Error::invalid("embed_dim must be even and positive"));
        }
        if self.decoder_dim == 0 || self.teacher_dim == 0 {
            return Err(Error::invalid("decoder and teacher dims must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid("mask ratio must lie in [0, 1)"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_frames == 0 {
            return Err(Error::invalid("batch_frames must be at least 1"));
        }
        Ok(())
    }

    pub fn half_dim(&self) -> usize {
        self.embed_dim / 2
    }
}

/// All learnable parameters. Matrices map inputs on the right: y = W x.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ToyEncoderParams {
    /// Per-patch encoder, E x P.
    pub w_enc: DMatrix<f64>,
    /// Attention matrices of the cross-view mixer, (E/2) x (E/2).
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
    pub w_o: DMatrix<f64>,
    /// Stand-in input for masked positions of the distillation head, E/2.
    pub mask_token: DVector<f64>,
    /// Distillation head, Ed x (E/2).
    pub w_dist: DMatrix<f64>,
    /// Projection into the teacher space, Et x Ed.
    pub w_proj: DMatrix<f64>,
    /// Reconstruction head, P x (E/2 + Ed + POS_DIM).
    pub w_rec: DMatrix<f64>,
}

impl ToyEncoderParams {
    /// Seeded initialization. The encoder starts near zero so its halves
    /// grow only along directions their own losses demand; the heads start
    /// at ordinary 1/sqrt(fan-in) scale so gradients flow from step one.
    pub fn init(cfg: &ToyTrainConfig, patch_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let half = cfg.half_dim();
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[16] = 0x70; // parameter-init stream
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut mat = |rows: usize, cols: usize, scale: f64| {
            DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
        };
        let w_enc = mat(cfg.embed_dim, patch_dim, 0.05);
        let attn_scale = 1.0 / (half as f64).sqrt();
        let w_q = mat(half, half, attn_scale);
        let w_k = mat(half, half, attn_scale);
        let w_v = mat(half, half, attn_scale);
        let w_o = mat(half, half, attn_scale);
        let w_dist = mat(cfg.decoder_dim, half, 1.0 / (half as f64).sqrt());
        let w_proj = mat(cfg.teacher_dim, cfg.decoder_dim, 1.0 / (cfg.decoder_dim as f64).sqrt());
        let rec_in = half + cfg.decoder_dim + POS_DIM;
        let w_rec = mat(patch_dim, rec_in, 1.0 / (rec_in as f64).sqrt());
        let mask_token = DVector::from_fn(half, |_, _| 0.02 * rng.sample::<f64, _>(StandardNormal));
        Ok(Self {
            w_enc,
            w_q,
            w_k,
            w_v,
            w_o,
            mask_token,
            w_dist,
            w_proj,
            w_rec,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_enc: DMatrix::zeros(self.w_enc.nrows(), self.w_enc.ncols()),
            w_q: DMatrix::zeros(self.w_q.nrows(), self.w_q.ncols()),
            w_k: DMatrix::zeros(self.w_k.nrows(), self.w_k.ncols()),
            w_v: DMatrix::zeros(self.w_v.nrows(), self.w_v.ncols()),
            w_o: DMatrix::zeros(self.w_o.nrows(), self.w_o.ncols()),
            mask_token: DVector::zeros(self.mask_token.len()),
            w_dist: DMatrix::zeros(self.w_dist.nrows(), self.w_dist.ncols()),
            w_proj: DMatrix::zeros(self.w_proj.nrows(), self.w_proj.ncols()),
            w_rec: DMatrix::zeros(self.w_rec.nrows(), self.w_rec.ncols()),
        }
    }

    /// self += factor * other, part by part.
    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        self.w_enc += factor * &other.w_enc;
        self.w_q += factor * &other.w_q;
        self.w_k += factor * &other.w_k;
        self.w_v += factor * &other.w_v;
        self.w_o += factor * &other.w_o;
        self.mask_token += factor * &other.mask_token;
        self.w_dist += factor * &other.w_dist;
        self.w_proj += factor * &other.w_proj;
        self.w_rec += factor * &other.w_rec;
    }

    fn slices(&self) -> [&[f64]; 9] {
        [
            self.w_enc.as_slice(),
            self.w_q.as_slice(),
            self.w_k.as_slice(),
            self.w_v.as_slice(),
            self.w_o.as_slice(),
            self.mask_token.as_slice(),
            self.w_dist.as_slice(),
            self.w_proj.as_slice(),
            self.w_rec.as_slice(),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.w_enc.as_mut_slice(),
            self.w_q.as_mut_slice(),
            self.w_k.as_mut_slice(),
            self.w_v.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.mask_token.as_mut_slice(),
            self.w_dist.as_mut_slice(),
            self.w_proj.as_mut_slice(),
            self.w_rec.as_mut_slice(),
        ]
    }

    /// Human-readable name of the part holding flat index `idx`.
    pub fn part_name(&self, mut idx: usize) -> &'static str {
        const NAMES: [&str; 9] = [
            "w_enc", "w_q", "w_k", "w_v", "w_o", "mask_token", "w_dist", "w_proj", "w_rec",
        ];
        for (part, name) in self.slices().iter().zip(NAMES) {
            if idx < part.len() {
                return name;
            }
            idx -= part.len();
        }
        "out-of-range"
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn get_flat(&self, mut idx: usize) -> f64 {
        for part in self.slices() {
            if idx < part.len() {
                return part[idx];
            }
            idx -= part.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_flat(&mut self, mut idx: usize, value: f64) {
        for part in self.slices_mut() {
            if idx < part.len() {
                part[idx] = value;
                return;
            }
            idx -= part.len();
        }
        panic!("parameter index out of range");
    }
}

/// Fixed random-projection teacher. Columns are orthonormal whenever the
/// teacher dimension is at least the patch dimension, so per-patch norms are
/// preserved in that regime; generated once per seed and stable for the
/// whole run.
#[derive(Debug, Clone)]
pub struct Teacher {
    pub projection: DMatrix<f64>, // Et x P
}

impl Teacher {
    pub fn new(patch_dim: usize, teacher_dim: usize, seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[16] = 0x71; // teacher stream
        let mut rng = ChaCha8Rng::from_seed(key);
        let projection = if teacher_dim >= patch_dim {
            let g = DMatrix::from_fn(teacher_dim, patch_dim, |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            g.qr().q()
        } else {
            let g = DMatrix::from_fn(patch_dim, teacher_dim, |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            g.qr().q().transpose()
        };
        Self { projection }
    }
}

/// Teacher features for all M patches of the full, unmasked crop.
pub fn teacher_features(det: &Detection, teacher: &Teacher) -> Result<Vec<DVector<f64>>> {
    let crop = det
        .crop
        .as_ref()
        .ok_or_else(|| Error::invalid("teacher features need a detection crop"))?;
    Ok((0..crop.grid.patch_count)
        .map(|p| &teacher.projection * DVector::from_column_slice(crop.patch(p)))
        .collect())
}

/// Encoder output for one detection under a mask plan.
#[derive(Debug, Clone)]
pub struct EncodeOutput {
    /// Pooled halves over visible patches.
    pub pair: EmbeddingPair,
    /// Per visible patch (plan order), E/2 each.
    pub patch_agnostic: Vec<DVector<f64>>,
    pub patch_specific: Vec<DVector<f64>>,
}

/// Applies the per-patch encoder to the visible patches, splits each output
/// evenly, and average-pools both halves into the detection-level pair.
pub fn encode(
    det: &Detection,
    plan: &MaskPlan,
    params: &ToyEncoderParams,
) -> Result<EncodeOutput> {
    let crop = det
        .crop
        .as_ref()
        .ok_or_else(|| Error::invalid("encoding needs a detection crop"))?;
    if crop.grid != plan.grid {
        return Err(Error::invalid("mask plan grid does not match the crop"));
    }
    if plan.visible().is_empty() {
        return Err(Error::invalid("a detection must keep at least one visible patch"));
    }
    let e = params.w_enc.nrows();
    let half = e / 2;
    let mut patch_agnostic = Vec::with_capacity(plan.num_visible());
    let mut patch_specific = Vec::with_capacity(plan.num_visible());
    let mut pooled_a = DVector::zeros(half);
    let mut pooled_s = DVector::zeros(half);
    for &p in plan.visible() {
        let u = &params.w_enc * DVector::from_column_slice(crop.patch(p));
        let a = u.rows(0, half).into_owned();
        let s = u.rows(half, half).into_owned();
        pooled_a += &a;
        pooled_s += &s;
        patch_agnostic.push(a);
        patch_specific.push(s);
    }
    let k = plan.num_visible() as f64;
    pooled_a /= k;
    pooled_s /= k;
    Ok(EncodeOutput {
        pair: EmbeddingPair::new(pooled_a.iter().copied().collect(), pooled_s.iter().copied().collect())?,
        patch_agnostic,
        patch_specific,
    })
}

/// Inference-mode encoding: all patches visible.
pub fn encode_unmasked(det: &Detection, params: &ToyEncoderParams) -> Result<EmbeddingPair> {
    let crop = det
        .crop
        .as_ref()
        .ok_or_else(|| Error::invalid("encoding needs a detection crop"))?;
    let plan = sample_shared_mask(&crop.grid, 0.0, 0, 0)?;
    Ok(encode(det, &plan, params)?.pair)
}

/// One scaled-dot-product attention layer over the whole detection set:
/// order-equivariant, no identity information used.
pub fn cross_view_mix(pooled: &[DVector<f64>], params: &ToyEncoderParams) -> Result<Vec<DVector<f64>>> {
    if pooled.is_empty() {
        return Err(Error::invalid("attention needs a nonempty detection set"));
    }
    Ok(attention_forward(pooled, params).mixed)
}

struct AttentionCache {
    queries: Vec<DVector<f64>>,
    keys: Vec<DVector<f64>>,
    values: Vec<DVector<f64>>,
    /// Row-stochastic attention weights, weights[i][j].
    weights: Vec<Vec<f64>>,
    /// Pre-output mixtures.
    mixtures: Vec<DVector<f64>>,
    /// Final outputs after w_o.
    mixed: Vec<DVector<f64>>,
}

fn attention_forward(pooled: &[DVector<f64>], params: &ToyEncoderParams) -> AttentionCache {
    let n = pooled.len();
    let half = params.w_q.nrows();
    let scale = 1.0 / (half as f64).sqrt();
    let queries: Vec<DVector<f64>> = pooled.iter().map(|g| &params.w_q * g).collect();
    let keys: Vec<DVector<f64>> = pooled.iter().map(|g| &params.w_k * g).collect();
    let values: Vec<DVector<f64>> = pooled.iter().map(|g| &params.w_v * g).collect();
    let mut weights = Vec::with_capacity(n);
    let mut mixtures = Vec::with_capacity(n);
    for i in 0..n {
        let scores: Vec<f64> = (0..n).map(|j| queries[i].dot(&keys[j]) * scale).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let row: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        let mut mix = DVector::zeros(half);
        for (j, value) in values.iter().enumerate() {
            mix += row[j] * value;
        }
        weights.push(row);
        mixtures.push(mix);
    }
    let mixed = mixtures.iter().map(|m| &params.w_o * m).collect();
    AttentionCache {
        queries,
        keys,
        values,
        weights,
        mixtures,
        mixed,
    }
}

/// Sinusoidal position code of a patch index.
pub fn position_code(patch: usize) -> DVector<f64> {
    let mut code = DVector::zeros(POS_DIM);
    for k in 0..POS_DIM / 2 {
        let omega = 1.0 / 10_000f64.powf(2.0 * k as f64 / POS_DIM as f64);
        code[2 * k] = (patch as f64 * omega).sin();
        code[2 * k + 1] = (patch as f64 * omega).cos();
    }
    code
}

/// Predicts pixel values for each masked patch from the attended embedding,
/// the refined per-patch feature, and the position code.
pub fn reconstruct(
    g_hat: &DVector<f64>,
    f_hat_masked: &[DVector<f64>],
    plan: &MaskPlan,
    params: &ToyEncoderParams,
) -> Result<Vec<DVector<f64>>> {
    if f_hat_masked.len() != plan.masked().len() {
        return Err(Error::invalid(
            "one refined feature per masked patch required",
        ));
    }
    Ok(plan
        .masked()
        .iter()
        .zip(f_hat_masked)
        .map(|(&p, f)| {
            let z = stack_recon_input(g_hat, f, p);
            &params.w_rec * z
        })
        .collect())
}

fn stack_recon_input(g_hat: &DVector<f64>, f_hat: &DVector<f64>, patch: usize) -> DVector<f64> {
    let pos = position_code(patch);
    let mut z = DVector::zeros(g_hat.len() + f_hat.len() + POS_DIM);
    z.rows_mut(0, g_hat.len()).copy_from(g_hat);
    z.rows_mut(g_hat.len(), f_hat.len()).copy_from(f_hat);
    z.rows_mut(g_hat.len() + f_hat.len(), POS_DIM).copy_from(&pos);
    z
}

/// Reconstruction target for one patch: raw values, or per-patch,
/// per-channel standardization when `normalize` is set (channel layout
/// follows the synthetic crops: channel = index % channels).
fn recon_target(crop: &PatchTensor, patch: usize, normalize: bool, channels: usize) -> DVector<f64> {
    let raw = crop.patch(patch);
    let mut out = DVector::from_column_slice(raw);
    if !normalize {
        return out;
    }
    let group = raw.len() / channels;
    for c in 0..channels {
        let vals: Vec<f64> = (0..group).map(|i| raw[i * channels + c]).collect();
        let mean: f64 = vals.iter().sum::<f64>() / group as f64;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / group as f64;
        let std = (var + 1e-6).sqrt();
        for i in 0..group {
            out[i * channels + c] = (raw[i * channels + c] - mean) / std;
        }
    }
    out
}

/// Losses of one frame batch (all detections of one frame, every camera).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLosses {
    pub sep: f64,
    pub distill: f64,
    pub recon: f64,
}

/// Forward pass of one frame; see [`frame_loss_and_grad`] for the paired
/// backward pass.
pub fn frame_loss(
    params: &ToyEncoderParams,
    batch: &[&Detection],
    plan: &MaskPlan,
    teacher: &Teacher,
    cfg: &ToyTrainConfig,
) -> Result<FrameLosses> {
    frame_pass(params, batch, plan, teacher, cfg, false).map(|(l, _)| l)
}

/// Forward and analytic backward pass of one frame. The returned gradient
/// covers the weighted distillation and reconstruction terms; the histogram
/// separation loss is piecewise constant with almost-everywhere zero
/// gradient and contributes nothing.
pub fn frame_loss_and_grad(
    params: &ToyEncoderParams,
    batch: &[&Detection],
    plan: &MaskPlan,
    teacher: &Teacher,
    cfg: &ToyTrainConfig,
) -> Result<(FrameLosses, ToyEncoderParams)> {
    let (losses, grads) = frame_pass(params, batch, plan, teacher, cfg, true)?;
    Ok((losses, grads.expect("backward requested")))
}

fn frame_pass(
    params: &ToyEncoderParams,
    batch: &[&Detection],
    plan: &MaskPlan,
    teacher: &Teacher,
    cfg: &ToyTrainConfig,
    backward: bool,
) -> Result<(FrameLosses, Option<ToyEncoderParams>)> {
    if batch.is_empty() {
        return Err(Error::invalid("frame batch must be nonempty"));
    }
    let n = batch.len();
    let half = cfg.half_dim();
    let m = plan.grid.patch_count;
    let channels = crate::synth::CROP_CHANNELS;

    // Encoder forward.
    let encoded: Vec<EncodeOutput> = batch
        .iter()
        .map(|det| encode(det, plan, params))
        .collect::<Result<_>>()?;
    let pooled: Vec<DVector<f64>> = encoded
        .iter()
        .map(|e| DVector::from_column_slice(&e.pair.agnostic))
        .collect();
    let pooled_specific: Vec<Vec<f64>> = encoded.iter().map(|e| e.pair.specific.clone()).collect();

    // Separation report over the frame's pooled halves.
    let sep = if n >= 2 {
        let fa: Vec<Vec<f64>> = encoded.iter().map(|e| e.pair.agnostic.clone()).collect();
        nmi_loss(&fa, &pooled_specific, NMI_BINS)?
    } else {
        0.0
    };

    // Attention over all detections of the frame.
    let attn = attention_forward(&pooled, params);

    // Distillation head over all M positions, and reconstruction over the
    // masked ones.
    let mask_input = &params.mask_token;
    let h_mask = &params.w_dist * mask_input; // shared by every masked slot
    let teacher_all: Vec<Vec<DVector<f64>>> = batch
        .iter()
        .map(|det| teacher_features(det, teacher))
        .collect::<Result<_>>()?;

    let distill_norm = (n * m * cfg.teacher_dim) as f64;
    let recon_norm = (n * plan.masked().len().max(1) * params.w_rec.nrows()) as f64;

    let mut distill_sum = 0.0;
    let mut recon_sum = 0.0;

    let mut grads = if backward { Some(params.zeros_like()) } else { None };
    // Gradients flowing back into each detection's pooled agnostic vector.
    let mut d_pooled: Vec<DVector<f64>> = vec![DVector::zeros(half); n];

    // Cache of per-detection, per-visible-position refined features.
    for (d, det) in batch.iter().enumerate() {
        let crop = det.crop.as_ref().expect("encode verified crop presence");
        let mut d_ghat = DVector::zeros(half);

        // Visible positions: distillation through the patch feature.
        for (slot, &p) in plan.visible().iter().enumerate() {
            let s_patch = &encoded[d].patch_specific[slot];
            let h = &params.w_dist * s_patch;
            let t_hat = &params.w_proj * &h;
            let target = &teacher_all[d][p];
            distill_sum += smooth_l1_sum(&t_hat, target);
            if let Some(g) = grads.as_mut() {
                let d_that = smooth_l1_grad(&t_hat, target) * (cfg.weights.1 / distill_norm);
                g.w_proj += &d_that * h.transpose();
                let d_h = params.w_proj.transpose() * d_that;
                g.w_dist += &d_h * s_patch.transpose();
                let d_s = params.w_dist.transpose() * d_h;
                // Route into the encoder below via the specific half.
                let x = DVector::from_column_slice(crop.patch(p));
                for r in 0..half {
                    for c in 0..x.len() {
                        g.w_enc[(half + r, c)] += d_s[r] * x[c];
                    }
                }
            }
        }

        // Masked positions: distillation through the mask token, and
        // reconstruction of the original pixels.
        for &p in plan.masked() {
            let t_hat = &params.w_proj * &h_mask;
            let target = &teacher_all[d][p];
            distill_sum += smooth_l1_sum(&t_hat, target);

            let z = stack_recon_input(&attn.mixed[d], &h_mask, p);
            let r = &params.w_rec * &z;
            let y = recon_target(crop, p, cfg.normalize_targets, channels);
            let diff = &r - &y;
            recon_sum += diff.norm_squared();

            if let Some(g) = grads.as_mut() {
                let d_that = smooth_l1_grad(&t_hat, target) * (cfg.weights.1 / distill_norm);
                g.w_proj += &d_that * h_mask.transpose();
                let d_h_distill = params.w_proj.transpose() * d_that;

                let d_r = diff * (2.0 * cfg.weights.2 / recon_norm);
                g.w_rec += &d_r * z.transpose();
                let d_z = params.w_rec.transpose() * d_r;
                d_ghat += d_z.rows(0, half);
                let d_h_recon = d_z.rows(half, cfg.decoder_dim).into_owned();

                let d_h = d_h_distill + d_h_recon;
                g.w_dist += &d_h * mask_input.transpose();
                g.mask_token += params.w_dist.transpose() * d_h;
            }
        }

        // Attention backward for this detection's output gradient.
        if let Some(g) = grads.as_mut() {
            let scale = 1.0 / (half as f64).sqrt();
            g.w_o += &d_ghat * attn.mixtures[d].transpose();
            let d_mix = params.w_o.transpose() * d_ghat;
            // Softmax row backward.
            let row = &attn.weights[d];
            let d_alpha: Vec<f64> = (0..n).map(|j| d_mix.dot(&attn.values[j])).collect();
            let dot: f64 = (0..n).map(|j| row[j] * d_alpha[j]).sum();
            let mut d_q = DVector::zeros(half);
            for j in 0..n {
                let d_score = row[j] * (d_alpha[j] - dot);
                d_q += d_score * scale * &attn.keys[j];
                let d_k = d_score * scale * &attn.queries[d];
                g.w_k += &d_k * pooled[j].transpose();
                d_pooled[j] += params.w_k.transpose() * d_k;
                let d_v = row[j] * &d_mix;
                g.w_v += &d_v * pooled[j].transpose();
                d_pooled[j] += params.w_v.transpose() * d_v;
            }
            g.w_q += &d_q * pooled[d].transpose();
            d_pooled[d] += params.w_q.transpose() * d_q;
        }
    }

    // Pooled-agnostic gradients into the encoder's agnostic half.
    if let Some(g) = grads.as_mut() {
        let k = plan.num_visible() as f64;
        for (d, det) in batch.iter().enumerate() {
            let crop = det.crop.as_ref().unwrap();
            let d_patch = &d_pooled[d] / k;
            for &p in plan.visible() {
                let x = crop.patch(p);
                for r in 0..half {
                    for (c, &xv) in x.iter().enumerate() {
                        g.w_enc[(r, c)] += d_patch[r] * xv;
                    }
                }
            }
        }
    }

    let losses = FrameLosses {
        sep,
        distill: distill_sum / distill_norm,
        recon: if plan.masked().is_empty() {
            0.0
        } else {
            recon_sum / recon_norm
        },
    };
    Ok((losses, grads))
}

fn smooth_l1_sum(pred: &DVector<f64>, target: &DVector<f64>) -> f64 {
    pred.iter()
        .zip(target.iter())
        .map(|(p, t)| {
            let d = (p - t).abs();
            if d < 1.0 {
                0.5 * d * d
            } else {
                d - 0.5
            }
        })
        .sum()
}

fn smooth_l1_grad(pred: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(pred.len(), |i, _| (pred[i] - target[i]).clamp(-1.0, 1.0))
}

/// Gradient-descent training over a scene with crops. Every frame is one
/// full batch; `batch_frames` consecutive frames may be averaged into one
/// update. Deterministic in `cfg.seed`. Returns the trained parameters and
/// one loss report per epoch (means over frames).
pub fn train(scene: &Scene, cfg: &ToyTrainConfig) -> Result<(ToyEncoderParams, Vec<LossReport>)> {
    cfg.validate()?;
    let grid = scene
        .iter_detections()
        .find_map(|d| d.crop.as_ref().map(|c| c.grid))
        .ok_or_else(|| Error::invalid("training needs detections with crops"))?;
    let patch_dim = scene
        .iter_detections()
        .find_map(|d| d.crop.as_ref().map(|c| c.patch_dim))
        .unwrap();
    let mut params = ToyEncoderParams::init(cfg, patch_dim, cfg.seed)?;
    let teacher = Teacher::new(patch_dim, cfg.teacher_dim, cfg.seed ^ 0x7ea_c4e5);

    let frames: Vec<u64> = scene.frame_ids().collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sums = FrameLosses {
            sep: 0.0,
            distill: 0.0,
            recon: 0.0,
        };
        let mut frame_count = 0usize;
        let mut pending = params.zeros_like();
        let mut pending_count = 0usize;
        for &frame in &frames {
            let batch: Vec<&Detection> = (0..scene.num_cameras())
                .flat_map(|cam| scene.detections_at(frame, cam).iter())
                .filter(|d| d.crop.is_some())
                .collect();
            if batch.is_empty() {
                continue;
            }
            let plan = sample_shared_mask(&grid, cfg.rho, frame, cfg.seed)?;
            let (losses, grads) = frame_loss_and_grad(&params, &batch, &plan, &teacher, cfg)?;
            for (name, value) in [
                ("separation", losses.sep),
                ("distillation", losses.distill),
                ("reconstruction", losses.recon),
            ] {
                if !value.is_finite() {
                    return Err(Error::numeric(format!(
                        "{name} loss became non-finite at epoch {epoch}, frame {frame}"
                    )));
                }
            }
            sums.sep += losses.sep;
            sums.distill += losses.distill;
            sums.recon += losses.recon;
            frame_count += 1;

            pending.add_scaled(&grads, 1.0);
            pending_count += 1;
            if pending_count == cfg.batch_frames {
                params.add_scaled(&pending, -cfg.learning_rate / pending_count as f64);
                pending = params.zeros_like();
                pending_count = 0;
            }
        }
        if pending_count > 0 {
            params.add_scaled(&pending, -cfg.learning_rate / pending_count as f64);
        }
        if frame_count == 0 {
            return Err(Error::invalid("scene has no frames with crops"));
        }
        let k = frame_count as f64;
        curve.push(total_loss(
            sums.sep / k,
            sums.distill / k,
            sums.recon / k,
            cfg.weights,
        ));
    }
    Ok((params, curve))
}

/// Encodes every detection of a scene in inference mode (no masking) and
/// returns embeddings keyed by (frame, camera, detection index).
pub fn encode_scene(
    scene: &Scene,
    params: &ToyEncoderParams,
) -> Result<BTreeMap<(u64, usize, usize), EmbeddingPair>> {
    let mut out = BTreeMap::new();
    for frame in scene.frame_ids() {
        for camera in 0..scene.num_cameras() {
            for (idx, det) in scene.detections_at(frame, camera).iter().enumerate() {
                if det.crop.is_some() {
                    out.insert((frame, camera, idx), encode_unmasked(det, params)?);
                }
            }
        }
    }
    Ok(out)
}

/// Held-out accuracy of a multinomial logistic regression predicting the
/// camera label from a frozen embedding. Fixed 200 epochs at learning rate
/// 0.1 on standardized features; the split is seed-deterministic.
pub fn camera_probe(
    samples: &[(Vec<f64>, usize)],
    held_out_fraction: f64,
    seed: u64,
) -> Result<f64> {
    if !(0.0 < held_out_fraction && held_out_fraction < 1.0) {
        return Err(Error::invalid("held-out fraction must lie in (0, 1)"));
    }
    let mut per_class: BTreeMap<usize, usize> = BTreeMap::new();
    for (_, label) in samples {
        *per_class.entry(*label).or_default() += 1;
    }
    if per_class.len() < 2 {
        return Err(Error::invalid("camera probe needs at least two cameras"));
    }
    if per_class.values().any(|&c| c < 10) {
        return Err(Error::invalid("camera probe needs at least 10 samples per camera"));
    }
    let classes: Vec<usize> = per_class.keys().copied().collect();
    let class_index: BTreeMap<usize, usize> =
        classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let dim = samples[0].0.len();
    if samples.iter().any(|(v, _)| v.len() != dim) {
        return Err(Error::invalid("probe samples must share one dimension"));
    }

    // Seed-deterministic shuffled split.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[16] = 0x72; // probe-split stream
    let mut rng = ChaCha8Rng::from_seed(key);
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let n_test = ((samples.len() as f64 * held_out_fraction).round() as usize)
        .clamp(1, samples.len() - 1);
    let (test_idx, train_idx) = order.split_at(n_test);

    // Standardize on training statistics.
    let mut mean = vec![0.0f64; dim];
    for &i in train_idx {
        for (k, v) in samples[i].0.iter().enumerate() {
            mean[k] += v;
        }
    }
    for v in &mut mean {
        *v /= train_idx.len() as f64;
    }
    let mut std = vec![0.0f64; dim];
    for &i in train_idx {
        for (k, v) in samples[i].0.iter().enumerate() {
            std[k] += (v - mean[k]) * (v - mean[k]);
        }
    }
    for v in &mut std {
        *v = (*v / train_idx.len() as f64).sqrt();
        if *v == 0.0 {
            *v = 1.0;
        }
    }
    let feature = |i: usize| -> DVector<f64> {
        let mut x = DVector::zeros(dim + 1);
        for k in 0..dim {
            x[k] = (samples[i].0[k] - mean[k]) / std[k];
        }
        x[dim] = 1.0;
        x
    };

    let c = classes.len();
    let mut w = DMatrix::<f64>::zeros(c, dim + 1);
    let lr = 0.1;
    for _ in 0..200 {
        let mut grad = DMatrix::<f64>::zeros(c, dim + 1);
        for &i in train_idx {
            let x = feature(i);
            let logits = &w * &x;
            let max = logits.max();
            let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let target = class_index[&samples[i].1];
            for k in 0..c {
                let p = exps[k] / sum;
                let err = p - if k == target { 1.0 } else { 0.0 };
                for j in 0..=dim {
                    grad[(k, j)] += err * x[j];
                }
            }
        }
        w -= (lr / train_idx.len() as f64) * grad;
    }

    let mut correct = 0usize;
    for &i in test_idx {
        let logits = &w * feature(i);
        let mut best = 0usize;
        for k in 1..c {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        if classes[best] == samples[i].1 {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_idx.len() as f64)
}

/// Fraction of ground-truth cross-camera co-occurrences recovered by
/// bipartite matching on cosine similarity of the given per-detection
/// features. Features are keyed by (frame, camera, detection index);
/// detections without a feature or label are skipped.
pub fn cross_view_match_accuracy(
    scene: &Scene,
    features: &BTreeMap<(u64, usize, usize), Vec<f64>>,
) -> Result<f64> {
    let gt = scene
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::invalid("matching accuracy needs ground-truth labels"))?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for frame in scene.frame_ids() {
        let mut per_camera: Vec<Vec<(u32, &Vec<f64>)>> = Vec::new();
        for camera in 0..scene.num_cameras() {
            let mut list = Vec::new();
            for (idx, _) in scene.detections_at(frame, camera).iter().enumerate() {
                if let (Some(id), Some(feat)) = (
                    gt.get(&(frame, camera, idx)),
                    features.get(&(frame, camera, idx)),
                ) {
                    list.push((*id, feat));
                }
            }
            per_camera.push(list);
        }
        for a in 0..per_camera.len() {
            for b in a + 1..per_camera.len() {
                let (left, right) = (&per_camera[a], &per_camera[b]);
                if left.is_empty() || right.is_empty() {
                    continue;
                }
                let shared: usize = left
                    .iter()
                    .filter(|(id, _)| right.iter().any(|(jd, _)| jd == id))
                    .count();
                if shared == 0 {
                    continue;
                }
                total += shared;
                let mut sim = vec![vec![0.0; right.len()]; left.len()];
                for (i, (_, fi)) in left.iter().enumerate() {
                    for (j, (_, fj)) in right.iter().enumerate() {
                        sim[i][j] = cosine_similarity(fi, fj)?;
                    }
                }
                let matching = solve_assignment(&similarity_to_cost(&sim, -1.0)?);
                for (i, j) in matching.pairs {
                    if left[i].0 == right[j].0 {
                        correct += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::undefined(
            "no cross-camera co-occurrences in the scene",
        ));
    }
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};
    use crate::types::BoundingBox;

    fn toy_cfg() -> ToyTrainConfig {
        ToyTrainConfig::default()
    }

    fn mini_scene(frames: usize, seed: u64) -> Scene {
        generate(&SynthConfig {
            num_identities: 4,
            num_frames: frames,
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
        .scene
    }

    fn crop_det(values: Vec<f64>) -> Detection {
        let grid = PatchGrid::new(8, 8, 2, 2).unwrap();
        let mut det = Detection::new(0, 0, BoundingBox::new(0.0, 0.0, 8.0, 8.0).unwrap(), 1.0).unwrap();
        det.crop = Some(PatchTensor::new(grid, 12, values).unwrap());
        det
    }

    #[test]
    fn encode_identity_single_patch() {
        // With a square identity-like encoder (E = P) and one visible patch,
        // the embedding equals that patch's values split in half.
        let cfg = ToyTrainConfig {
            embed_dim: 12,
            ..toy_cfg()
        };
        let mut params = ToyEncoderParams::init(&cfg, 12, 1).unwrap();
        params.w_enc = DMatrix::identity(12, 12);
        let values: Vec<f64> = (0..192).map(|i| (i % 97) as f64 / 100.0).collect();
        let det = crop_det(values.clone());
        // rho close to 1 leaves exactly one visible patch out of 16.
        let plan = sample_shared_mask(&det.crop.as_ref().unwrap().grid, 0.9375, 0, 3).unwrap();
        assert_eq!(plan.num_visible(), 1);
        let p = plan.visible()[0];
        let out = encode(&det, &plan, &params).unwrap();
        let patch = det.crop.as_ref().unwrap().patch(p);
        assert_eq!(out.pair.agnostic.as_slice(), &patch[..6]);
        assert_eq!(out.pair.specific.as_slice(), &patch[6..]);
    }

    #[test]
    fn encode_constant_crop_is_mask_invariant() {
        let cfg = toy_cfg();
        let params = ToyEncoderParams::init(&cfg, 12, 1).unwrap();
        let det = crop_det(vec![0.25; 192]);
        let grid = det.crop.as_ref().unwrap().grid;
        let a = encode(&det, &sample_shared_mask(&grid, 0.0, 0, 1).unwrap(), &params).unwrap();
        let b = encode(&det, &sample_shared_mask(&grid, 0.5, 0, 1).unwrap(), &params).unwrap();
        for (x, y) in a.pair.agnostic.iter().zip(&b.pair.agnostic) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_deterministic() {
        let cfg = toy_cfg();
        let params = ToyEncoderParams::init(&cfg, 12, 1).unwrap();
        let det = crop_det((0..192).map(|i| (i as f64).sin().abs()).collect());
        let plan = sample_shared_mask(&det.crop.as_ref().unwrap().grid, 0.75, 4, 9).unwrap();
        let a = encode(&det, &plan, &params).unwrap();
        let b = encode(&det, &plan, &params).unwrap();
        assert_eq!(a.pair, b.pair);
    }

    #[test]
    fn teacher_is_fixed_and_isometric_when_square() {
        let det = crop_det((0..192).map(|i| ((i * 31) % 100) as f64 / 100.0).collect());
        let t1 = Teacher::new(12, 12, 5);
        let t2 = Teacher::new(12, 12, 5);
        assert_eq!(t1.projection, t2.projection);
        let f1 = teacher_features(&det, &t1).unwrap();
        let f2 = teacher_features(&det, &t2).unwrap();
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(a, b);
        }
        // Orthonormal columns preserve per-patch norms at Et = P.
        let crop = det.crop.as_ref().unwrap();
        for (p, feat) in f1.iter().enumerate() {
            let norm_in = DVector::from_column_slice(crop.patch(p)).norm();
            assert!((feat.norm() - norm_in).abs() < 1e-6);
        }
        // A different seed projects into a different space.
        let t3 = Teacher::new(12, 12, 6);
        let f3 = teacher_features(&det, &t3).unwrap();
        let c = cosine_similarity(f1[0].as_slice(), f3[0].as_slice()).unwrap();
        assert!(c < 1.0);
    }

    #[test]
    fn attention_singleton_is_linear_map() {
        let cfg = toy_cfg();
        let params = ToyEncoderParams::init(&cfg, 12, 2).unwrap();
        let g = DVector::from_fn(cfg.half_dim(), |i, _| (i as f64 + 1.0) / 10.0);
        let out = cross_view_mix(std::slice::from_ref(&g), &params).unwrap();
        let expected = &params.w_o * (&params.w_v * &g);
        assert!((out[0].clone() - expected).norm() < 1e-12);
    }

    #[test]
    fn attention_is_order_equivariant() {
        let cfg = toy_cfg();
        let params = ToyEncoderParams::init(&cfg, 12, 2).unwrap();
        let gs: Vec<DVector<f64>> = (0..4)
            .map(|k| DVector::from_fn(cfg.half_dim(), |i, _| ((i + k) as f64 * 0.37).sin()))
            .collect();
        let fwd = cross_view_mix(&gs, &params).unwrap();
        let mut rev_in = gs.clone();
        rev_in.reverse();
        let mut rev = cross_view_mix(&rev_in, &params).unwrap();
        rev.reverse();
        for (a, b) in fwd.iter().zip(&rev) {
            assert!((a.clone() - b.clone()).norm() < 1e-12);
        }
    }

    #[test]
    fn attention_identical_inputs_identical_outputs() {
        let cfg = toy_cfg();
        let params = ToyEncoderParams::init(&cfg, 12, 2).unwrap();
        let g = DVector::from_fn(cfg.half_dim(), |i, _| (i as f64 * 0.21).cos());
        let out = cross_view_mix(&[g.clone(), g.clone()], &params).unwrap();
        assert!((out[0].clone() - out[1].clone()).norm() < 1e-12);
    }

    #[test]
    fn reconstruct_shapes_and_broadcast() {
        let cfg = toy_cfg();
        let mut params = ToyEncoderParams::init(&cfg, 12, 2).unwrap();
        let grid = PatchGrid::new(8, 8, 2, 2).unwrap();
        let plan = sample_shared_mask(&grid, 0.75, 1, 1).unwrap();
        let g_hat = DVector::from_element(cfg.half_dim(), 0.3);
        let f_hat: Vec<DVector<f64>> =
            vec![DVector::from_element(cfg.decoder_dim, 0.1); plan.masked().len()];
        let out = reconstruct(&g_hat, &f_hat, &plan, &params).unwrap();
        assert_eq!(out.len(), plan.masked().len());

        // Zero parameters produce zero predictions.
        params.w_rec.fill(0.0);
        let zeros = reconstruct(&g_hat, &f_hat, &plan, &params).unwrap();
        assert!(zeros.iter().all(|r| r.norm() == 0.0));

        // Changing g_hat changes every masked prediction.
        let mut params2 = ToyEncoderParams::init(&cfg, 12, 2).unwrap();
        params2.w_rec = DMatrix::from_fn(12, cfg.half_dim() + cfg.decoder_dim + POS_DIM, |r, c| {
            ((r * 7 + c) % 13) as f64 / 13.0
        });
        let base = reconstruct(&g_hat, &f_hat, &plan, &params2).unwrap();
        let shifted = reconstruct(
            &(g_hat.clone() * 2.0),
            &f_hat,
            &plan,
            &params2,
        )
        .unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a.clone() - b.clone()).norm() > 0.0);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters_and_losses_constant() {
        // lr > 0 is required by validate; emulate lr = 0 by comparing the
        // loss code path across identical passes instead.
        let scene = mini_scene(4, 11);
        let cfg = ToyTrainConfig {
            epochs: 2,
            learning_rate: 1e-12,
            ..toy_cfg()
        };
        let (_, curve) = train(&scene, &cfg).unwrap();
        assert_eq!(curve.len(), 2);
        assert!((curve[0].total - curve[1].total).abs() < 1e-6);
    }

    #[test]
    fn training_descends_on_mini_scene() {
        let scene = mini_scene(12, 5);
        let cfg = ToyTrainConfig {
            epochs: 8,
            ..toy_cfg()
        };
        let (_, curve) = train(&scene, &cfg).unwrap();
        assert!(curve.iter().all(|r| r.total.is_finite()));
        assert!(
            curve.last().unwrap().total < curve[0].total,
            "loss should descend: first {} last {}",
            curve[0].total,
            curve.last().unwrap().total
        );
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let scene = mini_scene(2, 13);
        let cfg = toy_cfg();
        // Micro-batch: all detections of the first frame with crops.
        let batch: Vec<&Detection> = (0..scene.num_cameras())
            .flat_map(|cam| scene.detections_at(0, cam).iter())
            .filter(|d| d.crop.is_some())
            .take(5)
            .collect();
        assert!(batch.len() >= 2, "micro-batch too small");
        let grid = batch[0].crop.as_ref().unwrap().grid;
        let plan = sample_shared_mask(&grid, cfg.rho, 0, cfg.seed).unwrap();
        let teacher = Teacher::new(12, cfg.teacher_dim, 99);
        let params = ToyEncoderParams::init(&cfg, 12, 3).unwrap();

        let (_, grads) = frame_loss_and_grad(&params, &batch, &plan, &teacher, &cfg).unwrap();

        // Differentiable part of the objective.
        let loss_of = |p: &ToyEncoderParams| -> f64 {
            let l = frame_loss(p, &batch, &plan, &teacher, &cfg).unwrap();
            cfg.weights.1 * l.distill + cfg.weights.2 * l.recon
        };

        let h = 1e-5;
        let count = params.param_count();
        // Spot-check a deterministic stride of coordinates across all parts;
        // the acceptance suite sweeps every coordinate.
        let mut checked = 0;
        for idx in (0..count).step_by(7) {
            let orig = params.get_flat(idx);
            let mut plus = params.clone();
            plus.set_flat(idx, orig + h);
            let mut minus = params.clone();
            minus.set_flat(idx, orig - h);
            let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let an = grads.get_flat(idx);
            let denom = an.abs().max(fd.abs());
            let ok = (an - fd).abs() <= 1e-4 * denom || (an - fd).abs() < 1e-9;
            assert!(
                ok,
                "gradient mismatch at {} [{}]: analytic {an}, fd {fd}",
                idx,
                params.part_name(idx)
            );
            checked += 1;
        }
        assert!(checked > 200);
    }

    #[test]
    fn camera_probe_separable_labels() {
        let mut samples = Vec::new();
        for label in 0..3usize {
            for k in 0..40 {
                let mut v = vec![0.0; 3];
                v[label] = 1.0 + (k as f64) * 1e-3;
                samples.push((v, label));
            }
        }
        let acc = camera_probe(&samples, 0.25, 1).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn camera_probe_chance_level_on_random_features() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples: Vec<(Vec<f64>, usize)> = (0..1000)
            .map(|i| {
                let v: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                (v, i % 4)
            })
            .collect();
        let acc = camera_probe(&samples, 0.25, 2).unwrap();
        assert!(
            (acc - 0.25).abs() <= 0.10,
            "expected chance level near 0.25, got {acc}"
        );
    }

    #[test]
    fn camera_probe_rejects_single_class() {
        let samples: Vec<(Vec<f64>, usize)> = (0..40).map(|i| (vec![i as f64], 0)).collect();
        assert!(camera_probe(&samples, 0.25, 1).is_err());
    }

    #[test]
    fn match_accuracy_perfect_with_identity_features() {
        let scenario = generate(&SynthConfig {
            num_identities: 5,
            num_frames: 30,
            miss_rate: 0.0,
            view_noise: 0.0,
            orthogonal_latents: true,
            with_crops: false,
            ..SynthConfig::default()
        })
        .unwrap();
        let features: BTreeMap<(u64, usize, usize), Vec<f64>> = scenario
            .scene
            .ground_truth
            .as_ref()
            .unwrap()
            .iter()
            .map(|(&key, _)| {
                let det = &scenario.scene.detections_at(key.0, key.1)[key.2];
                (key, det.embedding.as_ref().unwrap().agnostic.clone())
            })
            .collect();
        let acc = cross_view_match_accuracy(&scenario.scene, &features).unwrap();
        assert_eq!(acc, 1.0);
    }
}
