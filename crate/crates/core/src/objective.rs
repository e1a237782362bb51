//! Training-signal kernels: shared patch masking, feature splitting, and
//! the separation / distillation / reconstruction losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{PatchGrid, PatchTensor};

/// Which patch indices are hidden at one timestep. The same plan is applied
/// to every camera and detection of that frame so that reconstruction can
/// draw on spatially corresponding content from other views.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    pub grid: PatchGrid,
    pub rho: f64,
    masked: Vec<usize>,
    visible: Vec<usize>,
}

impl MaskPlan {
    pub fn masked(&self) -> &[usize] {
        &self.masked
    }

    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn num_visible(&self) -> usize {
        self.visible.len()
    }

    pub fn is_masked(&self, patch: usize) -> bool {
        self.masked.binary_search(&patch).is_ok()
    }
}

/// Draws `round(rho * M)` masked indices uniformly without replacement,
/// deterministically in (frame, seed). Every camera and detection at one
/// frame therefore shares the identical plan.
pub fn sample_shared_mask(grid: &PatchGrid, rho: f64, frame: u64, seed: u64) -> Result<MaskPlan> {
    if !rho.is_finite() || !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!(
            "mask ratio must lie in [0, 1), got {rho}"
        )));
    }
    let m = grid.patch_count;
    // Half-up rounding so arbitrary ratios stay well defined.
    let masked_count = (rho * m as f64 + 0.5).floor() as usize;

    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&frame.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);

    // Partial Fisher-Yates over the index range.
    let mut indices: Vec<usize> = (0..m).collect();
    for i in 0..masked_count {
        let j = rng.random_range(i..m);
        indices.swap(i, j);
    }
    let mut masked: Vec<usize> = indices[..masked_count].to_vec();
    masked.sort_unstable();
    let mut visible: Vec<usize> = Vec::with_capacity(m - masked_count);
    let mut cursor = 0;
    for p in 0..m {
        if cursor < masked.len() && masked[cursor] == p {
            cursor += 1;
        } else {
            visible.push(p);
        }
    }
    Ok(MaskPlan {
        grid: *grid,
        rho,
        masked,
        visible,
    })
}

/// Splits rows of even width E into their first-half and second-half
/// columns (view-agnostic and view-specific parts).
pub fn split_features(features: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let width = features.first().map_or(0, |r| r.len());
    if width % 2 != 0 || width == 0 {
        return Err(Error::invalid(format!(
            "feature width must be even and nonzero, got {width}"
        )));
    }
    let half = width / 2;
    let mut agnostic = Vec::with_capacity(features.len());
    let mut specific = Vec::with_capacity(features.len());
    for row in features {
        if row.len() != width {
            return Err(Error::invalid("feature rows must share one width"));
        }
        agnostic.push(row[..half].to_vec());
        specific.push(row[half..].to_vec());
    }
    Ok((agnostic, specific))
}

/// Normalized mutual information between two batches of vectors, reduced to
/// scalar summaries (per-vector means) and estimated with an equal-width
/// binned joint histogram. Returns MI / sqrt(Hx * Hy) in [0, 1], or 0 when
/// either marginal entropy vanishes.
///
/// Only first-moment dependence is detected; that limitation is accepted in
/// exchange for a deterministic, testable estimator.
pub fn nmi_loss(agnostic: &[Vec<f64>], specific: &[Vec<f64>], bins: usize) -> Result<f64> {
    if agnostic.len() != specific.len() {
        return Err(Error::invalid(format!(
            "batch sizes differ: {} vs {}",
            agnostic.len(),
            specific.len()
        )));
    }
    if agnostic.len() < 2 {
        return Err(Error::invalid("NMI needs a batch of at least 2"));
    }
    if bins < 2 {
        return Err(Error::invalid("NMI needs at least 2 bins"));
    }
    let xs: Vec<f64> = agnostic.iter().map(|v| mean(v)).collect();
    let ys: Vec<f64> = specific.iter().map(|v| mean(v)).collect();

    let bx = match quantize(&xs, bins) {
        Some(b) => b,
        None => return Ok(0.0), // constant stream, zero entropy
    };
    let by = match quantize(&ys, bins) {
        Some(b) => b,
        None => return Ok(0.0),
    };

    let n = xs.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut mx = vec![0usize; bins];
    let mut my = vec![0usize; bins];
    for (&i, &j) in bx.iter().zip(&by) {
        joint[i * bins + j] += 1;
        mx[i] += 1;
        my[j] += 1;
    }

    let hx = entropy(&mx, n);
    let hy = entropy(&my, n);
    if hx == 0.0 || hy == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / n;
            let px = mx[i] as f64 / n;
            let py = my[j] as f64 / n;
            mi += pxy * (pxy / (px * py)).ln();
        }
    }
    Ok((mi / (hx * hy).sqrt()).clamp(0.0, 1.0))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Equal-width bin memberships over the stream's own min-max range, or
/// `None` for a constant stream.
fn quantize(values: &[f64], bins: usize) -> Option<Vec<usize>> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return None;
    }
    let width = (max - min) / bins as f64;
    Some(
        values
            .iter()
            .map(|&v| (((v - min) / width) as usize).min(bins - 1))
            .collect(),
    )
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Smooth L1 loss averaged over all elements: 0.5 d^2 for |d| < 1, else
/// |d| - 0.5.
pub fn smooth_l1(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "smooth L1 needs equal nonzero shapes, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = (p - t).abs();
            if d < 1.0 {
                0.5 * d * d
            } else {
                d - 0.5
            }
        })
        .sum();
    Ok(total / pred.len() as f64)
}

/// Mean squared error over masked-patch entries only; visible patches
/// contribute nothing.
pub fn masked_mse(recon: &PatchTensor, original: &PatchTensor, plan: &MaskPlan) -> Result<f64> {
    if recon.grid != original.grid || recon.grid != plan.grid {
        return Err(Error::invalid("reconstruction, original and mask plan must share one grid"));
    }
    if recon.patch_dim != original.patch_dim {
        return Err(Error::invalid("patch dims differ between reconstruction and original"));
    }
    if plan.masked().is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &p in plan.masked() {
        for (a, b) in recon.patch(p).iter().zip(original.patch(p)) {
            let d = a - b;
            total += d * d;
        }
    }
    Ok(total / (plan.masked().len() * recon.patch_dim) as f64)
}

/// Weighted combination of the three objective components.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossReport {
    pub l_sep: f64,
    pub l_distill: f64,
    pub l_recon: f64,
    pub total: f64,
    pub weights: (f64, f64, f64),
}

pub fn total_loss(l_sep: f64, l_distill: f64, l_recon: f64, weights: (f64, f64, f64)) -> LossReport {
    let total = weights.0 * l_sep + weights.1 * l_distill + weights.2 * l_recon;
    LossReport {
        l_sep,
        l_distill,
        l_recon,
        total,
        weights,
    }
}
