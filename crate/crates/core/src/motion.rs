//! Constant-velocity Kalman filter over bounding-box state.
//!
//! State is the 8-vector (cx, cy, aspect, height, vcx, vcy, vaspect,
//! vheight) with dt fixed to one frame. Noise scales follow the DeepSORT
//! convention: position std 1/20 of the box height, velocity std 1/160.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::types::BoundingBox;

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
type Measurement = SVector<f64, 4>;
type MeasCov = SMatrix<f64, 4, 4>;
type Projection = SMatrix<f64, 4, 8>;

const STD_WEIGHT_POSITION: f64 = 1.0 / 20.0;
const STD_WEIGHT_VELOCITY: f64 = 1.0 / 160.0;

/// 95% quantile of the chi-square distribution with 4 degrees of freedom,
/// used as the motion gate on squared Mahalanobis distances.
pub const CHI2_GATE_4DOF_95: f64 = 9.4877;

/// Gaussian belief over box state. Covariance stays symmetric
/// positive-semidefinite through predict/update cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

fn measurement_of(bbox: &BoundingBox) -> Measurement {
    Measurement::new(bbox.center_x(), bbox.center_y(), bbox.aspect(), bbox.height)
}

fn transition() -> StateMatrix {
    let mut f = StateMatrix::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn projection() -> Projection {
    let mut h = Projection::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

/// Initializes a track state from its first measurement: positions from the
/// box, velocities zero, covariance from height-scaled standard deviations.
pub fn kf_init(bbox: &BoundingBox) -> KalmanState {
    let z = measurement_of(bbox);
    let mut mean = StateVector::zeros();
    for i in 0..4 {
        mean[i] = z[i];
    }
    let h = bbox.height;
    let std = [
        2.0 * STD_WEIGHT_POSITION * h,
        2.0 * STD_WEIGHT_POSITION * h,
        1e-2,
        2.0 * STD_WEIGHT_POSITION * h,
        10.0 * STD_WEIGHT_VELOCITY * h,
        10.0 * STD_WEIGHT_VELOCITY * h,
        1e-5,
        10.0 * STD_WEIGHT_VELOCITY * h,
    ];
    let mut covariance = StateMatrix::zeros();
    for i in 0..8 {
        covariance[(i, i)] = std[i] * std[i];
    }
    KalmanState { mean, covariance }
}

fn process_noise(height: f64) -> StateMatrix {
    let std = [
        STD_WEIGHT_POSITION * height,
        STD_WEIGHT_POSITION * height,
        1e-2,
        STD_WEIGHT_POSITION * height,
        STD_WEIGHT_VELOCITY * height,
        STD_WEIGHT_VELOCITY * height,
        1e-5,
        STD_WEIGHT_VELOCITY * height,
    ];
    let mut q = StateMatrix::zeros();
    for i in 0..8 {
        q[(i, i)] = std[i] * std[i];
    }
    q
}

fn measurement_noise(height: f64) -> MeasCov {
    let std = [
        STD_WEIGHT_POSITION * height,
        STD_WEIGHT_POSITION * height,
        1e-1,
        STD_WEIGHT_POSITION * height,
    ];
    let mut r = MeasCov::zeros();
    for i in 0..4 {
        r[(i, i)] = std[i] * std[i];
    }
    r
}

/// Advances the belief one frame under the constant-velocity model.
pub fn kf_predict(state: &KalmanState) -> KalmanState {
    let f = transition();
    let q = process_noise(state.mean[3]);
    let mean = f * state.mean;
    let covariance = f * state.covariance * f.transpose() + q;
    KalmanState {
        mean,
        covariance: symmetrize(&covariance),
    }
}

/// Projects the belief into measurement space, including measurement noise.
fn innovation(state: &KalmanState) -> (Measurement, MeasCov) {
    let h = projection();
    let projected_mean = h * state.mean;
    let s = h * state.covariance * h.transpose() + measurement_noise(state.mean[3]);
    (projected_mean, s)
}

/// Standard Kalman correction on the 4-d measurement (cx, cy, aspect, height).
pub fn kf_update(state: &KalmanState, bbox: &BoundingBox) -> Result<KalmanState> {
    let h = projection();
    let (projected_mean, s) = innovation(state);
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::numeric("singular innovation covariance in Kalman update"))?;
    // Gain K = P Hᵀ S⁻¹ via the Cholesky solve S X = H P, K = Xᵀ.
    let kt = chol.solve(&(h * state.covariance));
    let gain = kt.transpose();
    let residual = measurement_of(bbox) - projected_mean;
    let mean = state.mean + gain * residual;
    let covariance = state.covariance - gain * s * gain.transpose();
    Ok(KalmanState {
        mean,
        covariance: symmetrize(&covariance),
    })
}

/// Squared Mahalanobis distance of a measurement from the predicted
/// measurement distribution. Gate against [`CHI2_GATE_4DOF_95`].
pub fn mahalanobis(state: &KalmanState, bbox: &BoundingBox) -> Result<f64> {
    let (projected_mean, s) = innovation(state);
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::numeric("singular innovation covariance in Mahalanobis gate"))?;
    let d = measurement_of(bbox) - projected_mean;
    let solved = chol.solve(&d);
    Ok(d.dot(&solved))
}

/// Monte-Carlo acceptance rate of the chi-square gate on samples drawn from
/// the predicted measurement distribution.
pub fn gate_acceptance_rate(state: &KalmanState, samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};

    let (mean, s) = innovation(state);
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::numeric("singular innovation covariance while sampling"))?;
    let l = chol.l();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0usize;
    for _ in 0..samples {
        let xi = Measurement::from_fn(|_, _| rng.sample(rand_distr::StandardNormal));
        let z = mean + l * xi;
        let (cx, cy, aspect, height) = (z[0], z[1], z[2], z[3]);
        let width = aspect * height;
        if width <= 0.0 || height <= 0.0 {
            // Degenerate sample cannot form a box; treat as rejected.
            continue;
        }
        let bbox = BoundingBox::new(cx - width / 2.0, cy - height / 2.0, width, height)?;
        if mahalanobis(state, &bbox)? <= CHI2_GATE_4DOF_95 {
            accepted += 1;
        }
    }
    Ok(accepted as f64 / samples as f64)
}

fn symmetrize(m: &StateMatrix) -> StateMatrix {
    (m + m.transpose()) * 0.5
}
