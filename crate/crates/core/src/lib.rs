//! Calibration-free multi-camera multi-object tracking toolkit.
//!
//! The crate covers the full inference and evaluation stack for tracking
//! people across synchronized, uncalibrated camera views:
//!
//! * per-camera tracking by detection (Kalman motion model, appearance
//!   affinity, Hungarian assignment) in [`track_single`],
//! * per-timestep cross-view identity merging with a global tracklet bank
//!   in [`track_cross`],
//! * the self-supervised objective kernels (shared patch masking, feature
//!   splitting, separation / distillation / reconstruction losses) in
//!   [`objective`],
//! * a desk-scale trainable encoder exercising those kernels in [`toytrain`],
//! * the evaluation suite (MOTA, IDF1, HOTA, cross-view association scores)
//!   in [`metrics`], and
//! * a deterministic synthetic multi-view scenario generator in [`synth`].
//!
//! Everything is seed-deterministic: identical seeds and inputs produce
//! bitwise-identical outputs.

pub mod assignment;
pub mod error;

pub mod metrics;
pub mod motion;
pub mod objective;
pub mod synth;
pub mod toytrain;
pub mod track_cross;
pub mod track_single;





pub mod types;




pub use error::{Error, Result};
