//! Per-camera tracking by detection: cosine appearance affinity over a
//! feature gallery, hard Mahalanobis motion gating, one global assignment
//! per frame, and tentative/confirmed/deleted lifecycle management.

use std::collections::VecDeque;

use crate::assignment::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::motion::{kf_init, kf_predict, kf_update, mahalanobis, KalmanState, CHI2_GATE_4DOF_95};
use crate::types::{BoundingBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tentative,
    Confirmed,
    Deleted,
}

/// One per-camera track hypothesis.
#[derive(Debug, Clone)]
pub struct Tracklet {
    /// Unique within its camera, never reused.
    pub local_id: u32,
    /// Assigned by cross-view association; the global match always wins.
    pub global_id: Option<u32>,
    pub kalman: KalmanState,
    /// Ring of recent view-specific features, newest last.
    gallery: VecDeque<Vec<f64>>,
    gallery_cap: usize,
    /// Most recent view-agnostic feature.
    pub last_agnostic: Vec<f64>,
    /// Box of the last matched detection.
    pub last_box: BoundingBox,
    pub state: TrackState,
    /// Consecutive-match count; resets when a frame is missed.
    pub hits: u32,
    /// Frames since the last match; 0 means matched this frame.
    pub age: u32,
    pub born_at: u64,
}

impl Tracklet {
    fn new(local_id: u32, det: &Detection, gallery_cap: usize) -> Self {
        let pair = det.embedding.as_ref().expect("caller checked embedding");
        let mut gallery = VecDeque::with_capacity(gallery_cap.min(16));
        gallery.push_back(pair.specific.clone());
        Self {
            local_id,
            global_id: None,
            kalman: kf_init(&det.bbox),
            gallery,
            gallery_cap,
            last_agnostic: pair.agnostic.clone(),
            last_box: det.bbox,
            state: TrackState::Tentative,
            hits: 1,
            age: 0,
            born_at: det.frame,
        }
    }

    pub fn gallery(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.gallery.iter()
    }

    pub fn is_confirmed(&self) -> bool {
        self.state == TrackState::Confirmed
    }

    /// Best cosine similarity between the gallery and a query feature.
    fn gallery_similarity(&self, query: &[f64]) -> Result<f64> {
        let mut best = -1.0f64;
        for entry in &self.gallery {
            best = best.max(crate::types::cosine_similarity(entry, query)?);
        }
        Ok(best)
    }

    fn push_match(&mut self, det: &Detection, n_init: u32) -> Result<()> {
        let pair = det.embedding.as_ref().expect("caller checked embedding");
        self.kalman = kf_update(&self.kalman, &det.bbox)?;
        if self.gallery.len() == self.gallery_cap {
            self.gallery.pop_front();
        }
        self.gallery.push_back(pair.specific.clone());
        self.last_agnostic = pair.agnostic.clone();
        self.last_box = det.bbox;
        self.hits += 1;
        self.age = 0;
        if self.state == TrackState::Tentative && self.hits >= n_init {
            self.state = TrackState::Confirmed;
        }
        Ok(())
    }

    fn push_miss(&mut self, max_age: u32) {
        self.age += 1;
        self.hits = 0;
        if self.age > max_age {
            self.state = TrackState::Deleted;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Consecutive matches needed to confirm a tentative track.
    pub n_init: u32,
    /// Misses tolerated before deletion.
    pub max_age: u32,
    pub gallery_size: usize,
    /// Appearance gate; candidates below it are infeasible.
    pub cosine_gate: f64,
    /// Squared-Mahalanobis motion gate.
    pub motion_gate: f64,
    /// Upper bound on detections per step.
    pub max_detections: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_init: 3,
            max_age: 30,
            gallery_size: 100,
            cosine_gate: 0.4,
            motion_gate: CHI2_GATE_4DOF_95,
            max_detections: 10,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 1 {
            return Err(Error::invalid("n_init must be at least 1"));
        }
        if self.max_age < 1 {
            return Err(Error::invalid("max_age must be at least 1"));
        }
        if self.gallery_size < 1 {
            return Err(Error::invalid("gallery_size must be at least 1"));
        }
        if !(-1.0..=1.0).contains(&self.cosine_gate) {
            return Err(Error::invalid("cosine_gate must lie in [-1, 1]"));
        }
        Ok(())
    }
}

/// Tracking-by-detection state for one camera. A tracker instance must be
/// driven frame by frame by one logical thread; separate cameras run
/// independently.
#[derive(Debug, Clone)]
pub struct SingleCameraTracker {
    camera: usize,
    config: TrackerConfig,
    tracklets: Vec<Tracklet>,
    next_local_id: u32,
}

impl SingleCameraTracker {
    pub fn new(camera: usize, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            camera,
            config,
            tracklets: Vec::new(),
            next_local_id: 0,
        })
    }

    pub fn camera(&self) -> usize {
        self.camera
    }

    /// Live tracklets (tentative and confirmed), in creation order.
    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    pub fn tracklets_mut(&mut self) -> &mut [Tracklet] {
        &mut self.tracklets
    }

    /// Advances the tracker by one frame of detections.
    ///
    /// All detections must carry this camera's index, the same frame, and an
    /// embedding. Matched tracklets are corrected and refreshed, unmatched
    /// ones age (and die past `max_age`), and unmatched detections spawn
    /// tentative tracklets.
    pub fn step(&mut self, frame: u64, detections: &[Detection]) -> Result<()> {
        for det in detections {
            if det.camera != self.camera {
                return Err(Error::invalid(format!(
                    "detection for camera {} fed to tracker of camera {}",
                    det.camera, self.camera
                )));
            }
            if det.frame != frame {
                return Err(Error::invalid(format!(
                    "detection at frame {} fed to step for frame {}",
                    det.frame, frame
                )));
            }
            if det.embedding.is_none() {
                return Err(Error::invalid("tracking requires detection embeddings"));
            }
        }
        if detections.len() > self.config.max_detections {
            return Err(Error::invalid(format!(
                "{} detections exceed the configured maximum {}",
                detections.len(),
                self.config.max_detections
            )));
        }

        for t in &mut self.tracklets {
            t.kalman = kf_predict(&t.kalman);
        }

        // Appearance cost gated by motion: infeasible unless the best
        // gallery similarity clears the cosine gate and the box clears the
        // Mahalanobis gate.
        let mut cost = CostMatrix::infeasible(self.tracklets.len(), detections.len());
        for (i, t) in self.tracklets.iter().enumerate() {
            for (j, det) in detections.iter().enumerate() {
                let sim = t.gallery_similarity(&det.embedding.as_ref().unwrap().specific)?;
                if sim < self.config.cosine_gate {
                    continue;
                }
                if mahalanobis(&t.kalman, &det.bbox)? > self.config.motion_gate {
                    continue;
                }
                cost.set(i, j, -sim)?;
            }
        }
        let matching = solve_assignment(&cost);

        let mut det_matched = vec![false; detections.len()];
        let mut track_matched = vec![false; self.tracklets.len()];
        for &(i, j) in &matching.pairs {
            track_matched[i] = true;
            det_matched[j] = true;
            self.tracklets[i].push_match(&detections[j], self.config.n_init)?;
        }
        for (i, t) in self.tracklets.iter_mut().enumerate() {
            if !track_matched[i] {
                t.push_miss(self.config.max_age);
            }
        }
        self.tracklets.retain(|t| t.state != TrackState::Deleted);

        for (j, det) in detections.iter().enumerate() {
            if det_matched[j] {
                continue;
            }
            let mut t = Tracklet::new(self.next_local_id, det, self.config.gallery_size);
            self.next_local_id += 1;
            if t.hits >= self.config.n_init {
                t.state = TrackState::Confirmed;
            }
            self.tracklets.push(t);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EmbeddingPair;

    fn det(frame: u64, camera: usize, x: f64, agnostic: Vec<f64>, specific: Vec<f64>) -> Detection {
        let mut d = Detection::new(
            frame,
            camera,
            BoundingBox::new(x, 50.0, 10.0, 20.0).unwrap(),
            1.0,
        )
        .unwrap();
        d.embedding = Some(EmbeddingPair::new(agnostic, specific).unwrap());
        d
    }

    #[test]
    fn first_detection_spawns_tentative() {
        let mut tracker = SingleCameraTracker::new(0, TrackerConfig::default()).unwrap();
        tracker
            .step(0, &[det(0, 0, 10.0, vec![1.0, 0.0], vec![1.0, 0.0])])
            .unwrap();
        assert_eq!(tracker.tracklets().len(), 1);
        assert_eq!(tracker.tracklets()[0].state, TrackState::Tentative);
        assert!(!tracker.tracklets()[0].is_confirmed());
    }

    #[test]
    fn confirms_after_n_init_consecutive_matches() {
        let mut tracker = SingleCameraTracker::new(0, TrackerConfig::default()).unwrap();
        for f in 0..5u64 {
            tracker
                .step(f, &[det(f, 0, 10.0 + f as f64, vec![1.0, 0.0], vec![1.0, 0.0])])
                .unwrap();
            let t = &tracker.tracklets()[0];
            if f < 2 {
                assert_eq!(t.state, TrackState::Tentative);
            } else {
                assert_eq!(t.state, TrackState::Confirmed);
            }
            assert_eq!(t.local_id, 0, "local id stays stable");
        }
    }

    #[test]
    fn crossing_objects_keep_identities() {
        // Two objects cross paths with orthogonal view-specific features;
        // appearance must keep their local ids apart.
        let mut tracker = SingleCameraTracker::new(0, TrackerConfig::default()).unwrap();
        let fa = (vec![1.0, 0.0], vec![1.0, 0.0]);
        let fb = (vec![0.0, 1.0], vec![0.0, 1.0]);
        let mut id_of_a = None;
        let mut id_of_b = None;
        for f in 0..20u64 {
            let xa = 10.0 + 4.0 * f as f64; // moves right
            let xb = 90.0 - 4.0 * f as f64; // moves left, crosses xa
            let dets = vec![
                det(f, 0, xa, fa.0.clone(), fa.1.clone()),
                det(f, 0, xb, fb.0.clone(), fb.1.clone()),
            ];
            tracker.step(f, &dets).unwrap();
            for t in tracker.tracklets() {
                // Identify the tracklet by its appearance gallery.
                let sim_a = t.gallery_similarity(&fa.1).unwrap();
                let owner = if sim_a > 0.5 { &mut id_of_a } else { &mut id_of_b };
                match owner {
                    None => *owner = Some(t.local_id),
                    Some(id) => assert_eq!(*id, t.local_id, "identity switch at frame {f}"),
                }
            }
        }
    }

    #[test]
    fn unmatched_tracklet_dies_after_max_age() {
        let config = TrackerConfig {
            max_age: 3,
            n_init: 1,
            ..TrackerConfig::default()
        };
        let mut tracker = SingleCameraTracker::new(0, config).unwrap();
        tracker
            .step(0, &[det(0, 0, 10.0, vec![1.0, 0.0], vec![1.0, 0.0])])
            .unwrap();
        assert_eq!(tracker.tracklets().len(), 1);
        for f in 1..=3u64 {
            tracker.step(f, &[]).unwrap();
            assert_eq!(tracker.tracklets().len(), 1, "still alive at age {f}");
        }
        tracker.step(4, &[]).unwrap();
        assert!(tracker.tracklets().is_empty(), "deleted past max_age");
    }

    #[test]
    fn local_ids_never_reused() {
        let config = TrackerConfig {
            max_age: 1,
            n_init: 1,
            ..TrackerConfig::default()
        };
        let mut tracker = SingleCameraTracker::new(0, config).unwrap();
        let mut seen = Vec::new();
        for burst in 0..3u64 {
            let f0 = burst * 10;
            tracker
                .step(f0, &[det(f0, 0, 10.0, vec![1.0, 0.0], vec![1.0, 0.0])])
                .unwrap();
            seen.push(tracker.tracklets()[0].local_id);
            // Let it die.
            for f in f0 + 1..f0 + 4 {
                tracker.step(f, &[]).unwrap();
            }
        }
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_mixed_cameras_and_frames() {
        let mut tracker = SingleCameraTracker::new(0, TrackerConfig::default()).unwrap();
        let wrong_cam = det(0, 1, 10.0, vec![1.0], vec![1.0]);
        assert!(tracker.step(0, &[wrong_cam]).is_err());
        let wrong_frame = det(5, 0, 10.0, vec![1.0], vec![1.0]);
        assert!(tracker.step(0, &[wrong_frame]).is_err());
    }

    #[test]
    fn rejects_missing_embeddings() {
        let mut tracker = SingleCameraTracker::new(0, TrackerConfig::default()).unwrap();
        let bare = Detection::new(0, 0, BoundingBox::new(0.0, 0.0, 5.0, 5.0).unwrap(), 1.0).unwrap();
        assert!(tracker.step(0, &[bare]).is_err());
    }

    #[test]
    fn deterministic_id_sequences() {
        let run = || {
            let mut tracker = SingleCameraTracker::new(0, TrackerConfig::default()).unwrap();
            let mut ids = Vec::new();
            for f in 0..15u64 {
                let mut dets = vec![det(f, 0, 10.0 + f as f64, vec![1.0, 0.0], vec![1.0, 0.0])];
                if f % 3 == 0 {
                    dets.push(det(f, 0, 200.0 - f as f64, vec![0.0, 1.0], vec![0.0, 1.0]));
                }
                tracker.step(f, &dets).unwrap();
                ids.push(
                    tracker
                        .tracklets()
                        .iter()
                        .map(|t| (t.local_id, t.age, t.state == TrackState::Confirmed))
                        .collect::<Vec<_>>(),
                );
            }
            ids
        };
        assert_eq!(run(), run());
    }
}
