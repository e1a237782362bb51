//! Evaluation suite: over-time scores (MOTA, IDP/IDR/IDF1, HOTA), cross-view
//! association scores (AIDP/AIDR/AIDF1, MHAA), and the overall aggregates
//! A = mean(MOTA, MHAA) and F = mean(IDF1, AIDF1).
//!
//! All rates are computed in [0, 1]; reports render them as percentages with
//! one decimal. Metrics that have no defined value on an input (cross-view
//! scores with a single camera, MOTA without ground truth) surface as
//! `UndefinedMetric` errors and render as "n/a".

use std::collections::BTreeMap;

use serde::Serialize;

use crate::assignment::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::types::{iou, BoundingBox};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// One output (or ground-truth) box with its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub frame: u64,
    pub camera: usize,
    pub id: u32,
    pub bbox: BoundingBox,
}

/// A full tracking output: records sorted by (frame, camera, id) with ids
/// unique within each (frame, camera) slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    records: Vec<TrackRecord>,
    /// (frame, camera) -> range into `records`.
    index: BTreeMap<(u64, usize), (usize, usize)>,
}

impl TrackingResult {
    pub fn new(mut records: Vec<TrackRecord>) -> Result<Self> {
        records.sort_by_key(|r| (r.frame, r.camera, r.id));
        for pair in records.windows(2) {
            if pair[0].frame == pair[1].frame
                && pair[0].camera == pair[1].camera
                && pair[0].id == pair[1].id
            {
                return Err(Error::invalid(format!(
                    "duplicate id {} at frame {} camera {}",
                    pair[0].id, pair[0].frame, pair[0].camera
                )));
            }
        }
        let mut index = BTreeMap::new();
        let mut start = 0;
        for i in 1..=records.len() {
            let boundary = i == records.len()
                || (records[i].frame, records[i].camera)
                    != (records[start].frame, records[start].camera);
            if boundary {
                index.insert((records[start].frame, records[start].camera), (start, i));
                start = i;
            }
        }
        Ok(Self { records, index })
    }

    pub fn records(&self) -> &[TrackRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn slice(&self, frame: u64, camera: usize) -> &[TrackRecord] {
        match self.index.get(&(frame, camera)) {
            Some(&(a, b)) => &self.records[a..b],
            None => &[],
        }
    }

    pub fn cameras(&self) -> Vec<usize> {
        let mut cams: Vec<usize> = self.records.iter().map(|r| r.camera).collect();
        cams.sort_unstable();
        cams.dedup();
        cams
    }

    pub fn frames(&self) -> Vec<u64> {
        let mut frames: Vec<u64> = self.records.iter().map(|r| r.frame).collect();
        frames.sort_unstable();
        frames.dedup();
        frames
    }
}

/// Per-frame correspondence between ground truth and predictions: minimum
/// cost assignment on 1 - IoU, infeasible below the IoU threshold. Returns
/// index pairs into the two slices.
pub fn match_frame(
    gt: &[TrackRecord],
    pred: &[TrackRecord],
    iou_threshold: f64,
) -> Result<Vec<(usize, usize)>> {
    let mut cost = CostMatrix::infeasible(gt.len(), pred.len());
    for (i, g) in gt.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let overlap = iou(&g.bbox, &p.bbox);
            if overlap >= iou_threshold {
                cost.set(i, j, 1.0 - overlap)?;
            }
        }
    }
    Ok(solve_assignment(&cost).pairs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MotaCounts {
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub total_gt: u64,
}

/// CLEAR accuracy pooled over all cameras: 1 - (FP + FN + IDSW) / GT.
/// An identity switch is counted when a ground-truth identity's matched
/// predicted id changes between its consecutive matched frames.
pub fn mota(
    gt: &TrackingResult,
    pred: &TrackingResult,
    iou_threshold: f64,
) -> Result<(f64, MotaCounts)> {
    let mut counts = MotaCounts::default();
    let cameras = union_cameras(gt, pred);
    let frames = union_frames(gt, pred);
    for &camera in &cameras {
        let mut last_match: BTreeMap<u32, u32> = BTreeMap::new();
        for &frame in &frames {
            let g = gt.slice(frame, camera);
            let p = pred.slice(frame, camera);
            let pairs = match_frame(g, p, iou_threshold)?;
            counts.total_gt += g.len() as u64;
            counts.false_negatives += (g.len() - pairs.len()) as u64;
            counts.false_positives += (p.len() - pairs.len()) as u64;
            for &(gi, pi) in &pairs {
                let gt_id = g[gi].id;
                let pred_id = p[pi].id;
                if let Some(&prev) = last_match.get(&gt_id) {
                    if prev != pred_id {
                        counts.id_switches += 1;
                    }
                }
                last_match.insert(gt_id, pred_id);
            }
        }
    }
    if counts.total_gt == 0 {
        return Err(Error::undefined("MOTA needs at least one ground-truth box"));
    }
    let value = 1.0
        - (counts.false_positives + counts.false_negatives + counts.id_switches) as f64
            / counts.total_gt as f64;
    Ok((value, counts))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IdCounts {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdScores {
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub counts: IdCounts,
}

/// Identity scores under an optimal per-camera matching of ground-truth
/// identities to predicted identities over the whole sequence; counts are
/// pooled across cameras. Cross-camera identity consistency is measured by
/// the cross-view family instead, so each camera is matched independently.
pub fn id_scores(
    gt: &TrackingResult,
    pred: &TrackingResult,
    iou_threshold: f64,
) -> Result<IdScores> {
    let per_camera = id_scores_per_camera(gt, pred, iou_threshold)?;
    let mut counts = IdCounts::default();
    for c in per_camera.values() {
        counts.idtp += c.counts.idtp;
        counts.idfp += c.counts.idfp;
        counts.idfn += c.counts.idfn;
    }
    if counts.idtp + counts.idfn == 0 {
        return Err(Error::undefined("IDF1 needs at least one ground-truth box"));
    }
    Ok(scores_from_id_counts(counts))
}

/// Identity scores for each camera separately.
pub fn id_scores_per_camera(
    gt: &TrackingResult,
    pred: &TrackingResult,
    iou_threshold: f64,
) -> Result<BTreeMap<usize, IdScores>> {
    let frames = union_frames(gt, pred);
    let mut out = BTreeMap::new();
    for camera in union_cameras(gt, pred) {
        let counts = id_counts_one_camera(gt, pred, camera, &frames, iou_threshold)?;
        out.insert(camera, scores_from_id_counts(counts));
    }
    Ok(out)
}

fn scores_from_id_counts(counts: IdCounts) -> IdScores {
    let idtp = counts.idtp as f64;
    let idp = safe_div(idtp, idtp + counts.idfp as f64);
    let idr = safe_div(idtp, idtp + counts.idfn as f64);
    let idf1 = safe_div(idtp, idtp + 0.5 * (counts.idfp + counts.idfn) as f64);
    IdScores {
        idp,
        idr,
        idf1,
        counts,
    }
}

fn id_counts_one_camera(
    gt: &TrackingResult,
    pred: &TrackingResult,
    camera: usize,
    frames: &[u64],
    iou_threshold: f64,
) -> Result<IdCounts> {
    // Per-identity frame presence and per-frame boxes.
    let mut gt_tracks: BTreeMap<u32, BTreeMap<u64, BoundingBox>> = BTreeMap::new();
    let mut pred_tracks: BTreeMap<u32, BTreeMap<u64, BoundingBox>> = BTreeMap::new();
    for &frame in frames {
        for r in gt.slice(frame, camera) {
            gt_tracks.entry(r.id).or_default().insert(frame, r.bbox);
        }
        for r in pred.slice(frame, camera) {
            pred_tracks.entry(r.id).or_default().insert(frame, r.bbox);
        }
    }
    let gt_ids: Vec<u32> = gt_tracks.keys().copied().collect();
    let pred_ids: Vec<u32> = pred_tracks.keys().copied().collect();
    let total_gt: u64 = gt_tracks.values().map(|t| t.len() as u64).sum();
    let total_pred: u64 = pred_tracks.values().map(|t| t.len() as u64).sum();

    // Frames where GT identity i and predicted identity j co-locate.
    let overlap = |gi: &BTreeMap<u64, BoundingBox>, pj: &BTreeMap<u64, BoundingBox>| -> u64 {
        gi.iter()
            .filter(|(frame, gbox)| {
                pj.get(frame)
                    .map_or(false, |pbox| iou(gbox, pbox) >= iou_threshold)
            })
            .count() as u64
    };

    // Bipartite matching on the classic padded matrix: real pairs cost
    // |Ti| + |Tj| - 2 overlap, leaving an identity unmatched costs its full
    // track length.
    let n = gt_ids.len();
    let m = pred_ids.len();
    let size = n + m;
    let mut cost = CostMatrix::infeasible(size, size);
    for (r, gid) in gt_ids.iter().enumerate() {
        let gi = &gt_tracks[gid];
        for (c, pid) in pred_ids.iter().enumerate() {
            let pj = &pred_tracks[pid];
            let ov = overlap(gi, pj);
            cost.set(r, c, (gi.len() + pj.len()) as f64 - 2.0 * ov as f64)?;
        }
        cost.set(r, m + r, gi.len() as f64)?;
    }
    for (c, pid) in pred_ids.iter().enumerate() {
        cost.set(n + c, c, pred_tracks[pid].len() as f64)?;
    }
    for r in n..size {
        for c in m..size {
            cost.set(r, c, 0.0)?;
        }
    }
    let matching = solve_assignment(&cost);

    let mut idtp = 0u64;
    for &(r, c) in &matching.pairs {
        if r < n && c < m {
            idtp += overlap(&gt_tracks[&gt_ids[r]], &pred_tracks[&pred_ids[c]]);
        }
    }
    Ok(IdCounts {
        idtp,
        idfp: total_pred - idtp,
        idfn: total_gt - idtp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HotaScores {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
}

/// Higher-order tracking accuracy averaged over the IoU threshold grid
/// alpha in {0.05, 0.10, ..., 0.95}. Per alpha, frames are matched at
/// IoU >= alpha; DetA = TP/(TP+FN+FP) and AssA averages, over matched
/// detections, TPA/(TPA+FNA+FPA) with association counts pooled over the
/// whole sequence.
pub fn hota(gt: &TrackingResult, pred: &TrackingResult) -> Result<HotaScores> {
    let cameras = union_cameras(gt, pred);
    let frames = union_frames(gt, pred);
    let total_gt: usize = gt.records().len();
    if total_gt == 0 {
        return Err(Error::undefined("HOTA needs at least one ground-truth box"));
    }

    let mut hota_sum = 0.0;
    let mut det_sum = 0.0;
    let mut ass_sum = 0.0;
    let alphas: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    for &alpha in &alphas {
        let mut tp_pairs: Vec<(u32, u32)> = Vec::new();
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        // Detection totals per identity, for association denominators.
        let mut gt_total: BTreeMap<u32, u64> = BTreeMap::new();
        let mut pred_total: BTreeMap<u32, u64> = BTreeMap::new();
        for &camera in &cameras {
            for &frame in &frames {
                let g = gt.slice(frame, camera);
                let p = pred.slice(frame, camera);
                for r in g {
                    *gt_total.entry(r.id).or_default() += 1;
                }
                for r in p {
                    *pred_total.entry(r.id).or_default() += 1;
                }
                let pairs = match_frame(g, p, alpha)?;
                fn_ += (g.len() - pairs.len()) as u64;
                fp += (p.len() - pairs.len()) as u64;
                for &(gi, pi) in &pairs {
                    tp_pairs.push((g[gi].id, p[pi].id));
                }
            }
        }
        let tp = tp_pairs.len() as u64;
        let det_a = safe_div(tp as f64, (tp + fn_ + fp) as f64);
        let mut pair_count: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for &pair in &tp_pairs {
            *pair_count.entry(pair).or_default() += 1;
        }
        let ass_a = if tp == 0 {
            0.0
        } else {
            let mut acc = 0.0;
            for &(gid, pid) in &tp_pairs {
                let tpa = pair_count[&(gid, pid)];
                let fna = gt_total[&gid] - tpa;
                let fpa = pred_total[&pid] - tpa;
                acc += tpa as f64 / (tpa + fna + fpa) as f64;
            }
            acc / tp as f64
        };
        hota_sum += (det_a * ass_a).sqrt();
        det_sum += det_a;
        ass_sum += ass_a;
    }
    let k = alphas.len() as f64;
    Ok(HotaScores {
        hota: hota_sum / k,
        det_a: det_sum / k,
        ass_a: ass_sum / k,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CrossViewCounts {
    pub true_links: u64,
    pub false_links: u64,
    pub missed_links: u64,
    pub total_gt_pairs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossViewScores {
    pub aidp: f64,
    pub aidr: f64,
    pub aidf1: f64,
    pub counts: CrossViewCounts,
}

/// Shared pair accounting for the cross-view family. For every frame and
/// unordered camera pair, the ground-truth pair set holds the identities
/// visible in both cameras; the predicted pair set holds predicted global
/// ids present in both cameras with both records mapped to ground-truth
/// detections by frame matching.
fn cross_view_counts(
    gt: &TrackingResult,
    pred: &TrackingResult,
    iou_threshold: f64,
) -> Result<CrossViewCounts> {
    let cameras = union_cameras(gt, pred);
    if cameras.len() < 2 {
        return Err(Error::undefined(
            "cross-view scores need at least two cameras",
        ));
    }
    let frames = union_frames(gt, pred);
    let mut counts = CrossViewCounts::default();
    for &frame in &frames {
        // Map each predicted record to a GT identity once per camera.
        let mut pred_to_gt: BTreeMap<usize, BTreeMap<u32, u32>> = BTreeMap::new();
        let mut gt_present: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for &camera in &cameras {
            let g = gt.slice(frame, camera);
            let p = pred.slice(frame, camera);
            gt_present.insert(camera, g.iter().map(|r| r.id).collect());
            let mut mapping = BTreeMap::new();
            for (gi, pi) in match_frame(g, p, iou_threshold)? {
                mapping.insert(p[pi].id, g[gi].id);
            }
            pred_to_gt.insert(camera, mapping);
        }
        for (ai, &ca) in cameras.iter().enumerate() {
            for &cb in &cameras[ai + 1..] {
                let in_a = &gt_present[&ca];
                let in_b = &gt_present[&cb];
                let gt_pairs: Vec<u32> = in_a
                    .iter()
                    .filter(|id| in_b.contains(id))
                    .copied()
                    .collect();
                counts.total_gt_pairs += gt_pairs.len() as u64;

                let map_a = &pred_to_gt[&ca];
                let map_b = &pred_to_gt[&cb];
                let mut matched_gt_ids: Vec<u32> = Vec::new();
                for (pred_id, &gx) in map_a {
                    if let Some(&gy) = map_b.get(pred_id) {
                        if gx == gy {
                            matched_gt_ids.push(gx);
                        } else {
                            counts.false_links += 1;
                        }
                    }
                }
                matched_gt_ids.sort_unstable();
                matched_gt_ids.dedup();
                counts.true_links += matched_gt_ids.len() as u64;
                counts.missed_links += (gt_pairs.len() - matched_gt_ids.len()) as u64;
            }
        }
    }
    Ok(counts)
}

/// Cross-view association precision/recall/F1 over frames and camera pairs.
pub fn cross_view_scores(
    gt: &TrackingResult,
    pred: &TrackingResult,
    iou_threshold: f64,
) -> Result<CrossViewScores> {
    let counts = cross_view_counts(gt, pred, iou_threshold)?;
    let tp = counts.true_links as f64;
    let aidp = safe_div(tp, tp + counts.false_links as f64);
    let aidr = safe_div(tp, tp + counts.missed_links as f64);
    let aidf1 = safe_div(2.0 * aidp * aidr, aidp + aidr);
    Ok(CrossViewScores {
        aidp,
        aidr,
        aidf1,
        counts,
    })
}

/// Cross-view association accuracy, penalizing spurious and missed identity
/// links symmetrically: max(0, 1 - (missed + spurious) / GT pairs).
pub fn mhaa(gt: &TrackingResult, pred: &TrackingResult, iou_threshold: f64) -> Result<f64> {
    let counts = cross_view_counts(gt, pred, iou_threshold)?;
    if counts.total_gt_pairs == 0 {
        return Err(Error::undefined(
            "MHAA needs at least one ground-truth cross-view pair",
        ));
    }
    let errors = (counts.false_links + counts.missed_links) as f64;
    Ok((1.0 - errors / counts.total_gt_pairs as f64).max(0.0))
}

/// Overall aggregates as displayed in reports: A = mean(MOTA, MHAA) and
/// F = mean(IDF1, AIDF1). Scale-agnostic; feed [0,1] rates or percentages.
pub fn overall(idf1: f64, aidf1: f64, mota: f64, mhaa: f64) -> (f64, f64) {
    ((mota + mhaa) / 2.0, (idf1 + aidf1) / 2.0)
}

/// Raw error counts bundled into the JSON report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ReportCounts {
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub cross_true: u64,
    pub cross_false: u64,
    pub cross_missed: u64,
}

/// Every score of one evaluation run. Rates live in [0, 1]; undefined
/// cross-view metrics are `None` and render as "n/a".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub mota: f64,
    pub hota: f64,
    pub aidp: Option<f64>,
    pub aidr: Option<f64>,
    pub aidf1: Option<f64>,
    pub mhaa: Option<f64>,
    pub overall_a: Option<f64>,
    pub overall_f: Option<f64>,
    pub per_camera_idf1: BTreeMap<usize, f64>,
    pub counts: ReportCounts,
}

/// Runs the full metric suite for one scenario.
pub fn evaluate(
    gt: &TrackingResult,
    pred: &TrackingResult,
    iou_threshold: f64,
) -> Result<MetricReport> {
    let (mota_value, mota_counts) = mota(gt, pred, iou_threshold)?;
    let ids = id_scores(gt, pred, iou_threshold)?;
    let per_camera = id_scores_per_camera(gt, pred, iou_threshold)?;
    let hota_scores = hota(gt, pred)?;

    let cross = match cross_view_scores(gt, pred, iou_threshold) {
        Ok(s) => Some(s),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let mhaa_value = match mhaa(gt, pred, iou_threshold) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };

    let (overall_a, overall_f) = match (cross.as_ref(), mhaa_value) {
        (Some(c), Some(m)) => {
            let (a, f) = overall(ids.idf1, c.aidf1, mota_value, m);
            (Some(a), Some(f))
        }
        _ => (None, None),
    };

    Ok(MetricReport {
        idp: ids.idp,
        idr: ids.idr,
        idf1: ids.idf1,
        mota: mota_value,
        hota: hota_scores.hota,
        aidp: cross.as_ref().map(|c| c.aidp),
        aidr: cross.as_ref().map(|c| c.aidr),
        aidf1: cross.as_ref().map(|c| c.aidf1),
        mhaa: mhaa_value,
        overall_a,
        overall_f,
        per_camera_idf1: per_camera.iter().map(|(k, v)| (*k, v.idf1)).collect(),
        counts: ReportCounts {
            false_positives: mota_counts.false_positives,
            false_negatives: mota_counts.false_negatives,
            id_switches: mota_counts.id_switches,
            idtp: ids.counts.idtp,
            idfp: ids.counts.idfp,
            idfn: ids.counts.idfn,
            cross_true: cross.as_ref().map_or(0, |c| c.counts.true_links),
            cross_false: cross.as_ref().map_or(0, |c| c.counts.false_links),
            cross_missed: cross.as_ref().map_or(0, |c| c.counts.missed_links),
        },
    })
}

/// Renders a rate as a percentage with one decimal, the table convention.
pub fn render_percent(value: f64) -> String {
    format_one_decimal(value * 100.0)
}

/// One-decimal rendering with halves rounded away from zero, as the
/// published tables do (58.85 prints as 58.9). A 1e-9 guard keeps binary
/// representation noise from flipping exact decimal halves downward.
pub fn format_one_decimal(value: f64) -> String {
    let scaled = value * 10.0;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5 + 1e-9).floor()
    } else {
        (scaled - 0.5 - 1e-9).ceil()
    };
    format!("{:.1}", rounded / 10.0)
}

fn render_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => render_percent(v),
        None => "n/a".to_string(),
    }
}

pub const REPORT_CSV_HEADER: &str = "IDP,IDR,IDF1,MOTA,HOTA,AIDP,AIDR,AIDF1,MHAA,A,F";

impl MetricReport {
    /// One CSV row in the table's column order.
    pub fn to_csv_row(&self) -> String {
        [
            render_percent(self.idp),
            render_percent(self.idr),
            render_percent(self.idf1),
            render_percent(self.mota),
            render_percent(self.hota),
            render_opt(self.aidp),
            render_opt(self.aidr),
            render_opt(self.aidf1),
            render_opt(self.mhaa),
            render_opt(self.overall_a),
            render_opt(self.overall_f),
        ]
        .join(",")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn union_cameras(gt: &TrackingResult, pred: &TrackingResult) -> Vec<usize> {
    let mut cams = gt.cameras();
    cams.extend(pred.cameras());
    cams.sort_unstable();
    cams.dedup();
    cams
}

fn union_frames(gt: &TrackingResult, pred: &TrackingResult) -> Vec<u64> {
    let mut frames = gt.frames();
    frames.extend(pred.frames());
    frames.sort_unstable();
    frames.dedup();
    frames
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
