//! Per-timestep cross-camera identity merging.
//!
//! Confirmed tracklets are compared pairwise across cameras on their
//! view-agnostic features, matched per camera pair, unioned into clusters,
//! repaired if a cluster ever holds two tracklets of one camera, and then
//! resolved against a global tracklet bank that stores the most recent
//! view-agnostic embedding per global identity.

use std::collections::BTreeMap;

use crate::assignment::{similarity_to_cost, solve_assignment};
use crate::error::{Error, Result};
use crate::types::cosine_similarity;

/// Persistent store of the latest view-agnostic embedding per global
/// identity. Entries are never evicted within a run and ids never reused.
#[derive(Debug, Clone, Default)]
pub struct GlobalBank {
    entries: BTreeMap<u32, BankEntry>,
    next_global_id: u32,
}

#[derive(Debug, Clone)]
pub struct BankEntry {
    pub last_agnostic: Vec<f64>,
    pub last_seen_frame: u64,
}

impl GlobalBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: u32) -> Option<&BankEntry> {
        self.entries.get(&id)
    }

    pub fn next_global_id(&self) -> u32 {
        self.next_global_id
    }

    fn mint(&mut self) -> u32 {
        let id = self.next_global_id;
        self.next_global_id += 1;
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossViewConfig {
    /// Cosine gate for live cross-view links.
    pub merge_threshold: f64,
    /// Cosine gate for re-identification against the bank; stricter than
    /// `merge_threshold` so stale identities are not resurrected cheaply.
    pub bank_threshold: f64,
}

impl Default for CrossViewConfig {
    fn default() -> Self {
        Self {
            merge_threshold: 0.5,
            bank_threshold: 0.6,
        }
    }
}

impl CrossViewConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("merge_threshold", self.merge_threshold),
            ("bank_threshold", self.bank_threshold),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [-1, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// View of one confirmed tracklet offered for cross-view association.
#[derive(Debug, Clone)]
pub struct CrossViewItem {
    pub camera: usize,
    /// How recently the tracklet was matched; newer observations win when a
    /// cluster writes its embedding to the bank.
    pub age: u32,
    pub agnostic: Vec<f64>,
}

/// Associates confirmed tracklets across cameras at one frame and returns a
/// global id per item (aligned with `items`), updating the bank in place.
///
/// Items must be grouped in ascending camera order (all cameras at the same
/// frame). Single-camera input degrades to one cluster per tracklet.
pub fn associate_views(
    items: &[CrossViewItem],
    frame: u64,
    bank: &mut GlobalBank,
    cfg: &CrossViewConfig,
) -> Result<Vec<u32>> {
    cfg.validate()?;
    if items.is_empty() {
        return Ok(Vec::new());
    }

    // Per-camera index lists, cameras ascending.
    let mut by_camera: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, item) in items.iter().enumerate() {
        by_camera.entry(item.camera).or_default().push(idx);
    }
    let cameras: Vec<usize> = by_camera.keys().copied().collect();

    // Pairwise bipartite matching per unordered camera pair.
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (ai, &ca) in cameras.iter().enumerate() {
        for &cb in &cameras[ai + 1..] {
            let rows = &by_camera[&ca];
            let cols = &by_camera[&cb];
            let mut sim = vec![vec![0.0; cols.len()]; rows.len()];
            for (r, &i) in rows.iter().enumerate() {
                for (c, &j) in cols.iter().enumerate() {
                    sim[r][c] = cosine_similarity(&items[i].agnostic, &items[j].agnostic)?;
                }
            }
            let matching = solve_assignment(&similarity_to_cost(&sim, cfg.merge_threshold)?);
            for (r, c) in matching.pairs {
                edges.push((rows[r], cols[c], sim[r][c]));
            }
        }
    }

    // Union matched pairs into clusters, then repair: while any cluster
    // holds two tracklets of one camera, cut its weakest link and redo the
    // components from the surviving edges.
    loop {
        let components = connected_components(items.len(), &edges);
        match find_invalid_cluster(items, &components) {
            None => break,
            Some(cluster_id) => {
                let worst = edges
                    .iter()
                    .enumerate()
                    .filter(|(_, (a, _, _))| components[*a] == cluster_id)
                    .min_by(|(ia, (a1, b1, s1)), (ib, (a2, b2, s2))| {
                        s1.partial_cmp(s2)
                            .unwrap()
                            .then((a1, b1, ia).cmp(&(a2, b2, ib)))
                    })
                    .map(|(i, _)| i)
                    .expect("invalid cluster must contain an edge");
                edges.swap_remove(worst);
            }
        }
    }
    let components = connected_components(items.len(), &edges);

    // Group members per cluster, ordered by smallest member index.
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, &root) in components.iter().enumerate() {
        clusters.entry(root).or_default().push(idx);
    }

    // Bank lookup per cluster: best cosine of any member against any entry,
    // each existing id claimable by at most one cluster per frame.
    let mut assigned: Vec<u32> = vec![0; items.len()];
    let mut claimed: Vec<u32> = Vec::new();
    for members in clusters.values() {
        let mut best: Option<(f64, u32)> = None;
        for (&id, entry) in &bank.entries {
            if claimed.contains(&id) {
                continue;
            }
            for &m in members {
                let s = cosine_similarity(&items[m].agnostic, &entry.last_agnostic)?;
                let better = match best {
                    None => s >= cfg.bank_threshold,
                    Some((bs, _)) => s > bs,
                };
                if better && s >= cfg.bank_threshold {
                    best = Some((s, id));
                }
            }
        }
        let id = match best {
            Some((_, id)) => id,
            None => bank.mint(),
        };
        claimed.push(id);
        for &m in members {
            assigned[m] = id;
        }

        // Freshest member (smallest age, then camera order) writes the
        // cluster's embedding back to the bank.
        let representative = members
            .iter()
            .copied()
            .min_by_key(|&m| (items[m].age, items[m].camera, m))
            .expect("cluster is nonempty");
        bank.entries.insert(
            id,
            BankEntry {
                last_agnostic: items[representative].agnostic.clone(),
                last_seen_frame: frame,
            },
        );
    }
    Ok(assigned)
}

/// Overwrites every tracklet's global id with its cluster's id. The global
/// match takes precedence over any previously held id.
pub fn resolve_conflicts(
    tracklets: &mut [&mut crate::track_single::Tracklet],
    assignment: &[u32],
) -> Result<()> {
    if tracklets.len() != assignment.len() {
        return Err(Error::invalid(
            "global id assignment length must match the tracklet count",
        ));
    }
    for (t, &id) in tracklets.iter_mut().zip(assignment) {
        t.global_id = Some(id);
    }
    Ok(())
}

/// Union-find over item indices; returns a representative per item.
fn connected_components(n: usize, edges: &[(usize, usize, f64)]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b, _) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            // Smaller root wins to keep representatives deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

fn find_invalid_cluster(items: &[CrossViewItem], components: &[usize]) -> Option<usize> {
    let mut seen: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    for (idx, &root) in components.iter().enumerate() {
        if seen.insert((root, items[idx].camera), ()).is_some() {
            return Some(root);
        }
    }
    None
}
