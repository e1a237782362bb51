//! Minimum-cost bipartite assignment with infeasible cells.
//!
//! The solver returns, among all matchings of maximum cardinality over the
//! feasible cells, one of minimum total cost; remaining ties are broken by
//! the lexicographically smallest (row, col) pair sequence. Matrices here
//! stay small (detections are capped near ten per camera), so exactness and
//! determinism matter far more than asymptotics.

use crate::error::{Error, Result};

/// Dense cost matrix where `None` marks an infeasible cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<Option<f64>>,
}

impl CostMatrix {
    /// All cells start infeasible.
    pub fn infeasible(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![None; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Result<Self> {
        let mut m = Self::infeasible(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if let Some(v) = f(r, c) {
                    m.set(r, c, v)?;
                }
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, row: usize, col: usize, cost: f64) -> Result<()> {
        if !cost.is_finite() {
            return Err(Error::invalid("assignment costs must be finite"));
        }
        self.cells[row * self.cols + col] = Some(cost);
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.cols + col]
    }
}

/// Result of [`solve_assignment`]: pairs sorted by row, plus the total cost
/// of the selected cells (summed in row order).
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Matching {
    pub fn cardinality(&self) -> usize {
        self.pairs.len()
    }

    /// Column matched to `row`, if any.
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|(r, _)| *r == row)
            .map(|(_, c)| *c)
    }
}

/// Converts a similarity matrix in [-1, 1] into an assignment cost matrix:
/// cost is the negated similarity, and cells below the gate are infeasible.
/// The gate boundary is inclusive (`s >= threshold` stays feasible).
pub fn similarity_to_cost(similarity: &[Vec<f64>], threshold: f64) -> Result<CostMatrix> {
    let rows = similarity.len();
    let cols = similarity.first().map_or(0, |r| r.len());
    let mut m = CostMatrix::infeasible(rows, cols);
    for (r, row) in similarity.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::invalid("similarity matrix must be rectangular"));
        }
        for (c, &s) in row.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::invalid("similarity values must be finite"));
            }
            if s >= threshold {
                m.set(r, c, -s)?;
            }
        }
    }
    Ok(m)
}

/// Tolerance for "same total cost" during tie-break refinement. Exact for
/// integer or dyadic costs; for arbitrary floats it only affects which of
/// two near-equal optima is reported, never feasibility.
const COST_EPS: f64 = 1e-9;

/// Solves the assignment problem on `cost`.
///
/// Maximum cardinality over feasible cells first, minimum total cost second,
/// lexicographically smallest (row, col) sequence last. Empty matrices and
/// all-infeasible matrices yield an empty matching of cost 0.
pub fn solve_assignment(cost: &CostMatrix) -> Matching {
    let solver = match Solver::new(cost) {
        Some(s) => s,
        None => {
            return Matching {
                pairs: Vec::new(),
                total_cost: 0.0,
            }
        }
    };

    let (best_card, best_cost) = solver.solve(&[]);

    // Fix pairs row by row, smallest feasible column first, keeping only
    // choices that still admit an optimal completion.
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    for r in 0..cost.rows() {
        let mut chosen = None;
        for c in 0..cost.cols() {
            if cost.get(r, c).is_none() || fixed.iter().any(|&(_, fc)| fc == c) {
                continue;
            }
            let mut candidate = fixed.clone();
            candidate.push((r, c));
            let (card, total) = solver.solve(&candidate);
            if card == best_card && (total - best_cost).abs() <= COST_EPS * best_cost.abs().max(1.0)
            {
                chosen = Some(c);
                break;
            }
        }
        if let Some(c) = chosen {
            fixed.push((r, c));
        }
    }

    let total_cost = fixed
        .iter()
        .map(|&(r, c)| cost.get(r, c).expect("fixed pair is feasible"))
        .sum();
    Matching {
        pairs: fixed,
        total_cost,
    }
}

/// Square Hungarian solver over a padded matrix. Infeasible and padding
/// cells carry a sentinel cost large enough that minimizing total cost
/// minimizes the number of sentinel edges first, i.e. maximizes feasible
/// cardinality.
struct Solver {
    n: usize,
    rows: usize,
    cols: usize,
    big: f64,
    /// Shifted costs (min feasible cost subtracted), sentinel elsewhere.
    matrix: Vec<f64>,
    original: Vec<Option<f64>>,
}

impl Solver {
    fn new(cost: &CostMatrix) -> Option<Self> {
        let rows = cost.rows();
        let cols = cost.cols();
        let n = rows.max(cols);
        if n == 0 {
            return None;
        }
        let mut min_c = f64::INFINITY;
        let mut max_c = f64::NEG_INFINITY;
        let mut any = false;
        for r in 0..rows {
            for c in 0..cols {
                if let Some(v) = cost.get(r, c) {
                    any = true;
                    min_c = min_c.min(v);
                    max_c = max_c.max(v);
                }
            }
        }
        if !any {
            return None;
        }
        let big = (max_c - min_c + 1.0) * (n as f64 + 1.0);
        let mut matrix = vec![big; n * n];
        let mut original = vec![None; n * n];
        for r in 0..rows {
            for c in 0..cols {
                if let Some(v) = cost.get(r, c) {
                    matrix[r * n + c] = v - min_c;
                    original[r * n + c] = Some(v);
                }
            }
        }
        Some(Self {
            n,
            rows,
            cols,
            big,
            matrix,
            original,
        })
    }

    /// Solves with `forced` (row, col) pairs pre-assigned; returns the
    /// feasible cardinality and total original cost including the forced
    /// pairs. `forced` pairs must be feasible and non-conflicting.
    fn solve(&self, forced: &[(usize, usize)]) -> (usize, f64) {
        let n = self.n;
        let forced_rows: Vec<bool> = {
            let mut v = vec![false; n];
            for &(r, _) in forced {
                v[r] = true;
            }
            v
        };
        let forced_cols: Vec<bool> = {
            let mut v = vec![false; n];
            for &(_, c) in forced {
                v[c] = true;
            }
            v
        };

        let free_rows: Vec<usize> = (0..n).filter(|r| !forced_rows[*r]).collect();
        let free_cols: Vec<usize> = (0..n).filter(|c| !forced_cols[*c]).collect();
        let m = free_rows.len();

        // Jonker-Volgenant style augmentation over the reduced square.
        let mut u = vec![0.0f64; m + 1];
        let mut v = vec![0.0f64; m + 1];
        // way[j] = matched row position for reduced column j (1-based trick).
        let mut matched_row = vec![0usize; m + 1];
        let mut way = vec![0usize; m + 1];

        for (i_pos, _) in free_rows.iter().enumerate() {
            let i1 = i_pos + 1;
            matched_row[0] = i1;
            let mut j0 = 0usize;
            let mut min_to = vec![f64::INFINITY; m + 1];
            let mut used = vec![false; m + 1];
            loop {
                used[j0] = true;
                let i0 = matched_row[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                let row = free_rows[i0 - 1];
                for (j_pos, &col) in free_cols.iter().enumerate() {
                    let j = j_pos + 1;
                    if used[j] {
                        continue;
                    }
                    let cur = self.matrix[row * n + col] - u[i0] - v[j];
                    if cur < min_to[j] {
                        min_to[j] = cur;
                        way[j] = j0;
                    }
                    if min_to[j] < delta {
                        delta = min_to[j];
                        j1 = j;
                    }
                }
                for j in 0..=m {
                    if used[j] {
                        u[matched_row[j]] += delta;
                        v[j] -= delta;
                    } else {
                        min_to[j] -= delta;
                    }
                }
                j0 = j1;
                if matched_row[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                matched_row[j0] = matched_row[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }

        let mut cardinality = forced.len();
        let mut total = 0.0;
        for &(r, c) in forced {
            total += self.original[r * n + c].expect("forced pair must be feasible");
        }
        // Collect (row, col) of the reduced solve, count and cost only the
        // genuinely feasible, unpadded cells.
        let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(m);
        for j in 1..=m {
            let i = matched_row[j];
            if i == 0 {
                continue;
            }
            chosen.push((free_rows[i - 1], free_cols[j - 1]));
        }
        chosen.sort_unstable();
        for (r, c) in chosen {
            if r < self.rows && c < self.cols {
                if let Some(orig) = self.original[r * n + c] {
                    debug_assert!(self.matrix[r * n + c] < self.big);
                    cardinality += 1;
                    total += orig;
                }
            }
        }
        (cardinality, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> CostMatrix {
        CostMatrix::from_fn(rows, cols, |r, c| Some(f(r, c))).unwrap()
    }

    #[test]
    fn product_cost_matrix() {
        // Brute force over all 3! permutations gives {(0,2),(1,1),(2,0)}, cost 10.
        let m = full(3, 3, |r, c| ((r + 1) * (c + 1)) as f64);
        let sol = solve_assignment(&m);
        assert_eq!(sol.pairs, vec![(0, 2), (1, 1), (2, 0)]);
        assert_eq!(sol.total_cost, 10.0);
    }

    #[test]
    fn zero_diagonal_picks_diagonal() {
        let m = full(3, 3, |r, c| if r == c { 0.0 } else { 1.0 });
        let sol = solve_assignment(&m);
        assert_eq!(sol.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(sol.total_cost, 0.0);
    }

    #[test]
    fn all_infeasible_is_empty() {
        let m = CostMatrix::infeasible(2, 2);
        let sol = solve_assignment(&m);
        assert!(sol.pairs.is_empty());
        assert_eq!(sol.total_cost, 0.0);
    }

    #[test]
    fn empty_matrix_is_empty() {
        let sol = solve_assignment(&CostMatrix::infeasible(0, 5));
        assert!(sol.pairs.is_empty());
    }

    #[test]
    fn partial_feasibility_maximizes_cardinality() {
        // Row 1 only feasible at col 0; forcing max cardinality means row 0
        // must take col 1 even though (0,0) is cheaper.
        let mut m = CostMatrix::infeasible(2, 2);
        m.set(0, 0, 0.0).unwrap();
        m.set(0, 1, 5.0).unwrap();
        m.set(1, 0, 1.0).unwrap();
        let sol = solve_assignment(&m);
        assert_eq!(sol.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(sol.total_cost, 6.0);
    }

    #[test]
    fn lexicographic_tie_break() {
        // Every matching costs 2; the lexicographically smallest sequence
        // is (0,0),(1,1).
        let m = full(2, 2, |_, _| 1.0);
        let sol = solve_assignment(&m);
        assert_eq!(sol.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn lexicographic_prefers_earliest_row_matched() {
        // Cardinality 1 either way; (0,1) beats (1,0) lexicographically.
        let mut m = CostMatrix::infeasible(2, 2);
        m.set(0, 1, 3.0).unwrap();
        m.set(1, 1, 3.0).unwrap();
        let sol = solve_assignment(&m);
        assert_eq!(sol.pairs, vec![(0, 1)]);
    }

    #[test]
    fn negative_costs() {
        let m = full(2, 2, |r, c| if r == c { -1.0 } else { 0.5 });
        let sol = solve_assignment(&m);
        assert_eq!(sol.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(sol.total_cost, -2.0);
    }

    #[test]
    fn rectangular_matrices() {
        let m = full(2, 4, |r, c| (r as f64 + 1.0) * (c as f64 + 2.0));
        let sol = solve_assignment(&m);
        assert_eq!(sol.cardinality(), 2);
        // Brute force: rows (1x, 2x) pick cols 3 and 2: 1*5 + 2*4 = 13 vs
        // 1*2+2*3=8 -> optimal (0,1),(1,0)? cost(0,1)=3, cost(1,0)=4 -> 7.
        assert_eq!(sol.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(sol.total_cost, 7.0);
    }

    #[test]
    fn similarity_gate_inclusive() {
        let s = vec![vec![1.0, 0.4], vec![0.5, -0.2]];
        let m = similarity_to_cost(&s, 0.5).unwrap();
        assert_eq!(m.get(0, 0), Some(-1.0));
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.get(1, 0), Some(-0.5));
        assert_eq!(m.get(1, 1), None);
    }

    /// Exhaustive oracle: enumerate column permutations of the padded square.
    fn brute_force(cost: &CostMatrix) -> Matching {
        let n = cost.rows().max(cost.cols());
        let mut cols: Vec<usize> = (0..n).collect();
        let mut best: Option<(usize, f64, Vec<(usize, usize)>)> = None;
        permute(&mut cols, 0, &mut |perm| {
            let mut pairs = Vec::new();
            for (r, &c) in perm.iter().enumerate() {
                if r < cost.rows() && c < cost.cols() {
                    if cost.get(r, c).is_some() {
                        pairs.push((r, c));
                    }
                }
            }
            let card = pairs.len();
            let total: f64 = pairs.iter().map(|&(r, c)| cost.get(r, c).unwrap()).sum();
            let better = match &best {
                None => true,
                Some((bc, bt, bp)) => {
                    card > *bc
                        || (card == *bc && total < *bt - 1e-12)
                        || (card == *bc && (total - *bt).abs() <= 1e-12 && pairs < *bp)
                }
            };
            if better {
                best = Some((card, total, pairs));
            }
        });
        let (_, total_cost, pairs) = best.unwrap_or((0, 0.0, Vec::new()));
        Matching { pairs, total_cost }
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(80))]

        #[test]
        fn matches_brute_force(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Dyadic costs keep every sum exact in f64.
            let m = CostMatrix::from_fn(rows, cols, |_, _| {
                if rng.random::<f64>() < 0.2 {
                    None
                } else {
                    Some(rng.random_range(-1000i64..=1000) as f64 / 256.0)
                }
            }).unwrap();
            let sol = solve_assignment(&m);
            let oracle = brute_force(&m);
            prop_assert_eq!(sol.cardinality(), oracle.cardinality());
            prop_assert_eq!(sol.total_cost, oracle.total_cost);
            prop_assert_eq!(sol.pairs, oracle.pairs);
        }

        #[test]
        fn full_cardinality_when_all_feasible(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = CostMatrix::from_fn(rows, cols, |_, _| Some(rng.random::<f64>())).unwrap();
            prop_assert_eq!(solve_assignment(&m).cardinality(), rows.min(cols));
        }

        #[test]
        fn row_permutation_equivariance(size in 1usize..5, seed in any::<u64>()) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<Vec<f64>> = (0..size)
                .map(|_| (0..size).map(|_| rng.random_range(-1000i64..=1000) as f64 / 256.0).collect())
                .collect();
            let mut perm: Vec<usize> = (0..size).collect();
            perm.shuffle(&mut rng);

            let m = CostMatrix::from_fn(size, size, |r, c| Some(base[r][c])).unwrap();
            let mp = CostMatrix::from_fn(size, size, |r, c| Some(base[perm[r]][c])).unwrap();

            let sol = solve_assignment(&m);
            let sol_p = solve_assignment(&mp);

            // The permuted solve relabels rows identically (as sets of pairs).
            let mut relabeled: Vec<(usize, usize)> = sol_p
                .pairs
                .iter()
                .map(|&(r, c)| (perm[r], c))
                .collect();
            relabeled.sort_unstable();
            let mut expected = sol.pairs.clone();
            expected.sort_unstable();
            // Ties may legitimately differ between row orders; compare costs.
            prop_assert_eq!(sol.cardinality(), sol_p.cardinality());
            prop_assert!((sol.total_cost - sol_p.total_cost).abs() < 1e-12);
            // With distinct random costs ties are absent and pair sets agree.
            let distinct = {
                let mut all: Vec<f64> = base.iter().flatten().copied().collect();
                all.sort_by(f64::total_cmp);
                all.windows(2).all(|w| w[0] != w[1])
            };
            if distinct {
                prop_assert_eq!(relabeled, expected);
            }
        }
    }
}
