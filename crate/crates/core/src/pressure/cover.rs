use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use fixedbitset::FixedBitSet;

use super::coverage::CoverageMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CoverMethod {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverResult {
    /// Ascending candidate indices.
    pub chosen: Vec<usize>,
    /// Sum of the chosen weights, added in index order.
    pub total: f64,
    pub method: CoverMethod,
    /// `H(k)` for the largest candidate coverage `k` (greedy), 1 for exact.
    pub harmonic_factor: f64,
    /// Upper bound on `total - optimum`.
    pub gap_bound: f64,
}

pub const DEFAULT_EXACT_THRESHOLD: usize = 20;

/// Minimum-weight cover of all points: branch and bound up to
/// `exact_threshold` candidates (at most 64), greedy beyond.
pub fn min_weight_cover(mat: &CoverageMatrix, exact_threshold: usize) -> Result<CoverResult> {
    let uncovered = mat.uncovered();
    if !uncovered.is_empty() {
        return Err(Error::NotAdmissible { n: None, uncovered });
    }
    if exact_threshold > 64 {
        return Err(Error::Config(format!(
            "exact_threshold is limited to 64, got {exact_threshold}"
        )));
    }
    let greedy = greedy_cover(mat);
    if mat.candidate_count() > exact_threshold {
        return Ok(greedy);
    }
    let chosen = branch_and_bound(mat, &greedy.chosen);
    Ok(CoverResult {
        total: sum_in_order(mat, &chosen),
        chosen,
        method: CoverMethod::Exact,
        harmonic_factor: 1.0,
        gap_bound: 0.0,
    })
}

fn sum_in_order(mat: &CoverageMatrix, chosen: &[usize]) -> f64 {
    chosen.iter().map(|&i| mat.weights[i]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Greedy cover: repeatedly takes the candidate of least weight per newly
/// covered point, lower index first on ties. Keys in the heap are lower
/// bounds of the current ratios, so popping and refreshing is exact.
pub fn greedy_cover(mat: &CoverageMatrix) -> CoverResult {
    let p = mat.point_count();
    let mut covered = FixedBitSet::with_capacity(p);
    let mut heap: BinaryHeap<Reverse<Key>> = mat
        .covers
        .iter()
        .enumerate()
        .filter(|(_, c)| c.count_ones(..) > 0)
        .map(|(i, c)| Reverse(Key(mat.weights[i] / c.count_ones(..) as f64, i)))
        .collect();
    let max_cover = mat
        .covers
        .iter()
        .map(|c| c.count_ones(..))
        .max()
        .unwrap_or(0);
    let mut chosen = Vec::new();
    let mut left = p;
    while left > 0 {
        let Some(Reverse(Key(_, i))) = heap.pop() else {
            break;
        };
        let fresh = mat.covers[i].difference_count(&covered);
        if fresh == 0 {
            continue;
        }
        let key = Key(mat.weights[i] / fresh as f64, i);
        if heap.peek().is_none_or(|Reverse(top)| key <= *top) {
            covered.union_with(&mat.covers[i]);
            left -= fresh;
            chosen.push(i);
        } else {
            heap.push(Reverse(key));
        }
    }
    chosen.sort_unstable();
    let total = sum_in_order(mat, &chosen);
    let h: f64 = (1..=max_cover).map(|k| 1.0 / k as f64).sum();
    let h = h.max(1.0);
    CoverResult {
        chosen,
        total,
        method: CoverMethod::Greedy,
        harmonic_factor: h,
        gap_bound: total * (1.0 - 1.0 / h),
    }
}

struct Search<'a> {
    weights: &'a [f64],
    /// Candidate mask per point.
    coverers: Vec<u64>,
    /// Point set per candidate as a bit set.
    sets: Vec<FixedBitSet>,
    best: f64,
    best_set: Vec<usize>,
    current: Vec<usize>,
}

impl Search<'_> {
    fn run(&mut self, uncovered: &FixedBitSet, banned: u64, cost: f64) {
        if uncovered.is_clear() {
            if cost < self.best {
                self.best = cost;
                self.best_set = self.current.clone();
            }
            return;
        }
        // branch on the uncovered point with fewest allowed coverers; the
        // largest per-point minimum weight is an admissible bound
        let mut pivot = None;
        let mut fewest = u32::MAX;
        let mut bound = 0.0f64;
        for j in uncovered.ones() {
            let allowed = self.coverers[j] & !banned;
            if allowed == 0 {
                return;
            }
            let count = allowed.count_ones();
            if count < fewest {
                fewest = count;
                pivot = Some(j);
            }
            let mut cheapest = f64::INFINITY;
            let mut m = allowed;
            while m != 0 {
                let i = m.trailing_zeros() as usize;
                cheapest = cheapest.min(self.weights[i]);
                m &= m - 1;
            }
            bound = bound.max(cheapest);
        }
        if cost + bound >= self.best {
            return;
        }
        let j = pivot.expect("nonempty uncovered set");
        let mut options = self.coverers[j] & !banned;
        let mut local_ban = banned;
        while options != 0 {
            let i = options.trailing_zeros() as usize;
            options &= options - 1;
            let next_cost = cost + self.weights[i];
            if next_cost < self.best {
                let mut rest = uncovered.clone();
                rest.difference_with(&self.sets[i]);
                self.current.push(i);
                self.run(&rest, local_ban | (1 << i), next_cost);
                self.current.pop();
            }
            // later siblings exclude i: covers containing i were explored
            local_ban |= 1 << i;
        }
    }
}

fn branch_and_bound(mat: &CoverageMatrix, incumbent: &[usize]) -> Vec<usize> {
    let p = mat.point_count();
    let mut coverers = vec![0u64; p];
    for (i, c) in mat.covers.iter().enumerate() {
        for j in c.ones() {
            coverers[j] |= 1 << i;
        }
    }
    let mut search = Search {
        weights: &mat.weights,
        coverers,
        sets: mat.covers.clone(),
        best: incumbent.iter().map(|&i| mat.weights[i]).sum(),
        best_set: incumbent.to_vec(),
        current: Vec::new(),
    };
    let mut all = FixedBitSet::with_capacity(p);
    all.insert_range(..);
    search.run(&all, 0, 0.0);
    let mut out = search.best_set;
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(points: usize, covers: &[&[usize]], weights: &[f64]) -> CoverageMatrix {
        let covers: Vec<Vec<usize>> = covers.iter().map(|c| c.to_vec()).collect();
        CoverageMatrix::from_weights(points, &covers, weights.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn disjoint_singletons_are_both_needed() {
        let m = mat(2, &[&[0], &[1]], &[1.5, 2.5]);
        for t in [0, 20] {
            let r = min_weight_cover(&m, t).unwrap();
            assert_eq!(r.chosen, vec![0, 1]);
            assert_eq!(r.total, 4.0);
        }
    }

    #[test]
    fn cheapest_full_cover_wins() {
        let m = mat(
            3,
            &[&[0, 1, 2], &[0, 1, 2], &[0], &[1, 2]],
            &[3.0, 2.0, 0.5, 1.0],
        );
        let r = min_weight_cover(&m, 20).unwrap();
        assert_eq!(
            (r.chosen.clone(), r.total, r.method),
            (vec![2, 3], 1.5, CoverMethod::Exact)
        );
        let m = mat(
            3,
            &[&[0, 1, 2], &[0, 1, 2], &[0], &[1, 2]],
            &[3.0, 1.2, 0.5, 1.0],
        );
        assert_eq!(min_weight_cover(&m, 20).unwrap().chosen, vec![1]);
    }

    #[test]
    fn greedy_can_be_suboptimal() {
        // greedy takes the big set first and then needs both halves' leftovers
        let m = mat(4, &[&[0, 1, 2], &[0, 1], &[2, 3]], &[1.0, 0.9, 0.9]);
        let g = min_weight_cover(&m, 0).unwrap();
        let e = min_weight_cover(&m, 20).unwrap();
        assert_eq!(g.method, CoverMethod::Greedy);
        assert!(g.total >= e.total);
        assert_eq!(e.chosen, vec![1, 2]);
        assert!(g.gap_bound >= g.total - e.total);
    }

    #[test]
    fn greedy_ties_go_to_lower_index() {
        let m = mat(2, &[&[0, 1], &[0, 1]], &[1.0, 1.0]);
        assert_eq!(min_weight_cover(&m, 0).unwrap().chosen, vec![0]);
    }

    #[test]
    fn uncoverable_points_reported() {
        let m = mat(3, &[&[0]], &[1.0]);
        match min_weight_cover(&m, 20) {
            Err(Error::NotAdmissible { uncovered, .. }) => assert_eq!(uncovered, vec![1, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
