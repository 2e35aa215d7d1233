//! Brute-force reference implementations checked against the optimized ones.

use mctrack::cross_view::{complete_linkage, CrossViewDistance, DistanceMatrix};
use mctrack::cross_window::{assign, hungarian};
use proptest::prelude::*;

/// Complete-linkage distance between two clusters recomputed from the
/// original matrix: infinite beats finite, finite beats empty.
fn cluster_distance(d: &DistanceMatrix, a: &[usize], b: &[usize]) -> CrossViewDistance {
    let mut worst = CrossViewDistance::Empty;
    for &i in a {
        for &j in b {
            match (worst, d.get(i, j)) {
                (_, CrossViewDistance::Infinite) => return CrossViewDistance::Infinite,
                (CrossViewDistance::Empty, x) => worst = x,
                (CrossViewDistance::Finite(w), CrossViewDistance::Finite(v)) if v > w => {
                    worst = CrossViewDistance::Finite(v)
                }
                _ => {}
            }
        }
    }
    worst
}

/// Step-by-step agglomeration scanning every cluster pair at each step.
fn reference_linkage(d: &DistanceMatrix, cutoff: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    loop {
        clusters.sort_by_key(|c| c[0]);
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if let CrossViewDistance::Finite(v) = cluster_distance(d, &clusters[a], &clusters[b]) {
                    if v < cutoff && best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, a, b));
                    }
                }
            }
        }
        let Some((_, a, b)) = best else { return clusters };
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
    }
}

fn arb_matrix(max_n: usize) -> impl Strategy<Value = DistanceMatrix> {
    // Coarse values so that ties are common.
    let entry = prop_oneof![
        6 => (0u8..8).prop_map(|v| CrossViewDistance::Finite(v as f64 * 0.1)),
        2 => Just(CrossViewDistance::Empty),
        1 => Just(CrossViewDistance::Infinite),
    ];
    (1..=max_n).prop_flat_map(move |n| {
        proptest::collection::vec(entry.clone(), n * (n - 1) / 2).prop_map(move |upper| {
            let mut it = upper.into_iter();
            let mut m = DistanceMatrix::new(n);
            for i in 0..n {
                for j in i + 1..n {
                    m.set(i, j, it.next().expect("enough entries"));
                }
            }
            m
        })
    })
}

fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(cost[row][j] + go(cost, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    go(cost, 0, &mut vec![false; cost.first().map_or(0, Vec::len)])
}

fn arb_cost(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n, 0..=max_n).prop_flat_map(|(rows, extra)| {
        let cols = rows.max(extra);
        proptest::collection::vec(proptest::collection::vec(0u32..50, cols), rows)
            .prop_map(|m| m.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn linkage_matches_reference(d in arb_matrix(6), cutoff in prop_oneof![Just(0.3), Just(0.55), Just(1.0)]) {
        let (clusters, merges) = complete_linkage(&d, cutoff);
        prop_assert_eq!(&clusters, &reference_linkage(&d, cutoff));
        prop_assert_eq!(merges.len(), d.len() - clusters.len());
        prop_assert!(merges.iter().all(|m| m.distance < cutoff));
    }

    #[test]
    fn linkage_partitions_inputs(d in arb_matrix(8)) {
        let (clusters, _) = complete_linkage(&d, 0.5);
        let mut all: Vec<usize> = clusters.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
        for c in &clusters {
            for (k, &i) in c.iter().enumerate() {
                for &j in &c[k + 1..] {
                    prop_assert_ne!(d.get(i, j), CrossViewDistance::Infinite);
                }
            }
        }
    }

    #[test]
    fn hungarian_matches_permutations(cost in arb_cost(7)) {
        let cols = hungarian(&cost);
        let mut seen = cols.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), cost.len());
        let total: f64 = cols.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        prop_assert_eq!(total, brute_force_min(&cost));
    }

    #[test]
    fn assignment_respects_threshold(cost in arb_cost(6), holes in proptest::collection::vec(any::<bool>(), 36)) {
        let d: Vec<Vec<Option<f64>>> = cost
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().enumerate().map(|(j, &c)| (!holes[(i * 6 + j) % 36]).then_some(c / 50.0)).collect())
            .collect();
        let a = assign(&d, 0.6);
        let rows: Vec<usize> = a.pairs.iter().map(|p| p.0).chain(a.unmatched_rows.iter().copied()).collect();
        prop_assert_eq!(rows.len(), d.len());
        for &(i, j) in &a.pairs {
            prop_assert!(d[i][j].is_some_and(|c| c <= 0.6));
        }
        let cols = d[0].len();
        prop_assert_eq!(a.pairs.len() + a.unmatched_cols.len(), cols);
    }
}
