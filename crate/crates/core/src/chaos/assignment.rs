//! Minimum-cost perfect matching by shortest augmenting paths with dual
//! potentials. O(n³), exact for real costs, no scaling tricks.

/// Returns the column assigned to each row of the n x n cost matrix
/// (row-major). Ties resolve deterministically by scan order.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    debug_assert!(cost.iter().all(|c| c.is_finite()));
    if n == 0 {
        return Vec::new();
    }
    // index 0 is a virtual free column; p[j] = row matched to column j
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // unwind the augmenting path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Total cost of an assignment, summed in row order.
pub fn assignment_cost(cost: &[f64], n: usize, row_to_col: &[usize]) -> f64 {
    (0..n).map(|i| cost[i * n + row_to_col[i]]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_min(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            if acc >= *best {
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn hand_checked_three_by_three() {
        // optimal is the anti-diagonal: 1 + 2 + 1 = 4
        let cost = [8.0, 4.0, 1.0, 5.0, 2.0, 9.0, 1.0, 6.0, 7.0];
        let a = min_cost_assignment(&cost, 3);
        assert_eq!(a, vec![2, 1, 0]);
        assert_eq!(assignment_cost(&cost, 3, &a), 4.0);
    }

    #[test]
    fn identity_costs_pick_the_diagonal_value() {
        let n = 5;
        let mut cost = vec![1.0; n * n];
        for i in 0..n {
            cost[i * n + i] = 0.0;
        }
        let a = min_cost_assignment(&cost, n);
        assert_eq!(assignment_cost(&cost, n, &a), 0.0);
    }

    #[test]
    fn assignment_is_a_permutation() {
        let cost: Vec<f64> = (0..36).map(|i| ((i * 7919) % 101) as f64).collect();
        let a = min_cost_assignment(&cost, 6);
        let mut seen = vec![false; 6];
        for &j in &a {
            assert!(!seen[j]);
            seen[j] = true;
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..=6, raw in proptest::collection::vec(0.0f64..1.0, 36)) {
            let cost = &raw[..n * n];
            let a = min_cost_assignment(cost, n);
            let got = assignment_cost(cost, n, &a);
            let want = brute_force_min(cost, n);
            prop_assert!((got - want).abs() < 1e-9, "got {got}, brute force {want}");
        }
    }
}
