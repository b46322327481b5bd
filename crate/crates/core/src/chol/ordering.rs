//! Minimum-degree fill-reducing ordering on an explicit elimination graph.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::sparse::CscMatrix;

/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
///
/// Greedy minimum degree: repeatedly eliminate the vertex of smallest current
/// degree (ties to the lowest index) and turn its neighbourhood into a clique.
/// Only the sparsity pattern of `a` is used; the diagonal is ignored.
pub(crate) fn minimum_degree(a: &CscMatrix) -> Vec<usize> {
    let n = a.ncols();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        let (rows, _) = a.col(j);
        for &i in rows {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }

    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs = core::mem::take(&mut adj[v]);
        for &u in &nbrs {
            // adj[u] := (adj[u] ∪ nbrs) \ {u, v}
            merged.clear();
            let (mut p, mut q) = (0, 0);
            let cur = &adj[u];
            while p < cur.len() || q < nbrs.len() {
                let next = match (cur.get(p), nbrs.get(q)) {
                    (Some(&x), Some(&y)) if x == y => {
                        p += 1;
                        q += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        q += 1;
                        y
                    }
                    (Some(&x), None) => {
                        p += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        q += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v {
                    merged.push(next);
                }
            }
            core::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrow_matrix_puts_hub_last() {
        // vertex 0 is connected to everyone; eliminating it first would fill
        // the whole matrix.
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((0, i, 1.0));
                t.push((i, 0, 1.0));
            }
        }
        let a = CscMatrix::from_triplets(n, n, &t).unwrap();
        let perm = minimum_degree(&a);
        assert_eq!(perm.len(), n);
        // once only one spoke is left the hub ties with it
        assert!(perm.iter().position(|&v| v == 0).unwrap() >= n - 2);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}
