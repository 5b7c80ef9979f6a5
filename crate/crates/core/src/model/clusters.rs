use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{DifferenceOperator, Norm};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<Vec<usize>>,
    pub n_clusters: Vec<usize>,
}

pub(crate) struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `true` if the two sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Labels the components of the subgraph made of the edges with `keep[k]`.
/// Labels are assigned in order of each component's smallest vertex.
pub fn connected_components(
    n_vertices: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
    keep: &[bool],
) -> (Vec<usize>, usize) {
    let mut ds = DisjointSet::new(n_vertices);
    for (k, (i, j)) in edges.into_iter().enumerate() {
        if keep[k] {
            ds.union(i, j);
        }
    }
    let mut ids = HashMap::new();
    let labels: Vec<usize> = (0..n_vertices)
        .map(|v| {
            let root = ds.find(v);
            let next = ids.len();
            *ids.entry(root).or_insert(next)
        })
        .collect();
    (labels, ids.len())
}

/// Reads clusters off the per-mode copy variables.
///
/// `fields[m]` holds one column per edge of `ops[m]`; an edge fuses its
/// endpoints when the column's `q`-norm is at most `tol`. Proximal outputs
/// are exactly zero on fused edges, so `tol = 0` is the natural choice.
pub fn extract_clusters<T: Real>(
    fields: &[DMatrix<T>],
    ops: &[DifferenceOperator<T>],
    q: Norm,
    tol: T,
) -> ClusterAssignment {
    let tol = tol.max(T::zero());
    let mut labels = Vec::with_capacity(ops.len());
    let mut counts = Vec::with_capacity(ops.len());
    for (field, op) in fields.iter().zip(ops) {
        let keep: Vec<bool> = (0..op.n_edges())
            .map(|k| q.eval(field.column(k).as_slice()) <= tol)
            .collect();
        let (l, c) = connected_components(op.n_vertices(), op.edges().iter().copied(), &keep);
        labels.push(l);
        counts.push(c);
    }
    ClusterAssignment {
        labels,
        n_clusters: counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_difference_operator, WeightGraph};

    fn path3() -> DifferenceOperator<f64> {
        build_difference_operator(&WeightGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap())
    }

    #[test]
    fn all_zero_fields_fuse_everything() {
        let op = path3();
        let a = extract_clusters(&[DMatrix::zeros(4, 2)], &[op], Norm::L2, 0.0);
        assert_eq!(a.labels, vec![vec![0, 0, 0]]);
        assert_eq!(a.n_clusters, vec![1]);
    }

    #[test]
    fn nonzero_fields_keep_singletons() {
        let op = path3();
        let a = extract_clusters(&[DMatrix::from_element(4, 2, 0.1)], &[op], Norm::L1, 0.0);
        assert_eq!(a.labels, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn partial_fusion_on_path() {
        let op = path3();
        let field = DMatrix::from_column_slice(2, 2, &[0.0, 0.0, 1.0, -1.0]);
        let a = extract_clusters(&[field], &[op], Norm::Inf, -1.0);
        assert_eq!(a.labels, vec![vec![0, 0, 1]]);
        assert_eq!(a.n_clusters, vec![2]);
    }

    #[test]
    fn labels_do_not_depend_on_edge_order() {
        let edges = [(0, 3), (1, 2), (4, 5), (2, 5)];
        let keep = [true, false, true, true];
        let (a, na) = connected_components(6, edges.iter().copied(), &keep);
        let rev: Vec<_> = edges.iter().rev().copied().collect();
        let keep_rev: Vec<_> = keep.iter().rev().copied().collect();
        let (b, nb) = connected_components(6, rev, &keep_rev);
        assert_eq!(a, b);
        assert_eq!(na, nb);
        assert_eq!(a, vec![0, 1, 2, 0, 2, 2]);
    }
}
