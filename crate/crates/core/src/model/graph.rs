use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::{Error, Real, Result};

/// Sparse fusion graph over the indices of one mode.
///
/// Edges are stored once, as `(i, j, w)` with `i < j` and `w > 0`, in
/// lexicographic order of `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGraph<T> {
    n_vertices: usize,
    edges: Vec<(usize, usize, T)>,
}

impl<T: Real> WeightGraph<T> {
    /// Validates and canonicalizes an edge list. Endpoints may be given in
    /// either order; zero-weight pairs are dropped.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::MalformedGraph(format!(
                    "edge ({a}, {b}) out of range for {n_vertices} vertices"
                )));
            }
            if a == b {
                return Err(Error::MalformedGraph(format!("self-loop at vertex {a}")));
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::MalformedGraph(format!(
                    "edge ({a}, {b}) has invalid weight {w}"
                )));
            }
            if w == T::zero() {
                continue;
            }
            out.push((a.min(b), a.max(b), w));
        }
        out.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(dup) = out.windows(2).find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(Error::MalformedGraph(format!(
                "duplicate edge ({}, {})",
                dup[0].0, dup[0].1
            )));
        }
        Ok(WeightGraph { n_vertices, edges: out })
    }

    pub fn empty(n_vertices: usize) -> Self {
        WeightGraph { n_vertices, edges: Vec::new() }
    }

    /// Complete graph with a common weight on every pair.
    pub fn complete(n_vertices: usize, weight: T) -> Self {
        let mut edges = Vec::with_capacity(n_vertices * n_vertices.saturating_sub(1) / 2);
        for i in 0..n_vertices {
            for j in i + 1..n_vertices {
                edges.push((i, j, weight));
            }
        }
        WeightGraph { n_vertices, edges }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, T)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_vertices];
        for &(i, j, _) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        let keep = vec![true; self.edges.len()];
        let (_, count) = super::connected_components(self.n_vertices, self.edges.iter().map(|e| (e.0, e.1)), &keep);
        count <= 1
    }

    pub fn map_weights<F: Fn(T) -> T>(&self, f: F) -> Self {
        WeightGraph {
            n_vertices: self.n_vertices,
            edges: self.edges.iter().map(|&(i, j, w)| (i, j, f(w))).collect(),
        }
    }
}

/// Position of one mode inside a contiguous buffer whose last index varies
/// fastest: the buffer is viewed as `left × extent × right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLayout {
    pub left: usize,
    pub extent: usize,
    pub right: usize,
}

impl ModeLayout {
    pub fn new(dims: &[usize], mode: usize) -> Self {
        ModeLayout {
            left: dims[..mode].iter().product(),
            extent: dims[mode],
            right: dims[mode + 1..].iter().product(),
        }
    }

    /// Number of entries in one slice along the mode.
    pub fn slice_len(&self) -> usize {
        self.left * self.right
    }

    pub fn len(&self) -> usize {
        self.left * self.extent * self.right
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn offset(&self, l: usize, i: usize) -> usize {
        (l * self.extent + i) * self.right
    }

    /// Copies every slice of `buf` into a column of `out`
    /// (`slice_len × extent`), in the same order as the edge fields.
    pub fn gather<T: Real>(&self, buf: &[T], out: &mut DMatrix<T>) {
        debug_assert_eq!(out.shape(), (self.slice_len(), self.extent));
        if self.left == 1 {
            out.as_mut_slice().copy_from_slice(buf);
        } else if self.right == 1 {
            DMatrixView::from_slice(buf, self.extent, self.left).transpose_to(out);
        } else {
            for i in 0..self.extent {
                let col = &mut out.as_mut_slice()[i * self.slice_len()..(i + 1) * self.slice_len()];
                for l in 0..self.left {
                    let o = self.offset(l, i);
                    col[l * self.right..(l + 1) * self.right].copy_from_slice(&buf[o..o + self.right]);
                }
            }
        }
    }

    /// `out += scale · src`, with `src` laid out as by [`gather`](Self::gather).
    pub fn scatter_add<T: Real>(&self, src: &DMatrix<T>, scale: T, out: &mut [T]) {
        debug_assert_eq!(src.shape(), (self.slice_len(), self.extent));
        if self.left == 1 {
            for (o, &a) in out.iter_mut().zip(src.as_slice()) {
                *o += scale * a;
            }
        } else if self.right == 1 {
            let mut dst = DMatrixViewMut::from_slice(out, self.extent, self.left);
            for l in 0..self.left {
                for (d, &a) in dst.column_mut(l).iter_mut().zip(src.row(l).iter()) {
                    *d += scale * a;
                }
            }
        } else {
            for i in 0..self.extent {
                let col = &src.as_slice()[i * self.slice_len()..(i + 1) * self.slice_len()];
                for l in 0..self.left {
                    let o = self.offset(l, i);
                    for (d, &a) in out[o..o + self.right].iter_mut().zip(&col[l * self.right..(l + 1) * self.right]) {
                        *d += scale * a;
                    }
                }
            }
        }
    }
}

/// Signed edge-vertex incidence matrix of a fusion graph, stored sparsely.
///
/// Row `k` holds `+1` at the first endpoint and `−1` at the second endpoint
/// of the `k`-th canonical edge. Weights travel alongside and are consumed
/// by the proximal operators, never folded into the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperator<T> {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<T>,
}

pub fn build_difference_operator<T: Real>(graph: &WeightGraph<T>) -> DifferenceOperator<T> {
    DifferenceOperator::new(graph)
}

impl<T: Real> DifferenceOperator<T> {
    pub fn new(graph: &WeightGraph<T>) -> Self {
        DifferenceOperator {
            n_vertices: graph.n_vertices(),
            edges: graph.edges().iter().map(|&(i, j, _)| (i, j)).collect(),
            weights: graph.edges().iter().map(|&(_, _, w)| w).collect(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_weights(&self) -> &[T] {
        &self.weights
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.n_vertices];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.n_vertices, "vector length must equal vertex count");
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|&(i, j)| x[i] - x[j]))
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::zeros(self.edges.len(), self.n_vertices);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            d[(k, i)] = T::one();
            d[(k, j)] = -T::one();
        }
        d
    }

    /// Unweighted graph Laplacian `DᵀD`.
    pub fn laplacian(&self) -> DMatrix<T> {
        let mut l = DMatrix::zeros(self.n_vertices, self.n_vertices);
        for &(i, j) in &self.edges {
            l[(i, i)] += T::one();
            l[(j, j)] += T::one();
            l[(i, j)] -= T::one();
            l[(j, i)] -= T::one();
        }
        l
    }

    /// Differences of slices along one mode of `buf`.
    ///
    /// Column `k` of `out` (shape `slice_len × n_edges`) receives
    /// `slice_i − slice_j` for the `k`-th edge, each slice read in canonical
    /// order.
    pub fn diff_slices(&self, buf: &[T], layout: ModeLayout, out: &mut DMatrix<T>) {
        debug_assert_eq!(layout.extent, self.n_vertices);
        debug_assert_eq!(out.shape(), (layout.slice_len(), self.edges.len()));
        if layout.right == 1 && layout.left > 1 {
            // Slices are strided; gather them into contiguous columns once.
            let slices = DMatrixView::from_slice(buf, layout.extent, layout.left).transpose();
            for (k, &(i, j)) in self.edges.iter().enumerate() {
                let (a, b) = (slices.column(i), slices.column(j));
                let (a, b) = (a.as_slice(), b.as_slice());
                let mut col = out.column_mut(k);
                for ((d, &x), &y) in col.as_mut_slice().iter_mut().zip(a).zip(b) {
                    *d = x - y;
                }
            }
            return;
        }
        let (left, right) = (layout.left, layout.right);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let mut col = out.column_mut(k);
            let dst = col.as_mut_slice();
            for l in 0..left {
                let a = &buf[layout.offset(l, i)..layout.offset(l, i) + right];
                let b = &buf[layout.offset(l, j)..layout.offset(l, j) + right];
                let d = &mut dst[l * right..(l + 1) * right];
                for r in 0..right {
                    d[r] = a[r] - b[r];
                }
            }
        }
    }

    /// `out += scale · DᵀD buf` along one mode, without forming the edge
    /// field.
    pub fn laplacian_slices_add(&self, buf: &[T], layout: ModeLayout, scale: T, out: &mut [T]) {
        debug_assert_eq!(layout.extent, self.n_vertices);
        if self.edges.is_empty() {
            return;
        }
        if layout.right == 1 && layout.left > 1 {
            let slices = DMatrixView::from_slice(buf, layout.extent, layout.left).transpose();
            let mut acc = DMatrix::<T>::zeros(layout.left, layout.extent);
            for &(i, j) in &self.edges {
                for r in 0..layout.left {
                    let d = slices[(r, i)] - slices[(r, j)];
                    acc[(r, i)] += d;
                    acc[(r, j)] -= d;
                }
            }
            let mut dst = DMatrixViewMut::from_slice(out, layout.extent, layout.left);
            for l in 0..layout.left {
                for (d, &a) in dst.column_mut(l).iter_mut().zip(acc.row(l).iter()) {
                    *d += scale * a;
                }
            }
            return;
        }
        let (left, right) = (layout.left, layout.right);
        for &(i, j) in &self.edges {
            for l in 0..left {
                let (oi, oj) = (layout.offset(l, i), layout.offset(l, j));
                for r in 0..right {
                    let d = scale * (buf[oi + r] - buf[oj + r]);
                    out[oi + r] += d;
                    out[oj + r] -= d;
                }
            }
        }
    }

    /// `out += scale · Dᵀ field` along one mode; the adjoint of
    /// [`diff_slices`](Self::diff_slices).
    pub fn adjoint_slices_add(&self, field: &DMatrix<T>, layout: ModeLayout, scale: T, out: &mut [T]) {
        debug_assert_eq!(field.shape(), (layout.slice_len(), self.edges.len()));
        if self.edges.is_empty() {
            return;
        }
        if layout.right == 1 && layout.left > 1 {
            let mut acc = DMatrix::<T>::zeros(layout.left, layout.extent);
            for (k, &(i, j)) in self.edges.iter().enumerate() {
                let src = field.column(k);
                let src = src.as_slice();
                for (a, &v) in acc.column_mut(i).as_mut_slice().iter_mut().zip(src) {
                    *a += v;
                }
                for (a, &v) in acc.column_mut(j).as_mut_slice().iter_mut().zip(src) {
                    *a -= v;
                }
            }
            let mut dst = DMatrixViewMut::from_slice(out, layout.extent, layout.left);
            for l in 0..layout.left {
                for (d, &a) in dst.column_mut(l).iter_mut().zip(acc.row(l).iter()) {
                    *d += scale * a;
                }
            }
            return;
        }
        let (left, right) = (layout.left, layout.right);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let src = field.column(k);
            let src = src.as_slice();
            for l in 0..left {
                let s = &src[l * right..(l + 1) * right];
                let oi = layout.offset(l, i);
                for r in 0..right {
                    out[oi + r] += scale * s[r];
                }
                let oj = layout.offset(l, j);
                for r in 0..right {
                    out[oj + r] -= scale * s[r];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn gather_and_scatter_follow_slice_order() {
        for (dims, mode) in [(vec![3usize, 4, 2], 0), (vec![3, 4, 2], 1), (vec![3, 4, 2], 2), (vec![5, 2], 1), (vec![5, 2], 0)] {
            let layout = ModeLayout::new(&dims, mode);
            let buf: Vec<f64> = (0..layout.len()).map(|k| k as f64).collect();
            let mut m = DMatrix::zeros(layout.slice_len(), layout.extent);
            layout.gather(&buf, &mut m);
            for i in 0..layout.extent {
                let want: Vec<f64> = (0..layout.left)
                    .flat_map(|l| (0..layout.right).map(move |r| (layout.offset(l, i) + r) as f64))
                    .collect();
                assert_eq!(m.column(i).as_slice(), &want[..], "{dims:?} mode {mode}");
            }
            let mut out = vec![1.0; layout.len()];
            layout.scatter_add(&m, 2.0, &mut out);
            assert!(out.iter().enumerate().all(|(k, &v)| v == 1.0 + 2.0 * k as f64));
        }
    }

    fn path3() -> WeightGraph<f64> {
        WeightGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn path_incidence_rows() {
        let d = build_difference_operator(&path3()).to_dense();
        assert_eq!(d, dmatrix![1.0, -1.0, 0.0; 0.0, 1.0, -1.0]);
    }

    #[test]
    fn empty_graph_gives_empty_operator() {
        let op = build_difference_operator(&WeightGraph::<f64>::empty(4));
        assert_eq!(op.n_edges(), 0);
        assert_eq!(op.apply(&DVector::from_element(4, 2.0)).len(), 0);
    }

    #[test]
    fn complete_graph_laplacian_by_hand() {
        // Each vertex of K3 has degree 2 and is adjacent to both others.
        let op = build_difference_operator(&WeightGraph::complete(3, 1.0));
        let d = op.to_dense();
        assert_eq!(d.nrows(), 3);
        let l = d.transpose() * &d;
        assert_eq!(l, dmatrix![2.0, -1.0, -1.0; -1.0, 2.0, -1.0; -1.0, -1.0, 2.0]);
        assert_eq!(l, op.laplacian());
    }

    #[test]
    fn canonicalizes_and_validates() {
        let g = WeightGraph::new(4, [(3, 1, 0.5), (0, 2, 1.0), (1, 2, 0.0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2, 1.0), (1, 3, 0.5)]);
        assert!(matches!(WeightGraph::new(3, [(0, 3, 1.0)]), Err(Error::MalformedGraph(_))));
        assert!(matches!(WeightGraph::new(3, [(1, 1, 1.0)]), Err(Error::MalformedGraph(_))));
        assert!(matches!(
            WeightGraph::new(3, [(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::MalformedGraph(_))
        ));
        assert!(matches!(WeightGraph::new(3, [(0, 1, -1.0)]), Err(Error::MalformedGraph(_))));
    }

    #[test]
    fn slice_differences_match_dense_products() {
        let u = dmatrix![1.0, 2.0, 3.0; 4.0, 6.0, 8.0];
        let rows = build_difference_operator(&WeightGraph::new(2, [(0, 1, 1.0)]).unwrap());
        let cols = build_difference_operator(&path3());
        // Column-major storage: the buffer is a 3 × 2 array, rows of `u`
        // are the slices along the last index.
        let mut f = DMatrix::zeros(3, 1);
        rows.diff_slices(u.as_slice(), ModeLayout::new(&[3, 2], 1), &mut f);
        assert_eq!(f, (rows.to_dense() * &u).transpose());
        let mut g = DMatrix::zeros(2, 2);
        cols.diff_slices(u.as_slice(), ModeLayout::new(&[3, 2], 0), &mut g);
        assert_eq!(g, &u * cols.to_dense().transpose());
    }

    fn arb_graph() -> impl Strategy<Value = WeightGraph<f64>> {
        (2usize..50).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 0.01f64..2.0), 0..120).prop_map(move |raw| {
                let mut seen = std::collections::BTreeMap::new();
                for (a, b, w) in raw {
                    if a != b {
                        seen.insert((a.min(b), a.max(b)), w);
                    }
                }
                WeightGraph::new(n, seen.into_iter().map(|((a, b), w)| (a, b, w))).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn constants_are_annihilated(g in arb_graph(), c in -1e3f64..1e3) {
            let op = build_difference_operator(&g);
            let out = op.apply(&DVector::from_element(g.n_vertices(), c));
            prop_assert!(out.iter().all(|&x| x == 0.0));
        }

        #[test]
        fn laplacian_is_symmetric_psd(g in arb_graph()) {
            let op = build_difference_operator(&g);
            let d = op.to_dense();
            let l = d.transpose() * &d;
            prop_assert_eq!(&l, &l.transpose());
            prop_assert_eq!(&l, &op.laplacian());
            for r in 0..l.nrows() {
                prop_assert!(l.row(r).sum().abs() < 1e-12);
            }
            let eig = l.symmetric_eigenvalues();
            prop_assert!(eig.min() >= -1e-12);
        }

        #[test]
        fn adjoint_identity(g in arb_graph(), seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = g.n_vertices();
            let op = build_difference_operator(&g);
            let layout = ModeLayout::new(&[3, n, 2], 1);
            let x: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = DMatrix::from_fn(layout.slice_len(), op.n_edges(), |_, _| rng.random_range(-1.0..1.0));
            let mut dx = DMatrix::zeros(layout.slice_len(), op.n_edges());
            op.diff_slices(&x, layout, &mut dx);
            let mut dty = vec![0.0; layout.len()];
            op.adjoint_slices_add(&y, layout, 1.0, &mut dty);
            let lhs = dx.dot(&y);
            let rhs: f64 = x.iter().zip(&dty).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn laplacian_apply_matches_adjoint_of_diff(g in arb_graph(), seed in 0u64..1000, outer in 1usize..4, inner in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = g.n_vertices();
            let op = build_difference_operator(&g);
            // Covers the strided (inner == 1) and contiguous paths.
            for layout in [ModeLayout::new(&[outer, n, inner], 1), ModeLayout::new(&[outer, n], 1), ModeLayout::new(&[n, inner], 0)] {
                let x: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut dx = DMatrix::zeros(layout.slice_len(), op.n_edges());
                op.diff_slices(&x, layout, &mut dx);
                let mut via_field = vec![0.5; layout.len()];
                op.adjoint_slices_add(&dx, layout, 2.0, &mut via_field);
                let mut direct = vec![0.5; layout.len()];
                op.laplacian_slices_add(&x, layout, 2.0, &mut direct);
                for (a, b) in via_field.iter().zip(&direct) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}
