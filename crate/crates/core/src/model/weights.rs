use std::cmp::Ordering;

use nalgebra::DMatrix;

use super::clusters::DisjointSet;
use super::{ModeLayout, WeightGraph};
use crate::{Error, Real, Result};

/// Bandwidth of the Gaussian kernel `exp(−φ d²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelScale<T> {
    /// `φ = 1 / median` of the squared pairwise distances.
    Auto,
    Fixed(T),
}

/// Sparse Gaussian-kernel weights between the rows (`mode = 0`) or the
/// columns (`mode = 1`) of a matrix.
pub fn gaussian_knn_weights<T: Real>(
    data: &DMatrix<T>,
    mode: usize,
    k: usize,
    phi: KernelScale<T>,
) -> Result<WeightGraph<T>> {
    if mode > 1 {
        return Err(Error::Parameter(format!("matrix has no mode {mode}")));
    }
    // Column-major storage is a (p × n) array with the last index fastest,
    // so rows are slices along position 1 and columns along position 0.
    let dims = [data.ncols(), data.nrows()];
    gaussian_knn_weights_slices(data.as_slice(), &dims, 1 - mode, k, phi)
}

/// k-nearest-neighbour Gaussian weights between the slices of a buffer
/// along `mode` (see [`ModeLayout`]).
///
/// An edge joins `i` and `j` when either is among the `k` nearest slices of
/// the other. If that graph is disconnected, the minimum spanning forest of
/// the complete distance graph supplies the bridging edges.
pub fn gaussian_knn_weights_slices<T: Real>(
    buf: &[T],
    dims: &[usize],
    mode: usize,
    k: usize,
    phi: KernelScale<T>,
) -> Result<WeightGraph<T>> {
    let layout = ModeLayout::new(dims, mode);
    let n = layout.extent;
    if n < 2 {
        return Err(Error::Parameter(format!(
            "mode {mode} needs at least 2 slices for fusion weights, found {n}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!(
            "neighbour count k = {k} must satisfy 1 <= k < {n}"
        )));
    }

    let slices: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut s = Vec::with_capacity(layout.slice_len());
            for l in 0..layout.left {
                let o = layout.offset(l, i);
                s.extend_from_slice(&buf[o..o + layout.right]);
            }
            s
        })
        .collect();
    let mut dist = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = slices[i]
                .iter()
                .zip(&slices[j])
                .fold(T::zero(), |acc, (a, b)| acc + (*a - *b) * (*a - *b));
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }

    let phi = match phi {
        KernelScale::Fixed(p) if p >= T::zero() && p.is_finite() => p,
        KernelScale::Fixed(p) => {
            return Err(Error::Parameter(format!("kernel scale phi = {p} must be finite and >= 0")))
        }
        KernelScale::Auto => {
            let mut all: Vec<T> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist[(i, j)]).collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let m = all.len();
            let median = if m % 2 == 1 {
                all[m / 2]
            } else {
                (all[m / 2 - 1] + all[m / 2]) / crate::lit(2.0)
            };
            if median > T::zero() {
                T::one() / median
            } else {
                T::zero()
            }
        }
    };

    let mut adjacent = vec![false; n * n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dist[(i, a)]
                .partial_cmp(&dist[(i, b)])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            let (a, b) = (i.min(j), i.max(j));
            adjacent[a * n + b] = true;
        }
    }

    let mut ds = DisjointSet::new(n);
    let mut components = n;
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if adjacent[a * n + b] {
                pairs.push((a, b));
                if ds.union(a, b) {
                    components -= 1;
                }
            }
        }
    }
    if components > 1 {
        let mut candidates: Vec<(usize, usize)> =
            (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        candidates.sort_by(|&(a, b), &(c, d)| {
            dist[(a, b)]
                .partial_cmp(&dist[(c, d)])
                .unwrap_or(Ordering::Equal)
                .then((a, b).cmp(&(c, d)))
        });
        for (a, b) in candidates {
            if components == 1 {
                break;
            }
            if ds.union(a, b) {
                components -= 1;
                pairs.push((a, b));
            }
        }
    }

    // exp(−φd²) underflows to zero for far-apart slices; keep those edges
    // with the smallest positive weight so connectivity survives.
    let floor = {
        // Smallest positive normal value of the working precision.
        let f = crate::lit::<T>(f64::MIN_POSITIVE);
        if f > T::zero() {
            f
        } else {
            crate::lit(f32::MIN_POSITIVE as f64)
        }
    };
    WeightGraph::new(
        n,
        pairs
            .into_iter()
            .map(|(a, b)| (a, b, (-phi * dist[(a, b)]).exp().max(floor))),
    )
}
