#![allow(dead_code)]

use cocluster::model::{gaussian_knn_weights, KernelScale};
use cocluster::tensor::DenseTensor;
use cocluster::{DifferenceOperator, Norm, ProblemInstance, WeightGraph};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(n: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

/// Random graph on `n` vertices, connected through a random spanning tree,
/// plus extra edges with probability `extra`.
pub fn random_connected_graph(n: usize, extra: f64, rng: &mut impl Rng) -> WeightGraph<f64> {
    let mut edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        edges.push((u, v, rng.random_range(0.2..2.0)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !seen.contains(&(i, j)) && rng.random_bool(extra) {
                edges.push((i, j, rng.random_range(0.2..2.0)));
            }
        }
    }
    WeightGraph::new(n, edges).unwrap()
}

pub fn random_graph(n: usize, p_edge: f64, rng: &mut impl Rng) -> WeightGraph<f64> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p_edge) {
                edges.push((i, j, rng.random_range(0.1..3.0)));
            }
        }
    }
    WeightGraph::new(n, edges).unwrap()
}

/// Data-driven kNN Gaussian graphs on both modes of a noisy 2×2 checkerboard.
pub fn knn_instance(n: usize, p: usize, k: usize, sd: f64, seed: u64, lambda: f64, q: Norm) -> ProblemInstance<f64> {
    let (x, _) = cocluster::synth::checkerboard_matrix(n, p, 2, 2, sd, seed).unwrap();
    let rows = gaussian_knn_weights(&x, 0, k, KernelScale::Auto).unwrap();
    let cols = gaussian_knn_weights(&x, 1, k, KernelScale::Auto).unwrap();
    ProblemInstance::new(x, rows, cols, lambda, q).unwrap()
}

/// Penalty scale of the data: `‖X − mean‖_F / Σ_modes Σ_e w_e`.
pub fn lambda_bar(inst: &ProblemInstance<f64>) -> f64 {
    let centered = inst.data() - inst.grand_mean();
    let wsum: f64 = inst
        .mode_graphs()
        .iter()
        .flat_map(|g| g.edges().iter().map(|e| e.2))
        .sum();
    centered.norm() / wsum
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |m: usize| (m * m.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&m| c2(m)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let expected = sum_a * sum_b / c2(n);
    let max = (sum_a + sum_b) / 2.0;
    if (max - expected).abs() < 1e-300 {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

/// Solves `U + ρ L_r U + ρ U L_c = R` through the dense Kronecker-sum system
/// on column-major `vec(U)`.
pub fn kron_matrix_solve(ops: &[DifferenceOperator<f64>], rho: f64, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = rhs.shape();
    let lr = ops[0].laplacian();
    let lc = ops[1].laplacian();
    // vec(A U) = (I ⊗ A) vec U and vec(U B) = (Bᵀ ⊗ I) vec U for column-major vec.
    let left = DMatrix::<f64>::identity(p, p).kronecker(&(DMatrix::identity(n, n) + &lr * rho));
    let right = (&lc * rho).transpose().kronecker(&DMatrix::<f64>::identity(n, n));
    let big = left + right;
    let b = DVector::from_column_slice(rhs.as_slice());
    let sol = big.lu().solve(&b).expect("nonsingular Kronecker sum");
    DMatrix::from_column_slice(n, p, sol.as_slice())
}

/// Dense system of `𝒰 + ρ Σ_j 𝒰 ×_j L_j` built by explicit loops over pairs of
/// multi-indices in layout order (last index fastest).
pub fn kron_tensor_solve(ops: &[DifferenceOperator<f64>], rho: f64, rhs: &DenseTensor<f64>) -> DenseTensor<f64> {
    let dims = rhs.dims().to_vec();
    let total: usize = dims.iter().product();
    let laps: Vec<DMatrix<f64>> = ops.iter().map(|o| o.laplacian()).collect();
    let unravel = |mut k: usize| {
        let mut idx = vec![0; dims.len()];
        for d in (0..dims.len()).rev() {
            idx[d] = k % dims[d];
            k /= dims[d];
        }
        idx
    };
    let mut big = DMatrix::<f64>::zeros(total, total);
    for a in 0..total {
        let ia = unravel(a);
        for b in 0..total {
            let ib = unravel(b);
            let mut v = if a == b { 1.0 } else { 0.0 };
            for (j, l) in laps.iter().enumerate() {
                let others_equal = (0..dims.len()).all(|d| d == j || ia[d] == ib[d]);
                if others_equal {
                    v += rho * l[(ia[j], ib[j])];
                }
            }
            big[(a, b)] = v;
        }
    }
    let sol = big.lu().solve(&DVector::from_column_slice(rhs.values())).unwrap();
    DenseTensor::new(dims.clone(), sol.as_slice().to_vec()).unwrap()
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo < 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Prox of `t‖·‖_q` found by one-dimensional numeric minimization:
/// `q = 2` searches the radius along `v`, `q = 1` each coordinate separately,
/// and `q = inf` the clipping level `m` of `x = sign(v)·min(|v|, m)`.
pub fn numeric_prox(v: &[f64], q: Norm, t: f64) -> Vec<f64> {
    match q {
        Norm::L2 => {
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv == 0.0 {
                return v.to_vec();
            }
            let s = golden_min(|s| 0.5 * (s - nv).powi(2) + t * s.abs(), 0.0, nv);
            v.iter().map(|x| x * s / nv).collect()
        }
        Norm::L1 => v
            .iter()
            .map(|&x| {
                let s = golden_min(|s| 0.5 * (s - x.abs()).powi(2) + t * s, 0.0, x.abs());
                s * x.signum()
            })
            .collect(),
        Norm::Inf => {
            let top = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let obj = |m: f64| {
                v.iter().map(|x| (x.abs() - m).max(0.0).powi(2)).sum::<f64>() * 0.5 + t * m
            };
            let m = golden_min(obj, 0.0, top);
            v.iter().map(|x| x.signum() * x.abs().min(m)).collect()
        }
    }
}

/// Value of the prox objective `½‖x − v‖² + t‖x‖_q`.
pub fn prox_objective(x: &[f64], v: &[f64], q: Norm, t: f64) -> f64 {
    let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * d + t * q.eval(x)
}
