//! Primal-update linear systems of the two-block ADMM.
//!
//! Every coefficient is a shifted graph Laplacian `I + ρ Σ_j L_j` acting
//! along distinct modes. The Laplacians are symmetric PSD, so one symmetric
//! eigendecomposition per mode diagonalizes the whole (Kronecker-sum) system;
//! this is cached once and reused at every iteration and for every `ρ`.

use std::cell::Cell;
use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::model::DifferenceOperator;
use crate::tensor::{mode_product, DenseTensor};
use crate::{Error, Real, Result};

pub const DEFAULT_SIZE_CAP: usize = 5000;

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of factorizations computed so far on the calling thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(Cell::get)
}

#[derive(Debug, Clone)]
pub struct ModeEigen<T> {
    /// Orthogonal eigenvectors (columns), ordered by ascending eigenvalue.
    pub vectors: DMatrix<T>,
    pub vectors_t: DMatrix<T>,
    pub values: DVector<T>,
}

/// Eigendecompositions of every mode Laplacian `D_jᵀD_j`.
#[derive(Debug, Clone)]
pub struct CachedFactorization<T> {
    modes: Vec<ModeEigen<T>>,
}

pub fn factor<T: Real>(ops: &[DifferenceOperator<T>]) -> Result<CachedFactorization<T>> {
    CachedFactorization::new(ops, DEFAULT_SIZE_CAP)
}

impl<T: Real> CachedFactorization<T> {
    pub fn new(ops: &[DifferenceOperator<T>], size_cap: usize) -> Result<Self> {
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));
        let modes = ops
            .iter()
            .enumerate()
            .map(|(mode, op)| eigen_mode(mode, op, size_cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(CachedFactorization { modes })
    }

    pub fn modes(&self) -> &[ModeEigen<T>] {
        &self.modes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.values.len()).collect()
    }

    /// Precomputes the entrywise divisor `1 + ρ Σ_j Λ_j[i_j]` for one `ρ`.
    pub fn shifted(&self, rho: T) -> ShiftedSystem<'_, T> {
        let dims = self.dims();
        let divisor = DenseTensor::from_fn(&dims, |idx| {
            let s = idx
                .iter()
                .zip(&self.modes)
                .fold(T::zero(), |acc, (&i, m)| acc + m.values[i]);
            T::one() + rho * s
        })
        .into_values();
        ShiftedSystem { fact: self, rho, divisor }
    }
}

fn eigen_mode<T: Real>(mode: usize, op: &DifferenceOperator<T>, cap: usize) -> Result<ModeEigen<T>> {
    let n = op.n_vertices();
    if n > cap {
        return Err(Error::TooLarge { mode, size: n, cap });
    }
    if op.n_edges() == 0 {
        let id = DMatrix::identity(n, n);
        return Ok(ModeEigen {
            vectors_t: id.clone(),
            vectors: id,
            values: DVector::zeros(n),
        });
    }
    let eig = SymmetricEigen::try_new(op.laplacian(), T::default_epsilon(), 0).ok_or_else(|| {
        Error::Numerical {
            mode,
            reason: "symmetric eigensolver did not converge".into(),
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k].max(T::zero())));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    if values.iter().any(|v| !v.is_finite()) || vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            mode,
            reason: "non-finite eigenpairs".into(),
        });
    }
    Ok(ModeEigen {
        vectors_t: vectors.transpose(),
        vectors,
        values,
    })
}

/// A cached factorization bound to one value of `ρ`.
#[derive(Debug, Clone)]
pub struct ShiftedSystem<'a, T> {
    fact: &'a CachedFactorization<T>,
    rho: T,
    divisor: Vec<T>,
}

impl<T: Real> ShiftedSystem<'_, T> {
    pub fn rho(&self) -> T {
        self.rho
    }

    /// Solves `U + ρ L_row U + ρ U L_col = rhs`.
    pub fn solve_matrix(&self, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
        let modes = &self.fact.modes;
        if modes.len() != 2 {
            return Err(Error::shape("factorization of 2 modes", format!("{} modes", modes.len())));
        }
        let (n, p) = (modes[0].values.len(), modes[1].values.len());
        if rhs.shape() != (n, p) {
            return Err(Error::shape(format!("({n}, {p})"), format!("{:?}", rhs.shape())));
        }
        let mut t = &modes[0].vectors_t * rhs * &modes[1].vectors;
        for b in 0..p {
            for a in 0..n {
                t[(a, b)] /= self.divisor[a * p + b];
            }
        }
        Ok(&modes[0].vectors * t * &modes[1].vectors_t)
    }

    /// Solves `𝒰 + ρ Σ_j 𝒰 ×_j L_j = rhs`.
    pub fn solve_tensor(&self, rhs: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        let dims = self.fact.dims();
        if rhs.dims() != dims.as_slice() {
            return Err(Error::shape(format!("{dims:?}"), format!("{:?}", rhs.dims())));
        }
        let mut t = rhs.clone();
        for (mode, m) in self.fact.modes.iter().enumerate() {
            t = mode_product(&t, &m.vectors_t, mode)?;
        }
        for (x, d) in t.values_mut().iter_mut().zip(&self.divisor) {
            *x /= *d;
        }
        for (mode, m) in self.fact.modes.iter().enumerate() {
            t = mode_product(&t, &m.vectors, mode)?;
        }
        Ok(t)
    }
}

pub fn sylvester_solve<T: Real>(fact: &CachedFactorization<T>, rho: T, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
    fact.shifted(rho).solve_matrix(rhs)
}

pub fn tensor_sylvester_solve<T: Real>(
    fact: &CachedFactorization<T>,
    rho: T,
    rhs: &DenseTensor<T>,
) -> Result<DenseTensor<T>> {
    fact.shifted(rho).solve_tensor(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_difference_operator, WeightGraph};
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};

    fn op(n: usize, edges: &[(usize, usize)]) -> DifferenceOperator<f64> {
        build_difference_operator(&WeightGraph::new(n, edges.iter().map(|&(i, j)| (i, j, 1.0))).unwrap())
    }

    fn random_op(n: usize, rng: &mut impl Rng) -> DifferenceOperator<f64> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        op(n, &edges)
    }

    #[test]
    fn empty_operator_has_identity_factor() {
        let f = factor(&[op(3, &[])]).unwrap();
        assert_eq!(f.modes()[0].values, DVector::zeros(3));
        assert_eq!(f.modes()[0].vectors, DMatrix::identity(3, 3));
    }

    #[test]
    fn known_spectra() {
        let f = factor(&[op(2, &[(0, 1)]), op(3, &[(0, 1), (1, 2)])]).unwrap();
        assert!((&f.modes()[0].values - dvector![0.0, 2.0]).norm() < 1e-12);
        assert!((&f.modes()[1].values - dvector![0.0, 1.0, 3.0]).norm() < 1e-12);
    }

    #[test]
    fn factor_invariants() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [2, 5, 17, 30] {
            let o = random_op(n, &mut rng);
            let f = factor(std::slice::from_ref(&o)).unwrap();
            let m = &f.modes()[0];
            assert!((m.vectors.transpose() * &m.vectors - DMatrix::identity(n, n)).norm() < 1e-10);
            assert!(m.values.iter().all(|&v| v >= -1e-10));
            let rebuilt = &m.vectors * DMatrix::from_diagonal(&m.values) * &m.vectors_t;
            assert!((rebuilt - o.laplacian()).norm() < 1e-8);
        }
    }

    #[test]
    fn size_cap_is_enforced() {
        let err = CachedFactorization::new(&[op(4, &[(0, 1)])], 3).unwrap_err();
        assert!(matches!(err, Error::TooLarge { mode: 0, size: 4, cap: 3 }));
    }

    #[test]
    fn zero_rho_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let f = factor(&[random_op(5, &mut rng), random_op(4, &mut rng)]).unwrap();
        let rhs = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        assert!((sylvester_solve(&f, 0.0, &rhs).unwrap() - &rhs).norm() < 1e-13);
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let f = factor(&[random_op(6, &mut rng), random_op(4, &mut rng)]).unwrap();
        let rhs = DMatrix::from_element(6, 4, 2.5);
        for rho in [0.1, 1.0, 50.0] {
            assert!((sylvester_solve(&f, rho, &rhs).unwrap() - &rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn residual_and_linearity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        let (ro, co) = (random_op(30, &mut rng), random_op(30, &mut rng));
        let (lr, lc) = (ro.laplacian(), co.laplacian());
        let f = factor(&[ro, co]).unwrap();
        let sys = f.shifted(0.8);
        let a = DMatrix::from_fn(30, 30, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(30, 30, |_, _| rng.random_range(-1.0..1.0));
        let ua = sys.solve_matrix(&a).unwrap();
        let res = &ua + 0.8 * &lr * &ua + 0.8 * &ua * &lc - &a;
        assert!(res.norm() <= 1e-10 * a.norm());
        let ub = sys.solve_matrix(&b).unwrap();
        let uab = sys.solve_matrix(&(&a + &b)).unwrap();
        assert!((uab - ua - ub).norm() <= 1e-10 * (a.norm() + b.norm()));
        assert!(sys.solve_matrix(&DMatrix::zeros(3, 30)).is_err());
    }

    #[test]
    fn cached_path_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        let ops = [random_op(7, &mut rng), random_op(5, &mut rng)];
        let f = factor(&ops).unwrap();
        let sys = f.shifted(1.0);
        let rhs = DMatrix::from_fn(7, 5, |_, _| rng.random_range(-1.0..1.0));
        let first = sys.solve_matrix(&rhs).unwrap();
        let fresh = factor(&ops).unwrap();
        for _ in 0..1000 {
            assert_eq!(sys.solve_matrix(&rhs).unwrap(), first);
        }
        assert_eq!(sylvester_solve(&fresh, 1.0, &rhs).unwrap(), first);
    }

    #[test]
    fn tensor_solve_reduces_to_matrix_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(16);
        let f = factor(&[random_op(6, &mut rng), random_op(4, &mut rng)]).unwrap();
        let rhs = DMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let m = sylvester_solve(&f, 0.7, &rhs).unwrap();
        let t = tensor_sylvester_solve(&f, 0.7, &DenseTensor::from_matrix(&rhs)).unwrap();
        assert!((t.to_matrix().unwrap() - m).norm() < 1e-12);
        let id = tensor_sylvester_solve(&f, 0.0, &DenseTensor::from_matrix(&rhs)).unwrap();
        assert!((id.to_matrix().unwrap() - &rhs).norm() < 1e-13);
    }

    #[test]
    fn tensor_residual_on_cube() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let ops: Vec<_> = (0..3).map(|_| random_op(8, &mut rng)).collect();
        let f = factor(&ops).unwrap();
        let rhs = DenseTensor::from_fn(&[8, 8, 8], |_| rng.random_range(-1.0..1.0));
        let u = tensor_sylvester_solve(&f, 1.3, &rhs).unwrap();
        let mut lhs = u.clone();
        for (j, o) in ops.iter().enumerate() {
            let lu = mode_product(&u, &o.laplacian(), j).unwrap();
            for (a, b) in lhs.values_mut().iter_mut().zip(lu.values()) {
                *a += 1.3 * b;
            }
        }
        let res: f64 = lhs.values().iter().zip(rhs.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * rhs.norm());
    }

    #[test]
    fn single_precision_solve() {
        let ro = build_difference_operator(&WeightGraph::new(3, [(0, 1, 1.0f32), (1, 2, 1.0)]).unwrap());
        let co = build_difference_operator(&WeightGraph::new(2, [(0, 1, 1.0f32)]).unwrap());
        let (lr, lc) = (ro.laplacian(), co.laplacian());
        let f = factor(&[ro, co]).unwrap();
        let rhs = DMatrix::from_row_slice(3, 2, &[1.0f32, -2.0, 0.5, 3.0, 0.0, 1.0]);
        let u = sylvester_solve(&f, 1.0, &rhs).unwrap();
        let res = &u + &lr * &u + &u * &lc - &rhs;
        assert!(res.norm() < 1e-5);
    }
}
