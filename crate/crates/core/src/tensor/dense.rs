use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::model::{ModeLayout, Norm};
use crate::{Error, Real, Result};

/// Dense order-J array stored contiguously with the last index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    dims: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> DenseTensor<T> {
    pub fn new(dims: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Parameter("tensor order must be at least 1".into()));
        }
        let expected: usize = dims.iter().product();
        if values.len() != expected {
            return Err(Error::shape(
                format!("{expected} values for dims {dims:?}"),
                format!("{} values", values.len()),
            ));
        }
        Ok(DenseTensor { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        DenseTensor {
            dims: dims.to_vec(),
            values: vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut idx = vec![0; dims.len()];
        let len: usize = dims.iter().product();
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f(&idx));
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        DenseTensor { dims: dims.to_vec(), values }
    }

    /// Order-2 tensor with the same entries as `m`.
    pub fn from_matrix(m: &DMatrix<T>) -> Self {
        let (n, p) = m.shape();
        let values = m.transpose().as_slice().to_vec();
        DenseTensor { dims: vec![n, p], values }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<T>> {
        if self.order() != 2 {
            return Err(Error::shape("order-2 tensor", format!("order {}", self.order())));
        }
        Ok(DMatrix::from_row_slice(self.dims[0], self.dims[1], &self.values))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.values[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let k = self.linear_index(idx);
        self.values[k] = v;
    }

    pub fn layout(&self, mode: usize) -> ModeLayout {
        ModeLayout::new(&self.dims, mode)
    }

    /// Vectorized `i`-th slice along `mode`, in canonical order.
    pub fn slice(&self, mode: usize, i: usize) -> Vec<T> {
        let layout = self.layout(mode);
        let mut out = Vec::with_capacity(layout.slice_len());
        for l in 0..layout.left {
            let o = layout.offset(l, i);
            out.extend_from_slice(&self.values[o..o + layout.right]);
        }
        out
    }

    pub fn norm(&self) -> T {
        Norm::L2.eval(&self.values)
    }

    pub fn inner(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
    }

    pub fn mean(&self) -> T {
        self.values.iter().fold(T::zero(), |a, b| a + *b) / T::from_usize(self.len()).unwrap()
    }
}

/// Mode-`mode` product `T ×_mode M`: slice `i` of the result is
/// `Σ_k M[i, k] · slice_k(T)`.
pub fn mode_product<T: Real>(t: &DenseTensor<T>, m: &DMatrix<T>, mode: usize) -> Result<DenseTensor<T>> {
    if mode >= t.order() {
        return Err(Error::Parameter(format!("tensor of order {} has no mode {mode}", t.order())));
    }
    let layout = t.layout(mode);
    if m.ncols() != layout.extent {
        return Err(Error::shape(
            format!("matrix with {} columns", layout.extent),
            format!("{} columns", m.ncols()),
        ));
    }
    let rows = m.nrows();
    let mut dims = t.dims.clone();
    dims[mode] = rows;
    let mut out = vec![T::zero(); layout.left * rows * layout.right];
    let (left, n, right) = (layout.left, layout.extent, layout.right);
    if right == 1 {
        // Whole tensor is a (left × n) row-major matrix, i.e. column-major n × left.
        let a = DMatrixView::from_slice(&t.values, n, left);
        let mut o = DMatrixViewMut::from_slice(&mut out, rows, left);
        o.gemm(T::one(), m, &a, T::zero());
    } else {
        // Each (n × right) row-major slab is a column-major right × n matrix S;
        // the result slab is S · Mᵀ.
        let mt = m.transpose();
        for l in 0..left {
            let s = DMatrixView::from_slice(&t.values[l * n * right..(l + 1) * n * right], right, n);
            let mut o = DMatrixViewMut::from_slice(&mut out[l * rows * right..(l + 1) * rows * right], right, rows);
            o.gemm(T::one(), &s, &mt, T::zero());
        }
    }
    Ok(DenseTensor { dims, values: out })
}

/// `Σ_i ‖vec(slice_i)‖_q` along `mode`.
pub fn mode_slice_norm_sum<T: Real>(t: &DenseTensor<T>, mode: usize, q: Norm) -> T {
    (0..t.dims[mode]).fold(T::zero(), |acc, i| acc + q.eval(&t.slice(mode, i)))
}
