use nalgebra::DMatrix;

use super::engine::kkt;
use super::matrix::MatrixGeometry;
use super::SolverState;
use crate::model::{DifferenceOperator, ProblemInstance};
use crate::{Real, Result};

/// `Σ_j 2·maxdeg_j`, an upper bound on `‖L₁‖²` for the stacked difference
/// operator `L₁ = [D_1; …; D_J]` (each `‖D_j‖² = λ_max(L_j) ≤ 2·maxdeg_j`).
pub fn operator_norm_bound<T: Real>(ops: &[DifferenceOperator<T>]) -> T {
    let total: usize = ops.iter().map(|op| 2 * op.max_degree()).sum();
    T::from_usize(total).unwrap()
}

/// Optimality gap of a matrix solver state; see [`crate::tensor::tensor_kkt_residual`]
/// for tensors.
pub fn kkt_residual<T: Real>(inst: &ProblemInstance<T>, state: &SolverState<T, DMatrix<T>>) -> Result<T> {
    kkt(&MatrixGeometry::new(inst), state)
}
