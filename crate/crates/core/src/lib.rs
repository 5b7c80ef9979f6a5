//! Operator-splitting solvers for convex bi-clustering and tensor co-clustering.
//!
//! The estimator minimizes
//!
//! ```text
//! ½‖X − U‖²_F + λ Σ_modes Σ_(i,j) w_ij ‖U_i − U_j‖_q
//! ```
//!
//! where `U_i` is the `i`-th slice of `U` along a mode (rows and columns for
//! matrices). Three splitting schemes are provided: a two-block ADMM whose
//! primal step is a (tensor) Sylvester equation, a Generalized ADMM whose
//! primal step is an explicit weighted average, and Davis-Yin / AMA
//! splitting. The alternating (COBRA / Dykstra-like) baseline is included
//! for comparison.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the
//! unsuffixed aliases at the crate root fix the scalar to `f64`.

pub mod bench;
pub mod error;
pub mod io;
pub mod linsolve;
pub mod model;
pub mod proxops;
pub mod solvers;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{
    build_difference_operator, extract_clusters, gaussian_knn_weights, objective_value,
    ClusterAssignment, DifferenceOperator, KernelScale, Norm, ProblemInstance, WeightGraph,
};
pub use solvers::{
    admm_solve, cobra_solve, davis_yin_solve, gadmm_solve, kkt_residual, operator_norm_bound,
    solve, Algorithm, Alpha, ConvergenceTrace, DualRadius, SolverParams, SolverState, StepPolicy,
    TraceRow,
};
pub use tensor::{mode_product, mode_slice_norm_sum, tensor_solve, DenseTensor, TensorProblem};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the solvers are generic over.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Widens a working scalar to `f64` (for reporting).
#[inline]
pub(crate) fn wide<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Tensor = DenseTensor<f64>;
pub type Instance = ProblemInstance<f64>;
pub type TensorInstance = TensorProblem<f64>;
pub type Graph = WeightGraph<f64>;
pub type Operator = DifferenceOperator<f64>;
pub type Params = SolverParams<f64>;
pub type State = SolverState<f64, nalgebra::DMatrix<f64>>;
pub type TensorState = SolverState<f64, DenseTensor<f64>>;
pub type Factorization = linsolve::CachedFactorization<f64>;
