//! Order-J tensor co-clustering.

mod dense;

pub use dense::{mode_product, mode_slice_norm_sum, DenseTensor};

use crate::linsolve::ShiftedSystem;
use crate::model::{extract_clusters, ClusterAssignment, DifferenceOperator, ModeLayout, Norm, ProblemInstance, WeightGraph};
use crate::solvers::engine::{kkt, run, Geometry};
use crate::solvers::{Algorithm, ConvergenceTrace, SolverParams, SolverState};
use crate::{lit, Error, Real, Result};

pub const DEFAULT_ORDER_CAP: usize = 4;

/// Tensor analogue of [`ProblemInstance`]: one fusion graph per mode.
#[derive(Debug, Clone)]
pub struct TensorProblem<T> {
    data: DenseTensor<T>,
    graphs: Vec<WeightGraph<T>>,
    ops: Vec<DifferenceOperator<T>>,
    lambda: T,
    q: Norm,
}

impl<T: Real> TensorProblem<T> {
    pub fn new(data: DenseTensor<T>, graphs: Vec<WeightGraph<T>>, lambda: T, q: Norm) -> Result<Self> {
        Self::with_order_cap(data, graphs, lambda, q, DEFAULT_ORDER_CAP)
    }

    pub fn with_order_cap(
        data: DenseTensor<T>,
        graphs: Vec<WeightGraph<T>>,
        lambda: T,
        q: Norm,
        order_cap: usize,
    ) -> Result<Self> {
        if data.order() > order_cap {
            return Err(Error::Parameter(format!(
                "tensor order {} exceeds the cap of {order_cap}",
                data.order()
            )));
        }
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda = {lambda} must be finite and >= 0")));
        }
        if graphs.len() != data.order() {
            return Err(Error::shape(
                format!("{} mode graphs", data.order()),
                format!("{}", graphs.len()),
            ));
        }
        for (j, (g, &n)) in graphs.iter().zip(data.dims()).enumerate() {
            if g.n_vertices() != n {
                return Err(Error::shape(
                    format!("mode-{j} graph on {n} vertices"),
                    format!("{} vertices", g.n_vertices()),
                ));
            }
        }
        if data.values().iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("data contains non-finite entries".into()));
        }
        let ops = graphs.iter().map(DifferenceOperator::new).collect();
        Ok(TensorProblem { data, graphs, ops, lambda, q })
    }

    /// The order-2 tensor with the same entries and graphs as a matrix instance.
    pub fn from_matrix_instance(inst: &ProblemInstance<T>) -> Self {
        let graphs = inst.mode_graphs().to_vec();
        Self::new(DenseTensor::from_matrix(inst.data()), graphs, inst.lambda(), inst.q())
            .expect("derived from a valid instance")
    }

    pub fn data(&self) -> &DenseTensor<T> {
        &self.data
    }

    pub fn mode_graphs(&self) -> &[WeightGraph<T>] {
        &self.graphs
    }

    pub fn operators(&self) -> &[DifferenceOperator<T>] {
        &self.ops
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn q(&self) -> Norm {
        self.q
    }

    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        Self::with_order_cap(self.data.clone(), self.graphs.clone(), lambda, self.q, usize::MAX)
    }

    /// `½‖𝒳 − 𝒰‖² + λ Σ_j Σ_edges w_e ‖slice_i − slice_k‖_q`.
    pub fn objective(&self, u: &DenseTensor<T>) -> Result<T> {
        if u.dims() != self.data.dims() {
            return Err(Error::shape(format!("{:?}", self.data.dims()), format!("{:?}", u.dims())));
        }
        let loss = self
            .data
            .values()
            .iter()
            .zip(u.values())
            .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
            / lit(2.0);
        let mut penalty = T::zero();
        for (j, op) in self.ops.iter().enumerate() {
            for (&(a, b), &w) in op.edges().iter().zip(op.edge_weights()) {
                let d: Vec<T> = u.slice(j, a).iter().zip(u.slice(j, b)).map(|(&x, y)| x - y).collect();
                penalty += w * self.q.eval(&d);
            }
        }
        Ok(loss + self.lambda * penalty)
    }
}

struct TensorGeometry<'a, T> {
    inst: &'a TensorProblem<T>,
}

impl<T: Real> Geometry<T> for TensorGeometry<'_, T> {
    type P = DenseTensor<T>;

    fn data(&self) -> &DenseTensor<T> {
        &self.inst.data
    }

    fn ops(&self) -> &[DifferenceOperator<T>] {
        &self.inst.ops
    }

    fn layout(&self, mode: usize) -> ModeLayout {
        self.inst.data.layout(mode)
    }

    fn lambda(&self) -> T {
        self.inst.lambda
    }

    fn q(&self) -> Norm {
        self.inst.q
    }

    fn shifted_solve(&self, sys: &ShiftedSystem<'_, T>, rhs: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        sys.solve_tensor(rhs)
    }
}

pub type TensorRun<T> = (SolverState<T, DenseTensor<T>>, ConvergenceTrace);

/// Runs ADMM, GADMM or Davis-Yin on a tensor instance. The copy and dual
/// variable of mode `j` hold one column per mode-`j` edge, each column the
/// vectorized difference of two mode-`j` slices.
pub fn tensor_solve<T: Real>(inst: &TensorProblem<T>, alg: Algorithm, params: &SolverParams<T>) -> Result<TensorRun<T>> {
    if alg == Algorithm::Cobra {
        return Err(Error::Parameter("COBRA is only available for matrices".into()));
    }
    run(&TensorGeometry { inst }, alg, params, None, None)
}

pub fn tensor_kkt_residual<T: Real>(inst: &TensorProblem<T>, state: &SolverState<T, DenseTensor<T>>) -> Result<T> {
    kkt(&TensorGeometry { inst }, state)
}

/// Per-mode clusters of a tensor solution; see [`extract_clusters`].
pub fn tensor_clusters<T: Real>(
    inst: &TensorProblem<T>,
    state: &SolverState<T, DenseTensor<T>>,
    tol: T,
) -> ClusterAssignment {
    extract_clusters(&state.v, &inst.ops, inst.q, tol)
}
