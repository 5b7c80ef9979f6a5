use nalgebra::DMatrix;

use super::engine::{run, Geometry};
use super::{cobra_solve, Algorithm, ConvergenceTrace, SolverParams, SolverState};
use crate::linsolve::ShiftedSystem;
use crate::model::{DifferenceOperator, ModeLayout, Norm, ProblemInstance};
use crate::{Real, Result};

pub(crate) struct MatrixGeometry<'a, T> {
    inst: &'a ProblemInstance<T>,
    layouts: [ModeLayout; 2],
}

impl<'a, T: Real> MatrixGeometry<'a, T> {
    pub(crate) fn new(inst: &'a ProblemInstance<T>) -> Self {
        // A column-major n×p buffer is a row-major tensor of dims [p, n].
        let (n, p) = inst.shape();
        let dims = [p, n];
        MatrixGeometry {
            inst,
            layouts: [ModeLayout::new(&dims, 1), ModeLayout::new(&dims, 0)],
        }
    }
}

impl<T: Real> Geometry<T> for MatrixGeometry<'_, T> {
    type P = DMatrix<T>;

    fn data(&self) -> &DMatrix<T> {
        self.inst.data()
    }

    fn ops(&self) -> &[DifferenceOperator<T>] {
        self.inst.operators()
    }

    fn layout(&self, mode: usize) -> ModeLayout {
        self.layouts[mode]
    }

    fn lambda(&self) -> T {
        self.inst.lambda()
    }

    fn q(&self) -> Norm {
        self.inst.q()
    }

    fn shifted_solve(&self, sys: &ShiftedSystem<'_, T>, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
        sys.solve_matrix(rhs)
    }
}

pub type MatrixRun<T> = (SolverState<T, DMatrix<T>>, ConvergenceTrace);

/// Two-block ADMM; the primal step solves `U + ρL_row U + ρU L_col = RHS`
/// through a factorization computed once per call.
pub fn admm_solve<T: Real>(inst: &ProblemInstance<T>, params: &SolverParams<T>) -> Result<MatrixRun<T>> {
    run(&MatrixGeometry::new(inst), Algorithm::Admm, params, None, None)
}

/// Generalized ADMM: the augmentation `α I − ρ L₁ᵀL₁` turns the primal step
/// into an explicit average.
pub fn gadmm_solve<T: Real>(inst: &ProblemInstance<T>, params: &SolverParams<T>) -> Result<MatrixRun<T>> {
    run(&MatrixGeometry::new(inst), Algorithm::Gadmm, params, None, None)
}

/// Davis-Yin splitting in its simplified (AMA) form.
pub fn davis_yin_solve<T: Real>(inst: &ProblemInstance<T>, params: &SolverParams<T>) -> Result<MatrixRun<T>> {
    run(&MatrixGeometry::new(inst), Algorithm::DavisYin, params, None, None)
}

pub fn solve<T: Real>(inst: &ProblemInstance<T>, alg: Algorithm, params: &SolverParams<T>) -> Result<MatrixRun<T>> {
    match alg {
        Algorithm::Cobra => cobra_solve(inst, params),
        _ => run(&MatrixGeometry::new(inst), alg, params, None, None),
    }
}

/// Runs a single-loop algorithm with a caller-supplied factorization and
/// starting state.
pub(crate) fn solve_warm<T: Real>(
    inst: &ProblemInstance<T>,
    alg: Algorithm,
    params: &SolverParams<T>,
    fact: Option<&crate::linsolve::CachedFactorization<T>>,
    init: Option<SolverState<T, DMatrix<T>>>,
) -> Result<MatrixRun<T>> {
    run(&MatrixGeometry::new(inst), alg, params, fact, init)
}
