//! Operator-splitting solvers.
//!
//! Variables follow the usual splitting: `U` is the primal estimate, and for
//! every mode `j` the copy variable `V_j ≈ D_j U` and the (unscaled) dual
//! `Z_j` are stored as one column per fusion edge. For the row mode of a
//! matrix, column `e` of `V_0` is the difference of two rows of `U`; for the
//! column mode it is the difference of two columns.

mod cobra;
mod diagnostics;
pub(crate) mod engine;
mod matrix;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

pub use cobra::cobra_solve;
pub use diagnostics::{kkt_residual, operator_norm_bound};
pub use engine::Momentum;
pub use matrix::{admm_solve, davis_yin_solve, gadmm_solve, solve};

use crate::{lit, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Admm,
    Gadmm,
    DavisYin,
    Cobra,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Admm,
        Algorithm::Gadmm,
        Algorithm::DavisYin,
        Algorithm::Cobra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Admm => "admm",
            Algorithm::Gadmm => "gadmm",
            Algorithm::DavisYin => "davis-yin",
            Algorithm::Cobra => "cobra",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "admm" => Ok(Algorithm::Admm),
            "gadmm" | "generalized-admm" => Ok(Algorithm::Gadmm),
            "davis-yin" | "dy" | "ama" => Ok(Algorithm::DavisYin),
            "cobra" | "dlpa" => Ok(Algorithm::Cobra),
            other => Err(Error::Parameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Augmentation constant of the generalized ADMM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha<T> {
    /// `ρ · Σ_j 2·maxdeg_j`, which keeps the augmentation positive semidefinite.
    Auto,
    Fixed(T),
}

/// Step size of the Davis-Yin iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy<T> {
    /// `ρ = 1 / (2 · Σ_j 2·maxdeg_j)`.
    Auto,
    Fixed(T),
}

/// Radius of the dual balls in the simplified Davis-Yin dual step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualRadius {
    /// `λ·w_e`, the radius for the unscaled dual.
    #[default]
    Unscaled,
    /// `λ·w_e / ρ`, as written for the scaled form.
    Scaled,
}

#[derive(Debug, Clone)]
pub struct SolverParams<T> {
    pub rho: T,
    pub alpha: Alpha<T>,
    pub max_iter: usize,
    pub tol: T,
    pub accelerate: bool,
    pub dy_step: StepPolicy<T>,
    pub dual_radius: DualRadius,
    /// Required decrease factor of the combined residual before a restart.
    pub restart_eta: T,
    /// Record the stationarity residual of every ADMM primal update.
    pub record_stationarity: bool,
    pub cobra_subsolver: Algorithm,
    /// Sub-problem tolerance for COBRA; `tol / 10` when unset.
    pub cobra_sub_tol: Option<T>,
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        SolverParams {
            rho: T::one(),
            alpha: Alpha::Auto,
            max_iter: 10_000,
            tol: lit(1e-6),
            accelerate: false,
            dy_step: StepPolicy::Auto,
            dual_radius: DualRadius::Unscaled,
            restart_eta: lit(0.999),
            record_stationarity: false,
            cobra_subsolver: Algorithm::Gadmm,
            cobra_sub_tol: None,
        }
    }
}

impl<T: Real> SolverParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: T| x > T::zero() && x.is_finite();
        if !positive(self.rho) {
            return Err(Error::Parameter(format!("rho = {} must be > 0", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be >= 1".into()));
        }
        if !positive(self.tol) {
            return Err(Error::Parameter(format!("tol = {} must be > 0", self.tol)));
        }
        if let Alpha::Fixed(a) = self.alpha {
            if !positive(a) {
                return Err(Error::Parameter(format!("alpha = {a} must be > 0")));
            }
        }
        if let StepPolicy::Fixed(r) = self.dy_step {
            if !positive(r) {
                return Err(Error::Parameter(format!("Davis-Yin step rho = {r} must be > 0")));
            }
        }
        if !(self.restart_eta > T::zero() && self.restart_eta < T::one()) {
            return Err(Error::Parameter(format!("restart eta = {} must lie in (0, 1)", self.restart_eta)));
        }
        if let Some(t) = self.cobra_sub_tol {
            if !positive(t) {
                return Err(Error::Parameter(format!("sub-problem tol = {t} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub elapsed_s: f64,
    pub objective: f64,
    pub primal_res: f64,
    pub dual_res: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
    /// Total sub-problem iterations (COBRA); equals the row count otherwise.
    pub inner_iterations: usize,
    pub restarts: usize,
    /// Largest relative stationarity residual of an ADMM primal update, when
    /// recorded.
    pub max_stationarity: Option<f64>,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().map(|r| r.objective)
    }

    pub fn elapsed_s(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.elapsed_s)
    }
}

#[derive(Debug, Clone)]
pub struct SolverState<T, P> {
    pub u: P,
    /// Copy variables, one `slice_len × n_edges` block per mode.
    pub v: Vec<DMatrix<T>>,
    /// Unscaled duals, same layout as `v`.
    pub z: Vec<DMatrix<T>>,
    pub iter: usize,
    pub converged: bool,
    /// The `ρ` the run actually used (differs from the parameter under the
    /// automatic Davis-Yin step).
    pub rho: T,
    pub accel: Option<Momentum<T>>,
}

impl<T: Real> SolverState<T, DMatrix<T>> {
    /// Row copy variable in natural `|E_row| × p` orientation.
    pub fn v_row(&self) -> DMatrix<T> {
        self.v[0].transpose()
    }

    /// Column copy variable, `n × |E_col|`.
    pub fn v_col(&self) -> DMatrix<T> {
        self.v[1].clone()
    }

    pub fn z_row(&self) -> DMatrix<T> {
        self.z[0].transpose()
    }

    pub fn z_col(&self) -> DMatrix<T> {
        self.z[1].clone()
    }
}
