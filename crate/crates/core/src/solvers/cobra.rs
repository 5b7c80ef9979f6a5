//! Alternating baseline: Dykstra-like proximal splitting over the row and
//! column fusion penalties, each handled by a single-mode convex clustering
//! solve.

use std::time::Instant;

use nalgebra::DMatrix;

use super::engine::norm;
use super::matrix::{solve_warm, MatrixRun};
use super::{Algorithm, ConvergenceTrace, SolverParams, SolverState, TraceRow};
use crate::linsolve::factor;
use crate::model::{objective_value, ProblemInstance};
use crate::{lit, wide, Error, Real, Result};

pub fn cobra_solve<T: Real>(inst: &ProblemInstance<T>, params: &SolverParams<T>) -> Result<MatrixRun<T>> {
    params.validate()?;
    if !matches!(params.cobra_subsolver, Algorithm::Admm | Algorithm::Gadmm) {
        return Err(Error::Parameter(format!(
            "COBRA sub-solver must be admm or gadmm, got {}",
            params.cobra_subsolver
        )));
    }
    let clock = Instant::now();
    let sub_alg = params.cobra_subsolver;
    let mut sub_params = params.clone();
    sub_params.tol = params.cobra_sub_tol.unwrap_or(params.tol / lit(10.0));
    sub_params.record_stationarity = false;

    let [g_row, g_col] = inst.mode_graphs();
    if g_row.n_edges() == 0 || g_col.n_edges() == 0 {
        // One penalty vanishes, so a single sub-solve is exact.
        let (mut state, sub_trace) = solve_warm(inst, sub_alg, &sub_params, None, None)?;
        let u = state.u.clone();
        state.iter = 1;
        let trace = ConvergenceTrace {
            rows: vec![TraceRow {
                iter: 1,
                elapsed_s: clock.elapsed().as_secs_f64(),
                objective: wide(objective_value(inst, &u)?),
                primal_res: 0.0,
                dual_res: 0.0,
            }],
            inner_iterations: sub_trace.inner_iterations,
            restarts: sub_trace.restarts,
            max_stationarity: None,
        };
        return Ok((state, trace));
    }

    let row_inst = inst.single_mode(0);
    let col_inst = inst.single_mode(1);
    let (row_fact, col_fact) = if sub_alg == Algorithm::Admm {
        (Some(factor(row_inst.operators())?), Some(factor(col_inst.operators())?))
    } else {
        (None, None)
    };

    let (n, p) = inst.shape();
    let mut x = inst.data().clone();
    let mut pr = DMatrix::<T>::zeros(n, p);
    let mut qc = DMatrix::<T>::zeros(n, p);
    let mut row_state: Option<SolverState<T, DMatrix<T>>> = None;
    let mut col_state: Option<SolverState<T, DMatrix<T>>> = None;
    let mut trace = ConvergenceTrace::default();
    let mut converged = false;
    let mut outer = 0;

    let wrap = |outer: usize| move |e: Error| Error::Subproblem { outer, source: Box::new(e) };

    for t in 1..=params.max_iter {
        outer = t;
        let y_in = &x + &pr;
        let (rs, rt) = solve_warm(
            &row_inst.with_data(y_in.clone())?,
            sub_alg,
            &sub_params,
            row_fact.as_ref(),
            row_state.take(),
        )
        .map_err(wrap(t))?;
        let y = rs.u.clone();
        pr = y_in - &y;

        let x_in = &y + &qc;
        let (cs, ct) = solve_warm(
            &col_inst.with_data(x_in.clone())?,
            sub_alg,
            &sub_params,
            col_fact.as_ref(),
            col_state.take(),
        )
        .map_err(wrap(t))?;
        let x_new = cs.u.clone();
        qc = x_in - &x_new;

        trace.inner_iterations += rt.inner_iterations + ct.inner_iterations;
        trace.restarts += rt.restarts + ct.restarts;
        let x_norm = norm(x.as_slice());
        let change = (&x_new - &x).norm() / if x_norm > T::zero() { x_norm } else { T::one() };
        let gap = (&x_new - &y).norm() / x_new.norm().max(T::one());
        x = x_new;
        trace.rows.push(TraceRow {
            iter: t,
            elapsed_s: clock.elapsed().as_secs_f64(),
            objective: wide(objective_value(inst, &x)?),
            primal_res: wide(gap),
            dual_res: wide(change),
        });
        row_state = Some(rs);
        col_state = Some(cs);
        if change <= params.tol && gap <= params.tol {
            converged = true;
            break;
        }
    }

    let rs = row_state.expect("at least one outer iteration");
    let cs = col_state.expect("at least one outer iteration");
    let state = SolverState {
        u: x,
        v: vec![rs.v[0].clone(), cs.v[1].clone()],
        z: vec![rs.z[0].clone(), cs.z[1].clone()],
        iter: outer,
        converged,
        rho: rs.rho,
        accel: None,
    };
    Ok((state, trace))
}
