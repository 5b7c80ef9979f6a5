//! The iteration shared by ADMM, Generalized ADMM and Davis-Yin splitting,
//! independent of whether the primal variable is a matrix or a tensor.

use std::time::Instant;

use nalgebra::DMatrix;

use super::diagnostics::operator_norm_bound;
use super::{Algorithm, ConvergenceTrace, DualRadius, SolverParams, SolverState, StepPolicy, TraceRow};
use crate::linsolve::{factor, CachedFactorization, ShiftedSystem};
use crate::model::{lane_sum, DifferenceOperator, ModeLayout, Norm, LANES};
use crate::proxops::{project_ball, prox_norm};
use crate::tensor::DenseTensor;
use crate::{lit, wide, Error, Real, Result};

/// Dense storage of a primal variable.
pub trait Primal<T>: Clone {
    fn buf(&self) -> &[T];
    fn buf_mut(&mut self) -> &mut [T];
}

impl<T: Real> Primal<T> for DMatrix<T> {
    fn buf(&self) -> &[T] {
        self.as_slice()
    }

    fn buf_mut(&mut self) -> &mut [T] {
        self.as_mut_slice()
    }
}

impl<T: Real> Primal<T> for DenseTensor<T> {
    fn buf(&self) -> &[T] {
        self.values()
    }

    fn buf_mut(&mut self) -> &mut [T] {
        self.values_mut()
    }
}

pub(crate) trait Geometry<T: Real> {
    type P: Primal<T>;

    fn data(&self) -> &Self::P;
    fn ops(&self) -> &[DifferenceOperator<T>];
    fn layout(&self, mode: usize) -> ModeLayout;
    fn lambda(&self) -> T;
    fn q(&self) -> Norm;
    fn shifted_solve(&self, sys: &ShiftedSystem<'_, T>, rhs: &Self::P) -> Result<Self::P>;

    fn diff_all(&self, u: &Self::P, out: &mut [DMatrix<T>]) {
        for (j, op) in self.ops().iter().enumerate() {
            op.diff_slices(u.buf(), self.layout(j), &mut out[j]);
        }
    }

    fn laplacian_add(&self, u: &Self::P, scale: T, out: &mut [T]) {
        for (j, op) in self.ops().iter().enumerate() {
            op.laplacian_slices_add(u.buf(), self.layout(j), scale, out);
        }
    }

    fn adjoint_add(&self, fields: &[DMatrix<T>], scale: T, out: &mut [T]) {
        for (j, op) in self.ops().iter().enumerate() {
            op.adjoint_slices_add(&fields[j], self.layout(j), scale, out);
        }
    }

    fn zero_fields(&self) -> Vec<DMatrix<T>> {
        self.ops()
            .iter()
            .enumerate()
            .map(|(j, op)| DMatrix::zeros(self.layout(j).slice_len(), op.n_edges()))
            .collect()
    }
}

/// Momentum carry of the restarted accelerated scheme.
#[derive(Debug, Clone)]
pub struct Momentum<T> {
    pub v_hat: Vec<DMatrix<T>>,
    pub z_hat: Vec<DMatrix<T>>,
    pub t: T,
    /// Combined residual of the last accepted step; `None` stands for +∞.
    pub c_prev: Option<T>,
    pub restarts: usize,
}

pub(crate) fn norm<T: Real>(x: &[T]) -> T {
    lane_sum(x, |v| v * v).sqrt()
}

fn fields_dist_sq<T: Real>(a: &[DMatrix<T>], b: &[DMatrix<T>]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + sub_sq(x.as_slice(), y.as_slice()))
}

fn sub_sq<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let rest = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y));
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += (x[k] - y[k]) * (x[k] - y[k]);
        }
    }
    acc.iter().fold(rest, |s, &v| s + v)
}

/// `(‖d − v‖², ‖d‖², ‖v‖²)` in one pass.
fn residual_sums<T: Real>(d: &[T], v: &[T]) -> (T, T, T) {
    let mut acc = [[T::zero(); LANES]; 3];
    let (cd, cv) = (d.chunks_exact(LANES), v.chunks_exact(LANES));
    let mut rest = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in cd.remainder().iter().zip(cv.remainder()) {
        rest.0 += (x - y) * (x - y);
        rest.1 += x * x;
        rest.2 += y * y;
    }
    for (x, y) in cd.zip(cv) {
        for k in 0..LANES {
            acc[0][k] += (x[k] - y[k]) * (x[k] - y[k]);
            acc[1][k] += x[k] * x[k];
            acc[2][k] += y[k] * y[k];
        }
    }
    let fold = |r: T, a: &[T; LANES]| a.iter().fold(r, |s, &v| s + v);
    (fold(rest.0, &acc[0]), fold(rest.1, &acc[1]), fold(rest.2, &acc[2]))
}

fn check_state<T: Real, G: Geometry<T>>(geom: &G, s: &SolverState<T, G::P>) -> Result<()> {
    if s.u.buf().len() != geom.data().buf().len() {
        return Err(Error::shape(
            format!("{} primal entries", geom.data().buf().len()),
            format!("{}", s.u.buf().len()),
        ));
    }
    let m = geom.ops().len();
    if s.v.len() != m || s.z.len() != m {
        return Err(Error::shape(format!("{m} modes"), format!("{}/{}", s.v.len(), s.z.len())));
    }
    for (j, op) in geom.ops().iter().enumerate() {
        let want = (geom.layout(j).slice_len(), op.n_edges());
        if s.v[j].shape() != want || s.z[j].shape() != want {
            return Err(Error::shape(format!("{want:?}"), format!("{:?}", s.v[j].shape())));
        }
    }
    Ok(())
}

pub(crate) fn initial_state<T: Real, G: Geometry<T>>(geom: &G, rho: T) -> SolverState<T, G::P> {
    let u = geom.data().clone();
    let mut v = geom.zero_fields();
    geom.diff_all(&u, &mut v);
    SolverState {
        u,
        v,
        z: geom.zero_fields(),
        iter: 0,
        converged: false,
        rho,
        accel: None,
    }
}

pub(crate) fn run<T: Real, G: Geometry<T>>(
    geom: &G,
    alg: Algorithm,
    params: &SolverParams<T>,
    fact: Option<&CachedFactorization<T>>,
    init: Option<SolverState<T, G::P>>,
) -> Result<(SolverState<T, G::P>, ConvergenceTrace)> {
    params.validate()?;
    let clock = Instant::now();
    let ops = geom.ops();
    let x = geom.data();
    let lambda = geom.lambda();
    let bound = operator_norm_bound(ops);
    let one = T::one();

    let rho = match (alg, params.dy_step) {
        (Algorithm::DavisYin, StepPolicy::Auto) => {
            if bound > T::zero() {
                one / (lit::<T>(2.0) * bound)
            } else {
                one
            }
        }
        (Algorithm::DavisYin, StepPolicy::Fixed(r)) => {
            if r * bound >= one {
                log::warn!(
                    "Davis-Yin step {} is at or above the safe bound 1/{}; convergence is not guaranteed",
                    r,
                    bound
                );
            }
            r
        }
        (Algorithm::Cobra, _) => {
            return Err(Error::Parameter("COBRA is not a single-loop splitting; use cobra_solve".into()))
        }
        _ => params.rho,
    };
    let alpha = match params.alpha {
        super::Alpha::Auto => rho * bound,
        super::Alpha::Fixed(a) => a,
    };
    let dual_scale = match params.dual_radius {
        DualRadius::Unscaled => lambda,
        DualRadius::Scaled => lambda / rho,
    };
    let prox_scale = lambda / rho;

    let owned;
    let sys = if alg == Algorithm::Admm {
        let f = match fact {
            Some(f) => f,
            None => {
                owned = factor(ops)?;
                &owned
            }
        };
        Some(f.shifted(rho))
    } else {
        None
    };

    let mut state = match init {
        Some(s) => {
            check_state(geom, &s)?;
            s
        }
        None => initial_state(geom, rho),
    };
    state.iter = 0;
    state.converged = false;
    state.rho = rho;
    let mut accel = if params.accelerate {
        Some(Momentum {
            v_hat: state.v.clone(),
            z_hat: state.z.clone(),
            t: one,
            c_prev: None,
            restarts: 0,
        })
    } else {
        None
    };

    let m = ops.len();
    let len = x.buf().len();
    let x_norm = {
        let n = norm(x.buf());
        if n > T::zero() {
            n
        } else {
            one
        }
    };
    let adjoint = |fields: &[DMatrix<T>]| {
        let mut out = vec![T::zero(); len];
        geom.adjoint_add(fields, one, &mut out);
        out
    };

    // Primal-sized images Σ_j D_jᵀV_j and Σ_j D_jᵀZ_j, kept in step with V
    // and Z so that each iteration needs a single pass over the edge fields
    // for the adjoint. The Z image follows Z⁺ = Z + ρ(DU − V⁺).
    let mut av = adjoint(&state.v);
    let mut az = adjoint(&state.z);
    let mut av_prev = av.clone();
    let mut az_prev = az.clone();
    let mut av_hat = av.clone();
    let mut az_hat = az.clone();
    let mut lu = vec![T::zero(); len];
    geom.laplacian_add(&state.u, one, &mut lu);

    // Mode-major copies of U (column i holds slice i) and accumulators for
    // Dᵀ applied to the new edge values, DᵀDU, and the stationarity probe.
    let layouts: Vec<ModeLayout> = (0..m).map(|j| geom.layout(j)).collect();
    let mode_major = |j: usize| DMatrix::<T>::zeros(layouts[j].slice_len(), layouts[j].extent);
    let record = params.record_stationarity && alg == Algorithm::Admm;
    let mut um: Vec<DMatrix<T>> = (0..m).map(mode_major).collect();
    let mut acc_img: Vec<DMatrix<T>> = (0..m).map(mode_major).collect();
    let mut acc_lap: Vec<DMatrix<T>> = (0..m).map(mode_major).collect();
    let mut acc_st: Vec<DMatrix<T>> = if record { (0..m).map(mode_major).collect() } else { Vec::new() };
    let mut d = vec![T::zero(); layouts.iter().map(|l| l.slice_len()).max().unwrap_or(0)];
    let mut v_next = geom.zero_fields();
    let mut z_next = geom.zero_fields();
    let mut av_next = vec![T::zero(); len];
    let mut az_next = vec![T::zero(); len];
    let mut trace = ConvergenceTrace::default();
    let mut max_station: Option<T> = None;
    let q = geom.q();

    for k in 1..=params.max_iter {
        let accelerated = accel.is_some();
        let (v_in, z_in): (&[DMatrix<T>], &[DMatrix<T>]) = match &accel {
            Some(mo) => (&mo.v_hat, &mo.z_hat),
            None => (&state.v, &state.z),
        };
        let (av_in, az_in): (&[T], &[T]) = if accelerated { (&av_hat, &az_hat) } else { (&av, &az) };

        let u_new = match alg {
            Algorithm::Admm => {
                let mut rhs = x.clone();
                for ((r, &a), &b) in rhs.buf_mut().iter_mut().zip(av_in).zip(az_in) {
                    *r += rho * a - b;
                }
                geom.shifted_solve(sys.as_ref().expect("factored for admm"), &rhs)?
            }
            Algorithm::Gadmm => {
                let mut acc = x.clone();
                let s = one / (one + alpha);
                for ((((a, &u), &v), &z), &l) in
                    acc.buf_mut().iter_mut().zip(state.u.buf()).zip(av_in).zip(az_in).zip(&lu)
                {
                    *a = (*a + alpha * u + rho * (v - l) - z) * s;
                }
                acc
            }
            _ => {
                let mut u = x.clone();
                for (a, &z) in u.buf_mut().iter_mut().zip(az_in) {
                    *a -= z;
                }
                u
            }
        };
        if u_new.buf().iter().any(|a| !a.is_finite()) {
            return Err(Error::Diverged { iter: k });
        }
        state.u = u_new;

        // One sweep per edge: differences of U, V/Z update, residual norms,
        // the penalty, and the adjoint accumulations.
        let (mut primal_sq, mut du_sq, mut v_sq, mut penalty) = (T::zero(), T::zero(), T::zero(), T::zero());
        let (mut cz_sq, mut cv_sq) = (T::zero(), T::zero());
        for j in 0..m {
            let rows = layouts[j].slice_len();
            acc_img[j].fill(T::zero());
            acc_lap[j].fill(T::zero());
            if record {
                acc_st[j].fill(T::zero());
            }
            if rows == 0 || ops[j].n_edges() == 0 {
                continue;
            }
            layouts[j].gather(state.u.buf(), &mut um[j]);
            let weights = ops[j].edge_weights();
            let us = um[j].as_slice();
            let d = &mut d[..rows];
            let cols = z_in[j]
                .as_slice()
                .chunks_exact(rows)
                .zip(v_in[j].as_slice().chunks_exact(rows))
                .zip(v_next[j].as_mut_slice().chunks_exact_mut(rows))
                .zip(z_next[j].as_mut_slice().chunks_exact_mut(rows));
            for (e, (((zc, vc), vn), zn)) in cols.enumerate() {
                let (a, b) = ops[j].edges()[e];
                let (ua, ub) = (&us[a * rows..(a + 1) * rows], &us[b * rows..(b + 1) * rows]);
                for ((t, &x1), &x2) in d.iter_mut().zip(ua).zip(ub) {
                    *t = x1 - x2;
                }
                penalty += weights[e] * q.eval(d);
                if alg == Algorithm::DavisYin {
                    for ((t, &z), &dd) in vn.iter_mut().zip(zc).zip(d.iter()) {
                        *t = z + rho * dd;
                    }
                    zn.copy_from_slice(vn);
                    project_ball(zn, q.dual(), dual_scale * weights[e]);
                    for (t, &z) in vn.iter_mut().zip(zn.iter()) {
                        *t = (*t - z) / rho;
                    }
                } else {
                    for ((t, &z), &dd) in vn.iter_mut().zip(zc).zip(d.iter()) {
                        *t = dd + z / rho;
                    }
                    prox_norm(vn, q, prox_scale * weights[e]);
                    for (((zo, &z), &dd), &v) in zn.iter_mut().zip(zc).zip(d.iter()).zip(vn.iter()) {
                        *zo = z + rho * (dd - v);
                    }
                }
                let (ps, ds, vs) = residual_sums(d, vn);
                primal_sq += ps;
                du_sq += ds;
                v_sq += vs;
                if accelerated {
                    cz_sq += sub_sq(zn, zc);
                    if alg != Algorithm::DavisYin {
                        cv_sq += sub_sq(vn, vc);
                    }
                }
                let img: &[T] = if alg == Algorithm::DavisYin { zn } else { vn };
                add_edge(acc_img[j].as_mut_slice(), rows, a, b, img);
                add_edge(acc_lap[j].as_mut_slice(), rows, a, b, d);
                if record {
                    // Built from the edge fields, independently of the tracked images.
                    for ((t, &v), &z) in d.iter_mut().zip(vc).zip(zc) {
                        *t = rho * (*t - v) + z;
                    }
                    add_edge(acc_st[j].as_mut_slice(), rows, a, b, d);
                }
            }
        }

        lu.iter_mut().for_each(|a| *a = T::zero());
        let img_target = if alg == Algorithm::DavisYin { &mut az_next } else { &mut av_next };
        img_target.iter_mut().for_each(|a| *a = T::zero());
        for j in 0..m {
            layouts[j].scatter_add(&acc_lap[j], one, &mut lu);
            layouts[j].scatter_add(&acc_img[j], one, img_target);
        }
        if record {
            let mut r: Vec<T> = state.u.buf().iter().zip(x.buf()).map(|(&u, &xv)| u - xv).collect();
            for j in 0..m {
                layouts[j].scatter_add(&acc_st[j], one, &mut r);
            }
            let r = norm(&r) / x_norm;
            max_station = Some(max_station.map_or(r, |m: T| m.max(r)));
        }
        if alg == Algorithm::DavisYin {
            // Z is the projected variable here; V⁺ = DU + (Z − Z⁺)/ρ.
            for (((vn, &z), &l), &zn) in av_next.iter_mut().zip(az_in).zip(&lu).zip(&az_next) {
                *vn = l + (z - zn) / rho;
            }
        } else {
            for (((zn, &z), &l), &v) in az_next.iter_mut().zip(az_in).zip(&lu).zip(&av_next) {
                *zn = z + rho * (l - v);
            }
        }
        let primal_rel = primal_sq.sqrt() / du_sq.sqrt().max(v_sq.sqrt()).max(one);
        let dual_rel = rho * sub_sq(&av_next, av_in).sqrt() / norm(&az_next).max(one);

        let objective = sub_sq(x.buf(), state.u.buf()) / lit(2.0) + lambda * penalty;
        if !objective.is_finite() {
            return Err(Error::Diverged { iter: k });
        }
        trace.rows.push(TraceRow {
            iter: k,
            elapsed_s: clock.elapsed().as_secs_f64(),
            objective: wide(objective),
            primal_res: wide(primal_rel),
            dual_res: wide(dual_rel),
        });

        // The *_next buffers now hold the previous iterates.
        std::mem::swap(&mut state.v, &mut v_next);
        std::mem::swap(&mut state.z, &mut z_next);
        std::mem::swap(&mut av_prev, &mut av);
        std::mem::swap(&mut av, &mut av_next);
        std::mem::swap(&mut az_prev, &mut az);
        std::mem::swap(&mut az, &mut az_next);
        state.iter = k;

        if primal_rel <= params.tol && dual_rel <= params.tol {
            state.converged = true;
            break;
        }

        if let Some(mo) = accel.as_mut() {
            let c = cz_sq / rho + rho * cv_sq;
            let accept = mo.c_prev.map_or(true, |cp| c < params.restart_eta * cp);
            if accept {
                let t_next = (one + (one + lit::<T>(4.0) * mo.t * mo.t).sqrt()) / lit(2.0);
                let beta = (mo.t - one) / t_next;
                for j in 0..m {
                    extrapolate(mo.v_hat[j].as_mut_slice(), state.v[j].as_slice(), v_next[j].as_slice(), beta);
                    extrapolate(mo.z_hat[j].as_mut_slice(), state.z[j].as_slice(), z_next[j].as_slice(), beta);
                }
                extrapolate(&mut av_hat, &av, &av_prev, beta);
                extrapolate(&mut az_hat, &az, &az_prev, beta);
                mo.t = t_next;
                mo.c_prev = Some(c);
            } else {
                for j in 0..m {
                    mo.v_hat[j].copy_from(&v_next[j]);
                    mo.z_hat[j].copy_from(&z_next[j]);
                }
                av_hat.copy_from_slice(&av_prev);
                az_hat.copy_from_slice(&az_prev);
                mo.t = one;
                mo.c_prev = mo.c_prev.map(|cp| cp / params.restart_eta);
                mo.restarts += 1;
            }
        }
    }

    trace.inner_iterations = state.iter;
    trace.restarts = accel.as_ref().map_or(0, |a| a.restarts);
    trace.max_stationarity = max_station.map(wide);
    state.accel = accel;
    if !state.converged {
        log::debug!("{alg} stopped after {} iterations without meeting tol", state.iter);
    }
    Ok((state, trace))
}

/// Adds `src` to column `a` and subtracts it from column `b` of a
/// column-major buffer with `rows` rows.
#[inline]
fn add_edge<T: Real>(acc: &mut [T], rows: usize, a: usize, b: usize, src: &[T]) {
    for (o, &v) in acc[a * rows..(a + 1) * rows].iter_mut().zip(src) {
        *o += v;
    }
    for (o, &v) in acc[b * rows..(b + 1) * rows].iter_mut().zip(src) {
        *o -= v;
    }
}

/// `hat = cur + β (cur − prev)`.
fn extrapolate<T: Real>(hat: &mut [T], cur: &[T], prev: &[T], beta: T) {
    for ((h, &c), &p) in hat.iter_mut().zip(cur).zip(prev) {
        *h = c + beta * (c - p);
    }
}

/// Maximum of the relative stationarity gap, the dual-feasibility violation
/// and the relative primal gap.
pub(crate) fn kkt<T: Real, G: Geometry<T>>(geom: &G, state: &SolverState<T, G::P>) -> Result<T> {
    check_state(geom, state)?;
    let x = geom.data();
    let x_norm = {
        let n = norm(x.buf());
        if n > T::zero() {
            n
        } else {
            T::one()
        }
    };
    let mut r: Vec<T> = state.u.buf().iter().zip(x.buf()).map(|(&u, &xv)| u - xv).collect();
    geom.adjoint_add(&state.z, T::one(), &mut r);
    let stationarity = norm(&r) / x_norm;

    let dual = geom.q().dual();
    let mut infeasible = T::zero();
    for (zj, op) in state.z.iter().zip(geom.ops()) {
        for (e, &w) in op.edge_weights().iter().enumerate() {
            let gap = dual.eval(zj.column(e).as_slice()) - geom.lambda() * w;
            infeasible = infeasible.max(gap);
        }
    }

    let mut du = geom.zero_fields();
    geom.diff_all(&state.u, &mut du);
    let primal = fields_dist_sq(&du, &state.v).sqrt() / x_norm;
    Ok(stationarity.max(infeasible).max(primal))
}
