//! Proximal operators of weighted group norms and the matching dual-ball
//! projections.
//!
//! A "stack of groups" is a matrix whose columns are the groups; column `e`
//! carries the multiplier `edge_weights[e]`.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::model::Norm;
use crate::{Error, Real, Result};

/// `scale · Σ_e w_e ‖v_e‖_q` over a stack of groups.
#[derive(Debug, Clone, Copy)]
pub struct GroupPenalty<'a, T> {
    pub q: Norm,
    pub scale: T,
    pub edge_weights: &'a [T],
}

impl<'a, T: Real> GroupPenalty<'a, T> {
    pub fn new(q: Norm, scale: T, edge_weights: &'a [T]) -> Result<Self> {
        if !(scale >= T::zero()) || !scale.is_finite() {
            return Err(Error::Parameter(format!("penalty scale {scale} must be finite and >= 0")));
        }
        if let Some(w) = edge_weights.iter().find(|w| !(**w > T::zero())) {
            return Err(Error::Parameter(format!("edge weight {w} must be > 0")));
        }
        Ok(GroupPenalty { q, scale, edge_weights })
    }

    #[inline]
    pub fn radius(&self, e: usize) -> T {
        self.scale * self.edge_weights[e]
    }

    fn check(&self, v: &DMatrix<T>) -> Result<()> {
        if v.ncols() != self.edge_weights.len() {
            return Err(Error::shape(
                format!("{} groups", self.edge_weights.len()),
                format!("{} groups", v.ncols()),
            ));
        }
        Ok(())
    }
}

pub fn prox_group<T: Real>(v: &DMatrix<T>, pen: &GroupPenalty<'_, T>) -> Result<DMatrix<T>> {
    pen.check(v)?;
    let mut out = v.clone();
    prox_group_in_place(&mut out, pen);
    Ok(out)
}

pub fn prox_group_in_place<T: Real>(v: &mut DMatrix<T>, pen: &GroupPenalty<'_, T>) {
    for e in 0..v.ncols() {
        let t = pen.radius(e);
        prox_norm(v.column_mut(e).as_mut_slice(), pen.q, t);
    }
}

pub fn project_dual_ball<T: Real>(z: &DMatrix<T>, pen: &GroupPenalty<'_, T>) -> Result<DMatrix<T>> {
    pen.check(z)?;
    let mut out = z.clone();
    project_dual_ball_in_place(&mut out, pen);
    Ok(out)
}

pub fn project_dual_ball_in_place<T: Real>(z: &mut DMatrix<T>, pen: &GroupPenalty<'_, T>) {
    for e in 0..z.ncols() {
        let r = pen.radius(e);
        project_ball(z.column_mut(e).as_mut_slice(), pen.q.dual(), r);
    }
}

/// `prox_{t‖·‖_q}` applied in place to a single group.
pub fn prox_norm<T: Real>(v: &mut [T], q: Norm, t: T) {
    if t <= T::zero() {
        return;
    }
    match q {
        Norm::L2 => {
            let norm = Norm::L2.eval(v);
            if norm <= t {
                v.iter_mut().for_each(|x| *x = T::zero());
            } else {
                let s = T::one() - t / norm;
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
        Norm::L1 => {
            for x in v.iter_mut() {
                let a = x.abs() - t;
                *x = if a > T::zero() { a * x.signum() } else { T::zero() };
            }
        }
        Norm::Inf => {
            let mut p = v.to_vec();
            project_l1_ball(&mut p, t);
            for (x, pi) in v.iter_mut().zip(p) {
                *x -= pi;
            }
        }
    }
}

/// Euclidean projection onto the radius-`r` ball of the norm `ball`.
pub fn project_ball<T: Real>(v: &mut [T], ball: Norm, r: T) {
    let r = r.max(T::zero());
    match ball {
        Norm::L2 => {
            let norm = Norm::L2.eval(v);
            if norm > r {
                let s = r / norm;
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
        Norm::Inf => {
            for x in v.iter_mut() {
                if *x > r {
                    *x = r;
                } else if *x < -r {
                    *x = -r;
                }
            }
        }
        Norm::L1 => project_l1_ball(v, r),
    }
}

/// Exact projection onto `{x : ‖x‖₁ ≤ r}` by sorting magnitudes.
pub fn project_l1_ball<T: Real>(v: &mut [T], r: T) {
    if Norm::L1.eval(v) <= r {
        return;
    }
    if r <= T::zero() {
        v.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let mut mags: Vec<T> = v.iter().map(|x| x.abs()).collect();
    // Stable descending sort keeps ties in input order.
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - r) / T::from_usize(k + 1).unwrap();
        if m > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        let a = x.abs() - theta;
        *x = if a > T::zero() { a * x.signum() } else { T::zero() };
    }
}

/// `‖prox_{t‖·‖_q}(v) + proj_{t·B_{q*}}(v) − v‖₂`, zero up to rounding.
pub fn moreau_check<T: Real>(v: &[T], q: Norm, t: T) -> T {
    let mut prox = v.to_vec();
    prox_norm(&mut prox, q, t);
    let mut proj = v.to_vec();
    project_ball(&mut proj, q.dual(), t);
    prox.iter()
        .zip(&proj)
        .zip(v)
        .fold(T::zero(), |acc, ((a, b), c)| {
            let d = *a + *b - *c;
            acc + d * d
        })
        .sqrt()
}
