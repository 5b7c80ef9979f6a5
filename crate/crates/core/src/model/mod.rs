//! Problem definition: fusion graphs, difference operators, the objective
//! and cluster read-out.

mod clusters;
mod graph;
mod problem;
mod weights;

pub use clusters::{connected_components, extract_clusters, ClusterAssignment};
pub use graph::{build_difference_operator, DifferenceOperator, ModeLayout, WeightGraph};
pub use problem::{objective_value, ProblemInstance};
pub use weights::{gaussian_knn_weights, gaussian_knn_weights_slices, KernelScale};

use std::fmt;
use std::str::FromStr;

use crate::{Error, Real};

/// Norm applied to each fused difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

impl Norm {
    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Inf,
            Norm::L2 => Norm::L2,
            Norm::Inf => Norm::L1,
        }
    }

    pub fn eval<T: Real>(self, v: &[T]) -> T {
        match self {
            Norm::L1 => lane_sum(v, |x| x.abs()),
            Norm::L2 => lane_sum(v, |x| x * x).sqrt(),
            Norm::Inf => {
                let mut acc = [T::zero(); LANES];
                let chunks = v.chunks_exact(LANES);
                let rest = chunks.remainder().iter().fold(T::zero(), |m, x| m.max(x.abs()));
                for c in chunks {
                    for k in 0..LANES {
                        acc[k] = acc[k].max(c[k].abs());
                    }
                }
                acc.iter().fold(rest, |m, &a| m.max(a))
            }
        }
    }
}

pub(crate) const LANES: usize = 8;

/// `Σ f(x)` with independent partial sums so that the loop vectorizes. The
/// summation order is fixed, so results are reproducible.
#[inline]
pub(crate) fn lane_sum<T: Real>(v: &[T], f: impl Fn(T) -> T) -> T {
    let mut acc = [T::zero(); LANES];
    let chunks = v.chunks_exact(LANES);
    let rest = chunks.remainder().iter().fold(T::zero(), |s, &x| s + f(x));
    for c in chunks {
        for k in 0..LANES {
            acc[k] += f(c[k]);
        }
    }
    acc.iter().fold(rest, |s, &a| s + a)
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::Inf => "inf",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "linf" | "infinity" => Ok(Norm::Inf),
            other => Err(Error::Parameter(format!(
                "unknown norm q = {other:?}; expected 1, 2 or inf"
            ))),
        }
    }
}
