use nalgebra::DMatrix;

use super::{DifferenceOperator, Norm, WeightGraph};
use crate::{Error, Real, Result};

/// A convex bi-clustering problem: data, one fusion graph per mode, and the
/// penalty level and norm.
#[derive(Debug, Clone)]
pub struct ProblemInstance<T> {
    data: DMatrix<T>,
    graphs: [WeightGraph<T>; 2],
    ops: [DifferenceOperator<T>; 2],
    lambda: T,
    q: Norm,
}

impl<T: Real> ProblemInstance<T> {
    pub fn new(
        data: DMatrix<T>,
        row_graph: WeightGraph<T>,
        col_graph: WeightGraph<T>,
        lambda: T,
        q: Norm,
    ) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda = {lambda} must be finite and >= 0")));
        }
        if row_graph.n_vertices() != data.nrows() {
            return Err(Error::shape(
                format!("row graph on {} vertices", data.nrows()),
                format!("{} vertices", row_graph.n_vertices()),
            ));
        }
        if col_graph.n_vertices() != data.ncols() {
            return Err(Error::shape(
                format!("column graph on {} vertices", data.ncols()),
                format!("{} vertices", col_graph.n_vertices()),
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("data contains non-finite entries".into()));
        }
        let ops = [
            DifferenceOperator::new(&row_graph),
            DifferenceOperator::new(&col_graph),
        ];
        Ok(ProblemInstance {
            data,
            graphs: [row_graph, col_graph],
            ops,
            lambda,
            q,
        })
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn mode_graphs(&self) -> &[WeightGraph<T>; 2] {
        &self.graphs
    }

    pub fn operators(&self) -> &[DifferenceOperator<T>; 2] {
        &self.ops
    }

    pub fn row_operator(&self) -> &DifferenceOperator<T> {
        &self.ops[0]
    }

    pub fn col_operator(&self) -> &DifferenceOperator<T> {
        &self.ops[1]
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn q(&self) -> Norm {
        self.q
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        Self::new(self.data.clone(), self.graphs[0].clone(), self.graphs[1].clone(), lambda, self.q)
    }

    pub fn with_data(&self, data: DMatrix<T>) -> Result<Self> {
        Self::new(data, self.graphs[0].clone(), self.graphs[1].clone(), self.lambda, self.q)
    }

    /// The same problem with the fusion graph of `mode` emptied, i.e. plain
    /// convex clustering along the other mode.
    pub fn single_mode(&self, keep_mode: usize) -> Self {
        let mut graphs = self.graphs.clone();
        let other = 1 - keep_mode;
        graphs[other] = WeightGraph::empty(graphs[other].n_vertices());
        let [r, c] = graphs;
        Self::new(self.data.clone(), r, c, self.lambda, self.q).expect("derived from a valid instance")
    }

    /// Mean of all data entries, broadcast to the data shape.
    pub fn grand_mean(&self) -> DMatrix<T> {
        let (n, p) = self.data.shape();
        let mean = self.data.sum() / T::from_usize(n * p).unwrap();
        DMatrix::from_element(n, p, mean)
    }
}

/// `½‖X − U‖²_F + λ Σ_modes Σ_edges w_e ‖slice_i − slice_j‖_q`.
pub fn objective_value<T: Real>(inst: &ProblemInstance<T>, u: &DMatrix<T>) -> Result<T> {
    if u.shape() != inst.data.shape() {
        return Err(Error::shape(
            format!("{:?}", inst.data.shape()),
            format!("{:?}", u.shape()),
        ));
    }
    let loss = (&inst.data - u).norm_squared() / crate::lit(2.0);
    let (n, p) = u.shape();
    let q = inst.q;
    let mut penalty = T::zero();
    let mut buf = vec![T::zero(); n.max(p)];
    for (&(i, j), &w) in inst.ops[0].edges().iter().zip(inst.ops[0].edge_weights()) {
        for c in 0..p {
            buf[c] = u[(i, c)] - u[(j, c)];
        }
        penalty += w * q.eval(&buf[..p]);
    }
    for (&(i, j), &w) in inst.ops[1].edges().iter().zip(inst.ops[1].edge_weights()) {
        for r in 0..n {
            buf[r] = u[(r, i)] - u[(r, j)];
        }
        penalty += w * q.eval(&buf[..n]);
    }
    Ok(loss + inst.lambda * penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};

    fn complete(n: usize) -> WeightGraph<f64> {
        WeightGraph::complete(n, 1.0)
    }

    /// Entrywise reference: loops over every pair and every coordinate.
    fn naive_objective(x: &DMatrix<f64>, u: &DMatrix<f64>, rows: &WeightGraph<f64>, cols: &WeightGraph<f64>, lambda: f64, q: Norm) -> f64 {
        let (n, p) = x.shape();
        let mut loss = 0.0;
        for i in 0..n {
            for j in 0..p {
                loss += 0.5 * (x[(i, j)] - u[(i, j)]).powi(2);
            }
        }
        let norm = |d: &[f64]| match q {
            Norm::L1 => d.iter().map(|v| v.abs()).sum::<f64>(),
            Norm::L2 => d.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Inf => d.iter().map(|v| v.abs()).fold(0.0, f64::max),
        };
        let mut pen = 0.0;
        for &(a, b, w) in rows.edges() {
            let d: Vec<f64> = (0..p).map(|c| u[(a, c)] - u[(b, c)]).collect();
            pen += w * norm(&d);
        }
        for &(a, b, w) in cols.edges() {
            let d: Vec<f64> = (0..n).map(|r| u[(r, a)] - u[(r, b)]).collect();
            pen += w * norm(&d);
        }
        loss + lambda * pen
    }

    #[test]
    fn zero_lambda_is_pure_loss() {
        let x = dmatrix![1.0, 2.0; 3.0, 4.0];
        let inst = ProblemInstance::new(x.clone(), complete(2), complete(2), 0.0, Norm::L2).unwrap();
        let u = dmatrix![0.0, 0.0; 1.0, 1.0];
        assert_eq!(objective_value(&inst, &u).unwrap(), 0.5 * (&x - &u).norm_squared());
    }

    #[test]
    fn loss_vanishes_at_data() {
        let x = dmatrix![1.0, 2.0; 4.0, 6.0];
        let rows = WeightGraph::new(2, [(0, 1, 0.5)]).unwrap();
        let inst = ProblemInstance::new(x.clone(), rows, WeightGraph::empty(2), 3.0, Norm::L2).unwrap();
        assert_eq!(objective_value(&inst, &x).unwrap(), 3.0 * 0.5 * 5.0);
    }

    #[test]
    fn matches_naive_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for q in [Norm::L1, Norm::L2, Norm::Inf] {
            for (n, p) in [(4, 3), (20, 20), (7, 11)] {
                let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
                let u = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
                let rows = WeightGraph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (i, j, ((i * 7 + j) % 5) as f64 * 0.3))).unwrap();
                let cols = WeightGraph::new(p, (0..p - 1).map(|i| (i, i + 1, 1.0 + i as f64))).unwrap();
                let inst = ProblemInstance::new(x.clone(), rows.clone(), cols.clone(), 0.7, q).unwrap();
                let got = objective_value(&inst, &u).unwrap();
                let want = naive_objective(&x, &u, &rows, &cols, 0.7, q);
                assert!((got - want).abs() <= 1e-12 * want.abs(), "{q}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn rejects_mismatches() {
        let x = DMatrix::<f64>::zeros(3, 2);
        assert!(matches!(
            ProblemInstance::new(x.clone(), complete(2), complete(2), 1.0, Norm::L2),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            ProblemInstance::new(x.clone(), complete(3), complete(2), -1.0, Norm::L2),
            Err(Error::Parameter(_))
        ));
        let inst = ProblemInstance::new(x, complete(3), complete(2), 1.0, Norm::L2).unwrap();
        assert!(objective_value(&inst, &DMatrix::zeros(2, 3)).is_err());
    }
}
