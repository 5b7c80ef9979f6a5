//! Synthetic checkerboard data with known block structure.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::DenseTensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkerboard {
    pub dims: Vec<usize>,
    pub blocks: Vec<usize>,
    pub noise_sd: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub data: DenseTensor<f64>,
    /// Ground-truth block index of every position along every mode.
    pub labels: Vec<Vec<usize>>,
}

impl SynthData {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        self.data.to_matrix()
    }
}

/// Splits `n` positions into `b` contiguous blocks; the first `n mod b`
/// blocks get one extra position.
pub fn block_labels(n: usize, b: usize) -> Vec<usize> {
    let (base, extra) = (n / b, n % b);
    let mut out = Vec::with_capacity(n);
    for k in 0..b {
        let size = base + usize::from(k < extra);
        out.extend(std::iter::repeat_n(k, size));
    }
    out
}

/// Block means `2·(−1)^{Σ block indices}` plus `N(0, sd²)` noise drawn in
/// layout order from a ChaCha8 stream seeded with `seed`.
pub fn checkerboard(spec: &Checkerboard) -> Result<SynthData> {
    if spec.dims.is_empty() || spec.dims.len() != spec.blocks.len() {
        return Err(Error::Parameter(format!(
            "need one block count per mode, got dims {:?} and blocks {:?}",
            spec.dims, spec.blocks
        )));
    }
    for (&n, &b) in spec.dims.iter().zip(&spec.blocks) {
        if b == 0 || b > n {
            return Err(Error::Parameter(format!("cannot split {n} positions into {b} blocks")));
        }
    }
    if !(spec.noise_sd >= 0.0) || !spec.noise_sd.is_finite() {
        return Err(Error::Parameter(format!("noise sd {} must be finite and >= 0", spec.noise_sd)));
    }
    let labels: Vec<Vec<usize>> = spec
        .dims
        .iter()
        .zip(&spec.blocks)
        .map(|(&n, &b)| block_labels(n, b))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).expect("validated sd");
    let data = DenseTensor::from_fn(&spec.dims, |idx| {
        let parity: usize = idx.iter().zip(&labels).map(|(&i, l)| l[i]).sum();
        let mean = if parity % 2 == 0 { 2.0 } else { -2.0 };
        if spec.noise_sd > 0.0 {
            mean + noise.sample(&mut rng)
        } else {
            mean
        }
    });
    Ok(SynthData { data, labels })
}

pub fn checkerboard_matrix(
    n: usize,
    p: usize,
    row_blocks: usize,
    col_blocks: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<Vec<usize>>)> {
    let s = checkerboard(&Checkerboard {
        dims: vec![n, p],
        blocks: vec![row_blocks, col_blocks],
        noise_sd,
        seed,
    })?;
    Ok((s.matrix()?, s.labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_data_is_the_block_means() {
        let (m, labels) = checkerboard_matrix(4, 6, 2, 3, 0.0, 1).unwrap();
        for r in 0..4 {
            for c in 0..6 {
                let expect = if (labels[0][r] + labels[1][c]) % 2 == 0 { 2.0 } else { -2.0 };
                assert_eq!(m[(r, c)], expect);
            }
        }
        assert_eq!(labels[0], vec![0, 0, 1, 1]);
        assert_eq!(labels[1], vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn labels_have_one_value_per_block() {
        let (_, labels) = checkerboard_matrix(20, 15, 2, 2, 1.0, 9).unwrap();
        let distinct = |l: &Vec<usize>| l.iter().collect::<std::collections::BTreeSet<_>>().len();
        assert_eq!(distinct(&labels[0]), 2);
        assert_eq!(distinct(&labels[1]), 2);
    }

    #[test]
    fn remainder_goes_to_leading_blocks() {
        assert_eq!(block_labels(7, 3), vec![0, 0, 0, 1, 1, 2, 2]);
        assert_eq!(block_labels(3, 3), vec![0, 1, 2]);
    }

    #[test]
    fn seed_fixes_the_draw() {
        let a = checkerboard_matrix(10, 8, 2, 2, 0.5, 42).unwrap().0;
        let b = checkerboard_matrix(10, 8, 2, 2, 0.5, 42).unwrap().0;
        let c = checkerboard_matrix(10, 8, 2, 2, 0.5, 43).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(checkerboard_matrix(3, 3, 0, 1, 0.0, 0).is_err());
        assert!(checkerboard_matrix(3, 3, 4, 1, 0.0, 0).is_err());
        assert!(checkerboard_matrix(3, 3, 1, 1, -1.0, 0).is_err());
        let bad = Checkerboard { dims: vec![3, 3, 3], blocks: vec![1, 1], noise_sd: 0.0, seed: 0 };
        assert!(checkerboard(&bad).is_err());
    }
}
