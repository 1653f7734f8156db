use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Graph, GraphError, Masks};
use crate::linalg::DenseMatrix;

/// Planted-partition stochastic block model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmParams {
    pub blocks: usize,
    pub per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            blocks: 2,
            per_block: 10,
            p_in: 0.5,
            p_out: 0.1,
            feat_dim: 8,
            seed: 0,
        }
    }
}

/// Samples an SBM graph. Node `i` belongs to block `i / per_block`, which is
/// also its label. Pairs are visited in lexicographic order so a seed fixes
/// the edge set; features are standard normal and the 60/20/20 split is a
/// seeded permutation.
pub fn sbm_generate(params: &SbmParams) -> Result<Graph, GraphError> {
    let SbmParams {
        blocks,
        per_block,
        p_in,
        p_out,
        feat_dim,
        seed,
    } = *params;
    if blocks == 0 || per_block == 0 {
        return Err(GraphError::InvalidParameter("block counts must be at least 1".into()));
    }
    for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(GraphError::InvalidParameter(format!("{name}={p} outside [0, 1]")));
        }
    }
    let n = blocks * per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if u / per_block == v / per_block { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let features = DenseMatrix::from_fn(n, feat_dim, |_, _| rng.sample(StandardNormal));
    let labels: Vec<usize> = (0..n).map(|i| i / per_block).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (n_train, n_val) = split_sizes(n);
    let mut masks = Masks::empty(n);
    for (rank, &node) in order.iter().enumerate() {
        if rank < n_train {
            masks.train[node] = true;
        } else if rank < n_train + n_val {
            masks.val[node] = true;
        } else {
            masks.test[node] = true;
        }
    }
    Graph::new(n, edges, features, labels, masks)
}

fn split_sizes(n: usize) -> (usize, usize) {
    if n < 3 {
        return (n, 0);
    }
    let train = ((0.6 * n as f64).round() as usize).clamp(1, n - 2);
    let val = ((0.2 * n as f64).round() as usize).clamp(1, n - train - 1);
    (train, val)
}
