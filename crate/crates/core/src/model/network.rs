use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Activation, ModelError, Tape};
use crate::linalg::{CsrMatrix, DenseMatrix};

pub const DEFAULT_HIDDEN_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Number of hidden graph-convolution layers `L`.
    pub depth: usize,
    pub hidden_dim: usize,
    pub in_dim: usize,
    pub num_classes: usize,
    pub activation: Activation,
    pub residual: bool,
    /// Frobenius-norm bound applied to every hidden weight during training.
    pub lipschitz_c: Option<f64>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(depth: usize, in_dim: usize, num_classes: usize) -> Self {
        Self {
            depth,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            in_dim,
            num_classes,
            activation: Activation::Relu,
            residual: false,
            lipschitz_c: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.depth < 1 {
            return Err(ModelError::InvalidConfig("depth must be at least 1".into()));
        }
        if self.hidden_dim == 0 || self.in_dim == 0 || self.num_classes == 0 {
            return Err(ModelError::InvalidConfig(
                "hidden_dim, in_dim and num_classes must be positive".into(),
            ));
        }
        if let Activation::LeakyRelu(s) = self.activation {
            if !(s > 0.0 && s <= 1.0) {
                return Err(ModelError::InvalidConfig(format!(
                    "leaky_relu slope {s} outside (0, 1]"
                )));
            }
        }
        if let Some(c) = self.lipschitz_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(ModelError::InvalidConfig(format!(
                    "lipschitz bound {c} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Node features in the form most efficient for `X·W` and `Xᵀ·G`.
/// Sparse and dense paths give identical results for finite inputs because
/// skipped entries are exact zeros.
#[derive(Debug, Clone)]
pub enum ModelInput {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl ModelInput {
    /// Picks the sparse path when at most 10% of the entries are nonzero.
    pub fn from_features(features: &DenseMatrix) -> Self {
        let sparse = CsrMatrix::from_dense(features);
        if sparse.density() <= 0.1 {
            ModelInput::Sparse(sparse)
        } else {
            ModelInput::Dense(features.clone())
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            ModelInput::Dense(d) => d.rows(),
            ModelInput::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            ModelInput::Dense(d) => d.cols(),
            ModelInput::Sparse(s) => s.cols(),
        }
    }

    fn mul(&self, w: &DenseMatrix) -> Result<DenseMatrix, ModelError> {
        Ok(match self {
            ModelInput::Dense(d) => d.matmul(w)?,
            ModelInput::Sparse(s) => s.spmm(w)?,
        })
    }

    fn tr_mul(&self, g: &DenseMatrix) -> Result<DenseMatrix, ModelError> {
        Ok(match self {
            ModelInput::Dense(d) => d.tr_matmul(g)?,
            ModelInput::Sparse(s) => s.tr_spmm(g)?,
        })
    }
}

impl From<DenseMatrix> for ModelInput {
    fn from(d: DenseMatrix) -> Self {
        ModelInput::Dense(d)
    }
}

/// Gradients of the loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub input_proj: DenseMatrix,
    pub layers: Vec<DenseMatrix>,
    pub readout: DenseMatrix,
}

impl ModelGrads {
    pub fn is_finite(&self) -> bool {
        self.input_proj.is_finite()
            && self.readout.is_finite()
            && self.layers.iter().all(DenseMatrix::is_finite)
    }

    pub fn params(&self) -> impl Iterator<Item = &DenseMatrix> {
        std::iter::once(&self.input_proj)
            .chain(self.layers.iter())
            .chain(std::iter::once(&self.readout))
    }
}

/// Linear input projection, `L` graph-convolution layers of equal width and
/// a linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    pub input_proj: DenseMatrix,
    pub layers: Vec<DenseMatrix>,
    pub readout: DenseMatrix,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
}

impl Model {
    /// Glorot-uniform initialization from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.hidden_dim;
        let input_proj = glorot(config.in_dim, h, &mut rng);
        let layers = (0..config.depth).map(|_| glorot(h, h, &mut rng)).collect();
        let readout = glorot(h, config.num_classes, &mut rng);
        Ok(Self {
            config,
            input_proj,
            layers,
            readout,
        })
    }

    pub fn from_parts(
        config: ModelConfig,
        input_proj: DenseMatrix,
        layers: Vec<DenseMatrix>,
        readout: DenseMatrix,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let h = config.hidden_dim;
        let ok = input_proj.shape() == (config.in_dim, h)
            && layers.len() == config.depth
            && layers.iter().all(|w| w.shape() == (h, h))
            && readout.shape() == (h, config.num_classes);
        if !ok {
            return Err(ModelError::InvalidConfig(
                "parameter shapes do not match the configuration".into(),
            ));
        }
        let model = Self {
            config,
            input_proj,
            layers,
            readout,
        };
        if !model.params().all(DenseMatrix::is_finite) {
            return Err(ModelError::InvalidConfig("non-finite weight".into()));
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &DenseMatrix> {
        std::iter::once(&self.input_proj)
            .chain(self.layers.iter())
            .chain(std::iter::once(&self.readout))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut DenseMatrix> {
        std::iter::once(&mut self.input_proj)
            .chain(self.layers.iter_mut())
            .chain(std::iter::once(&mut self.readout))
    }

    /// Runs `X⁰ = input·P`, `X^{ℓ+1} = σ(Â X^ℓ W^ℓ) [+ X^ℓ]`, `logits = X^L·R`
    /// and records every intermediate.
    pub fn forward(&self, adj: &CsrMatrix, input: &ModelInput) -> Result<Tape, ModelError> {
        let n = adj.rows();
        if input.rows() != n || input.cols() != self.config.in_dim {
            return Err(ModelError::InvalidInput(format!(
                "features are {}x{}, expected {n}x{}",
                input.rows(),
                input.cols(),
                self.config.in_dim
            )));
        }
        let act = self.config.activation;
        let mut representations = Vec::with_capacity(self.depth() + 1);
        let mut pre_activations = Vec::with_capacity(self.depth());
        let x0 = input.mul(&self.input_proj)?;
        if !x0.is_finite() {
            return Err(ModelError::ForwardDivergence { layer: 0 });
        }
        representations.push(x0);
        for (l, w) in self.layers.iter().enumerate() {
            let x = &representations[l];
            let z = adj.spmm(x)?.matmul(w)?;
            let mut next = z.map(|v| act.apply(v));
            if self.config.residual {
                next.add_assign(x)?;
            }
            if !next.is_finite() {
                return Err(ModelError::ForwardDivergence { layer: l + 1 });
            }
            pre_activations.push(z);
            representations.push(next);
        }
        let logits = representations[self.depth()].matmul(&self.readout)?;
        if !logits.is_finite() {
            return Err(ModelError::ForwardDivergence {
                layer: self.depth() + 1,
            });
        }
        Ok(Tape::new(representations, pre_activations, logits))
    }

    /// Reverse pass from `dlogits = ∂L/∂logits`. Fills `tape` with
    /// `∂L/∂X^ℓ` for every layer and the parameter gradients. Non-finite
    /// values propagate unchanged.
    pub fn backward(
        &self,
        tape: &mut Tape,
        adj: &CsrMatrix,
        input: &ModelInput,
        dlogits: &DenseMatrix,
    ) -> Result<(), ModelError> {
        if dlogits.shape() != tape.logits.shape() {
            return Err(ModelError::InvalidInput(format!(
                "loss gradient is {:?}, logits are {:?}",
                dlogits.shape(),
                tape.logits.shape()
            )));
        }
        let depth = self.depth();
        let act = self.config.activation;
        let x_last = &tape.representations[depth];
        let d_readout = x_last.tr_matmul(dlogits)?;
        let mut input_grads = vec![DenseMatrix::zeros(0, 0); depth + 1];
        input_grads[depth] = dlogits.matmul_tr(&self.readout)?;
        let mut d_layers = vec![DenseMatrix::zeros(0, 0); depth];
        for l in (0..depth).rev() {
            let upstream = &input_grads[l + 1];
            let g_pre = if act.is_identity() {
                upstream.clone()
            } else {
                let deriv = tape.pre_activations[l].map(|z| act.derivative(z));
                upstream.hadamard(&deriv)?
            };
            let ax = adj.spmm(&tape.representations[l])?;
            d_layers[l] = ax.tr_matmul(&g_pre)?;
            let mut dx = adj.tr_spmm(&g_pre.matmul_tr(&self.layers[l])?)?;
            if self.config.residual {
                dx.add_assign(upstream)?;
            }
            input_grads[l] = dx;
        }
        let d_input_proj = input.tr_mul(&input_grads[0])?;
        tape.set_backward(
            input_grads,
            super::ModelGrads {
                input_proj: d_input_proj,
                layers: d_layers,
                readout: d_readout,
            },
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalized_adjacency;

    fn cfg(depth: usize, act: Activation, residual: bool) -> ModelConfig {
        ModelConfig {
            depth,
            hidden_dim: 3,
            in_dim: 3,
            num_classes: 2,
            activation: act,
            residual,
            lipschitz_c: None,
            seed: 5,
        }
    }

    #[test]
    fn identity_chain_on_edgeless_graph_is_passthrough() {
        let c = cfg(4, Activation::Identity, false);
        let model = Model::from_parts(
            c.clone(),
            DenseMatrix::identity(3),
            vec![DenseMatrix::identity(3); 4],
            DenseMatrix::zeros(3, 2),
        )
        .unwrap();
        let x = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0], [4.0, 4.0, 4.0]]);
        let adj = normalized_adjacency(3, &[]);
        let tape = model.forward(&adj, &ModelInput::Dense(x.clone())).unwrap();
        assert_eq!(tape.representations()[4], tape.representations()[0]);
        assert_eq!(tape.representations()[0], x);
    }

    #[test]
    fn residual_with_zero_weights_is_identity_map() {
        for act in [Activation::Relu, Activation::Gelu, Activation::LeakyRelu(0.8)] {
            let c = cfg(3, act, true);
            let mut model = Model::new(c).unwrap();
            model.layers.iter_mut().for_each(|w| *w = DenseMatrix::zeros(3, 3));
            let x = DenseMatrix::from_rows(&[[1.0, -2.0, 3.0], [0.0, 0.5, 2.0], [1.0, 1.0, -4.0]]);
            let adj = normalized_adjacency(3, &[(0, 1), (1, 2)]);
            let tape = model.forward(&adj, &ModelInput::Dense(x)).unwrap();
            assert_eq!(tape.representations()[3], tape.representations()[0]);
        }
    }

    #[test]
    fn two_layer_relu_matches_hand_propagation() {
        // Path 0-1-2: degrees with self-loops 2, 3, 2.
        let adj = normalized_adjacency(3, &[(0, 1), (1, 2)]);
        let s6 = 1.0 / 6f64.sqrt();
        let a_hat = DenseMatrix::from_rows(&[[0.5, s6, 0.0], [s6, 1.0 / 3.0, s6], [0.0, s6, 0.5]]);
        assert!(adj.to_dense().max_abs_diff(&a_hat) < 1e-15);
        let c = ModelConfig {
            depth: 2,
            hidden_dim: 2,
            in_dim: 2,
            num_classes: 2,
            activation: Activation::Relu,
            residual: false,
            lipschitz_c: None,
            seed: 0,
        };
        let w0 = DenseMatrix::from_rows(&[[1.0, -1.0], [0.5, 2.0]]);
        let w1 = DenseMatrix::from_rows(&[[-1.0, 0.5], [1.0, 1.0]]);
        let model = Model::from_parts(
            c,
            DenseMatrix::identity(2),
            vec![w0.clone(), w1.clone()],
            DenseMatrix::identity(2),
        )
        .unwrap();
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, -1.0]]);
        let tape = model.forward(&adj, &ModelInput::Dense(x.clone())).unwrap();

        // Hand propagation with explicit loops.
        let relu = |v: f64| v.max(0.0);
        let layer = |x: &DenseMatrix, w: &DenseMatrix| {
            let mut out = DenseMatrix::zeros(3, 2);
            for i in 0..3 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for k in 0..3 {
                        for m in 0..2 {
                            s += a_hat.get(i, k) * x.get(k, m) * w.get(m, j);
                        }
                    }
                    out.set(i, j, relu(s));
                }
            }
            out
        };
        let x1 = layer(&x, &w0);
        let x2 = layer(&x1, &w1);
        assert!(tape.representations()[1].max_abs_diff(&x1) < 1e-12);
        assert!(tape.representations()[2].max_abs_diff(&x2) < 1e-12);
        assert!(tape.logits().max_abs_diff(&x2) < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg(0, Activation::Relu, false);
        assert!(Model::new(c.clone()).is_err());
        c.depth = 2;
        c.activation = Activation::LeakyRelu(1.5);
        assert!(Model::new(c.clone()).is_err());
        c.activation = Activation::Relu;
        c.lipschitz_c = Some(0.0);
        assert!(Model::new(c).is_err());
    }

    #[test]
    fn forward_divergence_names_layer() {
        let c = cfg(3, Activation::Identity, false);
        let mut model = Model::new(c).unwrap();
        model.layers[1] = DenseMatrix::filled(3, 3, 1e300);
        let x = DenseMatrix::filled(3, 3, 1e10);
        let adj = normalized_adjacency(3, &[(0, 1)]);
        match model.forward(&adj, &ModelInput::Dense(x)) {
            Err(ModelError::ForwardDivergence { layer }) => assert_eq!(layer, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = Model::new(cfg(3, Activation::Relu, false)).unwrap();
        let b = Model::new(cfg(3, Activation::Relu, false)).unwrap();
        assert_eq!(a, b);
        let mut c2 = cfg(3, Activation::Relu, false);
        c2.seed = 6;
        assert_ne!(a, Model::new(c2).unwrap());
    }
}
