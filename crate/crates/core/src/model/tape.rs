use super::ModelGrads;
use crate::linalg::DenseMatrix;

/// Everything recorded during one forward (and optionally backward) pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    pub(super) representations: Vec<DenseMatrix>,
    pub(super) pre_activations: Vec<DenseMatrix>,
    pub(super) logits: DenseMatrix,
    input_grads: Option<Vec<DenseMatrix>>,
    grads: Option<ModelGrads>,
}

impl Tape {
    pub(super) fn new(
        representations: Vec<DenseMatrix>,
        pre_activations: Vec<DenseMatrix>,
        logits: DenseMatrix,
    ) -> Self {
        Self {
            representations,
            pre_activations,
            logits,
            input_grads: None,
            grads: None,
        }
    }

    pub(super) fn set_backward(&mut self, input_grads: Vec<DenseMatrix>, grads: ModelGrads) {
        self.input_grads = Some(input_grads);
        self.grads = Some(grads);
    }

    pub fn depth(&self) -> usize {
        self.pre_activations.len()
    }

    /// `X^0 … X^L`.
    pub fn representations(&self) -> &[DenseMatrix] {
        &self.representations
    }

    /// `Z^ℓ = Â X^ℓ W^ℓ` for `ℓ = 0 … L-1`.
    pub fn pre_activations(&self) -> &[DenseMatrix] {
        &self.pre_activations
    }

    pub fn logits(&self) -> &DenseMatrix {
        &self.logits
    }

    /// `∂L/∂X^0 … ∂L/∂X^L`, present after a backward pass.
    pub fn input_grads(&self) -> Option<&[DenseMatrix]> {
        self.input_grads.as_deref()
    }

    pub fn grads(&self) -> Option<&ModelGrads> {
        self.grads.as_ref()
    }

    pub fn take_grads(&mut self) -> Option<ModelGrads> {
        self.grads.take()
    }

    pub fn has_backward(&self) -> bool {
        self.input_grads.is_some()
    }
}
