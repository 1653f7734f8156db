use crate::linalg::DenseMatrix;
use crate::model::{Model, ModelGrads};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter matrix in
/// `Model::params` order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
    t: u32,
}

impl AdamState {
    pub fn new(model: &Model) -> Self {
        let zeros: Vec<DenseMatrix> = model
            .params()
            .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn first_moments(&self) -> &[DenseMatrix] {
        &self.m
    }

    pub fn second_moments(&self) -> &[DenseMatrix] {
        &self.v
    }
}

/// One bias-corrected Adam update. Returns `false` and leaves model and state
/// untouched when any gradient entry is non-finite.
pub fn adam_step(model: &mut Model, grads: &ModelGrads, state: &mut AdamState, lr: f64) -> bool {
    if !grads.is_finite() {
        log::warn!("non-finite gradient; optimizer step {} skipped", state.t + 1);
        return false;
    }
    assert_eq!(state.m.len(), model.depth() + 2, "optimizer state does not match model");
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for (((p, g), m), v) in model
        .params_mut()
        .zip(grads.params())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        assert_eq!(p.shape(), g.shape(), "gradient shape mismatch");
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
            *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn setup() -> (Model, ModelGrads) {
        let mut cfg = ModelConfig::new(2, 2, 2);
        cfg.hidden_dim = 2;
        let model = Model::new(cfg).unwrap();
        let grads = ModelGrads {
            input_proj: DenseMatrix::from_rows(&[[0.5, -2.0], [0.0, 1e-3]]),
            layers: vec![DenseMatrix::filled(2, 2, 0.1), DenseMatrix::filled(2, 2, -3.0)],
            readout: DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]),
        };
        (model, grads)
    }

    #[test]
    fn first_step_matches_hand_formula() {
        let (mut model, grads) = setup();
        let before = model.clone();
        let mut st = AdamState::new(&model);
        let lr = 0.01;
        assert!(adam_step(&mut model, &grads, &mut st, lr));
        for ((p0, p1), g) in before.params().zip(model.params()).zip(grads.params()) {
            for ((&a, &b), &gi) in p0.data().iter().zip(p1.data()).zip(g.data()) {
                // m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε).
                let expect = a - lr * gi / (gi.abs() + EPSILON);
                assert!((b - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_grads_leave_fresh_model_unchanged_and_decay_moments() {
        let (mut model, grads) = setup();
        let mut st = AdamState::new(&model);
        let zero = ModelGrads {
            input_proj: DenseMatrix::zeros(2, 2),
            layers: vec![DenseMatrix::zeros(2, 2); 2],
            readout: DenseMatrix::zeros(2, 2),
        };
        let before = model.clone();
        adam_step(&mut model, &zero, &mut st, 0.1);
        assert_eq!(model, before);
        adam_step(&mut model, &grads, &mut st, 0.1);
        let m1 = st.first_moments()[0].clone();
        adam_step(&mut model, &zero, &mut st, 0.1);
        assert!(st.first_moments()[0].max_abs_diff(&m1.scale(BETA1)) < 1e-15);
    }

    #[test]
    fn non_finite_gradient_skips_step() {
        let (mut model, mut grads) = setup();
        grads.layers[1].set(0, 0, f64::NAN);
        let mut st = AdamState::new(&model);
        let before = (model.clone(), st.clone());
        assert!(!adam_step(&mut model, &grads, &mut st, 0.1));
        assert_eq!((model, st), before);
    }
}
