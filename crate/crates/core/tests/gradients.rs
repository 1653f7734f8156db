//! Reverse-mode gradients against central finite differences.

use gradflow::graph::{normalized_adjacency, sbm_generate, Graph, SbmParams};
use gradflow::linalg::DenseMatrix;
use gradflow::model::{
    check_gradients, masked_cross_entropy, Activation, Model, ModelConfig, ModelInput,
};

const ACTIVATIONS: [Activation; 4] = [
    Activation::Identity,
    Activation::Relu,
    Activation::LeakyRelu(0.8),
    Activation::Gelu,
];

fn sbm20(seed: u64) -> Graph {
    sbm_generate(&SbmParams {
        blocks: 2,
        per_block: 10,
        p_in: 0.5,
        p_out: 0.1,
        feat_dim: 5,
        seed,
    })
    .unwrap()
}

fn model_for(g: &Graph, depth: usize, act: Activation, residual: bool, seed: u64) -> Model {
    let mut cfg = ModelConfig::new(depth, g.features().cols(), g.num_classes());
    cfg.hidden_dim = 6;
    cfg.activation = act;
    cfg.residual = residual;
    cfg.seed = seed;
    Model::new(cfg).unwrap()
}

#[test]
fn every_configuration_matches_central_differences() {
    for depth in [2, 4] {
        for act in ACTIVATIONS {
            for residual in [false, true] {
                let g = sbm20(depth as u64);
                let model = model_for(&g, depth, act, residual, 3);
                let input = ModelInput::Dense(g.features().clone());
                let chk = check_gradients(&model, g.norm_adj(), &input, g.labels(), &g.masks().train, 1e-5)
                    .unwrap();
                assert!(
                    chk.max_rel_error <= 1e-4,
                    "L={depth} {act} residual={residual}: {chk:?}"
                );
            }
        }
    }
}

#[test]
fn sparse_input_path_gives_identical_gradients() {
    let g = sbm20(9);
    let feats = DenseMatrix::from_fn(20, 40, |i, j| if (i * 7 + j) % 13 == 0 { 1.0 + j as f64 * 0.1 } else { 0.0 });
    let sparse = ModelInput::from_features(&feats);
    assert!(matches!(sparse, ModelInput::Sparse(_)));
    let dense = ModelInput::Dense(feats.clone());
    let mut cfg = ModelConfig::new(3, 40, g.num_classes());
    cfg.hidden_dim = 5;
    cfg.activation = Activation::Gelu;
    cfg.residual = true;
    let model = Model::new(cfg).unwrap();
    let run = |input: &ModelInput| {
        let mut t = model.forward(g.norm_adj(), input).unwrap();
        let l = masked_cross_entropy(t.logits(), g.labels(), &g.masks().train).unwrap();
        model.backward(&mut t, g.norm_adj(), input, &l.grad).unwrap();
        t
    };
    let (a, b) = (run(&sparse), run(&dense));
    assert_eq!(a.representations(), b.representations());
    assert_eq!(a.input_grads(), b.input_grads());
    assert_eq!(a.grads(), b.grads());
}

#[test]
fn representation_gradient_matches_perturbing_hidden_state() {
    let adj = normalized_adjacency(4, &[(0, 1), (1, 2), (2, 3), (0, 2)]);
    let mut cfg = ModelConfig::new(2, 4, 3);
    cfg.hidden_dim = 4;
    cfg.activation = Activation::Gelu;
    cfg.seed = 2;
    let mut model = Model::new(cfg).unwrap();
    model.input_proj = DenseMatrix::identity(4);
    let x0 = DenseMatrix::from_fn(4, 4, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
    let labels = [0, 1, 2, 1];
    let mask = [true; 4];
    let loss = |x: &DenseMatrix| {
        let t = model.forward(&adj, &ModelInput::Dense(x.clone())).unwrap();
        masked_cross_entropy(t.logits(), &labels, &mask).unwrap().loss
    };
    let mut tape = model.forward(&adj, &ModelInput::Dense(x0.clone())).unwrap();
    let out = masked_cross_entropy(tape.logits(), &labels, &mask).unwrap();
    model.backward(&mut tape, &adj, &ModelInput::Dense(x0.clone()), &out.grad).unwrap();
    let dx0 = tape.input_grads().unwrap()[0].clone();
    let h = 1e-6;
    for r in 0..4 {
        for c in 0..4 {
            let mut up = x0.clone();
            up.set(r, c, x0.get(r, c) + h);
            let mut down = x0.clone();
            down.set(r, c, x0.get(r, c) - h);
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            assert!((fd - dx0.get(r, c)).abs() < 1e-7);
        }
    }
}

#[test]
fn relu_family_at_unit_slope_matches_identity_when_active() {
    // Nonnegative inputs and weights keep every pre-activation positive.
    let g = sbm20(4);
    let feats = g.features().map(f64::abs);
    let input = ModelInput::Dense(feats);
    let base = model_for(&g, 3, Activation::Identity, false, 1);
    let abs = |m: &DenseMatrix| m.map(|v| v.abs() + 1e-3);
    let mk = |act| {
        let mut cfg = base.config().clone();
        cfg.activation = act;
        Model::from_parts(
            cfg,
            abs(&base.input_proj),
            base.layers.iter().map(abs).collect(),
            base.readout.clone(),
        )
        .unwrap()
    };
    let run = |m: &Model| {
        let mut t = m.forward(g.norm_adj(), &input).unwrap();
        let l = masked_cross_entropy(t.logits(), g.labels(), &g.masks().train).unwrap();
        m.backward(&mut t, g.norm_adj(), &input, &l.grad).unwrap();
        t
    };
    let id = run(&mk(Activation::Identity));
    for act in [Activation::Relu, Activation::LeakyRelu(1.0)] {
        let t = run(&mk(act));
        assert!(t.pre_activations().iter().all(|z| z.data().iter().all(|&v| v > 0.0)));
        assert_eq!(t.representations(), id.representations());
        assert_eq!(t.input_grads(), id.input_grads());
    }
}

#[test]
fn identical_seeds_give_bit_identical_tapes() {
    let g = sbm20(6);
    let input = ModelInput::from_features(g.features());
    let run = || {
        let m = model_for(&g, 4, Activation::Gelu, true, 21);
        let mut t = m.forward(g.norm_adj(), &input).unwrap();
        let l = masked_cross_entropy(t.logits(), g.labels(), &g.masks().train).unwrap();
        m.backward(&mut t, g.norm_adj(), &input, &l.grad).unwrap();
        t
    };
    assert_eq!(run(), run());
}
