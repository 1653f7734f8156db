//! Closed-form gradients against backprop, and similarity bounds against the
//! measured gradients of random linear chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gradflow::graph::{graph_properties, sbm_generate, Graph, SbmParams};
use gradflow::linalg::DenseMatrix;
use gradflow::model::{masked_cross_entropy, Activation, Model, ModelConfig, ModelInput, Tape};
use gradflow::oracles::{
    lgn_input_gradient, lgn_weight_gradient, reslgn_input_gradient, theorem1_bound,
    theorem2_bound, OracleError,
};
use gradflow::similarity::{fit_decay, node_similarity, similarity_profile, ProfileKind};

const WIDTH: usize = 4;

fn graph(rng: &mut ChaCha8Rng) -> Graph {
    loop {
        let g = sbm_generate(&SbmParams {
            per_block: 10,
            p_in: rng.gen_range(0.3..0.7),
            p_out: rng.gen_range(0.05..0.3),
            feat_dim: 1,
            seed: rng.gen(),
            ..SbmParams::default()
        })
        .unwrap();
        let p = graph_properties(&g);
        if p.connected && !p.bipartite {
            return g;
        }
    }
}

fn rand_mat(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0) * scale)
}

struct Chain {
    graph: Graph,
    model: Model,
    input: ModelInput,
    labels: Vec<usize>,
}

impl Chain {
    fn random(rng: &mut ChaCha8Rng, depth: usize, residual: bool, weight_scale: f64) -> Self {
        let graph = graph(rng);
        let n = graph.num_nodes();
        let cfg = ModelConfig {
            depth,
            hidden_dim: WIDTH,
            in_dim: WIDTH,
            num_classes: 3,
            activation: Activation::Identity,
            residual,
            lipschitz_c: None,
            seed: 0,
        };
        let scale = weight_scale / (WIDTH as f64).sqrt();
        let layers = (0..depth).map(|_| rand_mat(WIDTH, WIDTH, scale, rng)).collect();
        let model = Model::from_parts(
            cfg,
            DenseMatrix::identity(WIDTH),
            layers,
            rand_mat(WIDTH, 3, 1.0, rng),
        )
        .unwrap();
        let input = ModelInput::Dense(rand_mat(n, WIDTH, 1.0, rng));
        let labels = (0..n).map(|_| rng.gen_range(0..3)).collect();
        Self { graph, model, input, labels }
    }

    fn tape(&self) -> Tape {
        let adj = self.graph.norm_adj();
        let mut tape = self.model.forward(adj, &self.input).unwrap();
        let mask = vec![true; self.labels.len()];
        let loss = masked_cross_entropy(tape.logits(), &self.labels, &mask).unwrap();
        self.model.backward(&mut tape, adj, &self.input, &loss.grad).unwrap();
        tape
    }
}

fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol * b.max_abs().max(1.0)
}

#[test]
fn plain_chain_gradients_match_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for inst in 0..50 {
        let depth = 1 + inst % 8;
        let s = rng.gen_range(0.3..2.5);
        let chain = Chain::random(&mut rng, depth, false, s);
        let tape = chain.tape();
        let dx = tape.input_grads().unwrap();
        let dw = &tape.grads().unwrap().layers;
        let g = &dx[depth];
        let adj = chain.graph.norm_adj();
        for (l, dx_l) in dx.iter().enumerate() {
            let oracle = lgn_input_gradient(l, &chain.model.layers, adj, g).unwrap();
            assert!(close(dx_l, &oracle, 1e-10), "instance {inst}, layer {l}");
        }
        for l in 0..depth {
            let x = &tape.representations()[l];
            let oracle = lgn_weight_gradient(x, adj, &dx[l + 1]).unwrap();
            assert!(close(&dw[l], &oracle, 1e-10), "instance {inst}, weight {l}");
        }
    }
}

#[test]
fn residual_chain_gradients_match_path_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for inst in 0..50 {
        let depth = 1 + inst % 10;
        let s = rng.gen_range(0.3..2.5);
        let chain = Chain::random(&mut rng, depth, true, s);
        let tape = chain.tape();
        let dx = tape.input_grads().unwrap();
        let adj = chain.graph.norm_adj();
        for l in 0..=depth {
            let sum = reslgn_input_gradient(l, &chain.model.layers, adj, &dx[depth]).unwrap();
            assert_eq!(sum.monomials, 1 << (depth - l));
            assert!(close(&dx[l], &sum.gradient, 1e-8), "instance {inst}, layer {l}");
        }
    }
}

#[test]
fn path_sum_refuses_long_spans() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let chain = Chain::random(&mut rng, 13, true, 1.0);
    let g = chain.tape().input_grads().unwrap()[13].clone();
    let err = reslgn_input_gradient(0, &chain.model.layers, chain.graph.norm_adj(), &g);
    assert!(matches!(err, Err(OracleError::SpanTooLarge { span: 13 })));
}

#[test]
fn eight_layer_gradient_profile_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let chain = Chain::random(&mut rng, 8, false, 1.0);
    let tape = chain.tape();
    let profile = similarity_profile(&tape, ProfileKind::Gradient).unwrap();
    let g = &tape.input_grads().unwrap()[8];
    for (l, &v) in profile.values.iter().enumerate() {
        let oracle = lgn_input_gradient(l, &chain.model.layers, chain.graph.norm_adj(), g).unwrap();
        let expect = node_similarity(&oracle);
        assert!((v - expect).abs() <= 1e-10 * expect.max(1.0), "layer {l}");
    }
}

#[test]
fn zero_weights_give_zero_gradient_similarity_below_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut chain = Chain::random(&mut rng, 5, false, 1.0);
    for w in &mut chain.model.layers {
        *w = DenseMatrix::zeros(WIDTH, WIDTH);
    }
    let profile = similarity_profile(&chain.tape(), ProfileKind::Gradient).unwrap();
    assert!(profile.values[..5].iter().all(|&v| v == 0.0));
}

#[test]
fn both_bounds_hold_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for inst in 0..100 {
        let depth = 1 + inst % 8;
        let s = rng.gen_range(0.3..3.0);
        let plain = Chain::random(&mut rng, depth, false, s);
        let g = plain.tape().input_grads().unwrap()[depth].clone();
        for l in 0..=depth {
            let r = theorem1_bound(l, &plain.model.layers, &plain.graph, &g).unwrap();
            assert!(r.satisfied, "plain instance {inst}, layer {l}: {} > {}", r.lhs, r.rhs);
        }
        let s = rng.gen_range(0.3..3.0);
        let res = Chain::random(&mut rng, depth, true, s);
        let g = res.tape().input_grads().unwrap()[depth].clone();
        for l in 0..=depth {
            let r = theorem2_bound(l, &res.model.layers, &res.graph, &g).unwrap();
            assert!(r.satisfied, "residual instance {inst}, layer {l}: {} > {}", r.lhs, r.rhs);
        }
    }
}

/// Excess of the per-path bound over μ(G) grows at least by
/// `1 + ‖W*‖ · min_p b_{p+1}/b_p` per extra layer and stays under the
/// Lipschitz envelope `‖G‖_F((1 + q̂‖W*‖)^n − 1)`, `q̂ = max_p b_p^{1/p}`.
#[test]
fn per_path_bound_growth_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for inst in 0..20 {
        let depth = 8;
        let s = rng.gen_range(0.3..3.0);
        let chain = Chain::random(&mut rng, depth, true, s);
        let g = chain.tape().input_grads().unwrap()[depth].clone();
        let gf = g.frobenius_norm();
        let reports: Vec<_> = (0..depth)
            .rev()
            .map(|l| theorem2_bound(l, &chain.model.layers, &chain.graph, &g).unwrap())
            .collect();
        // reports[k] has n = k + 1.
        let b = &reports[depth - 1].adj_power_norms;
        let q_hat = b.iter().enumerate().map(|(i, v)| v.powf(1.0 / (i + 1) as f64)).fold(0.0, f64::max);
        for (k, r) in reports.iter().enumerate() {
            let n = (k + 1) as i32;
            let w = r.max_w_spectral;
            let excess = r.rhs - node_similarity(&g);
            let env = gf * ((1.0 + q_hat * w).powi(n) - 1.0);
            assert!(excess <= env * (1.0 + 1e-9) + 1e-12, "instance {inst}, n={n}");
        }
        // Within one chain ‖W*‖ depends on the layer range, so compare
        // successive spans at the common full-chain value.
        let w = reports[depth - 1].max_w_spectral;
        let s = |n: usize| {
            (1..=n).map(|p| binom(n, p) * gf * b[p - 1] * w.powi(p as i32)).sum::<f64>()
        };
        let min_ratio = b.windows(2).map(|x| x[1] / x[0]).fold(f64::INFINITY, f64::min);
        for n in 1..depth {
            assert!(s(n + 1) / s(n) >= (1.0 + w * min_ratio) * (1.0 - 1e-12), "instance {inst}, n={n}");
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn contracting_deep_chain_decays_toward_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let chain = Chain::random(&mut rng, 24, false, 0.8);
    let profile = similarity_profile(&chain.tape(), ProfileKind::Gradient).unwrap();
    let fit = fit_decay(&profile).unwrap();
    assert!(fit.slope < 0.0, "slope {}", fit.slope);
    assert!(profile.values[0] < 1e-3 * profile.values[24]);
}
