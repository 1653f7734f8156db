//! Randomized linear-chain suites: closed-form gradients against backprop,
//! and similarity bounds against measured gradients.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gradflow::graph::{graph_properties, sbm_generate, Graph, SbmParams};
use gradflow::linalg::DenseMatrix;
use gradflow::model::{masked_cross_entropy, Activation, Model, ModelConfig, ModelInput};
use gradflow::oracles::{
    lgn_input_gradient, lgn_weight_gradient, reslgn_input_gradient, theorem1_bound,
    theorem2_bound, write_bound_csv, BoundReport, OracleError, MAX_RESIDUAL_SPAN,
};

use crate::ExperimentError;

pub const LGN_TOLERANCE: f64 = 1e-10;
pub const RESLGN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteParams {
    pub instances: usize,
    pub nodes: usize,
    pub width: usize,
    /// Depth range for chains without skips.
    pub max_depth: usize,
    /// Depth range for chains with skips (capped by the enumeration limit).
    pub max_span: usize,
    pub seed: u64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            instances: 100,
            nodes: 20,
            width: 4,
            max_depth: 8,
            max_span: 10,
            seed: 0,
        }
    }
}

/// A connected, non-bipartite random graph with random chain weights and a
/// random output gradient.
#[derive(Debug, Clone)]
pub struct LinearInstance {
    pub graph: Graph,
    pub weights: Vec<DenseMatrix>,
    pub x0: DenseMatrix,
    pub readout: DenseMatrix,
    pub labels: Vec<usize>,
}

fn random_graph(nodes: usize, rng: &mut ChaCha8Rng) -> Graph {
    loop {
        let blocks = 2;
        let p = SbmParams {
            blocks,
            per_block: nodes.div_ceil(blocks),
            p_in: rng.gen_range(0.3..0.7),
            p_out: rng.gen_range(0.05..0.3),
            feat_dim: 1,
            seed: rng.gen(),
        };
        let g = sbm_generate(&p).expect("valid block-model parameters");
        let props = graph_properties(&g);
        if props.connected && !props.bipartite {
            return g;
        }
    }
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0) * scale)
}

/// Weights with spectral scale drawn log-uniformly from about 0.1 to 3 so both
/// contracting and expanding chains are exercised.
pub fn random_instance(rng: &mut ChaCha8Rng, nodes: usize, width: usize, depth: usize) -> LinearInstance {
    let graph = random_graph(nodes, rng);
    let n = graph.num_nodes();
    let scale = (rng.gen_range(0.1f64.ln()..3f64.ln())).exp() / (width as f64).sqrt();
    let weights = (0..depth).map(|_| random_matrix(width, width, scale, rng)).collect();
    let x0 = random_matrix(n, width, 1.0, rng);
    let readout = random_matrix(width, 3, 1.0, rng);
    let labels = (0..n).map(|_| rng.gen_range(0..3)).collect();
    LinearInstance {
        graph,
        weights,
        x0,
        readout,
        labels,
    }
}

impl LinearInstance {
    fn model(&self, residual: bool) -> Model {
        let w = self.x0.cols();
        let cfg = ModelConfig {
            depth: self.weights.len(),
            hidden_dim: w,
            in_dim: w,
            num_classes: self.readout.cols(),
            activation: Activation::Identity,
            residual,
            lipschitz_c: None,
            seed: 0,
        };
        Model::from_parts(cfg, DenseMatrix::identity(w), self.weights.clone(), self.readout.clone())
            .expect("consistent instance shapes")
    }

    /// Backprop of a masked cross-entropy through the identity-activation
    /// chain; returns `∂L/∂X^ℓ`, `∂L/∂W^ℓ` and the representations.
    pub fn backprop(
        &self,
        residual: bool,
    ) -> Result<ChainGrads, ExperimentError> {
        let model = self.model(residual);
        let adj = self.graph.norm_adj();
        let input = ModelInput::Dense(self.x0.clone());
        let mut tape = model.forward(adj, &input)?;
        let mask = vec![true; self.labels.len()];
        let loss = masked_cross_entropy(tape.logits(), &self.labels, &mask)?;
        model.backward(&mut tape, adj, &input, &loss.grad)?;
        let dx = tape.input_grads().expect("backward ran").to_vec();
        let dw = tape.grads().expect("backward ran").layers.clone();
        Ok((dx, dw, tape.representations().to_vec()))
    }
}

fn scaled_error(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(1.0)
}

/// `∂L/∂X^ℓ`, `∂L/∂W^ℓ` and `X^ℓ` for every layer.
pub type ChainGrads = (Vec<DenseMatrix>, Vec<DenseMatrix>, Vec<DenseMatrix>);

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub instance: usize,
    pub residual: bool,
    pub depth: usize,
    pub layer: usize,
    pub input_grad_error: f64,
    /// Chains without skips only.
    pub weight_grad_error: Option<f64>,
    pub monomials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSuiteResult {
    pub rows: Vec<OracleRow>,
    pub max_lgn_error: f64,
    pub max_reslgn_error: f64,
    pub monomial_mismatches: usize,
    pub failures: usize,
}

impl OracleSuiteResult {
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "instance,residual,depth,layer,input_grad_error,weight_grad_error,monomials")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{:e},{},{}",
                r.instance,
                r.residual as u8,
                r.depth,
                r.layer,
                r.input_grad_error,
                r.weight_grad_error.map_or(String::new(), |e| format!("{e:e}")),
                r.monomials.map_or(String::new(), |m| m.to_string())
            )?;
        }
        Ok(())
    }
}

/// For each instance: a skip-free chain of depth `1..=max_depth` and a
/// residual chain of depth `1..=max_span`, every layer compared.
pub fn oracle_suite(p: &SuiteParams) -> Result<OracleSuiteResult, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut rows = Vec::new();
    let (mut max_lgn, mut max_res, mut mono_bad) = (0.0f64, 0.0f64, 0usize);
    let max_span = p.max_span.min(MAX_RESIDUAL_SPAN);
    for i in 0..p.instances {
        let depth = rng.gen_range(1..=p.max_depth);
        let inst = random_instance(&mut rng, p.nodes, p.width, depth);
        let adj = inst.graph.norm_adj();
        let (dx, dw, xs) = inst.backprop(false)?;
        let g_last = &dx[depth];
        for l in 0..=depth {
            let oracle = lgn_input_gradient(l, &inst.weights, adj, g_last)?;
            let e_in = scaled_error(&oracle, &dx[l]);
            let e_w = (l < depth)
                .then(|| lgn_weight_gradient(&xs[l], adj, &dx[l + 1]).map(|o| scaled_error(&o, &dw[l])))
                .transpose()?;
            max_lgn = max_lgn.max(e_in).max(e_w.unwrap_or(0.0));
            rows.push(OracleRow {
                instance: i,
                residual: false,
                depth,
                layer: l,
                input_grad_error: e_in,
                weight_grad_error: e_w,
                monomials: None,
            });
        }

        let depth = rng.gen_range(1..=max_span);
        let inst = random_instance(&mut rng, p.nodes, p.width, depth);
        let adj = inst.graph.norm_adj();
        let (dx, _, _) = inst.backprop(true)?;
        let g_last = &dx[depth];
        for (l, dx_l) in dx.iter().enumerate() {
            let sum = reslgn_input_gradient(l, &inst.weights, adj, g_last)?;
            let e = scaled_error(&sum.gradient, dx_l);
            max_res = max_res.max(e);
            if sum.monomials != 1usize << (depth - l) {
                mono_bad += 1;
            }
            rows.push(OracleRow {
                instance: i,
                residual: true,
                depth,
                layer: l,
                input_grad_error: e,
                weight_grad_error: None,
                monomials: Some(sum.monomials),
            });
        }
    }
    let failures = rows
        .iter()
        .filter(|r| {
            let tol = if r.residual { RESLGN_TOLERANCE } else { LGN_TOLERANCE };
            !(r.input_grad_error <= tol && r.weight_grad_error.is_none_or(|e| e <= tol))
        })
        .count()
        + mono_bad;
    Ok(OracleSuiteResult {
        rows,
        max_lgn_error: max_lgn,
        max_reslgn_error: max_res,
        monomial_mismatches: mono_bad,
        failures,
    })
}

/// Outcome of asking for a residual enumeration deeper than the cap.
pub fn probe_span(span: usize) -> Result<usize, String> {
    let g = DenseMatrix::zeros(2, 1);
    let adj = gradflow::linalg::CsrMatrix::identity(2);
    let ws = vec![DenseMatrix::identity(1); span];
    match reslgn_input_gradient(0, &ws, &adj, &g) {
        Ok(s) => Ok(s.monomials),
        Err(e @ OracleError::SpanTooLarge { .. }) => Err(e.to_string()),
        Err(e) => Err(format!("unexpected: {e}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub instance: usize,
    pub residual: bool,
    pub depth: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSuiteResult {
    pub rows: Vec<BoundRow>,
    pub violations: usize,
    /// Residual rows whose closed envelope form falls below the measurement.
    pub envelope_violations: usize,
}

impl BoundSuiteResult {
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        for residual in [false, true] {
            let (idx, reports): (Vec<_>, Vec<_>) = self
                .rows
                .iter()
                .filter(|r| r.residual == residual)
                .map(|r| ((r.instance, r.depth), r.report.clone()))
                .unzip();
            let mut buf = Vec::new();
            write_bound_csv(&reports, &mut buf)?;
            let text = String::from_utf8(buf).expect("ascii csv");
            for (i, line) in text.lines().enumerate() {
                if i == 0 {
                    writeln!(w, "instance,residual,depth,{line}")?;
                } else {
                    let (inst, depth) = idx[i - 1];
                    writeln!(w, "{inst},{},{depth},{line}", residual as u8)?;
                }
            }
        }
        Ok(())
    }
}

/// Every layer of a random skip-free chain and a random residual chain per
/// instance, checked against both bounds.
pub fn bound_suite(p: &SuiteParams) -> Result<BoundSuiteResult, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x5eed_b0d5);
    let mut rows = Vec::new();
    for i in 0..p.instances {
        let depth = rng.gen_range(1..=p.max_depth);
        let inst = random_instance(&mut rng, p.nodes, p.width, depth);
        let g_last = random_matrix(inst.graph.num_nodes(), p.width, 1.0, &mut rng);
        for l in 0..=depth {
            let report = theorem1_bound(l, &inst.weights, &inst.graph, &g_last)?;
            rows.push(BoundRow { instance: i, residual: false, depth, report });
        }
        let depth = rng.gen_range(1..=p.max_span.min(MAX_RESIDUAL_SPAN));
        let inst = random_instance(&mut rng, p.nodes, p.width, depth);
        let g_last = random_matrix(inst.graph.num_nodes(), p.width, 1.0, &mut rng);
        for l in 0..=depth {
            let report = theorem2_bound(l, &inst.weights, &inst.graph, &g_last)?;
            rows.push(BoundRow { instance: i, residual: true, depth, report });
        }
    }
    let violations = rows.iter().filter(|r| !r.report.satisfied).count();
    let envelope_violations = rows
        .iter()
        .filter_map(|r| r.report.envelope.map(|e| (r.report.lhs, e.value)))
        .filter(|(lhs, v)| *lhs > v * (1.0 + 1e-9))
        .count();
    Ok(BoundSuiteResult {
        rows,
        violations,
        envelope_violations,
    })
}
