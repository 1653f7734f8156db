//! Full-batch node classification with Adam and validation early stopping.

mod adam;
mod repeat;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use repeat::{run_repeats, MetricSummary, RepeatSummary};

use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::lipschitz::{apply_to_model, diagnose, LipschitzReport};
use crate::linalg::{DenseMatrix, LinalgError};
use crate::model::{masked_cross_entropy, Model, ModelConfig, ModelError, ModelInput, Tape};
use crate::similarity::{node_similarity, similarity_profile, ProfileKind, SimilarityProfile};

pub const DEFAULT_PATIENCE: usize = 100;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordProfiles {
    Never,
    AtBest,
    /// At the best epoch and every `k` epochs.
    EveryK(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `model.seed` is ignored in favour of `seed`.
    pub model: ModelConfig,
    pub lr: f64,
    pub max_epochs: usize,
    pub early_stop: bool,
    pub patience: usize,
    pub record_profiles: RecordProfiles,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, lr: f64, max_epochs: usize) -> Self {
        Self {
            model,
            lr,
            max_epochs,
            early_stop: true,
            patience: DEFAULT_PATIENCE,
            record_profiles: RecordProfiles::AtBest,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::InvalidConfig(format!("lr {} must be positive", self.lr)));
        }
        if self.early_stop && self.patience == 0 {
            return Err(TrainError::InvalidConfig("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if let RecordProfiles::EveryK(0) = self.record_profiles {
            return Err(TrainError::InvalidConfig("profile interval must be positive".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed,
            ..self.model.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub epoch: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Metrics of the parameters before each optimizer step.
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_at_best: f64,
    pub train_at_best: f64,
    pub gradient_profile_at_best: Option<SimilarityProfile>,
    pub representation_similarity_at_best: Option<f64>,
    pub periodic_profiles: Vec<(usize, SimilarityProfile)>,
    /// Hidden-layer diagnostics of the best checkpoint and the final model.
    pub lipschitz_reports: Vec<LipschitzReport>,
    pub diverged: Option<Divergence>,
    /// Gradient profile at the epoch training diverged, when computable.
    pub divergence_profile: Option<SimilarityProfile>,
}

impl TrainLog {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }

    pub fn final_train_acc(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.train_acc)
    }

    /// First epoch whose training accuracy reaches `threshold`.
    pub fn epochs_to_train_acc(&self, threshold: f64) -> Option<usize> {
        self.epochs.iter().find(|e| e.train_acc >= threshold).map(|e| e.epoch)
    }

    /// The gradient profile most informative about the run: the best-epoch
    /// one, or the one captured when training broke down.
    pub fn diagnostic_profile(&self) -> Option<&SimilarityProfile> {
        match (&self.gradient_profile_at_best, &self.divergence_profile) {
            (_, Some(p)) if p.has_nan() => Some(p),
            (Some(p), _) => Some(p),
            (None, p) => p.as_ref(),
        }
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "epoch,train_loss,train_acc,val_acc,test_acc")?;
        for e in &self.epochs {
            writeln!(
                w,
                "{},{:e},{},{},{}",
                e.epoch, e.train_loss, e.train_acc, e.val_acc, e.test_acc
            )?;
        }
        Ok(())
    }

    /// Flat `key = value` summary with the configuration echoed.
    pub fn summary(&self, config: &TrainConfig) -> String {
        let mut s = String::new();
        let m = &config.model;
        let _ = writeln!(s, "depth = {}", m.depth);
        let _ = writeln!(s, "hidden_dim = {}", m.hidden_dim);
        let _ = writeln!(s, "activation = {}", m.activation);
        let _ = writeln!(s, "residual = {}", m.residual);
        let _ = writeln!(
            s,
            "lipschitz_c = {}",
            m.lipschitz_c.map_or("none".into(), |c| c.to_string())
        );
        let _ = writeln!(s, "lr = {}", config.lr);
        let _ = writeln!(s, "max_epochs = {}", config.max_epochs);
        let _ = writeln!(s, "early_stop = {}", config.early_stop);
        let _ = writeln!(s, "patience = {}", config.patience);
        let _ = writeln!(s, "seed = {}", config.seed);
        let _ = writeln!(s, "epochs_run = {}", self.epochs_run());
        let _ = writeln!(s, "best_epoch = {}", self.best_epoch);
        let _ = writeln!(s, "best_val_acc = {}", self.best_val_acc);
        let _ = writeln!(s, "test_at_best = {}", self.test_at_best);
        let _ = writeln!(s, "train_at_best = {}", self.train_at_best);
        let _ = writeln!(s, "final_train_acc = {}", self.final_train_acc());
        if let Some(r) = self.representation_similarity_at_best {
            let _ = writeln!(s, "representation_similarity_at_best = {r:e}");
        }
        if let Some(p) = &self.gradient_profile_at_best {
            let _ = writeln!(s, "first_layer_gradient_similarity = {:e}", p.values[0]);
            let _ = writeln!(s, "last_layer_gradient_similarity = {:e}", p.values[p.depth()]);
        }
        match &self.diverged {
            Some(d) => {
                let _ = writeln!(s, "diverged = true");
                let _ = writeln!(s, "divergence_epoch = {}", d.epoch);
                let _ = writeln!(s, "divergence_reason = {}", d.reason);
            }
            None => {
                let _ = writeln!(s, "diverged = false");
            }
        }
        for (i, r) in self.lipschitz_reports.iter().enumerate() {
            let which = if i == 0 { "best" } else { "final" };
            let _ = writeln!(s, "lipschitz_{which} = {}", r.summary());
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub best_model: Model,
    pub final_model: Model,
}

/// Fraction of masked rows whose arg-max logit equals the label; ties go to
/// the lowest class index.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], mask: &[bool]) -> Result<f64, ModelError> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for i in (0..logits.rows()).filter(|&i| mask[i]) {
        total += 1;
        let row = logits.row(i);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = c;
            }
        }
        correct += (best == labels[i]) as usize;
    }
    if total == 0 {
        return Err(ModelError::EmptyMask);
    }
    Ok(correct as f64 / total as f64)
}

pub fn evaluate(model: &Model, graph: &Graph, mask: &[bool]) -> Result<f64, ModelError> {
    let input = ModelInput::from_features(graph.features());
    let tape = model.forward(graph.norm_adj(), &input)?;
    accuracy(tape.logits(), graph.labels(), mask)
}

fn gradient_profile(tape: &Tape) -> SimilarityProfile {
    similarity_profile(tape, ProfileKind::Gradient).expect("backward pass completed")
}

pub fn train(graph: &Graph, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    graph.check_trainable()?;
    let mcfg = config.model_config();
    if mcfg.in_dim != graph.features().cols() || mcfg.num_classes < graph.num_classes() {
        return Err(TrainError::InvalidConfig(format!(
            "model expects {} features and {} classes, graph has {} and {}",
            mcfg.in_dim,
            mcfg.num_classes,
            graph.features().cols(),
            graph.num_classes()
        )));
    }
    let adj = graph.norm_adj();
    let input = ModelInput::from_features(graph.features());
    let labels = graph.labels();
    let masks = graph.masks();
    let mut model = Model::new(mcfg)?;
    if let Some(c) = config.model.lipschitz_c {
        apply_to_model(&mut model, c);
    }
    let mut state = AdamState::new(&model);

    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_acc: f64::NEG_INFINITY,
        test_at_best: 0.0,
        train_at_best: 0.0,
        gradient_profile_at_best: None,
        representation_similarity_at_best: None,
        periodic_profiles: Vec::new(),
        lipschitz_reports: Vec::new(),
        diverged: None,
        divergence_profile: None,
    };
    let mut best_model = model.clone();
    let mut since_best = 0usize;

    for epoch in 0..config.max_epochs {
        let mut tape = match model.forward(adj, &input) {
            Ok(t) => t,
            Err(ModelError::ForwardDivergence { layer }) => {
                log.diverged = Some(Divergence {
                    epoch,
                    reason: format!("non-finite forward value at layer {layer}"),
                });
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let loss = masked_cross_entropy(tape.logits(), labels, &masks.train)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss.loss,
            train_acc: accuracy(tape.logits(), labels, &masks.train)?,
            val_acc: accuracy(tape.logits(), labels, &masks.val)?,
            test_acc: accuracy(tape.logits(), labels, &masks.test)?,
        };
        log.epochs.push(rec);
        if !loss.loss.is_finite() {
            log.diverged = Some(Divergence {
                epoch,
                reason: "non-finite loss".into(),
            });
            break;
        }
        model.backward(&mut tape, adj, &input, &loss.grad)?;

        let improved = rec.val_acc > log.best_val_acc;
        if improved {
            log.best_epoch = epoch;
            log.best_val_acc = rec.val_acc;
            log.test_at_best = rec.test_acc;
            log.train_at_best = rec.train_acc;
            best_model = model.clone();
            since_best = 0;
            if config.record_profiles != RecordProfiles::Never {
                log.gradient_profile_at_best = Some(gradient_profile(&tape));
                log.representation_similarity_at_best =
                    Some(node_similarity(&tape.representations()[model.depth()]));
            }
        } else {
            since_best += 1;
        }
        if let RecordProfiles::EveryK(k) = config.record_profiles {
            if epoch % k == 0 {
                log.periodic_profiles.push((epoch, gradient_profile(&tape)));
            }
        }

        let grads = tape.take_grads().expect("backward pass completed");
        if !grads.is_finite() {
            log.divergence_profile = Some(gradient_profile(&tape));
            log.diverged = Some(Divergence {
                epoch,
                reason: "non-finite gradient".into(),
            });
            break;
        }
        if config.early_stop && since_best >= config.patience {
            break;
        }
        adam_step(&mut model, &grads, &mut state, config.lr);
        if let Some(c) = config.model.lipschitz_c {
            apply_to_model(&mut model, c);
        }
    }
    if log.best_val_acc == f64::NEG_INFINITY {
        log.best_val_acc = 0.0;
    }
    if config.model.lipschitz_c.is_some() {
        log.lipschitz_reports.push(diagnose(&best_model, adj)?);
        log.lipschitz_reports.push(diagnose(&model, adj)?);
    }
    Ok(TrainOutcome {
        log,
        best_model,
        final_model: model,
    })
}
