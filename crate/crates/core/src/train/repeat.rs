use super::{train, TrainConfig, TrainError, TrainOutcome};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSummary {
    /// Population standard deviation; `None` for an empty sample.
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub test_at_best: MetricSummary,
    pub best_val_acc: MetricSummary,
    pub final_train_acc: MetricSummary,
    pub diverged_runs: usize,
    pub runs: Vec<TrainOutcome>,
}

/// Trains once per seed `seed_base, seed_base + 1, …` and summarizes.
pub fn run_repeats(
    graph: &Graph,
    config: &TrainConfig,
    seed_base: u64,
    repeats: usize,
) -> Result<RepeatSummary, TrainError> {
    if repeats == 0 {
        return Err(TrainError::InvalidConfig("repeats must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..repeats as u64).map(|i| seed_base + i).collect();
    let runs = seeds
        .iter()
        .map(|&seed| {
            let cfg = TrainConfig {
                seed,
                ..config.clone()
            };
            train(graph, &cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pick = |f: fn(&TrainOutcome) -> f64| {
        MetricSummary::of(&runs.iter().map(f).collect::<Vec<_>>()).expect("repeats >= 1")
    };
    Ok(RepeatSummary {
        test_at_best: pick(|r| r.log.test_at_best),
        best_val_acc: pick(|r| r.log.best_val_acc),
        final_train_acc: pick(|r| r.log.final_train_acc()),
        diverged_runs: runs.iter().filter(|r| r.log.diverged.is_some()).count(),
        seeds,
        runs,
    })
}
