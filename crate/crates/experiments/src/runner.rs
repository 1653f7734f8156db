//! Grid expansion, parallel training of cells and per-command aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gradflow::graph::{load_dataset_dir, sbm_generate, Graph};
use gradflow::model::{Activation, ModelConfig};
use gradflow::similarity::{fit_decay, DecayFit, SimilarityProfile};
use gradflow::train::{train, MetricSummary, RecordProfiles, TrainConfig, TrainLog};

use crate::config::{Command, DatasetSource, ExperimentSpec};
use crate::plot::{Plot, Style};
use crate::suites::{bound_suite, oracle_suite, probe_span, SuiteParams};
use crate::{write_file, ExperimentError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    pub validate_dataset: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            validate_dataset: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommandReport {
    pub command: Command,
    pub command_dir: PathBuf,
    /// Bound violations or oracle tolerance failures.
    pub violations: usize,
    pub lines: Vec<String>,
}

pub fn load_graph(spec: &ExperimentSpec, validate: bool) -> Result<Graph, ExperimentError> {
    let graph = match &spec.dataset {
        Some(DatasetSource::Dir(dir)) => load_dataset_dir(dir, validate)?,
        Some(DatasetSource::Sbm(p)) => sbm_generate(p)?,
        None => return Err(ExperimentError::Config(format!("{} requires a dataset", spec.command))),
    };
    graph.check_trainable()?;
    Ok(if spec.normalize_features {
        graph.with_row_normalized_features()
    } else {
        graph
    })
}

/// One training run of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub depth: usize,
    pub residual: bool,
    pub activation: Activation,
    pub c: Option<f64>,
    pub lr: f64,
    pub seed: u64,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{}-s{}", self.group_id(), self.seed)
    }

    /// Identifier shared by all seeds of a configuration.
    pub fn group_id(&self) -> String {
        format!("{}-lr{}", self.config_id(), self.lr)
    }

    /// Identifier shared by all seeds and learning rates.
    pub fn config_id(&self) -> String {
        format!(
            "d{}-{}-{}-c{}",
            self.depth,
            if self.residual { "res" } else { "gcn" },
            self.activation.slug(),
            self.c.map_or("none".into(), |c| c.to_string())
        )
    }

    pub fn train_config(&self, spec: &ExperimentSpec, graph: &Graph) -> TrainConfig {
        let model = ModelConfig {
            depth: self.depth,
            hidden_dim: spec.hidden_dim,
            in_dim: graph.features().cols(),
            num_classes: graph.num_classes(),
            activation: self.activation,
            residual: self.residual,
            lipschitz_c: self.c,
            seed: self.seed,
        };
        TrainConfig {
            model,
            lr: self.lr,
            max_epochs: spec.max_epochs,
            early_stop: spec.early_stop,
            patience: spec.patience,
            record_profiles: RecordProfiles::AtBest,
            seed: self.seed,
        }
    }
}

/// Grid cells in a fixed order: depth, residual, activation, c, lr, seed.
pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let g = &spec.grid;
    let mut out = Vec::with_capacity(g.len() * spec.repeats);
    for &depth in &g.depths {
        for &residual in &g.residual {
            for &activation in &g.activations {
                for &c in &g.cs {
                    for &lr in &g.lrs {
                        for seed in spec.seeds() {
                            out.push(Cell {
                                depth,
                                residual,
                                activation,
                                c,
                                lr,
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Evaluates `f` on every item with up to `jobs` worker threads; results
/// keep input order.
pub fn run_parallel<I: Sync, T: Send>(items: &[I], jobs: usize, f: impl Fn(&I) -> T + Sync) -> Vec<T> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every item evaluated"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub log: TrainLog,
    pub fit: Option<DecayFit>,
}

impl CellResult {
    pub fn profile(&self) -> Option<&SimilarityProfile> {
        self.log.diagnostic_profile()
    }
}

fn profile_plot(title: &str, profiles: &[(String, &SimilarityProfile)]) -> Plot {
    let mut plot = Plot::new(title, "layer", "gradient similarity").log_y(true);
    for (name, p) in profiles {
        let pts = p.values.iter().enumerate().map(|(l, &v)| (l as f64, v)).collect();
        plot.add(name.clone(), pts, Style::Line);
    }
    plot
}

fn write_cell(dir: &Path, cfg: &TrainConfig, r: &CellResult) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut csv = Vec::new();
    r.log.write_csv(&mut csv).expect("in-memory write");
    write_file(&dir.join("log.csv"), &csv)?;
    let mut summary = r.log.summary(cfg);
    if let Some(f) = &r.fit {
        let _ = writeln!(summary, "profile_slope = {:e}", f.slope);
        let _ = writeln!(summary, "profile_r_squared = {}", f.r_squared);
    }
    if let Some(p) = r.profile() {
        let _ = writeln!(
            summary,
            "profile_nan_layers = {}",
            p.nan_layers.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
        );
    }
    write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    let mut pcsv = Vec::new();
    if let Some(p) = r.profile() {
        p.write_csv(&mut pcsv).expect("in-memory write");
    } else {
        pcsv.extend_from_slice(b"layer,value,is_nan\n");
    }
    write_file(&dir.join("profile.csv"), &pcsv)?;
    let svg = match r.profile() {
        Some(p) => profile_plot(&r.cell.id(), &[(r.cell.id(), p)]).render(),
        None => Plot::new(&r.cell.id(), "layer", "gradient similarity").render(),
    };
    write_file(&dir.join("plot.svg"), svg.as_bytes())?;
    Ok(())
}

/// Trains every cell (in parallel), writing per-cell artifacts.
pub fn train_cells(
    spec: &ExperimentSpec,
    graph: &Graph,
    opts: RunOptions,
    command_dir: &Path,
) -> Result<Vec<CellResult>, ExperimentError> {
    let grid = cells(spec);
    let results = run_parallel(&grid, opts.jobs, |cell| -> Result<CellResult, ExperimentError> {
        let cfg = cell.train_config(spec, graph);
        let out = train(graph, &cfg)?;
        let fit = out.log.diagnostic_profile().and_then(|p| fit_decay(p).ok());
        let r = CellResult {
            cell: cell.clone(),
            log: out.log,
            fit,
        };
        write_cell(&command_dir.join(cell.id()), &cfg, &r)?;
        log::info!(
            "{}: best epoch {} val {:.4} test {:.4}{}",
            cell.id(),
            r.log.best_epoch,
            r.log.best_val_acc,
            r.log.test_at_best,
            if r.log.diverged.is_some() { " (diverged)" } else { "" }
        );
        Ok(r)
    });
    results.into_iter().collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:e}"))
}

fn run_grad_profile(spec: &ExperimentSpec, graph: &Graph, opts: RunOptions, dir: &Path) -> Result<CommandReport, ExperimentError> {
    let results = train_cells(spec, graph, opts, dir)?;
    let mut fits = String::from("cell,depth,residual,activation,c,lr,seed,slope,intercept,r_squared,nan_layers,first_mu,last_mu,diverged\n");
    let mut long = String::from("cell,layer,value,is_nan\n");
    let mut lines = Vec::new();
    for r in &results {
        let p = r.profile();
        let (first, last) = p.map_or((None, None), |p| (Some(p.values[0]), Some(p.values[p.depth()])));
        let c = &r.cell;
        let _ = writeln!(
            fits,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.id(),
            c.depth,
            c.residual as u8,
            c.activation,
            c.c.map_or("none".into(), |v| v.to_string()),
            c.lr,
            c.seed,
            fmt_opt(r.fit.as_ref().map(|f| f.slope)),
            fmt_opt(r.fit.as_ref().map(|f| f.intercept)),
            r.fit.as_ref().map_or(String::new(), |f| f.r_squared.to_string()),
            p.map_or(0, |p| p.nan_layers.len()),
            fmt_opt(first),
            fmt_opt(last),
            r.log.diverged.is_some() as u8
        );
        if let Some(p) = p {
            for (l, v) in p.values.iter().enumerate() {
                let _ = writeln!(long, "{},{l},{v:e},{}", c.id(), !v.is_finite() as u8);
            }
        }
        lines.push(format!(
            "{}: slope {} nan_layers {} first/last {}",
            c.id(),
            r.fit.as_ref().map_or("n/a".into(), |f| format!("{:.4}", f.slope)),
            p.map_or(0, |p| p.nan_layers.len()),
            match (first, last) {
                (Some(a), Some(b)) => format!("{:.3e}", a / b),
                _ => "n/a".into(),
            }
        ));
    }
    write_file(&dir.join("fits.csv"), fits.as_bytes())?;
    write_file(&dir.join("profiles.csv"), long.as_bytes())?;
    // One overlay per configuration without the activation, first seed only.
    let mut groups: BTreeMap<String, Vec<(String, &SimilarityProfile)>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.cell.seed == spec.seed_base) {
        if let Some(p) = r.profile() {
            let c = &r.cell;
            let key = format!(
                "d{}-{}-c{}-lr{}",
                c.depth,
                if c.residual { "res" } else { "gcn" },
                c.c.map_or("none".into(), |v| v.to_string()),
                c.lr
            );
            groups.entry(key).or_default().push((c.activation.to_string(), p));
        }
    }
    for (key, profiles) in &groups {
        let svg = profile_plot(key, profiles).render();
        write_file(&dir.join(format!("overlay-{key}.svg")), svg.as_bytes())?;
    }
    Ok(CommandReport {
        command: spec.command,
        command_dir: dir.to_path_buf(),
        violations: 0,
        lines,
    })
}

/// Per configuration: learning rate with the best mean validation accuracy
/// and the test accuracy statistics of its runs.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config_id: String,
    pub depth: usize,
    pub residual: bool,
    pub activation: Activation,
    pub c: Option<f64>,
    pub best_lr: f64,
    pub val: MetricSummary,
    pub test: MetricSummary,
    pub diverged_runs: usize,
}

pub fn summarize_sweep(results: &[CellResult]) -> Vec<SweepRow> {
    let mut by_config: BTreeMap<(usize, String), BTreeMap<String, Vec<&CellResult>>> = BTreeMap::new();
    for r in results {
        by_config
            .entry((r.cell.depth, r.cell.config_id()))
            .or_default()
            .entry(r.cell.group_id())
            .or_default()
            .push(r);
    }
    let mut rows = Vec::new();
    for ((depth, config_id), by_lr) in by_config {
        let mut best: Option<(f64, &Vec<&CellResult>)> = None;
        let mut ordered: Vec<_> = by_lr.values().collect();
        ordered.sort_by(|a, b| a[0].cell.lr.total_cmp(&b[0].cell.lr));
        for runs in ordered {
            let vals: Vec<f64> = runs.iter().map(|r| r.log.best_val_acc).collect();
            let mean = MetricSummary::of(&vals).expect("nonempty").mean;
            if best.is_none_or(|(b, _)| mean > b) {
                best = Some((mean, runs));
            }
        }
        let (_, runs) = best.expect("at least one learning rate");
        let c0 = &runs[0].cell;
        rows.push(SweepRow {
            config_id,
            depth,
            residual: c0.residual,
            activation: c0.activation,
            c: c0.c,
            best_lr: c0.lr,
            val: MetricSummary::of(&runs.iter().map(|r| r.log.best_val_acc).collect::<Vec<_>>()).expect("nonempty"),
            test: MetricSummary::of(&runs.iter().map(|r| r.log.test_at_best).collect::<Vec<_>>()).expect("nonempty"),
            diverged_runs: runs.iter().filter(|r| r.log.diverged.is_some()).count(),
        });
    }
    rows
}

fn run_depth_sweep(spec: &ExperimentSpec, graph: &Graph, opts: RunOptions, dir: &Path) -> Result<CommandReport, ExperimentError> {
    let results = train_cells(spec, graph, opts, dir)?;
    let rows = summarize_sweep(&results);
    let mut csv = String::from("config,depth,residual,activation,c,best_lr,mean_val,mean_test,std_test,min_test,max_test,diverged_runs\n");
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut lines = Vec::new();
    for r in &rows {
        let c = r.c.map_or("none".into(), |v| v.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.config_id, r.depth, r.residual as u8, r.activation, c, r.best_lr, r.val.mean,
            r.test.mean, r.test.std, r.test.min, r.test.max, r.diverged_runs
        );
        let name = format!("{} {} c={c}", if r.residual { "res" } else { "gcn" }, r.activation);
        series.entry(name).or_default().push((r.depth as f64, 100.0 * r.test.mean));
        lines.push(format!(
            "{}: test {:.2} ± {:.2} (lr {})",
            r.config_id,
            100.0 * r.test.mean,
            100.0 * r.test.std,
            r.best_lr
        ));
    }
    write_file(&dir.join("accuracy.csv"), csv.as_bytes())?;
    let mut plot = Plot::new("test accuracy by depth", "layers", "test accuracy (%)").log_x(true);
    for (name, pts) in series {
        plot.add(name, pts, Style::Line);
    }
    write_file(&dir.join("accuracy.svg"), plot.render().as_bytes())?;
    Ok(CommandReport {
        command: spec.command,
        command_dir: dir.to_path_buf(),
        violations: 0,
        lines,
    })
}

pub const CONVERGENCE_THRESHOLD: f64 = 0.99;

fn run_train_curves(spec: &ExperimentSpec, graph: &Graph, opts: RunOptions, dir: &Path) -> Result<CommandReport, ExperimentError> {
    let results = train_cells(spec, graph, opts, dir)?;
    let mut curves = String::from("cell,epoch,train_loss,train_acc,val_acc,test_acc\n");
    let mut conv = String::from("cell,epochs_to_threshold,final_train_acc,diverged\n");
    let mut lines = Vec::new();
    let mut by_depth: BTreeMap<usize, Plot> = BTreeMap::new();
    for r in &results {
        let id = r.cell.id();
        for e in &r.log.epochs {
            let _ = writeln!(curves, "{id},{},{:e},{},{},{}", e.epoch, e.train_loss, e.train_acc, e.val_acc, e.test_acc);
        }
        let reach = r.log.epochs_to_train_acc(CONVERGENCE_THRESHOLD);
        let _ = writeln!(
            conv,
            "{id},{},{},{}",
            reach.map_or(String::new(), |e| e.to_string()),
            r.log.final_train_acc(),
            r.log.diverged.is_some() as u8
        );
        lines.push(format!(
            "{id}: final train acc {:.4}, reaches {CONVERGENCE_THRESHOLD} at {}",
            r.log.final_train_acc(),
            reach.map_or("never".into(), |e| format!("epoch {e}"))
        ));
        if r.cell.seed == spec.seed_base {
            let plot = by_depth.entry(r.cell.depth).or_insert_with(|| {
                Plot::new(&format!("training accuracy, {} layers", r.cell.depth), "epoch", "train accuracy")
            });
            let pts = r.log.epochs.iter().map(|e| (e.epoch as f64, e.train_acc)).collect();
            plot.add(r.cell.group_id(), pts, Style::Line);
        }
    }
    write_file(&dir.join("curves.csv"), curves.as_bytes())?;
    write_file(&dir.join("convergence.csv"), conv.as_bytes())?;
    for (depth, plot) in by_depth {
        write_file(&dir.join(format!("curves-d{depth}.svg")), plot.render().as_bytes())?;
    }
    Ok(CommandReport {
        command: spec.command,
        command_dir: dir.to_path_buf(),
        violations: 0,
        lines,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub cell: String,
    pub residual: bool,
    pub representation_mu: f64,
    pub gradient_mu_first: f64,
    pub test_acc: f64,
}

pub fn scatter_points(results: &[CellResult]) -> Vec<ScatterPoint> {
    results
        .iter()
        .filter_map(|r| {
            let p = r.log.gradient_profile_at_best.as_ref()?;
            Some(ScatterPoint {
                cell: r.cell.id(),
                residual: r.cell.residual,
                representation_mu: r.log.representation_similarity_at_best?,
                gradient_mu_first: p.values[0],
                test_acc: r.log.test_at_best,
            })
        })
        .collect()
}

fn run_scatter(spec: &ExperimentSpec, graph: &Graph, opts: RunOptions, dir: &Path) -> Result<CommandReport, ExperimentError> {
    let results = train_cells(spec, graph, opts, dir)?;
    let pts = scatter_points(&results);
    let mut csv = String::from("cell,residual,representation_mu,gradient_mu_first,test_acc\n");
    for p in &pts {
        let _ = writeln!(
            csv,
            "{},{},{:e},{:e},{}",
            p.cell, p.residual as u8, p.representation_mu, p.gradient_mu_first, p.test_acc
        );
    }
    write_file(&dir.join("scatter.csv"), csv.as_bytes())?;
    let split = |f: fn(&ScatterPoint) -> (f64, f64)| {
        let mut gcn = Vec::new();
        let mut res = Vec::new();
        for p in &pts {
            if p.residual { res.push(f(p)) } else { gcn.push(f(p)) }
        }
        (gcn, res)
    };
    // (file, x label, y label, log x, log y, coordinates)
    type Panel = (&'static str, &'static str, &'static str, bool, bool, fn(&ScatterPoint) -> (f64, f64));
    let specs: [Panel; 3] = [
        ("scatter-rep-vs-grad.svg", "representation similarity", "first-layer gradient similarity", true, true, |p| (p.representation_mu, p.gradient_mu_first)),
        ("scatter-rep-vs-acc.svg", "representation similarity", "test accuracy", true, false, |p| (p.representation_mu, p.test_acc)),
        ("scatter-grad-vs-acc.svg", "first-layer gradient similarity", "test accuracy", true, false, |p| (p.gradient_mu_first, p.test_acc)),
    ];
    for (file, xl, yl, lx, ly, f) in specs {
        let (gcn, res) = split(f);
        let mut plot = Plot::new(&format!("{yl} vs {xl}"), xl, yl).log_x(lx).log_y(ly);
        plot.add("gcn", gcn, Style::Markers);
        plot.add("residual", res, Style::Markers);
        write_file(&dir.join(file), plot.render().as_bytes())?;
    }
    let lines = vec![format!("{} models trained, {} with profiles", results.len(), pts.len())];
    Ok(CommandReport {
        command: spec.command,
        command_dir: dir.to_path_buf(),
        violations: 0,
        lines,
    })
}

pub fn suite_params(spec: &ExperimentSpec) -> SuiteParams {
    SuiteParams {
        instances: spec.instances,
        nodes: spec.suite_nodes,
        width: spec.suite_width,
        max_depth: spec.suite_max_depth,
        max_span: spec.suite_max_span,
        seed: spec.seed_base,
    }
}

fn run_oracle_test(spec: &ExperimentSpec, dir: &Path) -> Result<CommandReport, ExperimentError> {
    let res = oracle_suite(&suite_params(spec))?;
    let mut csv = Vec::new();
    res.write_csv(&mut csv).expect("in-memory write");
    write_file(&dir.join("oracle.csv"), &csv)?;
    let mut violations = res.failures;
    let mut lines = vec![
        format!("instances: {}", spec.instances),
        format!("max error, chains without skips: {:e}", res.max_lgn_error),
        format!("max error, residual chains: {:e}", res.max_reslgn_error),
        format!("monomial count mismatches: {}", res.monomial_mismatches),
        format!("tolerance failures: {}", res.failures),
    ];
    if let Some(span) = spec.span_probe {
        match probe_span(span) {
            Ok(m) if span > gradflow::oracles::MAX_RESIDUAL_SPAN => {
                violations += 1;
                lines.push(format!("span {span} evaluated {m} terms despite the cap"));
            }
            Ok(m) => lines.push(format!("span {span}: {m} terms")),
            Err(msg) => lines.push(format!("span {span} refused: {msg}")),
        }
    }
    let mut summary = lines.join("\n");
    summary.push('\n');
    write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok(CommandReport {
        command: spec.command,
        command_dir: dir.to_path_buf(),
        violations,
        lines,
    })
}

fn run_bound_check(spec: &ExperimentSpec, dir: &Path) -> Result<CommandReport, ExperimentError> {
    let res = bound_suite(&suite_params(spec))?;
    let mut csv = Vec::new();
    res.write_csv(&mut csv).expect("in-memory write");
    write_file(&dir.join("bounds.csv"), &csv)?;
    let count = |residual: bool| res.rows.iter().filter(|r| r.residual == residual).count();
    let viol = |residual: bool| res.rows.iter().filter(|r| r.residual == residual && !r.report.satisfied).count();
    let lines = vec![
        format!("instances: {}", spec.instances),
        format!("skip-free layers checked: {}, violations: {}", count(false), viol(false)),
        format!("residual layers checked: {}, violations: {}", count(true), viol(true)),
        format!("envelope-form violations (diagnostic): {}", res.envelope_violations),
    ];
    let mut plot = Plot::new("measured similarity vs bound", "bound", "measured").log_x(true).log_y(true);
    for residual in [false, true] {
        let pts = res
            .rows
            .iter()
            .filter(|r| r.residual == residual)
            .map(|r| (r.report.rhs, r.report.lhs))
            .collect();
        plot.add(if residual { "residual" } else { "no skip" }, pts, Style::Markers);
    }
    write_file(&dir.join("bounds.svg"), plot.render().as_bytes())?;
    let mut summary = lines.join("\n");
    summary.push('\n');
    write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok(CommandReport {
        command: spec.command,
        command_dir: dir.to_path_buf(),
        violations: res.violations,
        lines,
    })
}

/// Runs `spec.command`, writing into `out_dir/<command>/` and a manifest.
pub fn run(spec: &ExperimentSpec, opts: RunOptions) -> Result<CommandReport, ExperimentError> {
    let dir = spec.out_dir.join(spec.command.name());
    fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
    let report = match spec.command {
        Command::OracleTest => run_oracle_test(spec, &dir)?,
        Command::BoundCheck => run_bound_check(spec, &dir)?,
        cmd => {
            let graph = load_graph(spec, opts.validate_dataset)?;
            match cmd {
                Command::GradProfile => run_grad_profile(spec, &graph, opts, &dir)?,
                Command::DepthSweep => run_depth_sweep(spec, &graph, opts, &dir)?,
                Command::TrainCurves => run_train_curves(spec, &graph, opts, &dir)?,
                Command::Scatter => run_scatter(spec, &graph, opts, &dir)?,
                Command::OracleTest | Command::BoundCheck => unreachable!(),
            }
        }
    };
    crate::manifest::write_manifest(spec, &dir)?;
    Ok(report)
}
