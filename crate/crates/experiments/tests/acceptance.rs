//! One status line per acceptance criterion.
//!
//! `cargo test --test acceptance` runs the fast criteria (1 to 6). Criteria 7
//! to 11 train deep models on Cora and run only with
//! `cargo test --release --test acceptance -- --heavy`; their status lines
//! are saved under the cargo target tmp dir and echoed by later fast runs.
//! `-- --only 9` restricts a heavy run to the listed criteria.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gradflow::graph::{load_dataset_dir, sbm_generate, KnownDataset, SbmParams};
use gradflow::linalg::{project_b, DenseMatrix};
use gradflow::model::{check_gradients, Activation, Model, ModelConfig, ModelInput};
use gradflow::similarity::node_similarity;
use gradflow_experiments::runner::{
    load_graph, scatter_points, summarize_sweep, train_cells, CellResult,
};
use gradflow_experiments::suites::{bound_suite, oracle_suite, SuiteParams};
use gradflow_experiments::{Command, ExperimentSpec, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    /// Required input files are not available.
    Blocked,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Blocked => "FAIL (blocked)",
            Status::Skipped => "SKIP",
        })
    }
}

struct Outcome {
    status: Status,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn record_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

// ---------------------------------------------------------------- fast

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for depth in [2, 4] {
        for act in [Activation::Relu, Activation::LeakyRelu(0.8), Activation::Gelu, Activation::Identity] {
            for residual in [false, true] {
                let g = sbm_generate(&SbmParams { feat_dim: 5, seed: 100 + cases, ..SbmParams::default() })
                    .expect("sbm");
                let mut cfg = ModelConfig::new(depth, 5, g.num_classes());
                cfg.hidden_dim = 8;
                cfg.activation = act;
                cfg.residual = residual;
                cfg.seed = cases;
                let model = Model::new(cfg).expect("model");
                let input = ModelInput::Dense(g.features().clone());
                let chk = check_gradients(&model, g.norm_adj(), &input, g.labels(), &g.masks().train, 1e-5)
                    .expect("gradient check");
                worst = worst.max(chk.max_rel_error);
                cases += 1;
            }
        }
    }
    verdict(worst <= 1e-4, format!("{cases} configurations, max relative error {worst:.2e} (limit 1e-4)"))
}

fn suite_params() -> SuiteParams {
    SuiteParams { instances: 50, max_depth: 8, max_span: 10, ..SuiteParams::default() }
}

fn plain_oracle() -> Outcome {
    let r = oracle_suite(&suite_params()).expect("oracle suite");
    let worst = r
        .rows
        .iter()
        .filter(|row| !row.residual)
        .map(|row| row.input_grad_error.max(row.weight_grad_error.unwrap_or(0.0)))
        .fold(0.0f64, f64::max);
    verdict(worst <= 1e-10, format!("50 instances, L <= 8, max scaled error {worst:.2e} (limit 1e-10)"))
}

fn residual_oracle() -> Outcome {
    let r = oracle_suite(&SuiteParams { seed: 1, ..suite_params() }).expect("oracle suite");
    let worst = r.max_reslgn_error;
    let spans = r.rows.iter().filter(|row| row.residual).map(|row| row.depth - row.layer).max().unwrap_or(0);
    verdict(
        worst <= 1e-8 && r.monomial_mismatches == 0,
        format!(
            "50 instances, spans up to {spans}, max scaled error {worst:.2e} (limit 1e-8), {} monomial count mismatches",
            r.monomial_mismatches
        ),
    )
}

fn bounds() -> Outcome {
    let r = bound_suite(&SuiteParams::default()).expect("bound suite");
    let plain = r.rows.iter().filter(|x| !x.residual && !x.report.satisfied).count();
    let res = r.rows.iter().filter(|x| x.residual && !x.report.satisfied).count();
    verdict(
        plain == 0 && res == 0,
        format!("100 instances, {} layer checks, violations: plain {plain}, residual per-path {res}", r.rows.len()),
    )
}

fn similarity_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    for _ in 0..1000 {
        let (r, c) = (rng.gen_range(1..10), rng.gen_range(1..8));
        let mut m = || DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(-10.0..10.0));
        let (x, y) = (m(), m());
        let row = x.row(0).to_vec();
        let constant = DenseMatrix::from_fn(r, c, |_, j| row[j]);
        let k = rng.gen_range(-5.0..5.0);
        let mu = node_similarity(&x);
        let identical = (0..r).all(|i| x.row(i) == row.as_slice());
        let ok = node_similarity(&constant) <= 1e-12
            && (mu <= 1e-12) == identical
            && (mu - project_b(&x).frobenius_norm()).abs() <= 1e-12 * (1.0 + x.frobenius_norm())
            && node_similarity(&x.add(&y).expect("same shape")) <= mu + node_similarity(&y) + 1e-9
            && (node_similarity(&x.scale(k)) - k.abs() * mu).abs() <= 1e-9 * (1.0 + mu * k.abs());
        failures += !ok as usize;
    }
    verdict(failures == 0, format!("1000 random matrices, {failures} failing"))
}

fn dataset_integrity() -> Outcome {
    let mut parts = Vec::new();
    let mut missing = Vec::new();
    let mut wrong = false;
    for ds in KnownDataset::ALL {
        let dir = workspace().join("data").join(ds.name());
        if !dir.exists() {
            missing.push(ds.name());
            continue;
        }
        match load_dataset_dir(&dir, false) {
            Ok(g) => {
                let s = g.stats();
                let ok = (s.num_nodes, s.num_edges, s.num_classes) == ds.expected_counts();
                wrong |= !ok;
                parts.push(format!(
                    "{} {}/{}/{} {}",
                    ds.name(),
                    s.num_nodes,
                    s.num_edges,
                    s.num_classes,
                    if ok { "ok" } else { "MISMATCH" }
                ));
            }
            Err(e) => {
                wrong = true;
                parts.push(format!("{} load error: {e}", ds.name()));
            }
        }
    }
    if !missing.is_empty() {
        parts.push(format!("no data files for {}", missing.join(", ")));
    }
    let status = if wrong {
        Status::Fail
    } else if missing.is_empty() {
        Status::Pass
    } else {
        Status::Blocked
    };
    Outcome { status, detail: parts.join("; ") }
}

// ---------------------------------------------------------------- heavy

fn cora_spec(command: Command, name: &str, body: &str) -> ExperimentSpec {
    let out = record_dir().join(name);
    let text = format!(
        "dataset = {}\nout_dir = {}\n{body}",
        workspace().join("data/cora").display(),
        out.display()
    );
    ExperimentSpec::parse(&text, command, &workspace(), false).expect("valid acceptance config")
}

fn train_grid(spec: &ExperimentSpec) -> Vec<CellResult> {
    let graph = load_graph(spec, true).expect("cora");
    let opts = RunOptions { jobs: 1, validate_dataset: true };
    let dir = spec.out_dir.join(spec.command.name());
    train_cells(spec, &graph, opts, &dir).expect("training grid")
}

fn slope_of(r: &CellResult) -> Option<f64> {
    r.fit.as_ref().map(|f| f.slope)
}

fn oversmoothing() -> Outcome {
    let spec = cora_spec(Command::GradProfile, "c7", "depths = 128\nresidual = false\nactivations = relu\n");
    let results = train_grid(&spec);
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &results {
        let p = r.log.gradient_profile_at_best.as_ref();
        let ratio = p.map(|p| p.values[0] / p.values[p.values.len() - 1]);
        let slope = slope_of(r);
        let good = slope.is_some_and(|s| s < 0.0) && ratio.is_some_and(|q| q <= 1e-8);
        ok &= good;
        parts.push(format!(
            "lr {} slope {} ratio {}",
            r.cell.lr,
            slope.map_or("n/a".into(), |s| format!("{s:.3}")),
            ratio.map_or("n/a".into(), |q| format!("{q:.1e}"))
        ));
    }
    verdict(ok && !results.is_empty(), parts.join("; "))
}

fn expansion() -> Outcome {
    let spec = cora_spec(
        Command::GradProfile,
        "c8",
        "depths = 64\nresidual = true\nc = none\nactivations = relu,leaky_relu(0.8),gelu,identity\n",
    );
    let results = train_grid(&spec);
    let mut smoothing = 0;
    let mut parts = Vec::new();
    for r in &results {
        let nan = r.profile().map_or(0, |p| p.nan_layers.len());
        let slope = slope_of(r);
        let expands = nan > 0 || slope.is_some_and(|s| s > 0.0);
        smoothing += !expands as usize;
        parts.push(format!(
            "{}/lr{}: {}",
            r.cell.activation.slug(),
            r.cell.lr,
            if nan > 0 { format!("{nan} NaN layers") } else { slope.map_or("no fit".into(), |s| format!("slope {s:.3}")) }
        ));
    }
    verdict(
        smoothing == 0 && !results.is_empty(),
        format!("{} runs, {smoothing} without expansion; {}", results.len(), parts.join(", ")),
    )
}

fn lipschitz_rescue() -> Outcome {
    let spec = cora_spec(
        Command::TrainCurves,
        "c9",
        "depths = 64\nresidual = true\nc = 0.25,1\nlr = 0.001\nmax_epochs = 1000\nearly_stop = false\n",
    );
    let results = train_grid(&spec);
    let find = |c: f64| results.iter().find(|r| r.cell.c == Some(c)).expect("grid cell");
    let (tight, loose) = (find(0.25), find(1.0));
    let final_acc = tight.log.final_train_acc();
    let (et, el) = (tight.log.epochs_to_train_acc(0.99), loose.log.epochs_to_train_acc(0.99));
    let faster = match (et, el) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    let show = |e: Option<usize>| e.map_or("never".into(), |e| e.to_string());
    verdict(
        final_acc >= 0.99 && faster,
        format!(
            "c=0.25 final train acc {final_acc:.4}, epochs to 0.99: c=0.25 {} vs c=1 {} (c=1 final {:.4})",
            show(et),
            show(el),
            loose.log.final_train_acc()
        ),
    )
}

fn repeats() -> usize {
    std::env::var("ACCEPTANCE_REPEATS").ok().and_then(|v| v.parse().ok()).unwrap_or(1)
}

fn depth_sweep() -> Outcome {
    let spec = cora_spec(
        Command::DepthSweep,
        "c10",
        &format!("depths = 1,2,4,8,16,32,64,128\nresidual = true\nc = none,0.25\nrepeats = {}\n", repeats()),
    );
    let rows = summarize_sweep(&train_grid(&spec));
    let acc = |c: Option<f64>, d: usize| {
        100.0 * rows.iter().find(|r| r.c == c && r.depth == d).expect("sweep row").test.mean
    };
    let free16 = acc(None, 16);
    let free128 = acc(None, 128);
    let free_peak = spec.grid.depths.iter().map(|&d| acc(None, d)).fold(f64::MIN, f64::max);
    let ctl_peak = spec.grid.depths.iter().map(|&d| acc(Some(0.25), d)).fold(f64::MIN, f64::max);
    let ctl_spread = [32, 64, 128].iter().map(|&d| (ctl_peak - acc(Some(0.25), d)).abs()).fold(0.0, f64::max);
    let ctl128 = acc(Some(0.25), 128);
    let checks = [
        free16 - free128 >= 10.0,
        ctl_spread <= 2.0,
        (free16 - 85.43).abs() <= 2.0,
        (ctl128 - 85.14).abs() <= 2.0,
    ];
    let table: Vec<String> = spec
        .grid
        .depths
        .iter()
        .map(|&d| format!("{d}:{:.1}/{:.1}", acc(None, d), acc(Some(0.25), d)))
        .collect();
    verdict(
        checks.iter().all(|&c| c),
        format!(
            "{} repeat(s); collapse 16->128 {:.1} pts (need >= 10), unconstrained peak {free_peak:.1}, \
             c=0.25 spread over 32..128 {ctl_spread:.1} (need <= 2), depth16 {free16:.1} (85.43 +- 2), \
             c=0.25 depth128 {ctl128:.1} (85.14 +- 2); test acc by depth none/c=0.25 [{}]",
            spec.repeats,
            free16 - free128,
            table.join(" ")
        ),
    )
}

fn scatter() -> Outcome {
    let spec = cora_spec(
        Command::Scatter,
        "c11",
        "depths = 2,8,32,64\nresidual = false,true\nc = none,0.25\nlr = 0.005\n",
    );
    let pts = scatter_points(&train_grid(&spec));
    let best = pts.iter().map(|p| p.test_acc).fold(f64::MIN, f64::max);
    let good: Vec<_> = pts.iter().filter(|p| p.test_acc >= best - 0.03).collect();
    let out_of_band: Vec<_> = good.iter().filter(|p| !(1e-3..=10.0).contains(&p.gradient_mu_first)).collect();
    let high_plain = pts.iter().filter(|p| p.gradient_mu_first > 10.0 && !p.residual).count();
    let band: Vec<String> = good.iter().map(|p| format!("{}:{:.1e}", p.cell, p.gradient_mu_first)).collect();
    verdict(
        out_of_band.is_empty() && high_plain == 0 && !pts.is_empty(),
        format!(
            "{} models, best test {:.3}, {} within 3 pts, {} outside [1e-3, 10], {high_plain} non-residual above 10; near-best [{}]",
            pts.len(),
            best,
            good.len(),
            out_of_band.len(),
            band.join(" ")
        ),
    )
}

// ---------------------------------------------------------------- driver

type Criterion = (u32, &'static str, fn() -> Outcome);

const FAST: [Criterion; 6] = [
    (1, "gradient correctness", gradient_check),
    (2, "plain linear chain closed form", plain_oracle),
    (3, "residual linear chain path sum", residual_oracle),
    (4, "similarity bounds", bounds),
    (5, "similarity measure axioms", similarity_axioms),
    (6, "dataset integrity", dataset_integrity),
];

const HEAVY: [Criterion; 5] = [
    (7, "gradient oversmoothing, 128-layer GCN", oversmoothing),
    (8, "gradient expansion, 64-layer residual GCN", expansion),
    (9, "Lipschitz control convergence", lipschitz_rescue),
    (10, "depth sweep", depth_sweep),
    (11, "scatter study", scatter),
];

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // Cargo passes libtest flags such as --list or a name filter; only the
    // flags below mean anything here.
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let heavy = args.iter().any(|a| a == "--heavy");
    let only: Option<Vec<u32>> = args
        .iter()
        .position(|a| a == "--only")
        .and_then(|i| args.get(i + 1))
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let selected = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));

    let mut failed = 0;
    let mut report = |n: u32, name: &str, o: &Outcome, secs: Option<f64>| {
        let time = secs.map_or(String::new(), |s| format!(" [{s:.1}s]"));
        println!("criterion {n:>2} {name}: {}{time}: {}", o.status, o.detail);
        failed += (o.status == Status::Fail) as usize;
    };

    for (n, name, f) in FAST {
        if !selected(n) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        report(n, name, &o, Some(t.elapsed().as_secs_f64()));
    }

    let records = record_dir();
    for (n, name, f) in HEAVY {
        if !selected(n) {
            continue;
        }
        let file = records.join(format!("criterion-{n}.txt"));
        if heavy {
            let t = Instant::now();
            let o = f();
            let secs = t.elapsed().as_secs_f64();
            report(n, name, &o, Some(secs));
            fs::create_dir_all(&records).expect("record dir");
            fs::write(&file, format!("{} [{secs:.0}s]: {}", o.status, o.detail)).expect("record");
        } else {
            let last = fs::read_to_string(&file)
                .map(|s| format!("last heavy run: {s}"))
                .unwrap_or_else(|_| "no heavy run recorded".into());
            let o = Outcome { status: Status::Skipped, detail: format!("needs --heavy; {last}") };
            report(n, name, &o, None);
        }
    }

    if failed > 0 {
        eprintln!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
