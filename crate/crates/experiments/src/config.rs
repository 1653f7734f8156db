//! Flat `key = value` experiment configuration.
//!
//! Grammar: one assignment per line, `#` starts a comment, blank lines are
//! ignored, lists are comma separated. Keys are case sensitive and may appear
//! once. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gradflow::graph::SbmParams;
use gradflow::model::Activation;

use crate::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    GradProfile,
    DepthSweep,
    TrainCurves,
    Scatter,
    BoundCheck,
    OracleTest,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::GradProfile,
        Command::DepthSweep,
        Command::TrainCurves,
        Command::Scatter,
        Command::BoundCheck,
        Command::OracleTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::GradProfile => "grad-profile",
            Command::DepthSweep => "depth-sweep",
            Command::TrainCurves => "train-curves",
            Command::Scatter => "scatter",
            Command::BoundCheck => "bound-check",
            Command::OracleTest => "oracle-test",
        }
    }

    /// Randomized linear-chain suites that need no dataset.
    pub fn is_suite(self) -> bool {
        matches!(self, Command::BoundCheck | Command::OracleTest)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Dir(PathBuf),
    Sbm(SbmParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub depths: Vec<usize>,
    /// `None` means no norm control.
    pub cs: Vec<Option<f64>>,
    pub lrs: Vec<f64>,
    pub activations: Vec<Activation>,
    pub residual: Vec<bool>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.depths.len() * self.cs.len() * self.lrs.len() * self.activations.len() * self.residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub dataset: Option<DatasetSource>,
    pub normalize_features: bool,
    pub grid: Grid,
    pub repeats: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    pub hidden_dim: usize,
    pub max_epochs: usize,
    pub early_stop: bool,
    pub patience: usize,
    /// Randomized suite size for bound-check and oracle-test.
    pub instances: usize,
    pub suite_nodes: usize,
    pub suite_width: usize,
    pub suite_max_depth: usize,
    pub suite_max_span: usize,
    /// Extra residual enumeration request that must be refused by the cap.
    pub span_probe: Option<usize>,
}

/// Largest depth accepted without `--heavy`.
pub const LIGHT_MAX_DEPTH: usize = 128;

fn default_depths(heavy: bool) -> Vec<usize> {
    let top = if heavy { 512 } else { LIGHT_MAX_DEPTH };
    std::iter::successors(Some(1usize), |d| Some(d * 2)).take_while(|&d| d <= top).collect()
}

fn parse_list<T>(key: &str, raw: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, ExperimentError> {
    let out = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(s).map_err(|e| ExperimentError::Config(format!("{key}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(ExperimentError::Config(format!("{key}: empty list")));
    }
    Ok(out)
}

fn parse_scalar<T: FromStr>(key: &str, raw: &str) -> Result<T, ExperimentError> {
    raw.trim()
        .parse()
        .map_err(|_| ExperimentError::Config(format!("{key}: cannot parse {raw:?}")))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("not a boolean: {s:?}")),
    }
}

fn parse_c(s: &str) -> Result<Option<f64>, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let c: f64 = s.parse().map_err(|_| format!("bad norm bound {s:?}"))?;
    if c > 0.0 && c.is_finite() {
        Ok(Some(c))
    } else {
        Err(format!("norm bound {c} must be positive"))
    }
}

/// Splits text into an ordered key/value map with line-numbered errors.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ExperimentError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ExperimentError::Config(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ExperimentError::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(ExperimentError::Config(format!("line {}: duplicate key {k:?}", i + 1)));
        }
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "command", "dataset", "normalize_features", "sbm_blocks", "sbm_per_block", "sbm_p_in",
    "sbm_p_out", "sbm_feat_dim", "sbm_seed", "depths", "c", "lr", "activations", "residual",
    "repeats", "seed_base", "out_dir", "hidden_dim", "max_epochs", "early_stop", "patience",
    "instances", "suite_nodes", "suite_width", "suite_max_depth", "suite_max_span", "span_probe",
];

impl ExperimentSpec {
    /// Builds a spec for `command` from config text. Relative paths are
    /// resolved against `base_dir` (the config file's directory).
    pub fn parse(
        text: &str,
        command: Command,
        base_dir: &Path,
        heavy: bool,
    ) -> Result<Self, ExperimentError> {
        let mut map = parse_pairs(text)?;
        if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(ExperimentError::Config(format!("unknown key {k:?}")));
        }
        if let Some(c) = map.remove("command") {
            let c: Command = c.parse().map_err(ExperimentError::Config)?;
            if c != command {
                return Err(ExperimentError::Config(format!(
                    "config is for {c} but {command} was requested"
                )));
            }
        }
        let mut take = |k: &str| map.remove(k);

        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() { p } else { base_dir.join(p) }
        };
        let sbm_keys = [
            take("sbm_blocks"),
            take("sbm_per_block"),
            take("sbm_p_in"),
            take("sbm_p_out"),
            take("sbm_feat_dim"),
            take("sbm_seed"),
        ];
        let dataset = match take("dataset").as_deref() {
            None => None,
            Some("sbm") => {
                let d = SbmParams::default();
                let [b, pb, pi, po, fd, sd] = sbm_keys;
                Some(DatasetSource::Sbm(SbmParams {
                    blocks: b.map_or(Ok(d.blocks), |v| parse_scalar("sbm_blocks", &v))?,
                    per_block: pb.map_or(Ok(d.per_block), |v| parse_scalar("sbm_per_block", &v))?,
                    p_in: pi.map_or(Ok(d.p_in), |v| parse_scalar("sbm_p_in", &v))?,
                    p_out: po.map_or(Ok(d.p_out), |v| parse_scalar("sbm_p_out", &v))?,
                    feat_dim: fd.map_or(Ok(d.feat_dim), |v| parse_scalar("sbm_feat_dim", &v))?,
                    seed: sd.map_or(Ok(d.seed), |v| parse_scalar("sbm_seed", &v))?,
                }))
            }
            Some(path) => {
                if sbm_keys.iter().any(Option::is_some) {
                    return Err(ExperimentError::Config("sbm_* keys require dataset = sbm".into()));
                }
                Some(DatasetSource::Dir(resolve(path)))
            }
        };
        if dataset.is_none() && !command.is_suite() {
            return Err(ExperimentError::Config(format!("{command} requires a dataset")));
        }

        let curves = command == Command::TrainCurves;
        let depths = match take("depths") {
            Some(v) => parse_list("depths", &v, |s| s.parse::<usize>().map_err(|e| e.to_string()))?,
            None => default_depths(heavy),
        };
        if depths.contains(&0) {
            return Err(ExperimentError::Config("depths must be at least 1".into()));
        }
        if !heavy {
            if let Some(d) = depths.iter().find(|&&d| d > LIGHT_MAX_DEPTH) {
                return Err(ExperimentError::Config(format!(
                    "depth {d} exceeds {LIGHT_MAX_DEPTH}; pass --heavy to allow it"
                )));
            }
        }
        let cs = match take("c") {
            Some(v) => parse_list("c", &v, parse_c)?,
            None if curves => vec![None, Some(4.0), Some(1.0), Some(0.25)],
            None => vec![None],
        };
        let lrs = match take("lr") {
            Some(v) => parse_list("lr", &v, |s| match s.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(format!("bad learning rate {s:?}")),
            })?,
            None if curves => vec![0.001],
            None => vec![0.001, 0.005, 0.01],
        };
        let activations = match take("activations") {
            Some(v) => parse_list("activations", &v, |s| s.parse::<Activation>())?,
            None => vec![Activation::Relu],
        };
        let residual = match take("residual") {
            Some(v) => parse_list("residual", &v, parse_bool)?,
            None => vec![false],
        };
        let grid = Grid {
            depths,
            cs,
            lrs,
            activations,
            residual,
        };

        let scalar = |v: Option<String>, key: &str, default| -> Result<usize, ExperimentError> {
            v.map_or(Ok(default), |v| parse_scalar(key, &v))
        };
        let repeats = scalar(take("repeats"), "repeats", 1)?;
        if repeats == 0 {
            return Err(ExperimentError::Config("repeats must be at least 1".into()));
        }
        let seed_base = take("seed_base").map_or(Ok(0), |v| parse_scalar("seed_base", &v))?;
        let out_dir = take("out_dir").map_or_else(|| base_dir.join("results"), |v| resolve(&v));
        let hidden_dim = scalar(take("hidden_dim"), "hidden_dim", 64)?;
        let max_epochs = scalar(take("max_epochs"), "max_epochs", if curves { 1000 } else { 1500 })?;
        let early_stop = match take("early_stop") {
            Some(v) => parse_bool(&v).map_err(|e| ExperimentError::Config(format!("early_stop: {e}")))?,
            None => !curves,
        };
        let patience = scalar(take("patience"), "patience", gradflow::train::DEFAULT_PATIENCE)?;
        let normalize_features = match take("normalize_features") {
            Some(v) => parse_bool(&v).map_err(|e| ExperimentError::Config(format!("normalize_features: {e}")))?,
            None => true,
        };
        let instances = scalar(take("instances"), "instances", 100)?;
        let suite_nodes = scalar(take("suite_nodes"), "suite_nodes", 20)?;
        let suite_width = scalar(take("suite_width"), "suite_width", 4)?;
        let suite_max_depth = scalar(take("suite_max_depth"), "suite_max_depth", 8)?;
        let suite_max_span = scalar(take("suite_max_span"), "suite_max_span", 10)?;
        if suite_max_span == 0 || suite_max_span > gradflow::oracles::MAX_RESIDUAL_SPAN {
            return Err(ExperimentError::Config(format!(
                "suite_max_span must be in 1..={}",
                gradflow::oracles::MAX_RESIDUAL_SPAN
            )));
        }
        let span_probe = take("span_probe").map(|v| parse_scalar("span_probe", &v)).transpose()?;
        if hidden_dim == 0 || max_epochs == 0 || suite_nodes < 3 || suite_width == 0 || suite_max_depth == 0 {
            return Err(ExperimentError::Config(
                "hidden_dim, max_epochs, suite_width, suite_max_depth must be positive and suite_nodes ≥ 3".into(),
            ));
        }
        if early_stop && patience == 0 {
            return Err(ExperimentError::Config("patience must be at least 1".into()));
        }
        Ok(Self {
            command,
            dataset,
            normalize_features,
            grid,
            repeats,
            seed_base,
            out_dir,
            hidden_dim,
            max_epochs,
            early_stop,
            patience,
            instances,
            suite_nodes,
            suite_width,
            suite_max_depth,
            suite_max_span,
            span_probe,
        })
    }

    pub fn from_file(path: &Path, command: Command, heavy: bool) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, command, base, heavy)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|i| self.seed_base + i).collect()
    }

    /// Canonical `key = value` rendering used in manifests.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let join = |xs: Vec<String>| xs.join(",");
        let _ = writeln!(s, "command = {}", self.command);
        match &self.dataset {
            Some(DatasetSource::Dir(p)) => {
                let _ = writeln!(s, "dataset = {}", p.display());
            }
            Some(DatasetSource::Sbm(p)) => {
                let _ = writeln!(
                    s,
                    "dataset = sbm\nsbm_blocks = {}\nsbm_per_block = {}\nsbm_p_in = {}\nsbm_p_out = {}\nsbm_feat_dim = {}\nsbm_seed = {}",
                    p.blocks, p.per_block, p.p_in, p.p_out, p.feat_dim, p.seed
                );
            }
            None => {}
        }
        let g = &self.grid;
        let _ = writeln!(s, "normalize_features = {}", self.normalize_features);
        let _ = writeln!(s, "depths = {}", join(g.depths.iter().map(|d| d.to_string()).collect()));
        let _ = writeln!(
            s,
            "c = {}",
            join(g.cs.iter().map(|c| c.map_or("none".into(), |c| c.to_string())).collect())
        );
        let _ = writeln!(s, "lr = {}", join(g.lrs.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "activations = {}", join(g.activations.iter().map(|a| a.to_string()).collect()));
        let _ = writeln!(s, "residual = {}", join(g.residual.iter().map(|r| r.to_string()).collect()));
        let _ = writeln!(s, "repeats = {}", self.repeats);
        let _ = writeln!(s, "seed_base = {}", self.seed_base);
        let _ = writeln!(s, "hidden_dim = {}", self.hidden_dim);
        let _ = writeln!(s, "max_epochs = {}", self.max_epochs);
        let _ = writeln!(s, "early_stop = {}", self.early_stop);
        let _ = writeln!(s, "patience = {}", self.patience);
        if self.command.is_suite() {
            let _ = writeln!(s, "instances = {}", self.instances);
            let _ = writeln!(s, "suite_nodes = {}", self.suite_nodes);
            let _ = writeln!(s, "suite_width = {}", self.suite_width);
            let _ = writeln!(s, "suite_max_depth = {}", self.suite_max_depth);
            let _ = writeln!(s, "suite_max_span = {}", self.suite_max_span);
            if let Some(p) = self.span_probe {
                let _ = writeln!(s, "span_probe = {p}");
            }
        }
        s
    }
}
