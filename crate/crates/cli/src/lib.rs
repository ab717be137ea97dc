//! Command implementations behind the `agcrn` binary.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use agcrn::data::{
    ha_metrics, interpolate_missing, load_csv, metrics, split_and_window_with, synth_generate, Dataset,
    HistoricalAverage, MetricsReport, RawSeries, SplitName, SynthSpec,
};
use agcrn::graph::PredefinedGraph;
use agcrn::model::{count_params, Checkpoint, ForecastModel, ModelConfig};
use agcrn::numerics::{CheckOptions, CheckReport, Fault};
use agcrn::training::{evaluate, gradient_check, predict_split, train_with_observer, TrainHistory};
use clap::{Args, Parser, Subcommand};

pub use config::{Overrides, RunConfig};

pub const SPLIT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);
/// Largest `N·H·d` accepted by `gradcheck`.
pub const GRADCHECK_LIMIT: usize = 10_000;

/// A failure with its process exit code: 1 runtime or numerical, 2
/// configuration or I/O.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<agcrn::Error> for CliError {
    fn from(e: agcrn::Error) -> Self {
        use agcrn::Error as E;
        match e {
            E::Config(_) | E::Data(_) | E::Parse { .. } | E::Io { .. } | E::Json(_) | E::Csv(_) => {
                CliError::config(e.to_string())
            }
            E::Shape { .. } | E::NonFinite(_) | E::Nondeterministic { .. } => CliError::runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "agcrn", version, about = "Adaptive graph convolutional recurrent forecasting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, history, config and validation metrics.
    Train(Overrides),
    /// Score a checkpoint, or the historical average, on one split.
    Eval(EvalArgs),
    /// Finite-difference check of every parameter of a tiny model.
    Gradcheck(GradcheckArgs),
    /// Print the number of scalar parameters of a configuration.
    CountParams(Overrides),
    /// Write the learned embedding and adjacency of a checkpoint as CSV.
    ExportGraph(ExportArgs),
    /// Generate a synthetic community dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: Overrides,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Score the historical average instead of a checkpoint.
    #[arg(long)]
    pub ha: bool,
    /// Test hook: score the truth against itself.
    #[arg(long, hide = true)]
    pub inject_truth: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub run: Overrides,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Test hook: scale the sigmoid derivative in the backward pass.
    #[arg(long, hide = true)]
    pub corrupt_backward: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub communities: usize,
    #[arg(long, default_value_t = 2016)]
    pub steps: usize,
    #[arg(long, default_value_t = 5.0)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 288)]
    pub steps_per_day: usize,
    #[arg(long, default_value_t = 0.3)]
    pub amplitude_spread: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phase_jitter: f64,
    #[arg(long, default_value_t = 0.3)]
    pub coupling: f64,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            amplitude_spread: self.amplitude_spread,
            phase_jitter: self.phase_jitter,
            coupling: self.coupling,
            steps_per_day: self.steps_per_day,
            ..SynthSpec::new(self.nodes, self.communities, self.steps, self.noise_std, self.seed)
        }
    }
}

/// Result of one command: text for stdout and the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, code: 0 }
    }
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Train(o) => {
            let cfg = RunConfig::from_overrides(&o)?;
            let out = cmd_train(&cfg, &mut |line| eprintln!("{line}"))?;
            Ok(Outcome::ok(format!("{}\n", out.display())))
        }
        Command::Eval(a) => {
            let report = cmd_eval(&a)?;
            Ok(Outcome::ok(summary_line(&report)))
        }
        Command::Gradcheck(a) => {
            let report = cmd_gradcheck(&a)?;
            let mut s = String::new();
            for p in &report.params {
                let _ = writeln!(
                    s,
                    "{:<24} entries {:>6} probed {:>6} max_rel_err {:.3e} {}",
                    p.name,
                    p.entries,
                    p.probed,
                    p.max_rel_err,
                    if p.pass { "ok" } else { "FAIL" }
                );
            }
            let _ = writeln!(s, "{}", if report.pass { "PASS" } else { "FAIL" });
            Ok(Outcome {
                stdout: s,
                code: if report.pass { 0 } else { 1 },
            })
        }
        Command::CountParams(o) => {
            let cfg = RunConfig::from_overrides(&o)?;
            Ok(Outcome::ok(format!("{}\n", cmd_count_params(&cfg)?)))
        }
        Command::ExportGraph(a) => {
            let files = cmd_export_graph(&a.checkpoint, &a.out)?;
            Ok(Outcome::ok(list_paths(&files)))
        }
        Command::Synth(a) => {
            let files = cmd_synth(&a)?;
            Ok(Outcome::ok(list_paths(&files)))
        }
    }
}

fn list_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| format!("{}\n", p.display())).collect()
}

fn summary_line(r: &MetricsReport) -> String {
    let mape = r.average.mape.map_or("NaN".to_string(), |m| format!("{:.4}%", m * 100.0));
    format!("MAE {:.4} RMSE {:.4} MAPE {mape}\n", r.average.mae, r.average.rmse)
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn make_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> CliResult<&'a PathBuf> {
    p.as_ref().ok_or_else(|| CliError::config(format!("missing --{what}")))
}

/// Loads the series, fills gaps, and checks the configured node count.
pub fn load_series(cfg: &RunConfig) -> CliResult<RawSeries> {
    let path = required(&cfg.io.data, "data")?;
    if !path.exists() {
        return Err(CliError::config(format!("data file not found: {}", path.display())));
    }
    let mut s = load_csv(path)?;
    s.steps_per_day = cfg.steps_per_day();
    if let Some(n) = cfg.io.nodes {
        if n != s.nodes() {
            return Err(CliError::config(format!(
                "configured nodes = {n} but {} has {} columns",
                path.display(),
                s.nodes()
            )));
        }
    }
    Ok(interpolate_missing(&s)?)
}

fn load_graph(cfg: &RunConfig, model: &ModelConfig) -> CliResult<Option<PredefinedGraph>> {
    if !model.variant.needs_predefined_graph() {
        return Ok(None);
    }
    let path = cfg.io.graph.as_ref().ok_or_else(|| {
        CliError::config(format!("variant {} needs --graph (edge-list CSV u,v,weight)", model.variant))
    })?;
    if !path.exists() {
        return Err(CliError::config(format!("graph file not found: {}", path.display())));
    }
    Ok(Some(PredefinedGraph::load_csv(path, model.nodes)?))
}

fn parse_split(s: &str) -> CliResult<SplitName> {
    s.parse().map_err(|e: agcrn::Error| CliError::config(e.to_string()))
}

/// Trains per `cfg` and returns the output directory. Progress lines go to
/// `log`.
pub fn cmd_train(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> CliResult<PathBuf> {
    let series = load_series(cfg)?;
    let nodes = series.nodes();
    let model_cfg = cfg.model_config(nodes);
    let train_cfg = cfg.train_config();
    let out = cfg.io.out.clone().unwrap_or_else(|| PathBuf::from("runs/latest"));
    let graph = load_graph(cfg, &model_cfg)?;
    let ds = split_and_window_with(&series, SPLIT_RATIOS, model_cfg.lookback, model_cfg.horizon, None)?;
    ds.audit()?;
    make_dir(&out)?;
    write(&out.join("config.toml"), &cfg.effective(nodes).to_toml()?)?;

    let mut model = ForecastModel::build(model_cfg, graph)?;
    log(&format!(
        "training {} on {} nodes: {} train / {} val windows, {} parameters",
        model.config().variant,
        nodes,
        ds.train.len(),
        ds.val.len(),
        model.params().scalar_count()
    ));
    let history = train_with_observer(&mut model, &ds, &train_cfg, |r| {
        log(&format!(
            "epoch {:>4} train {:.4} val {:.4} ({:.2}s)",
            r.epoch, r.train_loss, r.val_loss, r.seconds
        ))
    })
    .map_err(|e| CliError::runtime(e.to_string()))?;

    write_run_artifacts(&out, &model, &ds, &history, train_cfg.batch_size)?;
    log(&format!("best epoch {} of {}", history.best_epoch, history.epochs.len()));
    Ok(out)
}

fn write_run_artifacts(
    out: &Path,
    model: &ForecastModel,
    ds: &Dataset,
    history: &TrainHistory,
    batch: usize,
) -> CliResult<()> {
    model.to_checkpoint().with_normalizer(ds.normalizer).save(out.join("checkpoint.json"))?;
    write(&out.join("history.csv"), &history.losses_csv())?;
    let mut timing = String::from("epoch,seconds\n");
    for e in &history.epochs {
        let _ = writeln!(timing, "{},{:.3}", e.epoch, e.seconds);
    }
    write(&out.join("timing.csv"), &timing)?;
    let report = evaluate(model, &ds.val, &ds.normalizer, batch)?;
    write(&out.join("val_metrics.csv"), &report.to_csv())?;
    write(&out.join("val_metrics.json"), &report.to_json()?)?;
    Ok(())
}

/// Scores one split and writes `metrics_<split>.csv/json` (or `ha_...`)
/// into `--out` when given.
pub fn cmd_eval(a: &EvalArgs) -> CliResult<MetricsReport> {
    let cfg = RunConfig::from_overrides(&a.run)?;
    let split = parse_split(&a.split)?;
    let series = load_series(&cfg)?;

    let (report, prefix) = if a.ha {
        if a.checkpoint.is_some() {
            return Err(CliError::config("--ha does not take a checkpoint"));
        }
        let mc = cfg.model_config(series.nodes());
        let ranges = agcrn::data::split_rows(series.steps(), SPLIT_RATIOS)?;
        let ha = HistoricalAverage::fit(&series, ranges[0].end)?;
        let rows = ranges[split_index(split)].clone();
        (ha_metrics(&ha, &series, rows, mc.lookback, mc.horizon)?, "ha_metrics")
    } else {
        let path = required(&a.checkpoint, "checkpoint")?;
        let ck = Checkpoint::load(path)?;
        if ck.config.nodes != series.nodes() {
            return Err(CliError::config(format!(
                "checkpoint has {} nodes but the data has {}",
                ck.config.nodes,
                series.nodes()
            )));
        }
        let model = ForecastModel::from_checkpoint(&ck)?;
        let c = model.config();
        let ds = split_and_window_with(&series, SPLIT_RATIOS, c.lookback, c.horizon, ck.normalizer)?;
        let batch = cfg.train_config().batch_size;
        let (pred, truth, observed) = predict_split(&model, ds.split(split), &ds.normalizer, batch)?;
        let pred = if a.inject_truth { truth.clone() } else { pred };
        (metrics(&pred, &truth, Some(&observed))?, "metrics")
    };

    if let Some(out) = &cfg.io.out {
        make_dir(out)?;
        let name = format!("{prefix}_{}", a.split);
        write(&out.join(format!("{name}.csv")), &report.to_csv())?;
        write(&out.join(format!("{name}.json")), &report.to_json()?)?;
    }
    Ok(report)
}

fn split_index(s: SplitName) -> usize {
    match s {
        SplitName::Train => 0,
        SplitName::Val => 1,
        SplitName::Test => 2,
    }
}

/// Node count from `--nodes`, else from the data file.
fn resolve_nodes(cfg: &RunConfig) -> CliResult<usize> {
    match (cfg.io.nodes, &cfg.io.data) {
        (Some(n), _) => Ok(n),
        (None, Some(_)) => Ok(load_series(cfg)?.nodes()),
        (None, None) => Err(CliError::config("the node count needs --nodes or --data")),
    }
}

pub fn cmd_count_params(cfg: &RunConfig) -> CliResult<usize> {
    let mc = cfg.model_config(resolve_nodes(cfg)?);
    mc.validate()?;
    Ok(count_params(&mc))
}

/// Runs the check and writes `gradcheck.json` into `--out` when given. A
/// pre-defined-graph variant without `--graph` uses a chain over the nodes.
pub fn cmd_gradcheck(a: &GradcheckArgs) -> CliResult<CheckReport> {
    let cfg = RunConfig::from_overrides(&a.run)?;
    let mc = cfg.model_config(resolve_nodes(&cfg)?);
    mc.validate()?;
    let size = mc.nodes * mc.hidden * mc.embed_dim;
    if size > GRADCHECK_LIMIT {
        return Err(CliError::config(format!(
            "gradcheck is for tiny configurations: N·H·d = {size} exceeds {GRADCHECK_LIMIT}"
        )));
    }
    let graph = if mc.variant.needs_predefined_graph() && cfg.io.graph.is_none() {
        Some(PredefinedGraph::new(mc.nodes, (1..mc.nodes).map(|i| (i - 1, i, 1.0)).collect())?)
    } else {
        load_graph(&cfg, &mc)?
    };
    let model = ForecastModel::build(mc, graph)?;
    let opts = CheckOptions {
        step: a.step,
        tol: a.tol,
        ..CheckOptions::default()
    };
    let fault = a.corrupt_backward.then_some(Fault::ScaleSigmoidBackward(1.5));
    let report = gradient_check(&model, 2, opts, fault)?;
    if let Some(out) = &cfg.io.out {
        make_dir(out)?;
        write(&out.join("gradcheck.json"), &report.to_json()?)?;
    }
    Ok(report)
}

/// Writes `embedding.csv` (`N×d`) and `adjacency.csv` (`N×N`).
pub fn cmd_export_graph(checkpoint: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let model = ForecastModel::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    let emb = model.dagg_embedding().ok_or_else(|| {
        CliError::config(format!("variant {} has no learned graph to export", model.config().variant))
    })?;
    let graph = agcrn::graph::dagg_matrix(&emb)?;
    make_dir(out)?;
    let grid = |prefix: &str, t: &agcrn::numerics::Tensor| {
        let cols = t.shape()[1];
        let header: Vec<String> = (0..cols).map(|j| format!("{prefix}{j}")).collect();
        let mut s = header.join(",") + "\n";
        for i in 0..t.shape()[0] {
            let row: Vec<String> = t.row(i).iter().map(|v| format!("{v}")).collect();
            s += &(row.join(",") + "\n");
        }
        s
    };
    let e_path = out.join("embedding.csv");
    let a_path = out.join("adjacency.csv");
    write(&e_path, &grid("e", emb.tensor()))?;
    write(&a_path, &grid("n", &graph.a_tilde))?;
    Ok(vec![e_path, a_path])
}

/// Writes `series.csv`, `meta.json` and a chain edge list `graph.csv`.
pub fn cmd_synth(a: &SynthArgs) -> CliResult<Vec<PathBuf>> {
    let data = synth_generate(&a.spec())?;
    make_dir(&a.out)?;
    let series = a.out.join("series.csv");
    let meta = a.out.join("meta.json");
    let graph = a.out.join("graph.csv");
    data.series.write_csv(&series)?;
    let json = serde_json::to_string_pretty(&data.meta()).map_err(|e| CliError::runtime(e.to_string()))?;
    write(&meta, &json)?;
    let mut edges = String::from("u,v,weight\n");
    for (u, v, w) in &data.chain_graph().edges {
        let _ = writeln!(edges, "{u},{v},{w}");
    }
    write(&graph, &edges)?;
    Ok(vec![series, meta, graph])
}

/// Caps the global thread pool from `AGCRN_THREADS`.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("AGCRN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("AGCRN_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::runtime(e.to_string()))
}
