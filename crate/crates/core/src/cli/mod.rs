//! Command-line verbs. Every file written carries the run's config hash in
//! a leading comment.

pub mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::driver::{
    efficiency_study, exhaustive_archive, load_checkpoint, mean_sd, mine_frequencies, save_checkpoint, spearman_matrix,
    summarize_study, surrogate_study, Archive, CurvePoint, DriverError, EvaluatedArch, Objective, RunConfig,
    ScalarizationConfig, Search, SearchState, SpaceSpec, StudyConfig, RANDOM_LABEL, SEARCH_LABEL,
};
use crate::evaluation::{stub, EvalError, EvaluatorSpec, ExternalConfig, SyntheticConfig, Variant};
use crate::metrics::HvConfig;
use crate::rng::stream;
use crate::space::{ComplexityConfig, GeneRole, Genome, SearchSpace, GENOME_LEN};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Largest space the commands will enumerate.
const ENUMERATION_CAP: u128 = 2_000_000;

#[derive(Debug, Parser)]
#[command(name = "surrogate-nas", version, about = "Surrogate-assisted multi-objective architecture search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorKind {
    Synthetic,
    Tabular,
    External,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total number of true evaluations.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, value_enum)]
    pub evaluator: Option<EvaluatorKind>,
    /// Synthetic landscape variant (smooth, rugged, deceptive).
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Lookup table for the tabular evaluator.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multi-objective search.
    Search(Common),
    /// Single-objective search on a scalarized accuracy/complexity trade-off.
    SearchScalar {
        #[command(flatten)]
        common: Common,
        /// Complexity target; defaults to the median over the space.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long, default_value = "madds")]
        objective: Objective,
    },
    /// Held-out rank correlation of each surrogate versus training size.
    SurrogateStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 2000)]
        pool: usize,
        #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500")]
        sizes: Vec<usize>,
    },
    /// Hypervolume versus evaluations, search against random sampling.
    EfficiencyStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Front table, gene frequencies and objective correlations of a run.
    Analyze {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Search initialized from the front of an earlier run.
    Transfer {
        #[arg(long)]
        from: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Continue an interrupted run.
    Resume {
        #[arg(long)]
        run: PathBuf,
        /// New total budget, to extend a run.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Reference external evaluator speaking the line protocol on stdio.
    EvalStub(StubArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StubArgs {
    #[arg(long, default_value = "smooth")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub landscape_seed: u64,
    #[arg(long)]
    pub constant: Option<f64>,
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long, default_value_t = 0)]
    pub shuffle_seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub drop_once: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    pub drop_always: Vec<u64>,
    #[arg(long)]
    pub crash_marker: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing run artifact: {0}")]
    MissingRunArtifacts(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Driver(DriverError::Eval(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Driver(DriverError::Config(_)) => 2,
            CliError::Driver(DriverError::Eval(_)) => 3,
            CliError::MissingRunArtifacts(_) | CliError::Driver(DriverError::CorruptCheckpoint(_)) => 4,
            CliError::Driver(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingRunArtifacts(_) => "missing_run_artifacts",
            CliError::Driver(e) => match e {
                DriverError::Config(_) => "config",
                DriverError::Eval(_) => "evaluator",
                DriverError::Surrogate(_) => "surrogate",
                DriverError::Moea(_) => "moea",
                DriverError::Space(_) => "space",
                DriverError::Metric(_) => "metric",
                DriverError::EmptyAfterDedup => "empty_after_dedup",
                DriverError::DuplicateGenome(_) => "duplicate_genome",
                DriverError::CorruptCheckpoint(_) => "corrupt_checkpoint",
                DriverError::EmptyFront => "empty_front",
                DriverError::Io { .. } => "io",
            },
        }
    }

    /// One JSON line for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Search(common) => cmd_search(&common),
        Command::SearchScalar { common, target, objective } => cmd_search_scalar(&common, target, objective),
        Command::SurrogateStudy { common, trials, pool, sizes } => cmd_surrogate_study(&common, trials, pool, sizes),
        Command::EfficiencyStudy { common, seeds } => cmd_efficiency_study(&common, seeds),
        Command::Analyze { run, out, force } => cmd_analyze(&run, out, force),
        Command::Transfer { from, common } => cmd_transfer(&from, &common),
        Command::Resume { run, budget, force } => cmd_resume(&run, budget, force),
        Command::EvalStub(args) => cmd_eval_stub(args),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Driver(DriverError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn hash_line(hash: &str) -> String {
    format!("# config_hash: {hash}\n")
}

/// Creates `out`, refusing to reuse a non-empty directory without `force`.
fn prepare_out(out: &Path, force: bool) -> Result<(), CliError> {
    let occupied = out.exists() && (!out.is_dir() || std::fs::read_dir(out).map_err(|e| io_err(out, e))?.next().is_some());
    if occupied && !force {
        return Err(CliError::Usage(format!("{} already exists; pass --force to overwrite", out.display())));
    }
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))
}

fn require_out(common: &Common) -> Result<&Path, CliError> {
    common.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
}

/// Config file (or defaults) with command-line overrides applied.
fn load_config(common: &Common, required: bool) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) if !path.exists() => {
            return Err(CliError::Usage(format!("config file {} not found", path.display())))
        }
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            DriverError::Io { .. } => CliError::Usage(e.to_string()),
            other => other.into(),
        })?,
        None if required => return Err(CliError::Usage("--config is required".into())),
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    apply_evaluator(&mut cfg, common)?;
    if let Some(budget) = common.budget {
        set_budget(&mut cfg, budget)?;
    }
    Ok(cfg)
}

fn apply_evaluator(cfg: &mut RunConfig, common: &Common) -> Result<(), CliError> {
    let synthetic = || {
        let mut s = match &cfg.evaluator {
            EvaluatorSpec::Synthetic(s) => s.clone(),
            _ => SyntheticConfig::default(),
        };
        if let Some(v) = common.variant {
            s.variant = v;
        }
        s
    };
    let spec = match common.evaluator {
        Some(EvaluatorKind::Synthetic) => EvaluatorSpec::Synthetic(synthetic()),
        Some(EvaluatorKind::Tabular) => match (&common.table, &cfg.evaluator) {
            (Some(path), _) => EvaluatorSpec::Tabular { path: path.clone() },
            (None, EvaluatorSpec::Tabular { path }) => EvaluatorSpec::Tabular { path: path.clone() },
            (None, _) => return Err(CliError::Usage("--evaluator tabular needs --table".into())),
        },
        Some(EvaluatorKind::External) => match &cfg.evaluator {
            EvaluatorSpec::External(e) => EvaluatorSpec::External(e.clone()),
            _ => EvaluatorSpec::External(stub_command(&synthetic())?),
        },
        None => match &cfg.evaluator {
            EvaluatorSpec::Synthetic(_) => EvaluatorSpec::Synthetic(synthetic()),
            other => other.clone(),
        },
    };
    cfg.evaluator = spec;
    Ok(())
}

/// This executable's `eval-stub` verb answering from `synthetic`.
fn stub_command(synthetic: &SyntheticConfig) -> Result<ExternalConfig, CliError> {
    let exe = std::env::current_exe().map_err(|e| io_err(Path::new("current executable"), e))?;
    let command = vec![
        exe.display().to_string(),
        "eval-stub".into(),
        "--variant".into(),
        synthetic.variant.to_string(),
        "--noise-sigma".into(),
        synthetic.noise_sigma.to_string(),
        "--noise-seed".into(),
        synthetic.noise_seed.to_string(),
        "--landscape-seed".into(),
        synthetic.landscape_seed.to_string(),
    ];
    Ok(ExternalConfig { command, ..ExternalConfig::default() })
}

/// Rounds down to a whole number of batches after the initial sample.
fn set_budget(cfg: &mut RunConfig, budget: usize) -> Result<(), CliError> {
    if budget < cfg.initial_samples {
        return Err(CliError::Usage(format!("budget {budget} is below the {} initial samples", cfg.initial_samples)));
    }
    cfg.iterations = (budget - cfg.initial_samples) / cfg.batch_size;
    if cfg.budget() != budget {
        log::warn!("budget {budget} rounded down to {} (whole batches of {})", cfg.budget(), cfg.batch_size);
    }
    Ok(())
}

/// Runs to completion, checkpointing after every step, then writes the
/// run artifacts.
fn drive(mut search: Search, out: &Path) -> Result<SearchState, CliError> {
    let ckpt = out.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt, search.state())?;
    while !search.is_finished() {
        search.step()?;
        save_checkpoint(&ckpt, search.state())?;
    }
    let state = search.into_state();
    write_run_artifacts(&state, out)?;
    Ok(state)
}

fn write_run_artifacts(state: &SearchState, out: &Path) -> Result<(), CliError> {
    let hash = state.config.hash();
    write_file(out, "config.toml", &format!("{}{}", hash_line(&hash), state.config.to_toml()))?;
    write_file(out, "archive.csv", &state.archive.to_csv_string(&hash))?;
    write_file(out, "metrics.csv", &state.metrics_csv())?;
    write_file(out, "surrogates.csv", &state.surrogate_csv())?;
    let result = state.result();
    write_file(out, "front.csv", &front_table(&result, &state.config, &hash))?;
    let objectives = &state.config.objectives;
    if state.config.scalarization.is_none() && objectives.len() == 2 {
        let pt = |a: &EvaluatedArch| {
            let o = a.objectives(objectives);
            (o[1], -o[0])
        };
        let all: Vec<(f64, f64)> = state.archive.iter().map(pt).collect();
        let front: Vec<(f64, f64)> = result.iter().map(|a| pt(a)).collect();
        let chart = svg::scatter("Evaluated architectures", objectives[1].name(), "accuracy", &all, &front, &hash);
        write_file(out, "front.svg", &chart)?;
    }
    Ok(())
}

fn front_table(front: &[&EvaluatedArch], cfg: &RunConfig, hash: &str) -> String {
    let mut out = hash_line(hash);
    out.push_str("genome,accuracy,madds,params,latency_cpu,latency_gpu,iteration");
    if cfg.scalarization.is_some() {
        out.push_str(",scalarized");
    }
    out.push('\n');
    let mut sorted = front.to_vec();
    sorted.sort_by_key(|a| a.complexity.madds);
    for a in sorted {
        let c = &a.complexity;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            a.genome.encode_text(),
            a.accuracy,
            c.madds,
            c.params,
            c.latency_cpu,
            c.latency_gpu,
            a.iteration
        );
        if let Some(s) = &cfg.scalarization {
            let v = s
                .objective
                .complexity_value(c)
                .and_then(|x| crate::evaluation::scalarize(a.accuracy, x, s.target, s.exponent).ok());
            let _ = write!(out, ",{}", v.map(|v| v.to_string()).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}

fn cmd_search(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common, true)?;
    let out = require_out(common)?;
    prepare_out(out, common.force)?;
    let state = drive(Search::new(cfg)?, out)?;
    log::info!("search finished: {} evaluations, {} on the front", state.archive.len(), state.result().len());
    Ok(())
}

/// Median of `objective` over the space: exact when enumerable, otherwise
/// over 10,001 uniform samples.
pub fn median_complexity(space: &SearchSpace, complexity: &ComplexityConfig, objective: Objective, seed: u64) -> f64 {
    let genomes: Vec<Genome> = match space.enumerate(ENUMERATION_CAP) {
        Ok(all) => all.collect(),
        Err(_) => {
            let mut rng = stream(seed, "median-target", 0);
            (0..10_001).map(|_| space.sample_uniform(&mut rng)).collect()
        }
    };
    let mut v: Vec<f64> =
        genomes.iter().filter_map(|g| objective.complexity_value(&complexity.complexity(g))).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn cmd_search_scalar(common: &Common, target: Option<f64>, objective: Objective) -> Result<(), CliError> {
    let mut cfg = load_config(common, true)?;
    let out = require_out(common)?;
    if objective == Objective::Accuracy {
        return Err(CliError::Usage("the scalarization objective must be a complexity measure".into()));
    }
    let existing = cfg.scalarization.clone();
    let target = match (target, &existing) {
        (Some(t), _) => t,
        (None, Some(s)) if s.objective == objective => s.target,
        _ => median_complexity(&cfg.space.space(), &cfg.complexity, objective, cfg.seed),
    };
    let exponent = existing.map(|s| s.exponent).unwrap_or(crate::evaluation::DEFAULT_SCALARIZATION_EXPONENT);
    cfg.scalarization = Some(ScalarizationConfig { objective, target, exponent });
    cfg.objectives = vec![Objective::Accuracy, objective];
    cfg.validate()?;
    prepare_out(out, common.force)?;
    let state = drive(Search::new(cfg)?, out)?;
    if let Some(best) = state.best_scalarized() {
        log::info!("best {} accuracy {:.4} scalarized {:?}", best.genome, best.accuracy, state.scalarized(best));
    }
    Ok(())
}

fn cmd_surrogate_study(common: &Common, trials: usize, pool: usize, sizes: Vec<usize>) -> Result<(), CliError> {
    let cfg = load_config(common, false)?;
    let out = require_out(common)?;
    if matches!(cfg.evaluator, EvaluatorSpec::External(_)) {
        return Err(CliError::Usage("the surrogate study needs a synthetic or tabular evaluator".into()));
    }
    prepare_out(out, common.force)?;
    let hash = cfg.hash();
    let study = StudyConfig { pool, sizes, trials, test_size: None };
    let mut evaluator = cfg.evaluator.build()?;
    let samples = surrogate_study(&cfg.space.space(), evaluator.as_mut(), &cfg.surrogate, &study, cfg.seed)?;

    let mut raw = hash_line(&hash);
    raw.push_str("model,size,trial,kendall_tau,spearman\n");
    for s in &samples {
        let _ = writeln!(raw, "{},{},{},{},{}", s.model, s.size, s.trial, s.tau, s.spearman);
    }
    write_file(out, "surrogate_trials.csv", &raw)?;

    let rows = summarize_study(&samples);
    let mut table = hash_line(&hash);
    table.push_str("model,size,trials,kendall_tau_mean,kendall_tau_sd,spearman_mean,spearman_sd\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{}",
            r.model, r.size, r.trials, r.tau_mean, r.tau_sd, r.spearman_mean, r.spearman_sd
        );
    }
    write_file(out, "surrogate_study.csv", &table)?;

    let mut models: Vec<String> = Vec::new();
    for r in &rows {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = models
        .into_iter()
        .map(|m| {
            let pts = rows.iter().filter(|r| r.model == m).map(|r| (r.size as f64, r.tau_mean)).collect();
            (m, pts)
        })
        .collect();
    write_file(out, "surrogate_study.svg", &svg::lines("Held-out Kendall tau", "training samples", "tau", &series, &hash))?;
    Ok(())
}

/// Reference point from the objective ranges of every genome in the space.
pub fn exhaustive_hv_config(cfg: &RunConfig) -> Result<(HvConfig, Archive), CliError> {
    let space = cfg.space.space();
    let mut evaluator = cfg.evaluator.build()?;
    let all = exhaustive_archive(&space, &cfg.complexity, evaluator.as_mut(), ENUMERATION_CAP)?;
    let hv = HvConfig::from_points(&all.objectives(&cfg.objectives), cfg.hv_margin).map_err(DriverError::from)?;
    Ok((hv, all))
}

fn cmd_efficiency_study(common: &Common, seeds: u64) -> Result<(), CliError> {
    let mut cfg = load_config(common, false)?;
    if common.config.is_none() {
        cfg.space = SpaceSpec::Reduced;
    }
    cfg.validate()?;
    let out = require_out(common)?;
    let space = cfg.space.space();
    if space.cardinality() > ENUMERATION_CAP {
        return Err(CliError::Usage(format!(
            "the efficiency study needs an enumerable space (at most {ENUMERATION_CAP} genomes)"
        )));
    }
    prepare_out(out, common.force)?;
    let hash = cfg.hash();
    let (hv, all) = exhaustive_hv_config(&cfg)?;
    let front: Vec<Vec<f64>> = all.front(&cfg.objectives).iter().map(|a| a.objectives(&cfg.objectives)).collect();
    let best = crate::metrics::hypervolume(&front, &hv).map_err(DriverError::from)?.value;
    let seed_list: Vec<u64> = (0..seeds).map(|i| cfg.seed + i).collect();
    let points = efficiency_study(&cfg, &seed_list, &hv)?;

    let mut runs = hash_line(&hash);
    let _ = writeln!(runs, "# exhaustive_front_hypervolume: {best}");
    runs.push_str("method,seed,evaluations,hypervolume\n");
    for p in &points {
        let _ = writeln!(runs, "{},{},{},{}", p.method, p.seed, p.evaluations, p.hypervolume);
    }
    write_file(out, "hv_runs.csv", &runs)?;

    let curves = summarize_curves(&points);
    let mut table = hash_line(&hash);
    let _ = writeln!(table, "# exhaustive_front_hypervolume: {best}");
    table.push_str("method,evaluations,runs,hypervolume_mean,hypervolume_sd\n");
    for (method, evals, n, mean, sd) in &curves {
        let _ = writeln!(table, "{method},{evals},{n},{mean},{sd}");
    }
    write_file(out, "hv_curves.csv", &table)?;

    let series: Vec<(String, Vec<(f64, f64)>)> = [SEARCH_LABEL, RANDOM_LABEL]
        .iter()
        .map(|m| {
            let pts = curves.iter().filter(|c| c.0 == *m).map(|c| (c.1 as f64, c.3)).collect();
            (m.to_string(), pts)
        })
        .collect();
    write_file(out, "hv_curves.svg", &svg::lines("Mean hypervolume", "evaluations", "hypervolume", &series, &hash))?;
    Ok(())
}

/// (method, evaluations, runs, mean, sd) in method then evaluation order.
fn summarize_curves(points: &[CurvePoint]) -> Vec<(String, usize, usize, f64, f64)> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for p in points {
        let k = (p.method.clone(), p.evaluations);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(m, e)| {
            let v: Vec<f64> =
                points.iter().filter(|p| p.method == m && p.evaluations == e).map(|p| p.hypervolume).collect();
            let (mean, sd) = mean_sd(&v);
            (m, e, v.len(), mean, sd)
        })
        .collect()
}

fn load_run(run: &Path) -> Result<SearchState, CliError> {
    let ckpt = run.join(CHECKPOINT_FILE);
    if !ckpt.exists() {
        return Err(CliError::MissingRunArtifacts(ckpt.display().to_string()));
    }
    Ok(load_checkpoint(&ckpt)?)
}

fn gene_label(pos: usize) -> String {
    match GeneRole::of(pos) {
        GeneRole::Resolution => "resolution".into(),
        GeneRole::Depth { block } => format!("b{block} depth"),
        GeneRole::Kernel { block, slot } => format!("b{block} l{slot} kernel"),
        GeneRole::Expansion { block, slot } => format!("b{block} l{slot} expansion"),
    }
}

fn cmd_analyze(run: &Path, out: Option<PathBuf>, force: bool) -> Result<(), CliError> {
    let state = load_run(run)?;
    if !state.is_finished() {
        return Err(CliError::Usage(format!("{} is not a completed run; resume it first", run.display())));
    }
    let out = out.unwrap_or_else(|| {
        let mut name = run.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push("-analysis");
        run.with_file_name(name)
    });
    prepare_out(&out, force)?;
    let cfg = &state.config;
    let hash = cfg.hash();
    let front = state.result();
    write_file(&out, "front.csv", &front_table(&front, cfg, &hash))?;

    let genomes: Vec<Genome> = front.iter().map(|a| a.genome).collect();
    let space = cfg.space.space();
    let dist = mine_frequencies(&genomes, &space)?;
    write_file(&out, "frequencies.csv", &format!("{}{}", hash_line(&hash), dist.to_csv()))?;
    let width = dist.codes.iter().flatten().copied().max().unwrap_or(0) as usize + 1;
    let matrix: Vec<Vec<f64>> = (0..GENOME_LEN)
        .map(|pos| {
            (0..width)
                .map(|c| match dist.codes[pos].iter().position(|&k| k as usize == c) {
                    Some(i) => dist.probs[pos][i],
                    None => f64::NAN,
                })
                .collect()
        })
        .collect();
    let rows: Vec<String> = (0..GENOME_LEN).map(gene_label).collect();
    let cols: Vec<String> = (0..width).map(|c| c.to_string()).collect();
    write_file(&out, "frequencies.svg", &svg::heatmap("Gene code frequencies on the front", &rows, &cols, &matrix, &hash))?;

    let (names, corr) = spearman_matrix(&state.archive);
    let mut table = hash_line(&hash);
    let _ = writeln!(table, ",{}", names.join(","));
    for (name, row) in names.iter().zip(&corr) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(table, "{name},{}", cells.join(","));
    }
    write_file(&out, "correlations.csv", &table)?;
    Ok(())
}

fn cmd_transfer(from: &Path, common: &Common) -> Result<(), CliError> {
    let source = load_run(from)?;
    let mut cfg = load_config(common, true)?;
    let out = require_out(common)?;
    prepare_out(out, common.force)?;
    let genomes: Vec<Genome> = source.result().iter().map(|a| a.genome).collect();
    let dist = mine_frequencies(&genomes, &cfg.space.space())?;
    let dist_path = out.join("distribution.json");
    dist.save(&dist_path)?;
    write_file(out, "frequencies.csv", &format!("{}{}", hash_line(&source.config.hash()), dist.to_csv()))?;
    cfg.transfer_from = Some(dist_path);
    drive(Search::new(cfg)?, out)?;
    Ok(())
}

fn cmd_resume(run: &Path, budget: Option<usize>, force: bool) -> Result<(), CliError> {
    let mut state = load_run(run)?;
    if state.is_finished() && !force {
        return Err(CliError::Usage(format!("{} is a completed run; pass --force to change it", run.display())));
    }
    if let Some(b) = budget {
        set_budget(&mut state.config, b)?;
        if state.config.iterations < state.completed_iterations {
            return Err(CliError::Usage(format!("budget {b} is below the evaluations already spent")));
        }
    }
    let evaluator = state.config.evaluator.build()?;
    drive(Search::from_state(state, evaluator)?, run)?;
    Ok(())
}

fn cmd_eval_stub(args: StubArgs) -> Result<(), CliError> {
    stub::exit_on_sigterm();
    let opts = stub::StubOptions {
        synthetic: SyntheticConfig {
            variant: args.variant,
            noise_sigma: args.noise_sigma,
            noise_seed: args.noise_seed,
            landscape_seed: args.landscape_seed,
        },
        constant: args.constant,
        shuffle: args.shuffle,
        shuffle_seed: args.shuffle_seed,
        drop_once: args.drop_once,
        drop_always: args.drop_always,
        crash_marker: args.crash_marker,
    };
    let stdout = std::io::stdout();
    stub::serve(std::io::stdin(), stdout.lock(), &opts).map_err(|e| io_err(Path::new("stdio"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Driver(DriverError::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(EvalError::Timeout(3)).exit_code(), 3);
        assert_eq!(CliError::Driver(DriverError::CorruptCheckpoint("x".into())).exit_code(), 4);
        assert_eq!(CliError::MissingRunArtifacts("x".into()).exit_code(), 4);
        let json: serde_json::Value = serde_json::from_str(&CliError::Usage("bad".into()).to_json()).unwrap();
        assert_eq!(json["error"], "usage");
    }

    #[test]
    fn budget_rounds_to_whole_batches() {
        let mut cfg = RunConfig::default();
        set_budget(&mut cfg, 350).unwrap();
        assert_eq!(cfg.iterations, 31);
        assert_eq!(cfg.budget(), 348);
        assert!(set_budget(&mut cfg, 50).is_err());
    }

    #[test]
    fn median_of_reduced_space() {
        let space = SearchSpace::reduced();
        let m = median_complexity(&space, &ComplexityConfig::default(), Objective::Madds, 0);
        let all: Vec<u64> = space.enumerate(1 << 20).unwrap().map(|g| ComplexityConfig::default().complexity(&g).madds).collect();
        let below = all.iter().filter(|&&v| (v as f64) < m).count();
        let above = all.iter().filter(|&&v| (v as f64) > m).count();
        assert!(below <= all.len() / 2 && above <= all.len() / 2);
    }

    #[test]
    fn out_dir_collision_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x"), "").unwrap();
        assert!(matches!(prepare_out(dir.path(), false), Err(CliError::Usage(_))));
        prepare_out(dir.path(), true).unwrap();
        prepare_out(&dir.path().join("fresh"), false).unwrap();
    }
}
