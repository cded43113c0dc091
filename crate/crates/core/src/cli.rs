//! The `netmix` command line.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when the run itself fails.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;

use crate::candidates::build_candidates_with;
use crate::error::{Error, Result};
use crate::evaluate::{
    linkpred_split, median, run_sweep, ExperimentConfig, ExperimentReport, LinkPredRow, SweepAxis,
    CSV_HEADER,
};
use crate::graph::{load_edge_list, EdgeListLoad, ProbMatrix};
use crate::mixing::{MixReport, Strategy};
use crate::pipeline::{estimate, estimate_each, PipelineConfig};
use crate::rng::derive_seed;
use crate::simulate::{sample_adjacency, truth_matrix, ModelKind, ModelSpec};

pub const SEED_ENV: &str = "NETMIX_SEED";

#[derive(Parser, Debug)]
#[command(name = "netmix", version, about = "Estimate network edge probabilities by mixing candidate models")]
struct Cli {
    /// Master seed for all randomness [default: $NETMIX_SEED, else 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads, 0 for one per core; results do not depend on it
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// File of `key = value` lines used as defaults; explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a ground-truth probability matrix and optionally sample a graph from it
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Fit the candidate catalog to an edge list and mix it
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Run simulation benchmarks and emit tidy CSV
    #[command(args_override_self = true)]
    Benchmark(BenchmarkArgs),
    /// Hide random dyads, fit on the rest, and report predictive AUC
    #[command(args_override_self = true)]
    Linkpred(LinkpredArgs),
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Clone, Serialize)]
struct FitArgs {
    /// Largest block count in the candidate catalog
    #[arg(long, default_value_t = 15)]
    kmax: usize,

    /// Probability that a dyad is held out for weight estimation
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,

    /// USVT rank [default: ceil(n^(1/3))]
    #[arg(long)]
    usvt_rank: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ModelArgs {
    /// graphon1, graphon2, graphon3, sbm6 or lsm
    #[arg(long, value_parser = parse_model, default_value = "graphon1")]
    model: ModelKind,

    /// Number of nodes
    #[arg(long = "n", default_value_t = 500)]
    n: usize,

    /// Target expected average degree
    #[arg(long, default_value_t = 20.0)]
    degree: f64,

    /// Latent dimension of the latent space model
    #[arg(long, default_value_t = 4)]
    latent_dim: usize,

    /// Draw graphon positions uniformly instead of on a fixed grid
    #[arg(long)]
    random_latents: bool,
}

impl ModelArgs {
    fn spec(&self, seed: u64) -> ModelSpec {
        ModelSpec {
            latent_dim: self.latent_dim,
            random_latents: self.random_latents,
            ..ModelSpec::new(self.model, self.n, self.degree, seed)
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,

    /// Output path for P; `.csv` writes text, anything else the binary format
    #[arg(long)]
    out: PathBuf,

    /// Also sample an adjacency matrix and write it as an edge list
    #[arg(long, value_name = "PATH")]
    graph_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GraphArgs {
    /// Edge list: one `i j` pair of 0-based node indices per line
    #[arg(long)]
    graph: PathBuf,

    /// Node count [default: from a `# nodes N` header, else 1 + largest index]
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArgs,

    #[command(flatten)]
    #[serde(flatten)]
    fit: FitArgs,

    /// Mixing strategy: ecv, exp, ols or nnl
    #[arg(long, value_parser = parse_strategy, default_value = "nnl")]
    mixer: Strategy,

    /// Independent hold-out splits whose statistics are averaged
    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// Repeat with the roles of the two halves swapped and stitch the estimates
    #[arg(long)]
    stitch: bool,

    /// Result JSON path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the combined matrix (`.csv` or binary)
    #[arg(long, value_name = "PATH")]
    estimate_out: Option<PathBuf>,

    /// Export every candidate of the first split as binary plus JSON manifest
    #[arg(long, value_name = "DIR")]
    candidates_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct BenchmarkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,

    #[command(flatten)]
    #[serde(flatten)]
    fit: FitArgs,

    /// Strategies to score, comma separated
    #[arg(long, value_parser = parse_strategy, value_delimiter = ',', action = ArgAction::Set, default_value = "ecv,exp,ols,nnl")]
    mixer: Vec<Strategy>,

    /// Repetitions per configuration
    #[arg(long, default_value_t = 10)]
    reps: usize,

    /// Sweep one axis, e.g. `degree=5,15,25,35,45`, `kmax=5,10`, `holdout=0.05,0.1` or `n=300,500`
    #[arg(long, value_name = "AXIS=V1,V2,..")]
    sweep: Option<String>,

    /// Tidy CSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the full nested reports as JSON
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Record wall time per repetition (makes output run-dependent)
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
struct LinkpredArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArgs,

    #[command(flatten)]
    #[serde(flatten)]
    fit: FitArgs,

    /// Strategies to score, comma separated
    #[arg(long, value_parser = parse_strategy, value_delimiter = ',', action = ArgAction::Set, default_value = "ecv,exp,ols,nnl")]
    mixer: Vec<Strategy>,

    /// Fraction of all dyads sampled as the test set
    #[arg(long, default_value_t = 0.1)]
    frac: f64,

    /// Maximum number of test dyads
    #[arg(long, default_value_t = crate::evaluate::DEFAULT_TEST_CAP)]
    cap: usize,

    /// Independent test splits
    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// CSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Resolved configuration written into every output.
#[derive(Serialize)]
struct Recorded<'a, T: Serialize> {
    command: &'static str,
    seed: u64,
    #[serde(flatten)]
    args: &'a T,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(ConfigError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
        Err(ConfigError::Io(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return 0;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for(&argv));
            }
            return 1;
        }
    };
    let seed = match resolve_seed(cli.seed) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli.command, seed)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Usage line of the subcommand named in `argv`, or of the top level.
fn usage_for(argv: &[String]) -> clap::builder::StyledStr {
    let mut cmd = Cli::command();
    cmd.build();
    let name = argv.iter().skip(1).find(|a| cmd.find_subcommand(a.as_str()).is_some()).cloned();
    match name.and_then(|n| cmd.find_subcommand_mut(&n).map(|c| c.render_usage())) {
        Some(u) => u,
        None => cmd.render_usage(),
    }
}

fn resolve_seed(flag: Option<u64>) -> std::result::Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

enum ConfigError {
    Usage(String),
    Io(io::Error),
}

const SUBCOMMANDS: [&str; 4] = ["simulate", "estimate", "benchmark", "linkpred"];

/// Splices `--key value` pairs from a `--config` file in right after the
/// subcommand, so that flags given on the command line come later and win.
fn expand_config(argv: Vec<String>) -> std::result::Result<Vec<String>, ConfigError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(ConfigError::Io)?;
    let mut injected = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Usage(format!("{path}:{}: expected `key = value`", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(ConfigError::Usage(format!("{path}:{}: invalid key", lineno + 1)));
        }
        match value {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            v => {
                injected.push(format!("--{key}"));
                injected.push(v.to_string());
            }
        }
    }
    let at = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())).map_or(argv.len(), |i| i + 1);
    let mut out = argv[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

fn dispatch(cmd: &Command, seed: u64) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate_cmd(a, seed),
        Command::Estimate(a) => estimate_cmd(a, seed),
        Command::Benchmark(a) => benchmark_cmd(a, seed),
        Command::Linkpred(a) => linkpred_cmd(a, seed),
    }
}

fn config_json<T: Serialize>(command: &'static str, seed: u64, args: &T) -> Result<String> {
    Ok(serde_json::to_string(&Recorded { command, seed, args })?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// CSV gets the config as a `#` header line; binary gets a JSON sidecar.
fn write_matrix(path: &Path, m: &ProbMatrix, config: &str) -> Result<()> {
    let mut w = create(path)?;
    if is_csv(path) {
        writeln!(w, "# netmix {config}")?;
        m.write_csv(&mut w)?;
    } else {
        m.write_binary(&mut w)?;
        let mut side = create(&sidecar(path))?;
        writeln!(side, "{config}")?;
        side.flush()?;
    }
    w.flush()?;
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_graph(a: &GraphArgs) -> Result<EdgeListLoad> {
    let file = File::open(&a.graph)?;
    let load = load_edge_list(BufReader::new(file), a.nodes)?;
    if load.duplicates_dropped > 0 {
        log::warn!("dropped {} duplicate edge(s)", load.duplicates_dropped);
    }
    Ok(load)
}

fn pipeline_config(fit: &FitArgs, strategy: Strategy, seed: u64) -> PipelineConfig {
    PipelineConfig { usvt_rank: fit.usvt_rank, ..PipelineConfig::new(fit.kmax, fit.holdout, strategy, seed) }
}

fn simulate_cmd(a: &SimulateArgs, seed: u64) -> Result<()> {
    let config = config_json("simulate", seed, a)?;
    let truth = truth_matrix(&a.model.spec(seed))?;
    write_matrix(&a.out, &truth, &config)?;
    if let Some(path) = &a.graph_out {
        let g = sample_adjacency(&truth, derive_seed(seed, "adjacency", 0))?;
        let mut w = create(path)?;
        writeln!(w, "# netmix {config}")?;
        g.write_edge_list(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GraphInfo {
    n: usize,
    edges: usize,
    self_loops_dropped: usize,
    duplicates_dropped: usize,
}

#[derive(Serialize)]
struct EstimateJson {
    config: serde_json::Value,
    graph: GraphInfo,
    #[serde(flatten)]
    result: MixReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    swapped: Option<MixReport>,
}

fn estimate_cmd(a: &EstimateArgs, seed: u64) -> Result<()> {
    let config = config_json("estimate", seed, a)?;
    let load = load_graph(&a.graph)?;
    let g = &load.graph;
    let cfg = PipelineConfig { reps: a.reps, stitch: a.stitch, ..pipeline_config(&a.fit, a.mixer, seed) };
    let out = estimate(g, &cfg)?;
    if let Some(path) = &a.estimate_out {
        write_matrix(path, &out.estimate, &config)?;
    }
    if let Some(dir) = &a.candidates_dir {
        fs::create_dir_all(dir)?;
        let mask = cfg.mask(g.n(), 0)?;
        for c in build_candidates_with(g, &mask, &cfg.candidate_options(0))? {
            let mut w = create(&dir.join(format!("{}.bin", c.label())))?;
            c.estimate.write_binary(&mut w)?;
            w.flush()?;
            fs::write(dir.join(format!("{}.json", c.label())), serde_json::to_string_pretty(&c.manifest())? + "\n")?;
        }
    }
    let json = EstimateJson {
        config: serde_json::from_str(&config)?,
        graph: GraphInfo {
            n: g.n(),
            edges: g.edge_count(),
            self_loops_dropped: load.self_loops_dropped,
            duplicates_dropped: load.duplicates_dropped,
        },
        result: out.mix.report(),
        swapped: out.swapped.as_ref().map(|s| s.report()),
    };
    let mut w = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &json)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn parse_sweep(s: &str) -> Result<SweepAxis> {
    let (axis, values) =
        s.split_once('=').ok_or_else(|| Error::domain(format!("sweep `{s}` should look like axis=v1,v2")))?;
    let list = values.split(',').map(str::trim).filter(|v| !v.is_empty());
    let bad = |v: &str| Error::domain(format!("sweep value `{v}` is not a number"));
    Ok(match axis.trim() {
        "degree" => SweepAxis::Degree(list.map(|v| v.parse().map_err(|_| bad(v))).collect::<Result<_>>()?),
        "holdout" | "p" => SweepAxis::Holdout(list.map(|v| v.parse().map_err(|_| bad(v))).collect::<Result<_>>()?),
        "kmax" => SweepAxis::Kmax(list.map(|v| v.parse().map_err(|_| bad(v))).collect::<Result<_>>()?),
        "n" => SweepAxis::N(list.map(|v| v.parse().map_err(|_| bad(v))).collect::<Result<_>>()?),
        other => return Err(Error::domain(format!("unknown sweep axis `{other}` (degree, holdout, kmax or n)"))),
    })
}

fn benchmark_cmd(a: &BenchmarkArgs, seed: u64) -> Result<()> {
    let config = config_json("benchmark", seed, a)?;
    let base = ExperimentConfig {
        kmax: a.fit.kmax,
        p: a.fit.holdout,
        strategies: a.mixer.clone(),
        reps: a.reps,
        seed,
        timing: a.timing,
        ..ExperimentConfig::new(a.model.spec(seed))
    };
    let reports: Vec<ExperimentReport> = match &a.sweep {
        Some(s) => run_sweep(&base, &parse_sweep(s)?)?,
        None => vec![crate::evaluate::run_experiment(&base)?],
    };
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "# netmix {config}")?;
    writeln!(w, "{CSV_HEADER}")?;
    for r in &reports {
        r.write_csv_rows(&mut w)?;
    }
    w.flush()?;
    if let Some(path) = &a.json {
        let mut j = create(path)?;
        let value = serde_json::json!({ "config": serde_json::from_str::<serde_json::Value>(&config)?, "reports": reports });
        serde_json::to_writer_pretty(&mut j, &value)?;
        writeln!(j)?;
        j.flush()?;
    }
    for r in &reports {
        let c = &r.config;
        for m in &r.medians {
            eprintln!(
                "{} n={} degree={} kmax={} p={} {}: median rel_frob {}",
                c.model.kind,
                c.model.n,
                c.model.target_degree,
                c.kmax,
                c.p,
                m.strategy,
                m.median_rel_frob.map_or("n/a".into(), |v| format!("{v:.4}"))
            );
        }
        for f in &r.failures {
            eprintln!("repetition {} failed: {}", f.rep, f.error);
        }
    }
    Ok(())
}

fn linkpred_cmd(a: &LinkpredArgs, seed: u64) -> Result<()> {
    let config = config_json("linkpred", seed, a)?;
    if a.reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    let g = load_graph(&a.graph)?.graph;
    let mut rows = Vec::new();
    for rep in 0..a.reps {
        let split = linkpred_split(&g, a.frac, a.cap, derive_seed(seed, "linkpred", rep as u64))?;
        let cfg = pipeline_config(&a.fit, Strategy::Nnl, derive_seed(seed, "fit", rep as u64));
        let positives = split.labels.iter().filter(|&&l| l).count();
        let mixes = estimate_each(&split.train_graph, &cfg, &a.mixer)?;
        for m in mixes {
            let scores = split.test_pairs.iter().map(|&(i, j)| m.estimate.get(i, j)).collect::<Vec<_>>();
            rows.push(LinkPredRow {
                rep,
                strategy: m.strategy,
                auc: crate::evaluate::auc(&scores, &split.labels).ok(),
                test_pairs: split.test_pairs.len(),
                positives,
            });
        }
    }
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "# netmix {config}")?;
    writeln!(w, "n,kmax,p,strategy,rep,auc,test_pairs,positives")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            g.n(),
            a.fit.kmax,
            a.fit.holdout,
            r.strategy,
            r.rep,
            r.auc.map(|v| v.to_string()).unwrap_or_default(),
            r.test_pairs,
            r.positives
        )?;
    }
    w.flush()?;
    for &s in &a.mixer {
        let aucs: Vec<f64> = rows.iter().filter(|r| r.strategy == s).filter_map(|r| r.auc).collect();
        eprintln!("{s}: median AUC {}", median(&aucs).map_or("n/a".into(), |v| format!("{v:.4}")));
    }
    Ok(())
}
