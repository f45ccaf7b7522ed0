use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sigcausal::bench::{run_benchmark, simulate_family, BackendKind, ExperimentConfig};
use sigcausal::ci::{CiMethod, TestResult};
use sigcausal::discovery::{
    run, Algorithm, CiQuery, DiscoveredGraph, DiscoveryConfig, MedianScope, OracleBackend, Relation, RemovalMode,
    StatConfig, StatisticalBackend,
};
use sigcausal::graph::{GraphJson, MixedGraphJson};
use sigcausal::kernel::Lifting;
use sigcausal::paths::PathSample;
use sigcausal::sde::{Family, FamilyOptions, GeneratorSpec, SimConfig};
use sigcausal::Error;

#[derive(Parser)]
#[command(name = "sigcausal", version, about = "Causal discovery for multivariate stochastic processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark family and write sample, truth and generator spec.
    Simulate(SimulateArgs),
    /// Run one conditional-independence test on a path sample.
    TestCi(TestCiArgs),
    /// Run a discovery algorithm on a sample, or on a truth graph as oracle.
    Discover(DiscoverArgs),
    /// Multi-seed sweep: simulate, discover and score.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 200)]
    n_paths: usize,
    #[arg(long, default_value_t = 128)]
    n_steps: usize,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    edge_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    hurst: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LiftingArg {
    Rbf,
    Euclidean,
}

#[derive(Args, Clone)]
struct StatArgs {
    /// Conditional test.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    n_null: Option<usize>,
    #[arg(long)]
    b_outer: Option<usize>,
    #[arg(long)]
    n_perm: Option<usize>,
    /// Dyadic refinement of the signature-kernel solver.
    #[arg(long)]
    refinement: Option<u32>,
    #[arg(long, value_enum)]
    lifting: Option<LiftingArg>,
    /// Fixed RBF bandwidth; the median heuristic is used otherwise.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Take the median heuristic per segment instead of over the whole sample.
    #[arg(long)]
    median_per_segment: bool,
    /// Do not append time as an extra channel.
    #[arg(long)]
    no_time: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sdcit,
    Kcipt,
}

impl StatArgs {
    fn apply(&self, cfg: &mut StatConfig) {
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::Sdcit => CiMethod::Sdcit,
                MethodArg::Kcipt => CiMethod::Kcipt,
            };
        }
        if let Some(v) = self.n_null {
            cfg.test.n_null = v;
        }
        if let Some(v) = self.b_outer {
            cfg.test.b_outer = v;
        }
        if let Some(v) = self.n_perm {
            cfg.test.n_perm = v;
        }
        if let Some(r) = self.refinement {
            cfg.kernel.refinement = r;
        }
        match (self.lifting, self.bandwidth) {
            (Some(LiftingArg::Euclidean), _) => {
                cfg.kernel.lifting = Lifting::Euclidean;
                cfg.median_heuristic = false;
            }
            (_, Some(bw)) => {
                cfg.kernel.lifting = Lifting::Rbf { bandwidth: bw };
                cfg.median_heuristic = false;
            }
            (Some(LiftingArg::Rbf), None) => {
                cfg.kernel.lifting = Lifting::Rbf { bandwidth: 1.0 };
                cfg.median_heuristic = true;
            }
            (None, None) => {}
        }
        if self.median_per_segment {
            cfg.median_scope = MedianScope::Segment;
        }
        if self.no_time {
            cfg.kernel.add_time = false;
        }
    }
}

#[derive(Args)]
struct TestCiArgs {
    /// Path sample (JSON lines, or long CSV when the name ends in .csv).
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    relation: String,
    #[arg(long)]
    i: usize,
    /// Second variable; defaults to `i` for the self relation.
    #[arg(long)]
    j: Option<usize>,
    /// Conditioning variables, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    s: f64,
    #[arg(long, default_value_t = 0.9)]
    h: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep the null samples in the output.
    #[arg(long)]
    with_null: bool,
    #[command(flatten)]
    stat: StatArgs,
}

#[derive(Args)]
struct DiscoverArgs {
    /// Path sample; statistical mode.
    #[arg(long, conflicts_with = "truth", required_unless_present = "truth")]
    sample: Option<PathBuf>,
    /// Truth graph JSON; oracle mode.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Observed nodes of the truth graph (oracle mode), comma separated.
    #[arg(long, value_delimiter = ',')]
    observed: Vec<usize>,
    #[arg(long, default_value = "alg1")]
    algorithm: String,
    /// DiscoveryConfig JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Let the config file override flags.
    #[arg(long)]
    config_precedence: bool,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_cond_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    removal: Option<RemovalArg>,
    /// Directory for graph.json and queries.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    stat: StatArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum RemovalArg {
    Eager,
    Batched,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// ExperimentConfig JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Let the config file override flags.
    #[arg(long)]
    config_precedence: bool,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    n_steps: Option<usize>,
    /// Seeds as `a..b` or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    /// Algorithms, comma separated.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print SHD multiplied by 100.
    #[arg(long)]
    x100: bool,
    #[command(flatten)]
    stat: StatArgs,
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_io() => 4,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => {
                let mut msg = e.to_string();
                let mut src = std::error::Error::source(e);
                while let Some(s) = src {
                    msg.push_str(&format!(": {s}"));
                    src = s.source();
                }
                msg
            }
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn open(path: &Path) -> CliResult<File> {
    File::open(path)
        .map_err(|e| CliError::Core(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn read_sample(path: &Path) -> CliResult<PathSample> {
    let f = open(path)?;
    let sample = if path.extension().is_some_and(|e| e == "csv") {
        PathSample::read_long_csv(f)?
    } else {
        PathSample::read_jsonl(BufReader::new(f))?
    };
    Ok(sample)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?)).map_err(Error::from)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct SpecFile<'a> {
    family: Family,
    sim: &'a SimConfig,
    generator: &'a GeneratorSpec,
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let family: Family = parse(&a.family)?;
    let sim = SimConfig { n_paths: a.n_paths, n_steps: a.n_steps, horizon: a.horizon, seed: a.seed };
    let d = if family.is_bivariate() { 2 } else { a.d };
    let opts = FamilyOptions { d, edge_prob: a.edge_prob, hurst: a.hurst };
    let out = simulate_family(family, &opts, &sim)?;
    std::fs::create_dir_all(&a.out)?;
    let mut w = BufWriter::new(File::create(a.out.join("sample.jsonl"))?);
    out.sample.write_jsonl(&mut w)?;
    w.flush()?;
    write_json(&a.out.join("truth.json"), &GraphJson::from(out.truth.as_digraph()))?;
    write_json(&a.out.join("spec.json"), &SpecFile { family, sim: &sim, generator: &out.spec })?;
    println!("wrote {} paths of {} variables to {}", out.sample.len(), out.sample.num_vars(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TestCiOutput {
    query: CiQuery,
    independent: bool,
    #[serde(flatten)]
    result: TestResult,
}

fn cmd_test_ci(a: TestCiArgs) -> CliResult<()> {
    let relation: Relation = parse(&a.relation)?;
    let j = match (a.j, relation) {
        (Some(j), _) => j,
        (None, Relation::SelfLoop) => a.i,
        (None, _) => return Err(CliError::Usage("--j is required for this relation".into())),
    };
    let sample = read_sample(&a.sample)?;
    let mut cfg = StatConfig::default();
    cfg.test.alpha = a.alpha;
    cfg.test.seed = a.seed;
    a.stat.apply(&mut cfg);
    let bk = StatisticalBackend::new(sample, cfg)?;
    let q = CiQuery::new(relation, a.i, j, a.k, a.s, a.h);
    let mut result = bk.run_test(&q)?;
    if !a.with_null {
        result.null_samples.clear();
    }
    let out = TestCiOutput { independent: result.p_value >= a.alpha, query: q, result };
    println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
    Ok(())
}

fn discovery_config(a: &DiscoverArgs) -> CliResult<DiscoveryConfig> {
    let file: Option<DiscoveryConfig> = a.config.as_deref().map(read_json).transpose()?;
    let mut cfg = file.clone().unwrap_or_default();
    if let Some(v) = a.s {
        cfg.s = v;
    }
    if let Some(v) = a.h {
        cfg.h = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if a.max_cond_size.is_some() {
        cfg.max_cond_size = a.max_cond_size;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(r) = a.removal {
        cfg.removal = match r {
            RemovalArg::Eager => RemovalMode::Eager,
            RemovalArg::Batched => RemovalMode::Batched,
        };
    }
    match (a.config_precedence, file) {
        (true, Some(f)) => Ok(f),
        _ => Ok(cfg),
    }
}

fn cmd_discover(a: DiscoverArgs) -> CliResult<()> {
    let algorithm: Algorithm = parse(&a.algorithm)?;
    let cfg = discovery_config(&a)?;
    let result = if let Some(path) = &a.truth {
        let truth = read_json::<GraphJson>(path)?.to_dag()?;
        let bk = if a.observed.is_empty() {
            OracleBackend::new(truth)
        } else {
            OracleBackend::with_observed(truth, a.observed.clone())?
        };
        run(algorithm, &bk, &cfg)?
    } else {
        let sample = read_sample(a.sample.as_deref().expect("clap enforces --sample or --truth"))?;
        let mut sc = StatConfig::default();
        sc.test.alpha = cfg.alpha;
        sc.test.seed = cfg.seed;
        a.stat.apply(&mut sc);
        let bk = StatisticalBackend::new(sample, sc)?;
        run(algorithm, &bk, &cfg)?
    };
    let graph_json = match &result.graph {
        DiscoveredGraph::Directed(g) => serde_json::to_value(GraphJson::from(g)),
        DiscoveredGraph::Mixed(m) => serde_json::to_value(MixedGraphJson::from(m)),
    }
    .map_err(Error::from)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("graph.json"), &graph_json)?;
        let mut w = BufWriter::new(File::create(dir.join("queries.jsonl"))?);
        for rec in &result.log {
            serde_json::to_writer(&mut w, rec).map_err(Error::from)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    println!("{}", serde_json::to_string(&graph_json).map_err(Error::from)?);
    eprintln!("{} CI queries", result.log.len());
    Ok(())
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("cannot parse seeds '{s}' (use a..b or a,b,c)"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn cmd_benchmark(a: BenchmarkArgs) -> CliResult<()> {
    let file: Option<ExperimentConfig> = a.config.as_deref().map(read_json).transpose()?;
    let mut cfg = file.clone().unwrap_or_default();
    if let Some(f) = &a.family {
        cfg.family = parse(f)?;
    }
    if let Some(d) = a.d {
        cfg.d = d;
    }
    if let Some(n) = a.n_paths {
        cfg.n_paths = n;
    }
    if let Some(n) = a.n_steps {
        cfg.n_steps = n;
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if !a.algorithms.is_empty() {
        cfg.algorithms = a.algorithms.iter().map(|s| parse(s)).collect::<CliResult<_>>()?;
    }
    if a.oracle {
        cfg.backend = BackendKind::Oracle;
    }
    if a.out.is_some() {
        cfg.output_dir = a.out.clone();
    }
    a.stat.apply(&mut cfg.stat);
    if let (true, Some(f)) = (a.config_precedence, file) {
        cfg = f;
    }
    if cfg.seeds.is_empty() {
        return Err(CliError::Usage("benchmark needs at least one seed".into()));
    }
    let report = run_benchmark(&cfg)?;
    print!("{}", report.summary(a.x100));
    Ok(())
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("SIGCAUSAL_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SIGCAUSAL_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::TestCi(a) => cmd_test_ci(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
