//! Benchmark sweeps: simulate, discover, score against the truth.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discovery::{
    run, Algorithm, DiscoveredGraph, DiscoveryConfig, OracleBackend, StatConfig, StatisticalBackend,
};
use crate::error::{Error, Result};
use crate::graph::{shd, shd_without_loops, Dag, GraphJson};
use crate::paths::PathSample;
use crate::rng::{substream, tag};
use crate::sde::{sample_params, Family, FamilyOptions, GeneratorSpec, SimConfig};

/// Which backend answers the CI queries of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Statistical,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub d: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    #[serde(default)]
    pub stat: StatConfig,
    #[serde(default = "half")]
    pub edge_prob: f64,
    #[serde(default = "half")]
    pub hurst: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: Family::CausalDiscovery,
            d: 3,
            n_paths: 200,
            n_steps: 64,
            horizon: 1.0,
            seeds: (0..40).collect(),
            algorithms: vec![Algorithm::PcInit],
            backend: BackendKind::Statistical,
            discovery: DiscoveryConfig::default(),
            stat: StatConfig::default(),
            edge_prob: 0.5,
            hurst: 0.5,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidDiscoveryConfig("experiment needs at least one seed".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidDiscoveryConfig("experiment needs at least one algorithm".into()));
        }
        if self.family.is_bivariate() && self.d != 2 {
            return Err(Error::InvalidSpec(format!("family {} is bivariate, got d = {}", self.family, self.d)));
        }
        if self.d < 2 || self.n_paths < 2 || self.n_steps == 0 {
            return Err(Error::InvalidSpec("need d >= 2, n_paths >= 2 and n_steps >= 1".into()));
        }
        self.discovery.validate(self.horizon)
    }

    pub fn family_options(&self) -> FamilyOptions {
        FamilyOptions { d: self.d, edge_prob: self.edge_prob, hurst: self.hurst }
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig { n_paths: self.n_paths, n_steps: self.n_steps, horizon: self.horizon, seed }
    }
}

/// A simulated data set with its generator and ground truth.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub spec: GeneratorSpec,
    pub sample: PathSample,
    pub truth: Dag,
}

/// Draws the generator for `seed` and simulates it; deterministic per seed.
pub fn simulate_family(family: Family, opts: &FamilyOptions, cfg: &SimConfig) -> Result<Simulation> {
    let mut rng = substream(cfg.seed, tag::PARAMS, 0);
    let spec = sample_params(family, opts, &mut rng)?;
    let sample = spec.simulate(cfg)?;
    let truth = spec.truth()?;
    Ok(Simulation { spec, sample, truth })
}

/// One (seed, algorithm) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub family: Family,
    pub d: usize,
    pub algorithm: Algorithm,
    /// SHD including loops; `None` when the row failed.
    pub shd: Option<usize>,
    /// SHD over off-diagonal entries.
    pub shd_offdiag: Option<usize>,
    pub nshd: Option<f64>,
    pub queries: usize,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<GraphJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphJson>,
}

impl BenchRow {
    /// Recomputes `(shd, shd_offdiag)` from the stored graphs.
    pub fn recompute_shd(&self) -> Result<Option<(usize, usize)>> {
        let (Some(t), Some(g)) = (&self.truth, &self.graph) else { return Ok(None) };
        let (t, g) = (t.to_digraph()?, g.to_digraph()?);
        Ok(Some((shd(&g, &t)?, shd_without_loops(&g, &t)?)))
    }
}

#[derive(Debug, Clone, Serialize)]
struct CsvRow<'a> {
    seed: u64,
    family: &'a str,
    d: usize,
    algorithm: &'a str,
    shd: Option<usize>,
    shd_offdiag: Option<usize>,
    nshd: Option<f64>,
    queries: usize,
    error: &'a str,
}

/// Mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, se, n })
    }

    /// `mean ± se`, optionally multiplied by 100.
    pub fn display(&self, scale100: bool) -> String {
        let k = if scale100 { 100.0 } else { 1.0 };
        format!("{:.2} ± {:.2}", self.mean * k, self.se * k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub shd: Option<MeanSe>,
    pub shd_offdiag: Option<MeanSe>,
    pub nshd: Option<MeanSe>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: ExperimentConfig,
    pub rows: Vec<BenchRow>,
    pub aggregate: Vec<Aggregate>,
}

impl BenchmarkReport {
    pub fn from_rows(config: ExperimentConfig, rows: Vec<BenchRow>) -> Self {
        let aggregate = aggregate(&config.algorithms, &rows);
        Self { config, rows, aggregate }
    }

    /// Per-row CSV. Wall time is left out so reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(CsvRow {
                seed: r.seed,
                family: r.family.name(),
                d: r.d,
                algorithm: r.algorithm.name(),
                shd: r.shd,
                shd_offdiag: r.shd_offdiag,
                nshd: r.nshd,
                queries: r.queries,
                error: r.error.as_deref().unwrap_or(""),
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text summary, one line per algorithm.
    pub fn summary(&self, scale100: bool) -> String {
        let unit = if scale100 { " (x100)" } else { "" };
        let mut s = format!("{:<10} {:>18} {:>18} {:>9}\n", "algorithm", format!("SHD{unit}"), "nSHD", "failures");
        for a in &self.aggregate {
            let f = |m: Option<MeanSe>, k: bool| m.map_or_else(|| "-".to_string(), |m| m.display(k));
            s.push_str(&format!(
                "{:<10} {:>18} {:>18} {:>9}\n",
                a.algorithm.name(),
                f(a.shd, scale100),
                f(a.nshd, false),
                a.failures
            ));
        }
        s
    }

    /// Writes `rows.csv` and `report.json` into `dir`.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("rows.csv"))?)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        Ok(())
    }
}

/// Per-algorithm mean ± standard error over successful rows.
pub fn aggregate(algorithms: &[Algorithm], rows: &[BenchRow]) -> Vec<Aggregate> {
    let mut by: BTreeMap<usize, Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        if let Some(p) = algorithms.iter().position(|a| *a == r.algorithm) {
            by.entry(p).or_default().push(r);
        }
    }
    algorithms
        .iter()
        .enumerate()
        .map(|(p, &algorithm)| {
            let rs = by.get(&p).map(Vec::as_slice).unwrap_or(&[]);
            let col =
                |f: &dyn Fn(&BenchRow) -> Option<f64>| MeanSe::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            Aggregate {
                algorithm,
                shd: col(&|r| r.shd.map(|v| v as f64)),
                shd_offdiag: col(&|r| r.shd_offdiag.map(|v| v as f64)),
                nshd: col(&|r| r.nshd),
                failures: rs.iter().filter(|r| r.error.is_some()).count(),
            }
        })
        .collect()
}

fn score(
    algorithm: Algorithm,
    graph: &DiscoveredGraph,
    truth: &Dag,
) -> Result<(usize, usize, f64, GraphJson, GraphJson)> {
    // MAG output carries no loops; score it against the loop-free truth
    let t = if algorithm == Algorithm::Fci { truth.without_loops() } else { truth.clone() };
    let (t, g) = (t.as_digraph(), graph.to_digraph());
    let full = shd(&g, t)?;
    let off = shd_without_loops(&g, t)?;
    let d = t.d();
    Ok((full, off, full as f64 / (d * d) as f64, GraphJson::from(t), GraphJson::from(&g)))
}

fn failed_row(cfg: &ExperimentConfig, seed: u64, algorithm: Algorithm, e: &Error) -> BenchRow {
    BenchRow {
        seed,
        family: cfg.family,
        d: cfg.d,
        algorithm,
        shd: None,
        shd_offdiag: None,
        nshd: None,
        queries: 0,
        wall_ms: 0,
        error: Some(e.to_string()),
        truth: None,
        graph: None,
    }
}

/// All rows of one seed: one simulation shared by every algorithm.
fn seed_rows(cfg: &ExperimentConfig, seed: u64) -> Vec<BenchRow> {
    let sim = match simulate_family(cfg.family, &cfg.family_options(), &cfg.sim_config(seed)) {
        Ok(s) => s,
        Err(e) => return cfg.algorithms.iter().map(|&a| failed_row(cfg, seed, a, &e)).collect(),
    };
    let dcfg = DiscoveryConfig { seed, ..cfg.discovery.clone() };
    let stat = match cfg.backend {
        BackendKind::Statistical => {
            let mut sc = cfg.stat.clone();
            sc.test.seed = seed;
            match StatisticalBackend::new(sim.sample.clone(), sc) {
                Ok(b) => Some(b),
                Err(e) => return cfg.algorithms.iter().map(|&a| failed_row(cfg, seed, a, &e)).collect(),
            }
        }
        BackendKind::Oracle => None,
    };
    let oracle = OracleBackend::new(sim.truth.clone());
    cfg.algorithms
        .iter()
        .map(|&alg| {
            let t0 = Instant::now();
            let res = match &stat {
                Some(b) => run(alg, b, &dcfg),
                None => run(alg, &oracle, &dcfg),
            };
            let wall_ms = t0.elapsed().as_millis() as u64;
            match res.and_then(|r| Ok((r.log.len(), score(alg, &r.graph, &sim.truth)?))) {
                Ok((queries, (full, off, n, truth, graph))) => BenchRow {
                    seed,
                    family: cfg.family,
                    d: cfg.d,
                    algorithm: alg,
                    shd: Some(full),
                    shd_offdiag: Some(off),
                    nshd: Some(n),
                    queries,
                    wall_ms,
                    error: None,
                    truth: Some(truth),
                    graph: Some(graph),
                },
                Err(e) => BenchRow { wall_ms, ..failed_row(cfg, seed, alg, &e) },
            }
        })
        .collect()
}

/// Runs the sweep (seeds in parallel); rows come back in (seed, algorithm)
/// order. Failures are recorded per row and do not stop the sweep.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let rows: Vec<BenchRow> = cfg.seeds.par_iter().flat_map_iter(|&s| seed_rows(cfg, s)).collect();
    let report = BenchmarkReport::from_rows(cfg.clone(), rows);
    if let Some(dir) = &cfg.output_dir {
        report.write_to_dir(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::TestConfig;

    fn oracle_cfg() -> ExperimentConfig {
        ExperimentConfig {
            family: Family::CausalDiscovery,
            d: 5,
            n_paths: 4,
            n_steps: 8,
            seeds: (0..12).collect(),
            algorithms: vec![Algorithm::Alg1, Algorithm::PcInit, Algorithm::Robust, Algorithm::Fci],
            backend: BackendKind::Oracle,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn oracle_sweep_scores_zero() {
        let r = run_benchmark(&oracle_cfg()).unwrap();
        assert_eq!(r.rows.len(), 48);
        assert!(r.rows.iter().all(|row| row.shd == Some(0)), "{:?}", r.rows);
        for a in &r.aggregate {
            assert_eq!(a.shd.unwrap().mean, 0.0);
            assert_eq!(a.failures, 0);
        }
    }

    #[test]
    fn rows_recompute_and_aggregate_is_consistent() {
        let mut cfg = oracle_cfg();
        cfg.backend = BackendKind::Statistical;
        cfg.d = 3;
        cfg.n_paths = 20;
        cfg.seeds = vec![1, 2, 3];
        cfg.algorithms = vec![Algorithm::Alg1, Algorithm::PcInit];
        cfg.stat.test = TestConfig { n_null: 50, ..TestConfig::default() };
        let r = run_benchmark(&cfg).unwrap();
        for row in &r.rows {
            let (s, o) = row.recompute_shd().unwrap().unwrap();
            assert_eq!(Some(s), row.shd);
            assert_eq!(Some(o), row.shd_offdiag);
        }
        let again = BenchmarkReport::from_rows(cfg.clone(), r.rows.clone());
        assert_eq!(again.aggregate, r.aggregate);
        let mut a = Vec::new();
        let mut b = Vec::new();
        r.write_csv(&mut a).unwrap();
        run_benchmark(&cfg).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("seed,family,d,algorithm,shd,shd_offdiag,nshd,queries,error"));
    }

    #[test]
    fn zero_seeds_is_rejected() {
        let cfg = ExperimentConfig { seeds: vec![], ..oracle_cfg() };
        assert!(run_benchmark(&cfg).is_err());
        let cfg = ExperimentConfig { family: Family::LinearDrift, d: 3, ..oracle_cfg() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn failures_are_recorded_per_row() {
        let mut cfg = oracle_cfg();
        cfg.discovery.max_cond_size = Some(0);
        cfg.algorithms = vec![Algorithm::Robust];
        cfg.edge_prob = 0.9;
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), cfg.seeds.len());
        assert!(r.aggregate[0].failures > 0);
        assert!(r.rows.iter().filter(|row| row.error.is_some()).all(|row| row.shd.is_none() && row.graph.is_none()));
    }

    #[test]
    fn mean_se_and_display() {
        let m = MeanSe::of(&[0.1, 0.3]).unwrap();
        assert!((m.mean - 0.2).abs() < 1e-12);
        assert!((m.se - 0.1).abs() < 1e-12);
        assert_eq!(m.display(true), "20.00 ± 10.00");
        assert!(MeanSe::of(&[]).is_none());
    }

    #[test]
    fn report_json_round_trips() {
        let r = run_benchmark(&ExperimentConfig { seeds: vec![7], ..oracle_cfg() }).unwrap();
        let back: BenchmarkReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.summary(true).contains("pc-init"));
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = SimConfig::new(5, 16, 11);
        let a = simulate_family(Family::LinearDrift, &FamilyOptions::default(), &cfg).unwrap();
        let b = simulate_family(Family::LinearDrift, &FamilyOptions::default(), &cfg).unwrap();
        assert_eq!(a.sample, b.sample);
        assert!(a.truth.has_edge(0, 1));
    }
}
