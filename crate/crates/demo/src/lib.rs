use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use sigcausal::bench::simulate_family;
use sigcausal::discovery::{run, Algorithm, DiscoveryConfig, OracleBackend};
use sigcausal::graph::{sample_er_dag, shd, GraphJson, MixedGraphJson};
use sigcausal::kernel::{sig_kernel_pde, KernelConfig};
use sigcausal::paths::{Path, TimeGrid};
use sigcausal::rng::from_seed;
use sigcausal::sde::{Family, FamilyOptions, SimConfig};

#[derive(Debug, Deserialize)]
struct KernelRequest {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    #[serde(default = "default_refinement")]
    refinement: u32,
}

fn default_refinement() -> u32 {
    2
}

#[derive(Debug, Serialize)]
pub struct SimulatedPaths {
    pub times: Vec<f64>,
    /// `values[path][var][step]`
    pub values: Vec<Vec<Vec<f64>>>,
    pub truth: GraphJson,
}

#[derive(Debug, Serialize)]
pub struct OracleRun {
    pub truth: GraphJson,
    pub found: serde_json::Value,
    pub queries: usize,
    pub shd: Option<usize>,
}

fn to_path(rows: &[Vec<f64>]) -> Result<Path, String> {
    if rows.len() < 2 {
        return Err("a path needs at least two points".into());
    }
    let n = rows.len() - 1;
    let grid = TimeGrid::uniform(n, 1.0).map_err(|e| e.to_string())?;
    Path::from_rows(grid, rows).map_err(|e| e.to_string())
}

/// Signature kernel of two piecewise-linear paths (rows of points, uniform
/// times on `[0, 1]`), euclidean lifting.
pub fn signature_kernel_json(request: &str) -> Result<f64, String> {
    let req: KernelRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let (x, y) = (to_path(&req.x)?, to_path(&req.y)?);
    let cfg = KernelConfig::euclidean().with_refinement(req.refinement);
    sig_kernel_pde(&x, &y, &cfg).map_err(|e| e.to_string())
}

/// A few paths of a benchmark family, arranged for plotting.
pub fn simulate_paths(
    family: &str,
    d: usize,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<SimulatedPaths, String> {
    let family: Family = family.parse().map_err(|e: sigcausal::Error| e.to_string())?;
    let d = if family.is_bivariate() { 2 } else { d };
    let opts = FamilyOptions { d, ..FamilyOptions::default() };
    let sim = simulate_family(family, &opts, &SimConfig::new(n_paths, n_steps, seed)).map_err(|e| e.to_string())?;
    let map = sim.sample.coord_map().clone();
    let times = sim.sample.paths()[0].times().to_vec();
    let values = sim
        .sample
        .paths()
        .iter()
        .map(|p| {
            map.vars()
                .map(|v| {
                    let c = map.columns(v).map(|r| r.start).unwrap_or(v);
                    p.column(c)
                })
                .collect()
        })
        .collect();
    Ok(SimulatedPaths { times, values, truth: GraphJson::from(sim.truth.as_digraph()) })
}

/// Random truth graph and the output of `algorithm` run against its
/// d-separation oracle.
pub fn oracle_discovery(algorithm: &str, d: usize, edge_prob: f64, seed: u64) -> Result<OracleRun, String> {
    let alg: Algorithm = algorithm.parse().map_err(|e: sigcausal::Error| e.to_string())?;
    if !(2..=10).contains(&d) {
        return Err("d must lie in 2..=10".into());
    }
    let loop_prob = if alg == Algorithm::Fci { 0.0 } else { 0.5 };
    let truth = sample_er_dag(d, edge_prob, loop_prob, &mut from_seed(seed));
    let bk = OracleBackend::new(truth.clone());
    let res = run(alg, &bk, &DiscoveryConfig::default()).map_err(|e| e.to_string())?;
    let (found, shd) = match &res.graph {
        sigcausal::discovery::DiscoveredGraph::Directed(g) => {
            (serde_json::to_value(GraphJson::from(g)), shd(g, truth.as_digraph()).ok())
        }
        sigcausal::discovery::DiscoveredGraph::Mixed(m) => (serde_json::to_value(MixedGraphJson::from(m)), None),
    };
    Ok(OracleRun {
        truth: GraphJson::from(truth.as_digraph()),
        found: found.map_err(|e| e.to_string())?,
        queries: res.log.len(),
        shd,
    })
}

fn to_js<T: Serialize>(v: &T) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = signatureKernel)]
pub fn signature_kernel(request: &str) -> Result<f64, JsValue> {
    signature_kernel_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate(family: &str, d: usize, n_paths: usize, n_steps: usize, seed: u64) -> Result<String, JsValue> {
    to_js(&simulate_paths(family, d, n_paths, n_steps, seed).map_err(|e| JsValue::from_str(&e))?)
}

#[wasm_bindgen(js_name = oracleDiscovery)]
pub fn oracle_discovery_js(algorithm: &str, d: usize, edge_prob: f64, seed: u64) -> Result<String, JsValue> {
    to_js(&oracle_discovery(algorithm, d, edge_prob, seed).map_err(|e| JsValue::from_str(&e))?)
}
