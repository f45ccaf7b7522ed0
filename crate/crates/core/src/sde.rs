//! Seeded generators for every data family: linear and nonlinear SDEs,
//! the hidden-integrator path-dependent system, fBM-driven pairs and the
//! functional-data generator.
//!
//! Every path draws from its own substream of the run seed, so samples are
//! bit-identical regardless of the number of worker threads.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_er_dag, Dag, DiGraph, DirectedGraph};
use crate::paths::{CoordMap, Path, PathSample, TimeGrid};
use crate::rng::{substream, tag, Rng};

/// Paths are aborted once any coordinate exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Per-coordinate law of the initial value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    Constant { value: Vec<f64> },
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
}

impl InitialLaw {
    /// Independent `N(0, 0.1^2)` per coordinate.
    pub fn default_for(d: usize) -> Self {
        Self::Gaussian { mean: vec![0.0; d], sd: vec![0.1; d] }
    }

    pub fn zeros(d: usize) -> Self {
        Self::Constant { value: vec![0.0; d] }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Constant { value } => value.len(),
            Self::Gaussian { mean, sd } if mean.len() == sd.len() => mean.len(),
            Self::Gaussian { .. } => usize::MAX,
        }
    }

    fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Self::Constant { value } => value.clone(),
            Self::Gaussian { mean, sd } => {
                mean.iter().zip(sd).map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal)).collect()
            }
        }
    }
}

/// Grid and sample size of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_paths: 200, n_steps: 128, horizon: 1.0, seed: 0 }
    }
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self { n_paths, n_steps, horizon: 1.0, seed }
    }

    fn grid(&self) -> Result<TimeGrid> {
        if self.n_steps < 2 {
            return Err(Error::InvalidSpec(format!("n_steps must be at least 2, got {}", self.n_steps)));
        }
        TimeGrid::uniform(self.n_steps, self.horizon)
    }
}

/// `dX = (A X + c) dt + diag(B X + d) dW`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSdeSpec {
    /// `a[j][i]` is the drift coefficient of `X^i` in the equation of `X^j`.
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub dvec: Vec<f64>,
    pub x0: InitialLaw,
}

impl LinearSdeSpec {
    /// All-zero system of dimension `d` with the default initial law.
    pub fn zeros(d: usize) -> Self {
        Self {
            a: vec![vec![0.0; d]; d],
            c: vec![0.0; d],
            b: vec![vec![0.0; d]; d],
            dvec: vec![0.0; d],
            x0: InitialLaw::default_for(d),
        }
    }

    pub fn d(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        let square = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if d == 0 || !square(&self.a) || !square(&self.b) || self.dvec.len() != d || self.x0.dim() != d {
            return Err(Error::InvalidSpec("inconsistent dimensions in linear SDE".into()));
        }
        let all = self.a.iter().chain(&self.b).flatten().chain(&self.c).chain(&self.dvec);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Graph with `i -> j` iff `X^i` enters the drift or diffusion of `X^j`.
    pub fn dependence_graph(&self) -> Result<Dag> {
        let d = self.d();
        let mut g = DiGraph::empty(d);
        for j in 0..d {
            for i in 0..d {
                if self.a[j][i] != 0.0 || self.b[j][i] != 0.0 {
                    g.add_edge(i, j);
                }
            }
        }
        Dag::try_from(g)
    }
}

/// Two-dimensional system with drift `(-r w sin(w t), r w tanh(X^1_t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSpec {
    pub omega: f64,
    pub r: f64,
    pub dvec: [f64; 2],
    pub x0: InitialLaw,
}

impl NonlinearSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() || !self.r.is_finite() || self.dvec.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSpec("nonlinear SDE needs finite omega, r and non-negative dvec".into()));
        }
        if self.x0.dim() != 2 {
            return Err(Error::InvalidSpec("nonlinear SDE is two-dimensional".into()));
        }
        Ok(())
    }

    /// `X^1 -> X^2`, no loops.
    pub fn dependence_graph(&self) -> Dag {
        let edges: &[(usize, usize)] = if self.r != 0.0 && self.omega != 0.0 { &[(0, 1)] } else { &[] };
        Dag::new(2, edges).expect("two-node graph")
    }
}

/// Pair driven by independent fractional Brownian motions:
/// `dX = d1 dB^1`, `dY = a21 X dt + d2 dB^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub a21: f64,
    pub d1: f64,
    pub d2: f64,
    pub x0: InitialLaw,
}

impl FbmSpec {
    pub fn new(hurst: f64, a21: f64, d1: f64, d2: f64) -> Self {
        Self { hurst, a21, d1, d2, x0: InitialLaw::default_for(2) }
    }
}

/// Functional-data generator with a Fourier basis and historical coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdaSpec {
    pub m_basis: usize,
    pub a: f64,
    pub noise_sd: f64,
}

impl Default for FdaSpec {
    fn default() -> Self {
        Self { m_basis: 5, a: 1.0, noise_sd: 1.0 }
    }
}

/// Euler–Maruyama on `grid`. `step` fills drift and diffusion at `(t, x)`.
fn euler<F>(grid: &TimeGrid, mut x: Vec<f64>, rng: &mut Rng, path_index: usize, step: F) -> Result<Path>
where
    F: Fn(f64, &[f64], &mut [f64], &mut [f64]),
{
    let d = x.len();
    let t = grid.points();
    let mut values = Vec::with_capacity(t.len() * d);
    values.extend_from_slice(&x);
    let (mut mu, mut sigma) = (vec![0.0; d], vec![0.0; d]);
    for k in 0..t.len() - 1 {
        let dt = t[k + 1] - t[k];
        let sq = dt.sqrt();
        step(t[k], &x, &mut mu, &mut sigma);
        for i in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            x[i] += mu[i] * dt + sigma[i] * sq * xi;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(Error::SimulationDiverged { path: path_index, step: k + 1 });
        }
        values.extend_from_slice(&x);
    }
    Path::new(grid.clone(), values, d)
}

fn assemble(paths: Vec<Result<Path>>, d: usize) -> Result<PathSample> {
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    PathSample::new(paths, CoordMap::scalar(d))
}

/// Simulates `cfg.n_paths` i.i.d. paths of the linear SDE.
pub fn simulate_linear(spec: &LinearSdeSpec, cfg: &SimConfig) -> Result<PathSample> {
    spec.validate()?;
    let grid = cfg.grid()?;
    let d = spec.d();
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(cfg.seed, tag::PATH, p as u64);
            let x0 = spec.x0.draw(&mut rng);
            euler(&grid, x0, &mut rng, p, |_, x, mu, sigma| {
                for j in 0..d {
                    let (mut m, mut s) = (spec.c[j], spec.dvec[j]);
                    for i in 0..d {
                        m += spec.a[j][i] * x[i];
                        s += spec.b[j][i] * x[i];
                    }
                    mu[j] = m;
                    sigma[j] = s;
                }
            })
        })
        .collect();
    assemble(paths, d)
}

/// Simulates the two-dimensional nonlinear system.
pub fn simulate_nonlinear(spec: &NonlinearSpec, cfg: &SimConfig) -> Result<PathSample> {
    spec.validate()?;
    let grid = cfg.grid()?;
    let (r, w) = (spec.r, spec.omega);
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(cfg.seed, tag::PATH, p as u64);
            let x0 = spec.x0.draw(&mut rng);
            euler(&grid, x0, &mut rng, p, |t, x, mu, sigma| {
                mu[0] = -r * w * (w * t).sin();
                mu[1] = r * w * x[0].tanh();
                sigma.copy_from_slice(&spec.dvec);
            })
        })
        .collect();
    assemble(paths, 2)
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..=hi)
}

/// Uniform on `[-hi, -lo] ∪ [lo, hi]`.
fn signed_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    let v = uniform(rng, lo, hi);
    if rng.random::<bool>() {
        v
    } else {
        -v
    }
}

/// Three-dimensional system in which `X^2` depends on the history of `X^1`
/// through the noiseless integrator `X^3`.
pub fn path_dependent_spec(rng: &mut Rng) -> LinearSdeSpec {
    let mut spec = LinearSdeSpec::zeros(3);
    spec.a[1][2] = signed_uniform(rng, 1.0, 3.5);
    spec.a[2][0] = signed_uniform(rng, 1.0, 3.5);
    spec.dvec = vec![uniform(rng, 0.1, 0.2), uniform(rng, 0.1, 0.2), 0.0];
    spec
}

/// Simulates a path-dependent system drawn with `rng` and returns the
/// observed coordinates 1 and 2 only.
pub fn simulate_path_dependent(cfg: &SimConfig, rng: &mut Rng) -> Result<PathSample> {
    simulate_linear(&path_dependent_spec(rng), cfg)?.select_vars(&[0, 1])
}

/// Lower Cholesky factor of the fBM covariance at `times` (all positive).
pub fn fbm_cholesky(times: &[f64], hurst: f64) -> Result<DMatrix<f64>> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidSpec(format!("hurst must lie in (0, 1), got {hurst}")));
    }
    let n = times.len();
    let h2 = 2.0 * hurst;
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let (t, s) = (times[i], times[j]);
        0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2))
    });
    let scale = cov.diagonal().max().max(1e-300);
    for jitter in [0.0, 1e-12, 1e-10, 1e-8] {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter * scale;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.l());
        }
    }
    Err(Error::NotPositiveDefinite)
}

/// One fBM path on `times` with `B(times[0]) = 0`.
fn fbm_path(l: &DMatrix<f64>, rng: &mut Rng) -> Vec<f64> {
    let n = l.nrows();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for i in 0..n {
        out.push((0..=i).map(|k| l[(i, k)] * z[k]).sum());
    }
    out
}

/// Simulates the fBM-driven pair with exact fBM increments and an Euler step
/// for the coupling.
pub fn simulate_fbm_pair(spec: &FbmSpec, cfg: &SimConfig) -> Result<PathSample> {
    let grid = cfg.grid()?;
    let t = grid.points();
    let l = fbm_cholesky(&t[1..], spec.hurst)?;
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(cfg.seed, tag::PATH, p as u64);
            let x0 = spec.x0.draw(&mut rng);
            let b1 = fbm_path(&l, &mut rng);
            let b2 = fbm_path(&l, &mut rng);
            let (mut x, mut y) = (x0[0], x0[1]);
            let mut values = Vec::with_capacity(2 * t.len());
            values.extend([x, y]);
            for k in 0..t.len() - 1 {
                let dt = t[k + 1] - t[k];
                let nx = x + spec.d1 * (b1[k + 1] - b1[k]);
                y += spec.a21 * x * dt + spec.d2 * (b2[k + 1] - b2[k]);
                x = nx;
                if !(x.abs() <= DIVERGENCE_BOUND && y.abs() <= DIVERGENCE_BOUND) {
                    return Err(Error::SimulationDiverged { path: p, step: k + 1 });
                }
                values.extend([x, y]);
            }
            Path::new(grid.clone(), values, 2)
        })
        .collect();
    assemble(paths, 2)
}

/// Fourier basis `1, √2 sin 2πt, √2 cos 2πt, √2 sin 4πt, ...`.
pub fn fourier_basis(m: usize, t: f64) -> f64 {
    use std::f64::consts::{PI, SQRT_2};
    if m == 0 {
        return 1.0;
    }
    let freq = m.div_ceil(2);
    let arg = 2.0 * PI * freq as f64 * t;
    if m % 2 == 1 {
        SQRT_2 * arg.sin()
    } else {
        SQRT_2 * arg.cos()
    }
}

/// `t ↦ ∫_0^t x(s) β(s, t) ds` with `β(s, t) = 8 (s - c1)^2 - 8 (t - c2)^2`,
/// by the trapezoid rule on the sample points.
pub fn historical_integral(times: &[f64], x: &[f64], c1: f64, c2: f64) -> Vec<f64> {
    let beta = |s: f64, t: f64| 8.0 * (s - c1).powi(2) - 8.0 * (t - c2).powi(2);
    (0..times.len())
        .map(|m| {
            let t = times[m];
            (0..m)
                .map(|k| {
                    let h = times[k + 1] - times[k];
                    0.5 * h * (x[k] * beta(times[k], t) + x[k + 1] * beta(times[k + 1], t))
                })
                .sum()
        })
        .collect()
}

/// Functional-data sample over the nodes of `g` (loops ignored).
///
/// The centres `(c1, c2)` of each node's weight function are fixed per run;
/// basis weights and noise are drawn per path.
pub fn generate_fda_sample(g: &Dag, spec: &FdaSpec, cfg: &SimConfig) -> Result<PathSample> {
    if spec.m_basis == 0 {
        return Err(Error::InvalidSpec("m_basis must be at least 1".into()));
    }
    let grid = cfg.grid()?;
    let d = g.d();
    let centres: Vec<(f64, f64)> = (0..d)
        .map(|k| {
            let mut rng = substream(cfg.seed, tag::PARAMS, k as u64);
            (rng.random::<f64>(), rng.random::<f64>())
        })
        .collect();
    let order = g.topological_order();
    let t = grid.points();
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(cfg.seed, tag::PATH, p as u64);
            let mut cols: Vec<Vec<f64>> = vec![Vec::new(); d];
            for &i in &order {
                let parents = g.parents_of(i);
                let mut col = if parents.is_empty() {
                    let w: Vec<f64> = (0..spec.m_basis).map(|_| rng.sample(StandardNormal)).collect();
                    t.iter().map(|&s| w.iter().enumerate().map(|(m, c)| c * fourier_basis(m, s)).sum()).collect()
                } else {
                    let mut acc = vec![0.0; t.len()];
                    for k in parents {
                        let (c1, c2) = centres[k];
                        for (a, h) in acc.iter_mut().zip(historical_integral(t, &cols[k], c1, c2)) {
                            *a += spec.a * h;
                        }
                    }
                    acc
                };
                for v in col.iter_mut() {
                    *v += spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
                }
                cols[i] = col;
            }
            let values: Vec<f64> = (0..t.len()).flat_map(|m| cols.iter().map(move |c| c[m])).collect();
            Path::new(grid.clone(), values, d)
        })
        .collect();
    assemble(paths, d)
}

/// Experiment families with documented parameter ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LinearDrift,
    Diffusion,
    PathDependence,
    Nonlinear,
    CausalDiscovery,
    Fbm,
    Fda,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::LinearDrift,
        Family::Diffusion,
        Family::PathDependence,
        Family::Nonlinear,
        Family::CausalDiscovery,
        Family::Fbm,
        Family::Fda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LinearDrift => "linear-drift",
            Family::Diffusion => "diffusion",
            Family::PathDependence => "path-dependence",
            Family::Nonlinear => "nonlinear",
            Family::CausalDiscovery => "causal-discovery",
            Family::Fbm => "fbm",
            Family::Fda => "fda",
        }
    }

    /// Families fixed to two observed coordinates.
    pub fn is_bivariate(self) -> bool {
        !matches!(self, Family::CausalDiscovery | Family::Fda)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Knobs for families over `d` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    pub d: usize,
    /// Edge probability of the random DAG.
    pub edge_prob: f64,
    /// Hurst parameter for the fBM family.
    pub hurst: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self { d: 2, edge_prob: 0.5, hurst: 0.5 }
    }
}

/// A fully specified generator together with its ground-truth graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Linear {
        spec: LinearSdeSpec,
        /// Returned coordinates; all when `None`.
        observed: Option<Vec<usize>>,
    },
    Nonlinear(NonlinearSpec),
    Fbm(FbmSpec),
    Fda {
        spec: FdaSpec,
        edges: Vec<(usize, usize)>,
        d: usize,
    },
}

impl GeneratorSpec {
    pub fn simulate(&self, cfg: &SimConfig) -> Result<PathSample> {
        match self {
            GeneratorSpec::Linear { spec, observed: None } => simulate_linear(spec, cfg),
            GeneratorSpec::Linear { spec, observed: Some(obs) } => simulate_linear(spec, cfg)?.select_vars(obs),
            GeneratorSpec::Nonlinear(spec) => simulate_nonlinear(spec, cfg),
            GeneratorSpec::Fbm(spec) => simulate_fbm_pair(spec, cfg),
            GeneratorSpec::Fda { spec, edges, d } => generate_fda_sample(&Dag::new(*d, edges)?, spec, cfg),
        }
    }

    /// Ground-truth dependence graph over the returned coordinates.
    pub fn truth(&self) -> Result<Dag> {
        match self {
            GeneratorSpec::Linear { spec, observed: None } => spec.dependence_graph(),
            GeneratorSpec::Linear { spec, observed: Some(obs) } => {
                // observed graph of the hidden-integrator system: X^i -> X^j
                // when X^i reaches X^j through hidden nodes only
                let full = spec.dependence_graph()?;
                let hidden: Vec<usize> = (0..spec.d()).filter(|v| !obs.contains(v)).collect();
                let mut g = DiGraph::empty(obs.len());
                for (p, &i) in obs.iter().enumerate() {
                    for (q, &j) in obs.iter().enumerate() {
                        if i == j {
                            if full.has_loop(i) {
                                g.add_edge(p, p);
                            }
                        } else if reaches_through(&full, i, j, &hidden) {
                            g.add_edge(p, q);
                        }
                    }
                }
                Dag::try_from(g)
            }
            GeneratorSpec::Nonlinear(spec) => Ok(spec.dependence_graph()),
            GeneratorSpec::Fbm(spec) => Dag::new(2, if spec.a21 != 0.0 { &[(0, 1)] } else { &[] }),
            GeneratorSpec::Fda { edges, d, .. } => Ok(Dag::new(*d, edges)?.without_loops()),
        }
    }
}

/// Directed path `i -> ... -> j` whose interior lies in `via`.
fn reaches_through(g: &Dag, i: usize, j: usize, via: &[usize]) -> bool {
    let mut stack = vec![i];
    let mut seen = vec![false; g.d()];
    while let Some(u) = stack.pop() {
        for c in g.children_of(u) {
            if c == j {
                return true;
            }
            if via.contains(&c) && !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    false
}

/// Draws a generator of `family` using the documented parameter ranges.
pub fn sample_params(family: Family, opts: &FamilyOptions, rng: &mut Rng) -> Result<GeneratorSpec> {
    if !family.is_bivariate() && opts.d < 2 {
        return Err(Error::InvalidSpec(format!("family {family} needs d >= 2")));
    }
    Ok(match family {
        Family::LinearDrift => {
            let mut s = LinearSdeSpec::zeros(2);
            s.a[1][0] = uniform(rng, 1.0, 2.5);
            s.a[0][0] = uniform(rng, -0.5, 0.5);
            s.a[1][1] = uniform(rng, -0.5, 0.5);
            s.dvec = vec![uniform(rng, 0.1, 0.2), uniform(rng, 0.1, 0.2)];
            GeneratorSpec::Linear { spec: s, observed: None }
        }
        Family::Diffusion => {
            let mut s = LinearSdeSpec::zeros(2);
            s.a[0][0] = uniform(rng, 0.5, 1.0);
            s.a[1][1] = uniform(rng, 0.5, 1.0);
            s.b[1][0] = uniform(rng, 1.0, 4.5);
            GeneratorSpec::Linear { spec: s, observed: None }
        }
        Family::PathDependence => GeneratorSpec::Linear { spec: path_dependent_spec(rng), observed: Some(vec![0, 1]) },
        Family::Nonlinear => GeneratorSpec::Nonlinear(NonlinearSpec {
            omega: uniform(rng, 6.0 * std::f64::consts::PI, 8.0 * std::f64::consts::PI),
            r: uniform(rng, 0.5, 1.0),
            dvec: [uniform(rng, 2.0, 2.5), uniform(rng, 2.0, 2.5)],
            x0: InitialLaw::default_for(2),
        }),
        Family::CausalDiscovery => {
            let d = opts.d;
            let g = sample_er_dag(d, opts.edge_prob, 0.0, rng);
            let mut s = LinearSdeSpec::zeros(d);
            for (i, j) in g.edges() {
                s.a[j][i] = signed_uniform(rng, 1.0, 2.0);
            }
            for k in 0..d {
                s.a[k][k] = uniform(rng, -0.5, 0.5);
                s.dvec[k] = uniform(rng, 0.1, 0.2);
            }
            GeneratorSpec::Linear { spec: s, observed: None }
        }
        Family::Fbm => GeneratorSpec::Fbm(FbmSpec::new(
            opts.hurst,
            uniform(rng, -2.0, 2.0),
            uniform(rng, -2.0, 2.0),
            uniform(rng, -2.0, 2.0),
        )),
        Family::Fda => {
            let g = sample_er_dag(opts.d, opts.edge_prob, 0.0, rng);
            GeneratorSpec::Fda { spec: FdaSpec::default(), edges: g.edges(), d: opts.d }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn terminal(sample: &PathSample, coord: usize) -> Vec<f64> {
        sample.paths().iter().map(|p| p.row(p.len() - 1)[coord]).collect()
    }

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn zero_system_stays_at_zero() {
        let mut s = LinearSdeSpec::zeros(3);
        s.x0 = InitialLaw::zeros(3);
        let out = simulate_linear(&s, &SimConfig::new(5, 16, 1)).unwrap();
        assert!(out.paths().iter().all(|p| p.values().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn constant_drift_integrates_exactly() {
        let mut s = LinearSdeSpec::zeros(1);
        s.c = vec![1.0];
        s.x0 = InitialLaw::zeros(1);
        let out = simulate_linear(&s, &SimConfig::new(3, 50, 1)).unwrap();
        for v in terminal(&out, 0) {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ou_terminal_variance() {
        let (theta, sigma) = (1.5, 0.8);
        let mut s = LinearSdeSpec::zeros(1);
        s.a[0][0] = -theta;
        s.dvec = vec![sigma];
        s.x0 = InitialLaw::zeros(1);
        let n = 2000;
        let out = simulate_linear(&s, &SimConfig::new(n, 256, 11)).unwrap();
        let (_, var) = mean_var(&terminal(&out, 0));
        let want = sigma * sigma * (1.0 - (-2.0 * theta).exp()) / (2.0 * theta);
        // standard error of a Gaussian sample variance
        let se = want * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - want).abs() < 3.0 * se, "{var} vs {want}");
    }

    #[test]
    fn ou_weak_error_shrinks_with_step() {
        let theta = 1.0;
        let mut s = LinearSdeSpec::zeros(1);
        s.a[0][0] = -theta;
        s.dvec = vec![0.1];
        s.x0 = InitialLaw::Constant { value: vec![1.0] };
        let exact = (-theta).exp();
        let errs: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&steps| {
                let out = simulate_linear(&s, &SimConfig::new(5000, steps, 2)).unwrap();
                (mean_var(&terminal(&out, 0)).0 - exact).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn driving_noises_are_uncorrelated() {
        let mut s = LinearSdeSpec::zeros(2);
        s.dvec = vec![1.0, 1.0];
        s.x0 = InitialLaw::zeros(2);
        let out = simulate_linear(&s, &SimConfig::new(200, 64, 5)).unwrap();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for p in out.paths() {
            for k in 1..p.len() {
                xs.push(p.row(k)[0] - p.row(k - 1)[0]);
                ys.push(p.row(k)[1] - p.row(k - 1)[1]);
            }
        }
        let n = xs.len() as f64;
        let corr = xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>()
            / (xs.iter().map(|a| a * a).sum::<f64>() * ys.iter().map(|b| b * b).sum::<f64>()).sqrt();
        assert!(corr.abs() < 3.0 / n.sqrt(), "{corr}");
    }

    #[test]
    fn divergence_names_the_path() {
        let mut s = LinearSdeSpec::zeros(1);
        s.a[0][0] = 200.0;
        s.x0 = InitialLaw::Constant { value: vec![1.0] };
        let err = simulate_linear(&s, &SimConfig::new(2, 64, 0)).unwrap_err();
        assert!(matches!(err, Error::SimulationDiverged { path: 0, .. }), "{err}");
    }

    #[test]
    fn nonlinear_deterministic_part() {
        let spec = NonlinearSpec { omega: 7.0, r: 0.8, dvec: [0.0, 0.0], x0: InitialLaw::zeros(2) };
        let out = simulate_nonlinear(&spec, &SimConfig::new(1, 4096, 0)).unwrap();
        let p = &out.paths()[0];
        for (k, &t) in p.times().iter().enumerate() {
            let want = spec.r * (spec.omega * t).cos() - spec.r;
            assert!((p.row(k)[0] - want).abs() < 5e-3, "t={t}");
        }
        let flat = NonlinearSpec { r: 0.0, ..spec };
        let out = simulate_nonlinear(&flat, &SimConfig::new(2, 32, 0)).unwrap();
        assert!(out.paths().iter().all(|p| p.values().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn nonlinear_family_never_diverges() {
        for seed in 0..1000 {
            let spec = sample_params(Family::Nonlinear, &FamilyOptions::default(), &mut from_seed(seed)).unwrap();
            let out = spec.simulate(&SimConfig::new(1, 128, seed)).unwrap();
            assert!(out.paths()[0].values().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn path_dependent_returns_two_coordinates() {
        let out = simulate_path_dependent(&SimConfig::new(4, 32, 0), &mut from_seed(1)).unwrap();
        assert_eq!(out.coord_map().dim(), 2);
        assert_eq!(out.num_vars(), 2);
        let spec = sample_params(Family::PathDependence, &FamilyOptions::default(), &mut from_seed(1)).unwrap();
        assert_eq!(spec.truth().unwrap().edges(), vec![(0, 1)]);
    }

    /// Mean and standard error over paths of the lag-1 increment correlation of coordinate 0.
    pub(crate) fn lag1_increment_corr(sample: &PathSample) -> (f64, f64) {
        let per_path: Vec<f64> = sample
            .paths()
            .iter()
            .map(|p| {
                let inc: Vec<f64> = (1..p.len()).map(|k| p.row(k)[0] - p.row(k - 1)[0]).collect();
                let num: f64 = inc.windows(2).map(|w| w[0] * w[1]).sum();
                let den: f64 = inc.iter().map(|v| v * v).sum();
                num / den
            })
            .collect();
        let (m, v) = mean_var(&per_path);
        (m, (v / per_path.len() as f64).sqrt())
    }

    #[test]
    fn fbm_increment_correlation() {
        for h in [0.5, 0.75] {
            let out = simulate_fbm_pair(&FbmSpec::new(h, 0.0, 1.0, 1.0), &SimConfig::new(200, 512, 3)).unwrap();
            let (rho, se) = lag1_increment_corr(&out);
            let want = 2f64.powf(2.0 * h - 1.0) - 1.0;
            assert!((rho - want).abs() < 3.0 * se, "H={h}: {rho} ± {se} vs {want}");
        }
    }

    #[test]
    fn fbm_rejects_bad_hurst() {
        assert!(simulate_fbm_pair(&FbmSpec::new(1.0, 0.0, 1.0, 1.0), &SimConfig::new(2, 8, 0)).is_err());
    }

    #[test]
    fn historical_integral_of_constant_parent() {
        let (c1, c2) = (0.3, 0.7);
        let grid = TimeGrid::uniform(128, 1.0).unwrap();
        let t = grid.points();
        let got = historical_integral(t, &vec![1.0; t.len()], c1, c2);
        for (k, &tt) in t.iter().enumerate() {
            let exact = 8.0 / 3.0 * ((tt - c1).powi(3) + c1.powi(3)) - 8.0 * tt * (tt - c2).powi(2);
            assert!((got[k] - exact).abs() < 1e-3, "t={tt}: {} vs {exact}", got[k]);
        }
    }

    #[test]
    fn fda_without_coupling_has_independent_nodes() {
        let g = Dag::new(2, &[(0, 1)]).unwrap();
        let spec = FdaSpec { a: 0.0, noise_sd: 0.0, m_basis: 3 };
        let out = generate_fda_sample(&g, &spec, &SimConfig::new(3, 16, 0)).unwrap();
        // the child of a zero-strength edge is the zero process
        assert!(out.paths().iter().all(|p| (0..p.len()).all(|k| p.row(k)[1] == 0.0)));
        let out = generate_fda_sample(&Dag::empty(2), &spec, &SimConfig::new(3, 16, 0)).unwrap();
        assert!(out.paths().iter().all(|p| (0..p.len()).any(|k| p.row(k)[1] != 0.0)));
    }

    #[test]
    fn family_ranges() {
        for seed in 0..200 {
            let mut rng = from_seed(seed);
            let GeneratorSpec::Linear { spec, .. } =
                sample_params(Family::LinearDrift, &FamilyOptions::default(), &mut rng).unwrap()
            else {
                panic!()
            };
            assert!((1.0..=2.5).contains(&spec.a[1][0]));
            assert_eq!(spec.a[0][1], 0.0);
            let GeneratorSpec::Linear { spec, .. } =
                sample_params(Family::Diffusion, &FamilyOptions::default(), &mut rng).unwrap()
            else {
                panic!()
            };
            assert_eq!(spec.a[0][1], 0.0);
            assert_eq!(spec.a[1][0], 0.0);
            assert!((1.0..=4.5).contains(&spec.b[1][0]));
            let opts = FamilyOptions { d: 5, ..Default::default() };
            let GeneratorSpec::Linear { spec, .. } = sample_params(Family::CausalDiscovery, &opts, &mut rng).unwrap()
            else {
                panic!()
            };
            for j in 0..5 {
                for i in 0..5 {
                    let v = spec.a[j][i].abs();
                    if i == j {
                        assert!(v <= 0.5);
                    } else {
                        assert!(v == 0.0 || (1.0..=2.0).contains(&v));
                    }
                }
            }
        }
        assert!(matches!("nope".parse::<Family>(), Err(Error::UnknownFamily(_))));
        assert_eq!("linear-drift".parse::<Family>().unwrap(), Family::LinearDrift);
    }

    #[test]
    fn implied_graph_matches_sampled_dag() {
        for seed in 0..50 {
            let opts = FamilyOptions { d: 6, edge_prob: 0.4, ..Default::default() };
            let spec = sample_params(Family::CausalDiscovery, &opts, &mut from_seed(seed)).unwrap();
            let again = sample_params(Family::CausalDiscovery, &opts, &mut from_seed(seed)).unwrap();
            assert_eq!(spec, again);
            let mut rng = from_seed(seed);
            let g = sample_er_dag(6, 0.4, 0.0, &mut rng);
            let truth = spec.truth().unwrap();
            assert_eq!(truth.without_loops(), g);
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = sample_params(Family::Nonlinear, &FamilyOptions::default(), &mut from_seed(9)).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        let back: GeneratorSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn simulation_is_deterministic(seed in any::<u64>()) {
            let spec = sample_params(Family::LinearDrift, &FamilyOptions::default(), &mut from_seed(seed)).unwrap();
            let cfg = SimConfig::new(4, 16, seed);
            prop_assert_eq!(spec.simulate(&cfg).unwrap(), spec.simulate(&cfg).unwrap());
        }
    }
}
