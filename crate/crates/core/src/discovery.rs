//! Conditional-independence relations on path segments and the discovery
//! algorithms built on them.
//!
//! Every algorithm talks to a [`CiBackend`], either the statistical tester on
//! a [`PathSample`] or a d-separation oracle on a known truth graph.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci::{hsic_bootstrap, kcipt, sdcit, CiMethod, TestConfig, TestResult};
use crate::error::{Error, Result};
use crate::graph::{
    ancestors, apply_meek_rules, d_separated, lift, Dag, DiGraph, LiftedNode, Mark, MixedGraph, SepSetTable,
};
use crate::kernel::{gram_sym, median_bandwidth, median_bandwidth_paths, GramMatrix, KernelConfig, Lifting};
use crate::paths::{Interval, Path, PathSample};
use crate::rng::mix;

/// Which independence relation a query asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `X^i_[0,T] ⫫ X^j_[0,T] | X^K_[0,T]`.
    Sym,
    /// `X^i_[0,s] ⫫ X^j_[s,s+h] | X^j_[0,s], X^K_[0,s+h]`.
    Future,
    /// `X^i_[0,s] ⫫ X^i_[s,s+h] | X^K_[0,s+h]`; `j` equals `i`.
    #[serde(rename = "self")]
    SelfLoop,
    /// `X^i_0 ⫫ X^j_[0,T]`.
    Init,
}

impl Relation {
    fn code(self) -> u64 {
        match self {
            Relation::Sym => 1,
            Relation::Future => 2,
            Relation::SelfLoop => 3,
            Relation::Init => 4,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Sym => "sym",
            Relation::Future => "future",
            Relation::SelfLoop => "self",
            Relation::Init => "init",
        })
    }
}

impl std::str::FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" => Ok(Relation::Sym),
            "future" => Ok(Relation::Future),
            "self" => Ok(Relation::SelfLoop),
            "init" => Ok(Relation::Init),
            _ => Err(Error::Parse(format!("unknown relation '{s}' (expected sym, future, self or init)"))),
        }
    }
}

/// One conditional-independence question about variables `i`, `j` given `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiQuery {
    pub relation: Relation,
    pub i: usize,
    pub j: usize,
    pub k: Vec<usize>,
    /// Split time.
    pub s: f64,
    /// Length of the future window.
    pub h: f64,
}

impl CiQuery {
    pub fn new(relation: Relation, i: usize, j: usize, k: Vec<usize>, s: f64, h: f64) -> Self {
        Self { relation, i, j, k, s, h }
    }

    /// Checks index ranges, disjointness and the time split against `horizon`.
    pub fn validate(&self, d: usize, horizon: f64) -> Result<()> {
        for &v in [self.i, self.j].iter().chain(&self.k) {
            if v >= d {
                return Err(Error::NodeOutOfRange { index: v, d });
            }
        }
        let same = self.i == self.j;
        match self.relation {
            Relation::SelfLoop if !same => {
                return Err(Error::InvalidIndexSets("self-loop query needs i == j".into()));
            }
            Relation::Sym | Relation::Future | Relation::Init if same => {
                return Err(Error::InvalidIndexSets("query needs i != j".into()));
            }
            _ => {}
        }
        let distinct: BTreeSet<usize> = self.k.iter().copied().collect();
        if distinct.len() != self.k.len() || distinct.contains(&self.i) || distinct.contains(&self.j) {
            return Err(Error::OverlappingSets);
        }
        if self.relation == Relation::Init && !self.k.is_empty() {
            return Err(Error::InvalidIndexSets("initial-value query takes no conditioning set".into()));
        }
        if matches!(self.relation, Relation::Future | Relation::SelfLoop)
            && !(self.s > 0.0 && self.h > 0.0 && self.s + self.h <= horizon * (1.0 + 1e-12))
        {
            return Err(Error::DegenerateInterval { a: self.s, b: self.s + self.h });
        }
        Ok(())
    }

    fn seed(&self, base: u64) -> u64 {
        let mut words = vec![base, self.relation.code(), self.i as u64, self.j as u64, self.k.len() as u64];
        words.extend(self.k.iter().map(|&v| v as u64));
        mix(&words)
    }
}

impl fmt::Display for CiQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {} | {:?})", self.relation, self.i, self.j, self.k)
    }
}

/// Raw backend answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CiAnswer {
    Oracle { independent: bool },
    Test { p_value: f64 },
}

impl CiAnswer {
    pub fn independent(self, alpha: f64) -> bool {
        match self {
            CiAnswer::Oracle { independent } => independent,
            CiAnswer::Test { p_value } => p_value >= alpha,
        }
    }

    pub fn p_value(self) -> Option<f64> {
        match self {
            CiAnswer::Test { p_value } => Some(p_value),
            CiAnswer::Oracle { .. } => None,
        }
    }
}

/// Source of conditional-independence answers.
pub trait CiBackend: Sync {
    fn num_vars(&self) -> usize;

    /// Time horizon `T` of the observed paths.
    fn horizon(&self) -> f64 {
        1.0
    }

    fn answer(&self, q: &CiQuery) -> Result<CiAnswer>;
}

/// d-separation oracle on a known dependence graph.
///
/// With an observed subset, node `k` of every query is `observed[k]` of the
/// truth and the remaining nodes are latent.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    truth: Dag,
    lifted: DiGraph,
    observed: Vec<usize>,
    ancestors: Vec<BTreeSet<usize>>,
}

impl OracleBackend {
    pub fn new(truth: Dag) -> Self {
        let observed = (0..truth.d()).collect();
        Self::build(truth, observed)
    }

    pub fn with_observed(truth: Dag, observed: Vec<usize>) -> Result<Self> {
        let distinct: BTreeSet<usize> = observed.iter().copied().collect();
        if distinct.len() != observed.len() {
            return Err(Error::OverlappingSets);
        }
        if let Some(&v) = observed.iter().find(|&&v| v >= truth.d()) {
            return Err(Error::NodeOutOfRange { index: v, d: truth.d() });
        }
        Ok(Self::build(truth, observed))
    }

    fn build(truth: Dag, observed: Vec<usize>) -> Self {
        let lifted = lift(&truth).to_digraph();
        let ancestors = (0..truth.d()).map(|v| ancestors(&truth, v)).collect();
        Self { truth, lifted, observed, ancestors }
    }

    pub fn truth(&self) -> &Dag {
        &self.truth
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }
}

impl CiBackend for OracleBackend {
    fn num_vars(&self) -> usize {
        self.observed.len()
    }

    fn answer(&self, q: &CiQuery) -> Result<CiAnswer> {
        q.validate(self.num_vars(), self.horizon())?;
        let m = |v: usize| self.observed[v];
        let d = self.truth.d();
        let past = |v: usize| LiftedNode::past(m(v)).index(d);
        let future = |v: usize| LiftedNode::future(m(v)).index(d);
        let independent = match q.relation {
            Relation::Sym => {
                let k: Vec<usize> = q.k.iter().map(|&v| m(v)).collect();
                d_separated(&self.truth, &[m(q.i)], &[m(q.j)], &k)?
            }
            Relation::Future => {
                let mut c = vec![past(q.j)];
                c.extend(q.k.iter().flat_map(|&v| [past(v), future(v)]));
                d_separated(&self.lifted, &[past(q.i)], &[future(q.j)], &c)?
            }
            Relation::SelfLoop => {
                let c: Vec<usize> = q.k.iter().flat_map(|&v| [past(v), future(v)]).collect();
                d_separated(&self.lifted, &[past(q.i)], &[future(q.i)], &c)?
            }
            Relation::Init => !self.ancestors[m(q.j)].contains(&m(q.i)),
        };
        Ok(CiAnswer::Oracle { independent })
    }
}

/// Observations the median heuristic is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MedianScope {
    /// All coordinates of the whole sample, one bandwidth for every Gram.
    #[default]
    Sample,
    /// The rebased segments of each Gram separately.
    Segment,
}

/// Kernel and test settings of the statistical backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatConfig {
    /// Template for every signature Gram; with `median_heuristic` the RBF
    /// bandwidth is replaced by the median heuristic over `median_scope`.
    pub kernel: KernelConfig,
    pub median_heuristic: bool,
    #[serde(default)]
    pub median_scope: MedianScope,
    pub test: TestConfig,
    #[serde(default)]
    pub method: CiMethod,
}

impl Default for StatConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::rbf(1.0).with_refinement(0),
            median_heuristic: true,
            median_scope: MedianScope::Sample,
            test: TestConfig::default(),
            method: CiMethod::Sdcit,
        }
    }
}

type SegmentKey = (usize, u64, u64);

/// Kernel tests on signature Grams of rebased path segments.
///
/// Conditioning on several segments uses the elementwise product of their
/// Grams. Segment Grams are cached, so repeated queries on the same
/// variables and intervals are cheap.
pub struct StatisticalBackend {
    sample: PathSample,
    cfg: StatConfig,
    sample_bandwidth: f64,
    cache: Mutex<HashMap<SegmentKey, Arc<GramMatrix>>>,
}

impl StatisticalBackend {
    pub fn new(sample: PathSample, cfg: StatConfig) -> Result<Self> {
        cfg.kernel.validate()?;
        cfg.test.validate()?;
        if sample.len() < 2 {
            return Err(Error::InvalidTestConfig("need at least two sample paths".into()));
        }
        let sample_bandwidth = match (cfg.median_heuristic, cfg.median_scope, cfg.kernel.lifting) {
            (true, MedianScope::Sample, Lifting::Rbf { .. }) => positive_or_one(median_bandwidth(&sample)?),
            _ => 1.0,
        };
        Ok(Self { sample, cfg, sample_bandwidth, cache: Mutex::new(HashMap::new()) })
    }

    pub fn sample(&self) -> &PathSample {
        &self.sample
    }

    pub fn config(&self) -> &StatConfig {
        &self.cfg
    }

    /// Signature Gram of variable `var` restricted to `iv` and rebased.
    pub fn segment_gram(&self, var: usize, iv: Interval) -> Result<Arc<GramMatrix>> {
        let key = (var, iv.a.to_bits(), iv.b.to_bits());
        if let Some(g) = self.cache.lock().expect("gram cache poisoned").get(&key) {
            return Ok(Arc::clone(g));
        }
        let segs = self.sample.segments(&[var], iv)?;
        let kcfg = self.kernel_for(&segs)?;
        let g = Arc::new(gram_sym(&segs, &kcfg)?);
        self.cache.lock().expect("gram cache poisoned").insert(key, Arc::clone(&g));
        Ok(g)
    }

    fn kernel_for(&self, segs: &[Path]) -> Result<KernelConfig> {
        let mut k = self.cfg.kernel;
        if self.cfg.median_heuristic {
            if let Lifting::Rbf { .. } = k.lifting {
                let bandwidth = match self.cfg.median_scope {
                    MedianScope::Sample => self.sample_bandwidth,
                    MedianScope::Segment => positive_or_one(median_bandwidth_paths(segs)?),
                };
                k.lifting = Lifting::Rbf { bandwidth };
            }
        }
        Ok(k)
    }

    fn product(&self, parts: &[(usize, Interval)]) -> Result<Option<GramMatrix>> {
        let mut acc: Option<GramMatrix> = None;
        for &(v, iv) in parts {
            let g = self.segment_gram(v, iv)?;
            acc = Some(match acc {
                None => (*g).clone(),
                Some(a) => a.hadamard(&g)?,
            });
        }
        Ok(acc)
    }

    /// RBF Gram of the initial values of `var`, median bandwidth.
    fn initial_gram(&self, var: usize) -> Result<GramMatrix> {
        let cols = self.sample.coord_map().columns(var)?;
        let x0: Vec<Vec<f64>> = self.sample.paths().iter().map(|p| p.row(0)[cols.clone()].to_vec()).collect();
        let mut d2 = Vec::with_capacity(x0.len() * x0.len() / 2);
        for a in 0..x0.len() {
            for b in a + 1..x0.len() {
                d2.push(sq_dist(&x0[a], &x0[b]));
            }
        }
        let mid = d2.len() / 2;
        let med = if d2.is_empty() { 0.0 } else { *d2.select_nth_unstable_by(mid, f64::total_cmp).1 };
        let gamma = if med > 0.0 { 0.5 / med } else { 0.5 };
        Ok(GramMatrix::from_fn(x0.len(), |a, b| (-gamma * sq_dist(&x0[a], &x0[b])).exp()))
    }

    fn test(&self, kx: &GramMatrix, ky: &GramMatrix, kz: Option<&GramMatrix>, seed: u64) -> Result<TestResult> {
        let tc = self.cfg.test.clone().with_seed(seed);
        match kz {
            None => hsic_bootstrap(kx, ky, &tc),
            Some(kz) => match self.cfg.method {
                CiMethod::Sdcit => sdcit(kx, ky, kz, &tc),
                CiMethod::Kcipt => kcipt(kx, ky, kz, &tc),
            },
        }
    }

    /// Full test outcome of one query: HSIC when nothing is conditioned on,
    /// the configured conditional test otherwise.
    pub fn run_test(&self, q: &CiQuery) -> Result<TestResult> {
        q.validate(self.num_vars(), self.horizon())?;
        let t0 = self.sample.paths()[0].grid().first();
        let full = Interval::new(t0, self.horizon())?;
        let seed = q.seed(self.cfg.test.seed);
        let result = match q.relation {
            Relation::Sym => {
                let kx = self.segment_gram(q.i, full)?;
                let ky = self.segment_gram(q.j, full)?;
                let parts: Vec<_> = q.k.iter().map(|&v| (v, full)).collect();
                let kz = self.product(&parts)?;
                self.test(&kx, &ky, kz.as_ref(), seed)?
            }
            Relation::Future | Relation::SelfLoop => {
                let past = Interval::new(t0, t0 + q.s)?;
                let fut = Interval::new(t0 + q.s, (t0 + q.s + q.h).min(self.horizon()))?;
                let kx = self.segment_gram(q.i, past)?;
                let ky = self.segment_gram(q.j, fut)?;
                let parts: Vec<(usize, Interval)> = if q.relation == Relation::Future {
                    std::iter::once((q.j, past)).chain(q.k.iter().flat_map(|&v| [(v, past), (v, fut)])).collect()
                } else {
                    let whole = Interval::new(t0, fut.b)?;
                    q.k.iter().map(|&v| (v, whole)).collect()
                };
                let kz = self.product(&parts)?;
                self.test(&kx, &ky, kz.as_ref(), seed)?
            }
            Relation::Init => {
                let kx = self.initial_gram(q.i)?;
                let ky = self.segment_gram(q.j, full)?;
                self.test(&kx, &ky, None, seed)?
            }
        };
        Ok(result)
    }
}

fn positive_or_one(bw: f64) -> f64 {
    if bw > 0.0 {
        bw
    } else {
        1.0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl CiBackend for StatisticalBackend {
    fn num_vars(&self) -> usize {
        self.sample.num_vars()
    }

    fn horizon(&self) -> f64 {
        self.sample.paths()[0].grid().last()
    }

    fn answer(&self, q: &CiQuery) -> Result<CiAnswer> {
        Ok(CiAnswer::Test { p_value: self.run_test(q)?.p_value })
    }
}

/// How skeleton sweeps apply removals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemovalMode {
    /// Remove as soon as a separating set is found.
    #[default]
    Eager,
    /// Query every pair against the sweep-start snapshot in parallel and
    /// remove at the end of the sweep.
    Batched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    /// Split time.
    pub s: f64,
    /// Future window length.
    pub h: f64,
    pub alpha: f64,
    /// Largest conditioning set; `None` means `d - 2`.
    #[serde(default)]
    pub max_cond_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub removal: RemovalMode,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self { s: 0.1, h: 0.9, alpha: 0.05, max_cond_size: None, seed: 0, removal: RemovalMode::Eager }
    }
}

impl DiscoveryConfig {
    /// Defaults scaled to a horizon `t`.
    pub fn for_horizon(t: f64) -> Self {
        Self { s: 0.1 * t, h: 0.9 * t, ..Self::default() }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.s > 0.0 && self.h > 0.0 && self.s + self.h <= horizon * (1.0 + 1e-12)) {
            return Err(Error::InvalidDiscoveryConfig(format!(
                "need 0 < s < s + h <= T, got s = {}, h = {}, T = {horizon}",
                self.s, self.h
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidDiscoveryConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    fn cap(&self, d: usize) -> usize {
        let exact = d.saturating_sub(2);
        self.max_cond_size.map_or(exact, |c| c.min(exact))
    }
}

/// Algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Alg1,
    PcInit,
    Robust,
    Fci,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Alg1, Algorithm::PcInit, Algorithm::Robust, Algorithm::Fci];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::PcInit => "pc-init",
            Algorithm::Robust => "robust",
            Algorithm::Fci => "fci",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm '{s}' (expected alg1, pc-init, robust or fci)")))
    }
}

/// One logged CI query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(flatten)]
    pub query: CiQuery,
    pub independent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

/// Output graph together with the queries that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Discovered<G> {
    pub graph: G,
    pub log: Vec<QueryRecord>,
    /// Edges `(i, j)` oriented `i -> j` by the initial-value rule.
    pub init_oriented: Vec<(usize, usize)>,
}

/// Query front end shared by the algorithms: answers, logs and memoises.
struct Session<'a, B: CiBackend + ?Sized> {
    bk: &'a B,
    cfg: &'a DiscoveryConfig,
    log: Vec<QueryRecord>,
    memo: HashMap<(Relation, usize, usize, Vec<usize>), bool>,
}

impl<'a, B: CiBackend + ?Sized> Session<'a, B> {
    fn new(bk: &'a B, cfg: &'a DiscoveryConfig) -> Result<Self> {
        cfg.validate(bk.horizon())?;
        Ok(Self { bk, cfg, log: Vec::new(), memo: HashMap::new() })
    }

    fn query(&self, relation: Relation, i: usize, j: usize, k: &[usize]) -> CiQuery {
        CiQuery::new(relation, i, j, k.to_vec(), self.cfg.s, self.cfg.h)
    }

    fn memo_key(q: &CiQuery) -> (Relation, usize, usize, Vec<usize>) {
        let (i, j) = if q.relation == Relation::Sym { (q.i.min(q.j), q.i.max(q.j)) } else { (q.i, q.j) };
        let mut k = q.k.clone();
        k.sort_unstable();
        (q.relation, i, j, k)
    }

    fn ask(&mut self, relation: Relation, i: usize, j: usize, k: &[usize]) -> Result<bool> {
        let q = self.query(relation, i, j, k);
        let key = Self::memo_key(&q);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let rec = evaluate(self.bk, q, self.cfg.alpha)?;
        let v = rec.independent;
        self.memo.insert(key, v);
        self.log.push(rec);
        Ok(v)
    }

    /// Records answers computed outside the session, in order.
    fn absorb(&mut self, recs: Vec<QueryRecord>) {
        for rec in recs {
            let key = Self::memo_key(&rec.query);
            if self.memo.insert(key, rec.independent).is_none() {
                self.log.push(rec);
            }
        }
    }

    fn finish<G>(self, graph: G, init_oriented: Vec<(usize, usize)>) -> Discovered<G> {
        Discovered { graph, log: self.log, init_oriented }
    }
}

fn evaluate<B: CiBackend + ?Sized>(bk: &B, q: CiQuery, alpha: f64) -> Result<QueryRecord> {
    let ans = bk.answer(&q).map_err(|e| Error::Query { query: q.to_string(), source: Box::new(e) })?;
    Ok(QueryRecord { independent: ans.independent(alpha), p_value: ans.p_value(), query: q })
}

/// `X^i ⫫ X^j | X^K` on the full interval.
pub fn test_sym<B: CiBackend + ?Sized>(bk: &B, i: usize, j: usize, k: &[usize], alpha: f64) -> Result<bool> {
    let q = CiQuery::new(Relation::Sym, i, j, k.to_vec(), 0.1 * bk.horizon(), 0.9 * bk.horizon());
    Ok(evaluate(bk, q, alpha)?.independent)
}

/// `X^i_[0,s] ⫫ X^j_[s,s+h] | X^j_[0,s], X^K_[0,s+h]`.
pub fn test_future_extended<B: CiBackend + ?Sized>(
    bk: &B,
    i: usize,
    j: usize,
    k: &[usize],
    s: f64,
    h: f64,
    alpha: f64,
) -> Result<bool> {
    Ok(evaluate(bk, CiQuery::new(Relation::Future, i, j, k.to_vec(), s, h), alpha)?.independent)
}

/// `X^k_[0,s] ⫫ X^k_[s,s+h] | X^K_[0,s+h]`.
pub fn test_self_loop<B: CiBackend + ?Sized>(
    bk: &B,
    node: usize,
    k: &[usize],
    s: f64,
    h: f64,
    alpha: f64,
) -> Result<bool> {
    Ok(evaluate(bk, CiQuery::new(Relation::SelfLoop, node, node, k.to_vec(), s, h), alpha)?.independent)
}

/// `X^i_0 ⫫ X^j_[0,T]`.
pub fn test_initial_value<B: CiBackend + ?Sized>(bk: &B, i: usize, j: usize, alpha: f64) -> Result<bool> {
    let q = CiQuery::new(Relation::Init, i, j, Vec::new(), 0.1 * bk.horizon(), 0.9 * bk.horizon());
    Ok(evaluate(bk, q, alpha)?.independent)
}

/// All `c`-subsets of `items` in lexicographic order.
pub fn combinations(items: &[usize], c: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if c > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..c).collect();
    loop {
        out.push(idx.iter().map(|&p| items[p]).collect());
        let Some(p) = (0..c).rev().find(|&p| idx[p] != p + n - c) else { break };
        idx[p] += 1;
        for q in p + 1..c {
            idx[q] = idx[q - 1] + 1;
        }
    }
    out
}

/// Upper bound on the number of distinct CI queries for `d` variables.
pub fn query_budget(d: usize, c_max: usize) -> usize {
    let m = d.saturating_sub(2);
    let sum: usize = (0..=c_max.min(m)).map(|c| binomial(m, c)).sum();
    d * d * sum
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, t| acc * (n - t) / (t + 1))
}

fn ordered_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// Generic skeleton sweep: for sizes `0..=cap`, for each ordered pair still
/// present, tries the sets from `candidates(adj, i, j)` and removes the pair
/// on the first independence. Returns the separating sets found.
fn skeleton<B, F>(
    sess: &mut Session<'_, B>,
    adj: &mut [Vec<bool>],
    relation: Relation,
    candidates: F,
) -> Result<SepSetTable>
where
    B: CiBackend + ?Sized,
    F: Fn(&[Vec<bool>], usize, usize) -> Vec<usize> + Sync,
{
    let d = adj.len();
    let mut seps = SepSetTable::default();
    for c in 0..=sess.cfg.cap(d) {
        match sess.cfg.removal {
            RemovalMode::Eager => {
                for (i, j) in ordered_pairs(d) {
                    if !adj[i][j] {
                        continue;
                    }
                    for k in combinations(&candidates(adj, i, j), c) {
                        if sess.ask(relation, i, j, &k)? {
                            remove_pair(adj, relation, i, j);
                            seps.insert(i, j, k);
                            break;
                        }
                    }
                }
            }
            RemovalMode::Batched => {
                let snapshot = adj.to_vec();
                let pairs: Vec<(usize, usize)> = ordered_pairs(d).filter(|&(i, j)| snapshot[i][j]).collect();
                let (bk, cfg) = (sess.bk, sess.cfg);
                let found = pairs
                    .par_iter()
                    .map(|&(i, j)| -> Result<(Vec<QueryRecord>, Option<Vec<usize>>)> {
                        let mut recs = Vec::new();
                        for k in combinations(&candidates(&snapshot, i, j), c) {
                            let rec = evaluate(bk, CiQuery::new(relation, i, j, k.clone(), cfg.s, cfg.h), cfg.alpha)?;
                            let indep = rec.independent;
                            recs.push(rec);
                            if indep {
                                return Ok((recs, Some(k)));
                            }
                        }
                        Ok((recs, None))
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (&(i, j), (recs, sep)) in pairs.iter().zip(found) {
                    sess.absorb(recs);
                    if let Some(k) = sep {
                        remove_pair(adj, relation, i, j);
                        if seps.get(i, j).is_none() {
                            seps.insert(i, j, k);
                        }
                    }
                }
            }
        }
    }
    Ok(seps)
}

fn remove_pair(adj: &mut [Vec<bool>], relation: Relation, i: usize, j: usize) {
    adj[i][j] = false;
    if relation == Relation::Sym {
        adj[j][i] = false;
    }
}

/// Loop-removal pass: keeps `k -> k` unless `X^k` is self-independent given
/// its discovered parents.
fn remove_loops<B: CiBackend + ?Sized>(sess: &mut Session<'_, B>, g: &mut DiGraph) -> Result<()> {
    for k in 0..g.d() {
        let pa: Vec<usize> = (0..g.d()).filter(|&p| p != k && g.has_edge(p, k)).collect();
        if sess.ask(Relation::SelfLoop, k, k, &pa)? {
            g.remove_edge(k, k);
        } else {
            g.add_edge(k, k);
        }
    }
    Ok(())
}

/// Full dependence graph from future-extended queries on the lifted graph.
///
/// `adj[i][j]` stands for the edge triple `i_0 -> j_0`, `i_1 -> j_1`,
/// `i_0 -> j_1`; candidates for `K` are the current parents of `j_1`.
pub fn run_algorithm1<B: CiBackend + ?Sized>(bk: &B, cfg: &DiscoveryConfig) -> Result<Discovered<DiGraph>> {
    let d = bk.num_vars();
    let mut sess = Session::new(bk, cfg)?;
    let mut adj: Vec<Vec<bool>> = (0..d).map(|i| (0..d).map(|j| i != j).collect()).collect();
    skeleton(&mut sess, &mut adj, Relation::Future, |a, i, j| {
        (0..a.len()).filter(|&k| k != i && k != j && a[k][j]).collect()
    })?;
    let mut g = adjacency_graph(&adj);
    remove_loops(&mut sess, &mut g)?;
    Ok(sess.finish(g, Vec::new()))
}

fn adjacency_graph(adj: &[Vec<bool>]) -> DiGraph {
    let d = adj.len();
    let mut g = DiGraph::empty(d);
    for (i, j) in ordered_pairs(d) {
        if adj[i][j] {
            g.add_edge(i, j);
        }
    }
    g
}

/// Symmetric skeleton (neighbours of `j` as candidates), collider
/// orientation and Meek closure.
fn pc_pattern<B: CiBackend + ?Sized>(sess: &mut Session<'_, B>, d: usize) -> Result<MixedGraph> {
    let mut adj: Vec<Vec<bool>> = (0..d).map(|i| (0..d).map(|j| i != j).collect()).collect();
    let seps = skeleton(sess, &mut adj, Relation::Sym, |a, i, j| {
        (0..a.len()).filter(|&k| k != i && k != j && a[k][j]).collect()
    })?;
    // arcs[u][v]: u -> v still allowed
    let mut arcs = adj.clone();
    for j in 0..d {
        for i in 0..d {
            for k in i + 1..d {
                if i == j || k == j || !adj[i][j] || !adj[j][k] || adj[i][k] {
                    continue;
                }
                if seps.get(i, k).is_some_and(|s| !s.contains(&j)) {
                    // never drop both directions of an adjacency
                    if arcs[i][j] {
                        arcs[j][i] = false;
                    }
                    if arcs[k][j] {
                        arcs[j][k] = false;
                    }
                }
            }
        }
    }
    let mut m = MixedGraph::new(d);
    for i in 0..d {
        for j in i + 1..d {
            match (arcs[i][j], arcs[j][i]) {
                (true, true) => m.set(i, j, Mark::Tail, Mark::Tail),
                (true, false) => m.set(i, j, Mark::Tail, Mark::Arrow),
                (false, true) => m.set(i, j, Mark::Arrow, Mark::Tail),
                (false, false) => {}
            }
        }
    }
    Ok(apply_meek_rules(&m))
}

/// CPDAG from symmetric queries, remaining edges oriented by initial-value
/// dependence, then loop removal.
pub fn run_pc_with_init_postprocessing<B: CiBackend + ?Sized>(
    bk: &B,
    cfg: &DiscoveryConfig,
) -> Result<Discovered<DiGraph>> {
    let d = bk.num_vars();
    let mut sess = Session::new(bk, cfg)?;
    let mut m = pc_pattern(&mut sess, d)?;
    let mut oriented = Vec::new();
    for (i, j) in m.undirected_edges() {
        if sess.ask(Relation::Init, i, j, &[])? {
            m.set(j, i, Mark::Tail, Mark::Arrow);
            oriented.push((j, i));
        } else {
            m.set(i, j, Mark::Tail, Mark::Arrow);
            oriented.push((i, j));
        }
    }
    let mut g = m.to_digraph();
    remove_loops(&mut sess, &mut g)?;
    Ok(sess.finish(g, oriented))
}

/// CPDAG from symmetric queries, then every undirected `i - j` is resolved
/// with future-extended queries conditioned on the known parents of `j` and
/// each subset of its other undirected neighbours.
pub fn run_robust_no_init<B: CiBackend + ?Sized>(bk: &B, cfg: &DiscoveryConfig) -> Result<Discovered<DiGraph>> {
    let d = bk.num_vars();
    let mut sess = Session::new(bk, cfg)?;
    let m = pc_pattern(&mut sess, d)?;
    // adj[i][j]: triple i_0 -> j_0, i_1 -> j_1, i_0 -> j_1 present
    let dg = m.to_digraph();
    let mut adj: Vec<Vec<bool>> = (0..d).map(|i| (0..d).map(|j| i != j && dg.has_edge(i, j)).collect()).collect();
    let cap = cfg.cap(d);
    for (i, j) in ordered_pairs(d) {
        if !(adj[i][j] && adj[j][i]) {
            continue;
        }
        let known: Vec<usize> = (0..d).filter(|&k| k != i && k != j && adj[k][j] && !adj[j][k]).collect();
        let open: Vec<usize> = (0..d).filter(|&k| k != i && k != j && adj[k][j] && adj[j][k]).collect();
        if known.len() + open.len() > cap {
            return Err(Error::ConditioningCapExceeded { from: i, to: j, size: known.len() + open.len(), cap });
        }
        for c in 0..=open.len() {
            let mut removed = false;
            for extra in combinations(&open, c) {
                let mut k = known.clone();
                k.extend(extra);
                k.sort_unstable();
                if sess.ask(Relation::Future, i, j, &k)? {
                    adj[i][j] = false;
                    removed = true;
                    break;
                }
            }
            if removed {
                break;
            }
        }
    }
    let mut g = adjacency_graph(&adj);
    remove_loops(&mut sess, &mut g)?;
    Ok(sess.finish(g, Vec::new()))
}

/// Maximal ancestral graph over the backend's (observed) variables.
///
/// The symmetric skeleton is refined by testing every remaining adjacency
/// once more given the observed ancestors of both endpoints, which are read
/// off initial-value queries. Marks follow those queries: `i -> j` when only
/// `X^i_0` is dependent on the other path, `i <-> j` when neither is.
pub fn run_partially_observed<B: CiBackend + ?Sized>(bk: &B, cfg: &DiscoveryConfig) -> Result<Discovered<MixedGraph>> {
    let d = bk.num_vars();
    let mut sess = Session::new(bk, cfg)?;
    let mut adj: Vec<Vec<bool>> = (0..d).map(|i| (0..d).map(|j| i != j).collect()).collect();
    skeleton(&mut sess, &mut adj, Relation::Sym, |a, i, j| {
        (0..a.len()).filter(|&k| k != i && k != j && a[k][j]).collect()
    })?;
    // anc[i][j]: i is an ancestor of j
    let mut anc = vec![vec![false; d]; d];
    let mut p_init = vec![vec![None; d]; d];
    for (i, j) in ordered_pairs(d) {
        anc[i][j] = !sess.ask(Relation::Init, i, j, &[])?;
        p_init[i][j] = sess.log.last().filter(|r| r.query.i == i && r.query.j == j).and_then(|r| r.p_value);
    }
    for i in 0..d {
        for j in i + 1..d {
            if !adj[i][j] {
                continue;
            }
            let k: Vec<usize> = (0..d).filter(|&w| w != i && w != j && (anc[w][i] || anc[w][j])).collect();
            if k.len() <= cfg.cap(d) && sess.ask(Relation::Sym, i, j, &k)? {
                adj[i][j] = false;
                adj[j][i] = false;
            }
        }
    }
    let mut m = MixedGraph::new(d);
    for i in 0..d {
        for j in i + 1..d {
            if !adj[i][j] {
                continue;
            }
            let (mi, mj) = match (anc[i][j], anc[j][i]) {
                (true, false) => (Mark::Tail, Mark::Arrow),
                (false, true) => (Mark::Arrow, Mark::Tail),
                (false, false) => (Mark::Arrow, Mark::Arrow),
                // contradictory evidence: keep the direction with the smaller p-value
                (true, true) => match (p_init[i][j], p_init[j][i]) {
                    (Some(a), Some(b)) if a < b => (Mark::Tail, Mark::Arrow),
                    (Some(a), Some(b)) if b < a => (Mark::Arrow, Mark::Tail),
                    _ => (Mark::Arrow, Mark::Arrow),
                },
            };
            m.set(i, j, mi, mj);
        }
    }
    Ok(sess.finish(m, Vec::new()))
}

/// Result of [`run`]: a directed graph, or a MAG for `fci`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscoveredGraph {
    Directed(DiGraph),
    Mixed(MixedGraph),
}

impl DiscoveredGraph {
    /// Directed view; a MAG contributes both arcs for `<->`.
    pub fn to_digraph(&self) -> DiGraph {
        match self {
            DiscoveredGraph::Directed(g) => g.clone(),
            DiscoveredGraph::Mixed(m) => {
                let mut g = DiGraph::empty(m.d());
                for (i, j, mi, mj) in m.edges() {
                    if mj == Mark::Arrow {
                        g.add_edge(i, j);
                    }
                    if mi == Mark::Arrow {
                        g.add_edge(j, i);
                    }
                }
                g
            }
        }
    }
}

/// Dispatches to the selected algorithm.
pub fn run<B: CiBackend + ?Sized>(
    algorithm: Algorithm,
    bk: &B,
    cfg: &DiscoveryConfig,
) -> Result<Discovered<DiscoveredGraph>> {
    let wrap = |r: Discovered<DiGraph>| Discovered {
        graph: DiscoveredGraph::Directed(r.graph),
        log: r.log,
        init_oriented: r.init_oriented,
    };
    Ok(match algorithm {
        Algorithm::Alg1 => wrap(run_algorithm1(bk, cfg)?),
        Algorithm::PcInit => wrap(run_pc_with_init_postprocessing(bk, cfg)?),
        Algorithm::Robust => wrap(run_robust_no_init(bk, cfg)?),
        Algorithm::Fci => {
            let r = run_partially_observed(bk, cfg)?;
            Discovered { graph: DiscoveredGraph::Mixed(r.graph), log: r.log, init_oriented: r.init_oriented }
        }
    })
}
