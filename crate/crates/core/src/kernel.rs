//! Signature kernels via the Goursat PDE, Gram assembly, the median
//! bandwidth heuristic and a truncated-signature reference implementation.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{augment_time, Path, PathSample};
use crate::rng::{substream, tag};

/// Maximum dyadic refinement order.
pub const MAX_REFINEMENT: u32 = 6;
/// Jitter used by PSD checks.
pub const GRAM_JITTER: f64 = 1e-8;
/// Pair budget of the median heuristic before subsampling.
pub const MEDIAN_MAX_PAIRS: usize = 1_000_000;
/// Seed of the median heuristic subsample.
const MEDIAN_SEED: u64 = 0x5EED_0F3E_D1A4;
/// Largest number of tensor entries a truncated signature may hold.
const SIGNATURE_MAX_ENTRIES: usize = 1 << 24;

/// Static kernel applied to path values before signature integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lifting {
    Euclidean,
    Rbf { bandwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub lifting: Lifting,
    pub refinement: u32,
    pub add_time: bool,
    /// Combine refinements `r` and `r - 1` as `(4 f_r - f_{r-1}) / 3`.
    #[serde(default)]
    pub richardson: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { lifting: Lifting::Euclidean, refinement: 2, add_time: false, richardson: false }
    }
}

impl KernelConfig {
    pub fn euclidean() -> Self {
        Self::default()
    }

    pub fn rbf(bandwidth: f64) -> Self {
        Self { lifting: Lifting::Rbf { bandwidth }, refinement: 2, add_time: true, richardson: false }
    }

    pub fn with_refinement(mut self, r: u32) -> Self {
        self.refinement = r;
        self
    }

    pub fn with_richardson(mut self) -> Self {
        self.richardson = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.richardson && self.refinement == 0 {
            return Err(Error::InvalidKernel("extrapolation needs refinement >= 1".into()));
        }
        if self.refinement > MAX_REFINEMENT {
            return Err(Error::InvalidKernel(format!("refinement {} exceeds {MAX_REFINEMENT}", self.refinement)));
        }
        if let Lifting::Rbf { bandwidth } = self.lifting {
            if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(Error::InvalidKernel(format!("rbf bandwidth must be positive, got {bandwidth}")));
            }
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Median pairwise Euclidean distance between all observations of all paths.
///
/// Pairs of distinct observations are pooled across paths and time points;
/// the upper median is returned. Above [`MEDIAN_MAX_PAIRS`] pairs a fixed-seed
/// uniform subsample is used. Returns 0 when all observations coincide.
pub fn median_bandwidth(sample: &PathSample) -> Result<f64> {
    median_bandwidth_paths(sample.paths())
}

/// [`median_bandwidth`] on a plain list of paths.
pub fn median_bandwidth_paths(paths: &[Path]) -> Result<f64> {
    let obs: Vec<&[f64]> = paths.iter().flat_map(|p| p.rows()).collect();
    let n = obs.len();
    if n == 0 {
        return Err(Error::InvalidPath("median heuristic needs at least one observation".into()));
    }
    if n == 1 {
        return Ok(0.0);
    }
    let total = n * (n - 1) / 2;
    let mut dists: Vec<f64> = if total <= MEDIAN_MAX_PAIRS {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| sq_dist(obs[i], obs[j])).collect()
    } else {
        let mut rng = substream(MEDIAN_SEED, tag::MEDIAN, n as u64);
        (0..MEDIAN_MAX_PAIRS)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                sq_dist(obs[i], obs[j])
            })
            .collect()
    };
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(m.sqrt())
}

fn lifted(path: &Path, cfg: &KernelConfig) -> Result<Path> {
    if cfg.add_time && !path.is_time_augmented() {
        augment_time(path)
    } else {
        Ok(path.clone())
    }
}

/// Cell increments of the Goursat PDE on the product of the two native grids.
fn increments(x: &Path, y: &Path, lifting: Lifting) -> Vec<f64> {
    let (m, n) = (x.len() - 1, y.len() - 1);
    let mut inc = vec![0.0; m * n];
    match lifting {
        Lifting::Euclidean => {
            let dx: Vec<Vec<f64>> =
                (0..m).map(|i| x.row(i + 1).iter().zip(x.row(i)).map(|(a, b)| a - b).collect()).collect();
            let dy: Vec<Vec<f64>> =
                (0..n).map(|j| y.row(j + 1).iter().zip(y.row(j)).map(|(a, b)| a - b).collect()).collect();
            for i in 0..m {
                for j in 0..n {
                    inc[i * n + j] = dot(&dx[i], &dy[j]);
                }
            }
        }
        Lifting::Rbf { bandwidth } => {
            let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
            let k: Vec<f64> = (0..=m)
                .flat_map(|i| (0..=n).map(move |j| (i, j)))
                .map(|(i, j)| (-gamma * sq_dist(x.row(i), y.row(j))).exp())
                .collect();
            let w = n + 1;
            for i in 0..m {
                for j in 0..n {
                    inc[i * n + j] = k[(i + 1) * w + j + 1] - k[(i + 1) * w + j] - k[i * w + j + 1] + k[i * w + j];
                }
            }
        }
    }
    inc
}

/// Signature kernel of two paths as the terminal value of the Goursat PDE
/// `∂²f/∂s∂t = <dx, dy> f`, `f(0, ·) = f(·, 0) = 1`.
///
/// Every cell of the product grid is split into `4^r` sub-cells carrying an
/// equal share of the cell increment; the update is the explicit second-order
/// scheme.
pub fn sig_kernel_pde(x: &Path, y: &Path, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidPath("signature kernel needs at least two points per path".into()));
    }
    let (x, y) = (lifted(x, cfg)?, lifted(y, cfg)?);
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!("paths of dimension {} and {}", x.dim(), y.dim())));
    }
    let inc = increments(&x, &y, cfg.lifting);
    let (m, n) = (x.len() - 1, y.len() - 1);
    let fine = solve_goursat(&inc, m, n, cfg.refinement)?;
    if cfg.richardson {
        let coarse = solve_goursat(&inc, m, n, cfg.refinement - 1)?;
        Ok((4.0 * fine - coarse) / 3.0)
    } else {
        Ok(fine)
    }
}

fn solve_goursat(inc: &[f64], m: usize, n: usize, refinement: u32) -> Result<f64> {
    let r = 1usize << refinement;
    let scale = 1.0 / (r * r) as f64;
    let (rows, cols) = (m * r, n * r);
    let mut prev = vec![1.0; cols + 1];
    let mut cur = vec![1.0; cols + 1];
    for i in 0..rows {
        let cell_row = &inc[(i / r) * n..(i / r + 1) * n];
        cur[0] = 1.0;
        for j in 0..cols {
            let z = cell_row[j / r] * scale;
            let z2 = z * z / 12.0;
            cur[j + 1] = (cur[j] + prev[j + 1]) * (1.0 + 0.5 * z + z2) - prev[j] * (1.0 - z2);
        }
        if let Some(j) = cur.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteKernel { row: i + 1, col: j, rows, cols });
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[cols])
}

/// Dense kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    symmetric: bool,
}

impl GramMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged Gram rows".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let symmetric = n == m && (0..n).all(|i| (0..i).all(|j| data[i * n + j] == data[j * n + i]));
        Ok(Self { rows: n, cols: m, data, symmetric })
    }

    /// Builds a square matrix from a function of index pairs.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..n * n).map(|k| f(k / n, k % n)).collect();
        let mut g = Self { rows: n, cols: n, data, symmetric: false };
        g.symmetric = (0..n).all(|i| (0..i).all(|j| g.get(i, j) == g.get(j, i)));
        g
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &GramMatrix) -> Result<GramMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(GramMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
            symmetric: self.symmetric && other.symmetric,
        })
    }

    /// `K[perm[i], perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> GramMatrix {
        let n = perm.len();
        let data = (0..n * n).map(|k| self.get(perm[k / n], perm[k % n])).collect();
        GramMatrix { rows: n, cols: n, data, symmetric: self.symmetric }
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> GramMatrix {
        self.permuted(idx)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Whether `K + jitter * I` admits a Cholesky factorisation.
    pub fn is_psd(&self, jitter: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let mut m = self.to_dmatrix();
        for i in 0..self.rows {
            m[(i, i)] += jitter;
        }
        m.cholesky().is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Gram matrix `K[i][j] = k(a_i, b_j)`, evaluated in parallel.
pub fn gram(a: &[Path], b: &[Path], cfg: &KernelConfig) -> Result<GramMatrix> {
    cfg.validate()?;
    let (n, m) = (a.len(), b.len());
    let data = (0..n * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / m, k % m);
            sig_kernel_pde(&a[i], &b[j], cfg).map_err(|e| Error::GramEntry { row: i, col: j, source: Box::new(e) })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GramMatrix { rows: n, cols: m, data, symmetric: false })
}

/// Symmetric Gram matrix of `a` with itself; each pair is solved once.
pub fn gram_sym(a: &[Path], cfg: &KernelConfig) -> Result<GramMatrix> {
    cfg.validate()?;
    let n = a.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals = pairs
        .par_iter()
        .map(|&(i, j)| {
            sig_kernel_pde(&a[i], &a[j], cfg).map_err(|e| Error::GramEntry { row: i, col: j, source: Box::new(e) })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut data = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(vals) {
        data[i * n + j] = v;
        data[j * n + i] = v;
    }
    Ok(GramMatrix { rows: n, cols: n, data, symmetric: true })
}

/// Signature levels `0..=depth`; level `k` is a flattened tensor of `dim^k` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSignature {
    dim: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedSignature {
    fn identity(dim: usize, depth: usize) -> Self {
        let levels = (0..=depth)
            .map(|k| {
                let mut v = vec![0.0; dim.pow(k as u32)];
                if k == 0 {
                    v[0] = 1.0;
                }
                v
            })
            .collect();
        Self { dim, levels }
    }

    /// Tensor exponential of a single increment.
    fn exp(inc: &[f64], depth: usize) -> Self {
        let mut out = Self::identity(inc.len(), depth);
        for k in 1..=depth {
            let prev = &out.levels[k - 1];
            let next: Vec<f64> = prev.iter().flat_map(|p| inc.iter().map(move |x| p * x / k as f64)).collect();
            out.levels[k] = next;
        }
        out
    }

    /// Chen product `self ⊗ other`, truncated.
    pub fn chen(&self, other: &Self) -> Self {
        let depth = self.depth();
        let mut out = Self::identity(self.dim, depth);
        for n in 0..=depth {
            let lvl = &mut out.levels[n];
            lvl.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..=n {
                let (a, b) = (&self.levels[k], &other.levels[n - k]);
                let w = b.len();
                for (i, av) in a.iter().enumerate() {
                    if *av == 0.0 {
                        continue;
                    }
                    for (j, bv) in b.iter().enumerate() {
                        lvl[i * w + j] += av * bv;
                    }
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// `Σ_k <self_k, other_k>`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.levels.iter().zip(&other.levels).map(|(a, b)| dot(a, b)).sum()
    }
}

fn check_signature_size(dim: usize, depth: usize) -> Result<()> {
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(dim);
    }
    if total > SIGNATURE_MAX_ENTRIES {
        return Err(Error::SignatureTooLarge { depth, dim });
    }
    Ok(())
}

/// Iterated integrals of the piecewise-linear interpolant up to `depth`.
pub fn truncated_signature(x: &Path, depth: usize) -> Result<TruncatedSignature> {
    if depth == 0 {
        return Err(Error::InvalidKernel("signature depth must be at least 1".into()));
    }
    check_signature_size(x.dim(), depth)?;
    let mut sig = TruncatedSignature::identity(x.dim(), depth);
    for k in 1..x.len() {
        let inc: Vec<f64> = x.row(k).iter().zip(x.row(k - 1)).map(|(a, b)| a - b).collect();
        sig = sig.chen(&TruncatedSignature::exp(&inc, depth));
    }
    Ok(sig)
}

/// Random Fourier features used by the reference kernel for rbf lifting.
pub const ORACLE_RFF_FEATURES: usize = 8;
const ORACLE_RFF_SEED: u64 = 0x0AC1E;

/// Maps each observation through `sqrt(2/D) cos(W v + b)` with
/// `W ~ N(0, 1/bandwidth^2)`, `b ~ U[0, 2π)`.
pub fn random_fourier_lift(x: &Path, bandwidth: f64, n_features: usize, seed: u64) -> Result<Path> {
    let mut rng = substream(seed, tag::FEATURES, x.dim() as u64);
    let w: Vec<Vec<f64>> = (0..n_features)
        .map(|_| (0..x.dim()).map(|_| rng.sample::<f64, _>(StandardNormal) / bandwidth).collect())
        .collect();
    let b: Vec<f64> = (0..n_features).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let scale = (2.0 / n_features as f64).sqrt();
    let values: Vec<f64> = x
        .rows()
        .flat_map(|r| w.iter().zip(&b).map(|(wk, bk)| scale * (dot(wk, r) + bk).cos()).collect::<Vec<_>>())
        .collect();
    Path::new(x.grid().clone(), values, n_features)
}

/// Reference kernel `Σ_{k ≤ depth} <S(x)_k, S(y)_k>`.
///
/// With rbf lifting both paths are first mapped through
/// [`ORACLE_RFF_FEATURES`] random Fourier features, so the result only
/// approximates the rbf-lifted kernel.
pub fn truncated_sig_kernel_oracle(x: &Path, y: &Path, depth: usize, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    let (mut x, mut y) = (lifted(x, cfg)?, lifted(y, cfg)?);
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!("paths of dimension {} and {}", x.dim(), y.dim())));
    }
    if let Lifting::Rbf { bandwidth } = cfg.lifting {
        x = random_fourier_lift(&x, bandwidth, ORACLE_RFF_FEATURES, ORACLE_RFF_SEED)?;
        y = random_fourier_lift(&y, bandwidth, ORACLE_RFF_FEATURES, ORACLE_RFF_SEED)?;
    }
    Ok(truncated_signature(&x, depth)?.inner(&truncated_signature(&y, depth)?))
}

/// `Σ_{n ≤ terms} (ab)^n / (n!)^2`, the kernel of two one-dimensional linear
/// paths with total increments `a` and `b`.
pub fn linear_path_kernel_series(a: f64, b: f64, terms: usize) -> f64 {
    let z = a * b;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=terms {
        term *= z / (n * n) as f64;
        sum += term;
    }
    sum
}

/// Draws `k` distinct indices from `0..n` (helper for subsampled diagnostics).
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = substream(seed, tag::MEDIAN, 0);
    index::sample(&mut rng, n, k.min(n)).into_vec()
}
