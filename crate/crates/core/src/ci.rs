//! Kernel (conditional) independence tests on precomputed Gram matrices.
//!
//! Unconditional queries use a permutation HSIC test; conditional queries use
//! SDCIT or KCIPT, both built on a fixed-point-free permutation that keeps the
//! conditioning variable approximately invariant.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::rng::{substream, tag, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    /// Outer bootstraps of KCIPT.
    pub b_outer: usize,
    /// Inner permutations per KCIPT bootstrap.
    pub n_perm: usize,
    /// Null samples of HSIC, SDCIT and the KCIPT Monte-Carlo aggregate.
    pub n_null: usize,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self { alpha: 0.05, b_outer: 100, n_perm: 20_000, n_null: 1000, seed: 0 }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidTestConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.b_outer == 0 || self.n_perm == 0 || self.n_null == 0 {
            return Err(Error::InvalidTestConfig("bootstrap and permutation counts must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub null_samples: Vec<f64>,
    pub reject: bool,
}

impl TestResult {
    fn from_null(statistic: f64, null_samples: Vec<f64>, alpha: f64) -> Self {
        let p_value = p_value(statistic, &null_samples);
        Self { statistic, p_value, null_samples, reject: p_value < alpha }
    }
}

/// `(1 + #{null >= stat}) / (1 + #null)`.
pub fn p_value(statistic: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|v| **v >= statistic).count();
    (1 + exceed) as f64 / (1 + null.len()) as f64
}

/// Fixed-point-free permutation with its assignment cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub sigma: Vec<usize>,
    pub fixed_point_free: bool,
    pub cost: f64,
}

fn check_square(k: &GramMatrix, n: usize, what: &str) -> Result<()> {
    if !k.is_square() || k.rows() != n {
        return Err(Error::DimensionMismatch(format!("{what} is {}x{}, expected {n}x{n}", k.rows(), k.cols())));
    }
    Ok(())
}

/// Minimum-cost perfect assignment on a dense `n x n` cost matrix (row-major).
///
/// Shortest augmenting paths with dual potentials; `O(n^3)`. Returns the
/// column assigned to each row.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// RKHS distances `D(i, j) = k_ii + k_jj - 2 k_ij`, clipped at zero.
fn rkhs_distances(kz: &GramMatrix) -> Vec<f64> {
    let n = kz.rows();
    (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            (kz.get(i, i) + kz.get(j, j) - 2.0 * kz.get(i, j)).max(0.0)
        })
        .collect()
}

/// Assignment on `dist` with barred entries replaced by a cost larger than
/// any feasible total.
fn barred_assignment(dist: &[f64], barred: &[bool], n: usize) -> Vec<usize> {
    let max = dist.iter().zip(barred).filter(|(_, b)| !**b).map(|(d, _)| *d).fold(0.0, f64::max);
    let big = (max + 1.0) * (n as f64 + 1.0) * 2.0;
    let cost: Vec<f64> = dist.iter().zip(barred).map(|(d, b)| if *b { big } else { *d }).collect();
    solve_assignment(&cost, n)
}

/// Fixed-point-free permutation minimising `Σ_i D(z_i, z_σ(i))`.
pub fn find_invariant_permutation(kz: &GramMatrix) -> Result<PermutationPlan> {
    let n = kz.rows();
    if n < 2 {
        return Err(Error::InvalidTestConfig("permutation search needs at least two samples".into()));
    }
    check_square(kz, n, "kz")?;
    let dist = rkhs_distances(kz);
    let barred: Vec<bool> = (0..n * n).map(|k| k / n == k % n).collect();
    let sigma = barred_assignment(&dist, &barred, n);
    let cost = (0..n).map(|i| dist[i * n + sigma[i]]).sum();
    let fixed_point_free = sigma.iter().enumerate().all(|(i, s)| i != *s);
    Ok(PermutationPlan { sigma, fixed_point_free, cost })
}

/// `(1/n^2) tr(H Kx H · H Ky H)`.
pub fn hsic_statistic(kx: &GramMatrix, ky: &GramMatrix) -> f64 {
    let n = kx.rows();
    let cx = centered(kx);
    let cy = centered(ky);
    cx.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>() / (n * n) as f64
}

fn centered(k: &GramMatrix) -> Vec<f64> {
    let n = k.rows();
    let row_mean: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / n as f64).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| (0..n).map(|i| k.get(i, j)).sum::<f64>() / n as f64).collect();
    let total = row_mean.iter().sum::<f64>() / n as f64;
    (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            k.get(i, j) - row_mean[i] - col_mean[j] + total
        })
        .collect()
}

/// HSIC permutation test: null statistics from `n_null` random relabellings of `ky`.
pub fn hsic_bootstrap(kx: &GramMatrix, ky: &GramMatrix, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let n = kx.rows();
    if n < 5 {
        return Err(Error::InvalidTestConfig(format!("HSIC needs n >= 5, got {n}")));
    }
    check_square(kx, n, "kx")?;
    check_square(ky, n, "ky")?;
    let cx = centered(kx);
    let cy = centered(ky);
    let norm = (n * n) as f64;
    let statistic = cx.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>() / norm;
    // centering commutes with simultaneous row/column permutation
    let null = (0..cfg.n_null)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(cfg.seed, tag::NULL, s as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut acc = 0.0;
            for i in 0..n {
                let pi = perm[i] * n;
                let row = &cx[i * n..(i + 1) * n];
                for j in 0..n {
                    acc += row[j] * cy[pi + perm[j]];
                }
            }
            acc / norm
        })
        .collect();
    Ok(TestResult::from_null(statistic, null, cfg.alpha))
}

/// Unbiased MMD² between the index sets `a` and `b` of a joint kernel.
pub fn mmd_sq_unbiased(k: &GramMatrix, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidIndexSets("each index list needs at least two entries".into()));
    }
    let mut seen = vec![false; k.rows()];
    for &i in a.iter().chain(b) {
        if i >= k.rows() || seen[i] {
            return Err(Error::InvalidIndexSets(format!("index {i} repeated or out of range")));
        }
        seen[i] = true;
    }
    Ok(mmd_unchecked(k, a, b))
}

fn mmd_unchecked(k: &GramMatrix, a: &[usize], b: &[usize]) -> f64 {
    let within = |s: &[usize]| {
        let mut acc = 0.0;
        for (p, &i) in s.iter().enumerate() {
            for (q, &j) in s.iter().enumerate() {
                if p != q {
                    acc += k.get(i, j);
                }
            }
        }
        acc / (s.len() * (s.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for &i in a {
        for &j in b {
            cross += k.get(i, j);
        }
    }
    within(a) + within(b) - 2.0 * cross / (a.len() * b.len()) as f64
}

/// Pair mask excluding the diagonal and the pairs linked by `sigma`.
fn sdcit_mask(sigma: &[usize]) -> Vec<bool> {
    let n = sigma.len();
    let mut mask = vec![true; n * n];
    for i in 0..n {
        mask[i * n + i] = false;
        mask[i * n + sigma[i]] = false;
        mask[sigma[i] * n + i] = false;
    }
    mask
}

/// Masked MMD² between `(x, y, z)` and `(x, y_σ, z)` together with the mean
/// permutation distance.
fn mmsd(kxz: &[f64], ky: &[f64], dz: &[f64], sigma: &[usize], n: usize) -> (f64, f64) {
    let mask = sdcit_mask(sigma);
    let (mut k11, mut k22, mut k12, mut count) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            if !mask[i * n + j] {
                continue;
            }
            let w = kxz[i * n + j];
            k11 += w * ky[i * n + j];
            k22 += w * ky[sigma[i] * n + sigma[j]];
            k12 += w * ky[i * n + sigma[j]];
            count += 1;
        }
    }
    let c = count.max(1) as f64;
    let err = (0..n).map(|i| dz[i * n + sigma[i]]).sum::<f64>() / n as f64;
    ((k11 + k22 - 2.0 * k12) / c, err)
}

fn submatrix(m: &[f64], n: usize, idx: &[usize]) -> Vec<f64> {
    idx.iter().flat_map(|&i| idx.iter().map(move |&j| m[i * n + j])).collect()
}

/// SDCIT: masked MMD between the sample and its Z-invariant counterfactual,
/// calibrated on half-sample permutations and corrected for permutation error.
pub fn sdcit(kx: &GramMatrix, ky: &GramMatrix, kz: &GramMatrix, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let n = kx.rows();
    if n < 8 {
        return Err(Error::InvalidTestConfig(format!("SDCIT needs n >= 8, got {n}")));
    }
    check_square(kx, n, "kx")?;
    check_square(ky, n, "ky")?;
    check_square(kz, n, "kz")?;

    // random relabelling breaks ties in the assignment deterministically per seed
    let mut rng = substream(cfg.seed, tag::PERMUTATION, 0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (kx, ky, kz) = (kx.permuted(&order), ky.permuted(&order), kz.permuted(&order));

    let dz = rkhs_distances(&kz);
    let diag: Vec<bool> = (0..n * n).map(|k| k / n == k % n).collect();
    let sigma = barred_assignment(&dz, &diag, n);
    let kxz: Vec<f64> = kx.data().iter().zip(kz.data()).map(|(a, b)| a * b).collect();
    let (stat, err) = mmsd(&kxz, ky.data(), &dz, &sigma, n);

    // null world: Y replaced by its counterfactual, pairs already used barred
    let ky_cf = ky.permuted(&sigma);
    let used: Vec<bool> = sdcit_mask(&sigma).iter().map(|m| !m).collect();
    let half = n / 2;
    let used = &used;
    let draws: Vec<(f64, f64)> = (0..cfg.n_null)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(cfg.seed, tag::NULL, s as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.truncate(half);
            let sub_dz = submatrix(&dz, n, &idx);
            let sub_used: Vec<bool> = idx.iter().flat_map(|&i| idx.iter().map(move |&j| used[i * n + j])).collect();
            let pi = barred_assignment(&sub_dz, &sub_used, half);
            mmsd(&submatrix(&kxz, n, &idx), &submatrix(ky_cf.data(), n, &idx), &sub_dz, &pi, half)
        })
        .collect();
    let raw: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let errs: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let null: Vec<f64> = raw.iter().map(|v| 0.5 * (v - mean) + mean).collect();

    let beta = regression_slope(&errs, &null).max(0.0);
    let statistic = stat - beta * err;
    let null: Vec<f64> = null.iter().zip(&errs).map(|(v, e)| v - beta * e).collect();
    Ok(TestResult::from_null(statistic, null, cfg.alpha))
}

fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}

/// KCIPT: outer bootstraps of a two-sample test between one half of the data
/// and the Z-invariant counterfactual of the other half; the mean statistic is
/// calibrated by a Monte-Carlo null assembled from the inner permutation nulls.
pub fn kcipt(kx: &GramMatrix, ky: &GramMatrix, kz: &GramMatrix, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let n = kx.rows();
    if n < 8 {
        return Err(Error::InvalidTestConfig(format!("KCIPT needs n >= 8, got {n}")));
    }
    check_square(kx, n, "kx")?;
    check_square(ky, n, "ky")?;
    check_square(kz, n, "kz")?;
    let half = n / 2;

    let outer: Vec<(f64, Vec<f64>)> = (0..cfg.b_outer)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(cfg.seed, tag::BOOTSTRAP, b as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let (first, second) = (&idx[..half], &idx[half..2 * half]);
            let sub_kz = kz.submatrix(second);
            let plan = find_invariant_permutation(&sub_kz).expect("half sample has >= 2 points");
            // pooled points: (x, y, z) source indices
            let pooled: Vec<(usize, usize, usize)> = first
                .iter()
                .map(|&i| (i, i, i))
                .chain(second.iter().enumerate().map(|(p, &i)| (i, second[plan.sigma[p]], i)))
                .collect();
            let m = pooled.len();
            let joint = GramMatrix::from_fn(m, |a, c| {
                let (xa, ya, za) = pooled[a];
                let (xc, yc, zc) = pooled[c];
                kx.get(xa, xc) * ky.get(ya, yc) * kz.get(za, zc)
            });
            let a: Vec<usize> = (0..half).collect();
            let c: Vec<usize> = (half..m).collect();
            let stat = mmd_unchecked(&joint, &a, &c);
            let mut inner_rng: Rng = substream(cfg.seed, tag::PERMUTATION, b as u64);
            let mut labels: Vec<usize> = (0..m).collect();
            let inner: Vec<f64> = (0..cfg.n_perm)
                .map(|_| {
                    labels.shuffle(&mut inner_rng);
                    mmd_unchecked(&joint, &labels[..half], &labels[half..])
                })
                .collect();
            (stat, inner)
        })
        .collect();

    let statistic = outer.iter().map(|o| o.0).sum::<f64>() / outer.len() as f64;
    let mut rng = substream(cfg.seed, tag::NULL, 0);
    let null: Vec<f64> = (0..cfg.n_null)
        .map(|_| {
            outer.iter().map(|(_, inner)| inner[rng.random_range(0..inner.len())]).sum::<f64>() / outer.len() as f64
        })
        .collect();
    Ok(TestResult::from_null(statistic, null, cfg.alpha))
}

/// Conditional test selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    #[default]
    Sdcit,
    Kcipt,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use proptest::prelude::*;
    use rand_distr::StandardNormal;

    type Rng = crate::rng::Rng;

    fn rbf_gram(x: &[Vec<f64>], bw: f64) -> GramMatrix {
        GramMatrix::from_fn(x.len(), |i, j| {
            let d: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d / (2.0 * bw * bw)).exp()
        })
    }

    fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    fn derangement_brute_force(dist: &[f64], n: usize) -> f64 {
        fn rec(i: usize, n: usize, used: &mut Vec<bool>, acc: f64, dist: &[f64], best: &mut f64) {
            if i == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if j != i && !used[j] {
                    used[j] = true;
                    rec(i + 1, n, used, acc + dist[i * n + j], dist, best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, n, &mut vec![false; n], 0.0, dist, &mut best);
        best
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = from_seed(1);
        for _ in 0..100 {
            let n = rng.random_range(2..=7);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| normals(&mut rng, 2)).collect();
            let kz = rbf_gram(&pts, 1.0);
            let plan = find_invariant_permutation(&kz).unwrap();
            assert!(plan.fixed_point_free);
            let want = derangement_brute_force(&rkhs_distances(&kz), n);
            assert!((plan.cost - want).abs() < 1e-9, "{} vs {want}", plan.cost);
        }
    }

    #[test]
    fn clusters_swap_within() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![if i < 3 { 0.0 } else { 5.0 }]).collect();
        let plan = find_invariant_permutation(&rbf_gram(&pts, 1.0)).unwrap();
        assert!(plan.cost.abs() < 1e-12);
        for (i, &s) in plan.sigma.iter().enumerate() {
            assert_eq!(i < 3, s < 3);
        }
        assert!(find_invariant_permutation(&rbf_gram(&pts[..1], 1.0)).is_err());
    }

    #[test]
    fn cost_bounded_by_cyclic_shift() {
        let mut rng = from_seed(3);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| normals(&mut rng, 3)).collect();
        let kz = rbf_gram(&pts, 1.5);
        let d = rkhs_distances(&kz);
        let shift: f64 = (0..30).map(|i| d[i * 30 + (i + 1) % 30]).sum();
        assert!(find_invariant_permutation(&kz).unwrap().cost <= shift + 1e-12);
    }

    #[test]
    fn mmd_examples() {
        // two point masses with unit diagonal and cross similarity 0.3
        let k = GramMatrix::from_fn(4, |i, j| if (i < 2) == (j < 2) { 1.0 } else { 0.3 });
        assert!((mmd_sq_unbiased(&k, &[0, 1], &[2, 3]).unwrap() - 1.4).abs() < 1e-12);
        assert!(mmd_sq_unbiased(&k, &[0], &[2, 3]).is_err());
        assert!(mmd_sq_unbiased(&k, &[0, 1], &[1, 3]).is_err());
    }

    #[test]
    fn mmd_of_exchangeable_halves_is_centred() {
        let mut rng = from_seed(2);
        let vals: Vec<f64> = (0..200)
            .map(|_| {
                let pts = col(&normals(&mut rng, 40));
                let k = rbf_gram(&pts, 1.0);
                let a: Vec<usize> = (0..20).collect();
                let b: Vec<usize> = (20..40).collect();
                mmd_sq_unbiased(&k, &a, &b).unwrap()
            })
            .collect();
        let m = vals.iter().sum::<f64>() / 200.0;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 199.0).sqrt();
        assert!(m.abs() < 3.0 * sd / 200f64.sqrt(), "{m} ± {sd}");
    }

    #[test]
    fn hsic_perfect_dependence() {
        let mut rng = from_seed(5);
        let x = rbf_gram(&col(&normals(&mut rng, 40)), 1.0);
        let cfg = TestConfig { n_null: 200, ..Default::default() };
        let r = hsic_bootstrap(&x, &x, &cfg).unwrap();
        assert!(r.p_value <= 2.0 / 201.0);
        assert!(r.reject);
        let small = rbf_gram(&col(&[1.0, 2.0, 3.0]), 1.0);
        assert!(hsic_bootstrap(&small, &small, &cfg).is_err());
        assert!(hsic_bootstrap(&x, &small, &cfg).is_err());
    }

    fn rejection_rate(runs: usize, f: impl Fn(u64) -> bool + Sync) -> f64 {
        (0..runs as u64).into_par_iter().filter(|s| f(*s)).count() as f64 / runs as f64
    }

    #[test]
    fn hsic_null_calibration() {
        let rate = rejection_rate(500, |s| {
            let mut rng = substream(s, 99, 0);
            let kx = rbf_gram(&col(&normals(&mut rng, 40)), 1.0);
            let ky = rbf_gram(&col(&normals(&mut rng, 40)), 1.0);
            let cfg = TestConfig { n_null: 200, seed: s, ..Default::default() };
            hsic_bootstrap(&kx, &ky, &cfg).unwrap().reject
        });
        assert!((rate - 0.05).abs() <= 0.03, "{rate}");
    }

    #[test]
    fn hsic_p_values_super_uniform() {
        let ps: Vec<f64> = (0..400u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = substream(s, 98, 0);
                let kx = rbf_gram(&col(&normals(&mut rng, 30)), 1.0);
                let ky = rbf_gram(&col(&normals(&mut rng, 30)), 1.0);
                let cfg = TestConfig { n_null: 200, seed: s, ..Default::default() };
                hsic_bootstrap(&kx, &ky, &cfg).unwrap().p_value
            })
            .collect();
        for a in [0.01, 0.05, 0.1] {
            let cdf = ps.iter().filter(|p| **p <= a).count() as f64 / ps.len() as f64;
            let sigma = (a * (1.0 - a) / ps.len() as f64).sqrt();
            assert!(cdf <= a + 3.0 * sigma, "alpha {a}: {cdf}");
        }
    }

    fn chain(rng: &mut Rng, n: usize, mediated: bool) -> (GramMatrix, GramMatrix, GramMatrix) {
        // X -> Z -> Y (mediated) or X -> Z <- Y (collider)
        let x = normals(rng, n);
        let e = normals(rng, n);
        let (y, z): (Vec<f64>, Vec<f64>) = if mediated {
            let z: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + 0.5 * b).collect();
            let y = z.iter().zip(normals(rng, n)).map(|(a, b)| a + 0.5 * b).collect();
            (y, z)
        } else {
            let y = normals(rng, n);
            let z = x.iter().zip(&y).zip(&e).map(|((a, b), c)| a + b + 0.3 * c).collect();
            (y, z)
        };
        (rbf_gram(&col(&x), 1.0), rbf_gram(&col(&y), 1.0), rbf_gram(&col(&z), 1.0))
    }

    #[test]
    fn sdcit_calibration_and_power() {
        let cfg = |s| TestConfig { n_null: 200, seed: s, ..Default::default() };
        let null_rate = rejection_rate(200, |s| {
            let (kx, ky, kz) = chain(&mut substream(s, 97, 0), 100, true);
            sdcit(&kx, &ky, &kz, &cfg(s)).unwrap().reject
        });
        assert!(null_rate <= 0.09, "type I {null_rate}");
        let power = rejection_rate(50, |s| {
            let (kx, ky, kz) = chain(&mut substream(s, 96, 0), 100, false);
            sdcit(&kx, &ky, &kz, &cfg(s)).unwrap().reject
        });
        assert!(power >= 0.8, "power {power}");
    }

    #[test]
    fn kcipt_calibration_and_power() {
        let cfg = |s| TestConfig { b_outer: 10, n_perm: 100, n_null: 500, seed: s, ..Default::default() };
        let null_rate = rejection_rate(100, |s| {
            let mut rng = substream(s, 95, 0);
            let kx = rbf_gram(&col(&normals(&mut rng, 60)), 1.0);
            let ky = rbf_gram(&col(&normals(&mut rng, 60)), 1.0);
            let kz = rbf_gram(&col(&normals(&mut rng, 60)), 1.0);
            kcipt(&kx, &ky, &kz, &cfg(s)).unwrap().reject
        });
        assert!(null_rate <= 0.05 + 0.04 + 0.03, "type I {null_rate}");
        let power = rejection_rate(20, |s| {
            let mut rng = substream(s, 94, 0);
            let x = normals(&mut rng, 100);
            let kx = rbf_gram(&col(&x), 1.0);
            let kz = rbf_gram(&col(&normals(&mut rng, 100)), 1.0);
            kcipt(&kx, &kx, &kz, &cfg(s)).unwrap().reject
        });
        assert!(power >= 0.9, "power {power}");
    }

    #[test]
    fn tests_are_deterministic() {
        let (kx, ky, kz) = chain(&mut from_seed(4), 40, false);
        let cfg = TestConfig { n_null: 100, b_outer: 3, n_perm: 20, seed: 9, ..Default::default() };
        assert_eq!(sdcit(&kx, &ky, &kz, &cfg).unwrap(), sdcit(&kx, &ky, &kz, &cfg).unwrap());
        assert_eq!(kcipt(&kx, &ky, &kz, &cfg).unwrap(), kcipt(&kx, &ky, &kz, &cfg).unwrap());
        assert_eq!(hsic_bootstrap(&kx, &ky, &cfg).unwrap(), hsic_bootstrap(&kx, &ky, &cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        let bad = TestConfig { alpha: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TestConfig { n_null: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn permutation_has_no_fixed_points(seed in any::<u64>(), n in 2usize..40) {
            let mut rng = from_seed(seed);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0..3) as f64]).collect();
            let plan = find_invariant_permutation(&rbf_gram(&pts, 1.0)).unwrap();
            prop_assert!(plan.fixed_point_free);
            let mut sorted = plan.sigma.clone();
            sorted.sort();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn p_value_in_unit_interval(stat in -1.0f64..1.0, null in proptest::collection::vec(-1.0f64..1.0, 1..50)) {
            let p = p_value(stat, &null);
            prop_assert!(p > 0.0 && p <= 1.0);
        }
    }
}
