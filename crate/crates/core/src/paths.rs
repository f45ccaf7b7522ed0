//! Sampled continuous paths and the segment operations the tests are built on.
//!
//! A [`Path`] is a piecewise-linear interpolant of observations on its own
//! [`TimeGrid`]; grids may differ between paths of a [`PathSample`]. Values are
//! stored row-major, one row per grid point.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::ops::Range;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

const TIME_EPS: f64 = 1e-12;

/// Strictly increasing observation times inside `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if points.len() < 2 {
            return Err(Error::InvalidGrid("at least two points required".into()));
        }
        if points.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > horizon + TIME_EPS) {
            return Err(Error::InvalidGrid(format!("points must lie in [0, {horizon}]")));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("points must be strictly increasing".into()));
        }
        Ok(Self { points, horizon })
    }

    /// `n_steps + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps < 1 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        let dt = horizon / n_steps as f64;
        let mut points: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
        points[n_steps] = horizon;
        Self::new(points, horizon)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Column range assigned to one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub var: usize,
    pub start: usize,
    pub len: usize,
}

/// Assignment of variables to column blocks; the blocks partition `[0, dim)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordMap {
    blocks: Vec<Block>,
    dim: usize,
}

impl CoordMap {
    pub fn new(mut blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidPath("coordinate map has no blocks".into()));
        }
        blocks.sort_by_key(|b| b.start);
        let mut next = 0;
        let mut seen = std::collections::BTreeSet::new();
        for b in &blocks {
            if b.len == 0 || b.start != next {
                return Err(Error::InvalidPath("coordinate blocks must partition the columns".into()));
            }
            if !seen.insert(b.var) {
                return Err(Error::InvalidPath(format!("variable {} mapped twice", b.var)));
            }
            next += b.len;
        }
        blocks.sort_by_key(|b| b.var);
        Ok(Self { blocks, dim: next })
    }

    /// One column per variable, variable `k` at column `k`.
    pub fn scalar(d: usize) -> Self {
        let blocks = (0..d).map(|k| Block { var: k, start: k, len: 1 }).collect();
        Self { blocks, dim: d }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vars(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn columns(&self, var: usize) -> Result<Range<usize>> {
        self.blocks.iter().find(|b| b.var == var).map(|b| b.start..b.start + b.len).ok_or(Error::UnknownVariable(var))
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(|b| b.var)
    }
}

/// Observations of a multivariate path on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
    dim: usize,
    time_augmented: bool,
}

impl Path {
    /// Builds a path from row-major values (`grid.len() * dim` entries).
    pub fn new(grid: TimeGrid, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::InvalidPath(format!(
                "expected {} values for {} points of dimension {dim}, got {}",
                grid.len() * dim,
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values, dim, time_augmented: false })
    }

    pub fn from_rows(grid: TimeGrid, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidPath("ragged value rows".into()));
        }
        Self::new(grid, rows.concat(), dim)
    }

    /// One-dimensional path from a value per grid point.
    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, 1)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn is_time_augmented(&self) -> bool {
        self.time_augmented
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    /// Linear interpolation of the full row at time `t` (clamped to the grid).
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let pts = self.grid.points();
        if t <= pts[0] {
            return self.row(0).to_vec();
        }
        let last = pts.len() - 1;
        if t >= pts[last] {
            return self.row(last).to_vec();
        }
        let hi = pts.partition_point(|&p| p < t);
        if (pts[hi] - t).abs() <= TIME_EPS {
            return self.row(hi).to_vec();
        }
        let lo = hi - 1;
        let w = (t - pts[lo]) / (pts[hi] - pts[lo]);
        self.row(lo).iter().zip(self.row(hi)).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// Total variation of the piecewise-linear interpolant (Euclidean norm per segment).
    pub fn total_variation(&self) -> f64 {
        let rows: Vec<&[f64]> = self.rows().collect();
        rows.windows(2).map(|w| w[0].iter().zip(w[1]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()).sum()
    }
}

/// Closed time interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && a < b && b.is_finite()) {
            return Err(Error::DegenerateInterval { a, b });
        }
        Ok(Self { a, b })
    }
}

/// A collection of i.i.d. paths sharing one coordinate map.
///
/// Independence across paths is a modelling contract of the caller and is
/// not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    paths: Vec<Path>,
    coord_map: CoordMap,
}

impl PathSample {
    pub fn new(paths: Vec<Path>, coord_map: CoordMap) -> Result<Self> {
        if let Some(p) = paths.iter().find(|p| p.dim() != coord_map.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "path of dimension {} does not match coordinate map of dimension {}",
                p.dim(),
                coord_map.dim()
            )));
        }
        Ok(Self { paths, coord_map })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn coord_map(&self) -> &CoordMap {
        &self.coord_map
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.coord_map.num_vars()
    }

    /// Restricts every path to `coords` on `iv`, rebased at `iv.a`.
    pub fn segments(&self, coords: &[usize], iv: Interval) -> Result<Vec<Path>> {
        self.paths.iter().map(|p| restrict_and_rebase(p, &self.coord_map, coords, iv)).collect()
    }

    /// Keeps only the given variables (in the given order), renumbered from 0.
    pub fn select_vars(&self, vars: &[usize]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(vars.len());
        let mut cols = Vec::new();
        for (new_var, &v) in vars.iter().enumerate() {
            let r = self.coord_map.columns(v)?;
            blocks.push(Block { var: new_var, start: cols.len(), len: r.len() });
            cols.extend(r);
        }
        let map = CoordMap::new(blocks)?;
        let paths = self
            .paths
            .iter()
            .map(|p| {
                let values = p.rows().flat_map(|r| cols.iter().map(move |&c| r[c])).collect();
                Path::new(p.grid.clone(), values, cols.len())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(paths, map)
    }

    /// Writes one JSON object per path.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let coord_map: Vec<[usize; 3]> = self.coord_map.blocks().iter().map(|b| [b.var, b.start, b.len]).collect();
        for p in &self.paths {
            let rec = PathRecord {
                t: p.times().to_vec(),
                x: p.rows().map(|r| r.to_vec()).collect(),
                coord_map: coord_map.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads the JSON Lines format written by [`PathSample::write_jsonl`].
    ///
    /// The horizon of each path is taken to be its last observation time.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut paths = Vec::new();
        let mut map: Option<CoordMap> = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PathRecord = serde_json::from_str(&line)?;
            let blocks = rec.coord_map.iter().map(|&[var, start, len]| Block { var, start, len }).collect();
            let this_map = CoordMap::new(blocks)?;
            match &map {
                Some(m) if *m != this_map => {
                    return Err(Error::Parse(format!("line {}: coordinate map differs", lineno + 1)))
                }
                None => map = Some(this_map),
                _ => {}
            }
            let horizon = *rec.t.last().ok_or_else(|| Error::Parse("empty time list".into()))?;
            let grid = TimeGrid::new(rec.t, horizon)?;
            paths.push(Path::from_rows(grid, &rec.x)?);
        }
        let map = map.ok_or_else(|| Error::Parse("no paths in input".into()))?;
        Self::new(paths, map)
    }

    /// Imports long-format CSV with header `path_id,t,coord,value`.
    ///
    /// Rows are pivoted per `path_id` (in order of first appearance) into one
    /// row per distinct time, sorted by time; `coord` is the column index and
    /// every (path, time) must carry a value for every column. Each column
    /// becomes its own one-dimensional variable.
    pub fn read_long_csv<R: std::io::Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            path_id: String,
            t: f64,
            coord: usize,
            value: f64,
        }
        let mut order: Vec<String> = Vec::new();
        let mut cells: BTreeMap<String, BTreeMap<u64, BTreeMap<usize, f64>>> = BTreeMap::new();
        let mut dim = 0;
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: Row = row?;
            if !cells.contains_key(&row.path_id) {
                order.push(row.path_id.clone());
            }
            dim = dim.max(row.coord + 1);
            let key = ordered_bits(row.t);
            cells.entry(row.path_id).or_default().entry(key).or_default().insert(row.coord, row.value);
        }
        let mut paths = Vec::with_capacity(order.len());
        for id in &order {
            let by_time = &cells[id];
            let mut times = Vec::with_capacity(by_time.len());
            let mut values = Vec::with_capacity(by_time.len() * dim);
            for (&key, coords) in by_time {
                times.push(f64_from_ordered_bits(key));
                for c in 0..dim {
                    let v = coords.get(&c).ok_or_else(|| {
                        Error::Parse(format!("path {id}: missing coord {c} at t={}", f64_from_ordered_bits(key)))
                    })?;
                    values.push(*v);
                }
            }
            let horizon = *times.last().ok_or_else(|| Error::Parse(format!("path {id} is empty")))?;
            paths.push(Path::new(TimeGrid::new(times, horizon)?, values, dim)?);
        }
        Self::new(paths, CoordMap::scalar(dim))
    }
}

fn ordered_bits(t: f64) -> u64 {
    let b = t.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn f64_from_ordered_bits(b: u64) -> f64 {
    if b >> 63 == 1 {
        f64::from_bits(b & !(1 << 63))
    } else {
        f64::from_bits(!b)
    }
}

#[derive(Serialize, Deserialize)]
struct PathRecord {
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
    coord_map: Vec<[usize; 3]>,
}

/// Selects the columns of `coords` on `iv` and subtracts their value at `iv.a`.
///
/// Interval endpoints that are not grid points are inserted by linear
/// interpolation. A time column, if present, is carried along unrebased.
pub fn restrict_and_rebase(path: &Path, map: &CoordMap, coords: &[usize], iv: Interval) -> Result<Path> {
    if coords.is_empty() {
        return Err(Error::InvalidPath("no coordinates selected".into()));
    }
    let mut cols = Vec::new();
    for &k in coords {
        cols.extend(map.columns(k)?);
    }
    let degenerate = Error::DegenerateInterval { a: iv.a, b: iv.b };
    if !(iv.a < iv.b) || iv.a < path.grid.first() - TIME_EPS || iv.b > path.grid.last() + TIME_EPS {
        return Err(degenerate);
    }
    let pts = path.times();
    let mut times = vec![iv.a];
    let mut rows = vec![path.value_at(iv.a)];
    for (i, &t) in pts.iter().enumerate() {
        if t > iv.a + TIME_EPS && t < iv.b - TIME_EPS {
            times.push(t);
            rows.push(path.row(i).to_vec());
        }
    }
    times.push(iv.b);
    rows.push(path.value_at(iv.b));
    let base: Vec<f64> = cols.iter().map(|&c| rows[0][c]).collect();
    let time_col = path.time_augmented.then(|| path.dim - 1);
    let out_dim = cols.len() + usize::from(time_col.is_some());
    let mut values = Vec::with_capacity(rows.len() * out_dim);
    for r in &rows {
        values.extend(cols.iter().zip(&base).map(|(&c, b)| r[c] - b));
        if let Some(tc) = time_col {
            values.push(r[tc]);
        }
    }
    let grid = TimeGrid::new(times, path.grid.horizon())?;
    Ok(Path { grid, values, dim: out_dim, time_augmented: path.time_augmented })
}

/// Appends the observation times as an auxiliary last column.
pub fn augment_time(path: &Path) -> Result<Path> {
    if path.time_augmented {
        return Err(Error::TimeAlreadyAugmented);
    }
    let dim = path.dim + 1;
    let mut values = Vec::with_capacity(path.len() * dim);
    for (r, &t) in path.rows().zip(path.times()) {
        values.extend_from_slice(r);
        values.push(t);
    }
    Ok(Path { grid: path.grid.clone(), values, dim, time_augmented: true })
}

/// Drops `round(drop_fraction * len)` interior grid points uniformly at random.
///
/// The first and last observations are always kept.
pub fn apply_missingness(path: &Path, drop_fraction: f64, rng: &mut Rng) -> Result<Path> {
    let n = path.len();
    if !(0.0..1.0).contains(&drop_fraction) {
        return Err(Error::DropFractionTooLarge { fraction: drop_fraction, points: n });
    }
    let k = (drop_fraction * n as f64).round() as usize;
    if k == 0 {
        return Ok(path.clone());
    }
    let interior = n.saturating_sub(2);
    if k > interior {
        return Err(Error::DropFractionTooLarge { fraction: drop_fraction, points: n });
    }
    let mut dropped = vec![false; n];
    for i in index::sample(rng, interior, k) {
        dropped[i + 1] = true;
    }
    let mut times = Vec::with_capacity(n - k);
    let mut values = Vec::with_capacity((n - k) * path.dim);
    for i in (0..n).filter(|&i| !dropped[i]) {
        times.push(path.times()[i]);
        values.extend_from_slice(path.row(i));
    }
    Ok(Path {
        grid: TimeGrid::new(times, path.grid.horizon())?,
        values,
        dim: path.dim,
        time_augmented: path.time_augmented,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use proptest::prelude::*;

    fn grid(pts: &[f64]) -> TimeGrid {
        TimeGrid::new(pts.to_vec(), *pts.last().unwrap()).unwrap()
    }

    fn uniform_path(n: usize, f: impl Fn(f64) -> f64) -> Path {
        let g = TimeGrid::uniform(n, 1.0).unwrap();
        let v = g.points().iter().map(|&t| f(t)).collect();
        Path::scalar(g, v).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(TimeGrid::new(vec![0.0], 1.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.0], 1.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 2.0], 1.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], 0.0).is_err());
        assert_eq!(TimeGrid::uniform(4, 1.0).unwrap().points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn constant_path_rebases_to_zero() {
        let p = uniform_path(10, |_| 3.5);
        let map = CoordMap::scalar(1);
        let r = restrict_and_rebase(&p, &map, &[0], Interval::new(0.2, 0.8).unwrap()).unwrap();
        assert_eq!(r.times()[0], 0.2);
        assert_eq!(*r.times().last().unwrap(), 0.8);
        assert!(r.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn full_interval_on_zero_started_path_is_identity() {
        let p = uniform_path(8, |t| t * t - t);
        let map = CoordMap::scalar(1);
        let r = restrict_and_rebase(&p, &map, &[0], Interval::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(r, p);
    }

    #[test]
    fn linear_path_half_interval() {
        let p = Path::scalar(grid(&[0.0, 0.5, 1.0]), vec![0.0, 1.0, 2.0]).unwrap();
        let r = restrict_and_rebase(&p, &CoordMap::scalar(1), &[0], Interval::new(0.5, 1.0).unwrap()).unwrap();
        assert_eq!(r.times(), &[0.5, 1.0]);
        assert_eq!(r.values(), &[0.0, 1.0]);
    }

    #[test]
    fn endpoints_are_interpolated() {
        let p = Path::scalar(grid(&[0.0, 0.5, 1.0]), vec![0.0, 1.0, 2.0]).unwrap();
        let r = restrict_and_rebase(&p, &CoordMap::scalar(1), &[0], Interval::new(0.25, 0.75).unwrap()).unwrap();
        assert_eq!(r.times(), &[0.25, 0.5, 0.75]);
        assert_eq!(r.values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn restrict_errors() {
        let p = uniform_path(4, |t| t);
        let map = CoordMap::scalar(1);
        assert!(matches!(
            restrict_and_rebase(&p, &map, &[3], Interval::new(0.0, 1.0).unwrap()),
            Err(Error::UnknownVariable(3))
        ));
        let short = Path::scalar(grid(&[0.0, 0.5]), vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            restrict_and_rebase(&short, &map, &[0], Interval::new(0.2, 0.9).unwrap()),
            Err(Error::DegenerateInterval { .. })
        ));
        assert!(Interval::new(0.5, 0.5).is_err());
    }

    #[test]
    fn selects_blocks() {
        let g = grid(&[0.0, 1.0]);
        let p = Path::from_rows(g, &[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        let map = CoordMap::new(vec![Block { var: 0, start: 0, len: 2 }, Block { var: 1, start: 2, len: 1 }]).unwrap();
        let r = restrict_and_rebase(&p, &map, &[1], Interval::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.dim(), 1);
        assert_eq!(r.values(), &[0.0, 3.0]);
        let r = restrict_and_rebase(&p, &map, &[0], Interval::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.values(), &[0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn coord_map_must_partition() {
        assert!(CoordMap::new(vec![Block { var: 0, start: 1, len: 1 }]).is_err());
        assert!(CoordMap::new(vec![Block { var: 0, start: 0, len: 1 }, Block { var: 0, start: 1, len: 1 }]).is_err());
    }

    #[test]
    fn augment_time_appends_grid() {
        let p = Path::scalar(grid(&[0.0, 0.5, 1.0]), vec![3.0, 1.0, 2.0]).unwrap();
        let a = augment_time(&p).unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.column(1), vec![0.0, 0.5, 1.0]);
        assert_eq!(a.column(0), p.column(0));
        assert!(matches!(augment_time(&a), Err(Error::TimeAlreadyAugmented)));

        let z = Path::scalar(grid(&[0.0, 0.3, 1.0]), vec![0.0; 3]).unwrap();
        let t = augment_time(&z).unwrap().column(1);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn missingness_counts_and_determinism() {
        let p = uniform_path(127, |t| t.sin());
        assert_eq!(p.len(), 128);
        assert_eq!(apply_missingness(&p, 0.0, &mut from_seed(1)).unwrap(), p);
        let a = apply_missingness(&p, 0.25, &mut from_seed(9)).unwrap();
        let b = apply_missingness(&p, 0.25, &mut from_seed(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 96);
        assert_eq!(a.times()[0], 0.0);
        assert_eq!(*a.times().last().unwrap(), 1.0);
        let short = uniform_path(3, |t| t);
        assert!(matches!(apply_missingness(&short, 0.9, &mut from_seed(1)), Err(Error::DropFractionTooLarge { .. })));
    }

    #[test]
    fn missingness_retained_fraction_within_binomial_band() {
        // 1000 seeded trials; per-point retention is compared with a 3-sigma
        // binomial band around 1 - k/interior.
        let p = uniform_path(63, |t| t);
        let interior = 62.0;
        let k = (0.3f64 * 64.0).round();
        let q = 1.0 - k / interior;
        let mut kept_interior = 0usize;
        for seed in 0..1000 {
            let m = apply_missingness(&p, 0.3, &mut from_seed(seed)).unwrap();
            assert_eq!(m.times()[0], 0.0);
            assert_eq!(*m.times().last().unwrap(), 1.0);
            kept_interior += m.len() - 2;
        }
        let trials = 1000.0 * interior;
        let frac = kept_interior as f64 / trials;
        let sigma = (q * (1.0 - q) / trials).sqrt();
        assert!((frac - q).abs() <= 3.0 * sigma + 1e-12, "{frac} vs {q}");
    }

    #[test]
    fn jsonl_round_trip() {
        let g = grid(&[0.0, 0.25, 1.0]);
        let p = Path::from_rows(g, &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.5]]).unwrap();
        let s = PathSample::new(vec![p.clone(), p], CoordMap::scalar(2)).unwrap();
        let mut buf = Vec::new();
        s.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"t\":[0.0,0.25,1.0],\"x\":[[1.0,2.0],"));
        let back = PathSample::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn long_csv_pivots() {
        let csv = "path_id,t,coord,value\n\
                   b,0.5,0,1.5\nb,0.0,0,0.0\nb,0.0,1,9.0\nb,0.5,1,8.0\n\
                   a,0.0,0,1.0\na,1.0,0,2.0\na,0.0,1,3.0\na,1.0,1,4.0\n";
        let s = PathSample::read_long_csv(csv.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.paths()[0].times(), &[0.0, 0.5]);
        assert_eq!(s.paths()[0].values(), &[0.0, 9.0, 1.5, 8.0]);
        assert_eq!(s.paths()[1].values(), &[1.0, 3.0, 2.0, 4.0]);
        let bad = "path_id,t,coord,value\na,0.0,0,1.0\na,1.0,1,2.0\n";
        assert!(PathSample::read_long_csv(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn rebasing_ignores_constant_shifts(
            vals in proptest::collection::vec(-5.0f64..5.0, 9),
            shift in -10.0f64..10.0,
            a in 0.0f64..0.45,
            b in 0.55f64..1.0,
        ) {
            let g = TimeGrid::uniform(8, 1.0).unwrap();
            let p = Path::scalar(g.clone(), vals.clone()).unwrap();
            let q = Path::scalar(g, vals.iter().map(|v| v + shift).collect()).unwrap();
            let map = CoordMap::scalar(1);
            let iv = Interval::new(a, b).unwrap();
            let rp = restrict_and_rebase(&p, &map, &[0], iv).unwrap();
            let rq = restrict_and_rebase(&q, &map, &[0], iv).unwrap();
            for (x, y) in rp.values().iter().zip(rq.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn full_restriction_is_idempotent(vals in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let p = Path::scalar(TimeGrid::uniform(5, 1.0).unwrap(), vals).unwrap();
            let map = CoordMap::scalar(1);
            let iv = Interval::new(0.0, 1.0).unwrap();
            let once = restrict_and_rebase(&p, &map, &[0], iv).unwrap();
            let twice = restrict_and_rebase(&once, &map, &[0], iv).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
