//! Weighted particle clouds on `R^n` and time-indexed curves of them.
//!
//! An [`EmpiricalMeasure`] is an ordered list of points with nonnegative
//! weights summing to one. All measure arithmetic in this crate (pushforward,
//! mixtures, moments) is exact on clouds; continuous densities enter only
//! through deterministic sampling in [`crate::scenarios`].
//!
//! Values are immutable after construction and safe to share across threads.
//! Weighted sums use compensated (Neumaier) summation so results do not
//! depend on thread count or chunking.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

/// Constructors renormalize weight sums within this tolerance and reject
/// anything farther from 1.
pub const WEIGHT_RENORM_TOL: f64 = 1e-9;

/// Post-construction weight sums hold to this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Compensated (Neumaier) sum of a sequence.
pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A probability measure on `R^n` represented as a weighted particle cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<DVector<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl EmpiricalMeasure {
    /// Builds a cloud from points and weights.
    ///
    /// Weights must be nonnegative and sum to 1 within `1e-9`; the sum is
    /// renormalized to machine accuracy. Points must be finite and share a
    /// dimension.
    pub fn new(points: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical measure needs at least one point".into(),
            ));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "point {i} has NaN/Inf coordinate"
                )));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights(format!("weight {i} = {w}")));
            }
        }
        let sum = neumaier_sum(weights.iter().copied());
        if (sum - 1.0).abs() > WEIGHT_RENORM_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, beyond renormalization tolerance"
            )));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self {
            points,
            weights,
            dim,
        })
    }

    /// The Dirac measure at a single point.
    pub fn dirac(point: DVector<f64>) -> Self {
        Self::new(vec![point], vec![1.0]).expect("dirac is always valid")
    }

    /// Equal-weight cloud over the given points.
    pub fn equal_weights(points: Vec<DVector<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when all weights are equal (within `1e-12` of `1/len`).
    pub fn is_equal_weight(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| (x - w).abs() <= 1e-12)
    }

    /// `∫ f dμ` as a compensated weighted sum.
    pub fn expectation(&self, mut f: impl FnMut(&DVector<f64>) -> f64) -> f64 {
        neumaier_sum(
            self.points
                .iter()
                .zip(&self.weights)
                .map(|(p, &w)| w * f(p)),
        )
    }

    /// Weighted mean point.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for j in 0..self.dim {
            m[j] = self.expectation(|p| p[j]);
        }
        m
    }

    /// `p`-th moment about `x0`: `Σ w_i |x_i − x0|^p`.
    pub fn moment(&self, x0: &DVector<f64>, p: f64) -> Result<f64> {
        if x0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x0.len(),
            });
        }
        if p < 1.0 {
            return Err(Error::InvalidArgument(format!("moment order p = {p} < 1")));
        }
        Ok(self.expectation(|x| (x - x0).norm().powf(p)))
    }

    /// Mass-weighted `q`-th moment restricted to `|x − x0| > radius`.
    pub fn tail_moment(&self, x0: &DVector<f64>, q: f64, radius: f64) -> Result<f64> {
        if x0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x0.len(),
            });
        }
        Ok(self.expectation(|x| {
            let d = (x - x0).norm();
            if d > radius {
                d.powf(q)
            } else {
                0.0
            }
        }))
    }

    /// Covariance matrix `Σ w_i (x_i − mean)(x_i − mean)ᵀ`.
    ///
    /// The result is symmetrized explicitly so it is symmetric to the last bit.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean();
        let n = self.dim;
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.expectation(|p| (p[i] - m[i]) * (p[j] - m[j]));
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    /// Pushforward under `f`: points mapped, weights unchanged.
    ///
    /// Fails if `f` produces a NaN/Inf, identifying the offending point.
    pub fn pushforward(&self, f: impl Fn(&DVector<f64>) -> DVector<f64> + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let mapped: Vec<DVector<f64>> = self.points.par_iter().map(&f).collect();
        for (i, p) in mapped.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "pushforward produced NaN/Inf at point {i} = {:?}",
                    self.points[i].as_slice()
                )));
            }
        }
        Self::new(mapped, self.weights.clone())
    }

    /// Pushforward under a fallible map (ODE flows can abort); weights
    /// unchanged, first error wins deterministically.
    pub fn pushforward_fallible(
        &self,
        f: impl Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let mapped: Vec<Result<DVector<f64>>> = self.points.par_iter().map(&f).collect();
        let mut points = Vec::with_capacity(mapped.len());
        for (i, r) in mapped.into_iter().enumerate() {
            let p = r?;
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "pushforward produced NaN/Inf at point {i} = {:?}",
                    self.points[i].as_slice()
                )));
            }
            points.push(p);
        }
        Self::new(points, self.weights.clone())
    }

    /// Finite mixture `Σ λ_k μ_k`.
    ///
    /// Component weights must be nonnegative and sum to 1 within `1e-12`; the
    /// result concatenates the particle lists with weights scaled by the
    /// component weights and renormalizes.
    pub fn mixture(components: &[(f64, &EmpiricalMeasure)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture of zero components".into()));
        }
        let lambda_sum = neumaier_sum(components.iter().map(|(l, _)| *l));
        if (lambda_sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!(
                "mixture weights sum to {lambda_sum}"
            )));
        }
        let dim = components[0].1.dim;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (lambda, m) in components {
            if *lambda < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "negative mixture weight {lambda}"
                )));
            }
            if m.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim,
                });
            }
            points.extend(m.points.iter().cloned());
            weights.extend(m.weights.iter().map(|w| w * lambda));
        }
        Self::new(points, weights)
    }

    /// Deterministic systematic (stratified) resampling to at most `budget`
    /// particles.
    ///
    /// Clouds at or under budget are returned unchanged, so the operation is
    /// idempotent there. Over budget, the particles are ordered by their
    /// projection onto a seeded random direction and `budget` equal-weight
    /// survivors are drawn at the stratified positions `(j + u)/budget` of
    /// the cumulative weights, with a single uniform offset `u` from the
    /// seed. Sorting before the walk is what makes the stratification spatial
    /// (in one dimension it is exact quantile decimation), keeping the
    /// per-step resampling noise at `O(1/budget)` instead of the
    /// `O(1/√budget)` of order-agnostic draws.
    pub fn resample(&self, budget: usize, seed: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidArgument("resample budget must be ≥ 1".into()));
        }
        if self.len() <= budget {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offset: f64 = rng.gen_range(0.0..1.0);
        let direction: DVector<f64> = if self.dim == 1 {
            DVector::from_element(1, 1.0)
        } else {
            let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
            use rand::distributions::Distribution;
            let mut d =
                DVector::from_iterator(self.dim, (0..self.dim).map(|_| normal.sample(&mut rng)));
            let n = d.norm();
            if n > 0.0 {
                d /= n;
            } else {
                d[0] = 1.0;
            }
            d
        };
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let pa = self.points[a].dot(&direction);
            let pb = self.points[b].dot(&direction);
            pa.partial_cmp(&pb).unwrap()
        });
        let mut out = Vec::with_capacity(budget);
        let mut cum = 0.0;
        let mut pos = 0usize;
        for j in 0..budget {
            let target = (j as f64 + offset) / budget as f64;
            while cum + self.weights[order[pos]] < target && pos + 1 < self.len() {
                cum += self.weights[order[pos]];
                pos += 1;
            }
            out.push(self.points[order[pos]].clone());
        }
        Self::equal_weights(out)
    }
}

/// A time-indexed sequence of empirical measures on a shared grid.
#[derive(Debug, Clone)]
pub struct MeasureCurve {
    times: Vec<f64>,
    states: Vec<EmpiricalMeasure>,
    dim: usize,
}

impl MeasureCurve {
    /// Builds a curve; times must start at 0 and be strictly increasing, and
    /// all states must share a dimension.
    pub fn new(times: Vec<f64>, states: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::GridMismatch(format!(
                "{} times vs {} states",
                times.len(),
                states.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::GridMismatch(format!(
                "curve must start at t = 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            // Negated comparison also rejects NaN times.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(w[1] > w[0]) {
                return Err(Error::GridMismatch(format!(
                    "times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let dim = states[0].dim();
        for s in &states {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
        }
        Ok(Self { times, states, dim })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[EmpiricalMeasure] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the node equal to `t` (within `1e-12` absolute).
    pub fn node_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= 1e-12)
            .ok_or(Error::NotANode(t))
    }

    /// State at node time `t`.
    pub fn state_at(&self, t: f64) -> Result<&EmpiricalMeasure> {
        Ok(&self.states[self.node_index(t)?])
    }
}

// ---------------------------------------------------------------------------
// File formats.
//
// Cloud CSV: header `w,x0,...,x{n-1}`, one particle per row. Curve: one CSV
// per time node plus an index JSON `{ "times": [...], "files": [...],
// "dim": n }`. Floats are written with Rust's shortest round-trip formatting,
// so identical measures produce byte-identical files.
// ---------------------------------------------------------------------------

/// Writes a cloud to CSV (`w,x0,...`).
pub fn write_cloud(m: &EmpiricalMeasure, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = std::iter::once("w".to_string())
        .chain((0..m.dim()).map(|j| format!("x{j}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for (p, w) in m.points().iter().zip(m.weights()) {
        let mut row = vec![format!("{w}")];
        row.extend(p.iter().map(|c| format!("{c}")));
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a cloud from CSV written by [`write_cloud`].
pub fn read_cloud(path: &Path) -> Result<EmpiricalMeasure> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::FileFormat(format!("{}: empty file", path.display())))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"w") {
        return Err(Error::FileFormat(format!(
            "{}: first column must be `w`",
            path.display()
        )));
    }
    let dim = cols.len() - 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::FileFormat(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                lineno + 2,
                dim + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::FileFormat(format!("{}: bad float `{s}`: {e}", path.display())))
        };
        weights.push(parse(fields[0])?);
        points.push(DVector::from_iterator(
            dim,
            fields[1..]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<Vec<_>>>()?,
        ));
    }
    EmpiricalMeasure::new(points, weights)
}

/// Curve index JSON contents.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct CurveIndex {
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub dim: usize,
}

/// Writes a curve as one CSV per node plus an index JSON; returns the list of
/// written file paths (index last).
pub fn write_curve(curve: &MeasureCurve, dir: &Path, basename: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut paths = Vec::new();
    for (i, state) in curve.states().iter().enumerate() {
        let name = format!("{basename}_{i:05}.csv");
        let path = dir.join(&name);
        write_cloud(state, &path)?;
        files.push(name);
        paths.push(path);
    }
    let index = CurveIndex {
        times: curve.times().to_vec(),
        files,
        dim: curve.dim(),
    };
    let index_path = dir.join(format!("{basename}_index.json"));
    std::fs::write(&index_path, serde_json::to_string_pretty(&index)?)?;
    paths.push(index_path);
    Ok(paths)
}

/// Reads a curve from its index JSON.
pub fn read_curve(index_path: &Path) -> Result<MeasureCurve> {
    let index: CurveIndex = serde_json::from_str(&std::fs::read_to_string(index_path)?)?;
    let dir = index_path.parent().unwrap_or(Path::new("."));
    let mut states = Vec::new();
    for f in &index.files {
        let m = read_cloud(&dir.join(f))?;
        if m.dim() != index.dim {
            return Err(Error::DimensionMismatch {
                expected: index.dim,
                got: m.dim(),
            });
        }
        states.push(m);
    }
    MeasureCurve::new(index.times, states)
}
