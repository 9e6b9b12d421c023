//! Canonical scenarios: ensemble maps bundled with initial measures,
//! closed-form reference curves, and declared regularity bounds.
//!
//! Registry keys (also reachable from the CLI config): `wiener`,
//! `drifted_wiener`, `isotropic2d`, `clt`, `nonuniqueness`.
//!
//! Continuous densities enter only through deterministic sampling:
//! one-dimensional Gaussians by mid-quantile clouds, product Gaussians by
//! tensor grids of mid-quantiles. Both are rescaled per axis so the cloud
//! mean and covariance match the target exactly, which keeps
//! covariance-driven ensemble maps on their intended trajectories.

use crate::ensemble::{EnsembleMap, FieldEnsemble};
use crate::fields::VectorField;
use crate::measure::{EmpiricalMeasure, MeasureCurve};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Vector2};
use statrs::distribution::ContinuousCDF;
use std::sync::Arc;

/// Reference-curve generator: `(time, requested particle count) -> cloud`.
pub type Reference = Arc<dyn Fn(f64, usize) -> Result<EmpiricalMeasure> + Send + Sync>;

/// A named ensemble map with initial state, optional closed-form reference,
/// working exponent and horizon.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub map: EnsembleMap,
    pub mu0: EmpiricalMeasure,
    pub reference: Option<Reference>,
    pub dim: usize,
    pub horizon: f64,
    pub p: f64,
}

/// Deterministic mid-quantile cloud for `N(mean, var)` on `R^1`, rescaled so
/// the cloud mean and variance equal the targets exactly.
pub fn gaussian_quantile_cloud(mean: f64, var: f64, n: usize) -> Result<EmpiricalMeasure> {
    if var < 0.0 || !var.is_finite() {
        return Err(Error::InvalidArgument(format!("variance {var}")));
    }
    let n = n.max(1);
    if var == 0.0 {
        return Ok(EmpiricalMeasure::dirac(DVector::from_element(1, mean)));
    }
    let z = standard_quantiles(n);
    let scale = (var / sample_var(&z)).sqrt();
    EmpiricalMeasure::equal_weights(
        z.iter()
            .map(|&zi| DVector::from_element(1, mean + scale * zi))
            .collect(),
    )
}

/// Deterministic tensor-grid cloud for a product Gaussian
/// `N(means, diag(vars))`, with per-axis exact mean and variance.
pub fn gaussian_product_cloud(
    means: &[f64],
    vars: &[f64],
    per_axis: usize,
) -> Result<EmpiricalMeasure> {
    if means.len() != vars.len() {
        return Err(Error::DimensionMismatch {
            expected: means.len(),
            got: vars.len(),
        });
    }
    let dim = means.len();
    let per_axis = per_axis.max(1);
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for (j, (&m, &v)) in means.iter().zip(vars).enumerate() {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("variance {v} on axis {j}")));
        }
        if v == 0.0 {
            axes.push(vec![m]);
            continue;
        }
        let z = standard_quantiles(per_axis);
        let scale = (v / sample_var(&z)).sqrt();
        axes.push(z.iter().map(|&zi| m + scale * zi).collect());
    }
    let mut points = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        points.push(DVector::from_iterator(
            dim,
            idx.iter().enumerate().map(|(j, &i)| axes[j][i]),
        ));
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == dim {
                return EmpiricalMeasure::equal_weights(points);
            }
        }
    }
}

/// Gaussian cloud for a general covariance matrix via its eigenbasis.
pub fn gaussian_cloud(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    count: usize,
) -> Result<EmpiricalMeasure> {
    let dim = mean.len();
    if dim == 1 {
        return gaussian_quantile_cloud(mean[0], cov[(0, 0)], count);
    }
    let eig = cov.clone().symmetric_eigen();
    let per_axis = (count as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
    let vars: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let base = gaussian_product_cloud(&vec![0.0; dim], &vars, per_axis)?;
    base.pushforward(|x| &eig.eigenvectors * x + mean)
}

fn standard_quantiles(n: usize) -> Vec<f64> {
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect()
}

fn sample_var(z: &[f64]) -> f64 {
    let m = z.iter().sum::<f64>() / z.len() as f64;
    z.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / z.len() as f64
}

/// Symmetric two-field scenario on `R^1`: equal weights on the constant
/// fields `±1`, started at `δ_0`. Zero mean field, unit diffusion
/// coefficient; the solution is `N(0, t)`.
pub fn wiener() -> Scenario {
    let ensemble = FieldEnsemble::new(vec![
        (0.5, VectorField::constant(DVector::from_element(1, 1.0))),
        (0.5, VectorField::constant(DVector::from_element(1, -1.0))),
    ])
    .unwrap();
    Scenario {
        name: "wiener".into(),
        map: EnsembleMap::constant(ensemble).with_bounds(Some(0.0), Some(1.0), Some(1.0)),
        mu0: EmpiricalMeasure::dirac(DVector::zeros(1)),
        reference: Some(Arc::new(|t, n| gaussian_quantile_cloud(0.0, t, n))),
        dim: 1,
        horizon: 1.0,
        p: 3.0,
    }
}

/// Two-field scenario with atoms `{½: −1, ½: +2}` on `R^1`. The reference is
/// generated from the computed mean (drift `½`) and centered second moment
/// (`2.25`), not from quoted constants: `N(t/2, 2.25·t)`.
pub fn drifted_wiener() -> Scenario {
    let ensemble = FieldEnsemble::new(vec![
        (0.5, VectorField::constant(DVector::from_element(1, -1.0))),
        (0.5, VectorField::constant(DVector::from_element(1, 2.0))),
    ])
    .unwrap();
    let p = 3.0;
    let drift = ensemble.mean_field().as_constant().unwrap()[0];
    let sigma2 = ensemble
        .coefficients(&DVector::zeros(1))
        .second_order_centered[(0, 0)];
    let moment_bound = 0.5 * 1.0f64.powf(p) + 0.5 * 2.0f64.powf(p);
    Scenario {
        name: "drifted_wiener".into(),
        map: EnsembleMap::constant(ensemble).with_bounds(Some(0.0), Some(2.0), Some(moment_bound)),
        mu0: EmpiricalMeasure::dirac(DVector::zeros(1)),
        reference: Some(Arc::new(move |t, n| {
            gaussian_quantile_cloud(drift * t, sigma2 * t, n)
        })),
        dim: 1,
        horizon: 1.0,
        p,
    }
}

/// Isotropic scenario on `R^2`: equal weights `⅓` on three constant fields
/// at angles `2πk/3` (they sum to zero), scaled to norm `√2` so the centered
/// Gram matrix is exactly `I`. The generator is then `½Δ` and the solution
/// the isotropic diffusion `N(0, t·I)`.
///
/// Unit-norm fields at the same angles have Gram `½·I` and produce
/// `N(0, (t/2)·I)` instead — the diffusion rate is `t·Gram` either way; the
/// scale here is chosen so the scenario's closed form carries unit rate.
pub fn isotropic2d() -> Scenario {
    let scale = 2.0f64.sqrt();
    let atoms = (0..3)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            (
                1.0 / 3.0,
                VectorField::constant(DVector::from_vec(vec![scale * a.cos(), scale * a.sin()])),
            )
        })
        .collect();
    let ensemble = FieldEnsemble::new(atoms).unwrap();
    let p = 3.0;
    Scenario {
        name: "isotropic2d".into(),
        map: EnsembleMap::constant(ensemble).with_bounds(
            Some(0.0),
            Some(scale),
            Some(scale.powf(p)),
        ),
        mu0: EmpiricalMeasure::dirac(DVector::zeros(2)),
        reference: Some(Arc::new(|t, n| {
            gaussian_product_cloud(&[0.0, 0.0], &[t, t], per_axis_for(n, 2))
        })),
        dim: 2,
        horizon: 1.0,
        p,
    }
}

fn per_axis_for(count: usize, dim: usize) -> usize {
    (count as f64).powf(1.0 / dim as f64).round().max(1.0) as usize
}

/// Classical central-limit construction: the ensemble is the constant-field
/// image of `sample_dist` (independent of the state), started at `δ_0`. On a
/// uniform partition of `[0,1]` into `N` steps the final state is exactly the
/// distribution of the normalized centered sum of `N` iid copies, and the
/// reference is `N(t·mean, t·Σ²)` with both moments computed from the atoms.
pub fn clt(sample_dist: &EmpiricalMeasure) -> Scenario {
    let dim = sample_dist.dim();
    let atoms: Vec<(f64, VectorField)> = sample_dist
        .points()
        .iter()
        .zip(sample_dist.weights())
        .map(|(x, &w)| (w, VectorField::constant(x.clone())))
        .collect();
    let ensemble = FieldEnsemble::new(atoms).unwrap();
    let p = 3.0;
    let radius = sample_dist
        .points()
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    let moment_bound = sample_dist.expectation(|x| x.norm().powf(p));
    let mean = sample_dist.mean();
    let cov = sample_dist.covariance();
    Scenario {
        name: "clt".into(),
        map: EnsembleMap::constant(ensemble).with_bounds(
            Some(0.0),
            Some(radius),
            Some(moment_bound),
        ),
        mu0: EmpiricalMeasure::dirac(DVector::zeros(dim)),
        reference: Some(Arc::new(move |t, n| {
            gaussian_cloud(&(t * &mean), &(t * &cov), n)
        })),
        dim,
        horizon: 1.0,
        p,
    }
}

// ---------------------------------------------------------------------------
// Covariance-driven ellipse scenario with two distinct solutions.
// ---------------------------------------------------------------------------

/// Weighting convention for atoms placed on an ellipse boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipseWeighting {
    /// Equal weights at equally spaced parameter angles.
    AngleUniform,
    /// Weights proportional to local arc length at equally spaced angles.
    ArcLength,
}

/// `K` constant-field atoms on the centered ellipse with semi-axes
/// `s1·v1` and `s2·v2`.
pub fn ellipse_atoms(
    s1: f64,
    s2: f64,
    v1: &Vector2<f64>,
    v2: &Vector2<f64>,
    k: usize,
    weighting: EllipseWeighting,
) -> Vec<(f64, VectorField)> {
    let thetas: Vec<f64> = (0..k)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / k as f64)
        .collect();
    let weights: Vec<f64> = match weighting {
        EllipseWeighting::AngleUniform => vec![1.0 / k as f64; k],
        EllipseWeighting::ArcLength => {
            let speeds: Vec<f64> = thetas
                .iter()
                .map(|&t| ((s1 * t.sin()).powi(2) + (s2 * t.cos()).powi(2)).sqrt())
                .collect();
            let total: f64 = speeds.iter().sum();
            speeds.iter().map(|&s| s / total).collect()
        }
    };
    thetas
        .iter()
        .zip(weights)
        .map(|(&theta, w)| {
            let p = s1 * theta.cos() * v1 + s2 * theta.sin() * v2;
            (
                w,
                VectorField::constant(DVector::from_vec(vec![p[0], p[1]])),
            )
        })
        .collect()
}

/// `Δ_ρ(σ₂) = [ρ(σ₂ − ln ρ − 1) + (ρ − σ₂)] / (ρ − ln ρ − 1)`, the
/// coefficient transform pairing the small covariance eigenvalue with the
/// large one so that both closed-form Gaussian curves solve the equation.
/// Stable near `ρ = 1` via `ln_1p`.
pub fn delta_transform(rho: f64, sigma2: f64) -> f64 {
    let u = rho - 1.0;
    let denom = u - u.ln_1p();
    let num = rho * (sigma2 - u.ln_1p() - 1.0) + (rho - sigma2);
    num / denom
}

/// Parameters of the covariance-driven scenario.
#[derive(Debug, Clone, Copy)]
pub struct EllipseParams {
    /// Upper clamp `M` of the coefficient map (> 1); the verified time
    /// window is `[0, ln M]`.
    pub m_cap: f64,
    /// Lower clamp `m ∈ (0, 1)`.
    pub m_floor: f64,
    /// Atom count on the ellipse (≥ 64).
    pub k_atoms: usize,
}

/// Relative eigenvalue-gap threshold below which the circle branch is used.
const ISOTROPY_TOL: f64 = 1e-9;

fn clamp_coeff(x: f64, m_floor: f64, m_cap: f64) -> f64 {
    x.clamp(m_floor, m_cap)
}

/// The covariance-driven ensemble for one measure: atoms on the ellipse
/// whose second moments along the covariance eigenbasis are
/// `c(ρ)` (largest-eigenvalue direction) and `c(Δ_ρ(r))` (orthogonal).
///
/// Angle-uniform atoms with semi-axes `√(2c)` realize those moments exactly
/// for every `K ≥ 3`: `Σ_j cos²(2πj/K)/K = ½` and the cross terms vanish.
/// The arc-length weighting and the `√(2c/π)` axis scaling both fail the
/// defining identities; see the convention tests.
fn covariance_ellipse_ensemble(
    m: &EmpiricalMeasure,
    params: &EllipseParams,
) -> Result<FieldEnsemble> {
    let cov = m.covariance();
    let a = cov[(0, 0)];
    let b = cov[(0, 1)];
    let c = cov[(1, 1)];
    let mean_eig = 0.5 * (a + c);
    let half_gap = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let rho = mean_eig + half_gap;
    let r = mean_eig - half_gap;
    if rho < 1e-12 {
        return Err(Error::InvalidArgument(
            "covariance below numerical rank tolerance".into(),
        ));
    }
    let (s1_dir, s2_dir, c1, c2) = if 2.0 * half_gap <= ISOTROPY_TOL * rho.max(1.0) {
        // Isotropic branch: circle with both moments c(r).
        let cr = clamp_coeff(mean_eig, params.m_floor, params.m_cap);
        (Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0), cr, cr)
    } else {
        // v1 spans the ρ-eigenspace, oriented into {x > 0} ∪ {x = 0, y > 0}.
        let raw = if b.abs() > 1e-300 {
            Vector2::new(b, rho - a)
        } else if a >= c {
            Vector2::new(1.0, 0.0)
        } else {
            Vector2::new(0.0, 1.0)
        };
        let v1 = orient(raw.normalize());
        let v2 = orient(Vector2::new(-v1[1], v1[0]));
        let c1 = clamp_coeff(rho, params.m_floor, params.m_cap);
        let c2 = clamp_coeff(delta_transform(rho, r), params.m_floor, params.m_cap);
        (v1, v2, c1, c2)
    };
    let atoms = ellipse_atoms(
        (2.0 * c1).sqrt(),
        (2.0 * c2).sqrt(),
        &s1_dir,
        &s2_dir,
        params.k_atoms,
        EllipseWeighting::AngleUniform,
    );
    FieldEnsemble::new(atoms)
}

fn orient(v: Vector2<f64>) -> Vector2<f64> {
    if v[0] > 0.0 || (v[0] == 0.0 && v[1] > 0.0) {
        v
    } else {
        -v
    }
}

/// Covariance-driven scenario with two distinct closed-form solutions from
/// the same initial value `N(0, I)` on the window `[0, ln m_cap]`:
/// `curve1(t) = N(0, diag(t+1, e^t))` and `curve2` with the axes swapped.
/// Curves are sampled on `time_steps` uniform intervals with `per_axis²`
/// particles per node.
pub fn nonuniqueness_with(
    params: EllipseParams,
    time_steps: usize,
    per_axis: usize,
) -> Result<(Scenario, MeasureCurve, MeasureCurve)> {
    if params.k_atoms < 64 {
        return Err(Error::InvalidArgument(format!(
            "ellipse scenario needs ≥ 64 atoms, got {}",
            params.k_atoms
        )));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(params.m_cap > 1.0) || !(0.0 < params.m_floor && params.m_floor < 1.0) {
        return Err(Error::InvalidArgument(
            "ellipse scenario needs m_cap > 1 and m_floor in (0,1)".into(),
        ));
    }
    let horizon = params.m_cap.ln();
    let p = 3.0;
    let map_params = params;
    let map = EnsembleMap::new(move |m| {
        covariance_ellipse_ensemble(m, &map_params).expect("covariance ellipse ensemble")
    })
    .with_bounds(
        None,
        Some((2.0 * params.m_cap).sqrt()),
        Some((2.0 * params.m_cap).powf(p / 2.0)),
    );
    let mu0 = gaussian_product_cloud(&[0.0, 0.0], &[1.0, 1.0], per_axis)?;

    let times: Vec<f64> = (0..=time_steps)
        .map(|i| horizon * i as f64 / time_steps as f64)
        .collect();
    let mut states1 = Vec::with_capacity(times.len());
    let mut states2 = Vec::with_capacity(times.len());
    for &t in &times {
        states1.push(gaussian_product_cloud(
            &[0.0, 0.0],
            &[t + 1.0, t.exp()],
            per_axis,
        )?);
        states2.push(gaussian_product_cloud(
            &[0.0, 0.0],
            &[t.exp(), t + 1.0],
            per_axis,
        )?);
    }
    let curve1 = MeasureCurve::new(times.clone(), states1)?;
    let curve2 = MeasureCurve::new(times, states2)?;
    let scenario = Scenario {
        name: "nonuniqueness".into(),
        map,
        mu0,
        reference: None,
        dim: 2,
        horizon,
        p,
    };
    Ok((scenario, curve1, curve2))
}

/// [`nonuniqueness_with`] at the default curve resolution (256 time steps,
/// 100 particles per axis).
pub fn nonuniqueness(
    m_cap: f64,
    m_floor: f64,
    k_atoms: usize,
) -> Result<(Scenario, MeasureCurve, MeasureCurve)> {
    nonuniqueness_with(
        EllipseParams {
            m_cap,
            m_floor,
            k_atoms,
        },
        256,
        100,
    )
}
