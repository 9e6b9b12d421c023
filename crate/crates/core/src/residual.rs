//! Weak-form residual of the flow equation on a candidate curve.
//!
//! For a curve `t ↦ μ(t)` on a node grid, an ensemble map `V`, and a test
//! function `φ`, the residual at a node time `s` is
//!
//! ```text
//! | ∫φ dμ(s) − ∫φ dμ(0) − ∫₀ˢ ∫ G_{V[μ(t)]} φ dμ(t) dt |
//! ```
//!
//! with the time integral taken by the trapezoidal rule on the curve nodes
//! and all measure integrals exact weighted sums. A curve "solves" the
//! equation at a given resolution when the residual stays below a tolerance
//! calibrated on closed-form solutions at the same resolution; no universal
//! threshold is claimed.

use crate::ensemble::{EnsembleMap, GeneratorEvaluator};
use crate::fields::TestFunction;
use crate::measure::{neumaier_sum, MeasureCurve};
use crate::{Error, Result};
use rayon::prelude::*;

/// Residual summary over a battery of test functions.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResidualReport {
    /// `(test function id, max residual over the sample times)`.
    pub per_phi: Vec<(String, f64)>,
    pub max_residual: f64,
    /// Richardson estimate of the time-quadrature error at the final sample
    /// time (max over the battery).
    pub quadrature_error_estimate: f64,
}

/// Generator averages `g_i = ∫ G_{V[μ(t_i)]} φ dμ(t_i)` at every node, and
/// the values `F_i = ∫ φ dμ(t_i)`.
fn node_profiles(
    curve: &MeasureCurve,
    map: &EnsembleMap,
    phi: &TestFunction,
) -> (Vec<f64>, Vec<f64>) {
    let profiles: Vec<(f64, f64)> = curve
        .states()
        .par_iter()
        .map(|state| {
            let evaluator = GeneratorEvaluator::new(&map.ensemble_for(state));
            let g = state.expectation(|x| evaluator.apply(phi, x));
            let f = state.expectation(|x| phi.eval(x));
            (g, f)
        })
        .collect();
    profiles.into_iter().unzip()
}

fn trapezoid(times: &[f64], values: &[f64], from: usize, to: usize) -> f64 {
    neumaier_sum((from..to).map(|i| 0.5 * (values[i] + values[i + 1]) * (times[i + 1] - times[i])))
}

/// Trapezoid over every other node — the coarsened companion for the
/// Richardson estimate.
fn trapezoid_coarse(times: &[f64], values: &[f64], to: usize) -> f64 {
    let idx: Vec<usize> = (0..=to)
        .step_by(2)
        .chain(if to % 2 == 1 { Some(to) } else { None })
        .collect();
    neumaier_sum(
        idx.windows(2)
            .map(|w| 0.5 * (values[w[0]] + values[w[1]]) * (times[w[1]] - times[w[0]])),
    )
}

/// Weak-form residual over `[0, s]`; `s` must be a node of the curve.
pub fn weak_residual(
    curve: &MeasureCurve,
    map: &EnsembleMap,
    phi: &TestFunction,
    s: f64,
) -> Result<f64> {
    weak_residual_between(curve, map, phi, 0.0, s)
}

/// Weak-form residual over `[u, s]` for node times `u ≤ s`.
pub fn weak_residual_between(
    curve: &MeasureCurve,
    map: &EnsembleMap,
    phi: &TestFunction,
    u: f64,
    s: f64,
) -> Result<f64> {
    let iu = curve.node_index(u)?;
    let is = curve.node_index(s)?;
    if iu > is {
        return Err(Error::InvalidArgument(format!(
            "weak residual needs u ≤ s, got {u} > {s}"
        )));
    }
    let (g, f) = node_profiles(curve, map, phi);
    let lhs = f[is] - f[iu];
    let q = trapezoid(curve.times(), &g, iu, is);
    Ok((lhs - q).abs())
}

/// Aggregates residuals across a battery and a list of node sample times.
pub fn residual_suite(
    curve: &MeasureCurve,
    map: &EnsembleMap,
    battery: &[TestFunction],
    sample_times: &[f64],
) -> Result<ResidualReport> {
    let mut indices = Vec::with_capacity(sample_times.len());
    for &s in sample_times {
        indices.push(curve.node_index(s)?);
    }
    if indices.is_empty() {
        return Err(Error::InvalidArgument(
            "residual suite needs at least one sample time".into(),
        ));
    }
    let last = *indices.iter().max().unwrap();
    let mut per_phi = Vec::with_capacity(battery.len());
    let mut quad_est = 0.0f64;
    for phi in battery {
        let (g, f) = node_profiles(curve, map, phi);
        let mut worst = 0.0f64;
        for &i in &indices {
            let lhs = f[i] - f[0];
            let q = trapezoid(curve.times(), &g, 0, i);
            worst = worst.max((lhs - q).abs());
        }
        per_phi.push((phi.id.clone(), worst));
        if last > 0 {
            let fine = trapezoid(curve.times(), &g, 0, last);
            let coarse = trapezoid_coarse(curve.times(), &g, last);
            quad_est = quad_est.max((fine - coarse).abs() / 3.0);
        }
    }
    let max_residual = per_phi.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    Ok(ResidualReport {
        per_phi,
        max_residual,
        quadrature_error_estimate: quad_est,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EnsembleMap, FieldEnsemble};
    use crate::fields::{standard_test_battery, VectorField};
    use crate::measure::EmpiricalMeasure;
    use crate::scenarios::{self, gaussian_quantile_cloud};
    use nalgebra::dvector;

    fn heat_curve(sigma0_sq: f64, t_end: f64, steps: usize, points: usize) -> MeasureCurve {
        let times: Vec<f64> = (0..=steps)
            .map(|i| t_end * i as f64 / steps as f64)
            .collect();
        let states = times
            .iter()
            .map(|&t| gaussian_quantile_cloud(0.0, t + sigma0_sq, points).unwrap())
            .collect();
        MeasureCurve::new(times, states).unwrap()
    }

    #[test]
    fn zero_field_constant_curve_has_zero_residual() {
        let m = EmpiricalMeasure::new(vec![dvector![0.2], dvector![-0.4]], vec![0.5, 0.5]).unwrap();
        let curve =
            MeasureCurve::new(vec![0.0, 0.5, 1.0], vec![m.clone(), m.clone(), m.clone()]).unwrap();
        let map = EnsembleMap::constant(FieldEnsemble::dirac(VectorField::zero(1)));
        let battery = standard_test_battery(1, 1.0);
        let report = residual_suite(&curve, &map, &battery, &[0.5, 1.0]).unwrap();
        assert_eq!(report.max_residual, 0.0);
        assert_eq!(report.quadrature_error_estimate, 0.0);
    }

    #[test]
    fn exact_heat_curve_passes_calibrated_tolerance() {
        // Closed-form solution N(0, t + σ₀²) for the symmetric two-field map:
        // residual ≤ 2e-3 · c3_bound(φ) at this resolution.
        let curve = heat_curve(0.25, 1.0, 256, 10_000);
        let map = scenarios::wiener().map;
        let battery = standard_test_battery(1, 2.0);
        for phi in battery.iter().take(5) {
            let r = weak_residual(&curve, &map, phi, 1.0).unwrap();
            assert!(
                r <= 2e-3 * phi.c3_bound,
                "{}: residual {r} vs allowance {}",
                phi.id,
                2e-3 * phi.c3_bound
            );
        }
    }

    #[test]
    fn wrong_map_is_separated_from_noise_floor() {
        // The heat curve tested against the drifted map: the drift term
        // contributes O(s) mass, far above the exact-curve noise floor.
        let curve = heat_curve(0.25, 1.0, 128, 4000);
        let right = scenarios::wiener().map;
        let wrong = scenarios::drifted_wiener().map;
        let battery = standard_test_battery(1, 2.0);
        let phi = battery.iter().find(|t| t.id == "x0").unwrap();
        let floor = weak_residual(&curve, &right, phi, 1.0).unwrap();
        let wrong_r = weak_residual(&curve, &wrong, phi, 1.0).unwrap();
        assert!(
            wrong_r > 10.0 * floor.max(1e-9),
            "wrong {wrong_r} vs floor {floor}"
        );
    }

    #[test]
    fn residual_scales_linearly_in_phi() {
        let curve = heat_curve(0.25, 0.5, 32, 500);
        let map = scenarios::wiener().map;
        let battery = standard_test_battery(1, 2.0);
        let phi = &battery[0];
        let r1 = weak_residual(&curve, &map, phi, 0.5).unwrap();
        let r4 = weak_residual(&curve, &map, &phi.scaled(4.0), 0.5).unwrap();
        assert_eq!(r4, 4.0 * r1);
    }

    #[test]
    fn residual_invariant_under_symmetrization() {
        let curve = heat_curve(0.25, 0.5, 64, 1000);
        let base = scenarios::drifted_wiener().map;
        let sym_inner = base.clone();
        let sym = EnsembleMap::new(move |m| sym_inner.ensemble_for(m).symmetrized());
        let battery = standard_test_battery(1, 2.0);
        for phi in battery.iter().take(6) {
            let a = weak_residual(&curve, &base, phi, 0.5).unwrap();
            let b = weak_residual(&curve, &sym, phi, 0.5).unwrap();
            assert!((a - b).abs() <= 1e-10, "{}: {a} vs {b}", phi.id);
        }
    }

    #[test]
    fn residual_is_time_subadditive() {
        let curve = heat_curve(0.25, 1.0, 64, 800);
        let map = scenarios::wiener().map;
        let battery = standard_test_battery(1, 2.0);
        let phi = &battery[2];
        let whole = weak_residual(&curve, &map, phi, 1.0).unwrap();
        let first = weak_residual_between(&curve, &map, phi, 0.0, 0.5).unwrap();
        let second = weak_residual_between(&curve, &map, phi, 0.5, 1.0).unwrap();
        assert!(whole <= first + second + 1e-12);
    }

    #[test]
    fn non_node_time_is_rejected() {
        let curve = heat_curve(0.25, 1.0, 4, 100);
        let map = scenarios::wiener().map;
        let battery = standard_test_battery(1, 1.0);
        assert!(matches!(
            weak_residual(&curve, &map, &battery[0], 0.3),
            Err(Error::NotANode(_))
        ));
    }
}
