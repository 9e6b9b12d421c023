//! Weighted finite ensembles of vector fields — the velocity data of the
//! flow equation — and the second-order generator they induce.
//!
//! An ensemble `V = Σ w_k δ_{X_k}` acts on a test function through
//!
//! ```text
//! G_V φ(x) = Σ_k w_k · ½ L²_{X_k − m}(φ)(x) + ∇φ(x)·m(x),
//! ```
//!
//! where `m` is the pointwise mean field. This is the reduced form: the
//! first-order part of the centered fields integrates to zero identically,
//! so the reduction holds structurally rather than numerically. The raw
//! form (`Σ w_k [½L²_{X_k−m} + L_{X_k}]φ`) stays available for
//! cross-validation via [`FieldEnsemble::generator_raw`].

use crate::fields::{lie, lie2, w2inf_norm, SampleBox, TestFunction, VectorField};
use crate::measure::{neumaier_sum, EmpiricalMeasure};
use crate::transport::{self, Method};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// A probability measure with finite support on the space of vector fields.
#[derive(Debug, Clone)]
pub struct FieldEnsemble {
    atoms: Vec<(f64, VectorField)>,
    dim: usize,
}

/// Pointwise generator coefficients at a point `x`:
/// `second_order[i][j] = Σ w X_i X_j`, `drift_j = Σ w (J_X·X)_j`, and
/// `second_order_centered` is the Gram matrix of the centered atoms.
#[derive(Debug, Clone)]
pub struct GeneratorCoefficients {
    pub second_order: DMatrix<f64>,
    pub drift: DVector<f64>,
    pub second_order_centered: DMatrix<f64>,
}

impl FieldEnsemble {
    /// Builds an ensemble; weights must be nonnegative and sum to 1 within
    /// `1e-9` (renormalized to machine accuracy).
    pub fn new(atoms: Vec<(f64, VectorField)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one atom".into(),
            ));
        }
        let dim = atoms[0].1.dim();
        for (w, f) in &atoms {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidWeights(format!("atom weight {w}")));
            }
        }
        let sum = neumaier_sum(atoms.iter().map(|(w, _)| *w));
        if (sum - 1.0).abs() > crate::measure::WEIGHT_RENORM_TOL {
            return Err(Error::InvalidWeights(format!("atom weights sum to {sum}")));
        }
        let atoms = atoms.into_iter().map(|(w, f)| (w / sum, f)).collect();
        Ok(Self { atoms, dim })
    }

    /// Single-atom ensemble.
    pub fn dirac(field: VectorField) -> Self {
        Self::new(vec![(1.0, field)]).expect("dirac ensemble is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(f64, VectorField)] {
        &self.atoms
    }

    pub fn is_all_constant(&self) -> bool {
        self.atoms.iter().all(|(_, f)| f.is_constant())
    }

    /// Pointwise mean field `m(x) = Σ w_k X_k(x)`; constant atoms collapse to
    /// a constant field.
    pub fn mean_field(&self) -> VectorField {
        VectorField::weighted_sum(
            &self
                .atoms
                .iter()
                .map(|(w, f)| (*w, f.clone()))
                .collect::<Vec<_>>(),
        )
    }

    /// Ensemble of the centered atoms `X_k − m`; its mean field is zero.
    pub fn centered(&self) -> FieldEnsemble {
        let m = self.mean_field();
        FieldEnsemble {
            atoms: self.atoms.iter().map(|(w, f)| (*w, f.sub(&m))).collect(),
            dim: self.dim,
        }
    }

    /// Half-weight union of the atoms and their reflections `2m − X` through
    /// the mean field. Preserves the mean field and the centered Gram matrix.
    pub fn symmetrized(&self) -> FieldEnsemble {
        let m = self.mean_field();
        let mut atoms = Vec::with_capacity(2 * self.atoms.len());
        for (w, f) in &self.atoms {
            atoms.push((w / 2.0, f.clone()));
        }
        for (w, f) in &self.atoms {
            atoms.push((w / 2.0, f.reflect_through(&m)));
        }
        FieldEnsemble {
            atoms,
            dim: self.dim,
        }
    }

    /// `p`-th moment of the ensemble in the `W^{2,∞}` norm over the ball:
    /// `Σ w_k ‖X_k‖^p`.
    pub fn moment(&self, p: f64, sample_box: &SampleBox, samples: usize) -> f64 {
        neumaier_sum(
            self.atoms
                .iter()
                .map(|(w, f)| w * w2inf_norm(f, sample_box, samples).powf(p)),
        )
    }

    /// Applies the reduced-form generator at `x`.
    pub fn generator(&self, phi: &TestFunction, x: &DVector<f64>) -> f64 {
        GeneratorEvaluator::new(self).apply(phi, x)
    }

    /// Raw-definition generator `Σ w_k [½L²_{X_k−m} + L_{X_k}]φ(x)`, kept for
    /// cross-validation of the reduced form.
    pub fn generator_raw(&self, phi: &TestFunction, x: &DVector<f64>) -> f64 {
        let m = self.mean_field();
        neumaier_sum(self.atoms.iter().map(|(w, f)| {
            let centered = f.sub(&m);
            w * (0.5 * lie2(&centered, phi, x) + lie(f, phi, x))
        }))
    }

    /// Generator coefficients at `x`. Both Gram matrices are symmetric
    /// positive semidefinite by construction.
    pub fn coefficients(&self, x: &DVector<f64>) -> GeneratorCoefficients {
        let n = self.dim;
        let mut a = DMatrix::zeros(n, n);
        let mut drift = DVector::zeros(n);
        for (w, f) in &self.atoms {
            let v = f.eval(x);
            a += *w * (&v * v.transpose());
            drift += *w * (f.jacobian(x) * &v);
        }
        let mut a_centered = DMatrix::zeros(n, n);
        let m = self.mean_field();
        for (w, f) in &self.atoms {
            let v = f.sub(&m).eval(x);
            a_centered += *w * (&v * v.transpose());
        }
        symmetrize_in_place(&mut a);
        symmetrize_in_place(&mut a_centered);
        GeneratorCoefficients {
            second_order: a,
            drift,
            second_order_centered: a_centered,
        }
    }

    /// Smallest eigenvalue of the centered Gram matrix over the sample
    /// points. Nonnegative up to roundoff (`≥ −1e-10`).
    pub fn ellipticity(&self, sample_points: &[DVector<f64>]) -> Result<f64> {
        if sample_points.is_empty() {
            return Err(Error::InvalidArgument(
                "ellipticity needs at least one sample point".into(),
            ));
        }
        let mut min = f64::INFINITY;
        for x in sample_points {
            let c = self.coefficients(x);
            let eig = c.second_order_centered.symmetric_eigen();
            min = min.min(eig.eigenvalues.min());
        }
        Ok(min)
    }
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Prepared generator application for one ensemble.
///
/// Centers the atoms once; when every atom is constant the quadratic part
/// collapses to `½·tr(A_c·∇²φ)` with a precomputed Gram matrix, which is what
/// makes residual evaluation over large clouds affordable.
pub struct GeneratorEvaluator {
    mean_vec: Option<DVector<f64>>,
    gram_centered: Option<DMatrix<f64>>,
    mean_field: VectorField,
    centered: Vec<(f64, VectorField)>,
}

impl GeneratorEvaluator {
    pub fn new(ensemble: &FieldEnsemble) -> Self {
        let mean_field = ensemble.mean_field();
        if ensemble.is_all_constant() {
            let n = ensemble.dim();
            let mv = mean_field.as_constant().unwrap().clone();
            let mut gram = DMatrix::zeros(n, n);
            for (w, f) in ensemble.atoms() {
                let v = f.as_constant().unwrap() - &mv;
                gram += *w * (&v * v.transpose());
            }
            symmetrize_in_place(&mut gram);
            Self {
                mean_vec: Some(mv),
                gram_centered: Some(gram),
                mean_field,
                centered: Vec::new(),
            }
        } else {
            let centered = ensemble
                .atoms()
                .iter()
                .map(|(w, f)| (*w, f.sub(&mean_field)))
                .collect();
            Self {
                mean_vec: None,
                gram_centered: None,
                mean_field,
                centered,
            }
        }
    }

    /// `G φ(x) = Σ w ½L²_{X−m}φ(x) + ∇φ(x)·m(x)`.
    pub fn apply(&self, phi: &TestFunction, x: &DVector<f64>) -> f64 {
        match (&self.mean_vec, &self.gram_centered) {
            (Some(mv), Some(gram)) => {
                let hess = phi.hessian(x);
                0.5 * (gram * hess).trace() + phi.gradient(x).dot(mv)
            }
            _ => {
                let quad =
                    neumaier_sum(self.centered.iter().map(|(w, f)| w * 0.5 * lie2(f, phi, x)));
                quad + lie(&self.mean_field, phi, x)
            }
        }
    }
}

/// Assigns an ensemble to each measure, with declared (spot-checkable)
/// regularity bounds: a Lipschitz constant `L` for `μ ↦ V[μ]`, a uniform
/// `W^{2,∞}` support radius `R`, and a uniform `p`-th moment bound `B`.
#[derive(Clone)]
pub struct EnsembleMap {
    rule: Arc<dyn Fn(&EmpiricalMeasure) -> FieldEnsemble + Send + Sync>,
    pub lipschitz_bound: Option<f64>,
    pub support_radius: Option<f64>,
    pub moment_bound: Option<f64>,
}

impl EnsembleMap {
    pub fn new(rule: impl Fn(&EmpiricalMeasure) -> FieldEnsemble + Send + Sync + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            lipschitz_bound: None,
            support_radius: None,
            moment_bound: None,
        }
    }

    /// The same ensemble everywhere (Lipschitz constant 0).
    pub fn constant(ensemble: FieldEnsemble) -> Self {
        Self::new(move |_| ensemble.clone()).with_bounds(Some(0.0), None, None)
    }

    pub fn with_bounds(
        mut self,
        lipschitz: Option<f64>,
        support_radius: Option<f64>,
        moment_bound: Option<f64>,
    ) -> Self {
        self.lipschitz_bound = lipschitz;
        self.support_radius = support_radius;
        self.moment_bound = moment_bound;
        self
    }

    pub fn ensemble_for(&self, m: &EmpiricalMeasure) -> FieldEnsemble {
        (self.rule)(m)
    }

    /// Largest atom norm produced over the given measures — a spot check of
    /// the declared `support_radius`.
    pub fn measured_support_radius(
        &self,
        measures: &[EmpiricalMeasure],
        sample_box: &SampleBox,
        samples: usize,
    ) -> f64 {
        let mut worst = 0.0f64;
        for m in measures {
            for (_, f) in self.ensemble_for(m).atoms() {
                worst = worst.max(w2inf_norm(f, sample_box, samples));
            }
        }
        worst
    }

    /// Largest ratio `d(V[μ], V[ν]) / W_p(μ, ν)` over the given pairs — a
    /// spot check of the declared Lipschitz bound. Uses [`ensemble_distance`];
    /// the ratio is exact when the distance route is, an upper bound
    /// otherwise.
    pub fn measured_lipschitz(
        &self,
        pairs: &[(EmpiricalMeasure, EmpiricalMeasure)],
        p: f64,
        sample_box: &SampleBox,
    ) -> Result<f64> {
        let mut worst = 0.0f64;
        for (a, b) in pairs {
            let denom = transport::wasserstein(a, b, p, Method::Auto)?.cost;
            if denom <= 1e-12 {
                continue;
            }
            let (num, _) =
                ensemble_distance(&self.ensemble_for(a), &self.ensemble_for(b), p, sample_box)?;
            worst = worst.max(num / denom);
        }
        Ok(worst)
    }

    /// Mixes in the canonical constant basis fields with total weight `eps`,
    /// making the centered Gram matrix uniformly elliptic at the price of an
    /// `O(eps)` perturbation of the map.
    pub fn elliptic_regularize(&self, eps: f64) -> Result<EnsembleMap> {
        if !(0.0 < eps && eps < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "elliptic regularization needs 0 < eps < 1, got {eps}"
            )));
        }
        let inner = self.rule.clone();
        let rule = move |m: &EmpiricalMeasure| {
            let base = inner(m);
            let n = base.dim();
            let mut atoms: Vec<(f64, VectorField)> = base
                .atoms()
                .iter()
                .map(|(w, f)| ((1.0 - eps) * w, f.clone()))
                .collect();
            for j in 0..n {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                atoms.push((eps / n as f64, VectorField::constant(e)));
            }
            FieldEnsemble::new(atoms).expect("regularized ensemble is valid")
        };
        Ok(EnsembleMap {
            rule: Arc::new(rule),
            lipschitz_bound: self.lipschitz_bound,
            support_radius: self.support_radius.map(|r| r.max(1.0)),
            moment_bound: self.moment_bound.map(|b| b.max(1.0)),
        })
    }
}

/// Distance between two ensembles in the `W^{2,∞}`-induced metric.
///
/// Returns `(value, exact)`. For all-constant ensembles the atoms embed
/// isometrically as point clouds in `R^n` and the transport module computes
/// the distance (exact unless it had to fall back to Sinkhorn). Otherwise a
/// matched-index coupling gives a labeled upper bound and requires equal atom
/// counts and weights.
pub fn ensemble_distance(
    a: &FieldEnsemble,
    b: &FieldEnsemble,
    p: f64,
    sample_box: &SampleBox,
) -> Result<(f64, bool)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.is_all_constant() && b.is_all_constant() {
        let cloud = |e: &FieldEnsemble| {
            EmpiricalMeasure::new(
                e.atoms()
                    .iter()
                    .map(|(_, f)| f.as_constant().unwrap().clone())
                    .collect(),
                e.atoms().iter().map(|(w, _)| *w).collect(),
            )
        };
        let report = transport::wasserstein(&cloud(a)?, &cloud(b)?, p, Method::Auto)?;
        return Ok((report.cost, report.method != Method::Sinkhorn));
    }
    if a.atoms().len() != b.atoms().len() {
        return Err(Error::UnequalCounts {
            left: a.atoms().len(),
            right: b.atoms().len(),
        });
    }
    let mut terms = Vec::with_capacity(a.atoms().len());
    for ((wa, fa), (wb, fb)) in a.atoms().iter().zip(b.atoms()) {
        if (wa - wb).abs() > 1e-12 {
            return Err(Error::UnequalWeights);
        }
        terms.push(wa * w2inf_norm(&fa.sub(fb), sample_box, 64).powf(p));
    }
    Ok((neumaier_sum(terms.into_iter()).powf(1.0 / p), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::standard_test_battery;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn two_sided_unit() -> FieldEnsemble {
        FieldEnsemble::new(vec![
            (0.5, VectorField::constant(dvector![1.0])),
            (0.5, VectorField::constant(dvector![-1.0])),
        ])
        .unwrap()
    }

    fn cube_roots() -> FieldEnsemble {
        let atoms = (0..3)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                (1.0 / 3.0, VectorField::constant(dvector![a.cos(), a.sin()]))
            })
            .collect();
        FieldEnsemble::new(atoms).unwrap()
    }

    #[test]
    fn mean_field_of_symmetric_pair_is_zero() {
        let m = two_sided_unit().mean_field();
        assert_eq!(m.as_constant().unwrap(), &dvector![0.0]);
    }

    #[test]
    fn mean_field_of_single_atom_is_that_field() {
        let v = dvector![2.0, -0.5];
        let e = FieldEnsemble::dirac(VectorField::constant(v.clone()));
        assert_eq!(e.mean_field().as_constant().unwrap(), &v);
    }

    #[test]
    fn mean_field_of_cube_roots_vanishes() {
        let m = cube_roots().mean_field();
        assert!(m.as_constant().unwrap().norm() < 1e-15);
    }

    #[test]
    fn mean_field_linearity_at_points() {
        // Pointwise mean_field(x) = Σ w_k X_k(x); exact (same arithmetic) for
        // all-constant ensembles, within rounding for mixed kinds where the
        // affine collapse reassociates the sum.
        let consts = FieldEnsemble::new(vec![
            (0.25, VectorField::constant(dvector![1.0, 2.0])),
            (0.75, VectorField::constant(dvector![-0.4, 0.1])),
        ])
        .unwrap();
        let x = dvector![0.3, -0.7];
        let direct = 0.25 * consts.atoms()[0].1.eval(&x) + 0.75 * consts.atoms()[1].1.eval(&x);
        assert_eq!(consts.mean_field().eval(&x), direct);

        let mixed = FieldEnsemble::new(vec![
            (0.25, VectorField::constant(dvector![1.0, 2.0])),
            (
                0.75,
                VectorField::affine(nalgebra::dmatrix![0.0, 1.0; -1.0, 0.0], dvector![0.5, 0.0]),
            ),
        ])
        .unwrap();
        let direct = 0.25 * mixed.atoms()[0].1.eval(&x) + 0.75 * mixed.atoms()[1].1.eval(&x);
        assert!((mixed.mean_field().eval(&x) - direct).norm() <= 1e-14);
    }

    #[test]
    fn centered_atoms_hand_arithmetic() {
        // Atoms {0.5: +2, 0.5: −1}: mean ½, centered {+1.5, −1.5}.
        let e = FieldEnsemble::new(vec![
            (0.5, VectorField::constant(dvector![2.0])),
            (0.5, VectorField::constant(dvector![-1.0])),
        ])
        .unwrap();
        assert_eq!(e.mean_field().as_constant().unwrap()[0], 0.5);
        let c = e.centered();
        assert_eq!(c.atoms()[0].1.as_constant().unwrap()[0], 1.5);
        assert_eq!(c.atoms()[1].1.as_constant().unwrap()[0], -1.5);
        assert_eq!(c.mean_field().as_constant().unwrap()[0], 0.0);
    }

    #[test]
    fn symmetrized_fixed_points() {
        // The ±1 pair is already symmetric about 0: same measure back.
        let s = two_sided_unit().symmetrized();
        let mut mass_plus = 0.0;
        let mut mass_minus = 0.0;
        for (w, f) in s.atoms() {
            let v = f.as_constant().unwrap()[0];
            if (v - 1.0).abs() < 1e-14 {
                mass_plus += w;
            } else if (v + 1.0).abs() < 1e-14 {
                mass_minus += w;
            } else {
                panic!("unexpected atom {v}");
            }
        }
        assert_relative_eq!(mass_plus, 0.5, epsilon = 1e-15);
        assert_relative_eq!(mass_minus, 0.5, epsilon = 1e-15);

        // A single atom reflects onto itself.
        let single = FieldEnsemble::dirac(VectorField::constant(dvector![0.7]));
        let ss = single.symmetrized();
        for (_, f) in ss.atoms() {
            assert_relative_eq!(f.as_constant().unwrap()[0], 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetrized_two_atom_reflections() {
        // {0.7: +1, 0.3: −1}: mean 0.4; +1 reflects to 2·0.4−1 = −0.2 and −1
        // to 2·0.4+1 = 1.8; union weights halved. Mean field and centered
        // Gram are preserved.
        let e = FieldEnsemble::new(vec![
            (0.7, VectorField::constant(dvector![1.0])),
            (0.3, VectorField::constant(dvector![-1.0])),
        ])
        .unwrap();
        let s = e.symmetrized();
        let vals: Vec<(f64, f64)> = s
            .atoms()
            .iter()
            .map(|(w, f)| (*w, f.as_constant().unwrap()[0]))
            .collect();
        assert_relative_eq!(vals[0].1, 1.0);
        assert_relative_eq!(vals[1].1, -1.0);
        assert_relative_eq!(vals[2].1, -0.2, epsilon = 1e-14);
        assert_relative_eq!(vals[3].1, 1.8, epsilon = 1e-14);
        assert_relative_eq!(vals[2].0, 0.35);
        assert_relative_eq!(vals[3].0, 0.15);

        let x = dvector![0.0];
        assert_relative_eq!(
            s.mean_field().eval(&x)[0],
            e.mean_field().eval(&x)[0],
            epsilon = 1e-14
        );
        let ce = e.coefficients(&x).second_order_centered;
        let cs = s.coefficients(&x).second_order_centered;
        assert_relative_eq!(ce[(0, 0)], cs[(0, 0)], epsilon = 1e-14);
        assert_relative_eq!(ce[(0, 0)], 0.84, epsilon = 1e-14);
    }

    #[test]
    fn moment_of_unit_atoms_is_one() {
        let b = SampleBox::centered(1, 1.0);
        assert_eq!(two_sided_unit().moment(3.0, &b, 8), 1.0);
        let zero = FieldEnsemble::dirac(VectorField::zero(2));
        assert_eq!(zero.moment(2.0, &SampleBox::centered(2, 1.0), 8), 0.0);
        let b2 = SampleBox::centered(2, 1.0);
        for p in [1.0, 2.0, 3.5] {
            assert_relative_eq!(cube_roots().moment(p, &b2, 8), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn generator_of_symmetric_pair_is_half_second_derivative() {
        let e = two_sided_unit();
        let battery = standard_test_battery(1, 2.0);
        for phi in &battery {
            for x in crate::fields::derivative_probe_grid(1, 1.5, 25) {
                let expected = 0.5 * phi.hessian(&x)[(0, 0)];
                assert_relative_eq!(e.generator(phi, &x), expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn generator_of_unit_cube_roots_matches_gram_trace() {
        // Unit atoms at 120° have centered Gram ½·I, so the generator (which
        // carries the ½ prefactor) is ¼Δ; scaling the atoms by √2 gives ½Δ.
        let e = cube_roots();
        let battery = standard_test_battery(2, 2.0);
        for phi in &battery {
            for x in crate::fields::derivative_probe_grid(2, 1.5, 25) {
                let expected = 0.25 * phi.hessian(&x).trace();
                assert_relative_eq!(e.generator(phi, &x), expected, epsilon = 1e-10);
            }
        }
        let scaled = FieldEnsemble::new(
            cube_roots()
                .atoms()
                .iter()
                .map(|(w, f)| {
                    (
                        *w,
                        VectorField::constant(2.0f64.sqrt() * f.as_constant().unwrap()),
                    )
                })
                .collect(),
        )
        .unwrap();
        let phi = &battery[0];
        let x = dvector![0.3, -0.2];
        assert_relative_eq!(
            scaled.generator(phi, &x),
            0.5 * phi.hessian(&x).trace(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn generator_of_single_atom_is_pure_drift() {
        let v = dvector![0.8, -0.3];
        let e = FieldEnsemble::dirac(VectorField::constant(v.clone()));
        let battery = standard_test_battery(2, 1.0);
        let phi = &battery[3];
        let x = dvector![0.2, 0.1];
        assert_relative_eq!(
            e.generator(phi, &x),
            phi.gradient(&x).dot(&v),
            epsilon = 1e-14
        );
    }

    #[test]
    fn raw_and_reduced_generators_agree() {
        let e = FieldEnsemble::new(vec![
            (0.7, VectorField::constant(dvector![1.0, 0.3])),
            (
                0.3,
                VectorField::affine(nalgebra::dmatrix![0.2, 0.0; 0.1, -0.4], dvector![-1.0, 0.2]),
            ),
        ])
        .unwrap();
        let battery = standard_test_battery(2, 1.0);
        for phi in battery.iter().take(4) {
            for x in crate::fields::derivative_probe_grid(2, 1.2, 10) {
                let raw = e.generator_raw(phi, &x);
                let reduced = e.generator(phi, &x);
                assert!(
                    (raw - reduced).abs() <= 1e-12 * (1.0 + raw.abs()),
                    "{}: raw {raw} vs reduced {reduced}",
                    phi.id
                );
            }
        }
    }

    #[test]
    fn first_order_centered_terms_vanish() {
        let battery = standard_test_battery(2, 1.0);
        for e in [
            cube_roots(),
            FieldEnsemble::dirac(VectorField::constant(dvector![2.0, 1.0])),
        ] {
            let m = e.mean_field();
            for phi in battery.iter().take(6) {
                for x in crate::fields::derivative_probe_grid(2, 1.4, 10) {
                    let sum =
                        neumaier_sum(e.atoms().iter().map(|(w, f)| w * lie(&f.sub(&m), phi, &x)));
                    assert!(sum.abs() <= 1e-12, "{}: {sum}", phi.id);
                }
            }
        }
    }

    #[test]
    fn coefficients_symmetric_pair() {
        let e = two_sided_unit();
        let c = e.coefficients(&dvector![0.37]);
        assert_eq!(c.second_order[(0, 0)], 1.0);
        assert_eq!(c.drift[0], 0.0);
        assert_eq!(c.second_order_centered[(0, 0)], 1.0);
    }

    #[test]
    fn coefficients_cube_roots_centered_gram() {
        let c = cube_roots().coefficients(&dvector![1.0, -2.0]);
        assert_relative_eq!(c.second_order_centered[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(c.second_order_centered[(1, 1)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(c.second_order_centered[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coefficients_single_atom() {
        let v = dvector![0.6, -1.2];
        let e = FieldEnsemble::dirac(VectorField::constant(v.clone()));
        let c = e.coefficients(&dvector![0.0, 0.0]);
        assert_eq!(c.second_order, &v * v.transpose());
        assert_eq!(c.second_order_centered, DMatrix::zeros(2, 2));
        assert_eq!(c.drift, dvector![0.0, 0.0]);
    }

    #[test]
    fn ellipticity_values() {
        let pts = vec![dvector![0.0], dvector![1.0]];
        assert_relative_eq!(two_sided_unit().ellipticity(&pts).unwrap(), 1.0);
        let single = FieldEnsemble::dirac(VectorField::constant(dvector![3.0]));
        assert_relative_eq!(single.ellipticity(&pts).unwrap(), 0.0);
        let pts2 = vec![dvector![0.0, 0.0]];
        assert_relative_eq!(
            cube_roots().ellipticity(&pts2).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mean_field_norm_bounded_by_three_first_moments() {
        let b = SampleBox::centered(2, 2.0);
        for e in [cube_roots(), mixed_pair_2d()] {
            let lhs = w2inf_norm(&e.mean_field(), &b, 32);
            let rhs = 3.0 * e.moment(1.0, &b, 32);
            assert!(lhs <= rhs + 1e-12, "{lhs} > 3·{rhs}");
        }
    }

    fn mixed_pair_2d() -> FieldEnsemble {
        FieldEnsemble::new(vec![
            (0.5, VectorField::constant(dvector![1.0, 0.0])),
            (0.5, VectorField::constant(dvector![0.2, -1.0])),
        ])
        .unwrap()
    }

    #[test]
    fn elliptic_regularization_floors_the_gram() {
        // δ_{zero field} in R², eps = 0.3: centered Gram eigenvalues ≥ 0.1.
        let map = EnsembleMap::constant(FieldEnsemble::dirac(VectorField::zero(2)));
        let reg = map.elliptic_regularize(0.3).unwrap();
        let mu = EmpiricalMeasure::dirac(dvector![0.0, 0.0]);
        let e = reg.ensemble_for(&mu);
        let weights: Vec<f64> = e.atoms().iter().map(|(w, _)| *w).collect();
        assert_relative_eq!(weights[0], 0.7, epsilon = 1e-15);
        assert_relative_eq!(weights[1], 0.15, epsilon = 1e-15);
        assert_relative_eq!(weights[2], 0.15, epsilon = 1e-15);
        let lam = e.ellipticity(&[dvector![0.0, 0.0]]).unwrap();
        assert!(lam >= 0.1 - 1e-12, "min eigenvalue {lam}");

        // Regularized symmetric pair in R¹, eps = 0.1: Gram ≥ 0.9.
        let map1 = EnsembleMap::constant(two_sided_unit());
        let reg1 = map1.elliptic_regularize(0.1).unwrap();
        let e1 = reg1.ensemble_for(&EmpiricalMeasure::dirac(dvector![0.0]));
        let lam1 = e1.ellipticity(&[dvector![0.0]]).unwrap();
        assert!(lam1 >= 0.9, "min eigenvalue {lam1}");
        assert_relative_eq!(lam1, 0.99, epsilon = 1e-12);
    }

    #[test]
    fn elliptic_regularization_small_eps_stays_close() {
        let map = EnsembleMap::constant(two_sided_unit());
        let mu = EmpiricalMeasure::dirac(dvector![0.0]);
        for eps in [1e-3, 1e-6] {
            let e = map.elliptic_regularize(eps).unwrap().ensemble_for(&mu);
            assert_relative_eq!(e.atoms()[0].0, 0.5 * (1.0 - eps), epsilon = 1e-15);
            let (d, exact) = ensemble_distance(
                &e,
                &map.ensemble_for(&mu),
                2.0,
                &SampleBox::centered(1, 1.0),
            )
            .unwrap();
            assert!(exact);
            assert!(d <= 2.0 * eps.sqrt(), "distance {d} for eps {eps}");
        }
    }

    #[test]
    fn elliptic_regularize_rejects_bad_eps() {
        let map = EnsembleMap::constant(two_sided_unit());
        assert!(map.elliptic_regularize(0.0).is_err());
        assert!(map.elliptic_regularize(1.0).is_err());
    }

    #[test]
    fn ensemble_distance_constant_atoms_is_exact() {
        let a = two_sided_unit();
        let shifted = FieldEnsemble::new(vec![
            (0.5, VectorField::constant(dvector![1.5])),
            (0.5, VectorField::constant(dvector![-0.5])),
        ])
        .unwrap();
        let (d, exact) =
            ensemble_distance(&a, &shifted, 2.0, &SampleBox::centered(1, 1.0)).unwrap();
        assert!(exact);
        assert_relative_eq!(d, 0.5, epsilon = 1e-12);
    }
}
