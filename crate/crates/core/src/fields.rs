//! Vector fields on `R^n` with analytic derivatives, their ODE flows, Lie
//! derivatives against test functions, and `W^{2,∞}` norm estimation.
//!
//! Fields come in three kinds: constant, affine (`x ↦ Ax + b`), and analytic
//! (closures for value/Jacobian/Hessian). Linear combinations collapse to the
//! simplest kind that can represent them, so ensemble mean fields of constant
//! atoms stay constant and their flows stay exact.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Trajectories beyond this norm abort integration.
pub const FLOW_OVERFLOW_GUARD: f64 = 1e12;

type ValueFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type HessianFn = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;

/// Closure bundle for an analytic field; `hessian(x)[j]` is `∇²X_j(x)`.
#[derive(Clone)]
pub struct AnalyticField {
    pub value: ValueFn,
    pub jacobian: JacobianFn,
    pub hessian: HessianFn,
}

#[derive(Clone)]
enum FieldKind {
    Constant(DVector<f64>),
    Affine { a: DMatrix<f64>, b: DVector<f64> },
    Analytic(AnalyticField),
}

/// A vector field `R^n → R^n` with Jacobian and Hessian access.
#[derive(Clone)]
pub struct VectorField {
    kind: FieldKind,
    dim: usize,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            FieldKind::Constant(v) => write!(f, "Constant({:?})", v.as_slice()),
            FieldKind::Affine { .. } => write!(f, "Affine(dim={})", self.dim),
            FieldKind::Analytic(_) => write!(f, "Analytic(dim={})", self.dim),
        }
    }
}

impl VectorField {
    pub fn constant(v: DVector<f64>) -> Self {
        let dim = v.len();
        Self {
            kind: FieldKind::Constant(v),
            dim,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(DVector::zeros(dim))
    }

    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        assert_eq!(a.ncols(), b.len());
        let dim = b.len();
        Self {
            kind: FieldKind::Affine { a, b },
            dim,
        }
    }

    pub fn analytic(dim: usize, spec: AnalyticField) -> Self {
        Self {
            kind: FieldKind::Analytic(spec),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, FieldKind::Constant(_))
    }

    /// The constant value, when the field is constant.
    pub fn as_constant(&self) -> Option<&DVector<f64>> {
        match &self.kind {
            FieldKind::Constant(v) => Some(v),
            _ => None,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            FieldKind::Constant(v) => v.clone(),
            FieldKind::Affine { a, b } => a * x + b,
            FieldKind::Analytic(spec) => (spec.value)(x),
        }
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            FieldKind::Constant(_) => DMatrix::zeros(self.dim, self.dim),
            FieldKind::Affine { a, .. } => a.clone(),
            FieldKind::Analytic(spec) => (spec.jacobian)(x),
        }
    }

    /// `hessian(x)[j] = ∇²X_j(x)`.
    pub fn hessian(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        match &self.kind {
            FieldKind::Constant(_) | FieldKind::Affine { .. } => {
                vec![DMatrix::zeros(self.dim, self.dim); self.dim]
            }
            FieldKind::Analytic(spec) => (spec.hessian)(x),
        }
    }

    /// Weighted sum `Σ c_k X_k`, collapsed to the simplest representable kind.
    pub fn weighted_sum(terms: &[(f64, VectorField)]) -> Self {
        assert!(!terms.is_empty());
        let dim = terms[0].1.dim;
        assert!(terms.iter().all(|(_, f)| f.dim == dim));
        let all_constant = terms.iter().all(|(_, f)| f.is_constant());
        if all_constant {
            let mut v = DVector::zeros(dim);
            for (c, f) in terms {
                v += *c * f.as_constant().unwrap();
            }
            return Self::constant(v);
        }
        let affine_like = terms
            .iter()
            .all(|(_, f)| matches!(f.kind, FieldKind::Constant(_) | FieldKind::Affine { .. }));
        if affine_like {
            let mut a = DMatrix::zeros(dim, dim);
            let mut b = DVector::zeros(dim);
            for (c, f) in terms {
                match &f.kind {
                    FieldKind::Constant(v) => b += *c * v,
                    FieldKind::Affine { a: fa, b: fb } => {
                        a += *c * fa;
                        b += *c * fb;
                    }
                    FieldKind::Analytic(_) => unreachable!(),
                }
            }
            return Self::affine(a, b);
        }
        let parts: Vec<(f64, VectorField)> = terms.to_vec();
        let parts_v = parts.clone();
        let parts_j = parts.clone();
        Self::analytic(
            dim,
            AnalyticField {
                value: Arc::new(move |x| {
                    let mut v = DVector::zeros(dim);
                    for (c, f) in &parts_v {
                        v += *c * f.eval(x);
                    }
                    v
                }),
                jacobian: Arc::new(move |x| {
                    let mut j = DMatrix::zeros(dim, dim);
                    for (c, f) in &parts_j {
                        j += *c * f.jacobian(x);
                    }
                    j
                }),
                hessian: Arc::new(move |x| {
                    let mut h = vec![DMatrix::zeros(dim, dim); dim];
                    for (c, f) in &parts {
                        for (hj, fj) in h.iter_mut().zip(f.hessian(x)) {
                            *hj += *c * fj;
                        }
                    }
                    h
                }),
            },
        )
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField::weighted_sum(&[(1.0, self.clone()), (-1.0, other.clone())])
    }

    /// Reflection `X ↦ 2·pivot − X`.
    pub fn reflect_through(&self, pivot: &VectorField) -> VectorField {
        VectorField::weighted_sum(&[(-1.0, self.clone()), (2.0, pivot.clone())])
    }

    /// Max relative deviation between analytic derivatives and central finite
    /// differences at the given points.
    pub fn fd_consistency(&self, points: &[DVector<f64>]) -> f64 {
        let h = 1e-5;
        let mut worst = 0.0f64;
        for x in points {
            let jac = self.jacobian(x);
            let hess = self.hessian(x);
            for i in 0..self.dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd_col = (self.eval(&xp) - self.eval(&xm)) / (2.0 * h);
                let fd_jp = self.jacobian(&xp);
                let fd_jm = self.jacobian(&xm);
                for j in 0..self.dim {
                    let scale = 1.0f64.max(jac[(j, i)].abs());
                    worst = worst.max((fd_col[j] - jac[(j, i)]).abs() / scale);
                    // ∂(J_{j,k})/∂x_i should match hessian[j][(k,i)].
                    for k in 0..self.dim {
                        let fd = (fd_jp[(j, k)] - fd_jm[(j, k)]) / (2.0 * h);
                        let scale = 1.0f64.max(hess[j][(k, i)].abs());
                        worst = worst.max((fd - hess[j][(k, i)]).abs() / scale);
                    }
                }
            }
        }
        worst
    }
}

/// RK4 flow `ρ_t^X(x)` with `steps` uniform substeps.
///
/// Constant fields short-circuit to the exact translation `x + t·v`. Errors
/// if the trajectory norm exceeds [`FLOW_OVERFLOW_GUARD`].
pub fn flow(field: &VectorField, x: &DVector<f64>, t: f64, steps: usize) -> Result<DVector<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("flow needs steps ≥ 1".into()));
    }
    if let Some(v) = field.as_constant() {
        return Ok(x + t * v);
    }
    if t == 0.0 {
        return Ok(x.clone());
    }
    let h = t / steps as f64;
    let mut y = x.clone();
    for _ in 0..steps {
        let k1 = field.eval(&y);
        let k2 = field.eval(&(&y + (h / 2.0) * &k1));
        let k3 = field.eval(&(&y + (h / 2.0) * &k2));
        let k4 = field.eval(&(&y + h * &k3));
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if y.norm() > FLOW_OVERFLOW_GUARD {
            return Err(Error::FlowOverflow(FLOW_OVERFLOW_GUARD));
        }
    }
    Ok(y)
}

/// First-order Lie derivative `L_X φ(x) = ∇φ(x)·X(x)`.
pub fn lie(field: &VectorField, phi: &TestFunction, x: &DVector<f64>) -> f64 {
    phi.gradient(x).dot(&field.eval(x))
}

/// Second-order Lie derivative
/// `L²_X φ = Σ_{i,j} X_i ∂X_j/∂x_i ∂φ/∂x_j + Σ_{i,j} X_i X_j ∂²φ/∂x_i∂x_j`.
pub fn lie2(field: &VectorField, phi: &TestFunction, x: &DVector<f64>) -> f64 {
    let v = field.eval(x);
    let grad = phi.gradient(x);
    let hess = phi.hessian(x);
    let transport = field.jacobian(x) * &v; // (J_X · X)_j = Σ_i X_i ∂X_j/∂x_i
    grad.dot(&transport) + (v.transpose() * hess * &v)[(0, 0)]
}

/// Euclidean ball used for norm estimation.
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl SampleBox {
    pub fn centered(dim: usize, radius: f64) -> Self {
        Self {
            center: DVector::zeros(dim),
            radius,
        }
    }
}

fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Estimates `‖X‖_{W^{2,∞}}` over the ball: `sup |X| + ‖J‖_op + ‖H‖_op`.
///
/// Exact `|v|` for constant fields; affine fields use the closed form
/// `|A·c + b| + radius·σ_max(A) + σ_max(A)` (tight when centered and
/// homogeneous). Analytic fields are sampled at `samples` deterministic
/// points in the ball plus the center.
pub fn w2inf_norm(field: &VectorField, sample_box: &SampleBox, samples: usize) -> f64 {
    match &field.kind {
        FieldKind::Constant(v) => v.norm(),
        FieldKind::Affine { a, b } => {
            let sigma = operator_norm(a);
            (a * &sample_box.center + b).norm() + sample_box.radius * sigma + sigma
        }
        FieldKind::Analytic(_) => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ba11);
            let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
            use rand::distributions::Distribution;
            let dim = field.dim;
            let eval_at = |x: &DVector<f64>| {
                let h = field
                    .hessian(x)
                    .iter()
                    .map(operator_norm)
                    .fold(0.0f64, f64::max);
                field.eval(x).norm() + operator_norm(&field.jacobian(x)) + h
            };
            let mut worst = eval_at(&sample_box.center);
            for _ in 0..samples.max(1) {
                let mut dir =
                    DVector::from_iterator(dim, (0..dim).map(|_| normal.sample(&mut rng)));
                let n = dir.norm();
                if n > 0.0 {
                    dir /= n;
                }
                let r = sample_box.radius * rng.gen_range(0.0f64..1.0).powf(1.0 / dim as f64);
                let x = &sample_box.center + r * dir;
                worst = worst.max(eval_at(&x));
            }
            worst
        }
    }
}

// ---------------------------------------------------------------------------
// Test functions.
// ---------------------------------------------------------------------------

type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type HessFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A compactly supported scalar test function with analytic gradient and
/// Hessian and a certified bound on `‖∇φ‖∞ + ‖∇²φ‖∞ + ‖∇³φ‖∞`.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    value: ScalarFn,
    gradient: GradFn,
    hessian: HessFn,
    pub support_radius: f64,
    pub c3_bound: f64,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "TestFunction({}, support {}, c3 {:.3e})",
            self.id, self.support_radius, self.c3_bound
        )
    }
}

impl TestFunction {
    pub fn new(
        id: impl Into<String>,
        value: ScalarFn,
        gradient: GradFn,
        hessian: HessFn,
        support_radius: f64,
        c3_bound: f64,
    ) -> Self {
        Self {
            id: id.into(),
            value,
            gradient,
            hessian,
            support_radius,
            c3_bound,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hessian)(x)
    }

    /// The function scaled by `c` (derivatives and the bound scale with it).
    pub fn scaled(&self, c: f64) -> TestFunction {
        let v = self.value.clone();
        let g = self.gradient.clone();
        let h = self.hessian.clone();
        TestFunction {
            id: format!("{}*{}", self.id, c),
            value: Arc::new(move |x| c * v(x)),
            gradient: Arc::new(move |x| c * g(x)),
            hessian: Arc::new(move |x| c * h(x)),
            support_radius: self.support_radius,
            c3_bound: c.abs() * self.c3_bound,
        }
    }

    /// Max relative deviation of analytic gradient/Hessian from central
    /// finite differences of value/gradient at the given points.
    pub fn fd_consistency(&self, points: &[DVector<f64>]) -> f64 {
        let h = 1e-5;
        let mut worst = 0.0f64;
        for x in points {
            let grad = self.gradient(x);
            let hess = self.hessian(x);
            let n = x.len();
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (self.eval(&xp) - self.eval(&xm)) / (2.0 * h);
                worst = worst.max((fd - grad[i]).abs() / 1.0f64.max(grad[i].abs()));
                let gp = self.gradient(&xp);
                let gm = self.gradient(&xm);
                for j in 0..n {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    worst = worst.max((fd - hess[(j, i)]).abs() / 1.0f64.max(hess[(j, i)].abs()));
                }
            }
        }
        worst
    }
}

/// Radial profile `g(s) = exp(1 − 1/(1−s))` on `[0,1)`, with derivatives.
/// Returns `(g, g', g'')`; identically zero for `s` at or beyond the cutoff.
fn bump_profile(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 - 1e-9 {
        return (0.0, 0.0, 0.0);
    }
    let inv = 1.0 / (1.0 - s);
    let g = (1.0 - inv).exp();
    let g1 = -g * inv * inv;
    let g2 = g * (inv.powi(4) - 2.0 * inv.powi(3));
    (g, g1, g2)
}

/// Smooth factor `u(x)` of a battery member, with analytic derivatives.
#[derive(Clone)]
enum Factor {
    One,
    Coord(usize),
    CoordProd(usize, usize),
    /// `(|x−x0|² + δ²)^{k/2}` — a smoothed distance power.
    SmoothPower {
        k: i32,
        x0: DVector<f64>,
        delta: f64,
    },
}

impl Factor {
    fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Coord(i) => x[*i],
            Factor::CoordProd(i, j) => x[*i] * x[*j],
            Factor::SmoothPower { k, x0, delta } => {
                let r2 = (x - x0).norm_squared() + delta * delta;
                r2.powf(*k as f64 / 2.0)
            }
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        match self {
            Factor::One => DVector::zeros(n),
            Factor::Coord(i) => {
                let mut g = DVector::zeros(n);
                g[*i] = 1.0;
                g
            }
            Factor::CoordProd(i, j) => {
                let mut g = DVector::zeros(n);
                g[*i] += x[*j];
                g[*j] += x[*i];
                g
            }
            Factor::SmoothPower { k, x0, delta } => {
                let d = x - x0;
                let r2 = d.norm_squared() + delta * delta;
                let kf = *k as f64;
                kf * r2.powf(kf / 2.0 - 1.0) * d
            }
        }
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        match self {
            Factor::One | Factor::Coord(_) => DMatrix::zeros(n, n),
            Factor::CoordProd(i, j) => {
                let mut h = DMatrix::zeros(n, n);
                h[(*i, *j)] += 1.0;
                h[(*j, *i)] += 1.0;
                h
            }
            Factor::SmoothPower { k, x0, delta } => {
                let d = x - x0;
                let r2 = d.norm_squared() + delta * delta;
                let kf = *k as f64;
                let mut h = kf * (kf - 2.0) * r2.powf(kf / 2.0 - 2.0) * (&d * d.transpose());
                let diag = kf * r2.powf(kf / 2.0 - 1.0);
                for i in 0..n {
                    h[(i, i)] += diag;
                }
                h
            }
        }
    }
}

/// Builds `φ = u · χ` where `χ` is the radial bump centered at `center` with
/// cutoff radius `rho`, differentiated by the product rule.
fn bump_member(
    id: String,
    dim: usize,
    center: DVector<f64>,
    rho: f64,
    factor: Factor,
    support_radius: f64,
) -> TestFunction {
    let rho2 = rho * rho;
    let c_v = center.clone();
    let f_v = factor.clone();
    let value: ScalarFn = Arc::new(move |x: &DVector<f64>| {
        let s = (x - &c_v).norm_squared() / rho2;
        let (g, _, _) = bump_profile(s);
        if g == 0.0 {
            0.0
        } else {
            f_v.eval(x) * g
        }
    });
    let c_g = center.clone();
    let f_g = factor.clone();
    let gradient: GradFn = Arc::new(move |x: &DVector<f64>| {
        let d = x - &c_g;
        let s = d.norm_squared() / rho2;
        let (g, g1, _) = bump_profile(s);
        if g == 0.0 {
            return DVector::zeros(x.len());
        }
        let grad_s = (2.0 / rho2) * d;
        f_g.gradient(x) * g + f_g.eval(x) * g1 * grad_s
    });
    let hessian: HessFn = Arc::new(move |x: &DVector<f64>| {
        let n = x.len();
        let d = x - &center;
        let s = d.norm_squared() / rho2;
        let (g, g1, g2) = bump_profile(s);
        if g == 0.0 {
            return DMatrix::zeros(n, n);
        }
        let grad_s = (2.0 / rho2) * &d;
        let u = factor.eval(x);
        let du = factor.gradient(x);
        // ∇²χ = g''·∇s∇sᵀ + g'·(2/ρ²)I
        let mut chi_h = g2 * (&grad_s * grad_s.transpose());
        for i in 0..n {
            chi_h[(i, i)] += g1 * 2.0 / rho2;
        }
        let cross = &du * (g1 * grad_s.transpose());
        factor.hessian(x) * g + &cross + cross.transpose() + u * chi_h
    });
    let mut tf = TestFunction::new(id, value, gradient, hessian, support_radius, 0.0);
    tf.c3_bound = certify_c3_bound(&tf, dim, support_radius);
    tf
}

/// Grid estimate of `‖∇φ‖∞ + ‖∇²φ‖∞ + ‖∇³φ‖∞` with a 1.5× safety margin;
/// third derivatives via central differences of the analytic Hessian.
fn certify_c3_bound(tf: &TestFunction, dim: usize, radius: f64) -> f64 {
    let pts = derivative_probe_grid(dim, radius, 4000);
    1.5 * derivative_norms_max(tf, &pts)
}

/// Max over points of `|∇φ| + ‖∇²φ‖_op + ‖∇³φ‖_est`.
pub fn derivative_norms_max(tf: &TestFunction, points: &[DVector<f64>]) -> f64 {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for x in points {
        let g = tf.gradient(x).norm();
        let hess = tf.hessian(x);
        let hn = operator_norm(&hess);
        let mut third = 0.0f64;
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let d = (tf.hessian(&xp) - tf.hessian(&xm)) / (2.0 * h);
            third = third.max(operator_norm(&d));
        }
        worst = worst.max(g + hn + third);
    }
    worst
}

/// Deterministic probe points filling the centered ball of the given radius.
pub fn derivative_probe_grid(dim: usize, radius: f64, count: usize) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc3_94ad);
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    use rand::distributions::Distribution;
    (0..count)
        .map(|_| {
            let mut dir = DVector::from_iterator(dim, (0..dim).map(|_| normal.sample(&mut rng)));
            let n = dir.norm();
            if n > 0.0 {
                dir /= n;
            }
            radius * rng.gen_range(0.0f64..1.0).powf(1.0 / dim as f64) * dir
        })
        .collect()
}

/// Standard battery of ≥ 12 compactly supported test functions per
/// dimension, all vanishing for `|x| ≥ 2·radius`:
///
/// - the centered radial bump and bumps at shifted centers (with shrunken
///   cutoffs so the common support bound holds),
/// - coordinates `x_i·χ` and products `x_i x_j·χ`,
/// - smoothed distance powers `(|x−x0|²+δ²)^{k/2}·χ` for `k ∈ {1,2,3}` at
///   three centers.
pub fn standard_test_battery(dim: usize, radius: f64) -> Vec<TestFunction> {
    assert!(radius > 0.0, "battery radius must be positive");
    assert!(dim >= 1);
    let big = 2.0 * radius;
    let mut battery = Vec::new();

    battery.push(bump_member(
        "bump".into(),
        dim,
        DVector::zeros(dim),
        big,
        Factor::One,
        big,
    ));
    for i in 0..dim {
        for sign in [-1.0, 1.0] {
            let mut c = DVector::zeros(dim);
            c[i] = sign * radius / 2.0;
            battery.push(bump_member(
                format!("bump_c{}{}", i, if sign > 0.0 { "p" } else { "m" }),
                dim,
                c.clone(),
                big - c.norm(),
                Factor::One,
                big,
            ));
        }
    }
    for i in 0..dim {
        battery.push(bump_member(
            format!("x{i}"),
            dim,
            DVector::zeros(dim),
            big,
            Factor::Coord(i),
            big,
        ));
    }
    for i in 0..dim {
        for j in i..dim {
            battery.push(bump_member(
                format!("x{i}x{j}"),
                dim,
                DVector::zeros(dim),
                big,
                Factor::CoordProd(i, j),
                big,
            ));
        }
    }
    let mut centers = vec![DVector::zeros(dim)];
    let mut cp = DVector::zeros(dim);
    cp[0] = radius / 2.0;
    centers.push(cp.clone());
    centers.push(-cp);
    for (ci, x0) in centers.into_iter().enumerate() {
        for k in 1..=3 {
            battery.push(bump_member(
                format!("dist{k}_c{ci}"),
                dim,
                DVector::zeros(dim),
                big,
                Factor::SmoothPower {
                    k,
                    x0: x0.clone(),
                    delta: radius / 4.0,
                },
                big,
            ));
        }
    }
    debug_assert!(battery.len() >= 12);
    battery
}
