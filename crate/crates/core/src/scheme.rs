//! The explicit splitting scheme for the measure flow equation.
//!
//! One step of length `τ` from state `μ` with ensemble `V = V[μ]`:
//!
//! 1. **dispersion** — mixture over atoms `X_k` of the pushforward of `μ`
//!    under the flow of the centered field `X_k − m` for time `√τ`, then
//!    deterministic resampling back to the particle budget;
//! 2. **drift** — pushforward under the flow of the mean field `m` for
//!    time `τ`.
//!
//! Node values are `μ(x_{l+1}) = drift_τ(dispersion_τ(μ(x_l)))`. With
//! half-step recording on, the midpoint of each interval carries the
//! dispersion output (the dispersion runs on the first half-interval at
//! doubled time argument, the drift on the second), which matches the node
//! composition at interval ends.
//!
//! Both operators evaluate the ensemble at the step-start state by default;
//! `reevaluate_after_f` switches the drift step to the post-dispersion state
//! (for Lipschitz maps the two differ by `O(τ^{3/2})`, below scheme order).

use crate::ensemble::{EnsembleMap, FieldEnsemble};
use crate::fields::flow;
use crate::measure::{EmpiricalMeasure, MeasureCurve};
use crate::transport::{self, Method};
use crate::{Error, Result};

/// A strictly increasing grid on `[0, T]` with `nodes[0] = 0`.
#[derive(Debug, Clone)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument(
                "partition needs at least two nodes".into(),
            ));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "partition must start at 0, got {}",
                nodes[0]
            )));
        }
        for w in nodes.windows(2) {
            // Negated comparison also rejects NaN nodes.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "partition not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { nodes })
    }

    /// Uniform partition of `[0, t_end]` into `steps` intervals.
    pub fn uniform(t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || t_end <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "uniform partition needs steps ≥ 1 and t_end > 0, got {steps}, {t_end}"
            )));
        }
        Self::from_nodes(
            (0..=steps)
                .map(|i| t_end * i as f64 / steps as f64)
                .collect(),
        )
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Maximal step length.
    pub fn max_step(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Scheme parameters; all randomness flows from `seed`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    pub particle_budget: usize,
    pub seed: u64,
    pub flow_substeps: usize,
    pub record_half_steps: bool,
    /// Evaluate the drift-step ensemble at the post-dispersion state instead
    /// of the step start.
    pub reevaluate_after_f: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            particle_budget: 10_000,
            seed: 0,
            flow_substeps: 32,
            record_half_steps: false,
            reevaluate_after_f: false,
        }
    }
}

impl SchemeConfig {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.particle_budget = budget;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-step resampling seed derived from the run seed and the step index.
fn step_seed(seed: u64, step: usize) -> u64 {
    splitmix64(seed ^ splitmix64(step as u64 + 1))
}

/// Drift step: pushforward of `m` under the flow of the ensemble mean field
/// for time `t`. Particle count unchanged.
pub fn drift_step(
    ensemble: &FieldEnsemble,
    m: &EmpiricalMeasure,
    t: f64,
    cfg: &SchemeConfig,
) -> Result<EmpiricalMeasure> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("drift time {t} < 0")));
    }
    let mean = ensemble.mean_field();
    let steps = cfg.flow_substeps.max(1);
    m.pushforward_fallible(|x| flow(&mean, x, t, steps))
}

/// Dispersion step: mixture over atoms of pushforwards under the flows of
/// the centered fields for time `√t`, then resampling to the budget.
pub fn dispersion_step(
    ensemble: &FieldEnsemble,
    m: &EmpiricalMeasure,
    t: f64,
    cfg: &SchemeConfig,
) -> Result<EmpiricalMeasure> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("dispersion time {t} < 0")));
    }
    let sqrt_t = t.sqrt();
    let mean = ensemble.mean_field();
    let steps = cfg.flow_substeps.max(1);
    let mut parts = Vec::with_capacity(ensemble.atoms().len());
    for (_, field) in ensemble.atoms() {
        let centered = field.sub(&mean);
        parts.push(m.pushforward_fallible(|x| flow(&centered, x, sqrt_t, steps))?);
    }
    let weighted: Vec<(f64, &EmpiricalMeasure)> = ensemble
        .atoms()
        .iter()
        .map(|(w, _)| *w)
        .zip(parts.iter())
        .collect();
    EmpiricalMeasure::mixture(&weighted)?.resample(cfg.particle_budget, cfg.seed)
}

/// Runs the scheme over the partition, invoking `observe` at every recorded
/// time (including `t = 0` and, when configured, interval midpoints).
/// Returns the final state.
pub fn simulate_observed(
    map: &EnsembleMap,
    mu0: &EmpiricalMeasure,
    partition: &Partition,
    cfg: &SchemeConfig,
    mut observe: impl FnMut(f64, &EmpiricalMeasure),
) -> Result<EmpiricalMeasure> {
    let nodes = partition.nodes();
    let mut current = mu0.resample(cfg.particle_budget, cfg.seed)?;
    observe(nodes[0], &current);
    for l in 0..partition.steps() {
        let h = nodes[l + 1] - nodes[l];
        let ensemble = map.ensemble_for(&current);
        let step_cfg = SchemeConfig {
            seed: step_seed(cfg.seed, l),
            ..cfg.clone()
        };
        let dispersed = dispersion_step(&ensemble, &current, h, &step_cfg)?;
        if cfg.record_half_steps {
            observe(nodes[l] + h / 2.0, &dispersed);
        }
        let drift_ensemble = if cfg.reevaluate_after_f {
            map.ensemble_for(&dispersed)
        } else {
            ensemble
        };
        current = drift_step(&drift_ensemble, &dispersed, h, &step_cfg)?;
        observe(nodes[l + 1], &current);
    }
    Ok(current)
}

/// Runs the scheme and collects the full curve (plus midpoints when
/// `cfg.record_half_steps` is set). Deterministic for a fixed config.
pub fn simulate(
    map: &EnsembleMap,
    mu0: &EmpiricalMeasure,
    partition: &Partition,
    cfg: &SchemeConfig,
) -> Result<MeasureCurve> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    simulate_observed(map, mu0, partition, cfg, |t, m| {
        times.push(t);
        states.push(m.clone());
    })?;
    MeasureCurve::new(times, states)
}

/// Runs the time-frozen (linear) variant: the ensemble of each step comes
/// from the step-start time, not from the evolving state.
pub fn simulate_linear(
    ensemble_at: impl Fn(f64) -> FieldEnsemble,
    mu0: &EmpiricalMeasure,
    partition: &Partition,
    cfg: &SchemeConfig,
) -> Result<MeasureCurve> {
    let nodes = partition.nodes();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut current = mu0.resample(cfg.particle_budget, cfg.seed)?;
    times.push(nodes[0]);
    states.push(current.clone());
    for l in 0..partition.steps() {
        let h = nodes[l + 1] - nodes[l];
        let ensemble = ensemble_at(nodes[l]);
        let step_cfg = SchemeConfig {
            seed: step_seed(cfg.seed, l),
            ..cfg.clone()
        };
        let dispersed = dispersion_step(&ensemble, &current, h, &step_cfg)?;
        if cfg.record_half_steps {
            times.push(nodes[l] + h / 2.0);
            states.push(dispersed.clone());
        }
        current = drift_step(&ensemble, &dispersed, h, &step_cfg)?;
        times.push(nodes[l + 1]);
        states.push(current.clone());
    }
    MeasureCurve::new(times, states)
}

/// One row of a convergence study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    /// Sup distance to the next-finer level over shared node times.
    pub sup_distance_to_next: Option<f64>,
    /// Distance to the closed-form reference at the final time.
    pub distance_to_reference: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Sup distance between two seeds at the finest level — the particle
    /// noise floor against which Cauchy behavior is judged.
    pub noise_floor: f64,
    /// True when consecutive level distances never increase by more than the
    /// noise floor.
    pub cauchy_monotone_within_floor: bool,
    pub p: f64,
}

/// Generates a reference cloud for a time and particle count.
pub type ReferenceGen<'a> = &'a (dyn Fn(f64, usize) -> Result<EmpiricalMeasure> + Sync);

/// Distance between two scheme states: exact in 1-D; in higher dimensions
/// both clouds are resampled to a shared comparison budget and matched by
/// optimal assignment.
pub fn state_distance(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    p: f64,
    comparison_budget: usize,
    seed: u64,
) -> Result<f64> {
    if a.dim() == 1 {
        return Ok(transport::wasserstein(a, b, p, Method::Exact1D)?.cost);
    }
    let ar = a.resample(comparison_budget, seed)?;
    let br = b.resample(comparison_budget, seed)?;
    if ar.len() == br.len() && ar.is_equal_weight() && br.is_equal_weight() {
        Ok(transport::wasserstein(&ar, &br, p, Method::Assignment)?.cost)
    } else {
        Ok(transport::wasserstein(&ar, &br, p, Method::Sinkhorn)?.cost)
    }
}

const COMPARISON_BUDGET: usize = 1024;

/// Runs the scheme on uniform partitions at each level, reporting pairwise
/// sup distances between consecutive levels (over shared node times) and the
/// final-time distance to the reference when one is supplied.
pub fn convergence_study(
    map: &EnsembleMap,
    mu0: &EmpiricalMeasure,
    t_end: f64,
    levels: &[usize],
    cfg: &SchemeConfig,
    p: f64,
    reference: Option<ReferenceGen>,
) -> Result<ConvergenceReport> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("convergence needs ≥ 1 level".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "levels must be strictly increasing".into(),
        ));
    }
    let mut curves = Vec::with_capacity(levels.len());
    for &n in levels {
        let partition = Partition::uniform(t_end, n)?;
        curves.push(simulate(map, mu0, &partition, cfg)?);
    }

    let mut rows = Vec::new();
    for (i, &level) in levels.iter().enumerate() {
        let sup_next = if i + 1 < levels.len() {
            Some(curve_pair_sup(&curves[i], &curves[i + 1], p, cfg.seed)?)
        } else {
            None
        };
        let dist_ref = match reference {
            Some(gen) => {
                let state = curves[i].states().last().unwrap();
                let r = gen(t_end, state.len().max(COMPARISON_BUDGET))?;
                Some(state_distance(state, &r, p, COMPARISON_BUDGET, cfg.seed)?)
            }
            None => None,
        };
        rows.push(ConvergenceRow {
            level,
            sup_distance_to_next: sup_next,
            distance_to_reference: dist_ref,
        });
    }

    // Two-seed noise floor at the finest level.
    let finest = Partition::uniform(t_end, *levels.last().unwrap())?;
    let alt_cfg = SchemeConfig {
        seed: cfg.seed.wrapping_add(1),
        ..cfg.clone()
    };
    let alt = simulate(map, mu0, &finest, &alt_cfg)?;
    let noise_floor = curve_pair_sup(curves.last().unwrap(), &alt, p, cfg.seed)?;

    let mut monotone = true;
    let seq: Vec<f64> = rows.iter().filter_map(|r| r.sup_distance_to_next).collect();
    for w in seq.windows(2) {
        if w[1] > w[0] + noise_floor.max(1e-12) {
            monotone = false;
        }
    }
    if let Some(refs) = rows
        .iter()
        .map(|r| r.distance_to_reference)
        .collect::<Option<Vec<f64>>>()
    {
        for w in refs.windows(2) {
            if w[1] > w[0] + noise_floor.max(1e-12) {
                monotone = false;
            }
        }
    }

    Ok(ConvergenceReport {
        rows,
        noise_floor,
        cauchy_monotone_within_floor: monotone,
        p,
    })
}

/// Sup of state distances over node times shared by both curves.
fn curve_pair_sup(a: &MeasureCurve, b: &MeasureCurve, p: f64, seed: u64) -> Result<f64> {
    let mut sup = 0.0f64;
    let mut shared = 0usize;
    for (i, &t) in a.times().iter().enumerate() {
        if let Ok(j) = b.node_index(t) {
            shared += 1;
            sup = sup.max(state_distance(
                &a.states()[i],
                &b.states()[j],
                p,
                COMPARISON_BUDGET,
                seed,
            )?);
        }
    }
    if shared == 0 {
        return Err(Error::GridMismatch(
            "curves share no node times (not even t = 0)".into(),
        ));
    }
    Ok(sup)
}
