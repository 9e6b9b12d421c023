//! Command implementations behind the `mdeflow` binary.
//!
//! Four subcommands: `simulate` (scenario TOML → curve files + run
//! manifest), `verify` (curve + scenario → residual report, exit 0 iff under
//! threshold), `converge` (level study → CSV), `distance` (two cloud CSVs →
//! JSON report). All outputs are deterministic for fixed inputs; seeds live
//! in the config, never in the wall clock. Exit codes: 0 success/pass,
//! 1 verification fail, 2 input error, 3 numerical error.

use crate::fields::standard_test_battery;
use crate::measure::{self, EmpiricalMeasure, MeasureCurve};
use crate::residual::residual_suite;
use crate::scenarios::{self, Scenario};
use crate::scheme::{self, Partition, SchemeConfig};
use crate::transport::{wasserstein, Method};
use crate::{Error, Result};
use std::path::{Path, PathBuf};

/// Scenario selection in config files.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ScenarioSpec {
    /// One of `wiener`, `drifted_wiener`, `isotropic2d`, `clt`,
    /// `nonuniqueness`.
    pub key: String,
    /// `clt` only: rows `[weight, x0, x1, ...]` of the step distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Vec<f64>>>,
    /// `nonuniqueness` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_atoms: Option<usize>,
}

/// Time grid selection: uniform `steps` over `[0, t_end]` or explicit nodes.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct PartitionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct OutputSpec {
    pub dir: PathBuf,
    #[serde(default = "default_basename")]
    pub basename: String,
}

fn default_basename() -> String {
    "run".into()
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ConvergeSpec {
    pub levels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// Top-level config for `simulate` and `converge`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default = "SchemeConfig::default")]
    pub scheme: SchemeConfig,
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSpec>,
}

/// Everything needed to reproduce a run bit-identically, plus bookkeeping.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub scenario: ScenarioSpec,
    pub partition: PartitionSpec,
    pub scheme: SchemeConfig,
    pub tool_version: String,
    pub outputs: Vec<String>,
    pub wall_time_secs: f64,
}

/// Builds the scenario named by a spec.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    match spec.key.as_str() {
        "wiener" => Ok(scenarios::wiener()),
        "drifted_wiener" => Ok(scenarios::drifted_wiener()),
        "isotropic2d" => Ok(scenarios::isotropic2d()),
        "clt" => {
            let rows = spec.atoms.as_ref().ok_or_else(|| {
                Error::InvalidArgument("clt scenario needs `atoms` rows [w, x...]".into())
            })?;
            if rows.is_empty() || rows.iter().any(|r| r.len() < 2) {
                return Err(Error::InvalidArgument(
                    "clt atoms must be nonempty rows [w, x0, ...]".into(),
                ));
            }
            let dim = rows[0].len() - 1;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for r in rows {
                if r.len() != dim + 1 {
                    return Err(Error::DimensionMismatch {
                        expected: dim + 1,
                        got: r.len(),
                    });
                }
                weights.push(r[0]);
                points.push(nalgebra::DVector::from_vec(r[1..].to_vec()));
            }
            Ok(scenarios::clt(&EmpiricalMeasure::new(points, weights)?))
        }
        "nonuniqueness" => {
            let (scenario, _, _) = scenarios::nonuniqueness_with(
                scenarios::EllipseParams {
                    m_cap: spec.m_cap.unwrap_or(2.0),
                    m_floor: spec.m_floor.unwrap_or(0.1),
                    k_atoms: spec.k_atoms.unwrap_or(256),
                },
                2,
                40,
            )?;
            Ok(scenario)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown scenario key `{other}`"
        ))),
    }
}

fn build_partition(spec: &PartitionSpec, scenario: &Scenario) -> Result<Partition> {
    if let Some(nodes) = &spec.nodes {
        return Partition::from_nodes(nodes.clone());
    }
    let steps = spec.steps.ok_or_else(|| {
        Error::InvalidArgument("partition needs `steps` or explicit `nodes`".into())
    })?;
    Partition::uniform(spec.t_end.unwrap_or(scenario.horizon), steps)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::SinkhornDiverged { .. } | Error::FlowOverflow(_) | Error::NonFinite(_) => 3,
        _ => 2,
    }
}

fn report_err(context: &str, err: &Error) -> i32 {
    eprintln!("mdeflow: {context}: {err}");
    exit_code_for(err)
}

fn read_config(path: &Path) -> Result<RunConfig> {
    Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
}

/// `simulate`: run the scheme for a scenario config, write the curve files
/// and a run manifest.
pub fn cmd_simulate(config_path: &Path) -> i32 {
    match simulate_inner(config_path) {
        Ok(manifest_path) => {
            println!("{}", manifest_path.display());
            0
        }
        Err(e) => report_err("simulate", &e),
    }
}

fn simulate_inner(config_path: &Path) -> Result<PathBuf> {
    let started = std::time::Instant::now();
    let config = read_config(config_path)?;
    let scenario = build_scenario(&config.scenario)?;
    let partition = build_partition(&config.partition, &scenario)?;
    let curve = scheme::simulate(&scenario.map, &scenario.mu0, &partition, &config.scheme)?;
    let files = measure::write_curve(&curve, &config.output.dir, &config.output.basename)?;
    let manifest = RunManifest {
        scenario: config.scenario.clone(),
        partition: config.partition.clone(),
        scheme: config.scheme.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let manifest_path = config
        .output
        .dir
        .join(format!("{}_manifest.json", config.output.basename));
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest_path)
}

/// `verify`: residual-certify a stored curve against a scenario config.
/// Prints the residual report as JSON; exit 0 iff `max_residual ≤ threshold`.
pub fn cmd_verify(curve_index: &Path, scenario_config: &Path, threshold: f64) -> i32 {
    match verify_inner(curve_index, scenario_config) {
        Ok(report) => {
            match serde_json::to_string_pretty(&report) {
                Ok(s) => println!("{s}"),
                Err(e) => {
                    eprintln!("mdeflow: verify: {e}");
                    return 2;
                }
            }
            if report.max_residual <= threshold {
                0
            } else {
                1
            }
        }
        Err(e) => report_err("verify", &e),
    }
}

fn verify_inner(
    curve_index: &Path,
    scenario_config: &Path,
) -> Result<crate::residual::ResidualReport> {
    let curve = measure::read_curve(curve_index)?;
    let config: RunConfig = toml::from_str(&std::fs::read_to_string(scenario_config)?)?;
    let scenario = build_scenario(&config.scenario)?;
    if scenario.dim != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: scenario.dim,
            got: curve.dim(),
        });
    }
    let radius = battery_radius(&curve);
    let battery = standard_test_battery(curve.dim(), radius);
    let times = curve.times().to_vec();
    residual_suite(&curve, &scenario.map, &battery, &times)
}

/// Battery radius covering the curve support: half the largest point norm,
/// floored at 1 (members vanish beyond twice the radius).
fn battery_radius(curve: &MeasureCurve) -> f64 {
    let mut max_norm = 0.0f64;
    for state in curve.states() {
        for p in state.points() {
            max_norm = max_norm.max(p.norm());
        }
    }
    (max_norm / 2.0).max(1.0)
}

/// `converge`: run the level study and emit
/// `level,sup_distance_to_next,distance_to_reference` CSV.
pub fn cmd_converge(config_path: &Path) -> i32 {
    match converge_inner(config_path) {
        Ok(csv_path) => {
            println!("{}", csv_path.display());
            0
        }
        Err(e) => report_err("converge", &e),
    }
}

fn converge_inner(config_path: &Path) -> Result<PathBuf> {
    let config = read_config(config_path)?;
    let spec = config.converge.as_ref().ok_or_else(|| {
        Error::InvalidArgument("converge needs a [converge] section with levels".into())
    })?;
    let scenario = build_scenario(&config.scenario)?;
    let t_end = config.partition.t_end.unwrap_or(scenario.horizon);
    let p = spec.p.unwrap_or(2.0);
    let reference = scenario.reference.clone();
    let gen_ref = reference.as_ref().map(|r| {
        let r = r.clone();
        move |t: f64, n: usize| r(t, n)
    });
    let report = scheme::convergence_study(
        &scenario.map,
        &scenario.mu0,
        t_end,
        &spec.levels,
        &config.scheme,
        p,
        gen_ref
            .as_ref()
            .map(|g| g as &(dyn Fn(f64, usize) -> Result<EmpiricalMeasure> + Sync)),
    )?;
    std::fs::create_dir_all(&config.output.dir)?;
    let csv_path = config
        .output
        .dir
        .join(format!("{}_convergence.csv", config.output.basename));
    let mut body = String::from("level,sup_distance_to_next,distance_to_reference\n");
    for row in &report.rows {
        let next = row
            .sup_distance_to_next
            .map(|v| v.to_string())
            .unwrap_or_default();
        let dref = row
            .distance_to_reference
            .map(|v| v.to_string())
            .unwrap_or_default();
        body.push_str(&format!("{},{},{}\n", row.level, next, dref));
    }
    std::fs::write(&csv_path, body)?;
    Ok(csv_path)
}

/// `distance`: W_p between two cloud CSVs; prints the JSON report.
pub fn cmd_distance(cloud_a: &Path, cloud_b: &Path, p: f64, method: Method) -> i32 {
    match distance_inner(cloud_a, cloud_b, p, method) {
        Ok(json) => {
            println!("{json}");
            0
        }
        Err(e) => report_err("distance", &e),
    }
}

fn distance_inner(cloud_a: &Path, cloud_b: &Path, p: f64, method: Method) -> Result<String> {
    let a = measure::read_cloud(cloud_a)?;
    let b = measure::read_cloud(cloud_b)?;
    let report = wasserstein(&a, &b, p, method)?;
    Ok(serde_json::to_string_pretty(&report)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_specs_build() {
        for key in ["wiener", "drifted_wiener", "isotropic2d"] {
            let spec = ScenarioSpec {
                key: key.into(),
                atoms: None,
                m_cap: None,
                m_floor: None,
                k_atoms: None,
            };
            assert_eq!(build_scenario(&spec).unwrap().name, key);
        }
        let clt = ScenarioSpec {
            key: "clt".into(),
            atoms: Some(vec![vec![0.8, -0.5], vec![0.2, 2.0]]),
            m_cap: None,
            m_floor: None,
            k_atoms: None,
        };
        assert_eq!(build_scenario(&clt).unwrap().dim, 1);
        let bad = ScenarioSpec {
            key: "unknown".into(),
            atoms: None,
            m_cap: None,
            m_floor: None,
            k_atoms: None,
        };
        assert!(build_scenario(&bad).is_err());
    }

    #[test]
    fn malformed_config_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "this is not toml [").unwrap();
        assert_eq!(cmd_simulate(&bad), 2);
        assert_eq!(cmd_simulate(&dir.path().join("missing.toml")), 2);
    }
}
