//! Configuration ingestion, scenario orchestration, sweeps and the run
//! manifest. Config files are versioned JSON documents; the in-repo corpus
//! mirrors the reference study setups and is embedded so runs work from any
//! directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, peak_spacing_errors, settling_time, simulate, SimulationScenario,
};
use crate::error::{Error, Result};
use crate::radio::{planner_report, write_planner_csv, PlannerRow};
use crate::stability::{
    plant_stability_check, string_stability_exact, string_stability_sufficient,
    FrequencySweepConfig,
};
use crate::types::{derive_lambda_eta, RadioParams, StabilityVerdict};

pub const SCHEMA_VERSION: u32 = 1;
pub const SETTLING_TOL: f64 = 1e-3;

/// A validated top-level config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Config {
    Simulate { schema: u32, #[serde(flatten)] scenario: SimulationScenario },
    Radio { schema: u32, #[serde(flatten)] plan: RadioPlanSpec },
    Sweep { schema: u32, #[serde(flatten)] sweep: SweepSpec },
}

/// Planner grid: a base parameter set expanded over carrier and handover
/// frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioPlanSpec {
    pub params: RadioParams,
    pub m_followers: usize,
    pub headway: f64,
    pub standstill: f64,
    pub carrier_freqs_hz: Vec<f64>,
    pub handover_freqs_hz: Vec<f64>,
}

/// Grid sweep over scenario knobs; each grid point re-runs the base scenario
/// with the overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: SimulationScenario,
    #[serde(default)]
    pub delays: Vec<f64>,
    #[serde(default)]
    pub platoon_sizes: Vec<usize>,
    #[serde(default)]
    pub headways: Vec<f64>,
    /// Gain tuples as `[k_v, k_vo, k_x, k_xo]`.
    #[serde(default)]
    pub gain_sets: Vec<[f64; 4]>,
}

/// Load and validate a config document from disk.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)?;
    let config: Config = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })?;
    validate_config(&config).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(config)
}

pub fn parse_config(text: &str, origin: &str) -> Result<Config> {
    let config: Config = serde_json::from_str(text).map_err(|source| Error::Json {
        path: origin.to_string(),
        source,
    })?;
    validate_config(&config).map_err(|e| Error::Config {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    Ok(config)
}

fn validate_config(config: &Config) -> Result<()> {
    let schema = match config {
        Config::Simulate { schema, .. }
        | Config::Radio { schema, .. }
        | Config::Sweep { schema, .. } => *schema,
    };
    if schema != SCHEMA_VERSION {
        return Err(Error::Config {
            path: String::new(),
            message: format!("unsupported schema version {schema}, expected {SCHEMA_VERSION}"),
        });
    }
    match config {
        Config::Simulate { scenario, .. } => scenario.validate(),
        Config::Radio { plan, .. } => {
            plan.params.validate()?;
            if plan.carrier_freqs_hz.is_empty() || plan.handover_freqs_hz.is_empty() {
                return Err(Error::Config {
                    path: String::new(),
                    message: "planner grid must list at least one carrier and handover frequency"
                        .into(),
                });
            }
            Ok(())
        }
        Config::Sweep { sweep, .. } => sweep.base.validate(),
    }
}

/// Verdict block of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VerdictSummary {
    pub plant: Option<StabilityVerdict>,
    pub string_sufficient: Option<StabilityVerdict>,
    pub string_exact: Option<StabilityVerdict>,
    pub settling_time_s: Option<f64>,
    pub peak_spacing_errors_m: Vec<f64>,
    pub truncated: bool,
    pub all_feasible: bool,
}

/// Everything needed to reproduce and audit one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario_id: String,
    pub schema: u32,
    pub config: serde_json::Value,
    pub integrator: Option<IntegratorSettings>,
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u128,
    pub verdicts: VerdictSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub method: dynamics::IntegrationMethod,
    pub dt: f64,
}

/// Artifacts of one scenario execution.
pub struct RunOutput {
    pub manifest: RunManifest,
    pub planner_rows: Vec<PlannerRow>,
}

/// Execute one config: simulate / check stability / plan radio as configured,
/// write CSV artifacts plus `manifest.json` under `out_dir`.
pub fn run_scenario(id: &str, config: &Config, out_dir: &Path) -> Result<RunOutput> {
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut outputs = Vec::new();
    let mut verdicts = VerdictSummary::default();
    let mut planner_rows = Vec::new();
    let mut integrator = None;

    match config {
        Config::Simulate { scenario, .. } => {
            integrator = Some(IntegratorSettings { method: scenario.method, dt: scenario.dt });
            let h = scenario.platoon.headway;
            let tau = scenario.platoon.delay;
            let le = derive_lambda_eta(&scenario.gains, h)?;
            verdicts.plant = Some(plant_stability_check(&le, tau)?);
            verdicts.string_sufficient =
                Some(string_stability_sufficient(&scenario.gains, h, tau)?);
            let sweep = FrequencySweepConfig::default_for(&scenario.gains, h);
            verdicts.string_exact =
                Some(string_stability_exact(&scenario.gains, h, tau, &sweep)?);

            let traj = simulate(scenario)?;
            verdicts.truncated = traj.truncated;
            verdicts.peak_spacing_errors_m = peak_spacing_errors(&traj);
            verdicts.settling_time_s = settling_time(&traj, SETTLING_TOL);

            let path = out_dir.join(format!("{id}_trajectory.csv"));
            let mut file = fs::File::create(&path)?;
            dynamics::write_trajectory_csv(&traj, &mut file)?;
            outputs.push(path);

            verdicts.all_feasible = verdicts.plant.map_or(false, |v| v.stable)
                && verdicts.string_exact.map_or(false, |v| v.stable)
                && !traj.truncated;
        }
        Config::Radio { plan, .. } => {
            planner_rows = planner_report(
                &plan.params,
                plan.m_followers,
                plan.headway,
                plan.standstill,
                &plan.carrier_freqs_hz,
                &plan.handover_freqs_hz,
            )?;
            let path = out_dir.join(format!("{id}_planner.csv"));
            let mut file = fs::File::create(&path)?;
            write_planner_csv(&planner_rows, &mut file)?;
            outputs.push(path);
            verdicts.all_feasible = planner_rows.iter().all(|r| r.v_max > 0.0);
        }
        Config::Sweep { sweep, .. } => {
            let report = run_sweep(sweep)?;
            let path = out_dir.join(format!("{id}_sweep.csv"));
            let mut file = fs::File::create(&path)?;
            write_sweep_report_csv(&report, &mut file)?;
            outputs.push(path);
            verdicts.all_feasible = report.iter().all(|r| r.error.is_none());
        }
    }

    let manifest = RunManifest {
        scenario_id: id.to_string(),
        schema: SCHEMA_VERSION,
        config: serde_json::to_value(config).expect("config serializes"),
        integrator,
        outputs: outputs.clone(),
        wall_ms: started.elapsed().as_millis(),
        verdicts,
    };
    let manifest_path = out_dir.join(format!("{id}_manifest.json"));
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("manifest json"))?;
    Ok(RunOutput { manifest, planner_rows })
}

/// One sweep grid point and its outcome. Failures are recorded per row; the
/// sweep itself keeps going.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delay: f64,
    pub m_followers: usize,
    pub headway: f64,
    pub gains: [f64; 4],
    pub peak_errors: Vec<f64>,
    pub settling_time_s: Option<f64>,
    pub plant_stable: Option<bool>,
    pub string_stable: Option<bool>,
    pub truncated: bool,
    pub error: Option<String>,
}

fn grid_points(spec: &SweepSpec) -> Vec<SimulationScenario> {
    let delays: Vec<f64> = if spec.delays.is_empty() {
        vec![spec.base.platoon.delay]
    } else {
        spec.delays.clone()
    };
    let sizes: Vec<usize> = if spec.platoon_sizes.is_empty() {
        vec![spec.base.platoon.m_followers]
    } else {
        spec.platoon_sizes.clone()
    };
    let headways: Vec<f64> = if spec.headways.is_empty() {
        vec![spec.base.platoon.headway]
    } else {
        spec.headways.clone()
    };
    let gains: Vec<[f64; 4]> = if spec.gain_sets.is_empty() {
        let g = spec.base.gains;
        vec![[g.k_v, g.k_vo, g.k_x, g.k_xo]]
    } else {
        spec.gain_sets.clone()
    };
    let mut points = Vec::new();
    for &tau in &delays {
        for &m in &sizes {
            for &h in &headways {
                for &g in &gains {
                    let mut s = spec.base.clone();
                    s.platoon.delay = tau;
                    s.platoon.m_followers = m;
                    s.platoon.headway = h;
                    s.gains = crate::types::ControlGains {
                        k_v: g[0],
                        k_vo: g[1],
                        k_x: g[2],
                        k_xo: g[3],
                    };
                    points.push(s);
                }
            }
        }
    }
    points
}

fn run_point(s: &SimulationScenario) -> SweepRow {
    let g = s.gains;
    let mut row = SweepRow {
        delay: s.platoon.delay,
        m_followers: s.platoon.m_followers,
        headway: s.platoon.headway,
        gains: [g.k_v, g.k_vo, g.k_x, g.k_xo],
        peak_errors: Vec::new(),
        settling_time_s: None,
        plant_stable: None,
        string_stable: None,
        truncated: false,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let le = derive_lambda_eta(&s.gains, s.platoon.headway)?;
        row.plant_stable = Some(plant_stability_check(&le, s.platoon.delay)?.stable);
        let sweep = FrequencySweepConfig::default_for(&s.gains, s.platoon.headway);
        row.string_stable =
            Some(string_stability_exact(&s.gains, s.platoon.headway, s.platoon.delay, &sweep)?.stable);
        let traj = simulate(s)?;
        row.peak_errors = peak_spacing_errors(&traj);
        row.settling_time_s = settling_time(&traj, SETTLING_TOL);
        row.truncated = traj.truncated;
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row
}

/// Run every grid point; rows come back in grid order regardless of the
/// execution schedule.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let points = grid_points(spec);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(points.par_iter().map(run_point).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(points.iter().map(run_point).collect())
    }
}

/// Sequential twin of [`run_sweep`], kept callable under every feature set so
/// the benchmark suite can compare schedules.
pub fn run_sweep_sequential(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    Ok(grid_points(spec).iter().map(run_point).collect())
}

/// CSV export of a sweep report; one row per grid point, order-stable.
pub fn write_sweep_report_csv<W: std::io::Write>(rows: &[SweepRow], out: &mut W) -> Result<()> {
    writeln!(
        out,
        "tau,M,h,k_v,k_vo,k_x,k_xo,max_peak_error,settling_time,plant_stable,string_stable,truncated,error"
    )?;
    for r in rows {
        let peak = r.peak_errors.iter().cloned().fold(f64::NAN, f64::max);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.delay,
            r.m_followers,
            r.headway,
            r.gains[0],
            r.gains[1],
            r.gains[2],
            r.gains[3],
            if r.peak_errors.is_empty() { String::new() } else { peak.to_string() },
            r.settling_time_s.map(|t| t.to_string()).unwrap_or_default(),
            r.plant_stable.map(|b| b.to_string()).unwrap_or_default(),
            r.string_stable.map(|b| b.to_string()).unwrap_or_default(),
            r.truncated,
            r.error.as_deref().unwrap_or("")
        )?;
    }
    Ok(())
}

/// The in-repo scenario corpus, embedded at compile time.
pub const CORPUS: &[(&str, &str)] = &[
    ("fig3a", include_str!("../../../scenarios/fig3a.json")),
    ("fig3b", include_str!("../../../scenarios/fig3b.json")),
    ("fig3c", include_str!("../../../scenarios/fig3c.json")),
    ("fig4", include_str!("../../../scenarios/fig4.json")),
    ("fig5a", include_str!("../../../scenarios/fig5a.json")),
    ("fig5b", include_str!("../../../scenarios/fig5b.json")),
    ("fig6a", include_str!("../../../scenarios/fig6a.json")),
    ("fig6b", include_str!("../../../scenarios/fig6b.json")),
    ("fig7a", include_str!("../../../scenarios/fig7a.json")),
    ("fig7b", include_str!("../../../scenarios/fig7b.json")),
    ("fig8a", include_str!("../../../scenarios/fig8a.json")),
    ("fig8b", include_str!("../../../scenarios/fig8b.json")),
    ("table1", include_str!("../../../scenarios/table1.json")),
];

/// Look up a corpus scenario by id.
pub fn corpus_config(id: &str) -> Result<Config> {
    let text = CORPUS
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, text)| *text)
        .ok_or_else(|| Error::UnknownScenario(id.to_string()))?;
    parse_config(text, &format!("corpus:{id}"))
}

pub fn corpus_ids() -> Vec<&'static str> {
    CORPUS.iter().map(|(name, _)| *name).collect()
}
