//! `evolve`, `detect` and `fit`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use espkit_core::analysis::{
    attach_label, classify_trajectory, default_min_duration, detect_transitions, fit_short_time,
    Classification, ClassifyOptions, Parity,
};
use espkit_core::dynamics::Trajectory;
use espkit_core::model::spin_star_hamiltonian;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{gnuplot_script, parse_trajectory_csv, read_file, to_json, trajectory_csv, write_file, EventRecord};

pub const TOOL: &str = "espkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationRecord {
    pub label: Option<String>,
    pub cne_at_zero: f64,
    pub diagnostics: String,
}

impl From<&Classification> for ClassificationRecord {
    fn from(c: &Classification) -> Self {
        Self {
            label: c.label.map(|l| l.to_string()),
            cne_at_zero: c.cne_at_zero,
            diagnostics: c.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub threshold: f64,
    pub min_duration: f64,
    pub sample_spacing: f64,
    pub events: Vec<EventRecord>,
    pub classification: Option<ClassificationRecord>,
}

/// Events plus, when negative times are present, the label near `t = 0`.
pub fn analyse_trajectory(
    traj: &Trajectory,
    threshold: f64,
    min_duration: Option<f64>,
    classify_window: f64,
    esp_sign: Option<f64>,
) -> CliResult<DetectionReport> {
    let min_duration = min_duration.unwrap_or_else(|| default_min_duration(traj));
    let mut events = detect_transitions(traj, threshold, min_duration)?;
    let classification = if traj.times.first().is_some_and(|&t| t < 0.0) && traj.index_of(0.0).is_some() {
        let opts = ClassifyOptions {
            window: classify_window,
            threshold,
            min_duration: Some(min_duration),
        };
        let c = classify_trajectory(traj, esp_sign, &opts)?;
        attach_label(&mut events, c.label, classify_window);
        Some(c)
    } else {
        None
    };
    Ok(DetectionReport {
        threshold,
        min_duration,
        sample_spacing: traj.max_spacing(),
        events: events.iter().map(EventRecord::from).collect(),
        classification: classification.as_ref().map(ClassificationRecord::from),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantRecord {
    pub max_trace_deviation: f64,
    pub max_hermiticity_deviation: f64,
    pub max_clipped_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    pub state_label: String,
    pub method: String,
    pub n_samples: usize,
    pub invariants: InvariantRecord,
    pub detection: DetectionReport,
}

#[derive(Debug, Clone)]
pub struct EvolveOutput {
    pub trajectory_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

pub fn compute_trajectory(cfg: &RunConfig) -> CliResult<Trajectory> {
    let spin = cfg.spin()?;
    let h = spin_star_hamiltonian(cfg.coupling(), spin);
    let initial = cfg.initial_state()?;
    Ok(espkit_core::dynamics::sample_trajectory(
        &h,
        &initial,
        &cfg.evolution_spec(),
        cfg.state_label(),
    )?)
}

/// Samples the configured trajectory and writes the CSV and manifest into `out`.
pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> CliResult<EvolveOutput> {
    let traj = compute_trajectory(cfg)?;
    let esp_sign = cfg.weighting_id().map(|_| cfg.state.epsilon);
    let detection = analyse_trajectory(
        &traj,
        cfg.detection.threshold,
        cfg.detection.min_duration,
        cfg.detection.classify_window,
        esp_sign,
    )?;
    let mut resolved = cfg.clone();
    resolved.detection.min_duration = Some(detection.min_duration);
    let manifest = Manifest {
        tool: TOOL,
        version: VERSION,
        command: "evolve",
        config: resolved,
        state_label: cfg.state_label(),
        method: traj.meta.method.to_string(),
        n_samples: traj.len(),
        invariants: InvariantRecord {
            max_trace_deviation: traj.meta.max_trace_deviation,
            max_hermiticity_deviation: traj.meta.max_hermiticity_deviation,
            max_clipped_mass: traj.meta.max_clipped_mass,
        },
        detection,
    };
    let trajectory_path = out.join(&cfg.output.trajectory);
    let manifest_path = out.join(&cfg.output.manifest);
    write_file(&trajectory_path, &trajectory_csv(&traj))?;
    write_file(&manifest_path, &to_json(&manifest))?;
    if cfg.output.gnuplot_script {
        write_file(
            &out.join("trajectory.gp"),
            &gnuplot_script(&cfg.state_label(), std::slice::from_ref(&cfg.output.trajectory)),
        )?;
    }
    Ok(EvolveOutput {
        trajectory_path,
        manifest_path,
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectOutput {
    pub source: String,
    #[serde(flatten)]
    pub report: DetectionReport,
}

pub fn cmd_detect(
    traj_path: &Path,
    threshold: f64,
    min_duration: Option<f64>,
    classify_window: f64,
) -> CliResult<DetectOutput> {
    let data = read_file(traj_path)?;
    let source = traj_path.display().to_string();
    let traj = parse_trajectory_csv(&data, &source)?;
    Ok(DetectOutput {
        source,
        report: analyse_trajectory(&traj, threshold, min_duration, classify_window, None)?,
    })
}

/// Parses `lo:hi`.
pub fn parse_window(s: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Usage(format!("window must look like lo:hi with 0 < lo < hi, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(bad());
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub window: (f64, f64),
    pub parity: String,
    pub coefficients: [f64; 5],
    pub residual: f64,
    pub residual_bound: f64,
    pub condition: f64,
    pub dt_grid: Vec<f64>,
    pub pass: bool,
}

/// Fits `lambda*(dt)` for the configured state; passes when the residual is
/// within `1e-10 max(1, |c0|)`.
pub fn cmd_fit(cfg: &RunConfig, window: (f64, f64), parity: Parity) -> CliResult<FitReport> {
    let spin = cfg.spin()?;
    let h = spin_star_hamiltonian(cfg.coupling(), spin);
    let fit = fit_short_time(&h, &cfg.initial_state()?, window, parity)?;
    let residual_bound = 1e-10 * fit.c(0).abs().max(1.0);
    Ok(FitReport {
        tool: TOOL,
        version: VERSION,
        config: cfg.clone(),
        window,
        parity: match parity {
            Parity::Even => "even".into(),
            Parity::Full => "full".into(),
        },
        coefficients: fit.coefficients,
        residual: fit.residual,
        residual_bound,
        condition: fit.condition,
        dt_grid: fit.dt_grid,
        pass: fit.residual <= residual_bound,
    })
}
