//! Reproduction targets for the short-time tables and the trajectory figures.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use espkit_core::analysis::{
    fit_short_time, table_ii_label, table_ii_sign, trajectory_distance, AnalyticCneFormula, Parity,
    ProductConfig, TableSign, TrajectoryLabel, DEFAULT_CLASSIFY_WINDOW, DEFAULT_THRESHOLD,
    RECIPE_COUPLING,
};
use espkit_core::dynamics::{sample_trajectory, EvolutionSpec, InitialState, Trajectory};
use espkit_core::model::{spin_star_hamiltonian, ExchangeCoupling};
use espkit_core::states::{esp_weighting, mixed_initial, product_initial, pure_initial, WeightingId};
use espkit_core::SpinMagnitude;

use crate::commands::{analyse_trajectory, DetectionReport, TOOL, VERSION};
use crate::error::{CliError, CliResult};
use crate::io::{format_f64, gnuplot_script, to_json, trajectory_csv, write_file};

pub const DEFAULT_TOL_REL: f64 = 1e-3;
/// Absolute tolerance on a coefficient whose closed form is zero, and on `c0`.
pub const TOL_ABS: f64 = 1e-6;
pub const FIT_WINDOW: (f64, f64) = (1e-3, 1e-2);
pub const ESP_MAGNITUDE: f64 = 0.01;

pub const FIG2_COUPLINGS: [ExchangeCoupling; 4] = [
    ExchangeCoupling::new(1.0, 1.0, 1.0),
    ExchangeCoupling::new(1.0, -1.0, 1.0),
    ExchangeCoupling::new(1.0, 0.5, 1.0),
    ExchangeCoupling::new(1.0, -0.5, 1.0),
];
pub const FIG2_SPINS: [SpinMagnitude; 2] = [SpinMagnitude::HALF, SpinMagnitude::ONE];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Table1,
    Table2,
    Fig2,
    Fig4,
    Fig5,
}

impl Target {
    pub const ALL: [Target; 5] = [Target::Table1, Target::Table2, Target::Fig2, Target::Fig4, Target::Fig5];
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Fig2 => "fig2",
            Target::Fig4 => "fig4",
            Target::Fig5 => "fig5",
        })
    }
}

impl FromStr for Target {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown target {s:?}; expected table1, table2, fig2, fig4 or fig5")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub name: String,
    pub file: String,
    pub detection: DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub target: String,
    pub tol_rel: f64,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub curves: Vec<CurveSummary>,
}

fn rel_ok(got: f64, want: f64, tol_rel: f64) -> bool {
    if want == 0.0 {
        got.abs() <= TOL_ABS
    } else {
        ((got - want) / want).abs() <= tol_rel
    }
}

fn rel_error(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn coupling_tag(j: ExchangeCoupling) -> String {
    format!("j{}_{}_{}", j.jx, j.jy, j.jz)
}

fn eps_tag(eps: f64) -> String {
    format!("eps{}{}", if eps > 0.0 { "+" } else { "-" }, eps.abs())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    write_file(path, &text)
}

/// Runs a target, writing its CSVs and `<target>.json` into `out`.
pub fn cmd_repro(target: Target, out: &Path, tol_rel: f64, gnuplot: bool) -> CliResult<ReproReport> {
    if !(tol_rel.is_finite() && tol_rel > 0.0) {
        return Err(CliError::Usage(format!("--tol-rel must be positive, got {tol_rel}")));
    }
    let (checks, curves) = match target {
        Target::Table1 => (table1(out, tol_rel)?, Vec::new()),
        Target::Table2 => (table2(out, tol_rel)?, Vec::new()),
        Target::Fig2 => fig2(out)?,
        Target::Fig4 => fig4(out)?,
        Target::Fig5 => fig5(out)?,
    };
    if gnuplot && !curves.is_empty() {
        let files: Vec<String> = curves.iter().map(|c| c.file.clone()).collect();
        write_file(&out.join(format!("{target}.gp")), &gnuplot_script(&target.to_string(), &files))?;
    }
    let report = ReproReport {
        tool: TOOL,
        version: VERSION,
        target: target.to_string(),
        tol_rel,
        pass: checks.iter().all(|c| c.pass),
        checks,
        curves,
    };
    write_file(&out.join(format!("{target}.json")), &to_json(&report))?;
    Ok(report)
}

fn table1(out: &Path, tol_rel: f64) -> CliResult<Vec<Check>> {
    let mut formulas = Vec::new();
    for config in ProductConfig::ALL {
        for j in FIG2_COUPLINGS {
            for s in FIG2_SPINS {
                let f = AnalyticCneFormula::TableI { config, coupling: j, spin: s };
                if f.check_guards().is_ok() {
                    formulas.push((config, j, s, f));
                }
            }
        }
    }
    let fits = formulas
        .par_iter()
        .map(|(_, _, _, f)| {
            let fit = fit_short_time(&f.hamiltonian()?, &f.initial_state()?, FIT_WINDOW, Parity::Even)?;
            Ok((fit.c(2), f.expansion()?[0].1))
        })
        .collect::<espkit_core::Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for ((config, j, s, _), (got, want)) in formulas.iter().zip(fits) {
        let pass = rel_ok(got, want, tol_rel);
        rows.push(vec![
            config.name().to_string(),
            format_f64(j.jx),
            format_f64(j.jy),
            format_f64(j.jz),
            s.to_string(),
            format_f64(got),
            format_f64(want),
            format_f64(rel_error(got, want)),
            pass.to_string(),
        ]);
        checks.push(Check::new(
            format!("{} J={j} S={s}", config.name()),
            pass,
            format!("fitted c2 {got:.8} vs closed form {want:.8}"),
        ));
    }
    write_csv(
        &out.join("table1.csv"),
        &["config", "jx", "jy", "jz", "s_c", "fitted_c2", "analytic_c2", "rel_error", "pass"],
        &rows,
    )?;
    Ok(checks)
}

/// Switch-parameter value at the table's listed sign.
pub fn table_epsilon(id: WeightingId) -> f64 {
    match table_ii_sign(id) {
        TableSign::Minus => -ESP_MAGNITUDE,
        TableSign::Plus | TableSign::Either => ESP_MAGNITUDE,
    }
}

fn classify_grid() -> EvolutionSpec {
    EvolutionSpec::exact(DEFAULT_CLASSIFY_WINDOW, 1500, true)
}

fn label_of(report: &DetectionReport) -> Option<String> {
    report.classification.as_ref().and_then(|c| c.label.clone())
}

fn table2(out: &Path, tol_rel: f64) -> CliResult<Vec<Check>> {
    let s = SpinMagnitude::HALF;
    let h = spin_star_hamiltonian(RECIPE_COUPLING, s);
    let ids: Vec<WeightingId> = WeightingId::all().collect();
    let results = ids
        .par_iter()
        .map(|&id| -> CliResult<_> {
            let eps = table_epsilon(id);
            let f = AnalyticCneFormula::TableII { id, epsilon: eps, coupling: RECIPE_COUPLING };
            let init = InitialState::Density(mixed_initial(&esp_weighting(id, eps)?, s));
            let fit = fit_short_time(&h, &init, FIT_WINDOW, Parity::Even)?;
            let traj = sample_trajectory(&h, &init, &classify_grid(), id.to_string())?;
            let det = analyse_trajectory(&traj, DEFAULT_THRESHOLD, None, DEFAULT_CLASSIFY_WINDOW, Some(eps))?;
            Ok((id, eps, f.expansion()?, fit, label_of(&det)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (id, eps, terms, fit, label) in results {
        let c0_want = terms[0].1;
        let (power, want) = *terms.iter().find(|t| t.0 > 0).expect("every row has a dt term");
        let got = fit.c(power as usize);
        let expected_label = table_ii_label(id).to_string();
        let c0_ok = (fit.c(0) - c0_want).abs() <= TOL_ABS;
        let coeff_ok = rel_ok(got, want, tol_rel);
        let label_ok = label.as_deref() == Some(expected_label.as_str());
        let pass = c0_ok && coeff_ok && label_ok;
        rows.push(vec![
            id.to_string(),
            format_f64(eps),
            format_f64(fit.c(0)),
            format_f64(c0_want),
            power.to_string(),
            format_f64(got),
            format_f64(want),
            format_f64(rel_error(got, want)),
            label.clone().unwrap_or_else(|| "unclassified".into()),
            expected_label.clone(),
            pass.to_string(),
        ]);
        checks.push(Check::new(
            format!("{id} eps={eps}"),
            pass,
            format!(
                "c0 {:.3e} vs {c0_want:.3e}; c{power} {got:.6} vs {want:.6}; label {} vs {expected_label}",
                fit.c(0),
                label.as_deref().unwrap_or("unclassified")
            ),
        ));
    }
    write_csv(
        &out.join("table2.csv"),
        &[
            "id", "epsilon", "fitted_c0", "analytic_c0", "leading_power", "fitted_leading",
            "analytic_leading", "rel_error", "label", "expected_label", "pass",
        ],
        &rows,
    )?;
    Ok(checks)
}

struct Curve {
    name: String,
    traj: Trajectory,
    esp_sign: Option<f64>,
}

fn write_curves(out: &Path, prefix: &str, curves: &[Curve]) -> CliResult<Vec<CurveSummary>> {
    let mut summaries = Vec::new();
    for c in curves {
        let file = format!("{prefix}_{}.csv", c.name);
        write_file(&out.join(&file), &trajectory_csv(&c.traj))?;
        let detection = analyse_trajectory(&c.traj, DEFAULT_THRESHOLD, None, DEFAULT_CLASSIFY_WINDOW, c.esp_sign)?;
        summaries.push(CurveSummary {
            name: c.name.clone(),
            file,
            detection,
        });
    }
    Ok(summaries)
}

fn fig2(out: &Path) -> CliResult<(Vec<Check>, Vec<CurveSummary>)> {
    let spec = EvolutionSpec::exact(10.0, 2000, false);
    let mut jobs = Vec::new();
    for config in ProductConfig::ALL {
        for j in FIG2_COUPLINGS {
            for s in FIG2_SPINS {
                jobs.push((config, j, s));
            }
        }
    }
    let curves = jobs
        .par_iter()
        .map(|&(config, j, s)| -> CliResult<Curve> {
            let rho = product_initial(&config.spec(s), s)?;
            let name = format!("{}_{}_s{}", config.name(), coupling_tag(j), s.to_string().replace('/', "o"));
            let traj = sample_trajectory(&spin_star_hamiltonian(j, s), &InitialState::Density(rho), &spec, name.clone())?;
            Ok(Curve { name, traj, esp_sign: None })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let summaries = write_curves(out, "fig2", &curves)?;
    let find = |config: ProductConfig, j: ExchangeCoupling, s: SpinMagnitude| {
        let name = format!("{}_{}_s{}", config.name(), coupling_tag(j), s.to_string().replace('/', "o"));
        curves.iter().position(|c| c.name == name).expect("curve computed")
    };
    let mut checks = Vec::new();
    for s in FIG2_SPINS {
        let a = &curves[find(ProductConfig::Uuu, FIG2_COUPLINGS[1], s)].traj;
        let b = &curves[find(ProductConfig::Udd, FIG2_COUPLINGS[0], s)].traj;
        let d = trajectory_distance(a, b)?;
        checks.push(Check::new(
            format!("Jy sign swap S={s}"),
            d <= 1e-8,
            format!("uuu under (1,-1,1) vs udd under (1,1,1): max |dN| = {d:.2e}"),
        ));
    }
    for j in [FIG2_COUPLINGS[2], FIG2_COUPLINGS[3]] {
        for config in [ProductConfig::Uuu, ProductConfig::Udd] {
            let i = find(config, j, SpinMagnitude::ONE);
            let found = summaries[i].detection.events.iter().any(|e| {
                e.kind == "TFD" && e.t_death.is_some_and(|t| t >= 3.0) && e.t_birth.is_some_and(|t| t <= 5.0)
            });
            checks.push(Check::new(
                format!("TFD in [3, 5] {} J={j} S=1", config.name()),
                found,
                format!("{} events", summaries[i].detection.events.len()),
            ));
        }
    }
    Ok((checks, summaries))
}

fn fig4(out: &Path) -> CliResult<(Vec<Check>, Vec<CurveSummary>)> {
    let s = SpinMagnitude::HALF;
    let h = spin_star_hamiltonian(RECIPE_COUPLING, s);
    let jobs: Vec<(WeightingId, f64)> = WeightingId::all()
        .flat_map(|id| [(id, ESP_MAGNITUDE), (id, -ESP_MAGNITUDE)])
        .collect();
    let curves = jobs
        .par_iter()
        .map(|&(id, eps)| -> CliResult<Curve> {
            let init = InitialState::Density(mixed_initial(&esp_weighting(id, eps)?, s));
            let name = format!("{id}_{}", eps_tag(eps));
            let traj = sample_trajectory(&h, &init, &classify_grid(), name.clone())?;
            Ok(Curve { name, traj, esp_sign: Some(eps) })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let summaries = write_curves(out, "fig4", &curves)?;
    let mut checks = Vec::new();
    for ((id, eps), summary) in jobs.iter().zip(&summaries) {
        let listed = match table_ii_sign(*id) {
            TableSign::Either => true,
            TableSign::Plus => *eps > 0.0,
            TableSign::Minus => *eps < 0.0,
        };
        if !listed {
            continue;
        }
        let label = label_of(&summary.detection);
        let want = table_ii_label(*id).to_string();
        checks.push(Check::new(
            format!("{id} eps={eps} label"),
            label.as_deref() == Some(want.as_str()),
            format!("{} vs {want}", label.as_deref().unwrap_or("unclassified")),
        ));
    }
    Ok((checks, summaries))
}

fn fig5(out: &Path) -> CliResult<(Vec<Check>, Vec<CurveSummary>)> {
    let jobs: Vec<(WeightingId, f64)> = WeightingId::all()
        .flat_map(|id| [(id, ESP_MAGNITUDE), (id, -ESP_MAGNITUDE)])
        .collect();
    let curves = jobs
        .par_iter()
        .map(|&(id, eps)| -> CliResult<Curve> {
            let s = id.matching_spin();
            let ket = pure_initial(&esp_weighting(id, eps)?, s)?;
            let name = format!("{id}_{}", eps_tag(eps));
            let traj = sample_trajectory(
                &spin_star_hamiltonian(RECIPE_COUPLING, s),
                &InitialState::Pure(ket),
                &classify_grid(),
                name.clone(),
            )?;
            Ok(Curve { name, traj, esp_sign: Some(eps) })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let summaries = write_curves(out, "fig5", &curves)?;
    let mut checks = Vec::new();
    for ((&(id, eps), curve), summary) in jobs.iter().zip(&curves).zip(&summaries) {
        let n = id.index();
        if n <= 6 {
            let min = curve.traj.window(-0.3, 0.3).negativity().into_iter().fold(f64::MAX, f64::min);
            checks.push(Check::new(
                format!("{id} eps={eps} stays entangled near t = 0"),
                min > DEFAULT_THRESHOLD,
                format!("min negativity on [-0.3, 0.3] = {min:.3e}"),
            ));
            continue;
        }
        let want = match (n, eps > 0.0) {
            (9 | 13, true) => TrajectoryLabel::P6,
            (9 | 13, false) => continue,
            (_, false) => TrajectoryLabel::P4,
            (_, true) => continue,
        };
        let label = label_of(&summary.detection);
        let has_tfd = summary.detection.events.iter().any(|e| e.kind == "TFD");
        checks.push(Check::new(
            format!("{id} eps={eps} label"),
            label.as_deref() == Some(want.to_string().as_str()) && has_tfd,
            format!("{} vs {want}, TFD present: {has_tfd}", label.as_deref().unwrap_or("unclassified")),
        ));
    }
    let w4 = curves
        .iter()
        .find(|c| c.name == format!("W4_{}", eps_tag(-ESP_MAGNITUDE)))
        .expect("W4 computed");
    let win = w4.traj.window(0.0, 0.3);
    let n = win.negativity();
    let minima: Vec<(f64, f64)> = (1..n.len().saturating_sub(1))
        .filter(|&i| n[i] < n[i - 1] && n[i] <= n[i + 1])
        .map(|i| (win.times[i], n[i]))
        .collect();
    let hit = minima.iter().find(|&&(t, v)| (t - 0.11).abs() <= 0.02 && v > DEFAULT_THRESHOLD);
    checks.push(Check::new(
        "W4 eps=-0.01 local minimum",
        hit.is_some(),
        match hit {
            Some((t, v)) => format!("minimum {v:.4e} at t = {t}"),
            None => format!("local minima on [0, 0.3]: {minima:?}"),
        },
    ));
    Ok((checks, summaries))
}
