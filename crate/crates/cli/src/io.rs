//! Trajectory CSV, JSON reports and plotting scripts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use espkit_core::analysis::TransitionEvent;
use espkit_core::dynamics::Trajectory;
use espkit_core::monotones::MonotoneSample;

use crate::error::{CliError, CliResult};

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "negativity", "concurrence", "cne", "negative_count"];

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER).expect("in-memory write");
    for (t, s) in traj.times.iter().zip(&traj.samples) {
        w.write_record([
            format_f64(*t),
            format_f64(s.negativity),
            format_f64(s.concurrence),
            format_f64(s.cne),
            s.negative_count.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Parses a trajectory CSV with the fixed header. `source` names the input in
/// error messages.
pub fn parse_trajectory_csv(data: &[u8], source: &str) -> CliResult<Trajectory> {
    let csv_error = |line: u64, message: String| CliError::Csv {
        path: source.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let header = reader
        .headers()
        .map_err(|e| csv_error(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(csv_error(
            1,
            format!("expected header {}", TRAJECTORY_HEADER.join(",")),
        ));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| -> CliResult<f64> {
            let field = &record[i];
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| csv_error(line, format!("column {}: not a number: {field:?}", TRAJECTORY_HEADER[i])))
        };
        let t = num(0)?;
        let negativity = num(1)?;
        let concurrence = num(2)?;
        let cne = num(3)?;
        let negative_count = record[4]
            .trim()
            .parse::<usize>()
            .map_err(|_| csv_error(line, format!("column negative_count: not a count: {:?}", &record[4])))?;
        if !t.is_finite() || !negativity.is_finite() || negativity < 0.0 {
            return Err(csv_error(line, "t must be finite and negativity a finite non-negative number".into()));
        }
        times.push(t);
        samples.push(MonotoneSample {
            cne,
            negativity,
            concurrence,
            negative_count,
            clipped_mass: 0.0,
        });
    }
    if times.is_empty() {
        return Err(csv_error(1, "no data rows".into()));
    }
    Trajectory::from_samples(times, samples, source)
        .map_err(|e| csv_error(0, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub kind: String,
    pub t_death: Option<f64>,
    pub t_birth: Option<f64>,
    pub duration: f64,
    pub trajectory_label: Option<String>,
}

impl From<&TransitionEvent> for EventRecord {
    fn from(e: &TransitionEvent) -> Self {
        Self {
            kind: e.kind.to_string(),
            t_death: e.t_death,
            t_birth: e.t_birth,
            duration: e.duration,
            trajectory_label: e.trajectory_label.map(|l| l.to_string()),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Plain gnuplot script plotting the negativity column of each CSV.
pub fn gnuplot_script(title: &str, csv_files: &[String]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set xlabel 't'\nset ylabel 'negativity'\n");
    s.push_str(&format!("set title '{title}'\n"));
    let curves: Vec<String> = csv_files
        .iter()
        .map(|f| format!("'{f}' using 1:2 with lines title '{}'", f.trim_end_matches(".csv")))
        .collect();
    s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    s
}
