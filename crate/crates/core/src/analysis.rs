//! Transition detection, trajectory classification near `t = 0`, short-time
//! polynomial fits of the characteristic negative eigenvalue, closed-form
//! comparators, and the symmetry suite.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::densemat::{hermitian_eig, ComplexMatrix, C64};
use crate::dynamics::{
    evolve_series, sample_trajectory, time_reversal, EvolutionSpec, InitialState, Propagator,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::hilbert::{partial_trace_c_matrix, DensityOperator, SpinMagnitude};
use crate::model::{spin_star_hamiltonian, ExchangeCoupling, ProductSpinSpec};
use crate::monotones::{cne_matrix, monotone_sample_matrix, ENTANGLEMENT_THRESHOLD};
use crate::states::{
    bell_ket, esp_weighting, mixed_initial, product_initial, BellFamily, BellKind, Sign,
    WeightingId,
};

pub const DEFAULT_THRESHOLD: f64 = ENTANGLEMENT_THRESHOLD;
/// Default minimum dwell, in units of the trajectory's sample spacing.
pub const DEFAULT_MIN_DURATION_SPACINGS: f64 = 5.0;
pub const DEFAULT_CLASSIFY_WINDOW: f64 = 1.5;
pub const MAX_FIT_CONDITION: f64 = 1e12;
pub const MIN_FIT_POINTS: usize = 12;
/// Deviations at or below this pass without an order estimate.
pub const DEVIATION_FLOOR: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Transition detection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// Sudden death: entangled before, zero to the end of the record.
    Esd,
    /// Sudden birth: zero from the start of the record, entangled after.
    Esb,
    /// Death followed by birth with a finite zero dwell.
    Tfd,
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionKind::Esd => "ESD",
            TransitionKind::Esb => "ESB",
            TransitionKind::Tfd => "TFD",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEvent {
    pub kind: TransitionKind,
    pub t_death: Option<f64>,
    pub t_birth: Option<f64>,
    /// Length of the zero-negativity dwell inside the record.
    pub duration: f64,
    pub trajectory_label: Option<TrajectoryLabel>,
}

impl TransitionEvent {
    /// Zero interval clipped to `[t_first, t_last]`.
    pub fn interval(&self, t_first: f64, t_last: f64) -> (f64, f64) {
        (
            self.t_death.unwrap_or(t_first),
            self.t_birth.unwrap_or(t_last),
        )
    }
}

/// Index ranges of samples at or below `threshold`.
fn zero_runs(values: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (v <= threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len() - 1));
    }
    runs
}

fn crossing(t0: f64, v0: f64, t1: f64, v1: f64, threshold: f64) -> f64 {
    if v0 == v1 {
        return 0.5 * (t0 + t1);
    }
    t0 + (v0 - threshold) / (v0 - v1) * (t1 - t0)
}

/// Zero runs with refined endpoints: `(death, birth)` where `None` marks a
/// run touching the start or end of the record.
fn refined_runs(times: &[f64], values: &[f64], threshold: f64) -> Vec<(Option<f64>, Option<f64>)> {
    let n = values.len();
    zero_runs(values, threshold)
        .into_iter()
        .map(|(i, j)| {
            let death = (i > 0).then(|| crossing(times[i - 1], values[i - 1], times[i], values[i], threshold));
            let birth = (j + 1 < n).then(|| crossing(times[j], values[j], times[j + 1], values[j + 1], threshold));
            (death, birth)
        })
        .collect()
}

/// Minimum dwell used when none is supplied.
pub fn default_min_duration(traj: &Trajectory) -> f64 {
    DEFAULT_MIN_DURATION_SPACINGS * traj.max_spacing()
}

/// Finds sudden deaths, sudden births and finite-duration transitions in the
/// negativity column. Zero dwells shorter than `min_duration` are ignored; a
/// record that is zero throughout has no events.
pub fn detect_transitions(
    traj: &Trajectory,
    threshold: f64,
    min_duration: f64,
) -> Result<Vec<TransitionEvent>> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be non-negative, got {threshold}"
        )));
    }
    if !(min_duration.is_finite() && min_duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "min_duration must be positive, got {min_duration}"
        )));
    }
    if traj.len() < 2 {
        return Ok(Vec::new());
    }
    let spacing = traj.max_spacing();
    if spacing > min_duration / 3.0 {
        return Err(Error::Resolution(format!(
            "sample spacing {spacing} exceeds a third of the minimum duration {min_duration}"
        )));
    }
    let values = traj.negativity();
    let (t_first, t_last) = (traj.times[0], traj.times[traj.len() - 1]);
    let mut events = Vec::new();
    for (death, birth) in refined_runs(&traj.times, &values, threshold) {
        let kind = match (death, birth) {
            (Some(_), Some(_)) => TransitionKind::Tfd,
            (Some(_), None) => TransitionKind::Esd,
            (None, Some(_)) => TransitionKind::Esb,
            (None, None) => continue,
        };
        let duration = birth.unwrap_or(t_last) - death.unwrap_or(t_first);
        if duration < min_duration {
            continue;
        }
        events.push(TransitionEvent {
            kind,
            t_death: death,
            t_birth: birth,
            duration,
            trajectory_label: None,
        });
    }
    Ok(events)
}

// ---------------------------------------------------------------------------
// Classification near t = 0
// ---------------------------------------------------------------------------

/// Trajectory shapes near the entanglement boundary at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrajectoryLabel {
    /// On the boundary, entangled on one side only.
    P0,
    /// Touches the boundary from the separable side.
    P1,
    /// Touches the boundary from the entangled side.
    P2,
    /// Entangled and stays entangled on both sides.
    P3,
    /// Separable, with entanglement born on both sides.
    P4,
    /// Separable and stays separable on both sides.
    P5,
    /// Entangled, with entanglement dying on both sides.
    P6,
}

impl fmt::Display for TrajectoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            TrajectoryLabel::P0 => 0,
            TrajectoryLabel::P1 => 1,
            TrajectoryLabel::P2 => 2,
            TrajectoryLabel::P3 => 3,
            TrajectoryLabel::P4 => 4,
            TrajectoryLabel::P5 => 5,
            TrajectoryLabel::P6 => 6,
        };
        write!(f, "p{n}")
    }
}

impl FromStr for TrajectoryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "p0" => TrajectoryLabel::P0,
            "p1" => TrajectoryLabel::P1,
            "p2" => TrajectoryLabel::P2,
            "p3" => TrajectoryLabel::P3,
            "p4" => TrajectoryLabel::P4,
            "p5" => TrajectoryLabel::P5,
            "p6" => TrajectoryLabel::P6,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "trajectory label must be p0..p6, got {s:?}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Half-width of the inspected interval around `t = 0`.
    pub window: f64,
    pub threshold: f64,
    /// Defaults to five sample spacings.
    pub min_duration: Option<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_CLASSIFY_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            min_duration: None,
        }
    }
}

/// What the negativity does on one side of `t = 0` inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideBehaviour {
    StaysEntangled,
    Dies,
    Born,
    StaysSeparable,
    EntangledNeighbour,
    SeparableNeighbour,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: Option<TrajectoryLabel>,
    pub cne_at_zero: f64,
    pub left: SideBehaviour,
    pub right: SideBehaviour,
    pub diagnostics: String,
}

/// Labels the trajectory shape around `t = 0` from the sign of the CNE there
/// and from whether a qualifying zero dwell (or the end of one) occurs on each
/// side within the window. `esp_sign`, when given, is checked against the
/// initial side of the boundary and reported in the diagnostics.
pub fn classify_trajectory(
    traj: &Trajectory,
    esp_sign: Option<f64>,
    opts: &ClassifyOptions,
) -> Result<Classification> {
    let i0 = traj.index_of(0.0).ok_or_else(|| {
        Error::Precondition("classification needs a sample at t = 0".into())
    })?;
    if i0 == 0 || i0 + 1 == traj.len() {
        return Err(Error::Precondition(
            "classification needs samples on both sides of t = 0".into(),
        ));
    }
    let w = traj.window(-opts.window, opts.window);
    let i0 = w.index_of(0.0).expect("window contains zero");
    let min_duration = opts.min_duration.unwrap_or_else(|| default_min_duration(traj));
    let thr = opts.threshold;
    let values = w.negativity();
    let c0 = w.samples[i0].cne;
    let n = values.len();

    let (left, right) = if c0.abs() <= thr {
        let side = |i: usize| {
            if values[i] > thr {
                SideBehaviour::EntangledNeighbour
            } else {
                SideBehaviour::SeparableNeighbour
            }
        };
        (side(i0 - 1), side(i0 + 1))
    } else if c0 < 0.0 {
        let mut left = SideBehaviour::StaysEntangled;
        let mut right = SideBehaviour::StaysEntangled;
        for (death, birth) in refined_runs(&w.times, &values, thr) {
            let (a, b) = (death.unwrap_or(w.times[0]), birth.unwrap_or(w.times[n - 1]));
            if b - a < min_duration {
                continue;
            }
            if b < 0.0 {
                left = SideBehaviour::Dies;
            }
            if a > 0.0 {
                right = SideBehaviour::Dies;
            }
        }
        (left, right)
    } else {
        let runs = zero_runs(&values, thr);
        let (i, j) = runs
            .into_iter()
            .find(|&(i, j)| i <= i0 && i0 <= j)
            .unwrap_or((i0, i0));
        let left = if i > 0 { SideBehaviour::Born } else { SideBehaviour::StaysSeparable };
        let right = if j + 1 < n { SideBehaviour::Born } else { SideBehaviour::StaysSeparable };
        (left, right)
    };

    use SideBehaviour::*;
    let label = match (left, right) {
        (EntangledNeighbour, EntangledNeighbour) => Some(TrajectoryLabel::P2),
        (SeparableNeighbour, SeparableNeighbour) => Some(TrajectoryLabel::P1),
        (EntangledNeighbour, SeparableNeighbour) | (SeparableNeighbour, EntangledNeighbour) => {
            Some(TrajectoryLabel::P0)
        }
        (StaysEntangled, StaysEntangled) => Some(TrajectoryLabel::P3),
        (Dies, Dies) => Some(TrajectoryLabel::P6),
        (Born, Born) => Some(TrajectoryLabel::P4),
        (StaysSeparable, StaysSeparable) => Some(TrajectoryLabel::P5),
        _ => None,
    };

    let mut diagnostics = format!("cne(0) = {c0:e}; left: {left:?}; right: {right:?}");
    if let Some(sign) = esp_sign {
        let entangled = c0 < -thr;
        let consistent = (sign > 0.0) == entangled;
        diagnostics.push_str(&format!(
            "; switch parameter sign {} {} the initial side",
            if sign > 0.0 { "+" } else { "-" },
            if consistent { "matches" } else { "does not match" }
        ));
    }
    if label.is_none() {
        diagnostics.push_str("; asymmetric pattern, unclassified");
    }
    Ok(Classification {
        label,
        cne_at_zero: c0,
        left,
        right,
        diagnostics,
    })
}

/// Copies the classification label onto the events inside its window.
pub fn attach_label(events: &mut [TransitionEvent], label: Option<TrajectoryLabel>, window: f64) {
    for e in events.iter_mut() {
        let (a, b) = e.interval(f64::NEG_INFINITY, f64::INFINITY);
        if a <= window && b >= -window {
            e.trajectory_label = label;
        }
    }
}

// ---------------------------------------------------------------------------
// Short-time fits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Powers 0, 2, 4.
    Even,
    /// Powers 0 through 4.
    Full,
}

impl Parity {
    pub fn powers(self) -> &'static [u32] {
        match self {
            Parity::Even => &[0, 2, 4],
            Parity::Full => &[0, 1, 2, 3, 4],
        }
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "full" => Ok(Parity::Full),
            _ => Err(Error::InvalidParameter(format!(
                "parity must be \"even\" or \"full\", got {s:?}"
            ))),
        }
    }
}

/// Least-squares polynomial `lambda*(dt) ~ sum_k c_k dt^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortTimeFit {
    /// `coefficients[k]` multiplies `dt^k`; unfitted powers are zero.
    pub coefficients: [f64; 5],
    /// Largest absolute residual over the fitted points.
    pub residual: f64,
    pub condition: f64,
    pub dt_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl ShortTimeFit {
    pub fn c(&self, k: usize) -> f64 {
        self.coefficients[k]
    }
}

/// Solves `min ||A x - y||` by Householder QR. `a` is row-major `m x n`.
fn householder_least_squares(mut a: Vec<f64>, m: usize, n: usize, mut y: Vec<f64>) -> Vec<f64> {
    for k in 0..n {
        let norm = (k..m).map(|i| a[i * n + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k * n + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[i * n + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * a[i * n + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                a[i * n + j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * y[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..m {
            y[i] -= f * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (y[k] - s) / a[k * n + k];
    }
    x
}

/// 2-norm condition number of a real row-major matrix via its Gram spectrum.
fn condition_number(a: &[f64], m: usize, n: usize) -> Result<f64> {
    let gram = ComplexMatrix::from_fn(n, n, |r, c| {
        C64::new((0..m).map(|i| a[i * n + r] * a[i * n + c]).sum(), 0.0)
    });
    let ev = hermitian_eig(&gram)?.eigenvalues;
    let (lo, hi) = (ev[0], ev[n - 1]);
    if lo <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((hi / lo).sqrt())
}

/// Fits `values(dts)` with the given powers, scaling `dt` by its largest magnitude.
pub fn fit_polynomial(dts: &[f64], values: &[f64], powers: &[u32]) -> Result<ShortTimeFit> {
    if dts.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} abscissae but {} values",
            dts.len(),
            values.len()
        )));
    }
    if dts.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "short-time fits need at least {MIN_FIT_POINTS} points, got {}",
            dts.len()
        )));
    }
    if powers.iter().any(|&p| p > 4) {
        return Err(Error::InvalidParameter("fit powers are limited to 0..=4".into()));
    }
    let scale = dts.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::InvalidParameter("fit window must contain non-zero finite dt".into()));
    }
    let (m, n) = (dts.len(), powers.len());
    let mut a = Vec::with_capacity(m * n);
    for &dt in dts {
        let x = dt / scale;
        a.extend(powers.iter().map(|&p| x.powi(p as i32)));
    }
    let condition = condition_number(&a, m, n)?;
    if condition > MAX_FIT_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let x = householder_least_squares(a.clone(), m, n, values.to_vec());
    let residual = (0..m)
        .map(|i| {
            let fit: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            (fit - values[i]).abs()
        })
        .fold(0.0, f64::max);
    let mut coefficients = [0.0; 5];
    for (&p, &xk) in powers.iter().zip(&x) {
        coefficients[p as usize] = xk / scale.powi(p as i32);
    }
    Ok(ShortTimeFit {
        coefficients,
        residual,
        condition,
        dt_grid: dts.to_vec(),
        values: values.to_vec(),
    })
}

/// Symmetric fit grid: `n_per_side` points evenly spread over `[lo, hi]` and
/// their mirrors.
pub fn fit_grid(lo: f64, hi: f64, n_per_side: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "fit window must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if n_per_side < 2 {
        return Err(Error::InvalidParameter("need at least two points per side".into()));
    }
    let pos: Vec<f64> = (0..n_per_side)
        .map(|k| lo + (hi - lo) * k as f64 / (n_per_side - 1) as f64)
        .collect();
    let mut grid: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    grid.extend(pos);
    Ok(grid)
}

/// `lambda*(dt)` by exact evolution at each grid point.
pub fn cne_series(h: &ComplexMatrix, initial: &InitialState, dts: &[f64]) -> Result<Vec<f64>> {
    let propagator = Propagator::new(h)?;
    let rho0 = initial.density();
    let dim_c = match rho0.space() {
        crate::hilbert::Space::Full(d) => d.dim_c(),
        crate::hilbert::Space::Qubits => {
            return Err(Error::Dimension("fits need a state on C (x) A (x) B".into()))
        }
    };
    dts.par_iter()
        .map(|&dt| {
            let full = propagator.evolve_matrix(rho0.matrix(), dt)?;
            Ok(cne_matrix(&partial_trace_c_matrix(&full, dim_c)?)?.0)
        })
        .collect()
}

/// Points per side used by [`fit_short_time`].
pub const DEFAULT_FIT_POINTS_PER_SIDE: usize = 16;

/// Fits `lambda*(dt)` from exact evolution on `+-[lo, hi]`.
pub fn fit_short_time(
    h: &ComplexMatrix,
    initial: &InitialState,
    window: (f64, f64),
    parity: Parity,
) -> Result<ShortTimeFit> {
    let dts = fit_grid(window.0, window.1, DEFAULT_FIT_POINTS_PER_SIDE)?;
    let values = cne_series(h, initial, &dts)?;
    fit_polynomial(&dts, &values, parity.powers())
}

// ---------------------------------------------------------------------------
// Closed-form comparators
// ---------------------------------------------------------------------------

/// Product configurations `|m=S, sigma_A, sigma_B>` of the early-development table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProductConfig {
    Uuu,
    Uud,
    Udd,
}

impl ProductConfig {
    pub const ALL: [ProductConfig; 3] = [ProductConfig::Uuu, ProductConfig::Uud, ProductConfig::Udd];

    pub fn name(self) -> &'static str {
        match self {
            ProductConfig::Uuu => "uuu",
            ProductConfig::Uud => "uud",
            ProductConfig::Udd => "udd",
        }
    }

    pub fn spec(self, s: SpinMagnitude) -> ProductSpinSpec {
        match self {
            ProductConfig::Uuu => ProductSpinSpec::z_basis(true, true, s),
            ProductConfig::Uud => ProductSpinSpec::z_basis(true, false, s),
            ProductConfig::Udd => ProductSpinSpec::z_basis(false, false, s),
        }
    }
}

impl FromStr for ProductConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uuu" => Ok(ProductConfig::Uuu),
            "uud" => Ok(ProductConfig::Uud),
            "udd" => Ok(ProductConfig::Udd),
            _ => Err(Error::InvalidParameter(format!(
                "product configuration must be uuu, uud or udd, got {s:?}"
            ))),
        }
    }
}

/// Sign of `epsilon` the mixed-state table lists for each weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableSign {
    Plus,
    Minus,
    Either,
}

pub fn table_ii_sign(id: WeightingId) -> TableSign {
    match id.index() {
        6 => TableSign::Either,
        10 | 14 => TableSign::Minus,
        _ => TableSign::Plus,
    }
}

pub fn table_ii_label(id: WeightingId) -> TrajectoryLabel {
    match id.index() {
        6 => TrajectoryLabel::P3,
        10 | 14 => TrajectoryLabel::P4,
        _ => TrajectoryLabel::P6,
    }
}

/// Coupling used throughout the mixed- and pure-state experiments.
pub const RECIPE_COUPLING: ExchangeCoupling = ExchangeCoupling::new(-0.5, -0.5, -1.0);

/// A closed-form short-time expression for `lambda*(dt)` together with the
/// configuration it describes.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticCneFormula {
    TableI {
        config: ProductConfig,
        coupling: ExchangeCoupling,
        spin: SpinMagnitude,
    },
    TableII {
        id: WeightingId,
        epsilon: f64,
        coupling: ExchangeCoupling,
    },
    /// Diagonal environment, qubits along `(theta_a, 0)` and `(theta_b, 0)`.
    Eq21 {
        env_weights: Vec<f64>,
        theta_a: f64,
        theta_b: f64,
        coupling: ExchangeCoupling,
    },
    Eq29Alpha {
        p: f64,
        sign: Sign,
        spin: SpinMagnitude,
        coupling: ExchangeCoupling,
    },
    Eq30Beta {
        p: f64,
        sign: Sign,
        spin: SpinMagnitude,
        coupling: ExchangeCoupling,
    },
}

fn same_sign(a: f64, b: f64) -> bool {
    a == 0.0 || b == 0.0 || a.signum() == b.signum()
}

impl AnalyticCneFormula {
    pub fn id(&self) -> String {
        match self {
            AnalyticCneFormula::TableI { config, .. } => format!("TableI_{}", config.name()),
            AnalyticCneFormula::TableII { id, .. } => format!("TableII_{id}"),
            AnalyticCneFormula::Eq21 { .. } => "Eq21".into(),
            AnalyticCneFormula::Eq29Alpha { .. } => "Eq29_alpha".into(),
            AnalyticCneFormula::Eq30Beta { .. } => "Eq30_beta".into(),
        }
    }

    pub fn spin(&self) -> Result<SpinMagnitude> {
        match self {
            AnalyticCneFormula::TableI { spin, .. }
            | AnalyticCneFormula::Eq29Alpha { spin, .. }
            | AnalyticCneFormula::Eq30Beta { spin, .. } => Ok(*spin),
            AnalyticCneFormula::TableII { .. } => Ok(SpinMagnitude::HALF),
            AnalyticCneFormula::Eq21 { env_weights, .. } => {
                if env_weights.is_empty() {
                    return Err(Error::InvalidParameter("empty environment populations".into()));
                }
                Ok(SpinMagnitude::from_twice(env_weights.len() as u32 - 1))
            }
        }
    }

    pub fn coupling(&self) -> ExchangeCoupling {
        match self {
            AnalyticCneFormula::TableI { coupling, .. }
            | AnalyticCneFormula::TableII { coupling, .. }
            | AnalyticCneFormula::Eq21 { coupling, .. }
            | AnalyticCneFormula::Eq29Alpha { coupling, .. }
            | AnalyticCneFormula::Eq30Beta { coupling, .. } => *coupling,
        }
    }

    /// Checks the sign conditions and parameter ranges the expression is stated under.
    pub fn check_guards(&self) -> Result<()> {
        match self {
            AnalyticCneFormula::TableI { config, coupling, .. } => {
                let (jx, jy) = (coupling.jx, coupling.jy);
                match config {
                    ProductConfig::Uuu if !same_sign(jx, jy) => Err(Error::Precondition(
                        "TableI_uuu requires sign(Jx) = sign(Jy)".into(),
                    )),
                    ProductConfig::Udd if same_sign(jx, jy) && jx != 0.0 && jy != 0.0 => {
                        Err(Error::Precondition("TableI_udd requires sign(Jx) = -sign(Jy)".into()))
                    }
                    _ => Ok(()),
                }
            }
            AnalyticCneFormula::TableII { id, epsilon, .. } => {
                esp_weighting(*id, *epsilon)?;
                let ok = match table_ii_sign(*id) {
                    TableSign::Plus => *epsilon > 0.0,
                    TableSign::Minus => *epsilon < 0.0,
                    TableSign::Either => *epsilon != 0.0,
                };
                if ok {
                    Ok(())
                } else {
                    let need = match table_ii_sign(*id) {
                        TableSign::Plus => "sign(epsilon) = +",
                        TableSign::Minus => "sign(epsilon) = -",
                        TableSign::Either => "epsilon != 0",
                    };
                    Err(Error::Precondition(format!("TableII_{id} requires {need}")))
                }
            }
            AnalyticCneFormula::Eq21 { env_weights, .. } => {
                let spec = ProductSpinSpec {
                    theta_a: 0.0,
                    phi_a: 0.0,
                    theta_b: 0.0,
                    phi_b: 0.0,
                    env: crate::model::EnvState::Diagonal(env_weights.clone()),
                };
                spec.env_populations(self.spin()?).map(|_| ())
            }
            AnalyticCneFormula::Eq29Alpha { p, .. } | AnalyticCneFormula::Eq30Beta { p, .. } => {
                if (0.0..1.0).contains(p) {
                    Ok(())
                } else {
                    Err(Error::Precondition(format!("Bell parameter p must lie in [0, 1), got {p}")))
                }
            }
        }
    }

    /// Terms `(power, coefficient)` of the closed form.
    pub fn expansion(&self) -> Result<Vec<(u32, f64)>> {
        self.check_guards()?;
        Ok(match self {
            AnalyticCneFormula::TableI { config, coupling, spin } => {
                let (jx, jy) = (coupling.jx, coupling.jy);
                let s = spin.value();
                let c = match config {
                    ProductConfig::Uuu => {
                        if jx.abs() > jy.abs() {
                            jy * (jy - jx)
                        } else {
                            jx * (jx - jy)
                        }
                    }
                    ProductConfig::Uud => {
                        let q = jx * jx + jy * jy;
                        q - (q * q + 4.0 * jx * jx * jy * jy).sqrt()
                    }
                    ProductConfig::Udd => {
                        if jx.abs() > jy.abs() {
                            jy * (jx + jy)
                        } else {
                            jx * (jx + jy)
                        }
                    }
                };
                vec![(2, s * c)]
            }
            AnalyticCneFormula::TableII { id, epsilon, coupling } => {
                table_ii_expansion(*id, *epsilon, *coupling)
            }
            AnalyticCneFormula::Eq21 {
                env_weights,
                theta_a,
                theta_b,
                coupling,
            } => {
                let s = self.spin()?;
                let mag: f64 = s.m_values().iter().zip(env_weights).map(|(m, r)| m * r).sum();
                let geom = -2.0 + (2.0 * theta_a).cos() + (2.0 * theta_b).cos();
                vec![(2, coupling.jz * coupling.jz / 2.0 * mag * mag * geom)]
            }
            AnalyticCneFormula::Eq29Alpha { p, spin, coupling, .. } => {
                let c0 = -(1.0 - p * p).sqrt() / 2.0;
                let sj = spin.value() * coupling.jz;
                vec![(0, c0), (2, c0 * 8.0 * sj * sj)]
            }
            AnalyticCneFormula::Eq30Beta { p, .. } => vec![(0, -(1.0 - p * p).sqrt() / 2.0)],
        })
    }

    pub fn evaluate(&self, dt: f64) -> Result<f64> {
        Ok(self
            .expansion()?
            .iter()
            .map(|&(k, c)| c * dt.powi(k as i32))
            .sum())
    }

    /// Lowest power not captured by the expression.
    pub fn residual_order(&self) -> u32 {
        match self {
            AnalyticCneFormula::TableI { .. } => 3,
            AnalyticCneFormula::TableII { .. } => self
                .expansion()
                .map(|t| t.iter().map(|x| x.0).max().unwrap_or(0) + 1)
                .unwrap_or(3),
            AnalyticCneFormula::Eq21 { .. } | AnalyticCneFormula::Eq29Alpha { .. } => 3,
            AnalyticCneFormula::Eq30Beta { .. } => 2,
        }
    }

    /// Series truncation the expression was derived from.
    pub fn truncation_order(&self) -> u8 {
        match self {
            AnalyticCneFormula::TableI { .. } | AnalyticCneFormula::TableII { .. } => 3,
            _ => 2,
        }
    }

    pub fn hamiltonian(&self) -> Result<ComplexMatrix> {
        Ok(spin_star_hamiltonian(self.coupling(), self.spin()?))
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        self.check_guards()?;
        let s = self.spin()?;
        Ok(match self {
            AnalyticCneFormula::TableI { config, .. } => {
                InitialState::Density(product_initial(&config.spec(s), s)?)
            }
            AnalyticCneFormula::TableII { id, epsilon, .. } => {
                InitialState::Density(mixed_initial(&esp_weighting(*id, *epsilon)?, s))
            }
            AnalyticCneFormula::Eq21 {
                env_weights,
                theta_a,
                theta_b,
                ..
            } => {
                let spec = ProductSpinSpec {
                    theta_a: *theta_a,
                    phi_a: 0.0,
                    theta_b: *theta_b,
                    phi_b: 0.0,
                    env: crate::model::EnvState::Diagonal(env_weights.clone()),
                };
                InitialState::Density(product_initial(&spec, s)?)
            }
            AnalyticCneFormula::Eq29Alpha { p, sign, .. } => {
                InitialState::Pure(top_level_with_bell(BellKind::new(BellFamily::Alpha, *sign, *p), s)?)
            }
            AnalyticCneFormula::Eq30Beta { p, sign, .. } => {
                InitialState::Pure(top_level_with_bell(BellKind::new(BellFamily::Beta, *sign, *p), s)?)
            }
        })
    }
}

fn top_level_with_bell(kind: BellKind, s: SpinMagnitude) -> Result<crate::hilbert::Ket> {
    let bell = bell_ket(kind)?;
    let mut amp = vec![C64::new(0.0, 0.0); 4 * s.dim()];
    amp[..4].copy_from_slice(bell.amplitudes());
    crate::hilbert::Ket::new(
        crate::hilbert::Space::Full(crate::hilbert::SystemDims::new(s)),
        amp,
    )
}

fn table_ii_expansion(id: WeightingId, e: f64, j: ExchangeCoupling) -> Vec<(u32, f64)> {
    let x = j.jx * j.jx;
    let y = j.jy * j.jy;
    let c0 = -e / 2.0;
    match id.index() {
        1 | 3 => vec![(0, c0), (2, x * (1.0 + e) / 2.0)],
        2 => vec![(0, c0), (2, x * e)],
        4 => vec![(0, c0), (2, y * e)],
        5 => vec![(0, c0), (2, y * (1.0 + e) / 2.0)],
        6 if e > 0.0 => vec![
            (0, c0),
            (2, (1.0 + e) * (x + y) / 2.0),
            (4, -x * y * (1.0 + e) * (3.0 + 7.0 * e) / (12.0 * e)),
        ],
        6 => vec![(0, e / 2.0), (4, x * y * (1.0 + e).powi(2) / (4.0 * e))],
        7 => vec![(0, c0), (2, x * (1.0 + 3.0 * e) / 4.0)],
        8 => vec![(0, c0), (2, y * (1.0 + 3.0 * e) / 4.0)],
        9 => vec![(0, c0), (2, x * (1.0 + 3.0 * e) / 4.0 + y * (1.0 + e) / 2.0)],
        10 => vec![(0, c0), (4, -x * y * (e - 1.0).powi(2) / (8.0 * (1.0 + e)))],
        11 => vec![(0, c0), (2, x * (1.0 + 2.0 * e) / 3.0)],
        12 => vec![(0, c0), (2, y * (1.0 + 2.0 * e) / 3.0)],
        13 => vec![(0, c0), (2, (x + y) * (1.0 + 2.0 * e) / 3.0)],
        14 => vec![(0, c0), (4, -x * y * (e - 1.0).powi(2) / (3.0 + 6.0 * e))],
        _ => unreachable!("weighting ids are 1..=14"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    FullNumerics,
    TruncatedSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub dt: f64,
    pub numeric: f64,
    pub analytic: f64,
    pub deviation: f64,
    pub tolerance: f64,
    /// Observed convergence order from the Richardson triple, when resolvable.
    pub observed_order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub formula_id: String,
    pub mode: ValidationMode,
    pub rows: Vec<ValidationRow>,
    pub max_abs_deviation: f64,
    pub pass: bool,
}

/// Numerically computed `lambda*(dt)` for the formula's configuration.
pub fn numeric_cne(f: &AnalyticCneFormula, mode: ValidationMode, dt: f64) -> Result<f64> {
    let h = f.hamiltonian()?;
    let initial = f.initial_state()?;
    numeric_cne_with(&h, &initial, f.truncation_order(), mode, dt)
}

fn numeric_cne_with(
    h: &ComplexMatrix,
    initial: &InitialState,
    order: u8,
    mode: ValidationMode,
    dt: f64,
) -> Result<f64> {
    let rho0 = initial.density();
    let dim_c = h.rows() / 4;
    let full = match mode {
        ValidationMode::FullNumerics => Propagator::new(h)?.evolve_matrix(rho0.matrix(), dt)?,
        ValidationMode::TruncatedSeries => evolve_series(h, rho0.matrix(), dt, order)?,
    };
    Ok(cne_matrix(&partial_trace_c_matrix(&full, dim_c)?)?.0)
}

/// Compares the closed form against numerics at each `dt`.
///
/// With `abs_tol` the row passes iff the deviation is at most `abs_tol`.
/// Otherwise the tolerance is `max(1e-10, 2 K dt^q)` with `q` the residual
/// order and `K` fitted from the deviation at `dt/4`; rows above the floor
/// must also show an observed order of at least `q - 1/2` between `dt`,
/// `dt/2` and `dt/4`.
pub fn validate_formula(
    f: &AnalyticCneFormula,
    mode: ValidationMode,
    dts: &[f64],
    abs_tol: Option<f64>,
) -> Result<ValidationReport> {
    f.check_guards()?;
    let h = f.hamiltonian()?;
    let initial = f.initial_state()?;
    let order = f.truncation_order();
    let q = f.residual_order() as f64;
    let deviation = |dt: f64| -> Result<(f64, f64, f64)> {
        let numeric = numeric_cne_with(&h, &initial, order, mode, dt)?;
        let analytic = f.evaluate(dt)?;
        Ok((numeric, analytic, (numeric - analytic).abs()))
    };
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let (numeric, analytic, d0) = deviation(dt)?;
        let (tolerance, observed_order, pass) = match abs_tol {
            Some(tol) => (tol, None, d0 <= tol),
            None => {
                let (_, _, d1) = deviation(dt / 2.0)?;
                let (_, _, d2) = deviation(dt / 4.0)?;
                let k = d2 / (dt.abs() / 4.0).powf(q);
                let tol = DEVIATION_FLOOR.max(2.0 * k * dt.abs().powf(q));
                let resolvable = d1 > 1e-13 && d2 > 1e-13;
                let observed = resolvable.then(|| (d0 / d1).log2().min((d1 / d2).log2()));
                let pass = d0 <= DEVIATION_FLOOR
                    || (d0 <= tol && observed.is_some_and(|o| o >= q - 0.5));
                (tol, observed, pass)
            }
        };
        rows.push(ValidationRow {
            dt,
            numeric,
            analytic,
            deviation: d0,
            tolerance,
            observed_order,
            pass,
        });
    }
    let max_abs_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.pass);
    Ok(ValidationReport {
        formula_id: f.id(),
        mode,
        rows,
        max_abs_deviation,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Symmetry suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SymmetryConfig {
    pub coupling: ExchangeCoupling,
    pub spin: SpinMagnitude,
    pub initial: InitialState,
    /// Half-width and resolution of the sampled grid.
    pub t_max: f64,
    pub n_steps: usize,
    /// Evolution time for the time-reversal closure.
    pub reversal_time: f64,
    pub dt_probes: Vec<f64>,
}

impl SymmetryConfig {
    pub fn new(coupling: ExchangeCoupling, spin: SpinMagnitude, initial: InitialState) -> Self {
        Self {
            coupling,
            spin,
            initial,
            t_max: 3.0,
            n_steps: 600,
            reversal_time: 2.0,
            dt_probes: vec![1e-3, 1e-2],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    /// max ||U(J, -t) - U(-J, t)||_max over the grid.
    pub unitary_negation: f64,
    /// max |N_J(t) - N_{-J}(-t)| over the grid.
    pub negativity_negation: f64,
    /// |N(0) - N(reversed state evolved for the same time)|.
    pub time_reversal: f64,
    /// max |N(dt) - N(-dt)| over the probes.
    pub dt2_negativity: f64,
    /// max |lambda*(dt) - lambda*(-dt)| over the probes.
    pub dt2_cne: f64,
    /// Events of the `-J` run map onto those of the `J` run under `t -> -t`.
    pub events_correspond: bool,
}

/// Runs the coupling-negation, time-reversal and local time-even checks.
pub fn symmetry_suite(cfg: &SymmetryConfig) -> Result<SymmetryReport> {
    let h = spin_star_hamiltonian(cfg.coupling, cfg.spin);
    let h_neg = spin_star_hamiltonian(cfg.coupling.negated(), cfg.spin);
    let p = Propagator::new(&h)?;
    let p_neg = Propagator::new(&h_neg)?;
    let spec = EvolutionSpec::exact(cfg.t_max, cfg.n_steps, true);

    let unitary_negation = spec
        .times()
        .par_iter()
        .map(|&t| (&p.unitary(-t) - &p_neg.unitary(t)).max_abs())
        .reduce(|| 0.0, f64::max);

    let traj = sample_trajectory(&h, &cfg.initial, &spec, "J")?;
    let traj_neg = sample_trajectory(&h_neg, &cfg.initial, &spec, "-J")?;
    let n = traj.len();
    let negativity_negation = (0..n)
        .map(|i| (traj.samples[i].negativity - traj_neg.samples[n - 1 - i].negativity).abs())
        .fold(0.0, f64::max);

    let rho0 = cfg.initial.density();
    let dim_c = cfg.spin.dim();
    let reduced_negativity = |m: &ComplexMatrix| -> Result<f64> {
        Ok(monotone_sample_matrix(&partial_trace_c_matrix(m, dim_c)?)?.negativity)
    };
    let rho_t = p.evolve(&rho0, cfg.reversal_time)?;
    let reversed: DensityOperator = time_reversal(&rho_t)?;
    let rewound = p.evolve(&reversed, cfg.reversal_time)?;
    let time_reversal_dev =
        (reduced_negativity(rewound.matrix())? - reduced_negativity(rho0.matrix())?).abs();

    let mut dt2_negativity = 0.0_f64;
    let mut dt2_cne = 0.0_f64;
    for &dt in &cfg.dt_probes {
        let fwd = monotone_sample_matrix(&partial_trace_c_matrix(&p.evolve_matrix(rho0.matrix(), dt)?, dim_c)?)?;
        let bwd = monotone_sample_matrix(&partial_trace_c_matrix(&p.evolve_matrix(rho0.matrix(), -dt)?, dim_c)?)?;
        dt2_negativity = dt2_negativity.max((fwd.negativity - bwd.negativity).abs());
        dt2_cne = dt2_cne.max((fwd.cne - bwd.cne).abs());
    }

    let min_duration = default_min_duration(&traj);
    let ev = detect_transitions(&traj, DEFAULT_THRESHOLD, min_duration)?;
    let ev_neg = detect_transitions(&traj_neg, DEFAULT_THRESHOLD, min_duration)?;
    let tol = 2.0 * traj.max_spacing();
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    };
    let mut mirrored: Vec<(Option<f64>, Option<f64>)> = ev_neg
        .iter()
        .map(|e| (e.t_birth.map(|t| -t), e.t_death.map(|t| -t)))
        .collect();
    mirrored.reverse();
    let events_correspond = ev.len() == mirrored.len()
        && ev
            .iter()
            .zip(&mirrored)
            .all(|(e, m)| close(e.t_death, m.0) && close(e.t_birth, m.1));

    Ok(SymmetryReport {
        unitary_negation,
        negativity_negation,
        time_reversal: time_reversal_dev,
        dt2_negativity,
        dt2_cne,
        events_correspond,
    })
}

/// Largest negativity difference between two trajectories on the same grid.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times != b.times {
        return Err(Error::Dimension("trajectories are sampled on different grids".into()));
    }
    Ok(a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x.negativity - y.negativity).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotones::MonotoneSample;

    fn synthetic(times: Vec<f64>, neg: impl Fn(f64) -> f64) -> Trajectory {
        let samples = times
            .iter()
            .map(|&t| {
                let n = neg(t);
                MonotoneSample {
                    cne: -n,
                    negativity: n,
                    concurrence: 2.0 * n,
                    negative_count: (n > 0.0) as usize,
                    clipped_mass: 0.0,
                }
            })
            .collect();
        Trajectory::from_samples(times, samples, "synthetic").unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
    }

    #[test]
    fn constant_zero_has_no_events() {
        let traj = synthetic(grid(0.0, 1.0, 100), |_| 0.0);
        assert!(detect_transitions(&traj, 1e-9, 0.05).unwrap().is_empty());
    }

    #[test]
    fn constant_entangled_has_no_events() {
        let traj = synthetic(grid(0.0, 1.0, 100), |_| 0.5);
        assert!(detect_transitions(&traj, 1e-9, 0.05).unwrap().is_empty());
    }

    #[test]
    fn triangle_dip_gives_one_tfd() {
        // Zero on [0.3, 0.6], linear ramps outside.
        let neg = |t: f64| ((0.3 - t).max(0.0) + (t - 0.6).max(0.0)) * 0.1;
        let traj = synthetic(grid(0.0, 1.0, 1000), neg);
        let ev = detect_transitions(&traj, 1e-9, 0.01).unwrap();
        assert_eq!(ev.len(), 1);
        let e = ev[0];
        assert_eq!(e.kind, TransitionKind::Tfd);
        assert!((e.t_death.unwrap() - 0.3).abs() < 1e-3);
        assert!((e.t_birth.unwrap() - 0.6).abs() < 1e-3);
        assert!((e.duration - 0.3).abs() < 2e-3);
    }

    #[test]
    fn open_runs_are_sudden_death_and_birth() {
        let traj = synthetic(grid(0.0, 1.0, 1000), |t| (t - 0.4).max(0.0));
        let ev = detect_transitions(&traj, 1e-9, 0.01).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, TransitionKind::Esb);
        assert!(ev[0].t_death.is_none());

        let traj = synthetic(grid(0.0, 1.0, 1000), |t| (0.4 - t).max(0.0));
        let ev = detect_transitions(&traj, 1e-9, 0.01).unwrap();
        assert_eq!(ev[0].kind, TransitionKind::Esd);
        assert!(ev[0].t_birth.is_none());
    }

    #[test]
    fn short_dips_are_ignored() {
        let neg = |t: f64| (t - 0.5).abs();
        let traj = synthetic(grid(0.0, 1.0, 1000), neg);
        assert!(detect_transitions(&traj, 1e-9, 0.01).unwrap().is_empty());
    }

    #[test]
    fn undersampled_trajectory_is_rejected() {
        let traj = synthetic(grid(0.0, 1.0, 10), |_| 0.1);
        assert!(matches!(
            detect_transitions(&traj, 1e-9, 0.1),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn classification_of_synthetic_shapes() {
        let times = grid(-1.0, 1.0, 400);
        let opts = ClassifyOptions {
            window: 1.0,
            ..Default::default()
        };
        // Entangled at zero, dying on both sides.
        let traj = synthetic(times.clone(), |t| (0.3 - t.abs()).max(0.0));
        assert_eq!(classify_trajectory(&traj, Some(1.0), &opts).unwrap().label, Some(TrajectoryLabel::P6));
        // Entangled throughout.
        let traj = synthetic(times.clone(), |t| 0.1 + t * t);
        assert_eq!(classify_trajectory(&traj, None, &opts).unwrap().label, Some(TrajectoryLabel::P3));
        // Asymmetric death.
        let traj = synthetic(times.clone(), |t| (0.3 - t).max(0.0));
        assert_eq!(classify_trajectory(&traj, None, &opts).unwrap().label, None);
        // Touching from the entangled side.
        let traj = synthetic(times.clone(), |t| t * t);
        assert_eq!(classify_trajectory(&traj, None, &opts).unwrap().label, Some(TrajectoryLabel::P2));
        // On the boundary, entangled on one side.
        let traj = synthetic(times.clone(), |t| t.max(0.0));
        assert_eq!(classify_trajectory(&traj, None, &opts).unwrap().label, Some(TrajectoryLabel::P0));
    }

    #[test]
    fn classification_separable_side() {
        let times = grid(-1.0, 1.0, 400);
        let opts = ClassifyOptions {
            window: 1.0,
            ..Default::default()
        };
        let separable = |neg: f64, t: f64| MonotoneSample {
            cne: if neg > 0.0 { -neg } else { 0.01 + t * t },
            negativity: neg,
            concurrence: neg,
            negative_count: 0,
            clipped_mass: 0.0,
        };
        let build = |f: &dyn Fn(f64) -> f64| {
            let samples = times.iter().map(|&t| separable(f(t), t)).collect();
            Trajectory::from_samples(times.clone(), samples, "s").unwrap()
        };
        let traj = build(&|t: f64| (t.abs() - 0.5).max(0.0));
        assert_eq!(classify_trajectory(&traj, Some(-1.0), &opts).unwrap().label, Some(TrajectoryLabel::P4));
        let traj = build(&|_| 0.0);
        assert_eq!(classify_trajectory(&traj, None, &opts).unwrap().label, Some(TrajectoryLabel::P5));
    }

    #[test]
    fn classification_requires_negative_times() {
        let traj = synthetic(grid(0.0, 1.0, 100), |_| 0.1);
        assert!(matches!(
            classify_trajectory(&traj, None, &ClassifyOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn label_round_trip() {
        for s in ["p0", "p1", "p2", "p3", "p4", "p5", "p6"] {
            assert_eq!(s.parse::<TrajectoryLabel>().unwrap().to_string(), s);
        }
        assert!("p7".parse::<TrajectoryLabel>().is_err());
    }

    #[test]
    fn polynomial_fit_recovers_coefficients() {
        let dts = fit_grid(1e-3, 1e-2, 16).unwrap();
        let c = [-0.005, 0.0, 0.12625, 0.0, -1.5];
        let values: Vec<f64> = dts
            .iter()
            .map(|&t| c.iter().enumerate().map(|(k, ck)| ck * t.powi(k as i32)).sum())
            .collect();
        let fit = fit_polynomial(&dts, &values, Parity::Even.powers()).unwrap();
        assert!((fit.c(0) - c[0]).abs() < 1e-15);
        assert!((fit.c(2) - c[2]).abs() < 1e-9);
        assert!((fit.c(4) + 1.5).abs() < 1e-4);
        assert!(fit.residual < 1e-15);
        let full = fit_polynomial(&dts, &values, Parity::Full.powers()).unwrap();
        assert!(full.c(1).abs() < 1e-10 && full.c(3).abs() < 1e-6);
    }

    #[test]
    fn fit_rejects_degenerate_windows() {
        let dts = vec![1e-3; 12];
        let values = vec![0.0; 12];
        assert!(matches!(
            fit_polynomial(&dts, &values, Parity::Full.powers()),
            Err(Error::IllConditioned { .. })
        ));
        assert!(fit_polynomial(&dts[..5], &values[..5], &[0]).is_err());
        assert!(fit_grid(1e-2, 1e-3, 8).is_err());
    }

    #[test]
    fn table_guards() {
        let f = AnalyticCneFormula::TableI {
            config: ProductConfig::Udd,
            coupling: ExchangeCoupling::new(1.0, 1.0, 1.0),
            spin: SpinMagnitude::HALF,
        };
        let err = f.evaluate(0.01).unwrap_err();
        assert!(err.to_string().contains("sign(Jx) = -sign(Jy)"));
        let f = AnalyticCneFormula::TableII {
            id: WeightingId::new(10).unwrap(),
            epsilon: 0.01,
            coupling: RECIPE_COUPLING,
        };
        assert!(matches!(f.check_guards(), Err(Error::Precondition(_))));
    }

    #[test]
    fn table_one_arithmetic() {
        let f = AnalyticCneFormula::TableI {
            config: ProductConfig::Uuu,
            coupling: ExchangeCoupling::new(1.0, 0.5, 1.0),
            spin: SpinMagnitude::HALF,
        };
        assert_eq!(f.expansion().unwrap(), vec![(2, -0.125)]);
        let f = AnalyticCneFormula::TableI {
            config: ProductConfig::Uud,
            coupling: ExchangeCoupling::new(1.0, 1.0, 1.0),
            spin: SpinMagnitude::HALF,
        };
        let c2 = f.expansion().unwrap()[0].1;
        assert!((c2 - 0.5 * (2.0 - 8f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn mixed_table_w1_value() {
        let f = AnalyticCneFormula::TableII {
            id: WeightingId::new(1).unwrap(),
            epsilon: 0.01,
            coupling: RECIPE_COUPLING,
        };
        let terms = f.expansion().unwrap();
        assert_eq!(terms[0], (0, -0.005));
        assert!((terms[1].1 - 0.12625).abs() < 1e-15);
    }
}
