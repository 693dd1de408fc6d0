//! Run configuration: JSON schema, dotted overrides and conversion into core
//! types.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use espkit_core::analysis::{DEFAULT_CLASSIFY_WINDOW, DEFAULT_THRESHOLD};
use espkit_core::dynamics::{EvolutionSpec, InitialState, Method};
use espkit_core::model::{EnvState, ExchangeCoupling, ProductSpinSpec};
use espkit_core::states::{
    bell_ket, esp_weighting, mixed_initial, product_initial, pure_initial, BellFamily, BellKind,
    Sign, WeightingId,
};
use espkit_core::{DensityOperator, SpinMagnitude};
use espkit_core::densemat::{kron, ComplexMatrix};
use espkit_core::hilbert::{Space, SystemDims};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub state: StateConfig,
    pub evolution: EvolutionConfig,
    pub detection: DetectionConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Exchange constants `[Jx, Jy, Jz]`.
    pub j: [f64; 3],
    /// Environment spin; a positive half-integer.
    pub s_c: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            j: [1.0, 1.0, 1.0],
            s_c: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Product,
    Bell,
    MixedWeighting,
    PureWeighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Angles {
    pub theta_a: f64,
    pub phi_a: f64,
    pub theta_b: f64,
    pub phi_b: f64,
}

impl Default for Angles {
    fn default() -> Self {
        Self {
            theta_a: 0.0,
            phi_a: 0.0,
            theta_b: 0.0,
            phi_b: 0.0,
        }
    }
}

/// Environment preparation. Exactly one of the fields may be set; neither
/// means the top level `m = S`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Twice the magnetic quantum number of a pure level.
    pub two_m: Option<i32>,
    /// Diagonal populations in descending-m order.
    pub populations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateConfig {
    pub kind: StateKind,
    pub weighting_id: Option<String>,
    pub epsilon: f64,
    pub angles: Angles,
    /// Bell family (`alpha` or `beta`) for `kind = bell`.
    pub bell_family: String,
    /// Bell sign (`+` or `-`) for `kind = bell`.
    pub bell_sign: String,
    pub p: f64,
    pub env: EnvConfig,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            kind: StateKind::Product,
            weighting_id: None,
            epsilon: 0.01,
            angles: Angles::default(),
            bell_family: "beta".into(),
            bell_sign: "-".into(),
            p: 0.0,
            env: EnvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Exact,
    Series,
    Integrator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    /// Either 0 or `-t_max`.
    pub t_min: f64,
    pub t_max: f64,
    pub n_steps: usize,
    pub method: MethodKind,
    pub series_order: u8,
    pub integrator_step: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            t_min: 0.0,
            t_max: 10.0,
            n_steps: 1000,
            method: MethodKind::Exact,
            series_order: 3,
            integrator_step: Method::DEFAULT_INTEGRATOR_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub threshold: f64,
    /// Defaults to five sample spacings when absent.
    pub min_duration: Option<f64>,
    /// Half-width of the classification window around `t = 0`.
    pub classify_window: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            min_duration: None,
            classify_window: DEFAULT_CLASSIFY_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trajectory: String,
    pub manifest: String,
    pub gnuplot_script: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            manifest: "manifest.json".into(),
            gnuplot_script: false,
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses a JSON document into a `RunConfig`, reporting the offending field path.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| config_error("<document>", e.to_string()))?;
    config_from_value(value)
}

pub fn config_from_value(value: Value) -> CliResult<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        config_error(if path == "." { "<root>" } else { &path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Splits `a.b.c=value` into its path and a JSON value; values that are not
/// valid JSON are taken as strings.
pub fn parse_override(spec: &str) -> CliResult<(Vec<String>, Value)> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Override(spec.to_string()))?;
    let keys: Vec<String> = path.split('.').map(str::to_string).collect();
    if keys.iter().any(|k| k.is_empty() || k.trim() != k) {
        return Err(CliError::Override(spec.to_string()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((keys, value))
}

/// Writes `value` at the dotted path, creating intermediate objects.
pub fn apply_override(doc: &mut Value, keys: &[String], value: Value) -> CliResult<()> {
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            return Err(config_error(&keys[..i].join("."), "override descends into a non-object"));
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == keys.len() {
            map.insert(key.clone(), value);
            return Ok(());
        }
        node = map.entry(key.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Override(keys.join(".")))
}

/// Reads a config file (or `{}` when absent) and applies overrides in order.
pub fn load_config(text: Option<&str>, overrides: &[String]) -> CliResult<RunConfig> {
    let mut doc: Value = match text {
        Some(t) => serde_json::from_str(t).map_err(|e| config_error("<document>", e.to_string()))?,
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        let (keys, value) = parse_override(o)?;
        apply_override(&mut doc, &keys, value)?;
    }
    config_from_value(doc)
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let j = self.model.j;
        if j.iter().any(|x| !x.is_finite()) {
            return Err(config_error("model.j", "exchange constants must be finite"));
        }
        self.spin()?;
        let e = &self.evolution;
        if !(e.t_max.is_finite() && e.t_max > 0.0) {
            return Err(config_error("evolution.t_max", "must be positive"));
        }
        if e.t_min != 0.0 && e.t_min != -e.t_max {
            return Err(config_error("evolution.t_min", "must be 0 or -t_max"));
        }
        if e.n_steps == 0 {
            return Err(config_error("evolution.n_steps", "must be at least 1"));
        }
        if !(1..=3).contains(&e.series_order) {
            return Err(config_error("evolution.series_order", "must be 1, 2 or 3"));
        }
        if !(e.integrator_step.is_finite() && e.integrator_step > 0.0) {
            return Err(config_error("evolution.integrator_step", "must be positive"));
        }
        let d = &self.detection;
        if !(d.threshold.is_finite() && d.threshold >= 0.0) {
            return Err(config_error("detection.threshold", "must be non-negative"));
        }
        if let Some(m) = d.min_duration {
            if !(m.is_finite() && m > 0.0) {
                return Err(config_error("detection.min_duration", "must be positive"));
            }
        }
        if !(d.classify_window.is_finite() && d.classify_window > 0.0) {
            return Err(config_error("detection.classify_window", "must be positive"));
        }
        let s = &self.state;
        if matches!(s.kind, StateKind::MixedWeighting | StateKind::PureWeighting) {
            let id = s
                .weighting_id
                .as_deref()
                .ok_or_else(|| config_error("state.weighting_id", "required for weighting states"))?;
            id.parse::<WeightingId>()
                .map_err(|e| config_error("state.weighting_id", e.to_string()))?;
            if !(s.epsilon > -1.0 && s.epsilon < 1.0) {
                return Err(config_error("state.epsilon", "must lie in (-1, 1)"));
            }
        }
        if s.kind == StateKind::Bell {
            self.bell_kind()?;
        }
        if s.env.two_m.is_some() && s.env.populations.is_some() {
            return Err(config_error("state.env", "set at most one of two_m and populations"));
        }
        Ok(())
    }

    pub fn spin(&self) -> CliResult<SpinMagnitude> {
        SpinMagnitude::from_f64(self.model.s_c).map_err(|e| config_error("model.s_c", e.to_string()))
    }

    pub fn coupling(&self) -> ExchangeCoupling {
        ExchangeCoupling::from_array(self.model.j).expect("validated finite")
    }

    fn bell_kind(&self) -> CliResult<BellKind> {
        let s = &self.state;
        let family = match s.bell_family.as_str() {
            "alpha" => BellFamily::Alpha,
            "beta" => BellFamily::Beta,
            other => return Err(config_error("state.bell_family", format!("expected alpha or beta, got {other:?}"))),
        };
        let sign = match s.bell_sign.as_str() {
            "+" => Sign::Plus,
            "-" => Sign::Minus,
            other => return Err(config_error("state.bell_sign", format!("expected + or -, got {other:?}"))),
        };
        if !(0.0..=1.0).contains(&s.p) {
            return Err(config_error("state.p", "must lie in [0, 1]"));
        }
        Ok(BellKind::new(family, sign, s.p))
    }

    fn env(&self) -> EnvState {
        let s = self.spin().expect("validated spin");
        match (&self.state.env.two_m, &self.state.env.populations) {
            (_, Some(p)) => EnvState::Diagonal(p.clone()),
            (Some(m), None) => EnvState::Level { two_m: *m },
            (None, None) => EnvState::Level {
                two_m: s.two_s() as i32,
            },
        }
    }

    pub fn weighting_id(&self) -> Option<WeightingId> {
        self.state.weighting_id.as_deref().and_then(|s| s.parse().ok())
    }

    /// Builds the initial state on C (x) A (x) B.
    pub fn initial_state(&self) -> CliResult<InitialState> {
        let spin = self.spin()?;
        let st = &self.state;
        let env = self.env();
        Ok(match st.kind {
            StateKind::Product => {
                let a = st.angles;
                let spec = ProductSpinSpec {
                    theta_a: a.theta_a,
                    phi_a: a.phi_a,
                    theta_b: a.theta_b,
                    phi_b: a.phi_b,
                    env,
                };
                InitialState::Density(product_initial(&spec, spin)?)
            }
            StateKind::Bell => {
                let spec = ProductSpinSpec {
                    theta_a: 0.0,
                    phi_a: 0.0,
                    theta_b: 0.0,
                    phi_b: 0.0,
                    env,
                };
                let populations = spec.env_populations(spin)?;
                let bell = bell_ket(self.bell_kind()?)?.to_density();
                let full = kron(&ComplexMatrix::diag_real(&populations), bell.matrix());
                InitialState::Density(DensityOperator::new(Space::Full(SystemDims::new(spin)), full)?)
            }
            StateKind::MixedWeighting => {
                let w = esp_weighting(self.weighting_id().expect("validated id"), st.epsilon)?;
                InitialState::Density(mixed_initial(&w, spin))
            }
            StateKind::PureWeighting => {
                let w = esp_weighting(self.weighting_id().expect("validated id"), st.epsilon)?;
                InitialState::Pure(pure_initial(&w, spin)?)
            }
        })
    }

    pub fn evolution_spec(&self) -> EvolutionSpec {
        let e = &self.evolution;
        let method = match e.method {
            MethodKind::Exact => Method::Exact,
            MethodKind::Series => Method::Series {
                order: e.series_order,
            },
            MethodKind::Integrator => Method::Integrator {
                step: e.integrator_step,
            },
        };
        EvolutionSpec {
            method,
            t_max: e.t_max,
            n_steps: e.n_steps,
            emit_negative_times: e.t_min < 0.0,
        }
    }

    /// Short human-readable state label used in trajectory metadata.
    pub fn state_label(&self) -> String {
        let st = &self.state;
        match st.kind {
            StateKind::Product => format!(
                "product(theta_a={}, theta_b={})",
                st.angles.theta_a, st.angles.theta_b
            ),
            StateKind::Bell => format!("bell({}{}, p={})", st.bell_family, st.bell_sign, st.p),
            StateKind::MixedWeighting | StateKind::PureWeighting => format!(
                "{}({}, eps={})",
                if st.kind == StateKind::MixedWeighting { "mixed" } else { "pure" },
                st.weighting_id.as_deref().unwrap_or("?"),
                st.epsilon
            ),
        }
    }
}
