//! Scenario configuration, presets, and CSV emission.
//!
//! A scenario is described by a flat dotted-key text format, one
//! `group.key = value` assignment per line (`#` lines and blank lines are
//! skipped). The same key-value pairs drive config files, `--set` overrides,
//! and environment overrides, with later assignments winning. Parsing
//! collects every violation instead of stopping at the first.
//!
//! Key groups:
//!
//! * `physical.*` - cavity-level inputs (`g`, `delta`, `epsilon`, `kappa`,
//!   `eta`) from which the simulation rates are derived. Mutually exclusive
//!   with `rates.*`.
//! * `rates.*` - direct rate inputs in dephasing units (`eta`, `gamma_p`,
//!   `chi_alpha_sq`).
//! * `model.purcell_sign` - `minus` or `plus` correlated-decay sign.
//! * `noise.*` - single-qubit rates `gamma_1`, `gamma_2`, `gamma_phi_1`,
//!   `gamma_phi_2`.
//! * `feedback.*` - `strategy`, `u`, `op`, `weight_c1`, `weight_c2`.
//! * `filter.*` - `gamma_ft`, `window_t`, `power_p` (a comma-separated list
//!   sweeps the power and emits one ensemble per value), `mode`.
//! * `integrator.*` - `dt`, `t_end`, `record_stride`, `positivity_tol`,
//!   `delay_feedback`.
//! * `run.*` - `trajectories`, `seed`, `out`, `emit_trajectories`,
//!   `compare_no_feedback`, `initial`.
//!
//! All rates are in units of the measurement dephasing rate, times in its
//! inverse; see the module docs on [`crate::model`].

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::ensemble::{run_ensemble, EnsembleError, EnsembleStats};
use crate::feedback::{FeedbackConfig, FeedbackOp, FilterConfig, FilterMode, Strategy};
use crate::model::{derive_rates, ModelRates, PhysicalParams, PurcellSign};
use crate::qstate::{bell_state, Bell, DensityMatrix, Ket};
use crate::sde::{run_trajectory, IntegratorConfig, TrajectoryPlan, TrajectoryRecord};

/// Header line of every ensemble CSV. Covered by a golden test; changing it
/// breaks downstream plotting scripts.
pub const ENSEMBLE_HEADER: &str = "t,mean_concurrence,std_concurrence,mean_fidelity,std_fidelity,concurrence_of_mean_state,fidelity_of_mean_state,purity_of_mean_state";

/// Header line of every per-trajectory CSV.
pub const TRAJECTORY_HEADER: &str = "t,concurrence,fidelity,purity";

/// One rejected key-value pair or failed cross-field check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigViolation {
    /// Dotted key path (or the offending flag / line tag).
    pub key: String,
    pub reason: String,
}

/// Every violation found in one parse pass, not just the first.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub violations: Vec<ConfigViolation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.key, v.reason)?;
        }
        Ok(())
    }
}

impl ConfigError {
    /// A one-violation error, for callers that detect a problem outside the
    /// parsing pass (bad flag syntax, unknown preset, unreadable file).
    pub fn single(key: &str, reason: impl Into<String>) -> Self {
        ConfigError {
            violations: vec![ConfigViolation {
                key: key.to_string(),
                reason: reason.into(),
            }],
        }
    }
}

/// Any failure of a scenario run, mapped onto the process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("integration failed: {0}")]
    Ensemble(#[from] EnsembleError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    /// 1 config error, 2 integration failure, 3 i/o error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Ensemble(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

/// Model input: either cavity-level physical parameters (rates derived) or
/// the rates themselves in dephasing units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelInput {
    Physical(PhysicalParams),
    Direct {
        eta: f64,
        gamma_p: f64,
        chi_alpha_sq: f64,
    },
}

/// Single-qubit noise rates, always given directly in dephasing units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseInput {
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub gamma_phi_1: f64,
    pub gamma_phi_2: f64,
}

/// Filter settings plus the list of powers to sweep. Each power becomes one
/// ensemble leg; a single-element list is an ordinary run.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSchedule {
    pub gamma_ft: f64,
    pub window_t: f64,
    pub powers: Vec<f64>,
    pub mode: FilterMode,
}

/// Named initial states used by the scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialState {
    /// Both qubits in `(|0> + |1>)/sqrt(2)`.
    PlusPlus,
    /// The protected Bell state `(|01> + |10>)/sqrt(2)`.
    PhiPlus,
    /// `|00>`.
    Ground,
}

impl InitialState {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialState::PlusPlus => "plus_plus",
            InitialState::PhiPlus => "phi_plus",
            InitialState::Ground => "ground",
        }
    }

    pub fn density(self) -> DensityMatrix {
        match self {
            InitialState::PlusPlus => DensityMatrix::pure(&Ket::plus_plus()),
            InitialState::PhiPlus => DensityMatrix::pure(&bell_state(Bell::PhiPlus)),
            InitialState::Ground => DensityMatrix::pure(&Ket::basis(0)),
        }
    }
}

/// Execution settings: ensemble size, seeding, and output selection.
#[derive(Clone, Debug, PartialEq)]
pub struct RunInput {
    pub trajectories: usize,
    pub seed: u64,
    pub out: String,
    /// Also write one `traj_<id>.csv` per trajectory.
    pub emit_trajectories: bool,
    /// Run an extra leg with feedback switched off, same seed, for a paired
    /// with/without comparison.
    pub compare_no_feedback: bool,
    pub initial: InitialState,
}

/// A fully validated scenario: everything a run needs except the worker
/// count, which is an execution detail and deliberately not part of the
/// reproducible configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub model: ModelInput,
    pub purcell_sign: PurcellSign,
    pub noise: NoiseInput,
    pub feedback: FeedbackConfig,
    pub filter: FilterSchedule,
    pub integrator: IntegratorConfig,
    pub run: RunInput,
}

/// One concrete ensemble to run: a label (empty for single-leg scenarios)
/// plus the trajectory plan.
#[derive(Clone, Debug)]
pub struct Leg {
    pub label: String,
    pub plan: TrajectoryPlan,
}

/// Paths produced by a completed run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// `(leg label, ensemble CSV path)` in execution order.
    pub ensembles: Vec<(String, PathBuf)>,
    pub trajectory_files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

// ---------------------------------------------------------------------------
// Parsing

/// Split config text into raw key-value pairs, preserving order. Only line
/// syntax is checked here; keys and values are judged in [`build_config`].
pub fn config_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    let mut violations = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
            None => violations.push(ConfigViolation {
                key: format!("line {}", idx + 1),
                reason: format!("expected `key = value`, got \"{line}\""),
            }),
        }
    }
    if violations.is_empty() {
        Ok(pairs)
    } else {
        Err(ConfigError { violations })
    }
}

/// Parse and validate a complete config text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    build_config(&config_pairs(text)?)
}

#[derive(Default)]
struct Builder {
    g: Option<f64>,
    delta: Option<f64>,
    epsilon: Option<f64>,
    kappa: Option<f64>,
    phys_eta: Option<f64>,
    eta: Option<f64>,
    gamma_p: Option<f64>,
    chi_alpha_sq: Option<f64>,
    purcell_sign: Option<PurcellSign>,
    gamma_1: Option<f64>,
    gamma_2: Option<f64>,
    gamma_phi_1: Option<f64>,
    gamma_phi_2: Option<f64>,
    strategy: Option<Strategy>,
    u: Option<f64>,
    op: Option<FeedbackOp>,
    weight_c1: Option<f64>,
    weight_c2: Option<f64>,
    gamma_ft: Option<f64>,
    window_t: Option<f64>,
    powers: Option<Vec<f64>>,
    mode: Option<FilterMode>,
    dt: Option<f64>,
    t_end: Option<f64>,
    record_stride: Option<usize>,
    positivity_tol: Option<f64>,
    delay_feedback: Option<bool>,
    trajectories: Option<usize>,
    seed: Option<u64>,
    out: Option<String>,
    emit_trajectories: Option<bool>,
    compare_no_feedback: Option<bool>,
    initial: Option<InitialState>,
}

fn float_value(key: &str, v: &str) -> Result<f64, ConfigViolation> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => Err(bad(key, "must be finite")),
        Err(_) => Err(bad(key, format!("not a number: \"{v}\""))),
    }
}

fn usize_value(key: &str, v: &str) -> Result<usize, ConfigViolation> {
    v.parse::<usize>()
        .map_err(|_| bad(key, format!("not a non-negative integer: \"{v}\"")))
}

fn u64_value(key: &str, v: &str) -> Result<u64, ConfigViolation> {
    v.parse::<u64>()
        .map_err(|_| bad(key, format!("not a non-negative integer: \"{v}\"")))
}

fn bool_value(key: &str, v: &str) -> Result<bool, ConfigViolation> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got \"{v}\""))),
    }
}

fn powers_value(key: &str, v: &str) -> Result<Vec<f64>, ConfigViolation> {
    let mut out = Vec::new();
    for part in v.split(',') {
        out.push(float_value(key, part.trim())?);
    }
    Ok(out)
}

fn choice<T: Copy>(key: &str, v: &str, table: &[(&str, T)]) -> Result<T, ConfigViolation> {
    for (name, val) in table {
        if v == *name {
            return Ok(*val);
        }
    }
    let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
    Err(bad(key, format!("expected one of {} , got \"{v}\"", names.join(" | "))))
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigViolation {
    ConfigViolation {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl Builder {
    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigViolation> {
        match key {
            "physical.g" => self.g = Some(float_value(key, value)?),
            "physical.delta" => self.delta = Some(float_value(key, value)?),
            "physical.epsilon" => self.epsilon = Some(float_value(key, value)?),
            "physical.kappa" => self.kappa = Some(float_value(key, value)?),
            "physical.eta" => self.phys_eta = Some(float_value(key, value)?),
            "rates.eta" => self.eta = Some(float_value(key, value)?),
            "rates.gamma_p" => self.gamma_p = Some(float_value(key, value)?),
            "rates.chi_alpha_sq" => self.chi_alpha_sq = Some(float_value(key, value)?),
            "model.purcell_sign" => {
                self.purcell_sign = Some(choice(
                    key,
                    value,
                    &[("minus", PurcellSign::Minus), ("plus", PurcellSign::Plus)],
                )?)
            }
            "noise.gamma_1" => self.gamma_1 = Some(float_value(key, value)?),
            "noise.gamma_2" => self.gamma_2 = Some(float_value(key, value)?),
            "noise.gamma_phi_1" => self.gamma_phi_1 = Some(float_value(key, value)?),
            "noise.gamma_phi_2" => self.gamma_phi_2 = Some(float_value(key, value)?),
            "feedback.strategy" => {
                self.strategy = Some(choice(
                    key,
                    value,
                    &[
                        ("none", Strategy::None),
                        ("markovian_direct", Strategy::MarkovianDirect),
                        ("state_estimate", Strategy::StateEstimate),
                        ("filtered_current", Strategy::FilteredCurrent),
                    ],
                )?)
            }
            "feedback.u" => self.u = Some(float_value(key, value)?),
            "feedback.op" => {
                self.op = Some(choice(
                    key,
                    value,
                    &[
                        ("jx", FeedbackOp::Jx),
                        ("jx_bar", FeedbackOp::JxBar),
                        ("weighted_x", FeedbackOp::WeightedX),
                    ],
                )?)
            }
            "feedback.weight_c1" => self.weight_c1 = Some(float_value(key, value)?),
            "feedback.weight_c2" => self.weight_c2 = Some(float_value(key, value)?),
            "filter.gamma_ft" => self.gamma_ft = Some(float_value(key, value)?),
            "filter.window_t" => self.window_t = Some(float_value(key, value)?),
            "filter.power_p" => self.powers = Some(powers_value(key, value)?),
            "filter.mode" => {
                self.mode = Some(choice(
                    key,
                    value,
                    &[("exact", FilterMode::Exact), ("recursive", FilterMode::Recursive)],
                )?)
            }
            "integrator.dt" => self.dt = Some(float_value(key, value)?),
            "integrator.t_end" => self.t_end = Some(float_value(key, value)?),
            "integrator.record_stride" => self.record_stride = Some(usize_value(key, value)?),
            "integrator.positivity_tol" => self.positivity_tol = Some(float_value(key, value)?),
            "integrator.delay_feedback" => self.delay_feedback = Some(bool_value(key, value)?),
            "run.trajectories" => self.trajectories = Some(usize_value(key, value)?),
            "run.seed" => self.seed = Some(u64_value(key, value)?),
            "run.out" => self.out = Some(value.to_string()),
            "run.emit_trajectories" => self.emit_trajectories = Some(bool_value(key, value)?),
            "run.compare_no_feedback" => self.compare_no_feedback = Some(bool_value(key, value)?),
            "run.initial" => {
                self.initial = Some(choice(
                    key,
                    value,
                    &[
                        ("plus_plus", InitialState::PlusPlus),
                        ("phi_plus", InitialState::PhiPlus),
                        ("ground", InitialState::Ground),
                    ],
                )?)
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }
}

/// Build and validate a scenario from ordered key-value pairs; later pairs
/// override earlier ones. Returns every violation found.
pub fn build_config(pairs: &[(String, String)]) -> Result<ScenarioConfig, ConfigError> {
    let mut b = Builder::default();
    let mut violations = Vec::new();
    for (key, value) in pairs {
        if let Err(v) = b.apply(key, value) {
            violations.push(v);
        }
    }

    let physical_given = [b.g, b.delta, b.epsilon, b.kappa, b.phys_eta]
        .iter()
        .any(Option::is_some);
    let direct_given = [b.eta, b.gamma_p, b.chi_alpha_sq].iter().any(Option::is_some);

    let model = match (physical_given, direct_given) {
        (true, true) => {
            violations.push(bad("rates", "physical.* and rates.* are mutually exclusive"));
            None
        }
        (false, false) => {
            violations.push(bad(
                "rates",
                "a model is required: set either the physical.* group or the rates.* group",
            ));
            None
        }
        (true, false) => {
            let mut missing = Vec::new();
            for (name, v) in [
                ("physical.g", b.g),
                ("physical.delta", b.delta),
                ("physical.epsilon", b.epsilon),
                ("physical.kappa", b.kappa),
                ("physical.eta", b.phys_eta),
            ] {
                if v.is_none() {
                    missing.push(name);
                }
            }
            if missing.is_empty() {
                let p = PhysicalParams {
                    g: b.g.unwrap(),
                    delta: b.delta.unwrap(),
                    epsilon: b.epsilon.unwrap(),
                    kappa: b.kappa.unwrap(),
                    eta: b.phys_eta.unwrap(),
                };
                if p.g <= 0.0 {
                    violations.push(bad("physical.g", "must be positive"));
                }
                if p.delta == 0.0 {
                    violations.push(bad("physical.delta", "must be nonzero"));
                }
                if p.epsilon <= 0.0 {
                    violations.push(bad("physical.epsilon", "must be positive"));
                }
                if p.kappa <= 0.0 {
                    violations.push(bad("physical.kappa", "must be positive"));
                }
                if !(p.eta > 0.0 && p.eta <= 1.0) {
                    violations.push(bad("physical.eta", "must be in (0, 1]"));
                }
                Some(ModelInput::Physical(p))
            } else {
                violations.push(bad(
                    "physical",
                    format!("incomplete group, missing {}", missing.join(", ")),
                ));
                None
            }
        }
        (false, true) => {
            let mut missing = Vec::new();
            for (name, v) in [
                ("rates.eta", b.eta),
                ("rates.gamma_p", b.gamma_p),
                ("rates.chi_alpha_sq", b.chi_alpha_sq),
            ] {
                if v.is_none() {
                    missing.push(name);
                }
            }
            if missing.is_empty() {
                let eta = b.eta.unwrap();
                let gamma_p = b.gamma_p.unwrap();
                let chi = b.chi_alpha_sq.unwrap();
                if !(eta > 0.0 && eta <= 1.0) {
                    violations.push(bad("rates.eta", "must be in (0, 1]"));
                }
                if gamma_p < 0.0 {
                    violations.push(bad("rates.gamma_p", "must be non-negative"));
                }
                if chi < 0.0 {
                    violations.push(bad("rates.chi_alpha_sq", "must be non-negative"));
                }
                Some(ModelInput::Direct {
                    eta,
                    gamma_p,
                    chi_alpha_sq: chi,
                })
            } else {
                violations.push(bad(
                    "rates",
                    format!("incomplete group, missing {}", missing.join(", ")),
                ));
                None
            }
        }
    };

    let noise = NoiseInput {
        gamma_1: b.gamma_1.unwrap_or(0.0),
        gamma_2: b.gamma_2.unwrap_or(0.0),
        gamma_phi_1: b.gamma_phi_1.unwrap_or(0.0),
        gamma_phi_2: b.gamma_phi_2.unwrap_or(0.0),
    };
    for (key, v) in [
        ("noise.gamma_1", noise.gamma_1),
        ("noise.gamma_2", noise.gamma_2),
        ("noise.gamma_phi_1", noise.gamma_phi_1),
        ("noise.gamma_phi_2", noise.gamma_phi_2),
    ] {
        if v < 0.0 {
            violations.push(bad(key, "must be non-negative"));
        }
    }

    let feedback = FeedbackConfig {
        strategy: b.strategy.unwrap_or(Strategy::None),
        u: b.u.unwrap_or(0.0),
        op: b.op.unwrap_or(FeedbackOp::Jx),
        weight_c1: b.weight_c1.unwrap_or(1.0),
        weight_c2: b.weight_c2.unwrap_or(1.0),
    };

    let filter = FilterSchedule {
        gamma_ft: b.gamma_ft.unwrap_or(0.0),
        window_t: b.window_t.unwrap_or(1.0),
        powers: b.powers.unwrap_or_else(|| vec![1.0]),
        mode: b.mode.unwrap_or(FilterMode::Recursive),
    };
    if feedback.strategy == Strategy::FilteredCurrent {
        if filter.gamma_ft <= 0.0 {
            violations.push(bad(
                "filter.gamma_ft",
                "must be positive when feedback.strategy = filtered_current",
            ));
        }
        if filter.window_t <= 0.0 {
            violations.push(bad(
                "filter.window_t",
                "must be positive when feedback.strategy = filtered_current",
            ));
        }
        if filter.powers.is_empty() {
            violations.push(bad("filter.power_p", "must list at least one power"));
        }
        for &p in &filter.powers {
            if p <= 0.0 {
                violations.push(bad("filter.power_p", "powers must be positive"));
            }
        }
    } else if filter.powers.len() > 1 {
        violations.push(bad(
            "filter.power_p",
            "a power sweep requires feedback.strategy = filtered_current",
        ));
    }

    let defaults = IntegratorConfig::default();
    let integrator = IntegratorConfig {
        dt: b.dt.unwrap_or(defaults.dt),
        t_end: b.t_end.unwrap_or(defaults.t_end),
        record_stride: b.record_stride.unwrap_or(defaults.record_stride),
        positivity_tol: b.positivity_tol.unwrap_or(defaults.positivity_tol),
        delay_feedback: b.delay_feedback.unwrap_or(defaults.delay_feedback),
        ..defaults
    };
    if integrator.dt <= 0.0 {
        violations.push(bad("integrator.dt", "must be positive"));
    } else if integrator.t_end < integrator.dt {
        violations.push(bad("integrator.t_end", "must be at least one step long"));
    }
    if integrator.record_stride == 0 {
        violations.push(bad("integrator.record_stride", "must be at least 1"));
    }
    if integrator.positivity_tol < 0.0 {
        violations.push(bad("integrator.positivity_tol", "must be non-negative"));
    }

    let run = RunInput {
        trajectories: b.trajectories.unwrap_or(500),
        seed: b.seed.unwrap_or(42),
        out: b.out.unwrap_or_else(|| "runs".to_string()),
        emit_trajectories: b.emit_trajectories.unwrap_or(false),
        compare_no_feedback: b.compare_no_feedback.unwrap_or(false),
        initial: b.initial.unwrap_or(InitialState::PlusPlus),
    };
    if run.trajectories == 0 {
        violations.push(bad("run.trajectories", "must be at least 1"));
    }
    if run.out.is_empty() {
        violations.push(bad("run.out", "must not be empty"));
    }
    if run.compare_no_feedback && feedback.strategy == Strategy::None {
        violations.push(bad(
            "run.compare_no_feedback",
            "needs an active feedback.strategy to compare against",
        ));
    }

    match (model, violations.is_empty()) {
        (Some(model), true) => Ok(ScenarioConfig {
            model,
            purcell_sign: b.purcell_sign.unwrap_or(PurcellSign::Minus),
            noise,
            feedback,
            filter,
            integrator,
            run,
        }),
        _ => Err(ConfigError { violations }),
    }
}

// ---------------------------------------------------------------------------
// Emission

fn strategy_key(s: Strategy) -> &'static str {
    s.name()
}

fn op_key(op: FeedbackOp) -> &'static str {
    match op {
        FeedbackOp::Jx => "jx",
        FeedbackOp::JxBar => "jx_bar",
        FeedbackOp::WeightedX => "weighted_x",
    }
}

fn mode_key(m: FilterMode) -> &'static str {
    match m {
        FilterMode::Exact => "exact",
        FilterMode::Recursive => "recursive",
    }
}

fn sign_key(s: PurcellSign) -> &'static str {
    match s {
        PurcellSign::Minus => "minus",
        PurcellSign::Plus => "plus",
    }
}

/// Render a scenario back to config text. `parse_config(emit_config(c))`
/// reproduces `c` exactly; floats print in shortest round-trip form.
pub fn emit_config(c: &ScenarioConfig) -> String {
    let mut s = String::new();
    match &c.model {
        ModelInput::Physical(p) => {
            s.push_str(&format!("physical.g = {}\n", p.g));
            s.push_str(&format!("physical.delta = {}\n", p.delta));
            s.push_str(&format!("physical.epsilon = {}\n", p.epsilon));
            s.push_str(&format!("physical.kappa = {}\n", p.kappa));
            s.push_str(&format!("physical.eta = {}\n", p.eta));
        }
        ModelInput::Direct {
            eta,
            gamma_p,
            chi_alpha_sq,
        } => {
            s.push_str(&format!("rates.eta = {eta}\n"));
            s.push_str(&format!("rates.gamma_p = {gamma_p}\n"));
            s.push_str(&format!("rates.chi_alpha_sq = {chi_alpha_sq}\n"));
        }
    }
    s.push_str(&format!("model.purcell_sign = {}\n", sign_key(c.purcell_sign)));
    s.push_str(&format!("noise.gamma_1 = {}\n", c.noise.gamma_1));
    s.push_str(&format!("noise.gamma_2 = {}\n", c.noise.gamma_2));
    s.push_str(&format!("noise.gamma_phi_1 = {}\n", c.noise.gamma_phi_1));
    s.push_str(&format!("noise.gamma_phi_2 = {}\n", c.noise.gamma_phi_2));
    s.push_str(&format!("feedback.strategy = {}\n", strategy_key(c.feedback.strategy)));
    s.push_str(&format!("feedback.u = {}\n", c.feedback.u));
    s.push_str(&format!("feedback.op = {}\n", op_key(c.feedback.op)));
    s.push_str(&format!("feedback.weight_c1 = {}\n", c.feedback.weight_c1));
    s.push_str(&format!("feedback.weight_c2 = {}\n", c.feedback.weight_c2));
    s.push_str(&format!("filter.gamma_ft = {}\n", c.filter.gamma_ft));
    s.push_str(&format!("filter.window_t = {}\n", c.filter.window_t));
    let powers: Vec<String> = c.filter.powers.iter().map(|p| p.to_string()).collect();
    s.push_str(&format!("filter.power_p = {}\n", powers.join(",")));
    s.push_str(&format!("filter.mode = {}\n", mode_key(c.filter.mode)));
    s.push_str(&format!("integrator.dt = {}\n", c.integrator.dt));
    s.push_str(&format!("integrator.t_end = {}\n", c.integrator.t_end));
    s.push_str(&format!("integrator.record_stride = {}\n", c.integrator.record_stride));
    s.push_str(&format!("integrator.positivity_tol = {}\n", c.integrator.positivity_tol));
    s.push_str(&format!("integrator.delay_feedback = {}\n", c.integrator.delay_feedback));
    s.push_str(&format!("run.trajectories = {}\n", c.run.trajectories));
    s.push_str(&format!("run.seed = {}\n", c.run.seed));
    s.push_str(&format!("run.out = {}\n", c.run.out));
    s.push_str(&format!("run.emit_trajectories = {}\n", c.run.emit_trajectories));
    s.push_str(&format!("run.compare_no_feedback = {}\n", c.run.compare_no_feedback));
    s.push_str(&format!("run.initial = {}\n", c.run.initial.as_str()));
    s
}

// ---------------------------------------------------------------------------
// Presets

/// Shared base of all scenario presets: unit efficiency, strong collective
/// decay and measurement rotation, moderate single-qubit relaxation.
fn fig_family() -> ScenarioConfig {
    ScenarioConfig {
        model: ModelInput::Direct {
            eta: 1.0,
            gamma_p: 1.0,
            chi_alpha_sq: 10.0,
        },
        purcell_sign: PurcellSign::Minus,
        noise: NoiseInput {
            gamma_1: 0.1,
            gamma_2: 0.1,
            gamma_phi_1: 0.0,
            gamma_phi_2: 0.0,
        },
        feedback: FeedbackConfig::off(),
        filter: FilterSchedule {
            gamma_ft: 0.0,
            window_t: 1.0,
            powers: vec![1.0],
            mode: FilterMode::Recursive,
        },
        integrator: IntegratorConfig::default(),
        run: RunInput {
            trajectories: 500,
            seed: 42,
            out: "runs".to_string(),
            emit_trajectories: false,
            compare_no_feedback: false,
            initial: InitialState::PlusPlus,
        },
    }
}

fn filtered(c: &mut ScenarioConfig, powers: Vec<f64>) {
    c.feedback.strategy = Strategy::FilteredCurrent;
    c.feedback.u = 10.0;
    c.filter.gamma_ft = 0.006;
    c.filter.window_t = 2.0;
    c.filter.powers = powers;
}

/// Named scenario presets:
///
/// * `fig2a` - direct-current feedback, `u = 0.1`.
/// * `fig2bc` - state-estimate feedback, `u = 1.0`.
/// * `fig3` - filtered-current feedback, `u = 10`, sweeping `P = 1, 2, 3`.
/// * `fig4` - entanglement-death census from the protected state, 1000
///   trajectories, paired feedback-off / feedback-on legs (`P = 3`).
/// * `eta08` - `fig3` at 80% detection efficiency.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut c = fig_family();
    match name {
        "fig2a" => {
            c.feedback.strategy = Strategy::MarkovianDirect;
            c.feedback.u = 0.1;
        }
        "fig2bc" => {
            c.feedback.strategy = Strategy::StateEstimate;
            c.feedback.u = 1.0;
        }
        "fig3" => filtered(&mut c, vec![1.0, 2.0, 3.0]),
        "fig4" => {
            filtered(&mut c, vec![3.0]);
            c.run.initial = InitialState::PhiPlus;
            c.run.trajectories = 1000;
            c.run.compare_no_feedback = true;
        }
        "eta08" => {
            filtered(&mut c, vec![1.0, 2.0, 3.0]);
            c.model = ModelInput::Direct {
                eta: 0.8,
                gamma_p: 1.0,
                chi_alpha_sq: 10.0,
            };
        }
        _ => {
            return Err(ConfigError::single(
                "preset",
                format!("unknown preset \"{name}\"; known: fig2a, fig2bc, fig3, fig4, eta08"),
            ))
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Materialization and execution

fn model_rates(c: &ScenarioConfig) -> ModelRates {
    let mut rates = match c.model {
        ModelInput::Physical(p) => derive_rates(&p).dephasing_units(p.eta, c.purcell_sign),
        ModelInput::Direct {
            eta,
            gamma_p,
            chi_alpha_sq,
        } => ModelRates {
            eta,
            gamma_p,
            chi_alpha_sq,
            purcell_sign: c.purcell_sign,
            gamma_1: 0.0,
            gamma_2: 0.0,
            gamma_phi_1: 0.0,
            gamma_phi_2: 0.0,
        },
    };
    rates.gamma_1 = c.noise.gamma_1;
    rates.gamma_2 = c.noise.gamma_2;
    rates.gamma_phi_1 = c.noise.gamma_phi_1;
    rates.gamma_phi_2 = c.noise.gamma_phi_2;
    rates
}

/// Expand a scenario into its ensemble legs: one per filter power, plus a
/// leading feedback-off leg when the scenario asks for the paired
/// comparison. All legs share the seed, so the with/without comparison sees
/// identical noise streams.
pub fn materialize(c: &ScenarioConfig) -> Vec<Leg> {
    let rates = model_rates(c);
    let base = TrajectoryPlan {
        rates,
        feedback: c.feedback,
        filter: FilterConfig {
            gamma_ft: c.filter.gamma_ft,
            window_t: c.filter.window_t,
            power_p: c.filter.powers[0],
            mode: c.filter.mode,
        },
        integrator: c.integrator,
        initial: c.run.initial.density(),
        target: bell_state(Bell::PhiPlus),
    };

    let mut legs = Vec::new();
    if c.run.compare_no_feedback {
        let mut plan = base;
        plan.feedback = FeedbackConfig::off();
        legs.push(Leg {
            label: "feedback_off".to_string(),
            plan,
        });
    }

    let sweep = c.feedback.strategy == Strategy::FilteredCurrent && c.filter.powers.len() > 1;
    for &p in &c.filter.powers {
        let mut plan = base;
        plan.filter.power_p = p;
        let label = match (c.run.compare_no_feedback, sweep) {
            (true, true) => format!("feedback_on_p{p}"),
            (true, false) => "feedback_on".to_string(),
            (false, true) => format!("p{p}"),
            (false, false) => String::new(),
        };
        legs.push(Leg { label, plan });
    }
    legs
}

fn ensemble_filename(label: &str) -> String {
    if label.is_empty() {
        "ensemble.csv".to_string()
    } else {
        format!("ensemble_{label}.csv")
    }
}

fn trajectory_filename(label: &str, id: u64) -> String {
    if label.is_empty() {
        format!("traj_{id}.csv")
    } else {
        format!("traj_{label}_{id}.csv")
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_ensemble_csv(path: &Path, stats: &EnsembleStats) -> Result<(), CliError> {
    let mut out = String::with_capacity(64 * stats.times.len());
    out.push_str(ENSEMBLE_HEADER);
    out.push('\n');
    for i in 0..stats.times.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            stats.times[i],
            stats.mean_concurrence[i],
            stats.std_concurrence[i],
            stats.mean_fidelity[i],
            stats.std_fidelity[i],
            stats.concurrence_of_mean_state[i],
            stats.fidelity_of_mean_state[i],
            stats.purity_of_mean_state[i],
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

fn write_trajectory_csv(path: &Path, rec: &TrajectoryRecord) -> Result<(), CliError> {
    let mut out = String::with_capacity(32 * rec.times.len());
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for i in 0..rec.times.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            rec.times[i], rec.concurrence[i], rec.fidelity[i], rec.purity[i],
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Execute a validated scenario: run every leg, write one ensemble CSV per
/// leg (plus per-trajectory CSVs when requested) and a manifest that
/// reproduces the run byte for byte.
pub fn run(c: &ScenarioConfig) -> Result<RunSummary, CliError> {
    let out_dir = PathBuf::from(&c.run.out);
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;

    let mut summary = RunSummary {
        out_dir: out_dir.clone(),
        ensembles: Vec::new(),
        trajectory_files: Vec::new(),
        manifest: out_dir.join("manifest.cfg"),
    };

    for leg in materialize(c) {
        let started = Instant::now();
        let stats = run_ensemble(&leg.plan, c.run.trajectories, c.run.seed)?;
        let path = out_dir.join(ensemble_filename(&leg.label));
        write_ensemble_csv(&path, &stats)?;
        let shown = if leg.label.is_empty() { "ensemble" } else { &leg.label };
        println!(
            "{shown}: {} trajectories in {:.1}s, mean concurrence at t_end = {:.4}",
            stats.n_ok(),
            started.elapsed().as_secs_f64(),
            stats.mean_concurrence.last().copied().unwrap_or(f64::NAN),
        );
        summary.ensembles.push((leg.label.clone(), path));

        if c.run.emit_trajectories {
            for id in 0..c.run.trajectories as u64 {
                match run_trajectory(&leg.plan, c.run.seed, id) {
                    Ok(rec) => {
                        let tpath = out_dir.join(trajectory_filename(&leg.label, id));
                        write_trajectory_csv(&tpath, &rec)?;
                        summary.trajectory_files.push(tpath);
                    }
                    // The ensemble above already tolerated (and counted) rare
                    // integration failures; mirror that here.
                    Err(e) => eprintln!("trajectory {id} skipped: {e}"),
                }
            }
        }
    }

    let manifest = format!(
        "# qfb {}\n# run manifest: re-running this file reproduces the CSVs byte for byte\n{}",
        env!("CARGO_PKG_VERSION"),
        emit_config(c),
    );
    fs::write(&summary.manifest, manifest).map_err(io_err(&summary.manifest))?;
    Ok(summary)
}
