//! Sectioned key=value run configurations: strict parsing, canonical
//! serialisation, and the bridge to an executable [`RunConfig`].
//!
//! The format is plain UTF-8 text. A line is either blank, a full-line
//! `#` comment, a `[section]` header, or a `key = value` pair inside the
//! current section. Parsing is strict: unknown sections, unknown keys,
//! duplicate keys, and out-of-range values are all fatal, because a silent
//! typo in β or ε would corrupt every admissibility flag downstream.
//! The canonical serialisation round-trips: `parse(serialize(c)) = c`,
//! with every applied default written out, so the emitted text (and the
//! SHA-256 hash stamped into output manifests) fully describes the run.
//!
//! Sections and keys:
//!
//! ```text
//! [kernel]    family = two_state | doeblin | grid_metropolis | rwm_normal
//!             states, alpha, grid, kernel_seed        (doeblin)
//!             log_weights, max_width                  (grid_metropolis)
//!             dim                                     (rwm_normal)
//! [schedule]  beta
//! [adaptation] rule = fixed_sequence | acceptance_targeting
//!                   | empirical_moment | counterexample
//!             values, cycle                           (fixed_sequence)
//!             target, gain_exponent, lower, upper     (acceptance_targeting)
//!             scale, ridge, lower, upper              (empirical_moment)
//!             adaptations                             (counterexample)
//! [run]       horizon, replications, seed, initial_state, region,
//!             initial_param, integrand, nu_f
//! [rate]      kind = sqrt_log | poly; epsilon
//! [output]    prefix, trajectory
//! [sweep]     betas, epsilons, moment_p, rho          (optional section)
//! ```
//!
//! Parameter literals are a bare float (`0.25`, a scalar) or `index:k`.
//! States are `label:k` or `coords:x1,x2,...`; `region` selects the
//! auxiliary component (default 0). Integrands are `indicator:k` (of the
//! labelled state), `identity` (label index, or first coordinate), or
//! `coordinate:k`.

use std::collections::BTreeMap;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::adaptation::{counterexample_rule, ParamBox, UpdateRule};
use crate::error::{AirError, Result};
use crate::geometry::{AugmentedState, Point, StateFn};
use crate::kernels::{
    doeblin_family, grid_metropolis_family, rwm_family, two_state_family, KernelFamily, Param,
};
use crate::runner::{RateKind, RateSpec, RunConfig};
use crate::schedule::AirSchedule;

/// Kernel family selection.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSection {
    /// The two-point flip chain with scalar flip probability.
    TwoState,
    /// A Doeblin-minorised finite family sharing one invariant law.
    Doeblin {
        /// State count (≥ 2).
        states: usize,
        /// Minorisation constant in (0, 1].
        alpha: f64,
        /// Number of kernels in the family grid.
        grid: usize,
        /// Seed for the family's random construction.
        kernel_seed: u64,
    },
    /// Metropolis on a finite path graph with window-width parameters.
    GridMetropolis {
        /// Unnormalised log-weights of the target, one per grid point.
        log_weights: Vec<f64>,
        /// Largest proposal width; parameters are `index:1 ..= index:w`.
        max_width: usize,
    },
    /// Random-walk Metropolis targeting a standard normal (continuous;
    /// simulation only, no exact analysis).
    RwmNormal {
        /// Dimension of the state space.
        dim: usize,
    },
}

/// Adaptation schedule exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSection {
    /// β > 0; windows grow like ⌈m^β⌉.
    pub beta: f64,
}

/// Update rule selection.
#[derive(Debug, Clone, PartialEq)]
pub enum AdaptationSection {
    /// Install the m-th listed parameter at the m-th adaptation.
    FixedSequence {
        /// Parameter literals by adaptation index; entry 0 is conventionally
        /// the initial parameter.
        values: Vec<ParamLiteral>,
        /// Wrap around instead of holding the last entry.
        cycle: bool,
    },
    /// Robbins-Monro acceptance-rate targeting.
    AcceptanceTargeting {
        /// Target acceptance rate in (0, 1).
        target: f64,
        /// Gain decay exponent.
        gain_exponent: f64,
        /// Lower clamp for the scalar parameter.
        lower: f64,
        /// Upper clamp for the scalar parameter.
        upper: f64,
    },
    /// Variance matching on the cumulative history.
    EmpiricalMoment {
        /// Multiplier on the regularised variance.
        scale: f64,
        /// Additive regulariser.
        ridge: f64,
        /// Lower clamp for the scalar parameter.
        lower: f64,
        /// Upper clamp for the scalar parameter.
        upper: f64,
    },
    /// The deterministic stuck-chain sequence for the strong-law
    /// counterexample study.
    Counterexample {
        /// Number of scheduled adaptations the sequence covers.
        adaptations: u64,
    },
}

/// A parameter literal: scalar or grid index.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamLiteral {
    /// A scalar parameter.
    Scalar(f64),
    /// A grid index parameter.
    Index(usize),
}

impl ParamLiteral {
    /// Convert to a kernel parameter.
    pub fn to_param(&self) -> Param {
        match self {
            ParamLiteral::Scalar(x) => Param::Scalar(*x),
            ParamLiteral::Index(i) => Param::Index(*i),
        }
    }

    /// Re-express a kernel parameter as a literal. Matrix-valued parameters
    /// have no text form.
    pub fn from_param(param: &Param) -> Result<Self> {
        match param {
            Param::Scalar(x) => Ok(ParamLiteral::Scalar(*x)),
            Param::Index(i) => Ok(ParamLiteral::Index(*i)),
            other => Err(config_err(format!(
                "parameter {other:?} has no text literal form"
            ))),
        }
    }

    /// Parse a literal: a bare float or `index:k`.
    pub fn parse(raw: &str) -> Result<Self> {
        parse_param_literal("param", raw)
    }

    /// The canonical text form, exactly re-parseable.
    pub fn to_text(&self) -> String {
        fmt_param(self)
    }
}

/// Initial-state literal.
#[derive(Debug, Clone, PartialEq)]
pub enum StateLiteral {
    /// A labelled point of a finite space.
    Label(usize),
    /// A coordinate vector.
    Coords(Vec<f64>),
}

impl StateLiteral {
    /// Convert to a point of the state space.
    pub fn to_point(&self) -> Point {
        match self {
            StateLiteral::Label(i) => Point::Label(*i),
            StateLiteral::Coords(v) => Point::Coords(v.clone()),
        }
    }

    /// Re-express a point as a literal.
    pub fn from_point(point: &Point) -> Self {
        match point {
            Point::Label(i) => StateLiteral::Label(*i),
            Point::Coords(v) => StateLiteral::Coords(v.clone()),
        }
    }

    /// Parse a literal: `label:k` or `coords:x1,x2,...`.
    pub fn parse(raw: &str) -> Result<Self> {
        parse_state_literal("state", raw)
    }

    /// The canonical text form, exactly re-parseable.
    pub fn to_text(&self) -> String {
        match self {
            StateLiteral::Label(i) => format!("label:{i}"),
            StateLiteral::Coords(v) => format!("coords:{}", fmt_f64_list(v)),
        }
    }
}

/// Integrand selection.
#[derive(Debug, Clone, PartialEq)]
pub enum IntegrandKind {
    /// Indicator of one labelled state.
    Indicator(usize),
    /// Label index as a float, or the first coordinate.
    Identity,
    /// One coordinate of a continuous state (0 for labelled states).
    Coordinate(usize),
}

impl IntegrandKind {
    /// Parse a literal: `indicator:k`, `identity`, or `coordinate:k`.
    pub fn parse(raw: &str) -> Result<Self> {
        parse_integrand("integrand", raw)
    }

    /// The canonical text form, exactly re-parseable.
    pub fn to_text(&self) -> String {
        match self {
            IntegrandKind::Indicator(i) => format!("indicator:{i}"),
            IntegrandKind::Identity => "identity".into(),
            IntegrandKind::Coordinate(i) => format!("coordinate:{i}"),
        }
    }

    /// The integrand as a callable state function.
    pub fn to_fn(&self) -> StateFn {
        match self {
            IntegrandKind::Indicator(target) => {
                let target = *target;
                Arc::new(move |y: &AugmentedState| match &y.x {
                    Point::Label(i) if *i == target => 1.0,
                    _ => 0.0,
                })
            }
            IntegrandKind::Identity => Arc::new(|y: &AugmentedState| match &y.x {
                Point::Label(i) => *i as f64,
                Point::Coords(v) => v.first().copied().unwrap_or(0.0),
            }),
            IntegrandKind::Coordinate(k) => {
                let k = *k;
                Arc::new(move |y: &AugmentedState| match &y.x {
                    Point::Coords(v) => v.get(k).copied().unwrap_or(0.0),
                    Point::Label(_) => 0.0,
                })
            }
        }
    }
}

/// Run geometry: horizon, replication plan, seeds, initial data, integrand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    /// Horizon N ≥ 2.
    pub horizon: u64,
    /// Replication count R ≥ 1.
    pub replications: u64,
    /// Master seed.
    pub seed: u64,
    /// Initial chain state.
    pub initial_state: StateLiteral,
    /// Initial auxiliary region index.
    pub region: usize,
    /// Initial parameter Γ₀.
    pub initial_param: ParamLiteral,
    /// Integrand f.
    pub integrand: IntegrandKind,
    /// Exact ν(f), when known; rate diagnostics require it.
    pub nu_f: Option<f64>,
}

/// Rate selection.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSection {
    /// Functional form.
    pub kind: RateKind,
    /// Excess exponent ε > 0.
    pub epsilon: f64,
}

/// Output naming.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    /// File-name stem for study and trajectory outputs.
    pub prefix: String,
    /// Whether `run` writes the full trajectory file.
    pub trajectory: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            prefix: "study".into(),
            trajectory: false,
        }
    }
}

/// Grids for a theorem-admissibility sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    /// Schedule exponents to scan.
    pub betas: Vec<f64>,
    /// Rate excess exponents to scan.
    pub epsilons: Vec<f64>,
    /// Moment order p for the moment-regime hypothesis.
    pub moment_p: Option<f64>,
    /// Waning exponent ρ for the waning-adaptation hypothesis.
    pub rho: Option<f64>,
}

/// A fully parsed and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Kernel family.
    pub kernel: KernelSection,
    /// Schedule exponent.
    pub schedule: ScheduleSection,
    /// Update rule.
    pub adaptation: AdaptationSection,
    /// Run geometry.
    pub run: RunSection,
    /// Diagnostic rate.
    pub rate: RateSection,
    /// Output naming.
    pub output: OutputSection,
    /// Optional sweep grids.
    pub sweep: Option<SweepSection>,
}

fn config_err(msg: impl Into<String>) -> AirError {
    AirError::Config(msg.into())
}

/// One section's raw key-value entries, consumed key by key so leftovers
/// can be reported as unknown.
struct SectionMap {
    name: &'static str,
    entries: BTreeMap<String, String>,
}

impl SectionMap {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| config_err(format!("missing required key '{}.{key}'", self.name)))
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(config_err(format!("unknown key '{}.{key}'", self.name)));
        }
        Ok(())
    }
}

fn parse_f64(path: &str, raw: &str) -> Result<f64> {
    let value: f64 = raw
        .parse()
        .map_err(|_| config_err(format!("{path}: expected a number, got '{raw}'")))?;
    if !value.is_finite() {
        return Err(config_err(format!("{path}: value must be finite, got '{raw}'")));
    }
    Ok(value)
}

fn parse_u64(path: &str, raw: &str) -> Result<u64> {
    raw.parse()
        .map_err(|_| config_err(format!("{path}: expected a non-negative integer, got '{raw}'")))
}

fn parse_usize(path: &str, raw: &str) -> Result<usize> {
    raw.parse()
        .map_err(|_| config_err(format!("{path}: expected a non-negative integer, got '{raw}'")))
}

fn parse_bool(path: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(config_err(format!(
            "{path}: expected 'true' or 'false', got '{raw}'"
        ))),
    }
}

fn parse_f64_list(path: &str, raw: &str) -> Result<Vec<f64>> {
    if raw.trim().is_empty() {
        return Err(config_err(format!("{path}: list must be nonempty")));
    }
    raw.split(',')
        .map(|piece| parse_f64(path, piece.trim()))
        .collect()
}

fn parse_param_literal(path: &str, raw: &str) -> Result<ParamLiteral> {
    if let Some(rest) = raw.strip_prefix("index:") {
        return Ok(ParamLiteral::Index(parse_usize(path, rest.trim())?));
    }
    Ok(ParamLiteral::Scalar(parse_f64(path, raw)?))
}

fn parse_state_literal(path: &str, raw: &str) -> Result<StateLiteral> {
    if let Some(rest) = raw.strip_prefix("label:") {
        return Ok(StateLiteral::Label(parse_usize(path, rest.trim())?));
    }
    if let Some(rest) = raw.strip_prefix("coords:") {
        return Ok(StateLiteral::Coords(parse_f64_list(path, rest)?));
    }
    Err(config_err(format!(
        "{path}: expected 'label:k' or 'coords:x1,x2,...', got '{raw}'"
    )))
}

fn parse_integrand(path: &str, raw: &str) -> Result<IntegrandKind> {
    if raw == "identity" {
        return Ok(IntegrandKind::Identity);
    }
    if let Some(rest) = raw.strip_prefix("indicator:") {
        return Ok(IntegrandKind::Indicator(parse_usize(path, rest.trim())?));
    }
    if let Some(rest) = raw.strip_prefix("coordinate:") {
        return Ok(IntegrandKind::Coordinate(parse_usize(path, rest.trim())?));
    }
    Err(config_err(format!(
        "{path}: expected 'indicator:k', 'identity', or 'coordinate:k', got '{raw}'"
    )))
}

/// Split raw text into per-section key-value maps, enforcing structure:
/// known section names, no duplicate sections or keys, no keys before the
/// first header.
fn split_sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    const KNOWN: [&str; 7] = [
        "kernel",
        "schedule",
        "adaptation",
        "run",
        "rate",
        "output",
        "sweep",
    ];
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(config_err(format!(
                    "line {line_no}: malformed section header '{trimmed}'"
                )));
            };
            let name = name.trim();
            if !KNOWN.contains(&name) {
                return Err(config_err(format!(
                    "line {line_no}: unknown section '[{name}]'"
                )));
            }
            if sections.contains_key(name) {
                return Err(config_err(format!(
                    "line {line_no}: duplicate section '[{name}]'"
                )));
            }
            sections.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(config_err(format!(
                "line {line_no}: expected 'key = value', got '{trimmed}'"
            )));
        };
        let Some(section) = &current else {
            return Err(config_err(format!(
                "line {line_no}: key outside any [section]"
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(config_err(format!("line {line_no}: empty key")));
        }
        let entries = sections.get_mut(section).expect("tracked section");
        if entries.insert(key.clone(), value).is_some() {
            return Err(config_err(format!(
                "line {line_no}: duplicate key '{section}.{key}'"
            )));
        }
    }
    Ok(sections)
}

fn take_section(
    sections: &mut BTreeMap<String, BTreeMap<String, String>>,
    name: &'static str,
) -> Result<SectionMap> {
    let entries = sections
        .remove(name)
        .ok_or_else(|| config_err(format!("missing required section '[{name}]'")))?;
    Ok(SectionMap { name, entries })
}

fn parse_kernel(mut s: SectionMap) -> Result<KernelSection> {
    let family = s.require("family")?;
    let parsed = match family.as_str() {
        "two_state" => KernelSection::TwoState,
        "doeblin" => {
            let states = parse_usize("kernel.states", &s.require("states")?)?;
            let alpha = parse_f64("kernel.alpha", &s.require("alpha")?)?;
            let grid = parse_usize("kernel.grid", &s.require("grid")?)?;
            let kernel_seed = parse_u64("kernel.kernel_seed", &s.require("kernel_seed")?)?;
            if states < 2 {
                return Err(config_err("kernel.states must be at least 2"));
            }
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(config_err(format!(
                    "kernel.alpha must lie in (0, 1], got {alpha}"
                )));
            }
            if grid == 0 {
                return Err(config_err("kernel.grid must be at least 1"));
            }
            KernelSection::Doeblin {
                states,
                alpha,
                grid,
                kernel_seed,
            }
        }
        "grid_metropolis" => {
            let log_weights = parse_f64_list("kernel.log_weights", &s.require("log_weights")?)?;
            let max_width = parse_usize("kernel.max_width", &s.require("max_width")?)?;
            if log_weights.len() < 2 {
                return Err(config_err("kernel.log_weights needs at least 2 entries"));
            }
            if max_width == 0 {
                return Err(config_err("kernel.max_width must be at least 1"));
            }
            KernelSection::GridMetropolis {
                log_weights,
                max_width,
            }
        }
        "rwm_normal" => {
            let dim = parse_usize("kernel.dim", &s.require("dim")?)?;
            if dim == 0 {
                return Err(config_err("kernel.dim must be at least 1"));
            }
            KernelSection::RwmNormal { dim }
        }
        other => {
            return Err(config_err(format!(
                "kernel.family: unknown family '{other}'"
            )))
        }
    };
    s.finish()?;
    Ok(parsed)
}

fn parse_schedule(mut s: SectionMap) -> Result<ScheduleSection> {
    let beta = parse_f64("schedule.beta", &s.require("beta")?)?;
    if !(beta > 0.0) {
        return Err(config_err(format!("schedule.beta must be > 0, got {beta}")));
    }
    s.finish()?;
    Ok(ScheduleSection { beta })
}

fn parse_adaptation(mut s: SectionMap) -> Result<AdaptationSection> {
    let rule = s.require("rule")?;
    let parsed = match rule.as_str() {
        "fixed_sequence" => {
            let raw = s.require("values")?;
            if raw.trim().is_empty() {
                return Err(config_err("adaptation.values: list must be nonempty"));
            }
            let values = raw
                .split(',')
                .map(|piece| parse_param_literal("adaptation.values", piece.trim()))
                .collect::<Result<Vec<_>>>()?;
            let cycle = match s.take("cycle") {
                Some(raw) => parse_bool("adaptation.cycle", &raw)?,
                None => false,
            };
            AdaptationSection::FixedSequence { values, cycle }
        }
        "acceptance_targeting" => {
            let target = parse_f64("adaptation.target", &s.require("target")?)?;
            let gain_exponent =
                parse_f64("adaptation.gain_exponent", &s.require("gain_exponent")?)?;
            let lower = parse_f64("adaptation.lower", &s.require("lower")?)?;
            let upper = parse_f64("adaptation.upper", &s.require("upper")?)?;
            if !(target > 0.0 && target < 1.0) {
                return Err(config_err(format!(
                    "adaptation.target must lie in (0, 1), got {target}"
                )));
            }
            ParamBox::new(lower, upper).map_err(|e| config_err(format!("adaptation: {e}")))?;
            AdaptationSection::AcceptanceTargeting {
                target,
                gain_exponent,
                lower,
                upper,
            }
        }
        "empirical_moment" => {
            let scale = parse_f64("adaptation.scale", &s.require("scale")?)?;
            let ridge = parse_f64("adaptation.ridge", &s.require("ridge")?)?;
            let lower = parse_f64("adaptation.lower", &s.require("lower")?)?;
            let upper = parse_f64("adaptation.upper", &s.require("upper")?)?;
            if !(scale > 0.0) {
                return Err(config_err(format!(
                    "adaptation.scale must be > 0, got {scale}"
                )));
            }
            if !(ridge >= 0.0) {
                return Err(config_err(format!(
                    "adaptation.ridge must be >= 0, got {ridge}"
                )));
            }
            ParamBox::new(lower, upper).map_err(|e| config_err(format!("adaptation: {e}")))?;
            AdaptationSection::EmpiricalMoment {
                scale,
                ridge,
                lower,
                upper,
            }
        }
        "counterexample" => {
            let adaptations = parse_u64("adaptation.adaptations", &s.require("adaptations")?)?;
            if adaptations == 0 {
                return Err(config_err("adaptation.adaptations must be at least 1"));
            }
            AdaptationSection::Counterexample { adaptations }
        }
        other => {
            return Err(config_err(format!(
                "adaptation.rule: unknown rule '{other}'"
            )))
        }
    };
    s.finish()?;
    Ok(parsed)
}

fn parse_run(mut s: SectionMap) -> Result<RunSection> {
    let horizon = parse_u64("run.horizon", &s.require("horizon")?)?;
    if horizon < 2 {
        return Err(config_err(format!(
            "run.horizon must be at least 2, got {horizon}"
        )));
    }
    let replications = match s.take("replications") {
        Some(raw) => parse_u64("run.replications", &raw)?,
        None => 1,
    };
    if replications == 0 {
        return Err(config_err("run.replications must be at least 1"));
    }
    let seed = parse_u64("run.seed", &s.require("seed")?)?;
    let initial_state = parse_state_literal("run.initial_state", &s.require("initial_state")?)?;
    let region = match s.take("region") {
        Some(raw) => parse_usize("run.region", &raw)?,
        None => 0,
    };
    let initial_param = parse_param_literal("run.initial_param", &s.require("initial_param")?)?;
    let integrand = parse_integrand("run.integrand", &s.require("integrand")?)?;
    let nu_f = match s.take("nu_f") {
        Some(raw) => Some(parse_f64("run.nu_f", &raw)?),
        None => None,
    };
    s.finish()?;
    Ok(RunSection {
        horizon,
        replications,
        seed,
        initial_state,
        region,
        initial_param,
        integrand,
        nu_f,
    })
}

fn parse_rate(mut s: SectionMap) -> Result<RateSection> {
    let kind = match s.require("kind")?.as_str() {
        "sqrt_log" => RateKind::SqrtLog,
        "poly" => RateKind::Poly,
        other => {
            return Err(config_err(format!(
                "rate.kind: expected 'sqrt_log' or 'poly', got '{other}'"
            )))
        }
    };
    let epsilon = parse_f64("rate.epsilon", &s.require("epsilon")?)?;
    if !(epsilon > 0.0) {
        return Err(config_err(format!(
            "rate.epsilon must be > 0, got {epsilon}"
        )));
    }
    s.finish()?;
    Ok(RateSection { kind, epsilon })
}

fn parse_output(mut s: SectionMap) -> Result<OutputSection> {
    let default = OutputSection::default();
    let prefix = s.take("prefix").unwrap_or(default.prefix);
    if prefix.is_empty() || prefix.contains(['/', '\\']) {
        return Err(config_err(format!(
            "output.prefix must be a bare file stem, got '{prefix}'"
        )));
    }
    let trajectory = match s.take("trajectory") {
        Some(raw) => parse_bool("output.trajectory", &raw)?,
        None => default.trajectory,
    };
    s.finish()?;
    Ok(OutputSection { prefix, trajectory })
}

fn parse_sweep(mut s: SectionMap) -> Result<SweepSection> {
    let betas = parse_f64_list("sweep.betas", &s.require("betas")?)?;
    let epsilons = parse_f64_list("sweep.epsilons", &s.require("epsilons")?)?;
    for &beta in &betas {
        if !(beta > 0.0) {
            return Err(config_err(format!("sweep.betas must be > 0, got {beta}")));
        }
    }
    for &epsilon in &epsilons {
        if !(epsilon > 0.0) {
            return Err(config_err(format!(
                "sweep.epsilons must be > 0, got {epsilon}"
            )));
        }
    }
    let moment_p = match s.take("moment_p") {
        Some(raw) => {
            let p = parse_f64("sweep.moment_p", &raw)?;
            if !(p > 2.0) {
                return Err(config_err(format!(
                    "sweep.moment_p must be > 2, got {p}"
                )));
            }
            Some(p)
        }
        None => None,
    };
    let rho = match s.take("rho") {
        Some(raw) => {
            let r = parse_f64("sweep.rho", &raw)?;
            if !(r > 0.0 && r < 1.0) {
                return Err(config_err(format!(
                    "sweep.rho must lie in (0, 1), got {r}"
                )));
            }
            Some(r)
        }
        None => None,
    };
    s.finish()?;
    Ok(SweepSection {
        betas,
        epsilons,
        moment_p,
        rho,
    })
}

/// Parse and fully validate a configuration. Strict: unknown sections,
/// unknown keys, duplicates, and out-of-range values are all errors.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut sections = split_sections(text)?;
    let kernel = parse_kernel(take_section(&mut sections, "kernel")?)?;
    let schedule = parse_schedule(take_section(&mut sections, "schedule")?)?;
    let adaptation = parse_adaptation(take_section(&mut sections, "adaptation")?)?;
    let run = parse_run(take_section(&mut sections, "run")?)?;
    let rate = parse_rate(take_section(&mut sections, "rate")?)?;
    let output = match sections.remove("output") {
        Some(entries) => parse_output(SectionMap {
            name: "output",
            entries,
        })?,
        None => OutputSection::default(),
    };
    let sweep = match sections.remove("sweep") {
        Some(entries) => Some(parse_sweep(SectionMap {
            name: "sweep",
            entries,
        })?),
        None => None,
    };
    let config = Config {
        kernel,
        schedule,
        adaptation,
        run,
        rate,
        output,
        sweep,
    };
    cross_validate(&config)?;
    Ok(config)
}

/// Checks spanning more than one section.
fn cross_validate(config: &Config) -> Result<()> {
    let finite_states = match &config.kernel {
        KernelSection::TwoState => Some(2),
        KernelSection::Doeblin { states, .. } => Some(*states),
        KernelSection::GridMetropolis { log_weights, .. } => Some(log_weights.len()),
        KernelSection::RwmNormal { .. } => None,
    };
    match (&config.run.initial_state, finite_states) {
        (StateLiteral::Label(i), Some(n)) if *i >= n => {
            return Err(config_err(format!(
                "run.initial_state: label {i} outside the {n}-state space"
            )));
        }
        (StateLiteral::Coords(_), Some(_)) => {
            return Err(config_err(
                "run.initial_state: finite kernels need 'label:k', not coordinates",
            ));
        }
        (StateLiteral::Label(_), None) => {
            return Err(config_err(
                "run.initial_state: continuous kernels need 'coords:...', not a label",
            ));
        }
        (StateLiteral::Coords(v), None) => {
            if let KernelSection::RwmNormal { dim } = &config.kernel {
                if v.len() != *dim {
                    return Err(config_err(format!(
                        "run.initial_state: expected {dim} coordinates, got {}",
                        v.len()
                    )));
                }
            }
        }
        _ => {}
    }
    if let (IntegrandKind::Indicator(i), Some(n)) = (&config.run.integrand, finite_states) {
        if *i >= n {
            return Err(config_err(format!(
                "run.integrand: indicator label {i} outside the {n}-state space"
            )));
        }
    }
    if let AdaptationSection::Counterexample { adaptations } = &config.adaptation {
        let sched = AirSchedule::new(config.schedule.beta)
            .map_err(|e| config_err(format!("schedule: {e}")))?;
        let t_last = sched
            .adaptation_time(*adaptations)
            .map_err(|e| config_err(format!("adaptation.adaptations: {e}")))?;
        if config.run.horizon < t_last {
            return Err(config_err(format!(
                "run.horizon {} ends before the last scheduled adaptation T_{adaptations} = {t_last}",
                config.run.horizon
            )));
        }
    }
    Ok(())
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_f64_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn fmt_param(p: &ParamLiteral) -> String {
    match p {
        ParamLiteral::Scalar(x) => fmt_f64(*x),
        ParamLiteral::Index(i) => format!("index:{i}"),
    }
}

/// Canonical serialisation: fixed section and key order, every applied
/// default written out, shortest round-tripping float representations.
pub fn serialize(config: &Config) -> String {
    let mut out = String::new();
    out.push_str("[kernel]\n");
    match &config.kernel {
        KernelSection::TwoState => {
            out.push_str("family = two_state\n");
        }
        KernelSection::Doeblin {
            states,
            alpha,
            grid,
            kernel_seed,
        } => {
            out.push_str("family = doeblin\n");
            out.push_str(&format!("states = {states}\n"));
            out.push_str(&format!("alpha = {}\n", fmt_f64(*alpha)));
            out.push_str(&format!("grid = {grid}\n"));
            out.push_str(&format!("kernel_seed = {kernel_seed}\n"));
        }
        KernelSection::GridMetropolis {
            log_weights,
            max_width,
        } => {
            out.push_str("family = grid_metropolis\n");
            out.push_str(&format!("log_weights = {}\n", fmt_f64_list(log_weights)));
            out.push_str(&format!("max_width = {max_width}\n"));
        }
        KernelSection::RwmNormal { dim } => {
            out.push_str("family = rwm_normal\n");
            out.push_str(&format!("dim = {dim}\n"));
        }
    }
    out.push_str("\n[schedule]\n");
    out.push_str(&format!("beta = {}\n", fmt_f64(config.schedule.beta)));
    out.push_str("\n[adaptation]\n");
    match &config.adaptation {
        AdaptationSection::FixedSequence { values, cycle } => {
            out.push_str("rule = fixed_sequence\n");
            out.push_str(&format!(
                "values = {}\n",
                values.iter().map(fmt_param).collect::<Vec<_>>().join(",")
            ));
            out.push_str(&format!("cycle = {cycle}\n"));
        }
        AdaptationSection::AcceptanceTargeting {
            target,
            gain_exponent,
            lower,
            upper,
        } => {
            out.push_str("rule = acceptance_targeting\n");
            out.push_str(&format!("target = {}\n", fmt_f64(*target)));
            out.push_str(&format!("gain_exponent = {}\n", fmt_f64(*gain_exponent)));
            out.push_str(&format!("lower = {}\n", fmt_f64(*lower)));
            out.push_str(&format!("upper = {}\n", fmt_f64(*upper)));
        }
        AdaptationSection::EmpiricalMoment {
            scale,
            ridge,
            lower,
            upper,
        } => {
            out.push_str("rule = empirical_moment\n");
            out.push_str(&format!("scale = {}\n", fmt_f64(*scale)));
            out.push_str(&format!("ridge = {}\n", fmt_f64(*ridge)));
            out.push_str(&format!("lower = {}\n", fmt_f64(*lower)));
            out.push_str(&format!("upper = {}\n", fmt_f64(*upper)));
        }
        AdaptationSection::Counterexample { adaptations } => {
            out.push_str("rule = counterexample\n");
            out.push_str(&format!("adaptations = {adaptations}\n"));
        }
    }
    out.push_str("\n[run]\n");
    out.push_str(&format!("horizon = {}\n", config.run.horizon));
    out.push_str(&format!("replications = {}\n", config.run.replications));
    out.push_str(&format!("seed = {}\n", config.run.seed));
    out.push_str(&format!(
        "initial_state = {}\n",
        config.run.initial_state.to_text()
    ));
    out.push_str(&format!("region = {}\n", config.run.region));
    out.push_str(&format!(
        "initial_param = {}\n",
        fmt_param(&config.run.initial_param)
    ));
    match &config.run.integrand {
        IntegrandKind::Indicator(i) => out.push_str(&format!("integrand = indicator:{i}\n")),
        IntegrandKind::Identity => out.push_str("integrand = identity\n"),
        IntegrandKind::Coordinate(i) => out.push_str(&format!("integrand = coordinate:{i}\n")),
    }
    if let Some(nu_f) = config.run.nu_f {
        out.push_str(&format!("nu_f = {}\n", fmt_f64(nu_f)));
    }
    out.push_str("\n[rate]\n");
    out.push_str(&format!(
        "kind = {}\n",
        match config.rate.kind {
            RateKind::SqrtLog => "sqrt_log",
            RateKind::Poly => "poly",
        }
    ));
    out.push_str(&format!("epsilon = {}\n", fmt_f64(config.rate.epsilon)));
    out.push_str("\n[output]\n");
    out.push_str(&format!("prefix = {}\n", config.output.prefix));
    out.push_str(&format!("trajectory = {}\n", config.output.trajectory));
    if let Some(sweep) = &config.sweep {
        out.push_str("\n[sweep]\n");
        out.push_str(&format!("betas = {}\n", fmt_f64_list(&sweep.betas)));
        out.push_str(&format!("epsilons = {}\n", fmt_f64_list(&sweep.epsilons)));
        if let Some(p) = sweep.moment_p {
            out.push_str(&format!("moment_p = {}\n", fmt_f64(p)));
        }
        if let Some(rho) = sweep.rho {
            out.push_str(&format!("rho = {}\n", fmt_f64(rho)));
        }
    }
    out
}

/// SHA-256 of the canonical serialisation, as lowercase hex. This is the
/// hash stamped into output manifests.
pub fn config_hash(config: &Config) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serialize(config).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Config {
    /// Construct the kernel family this configuration names.
    pub fn build_family(&self) -> Result<KernelFamily> {
        match &self.kernel {
            KernelSection::TwoState => Ok(two_state_family()),
            KernelSection::Doeblin {
                states,
                alpha,
                grid,
                kernel_seed,
            } => doeblin_family(*states, *alpha, *grid, *kernel_seed),
            KernelSection::GridMetropolis {
                log_weights,
                max_width,
            } => grid_metropolis_family(log_weights.clone(), *max_width),
            KernelSection::RwmNormal { dim } => {
                let logpi = Arc::new(|x: &[f64]| -0.5 * x.iter().map(|c| c * c).sum::<f64>());
                Ok(rwm_family(logpi, *dim))
            }
        }
    }

    /// Construct the update rule this configuration names.
    pub fn build_rule(&self) -> Result<UpdateRule> {
        match &self.adaptation {
            AdaptationSection::FixedSequence { values, cycle } => Ok(UpdateRule::FixedSequence {
                values: values.iter().map(ParamLiteral::to_param).collect(),
                cycle: *cycle,
            }),
            AdaptationSection::AcceptanceTargeting {
                target,
                gain_exponent,
                lower,
                upper,
            } => Ok(UpdateRule::AcceptanceTargeting {
                target: *target,
                gain_exponent: *gain_exponent,
                bounds: ParamBox::new(*lower, *upper)?,
            }),
            AdaptationSection::EmpiricalMoment {
                scale,
                ridge,
                lower,
                upper,
            } => Ok(UpdateRule::EmpiricalMoment {
                scale: *scale,
                ridge: *ridge,
                bounds: ParamBox::new(*lower, *upper)?,
            }),
            AdaptationSection::Counterexample { adaptations } => {
                let sched = AirSchedule::new(self.schedule.beta)?;
                counterexample_rule(&sched, *adaptations)
            }
        }
    }

    /// Construct the integrand this configuration names.
    pub fn build_integrand(&self) -> StateFn {
        self.run.integrand.to_fn()
    }

    /// The initial augmented state.
    pub fn build_initial_state(&self) -> AugmentedState {
        let x = match &self.run.initial_state {
            StateLiteral::Label(i) => Point::Label(*i),
            StateLiteral::Coords(v) => Point::Coords(v.clone()),
        };
        AugmentedState {
            x,
            phi: self.run.region,
        }
    }

    /// Bridge to an executable run configuration.
    pub fn to_run_config(&self) -> Result<RunConfig> {
        let config = RunConfig {
            family: self.build_family()?,
            rule: self.build_rule()?,
            beta: self.schedule.beta,
            y0: self.build_initial_state(),
            gamma0: self.run.initial_param.to_param(),
            horizon: self.run.horizon,
            f: self.build_integrand(),
            nu_f: self.run.nu_f,
            rate: RateSpec::new(self.rate.kind, self.rate.epsilon)?,
            replications: self.run.replications,
            master_seed: self.run.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// The minimal two-state configuration text used in documentation and
/// round-trip tests.
pub fn example_config_text() -> &'static str {
    "\
# Two-state AIR run: flip chain, fixed parameter sequence.
[kernel]
family = two_state

[schedule]
beta = 1.0

[adaptation]
rule = fixed_sequence
values = 0.25,0.4
cycle = false

[run]
horizon = 1000
replications = 8
seed = 20240817
initial_state = label:0
initial_param = 0.25
integrand = indicator:0
nu_f = 0.5

[rate]
kind = sqrt_log
epsilon = 0.5
"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_two_state_config_parses() {
        let config = parse_config(example_config_text()).unwrap();
        assert_eq!(config.kernel, KernelSection::TwoState);
        assert_eq!(config.schedule.beta, 1.0);
        assert_eq!(config.run.horizon, 1000);
        assert_eq!(config.run.replications, 8);
        assert_eq!(config.run.nu_f, Some(0.5));
        assert_eq!(config.output, OutputSection::default());
        assert!(config.sweep.is_none());
        let run = config.to_run_config().unwrap();
        assert_eq!(run.horizon, 1000);
        assert_eq!(run.master_seed, 20240817);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut config = parse_config(example_config_text()).unwrap();
        assert_eq!(parse_config(&serialize(&config)).unwrap(), config);
        config.sweep = Some(SweepSection {
            betas: vec![0.5, 1.0, 2.0],
            epsilons: vec![0.05, 0.3],
            moment_p: Some(4.0),
            rho: None,
        });
        config.run.nu_f = Some(0.1 + 0.2);
        config.rate = RateSection {
            kind: RateKind::Poly,
            epsilon: 1.0 / 3.0,
        };
        assert_eq!(parse_config(&serialize(&config)).unwrap(), config);
    }

    #[test]
    fn doeblin_and_grid_configs_round_trip() {
        let text = "\
[kernel]
family = doeblin
states = 5
alpha = 0.5
grid = 8
kernel_seed = 31

[schedule]
beta = 1.0

[adaptation]
rule = fixed_sequence
values = index:0,index:3,index:1
cycle = true

[run]
horizon = 100
seed = 1
initial_state = label:0
initial_param = index:0
integrand = identity

[rate]
kind = poly
epsilon = 0.25
";
        let config = parse_config(text).unwrap();
        assert_eq!(parse_config(&serialize(&config)).unwrap(), config);
        assert!(config.to_run_config().is_ok());

        let text = "\
[kernel]
family = grid_metropolis
log_weights = 0.0,1.0,0.0
max_width = 2

[schedule]
beta = 1.5

[adaptation]
rule = acceptance_targeting
target = 0.44
gain_exponent = 0.6
lower = 0.05
upper = 0.95

[run]
horizon = 500
seed = 2
initial_state = label:1
initial_param = index:1
integrand = identity

[rate]
kind = sqrt_log
epsilon = 0.5
";
        let config = parse_config(text).unwrap();
        assert_eq!(parse_config(&serialize(&config)).unwrap(), config);
    }

    #[test]
    fn unknown_key_is_fatal_with_path() {
        let text = example_config_text().replace("cycle = false", "cycle = false\ngain = 3");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, AirError::Config(msg) if msg.contains("adaptation.gain")),
            "wrong error: {err}"
        );
    }

    #[test]
    fn unknown_section_and_family_are_fatal() {
        let text = format!("{}\n[plotting]\ncolor = red\n", example_config_text());
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, AirError::Config(msg) if msg.contains("plotting")),
            "wrong error: {err}"
        );
        let text = example_config_text().replace("family = two_state", "family = three_state");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, AirError::Config(msg) if msg.contains("three_state")),
            "wrong error: {err}"
        );
    }

    #[test]
    fn boundary_exponents_are_rejected() {
        let text = example_config_text().replace("beta = 1.0", "beta = 0.0");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, AirError::Config(msg) if msg.contains("beta must be > 0")),
            "wrong error: {err}"
        );
        let text = example_config_text().replace("epsilon = 0.5", "epsilon = 0.0");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, AirError::Config(msg) if msg.contains("epsilon must be > 0")),
            "wrong error: {err}"
        );
    }

    #[test]
    fn duplicate_keys_and_sections_are_fatal() {
        let text = example_config_text().replace("beta = 1.0", "beta = 1.0\nbeta = 2.0");
        assert!(parse_config(&text).is_err());
        let text = format!("{}\n[run]\nhorizon = 5\n", example_config_text());
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn missing_required_key_names_the_path() {
        let text = example_config_text().replace("horizon = 1000\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, AirError::Config(msg) if msg.contains("run.horizon")),
            "wrong error: {err}"
        );
    }

    #[test]
    fn state_and_label_mismatches_are_fatal() {
        let text = example_config_text().replace("label:0", "label:7");
        assert!(parse_config(&text).is_err());
        let text = example_config_text().replace("label:0", "coords:0.5");
        assert!(parse_config(&text).is_err());
        let text = example_config_text().replace("indicator:0", "indicator:2");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn counterexample_horizon_must_cover_all_adaptations() {
        let text = example_config_text()
            .replace(
                "rule = fixed_sequence\nvalues = 0.25,0.4\ncycle = false",
                "rule = counterexample\nadaptations = 20",
            )
            .replace("horizon = 1000", "horizon = 100");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, AirError::Config(msg) if msg.contains("T_20 = 210")),
            "wrong error: {err}"
        );
    }

    #[test]
    fn hash_tracks_content_not_formatting() {
        let a = parse_config(example_config_text()).unwrap();
        let spaced = example_config_text().replace("beta = 1.0", "beta   =    1.0");
        let b = parse_config(&spaced).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let changed = example_config_text().replace("seed = 20240817", "seed = 1");
        let c = parse_config(&changed).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn rwm_config_builds_a_continuous_run() {
        let text = "\
[kernel]
family = rwm_normal
dim = 1

[schedule]
beta = 1.0

[adaptation]
rule = acceptance_targeting
target = 0.44
gain_exponent = 0.6
lower = 0.01
upper = 100.0

[run]
horizon = 200
seed = 3
initial_state = coords:0.0
initial_param = 5.66
integrand = identity
nu_f = 0.0

[rate]
kind = sqrt_log
epsilon = 0.5
";
        let config = parse_config(text).unwrap();
        assert_eq!(parse_config(&serialize(&config)).unwrap(), config);
        let run = config.to_run_config().unwrap();
        let output = crate::runner::run_air(&run, 9).unwrap();
        assert_eq!(output.f_values.len(), 200);
    }
}
