//! Output file formats: manifest-stamped study records, replayable
//! trajectory text, and the plain-text matrix loader.
//!
//! Every output file begins with a manifest record carrying the artifact
//! version, the SHA-256 of the canonically serialised configuration, and
//! the master seed, so any result file identifies the exact run that
//! produced it. Study files are line-delimited JSON: the manifest line,
//! one record per replication in replication order, and a closing summary
//! record. Trajectory files are whitespace-delimited text with one row per
//! time step (the manifest rides in a leading comment), and they round-trip
//! exactly so a stored run can be replayed through the martingale
//! decomposition. Matrices are plain text, one whitespace-separated row
//! per line.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{config_hash, Config, ParamLiteral, StateLiteral};
use crate::decomposition::Trajectory;
use crate::error::{AirError, Result};
use crate::geometry::AugmentedState;
use crate::runner::{ReplicationRecord, RunOutput, Study, StudySummary};
use crate::schedule::AirSchedule;

/// Version stamp written into every manifest.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The identifying first record of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Record tag, always `"manifest"`.
    pub record: String,
    /// Artifact version.
    pub version: String,
    /// SHA-256 of the canonical configuration text.
    pub config_sha256: String,
    /// Master seed of the run.
    pub master_seed: u64,
}

impl Manifest {
    /// Manifest for a configuration.
    pub fn new(config: &Config) -> Self {
        Self {
            record: "manifest".into(),
            version: ARTIFACT_VERSION.into(),
            config_sha256: config_hash(config),
            master_seed: config.run.seed,
        }
    }

    /// One JSON line.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serialises")
    }

    /// Parse a manifest line.
    pub fn from_json(line: &str) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(line)
            .map_err(|e| AirError::Config(format!("malformed manifest line: {e}")))?;
        if manifest.record != "manifest" {
            return Err(AirError::Config(format!(
                "first record must be the manifest, got '{}'",
                manifest.record
            )));
        }
        Ok(manifest)
    }
}

/// JSON-safe float: JSON has no NaN, so undefined diagnostics become null.
fn json_f64(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn replication_json(record: &ReplicationRecord) -> Result<String> {
    let value = json!({
        "record": "replication",
        "rep": record.rep,
        "seed": record.seed,
        "c_hat": json_f64(record.c_hat),
        "tail_value": json_f64(record.tail_value),
        "mean_f": json_f64(record.mean_f),
        "stuck": record.stuck,
        "rho_hat": record.rho_hat.map(json_f64),
        "waning": record.waning.iter().map(|&x| json_f64(x)).collect::<Vec<_>>(),
        "final_param": ParamLiteral::from_param(&record.final_param)?.to_text(),
    });
    Ok(value.to_string())
}

fn summary_json(summary: &StudySummary) -> String {
    json!({
        "record": "summary",
        "replications": summary.replications,
        "horizon": summary.horizon,
        "c_hat_mean": json_f64(summary.c_hat_mean),
        "c_hat_median": json_f64(summary.c_hat_median),
        "c_hat_max": json_f64(summary.c_hat_max),
        "tail_abs_median": json_f64(summary.tail_abs_median),
        "tail_abs_q95": json_f64(summary.tail_abs_q95),
        "tail_within_tenth": json_f64(summary.tail_within_tenth),
        "mean_f_mean": json_f64(summary.mean_f_mean),
        "mean_f_se": json_f64(summary.mean_f_se),
        "lln_failure": summary.lln_failure,
        "stuck_fraction": json_f64(summary.stuck_fraction),
        "stuck_se": json_f64(summary.stuck_se),
        "waning_decreasing": summary.waning_decreasing,
        "rho_hat_median": summary.rho_hat_median.map(json_f64),
    })
    .to_string()
}

/// Render a study as JSON lines: manifest, one replication record per line
/// in replication order, then the summary record.
pub fn study_lines(config: &Config, study: &Study) -> Result<Vec<String>> {
    let mut lines = Vec::with_capacity(study.records.len() + 2);
    lines.push(Manifest::new(config).to_json());
    for record in &study.records {
        lines.push(replication_json(record)?);
    }
    lines.push(summary_json(&study.summary));
    Ok(lines)
}

/// The complete study file text.
pub fn study_text(config: &Config, study: &Study) -> Result<String> {
    let mut text = study_lines(config, study)?.join("\n");
    text.push('\n');
    Ok(text)
}

/// Render one run as replayable trajectory text.
///
/// Line 1 carries the manifest in a comment; each following row holds
/// `step state phi window param f`, where `state` and `param` use the
/// canonical literal syntax (`label:1`, `coords:0.5,-0.2`, `0.25`,
/// `index:3`), `window` counts the adaptations completed by that step, and
/// floats print in shortest round-trip form, so reading the file back
/// reproduces the run exactly.
pub fn trajectory_text(config: &Config, output: &RunOutput) -> Result<String> {
    let sched = AirSchedule::new(config.schedule.beta)?;
    let mut text = String::new();
    text.push_str("# manifest ");
    text.push_str(&Manifest::new(config).to_json());
    text.push('\n');
    text.push_str("# columns: step state phi window param f\n");
    for (j, state) in output.trajectory.states.iter().enumerate() {
        let param = ParamLiteral::from_param(&output.trajectory.params[j])?;
        let f_value = if j == 0 {
            0.0
        } else {
            output.f_values[j - 1]
        };
        text.push_str(&format!(
            "{j} {} {} {} {} {:?}\n",
            StateLiteral::from_point(&state.x).to_text(),
            state.phi,
            sched.completed_adaptations(j as u64)?,
            param.to_text(),
            f_value,
        ));
    }
    Ok(text)
}

/// A trajectory read back from text: the replayable state/parameter path,
/// the integrand stream, and the identifying manifest.
#[derive(Debug, Clone)]
pub struct StoredTrajectory {
    /// States and installed parameters over 0..=N.
    pub trajectory: Trajectory,
    /// `f` values for steps 1..=N as written.
    pub f_values: Vec<f64>,
    /// The manifest stamped at write time.
    pub manifest: Manifest,
}

/// Parse trajectory text produced by [`trajectory_text`].
pub fn read_trajectory(text: &str) -> Result<StoredTrajectory> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| AirError::Config("empty trajectory file".into()))?;
    let manifest_json = first.strip_prefix("# manifest ").ok_or_else(|| {
        AirError::Config("trajectory file must begin with '# manifest {...}'".into())
    })?;
    let manifest = Manifest::from_json(manifest_json)?;
    let mut states = Vec::new();
    let mut params = Vec::new();
    let mut f_values = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(AirError::Config(format!(
                "trajectory line {line_no}: expected 6 columns, got {}",
                fields.len()
            )));
        }
        let step: usize = fields[0].parse().map_err(|_| {
            AirError::Config(format!("trajectory line {line_no}: bad step '{}'", fields[0]))
        })?;
        if step != states.len() {
            return Err(AirError::Config(format!(
                "trajectory line {line_no}: step {step} out of order (expected {})",
                states.len()
            )));
        }
        let point = StateLiteral::parse(fields[1])?.to_point();
        let phi: usize = fields[2].parse().map_err(|_| {
            AirError::Config(format!(
                "trajectory line {line_no}: bad region '{}'",
                fields[2]
            ))
        })?;
        let param = ParamLiteral::parse(fields[4])?.to_param();
        let f_value: f64 = fields[5].parse().map_err(|_| {
            AirError::Config(format!(
                "trajectory line {line_no}: bad f value '{}'",
                fields[5]
            ))
        })?;
        states.push(AugmentedState { x: point, phi });
        params.push(param);
        if step > 0 {
            f_values.push(f_value);
        }
    }
    Ok(StoredTrajectory {
        trajectory: Trajectory::new(states, params)?,
        f_values,
        manifest,
    })
}

/// Parse a plain-text matrix: one whitespace-separated row per line, `#`
/// comments and blank lines skipped. The matrix must be square and
/// nonempty; stochasticity is the caller's concern.
pub fn load_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split_whitespace()
            .map(|piece| {
                piece.parse::<f64>().map_err(|_| {
                    AirError::Config(format!(
                        "matrix line {line_no}: bad entry '{piece}'"
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(previous) = rows.first() {
            if row.len() != previous.len() {
                return Err(AirError::Config(format!(
                    "matrix line {line_no}: {} entries, expected {}",
                    row.len(),
                    previous.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(AirError::Config("matrix file has no rows".into()));
    }
    let n = rows.len();
    if rows[0].len() != n {
        return Err(AirError::Config(format!(
            "matrix must be square, got {n} rows of {} entries",
            rows[0].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Render a matrix in the plain-text format, full float precision.
pub fn matrix_text(matrix: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| format!("{:?}", matrix[(i, j)]))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
