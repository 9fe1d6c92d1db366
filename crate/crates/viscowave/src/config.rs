//! TOML run configuration: strict schema, defaulting, and assembly of the
//! discrete system it describes.
//!
//! Unknown keys are rejected so a typo cannot silently fall back to a
//! default. Loading resolves every optional quantity (time step, history
//! span) to a concrete value, and the resolved configuration is embedded in
//! every output file the commands write.

use crate::analysis::Formulation;
use crate::dynamics::{InitialData, Past, WaveSystem};
use crate::error::{Error, Result};
use crate::history::AgeGrid;
use crate::kernel::{Kernel, DEFAULT_TAIL_TOLERANCE};
use crate::mesh::{DiscreteOperators, Mesh};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub history: HistorySection,
    pub time: TimeSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

/// Memory kernel selection: `type` is "exponential" (fields a, b), "sampled"
/// (fields file, zeta0, zeta1), or "zero".
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta1: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n_cells: usize,
}

/// Age discretization of the history field.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySection {
    /// Number of positive-age levels.
    #[serde(default = "default_s_nodes")]
    pub s_nodes: usize,
    /// History span: a number, or "auto" to cover all but a 1e-8 kernel tail.
    #[serde(default)]
    pub s_max: SpanSetting,
}

impl Default for HistorySection {
    fn default() -> Self {
        HistorySection {
            s_nodes: default_s_nodes(),
            s_max: SpanSetting::default(),
        }
    }
}

fn default_s_nodes() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum SpanSetting {
    Number(f64),
    Keyword(String),
}

impl Default for SpanSetting {
    fn default() -> Self {
        SpanSetting::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// "dafermos", "prony", or "convolution".
    #[serde(default = "default_formulation")]
    pub formulation: String,
    /// Time step; defaults to h/2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Initial displacement preset: "zero", "sine", "gaussian", or "file".
    #[serde(default = "default_initial")]
    pub initial: String,
    /// Initial velocity preset: "zero", "sine", or "gaussian".
    #[serde(default = "default_zero_preset")]
    pub initial_velocity: String,
    /// Displacement history for t < 0: "zero", "constant", or "linear".
    #[serde(default = "default_zero_preset")]
    pub past_history: String,
    /// Nodal displacement file (one value per mesh node), used when
    /// initial = "file".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_file: Option<PathBuf>,
}

fn default_formulation() -> String {
    "dafermos".into()
}
fn default_initial() -> String {
    "sine".into()
}
fn default_zero_preset() -> String {
    "zero".into()
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Frequency bound of the resolvent sweep; defaults to five times the
    /// spectrum's imaginary extent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    /// Grid points per half-axis of the sweep.
    #[serde(default = "default_sweep_points")]
    pub sweep_points: usize,
    /// Local-maximum refinement passes of the sweep.
    #[serde(default = "default_refine_passes")]
    pub refine_passes: usize,
    /// Keep every n-th row of the energy audit.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            beta_max: None,
            sweep_points: default_sweep_points(),
            refine_passes: default_refine_passes(),
            record_every: default_record_every(),
        }
    }
}

fn default_sweep_points() -> usize {
    24
}
fn default_refine_passes() -> usize {
    3
}
fn default_record_every() -> usize {
    1
}

/// Parses a configuration file, rejecting unknown keys.
pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// A fully assembled run: the discrete system, the initial data, the time
/// stepping parameters, and the configuration with every default resolved.
#[derive(Debug)]
pub struct BuiltRun {
    pub sys: WaveSystem,
    pub init: InitialData,
    pub formulation: Formulation,
    pub dt: f64,
    pub n_steps: usize,
    pub resolved: RunConfig,
}

/// Builds the system a configuration describes. Relative file paths are
/// resolved against `base_dir` (normally the configuration file's parent).
pub fn build(config: &RunConfig, base_dir: &Path) -> Result<BuiltRun> {
    let kernel = build_kernel(&config.kernel, base_dir)?;
    let mesh = Mesh::new(config.mesh.n_cells)?;
    let ops = DiscreteOperators::assemble(mesh);

    let s_max = match &config.history.s_max {
        SpanSetting::Number(x) => {
            if !(*x > 0.0) && !kernel.is_zero() {
                return Err(Error::Config(format!(
                    "history.s_max must be positive, got {x}"
                )));
            }
            *x
        }
        SpanSetting::Keyword(word) if word == "auto" => {
            kernel.support_radius(DEFAULT_TAIL_TOLERANCE)
        }
        SpanSetting::Keyword(other) => {
            return Err(Error::Config(format!(
                "history.s_max must be a number or \"auto\", got {other:?}"
            )));
        }
    };
    let grid = AgeGrid::geometric(&kernel, s_max, config.history.s_nodes)?;

    let dt = match config.time.dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => {
            return Err(Error::Config(format!("time.dt must be positive, got {dt}")));
        }
        None => 0.5 * ops.mesh.h,
    };
    if !(config.time.t_final > 0.0) {
        return Err(Error::Config(format!(
            "time.t_final must be positive, got {}",
            config.time.t_final
        )));
    }
    let n_steps = ((config.time.t_final / dt) - 1e-9).ceil().max(1.0) as usize;

    let u0 = displacement_preset(
        &config.time.initial,
        config.time.initial_file.as_deref(),
        &ops,
        base_dir,
    )?;
    let v0 = velocity_preset(&config.time.initial_velocity, &ops)?;
    let past = match config.time.past_history.as_str() {
        "zero" => Past::Zero,
        "constant" => Past::Constant,
        "linear" => Past::Linear,
        other => {
            return Err(Error::Config(format!(
                "time.past_history must be zero, constant, or linear, got {other:?}"
            )));
        }
    };
    let formulation: Formulation = config.time.formulation.parse()?;

    let mut resolved = config.clone();
    resolved.time.dt = Some(dt);
    resolved.history.s_max = SpanSetting::Number(s_max);

    Ok(BuiltRun {
        sys: WaveSystem::new(ops, kernel, grid),
        init: InitialData { u0, v0, past },
        formulation,
        dt,
        n_steps,
        resolved,
    })
}

fn build_kernel(section: &KernelSection, base_dir: &Path) -> Result<Kernel> {
    match section.kind.as_str() {
        "exponential" => {
            let a = section
                .a
                .ok_or_else(|| Error::Config("kernel.a is required for type = \"exponential\"".into()))?;
            let b = section
                .b
                .ok_or_else(|| Error::Config("kernel.b is required for type = \"exponential\"".into()))?;
            Kernel::exponential(a, b)
        }
        "zero" => Ok(Kernel::zero()),
        "sampled" => {
            let file = section.file.as_ref().ok_or_else(|| {
                Error::Config("kernel.file is required for type = \"sampled\"".into())
            })?;
            let zeta0 = section.zeta0.ok_or_else(|| {
                Error::Config("kernel.zeta0 is required for type = \"sampled\"".into())
            })?;
            let zeta1 = section.zeta1.ok_or_else(|| {
                Error::Config("kernel.zeta1 is required for type = \"sampled\"".into())
            })?;
            let path = resolve(base_dir, file);
            let (s, g) = read_samples(&path)?;
            Kernel::from_samples(s, g, zeta0, zeta1)
        }
        other => Err(Error::Config(format!(
            "kernel.type must be exponential, sampled, or zero, got {other:?}"
        ))),
    }
}

fn resolve(base_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Reads a two-column table of (age, value) samples; '#' starts a comment,
/// columns are separated by whitespace or a comma.
pub fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut s = Vec::new();
    let mut g = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(Error::Config(format!(
                "{}:{}: expected two columns, got {}",
                path.display(),
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |t: &str| -> Result<f64> {
            t.parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "{}:{}: not a number: {t:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        s.push(parse(cols[0])?);
        g.push(parse(cols[1])?);
    }
    Ok((s, g))
}

fn displacement_preset(
    name: &str,
    file: Option<&Path>,
    ops: &DiscreteOperators,
    base_dir: &Path,
) -> Result<DVector<f64>> {
    match name {
        "zero" => Ok(DVector::zeros(ops.n_free())),
        "sine" => Ok(ops
            .mesh
            .interpolate(|x| (0.5 * std::f64::consts::PI * x).sin())),
        "gaussian" => Ok(ops
            .mesh
            .interpolate(|x| (-((x - 0.5) / 0.15).powi(2)).exp())),
        "file" => {
            let file = file.ok_or_else(|| {
                Error::Config("time.initial_file is required when time.initial = \"file\"".into())
            })?;
            read_nodal(&resolve(base_dir, file), ops)
        }
        other => Err(Error::Config(format!(
            "time.initial must be zero, sine, gaussian, or file, got {other:?}"
        ))),
    }
}

fn velocity_preset(name: &str, ops: &DiscreteOperators) -> Result<DVector<f64>> {
    match name {
        "zero" => Ok(DVector::zeros(ops.n_free())),
        "sine" => Ok(ops
            .mesh
            .interpolate(|x| (0.5 * std::f64::consts::PI * x).sin())),
        "gaussian" => Ok(ops
            .mesh
            .interpolate(|x| (-((x - 0.5) / 0.15).powi(2)).exp())),
        other => Err(Error::Config(format!(
            "time.initial_velocity must be zero, sine, or gaussian, got {other:?}"
        ))),
    }
}

/// Reads one nodal value per line for every mesh node x_0 .. x_N; the value
/// at the clamped node x_0 is discarded.
fn read_nodal(path: &Path, ops: &DiscreteOperators) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let vals: Vec<f64> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: not a number: {l:?}", path.display())))
        })
        .collect::<Result<_>>()?;
    let expect = ops.mesh.n_cells + 1;
    if vals.len() != expect {
        return Err(Error::Config(format!(
            "{}: expected {expect} nodal values (one per mesh node), got {}",
            path.display(),
            vals.len()
        )));
    }
    Ok(DVector::from_iterator(ops.n_free(), vals[1..].iter().copied()))
}

/// Resolved configuration as pretty TOML, for embedding in text outputs.
pub fn resolved_toml(config: &RunConfig) -> String {
    toml::to_string_pretty(config).unwrap_or_else(|e| format!("# serialization failed: {e}"))
}
