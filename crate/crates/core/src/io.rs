//! Run configuration and on-disk data formats.
//!
//! Configuration is TOML with unit-suffixed keys (`b0_mT`, `j_MHz`,
//! `stop_ns`); unknown keys are rejected so typos fail loudly. Data tables
//! are CSV with a fixed header row and 17-significant-digit floats, which
//! round-trips every finite f64 exactly, or whole-record JSON under the
//! `json` format. Every write goes through a temp-file-then-rename step so
//! readers never observe partial files, and each data file gets a JSON
//! sidecar recording the seed, generator version and config hash.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rabi::CouplingRegime;
use crate::records::{
    RecordError, SpectrumAxis, SpectrumRecord, SweepRecord, TransientMeta, TransientRecord,
};
use crate::spectral::Window;

#[derive(Debug, Error)]
pub enum IoError {
    /// Unreadable or invalid configuration: maps to exit code 2.
    #[error("config {path}: {detail}")]
    Config { path: String, detail: String },
    /// Structurally broken data file: maps to exit code 2.
    #[error("malformed {path}: {detail}")]
    Malformed { path: String, detail: String },
    /// Operating-system failure: maps to exit code 3.
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl IoError {
    /// Process exit code under the CLI contract: 2 for parse problems,
    /// 3 for filesystem problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::Config { .. } | IoError::Malformed { .. } => 2,
            IoError::Io { .. } => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn malformed(path: &Path, detail: impl fmt::Display) -> Self {
        IoError::Malformed {
            path: path.display().to_string(),
            detail: detail.to_string(),
        }
    }
}

/// On-disk representation of data tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Csv,
    Json,
}

impl DataFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            DataFormat::Csv => "csv",
            DataFormat::Json => "json",
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "json" => Ok(DataFormat::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

fn default_b1_scales() -> Vec<f64> {
    vec![1.0]
}

/// Spin-pair parameters. Couplings are ordinary frequencies in the file and
/// are converted to angular units at the model boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub g_a: f64,
    pub g_b: f64,
    #[serde(default, rename = "j_MHz")]
    pub j_mhz: f64,
    #[serde(default, rename = "dd_MHz")]
    pub dd_mhz: f64,
    #[serde(rename = "b0_mT")]
    pub b0_mt: f64,
}

/// Microwave pulse parameters. A missing carrier means "on resonance with
/// spin a".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    #[serde(rename = "b1_mT")]
    pub b1_mt: f64,
    #[serde(default, rename = "carrier_MHz")]
    pub carrier_mhz: Option<f64>,
}

/// Pulse-length acquisition grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub start_ns: f64,
    pub stop_ns: f64,
    pub step_ns: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        // The standard 401-point acquisition window.
        Self {
            start_ns: 0.0,
            stop_ns: 800.0,
            step_ns: 2.0,
        }
    }
}

/// Additive Gaussian noise on every generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// What `simulate` generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateMode {
    /// Density-matrix propagation of one coherent pair.
    Oracle,
    /// Ensemble-integrated closed-form nutation curve.
    Analytic,
    /// Explicit damped-cosine components.
    Synthetic,
    /// Field-swept resonance spectra at each configured angle.
    Sweep,
}

/// One damped oscillation component for synthetic transients.
///
/// `freq_MHz` is the observed frequency at the base drive level. When a
/// `detuning_MHz` is given, scaled drive levels obey
/// `f(s) = sqrt(s^2 (f^2 - d^2) + d^2)`, i.e. only the driven part of the
/// frequency grows with the drive; with the default `d = 0` the frequency
/// scales proportionally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    #[serde(rename = "freq_MHz")]
    pub freq_mhz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub decay_ns: Option<f64>,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default, rename = "detuning_MHz")]
    pub detuning_mhz: f64,
}

impl ComponentConfig {
    /// Observed frequency at drive scale `s`.
    pub fn freq_at_scale(&self, scale: f64) -> Result<f64, String> {
        let f = self.freq_mhz;
        let d = self.detuning_mhz;
        let driven2 = f * f - d * d;
        if driven2 < 0.0 {
            return Err(format!(
                "component detuning {d} MHz exceeds its frequency {f} MHz"
            ));
        }
        Ok((scale * scale * driven2 + d * d).sqrt())
    }
}

/// Simulation block: mode plus the per-drive-level layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub mode: SimulateMode,
    /// Drive amplitude multipliers; one transient file per entry.
    #[serde(default = "default_b1_scales")]
    pub b1_scales: Vec<f64>,
    /// Components for `synthetic` mode.
    #[serde(default)]
    pub components: Vec<ComponentConfig>,
    /// Coupling regime for `analytic` mode.
    #[serde(default)]
    pub regime: Option<CouplingRegime>,
}

/// One axial resonance line in a field sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPeakConfig {
    pub g_parallel: f64,
    pub g_perpendicular: f64,
    #[serde(rename = "hwhm_mT")]
    pub hwhm_mt: f64,
    pub amplitude: f64,
}

/// Field-sweep block: carrier, sample orientations and line models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "carrier_MHz")]
    pub carrier_mhz: f64,
    /// Angle between the static field and the symmetry axis, degrees.
    pub angles_deg: Vec<f64>,
    #[serde(rename = "start_mT")]
    pub start_mt: f64,
    #[serde(rename = "stop_mT")]
    pub stop_mt: f64,
    #[serde(rename = "step_mT")]
    pub step_mt: f64,
    pub peaks: Vec<SweepPeakConfig>,
}

/// Analysis options shared by `analyze`, `extract` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Spectral peaks below this frequency are ignored (DC skirt guard).
    #[serde(rename = "f_min_MHz")]
    pub f_min_mhz: f64,
    /// Number of oscillation components fitted per transient.
    pub n_components: usize,
    pub window: Window,
    pub zero_pad_factor: usize,
    /// Drive amplitude ratio between the two levels handed to `extract`.
    pub xi: f64,
    /// g-factor used to convert detunings to field offsets.
    pub g_assumed: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            f_min_mhz: 2.0,
            n_components: 2,
            window: Window::Rectangular,
            zero_pad_factor: 4,
            xi: 2.0,
            // Free-electron value; override for a specific center.
            g_assumed: 2.0023,
        }
    }
}

/// Where artifacts land and in which format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: DataFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: DataFormat::Csv,
        }
    }
}

/// Complete run description. Sections are optional where a command can do
/// without them; each command validates its own requirements.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub pair: Option<PairConfig>,
    pub pulse: Option<PulseConfig>,
    pub grid: GridConfig,
    pub noise: NoiseConfig,
    pub simulate: Option<SimulateConfig>,
    pub sweep: Option<SweepConfig>,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses a TOML file, returning the config together with the SHA-256
    /// of the file bytes (recorded in sidecars).
    pub fn load(path: &Path) -> Result<(Self, String), IoError> {
        let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| IoError::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let config: RunConfig = toml::from_str(text).map_err(|e| IoError::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Ok((config, sha256_hex(&bytes)))
    }

    /// Hash of the canonical TOML serialization, for configs built in code
    /// rather than loaded from a file.
    pub fn canonical_sha256(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        sha256_hex(text.as_bytes())
    }
}

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Provenance sidecar written next to every data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    /// "transient", "sweep" or "spectrum".
    pub kind: String,
    pub seed: Option<u64>,
    pub generator: String,
    pub version: String,
    pub config_sha256: String,
}

impl Sidecar {
    pub fn new(kind: &str, seed: Option<u64>, config_sha256: &str) -> Self {
        Self {
            kind: kind.to_string(),
            seed,
            generator: "spinpair".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_sha256.to_string(),
        }
    }
}

/// Sidecar path for a data file: `foo.csv` -> `foo.meta.json`.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("meta.json")
}

/// Writes `bytes` to `path` atomically: the content lands in a unique temp
/// file in the same directory and is renamed into place, so a crash never
/// leaves a half-written file under the final name.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

/// 17-significant-digit float; round-trips every finite f64 exactly.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_xy_csv(path: &Path, header: &str, x: &[f64], y: &[f64]) -> Result<(), IoError> {
    let mut s = String::with_capacity(x.len() * 52 + header.len() + 1);
    s.push_str(header);
    s.push('\n');
    for (a, b) in x.iter().zip(y) {
        s.push_str(&fmt_float(*a));
        s.push(',');
        s.push_str(&fmt_float(*b));
        s.push('\n');
    }
    atomic_write(path, s.as_bytes())
}

fn read_xy_csv(path: &Path, header: &str) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let expected: Vec<&str> = header.split(',').collect();
    let got = reader
        .headers()
        .map_err(|e| IoError::malformed(path, e))?
        .clone();
    if got.iter().collect::<Vec<_>>() != expected {
        return Err(IoError::malformed(
            path,
            format!("expected header {header:?}, got {:?}", got.as_slice()),
        ));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IoError::malformed(path, e))?;
        if row.len() != 2 {
            return Err(IoError::malformed(
                path,
                format!("line {line}: expected 2 fields, got {}", row.len()),
            ));
        }
        for (field, out) in [(&row[0], &mut x), (&row[1], &mut y)] {
            let v: f64 = field.parse().map_err(|_| {
                IoError::malformed(path, format!("line {line}: bad number {field:?}"))
            })?;
            out.push(v);
        }
    }
    Ok((x, y))
}

fn write_json_value<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| IoError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

fn read_json_value<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| IoError::malformed(path, e))
}

/// Writes any serializable report as pretty JSON (atomic).
pub fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_json_value(path, value)
}

/// Reads a JSON report back.
pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    read_json_value(path)
}

pub fn write_sidecar(data_path: &Path, sidecar: &Sidecar) -> Result<PathBuf, IoError> {
    let path = sidecar_path(data_path);
    write_json_value(&path, sidecar)?;
    Ok(path)
}

pub fn read_sidecar(data_path: &Path) -> Result<Sidecar, IoError> {
    read_json_value(&sidecar_path(data_path))
}

const TRANSIENT_HEADER: &str = "tau_ns,q_au";
const SWEEP_HEADER: &str = "b0_mT,q_au";
const SPECTRUM_HEADER: &str = "freq_MHz,mag_au";

/// Writes a transient in the requested format. CSV keeps only the data
/// columns (metadata goes to the sidecar); JSON embeds the full record.
pub fn write_transient(
    path: &Path,
    record: &TransientRecord,
    format: DataFormat,
) -> Result<(), IoError> {
    match format {
        DataFormat::Csv => write_xy_csv(path, TRANSIENT_HEADER, &record.tau_ns, &record.q),
        DataFormat::Json => write_json_value(path, record),
    }
}

/// Reads a transient, dispatching on the file extension (`.json` for JSON,
/// CSV otherwise). CSV input gets fresh metadata labelled by file stem.
pub fn read_transient(path: &Path) -> Result<TransientRecord, IoError> {
    if path.extension().is_some_and(|e| e == "json") {
        let raw: TransientRecord = read_json_value(path)?;
        TransientRecord::new(raw.tau_ns, raw.q, raw.meta).map_err(|e| IoError::malformed(path, e))
    } else {
        let (tau_ns, q) = read_xy_csv(path, TRANSIENT_HEADER)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "transient".to_string());
        // Files written by the simulation pipeline are named
        // `transient_<label>`; undo that prefix so the label round-trips.
        let label = stem.strip_prefix("transient_").unwrap_or(&stem).to_string();
        let meta = TransientMeta {
            b1_label: label,
            ..TransientMeta::default()
        };
        TransientRecord::new(tau_ns, q, meta).map_err(|e| IoError::malformed(path, e))
    }
}

pub fn write_sweep(path: &Path, record: &SweepRecord, format: DataFormat) -> Result<(), IoError> {
    match format {
        DataFormat::Csv => write_xy_csv(path, SWEEP_HEADER, &record.b0_mt, &record.q),
        DataFormat::Json => write_json_value(path, record),
    }
}

pub fn read_sweep(path: &Path) -> Result<SweepRecord, IoError> {
    if path.extension().is_some_and(|e| e == "json") {
        let raw: SweepRecord = read_json_value(path)?;
        let mut rec = SweepRecord::new(raw.b0_mt, raw.q, raw.seed, raw.noise_sigma)
            .map_err(|e| IoError::malformed(path, e))?;
        rec.angle_deg = raw.angle_deg;
        rec.carrier_mhz = raw.carrier_mhz;
        Ok(rec)
    } else {
        let (b0_mt, q) = read_xy_csv(path, SWEEP_HEADER)?;
        SweepRecord::new(b0_mt, q, None, 0.0).map_err(|e| IoError::malformed(path, e))
    }
}

pub fn write_spectrum(
    path: &Path,
    record: &SpectrumRecord,
    format: DataFormat,
) -> Result<(), IoError> {
    match format {
        DataFormat::Csv => write_xy_csv(path, SPECTRUM_HEADER, &record.x, &record.y),
        DataFormat::Json => write_json_value(path, record),
    }
}

pub fn read_spectrum(path: &Path) -> Result<SpectrumRecord, IoError> {
    if path.extension().is_some_and(|e| e == "json") {
        let raw: SpectrumRecord = read_json_value(path)?;
        SpectrumRecord::new(raw.x, raw.y, raw.axis).map_err(|e| IoError::malformed(path, e))
    } else {
        let (x, y) = read_xy_csv(path, SPECTRUM_HEADER)?;
        SpectrumRecord::new(x, y, SpectrumAxis::FrequencyMhz)
            .map_err(|e| IoError::malformed(path, e))
    }
}

impl From<RecordError> for IoError {
    fn from(e: RecordError) -> Self {
        IoError::Malformed {
            path: String::new(),
            detail: e.to_string(),
        }
    }
}
