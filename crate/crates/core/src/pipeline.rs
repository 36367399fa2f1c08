//! End-to-end commands behind the CLI: simulate, analyze, extract, sweep
//! and oracle-compare. Each command validates its slice of the run
//! configuration, writes its artifacts atomically under the configured
//! output directory, and returns a machine-readable report.
//!
//! Exit-code contract: 0 success, 2 configuration or parse problem,
//! 3 filesystem problem, 4 analysis failure.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aniso::{axial_g, fit_anisotropy, g_factor, AngleSeries, Verdict};
use crate::compare::{match_curves, oracle_ensemble_average, EnsembleSettings};
use crate::constants::{mhz_to_rad_per_us, MHZ_PER_MT_PER_G};
use crate::fit::{
    detect_envelope_maxima, fit_exp_decay, fit_lorentzians, FitError, FitOptions, LorentzianPeak,
};
use crate::io::{self, IoError, RunConfig, Sidecar, SimulateMode, SweepConfig};
use crate::quantum::{nutation_rate, rabi_transient_oracle, PulseSpec, SpinPairParams};
use crate::rabi::{delta_analytic, CouplingRegime, LineShape, QuadratureSettings};
use crate::records::{Measurement, SpectrumRecord, SweepRecord, TransientRecord};
use crate::spectral::{
    decay_width_consistency, extract_from_spectrum, fft_magnitude, kappa_ratio_from_tables,
    larmor_detuning, ComponentTable, FftSettings, WidthConsistency,
};
use crate::synth::{add_noise, synthesize_sweep, synthesize_transient, uniform_grid, OscComponent};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    /// Semantically invalid run description: exit code 2.
    #[error("invalid run: {0}")]
    Invalid(String),
    /// The data could not be analyzed: exit code 4.
    #[error("analysis failed: {0}")]
    Analysis(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io(e) => e.exit_code(),
            PipelineError::Invalid(_) => 2,
            PipelineError::Analysis(_) => 4,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Invalid(e.to_string())
}

fn analysis(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Analysis(e.to_string())
}

/// Label for a drive level: the base level is plain "b1", scaled levels
/// append the multiplier.
fn scale_label(scale: f64) -> String {
    if (scale - 1.0).abs() < 1e-12 {
        "b1".to_string()
    } else {
        format!("b1x{scale}")
    }
}

fn tau_grid(config: &RunConfig) -> Result<Vec<f64>, PipelineError> {
    uniform_grid(config.grid.start_ns, config.grid.stop_ns, config.grid.step_ns).map_err(invalid)
}

fn pair_params(config: &RunConfig) -> Result<SpinPairParams, PipelineError> {
    let pair = config
        .pair
        .as_ref()
        .ok_or_else(|| PipelineError::Invalid("missing [pair] section".into()))?;
    SpinPairParams::new(
        pair.g_a,
        pair.g_b,
        mhz_to_rad_per_us(pair.j_mhz),
        mhz_to_rad_per_us(pair.dd_mhz),
        pair.b0_mt,
    )
    .map_err(invalid)
}

/// Carrier angular frequency: explicit when configured, spin-a resonance
/// otherwise.
fn carrier_omega(config: &RunConfig, params: &SpinPairParams) -> f64 {
    match config.pulse.as_ref().and_then(|p| p.carrier_mhz) {
        Some(f) => mhz_to_rad_per_us(f),
        None => params.larmor_a(),
    }
}

fn base_b1(config: &RunConfig) -> Result<f64, PipelineError> {
    let pulse = config
        .pulse
        .as_ref()
        .ok_or_else(|| PipelineError::Invalid("missing [pulse] section".into()))?;
    if !(pulse.b1_mt >= 0.0) || !pulse.b1_mt.is_finite() {
        return Err(PipelineError::Invalid(format!(
            "b1_mT must be non-negative, got {}",
            pulse.b1_mt
        )));
    }
    Ok(pulse.b1_mt)
}

fn checked_scales(scales: &[f64]) -> Result<&[f64], PipelineError> {
    if scales.is_empty() {
        return Err(PipelineError::Invalid("b1_scales must not be empty".into()));
    }
    for &s in scales {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(PipelineError::Invalid(format!(
                "b1_scales entries must be non-negative, got {s}"
            )));
        }
    }
    Ok(scales)
}

/// Artifact written by `simulate`: path plus the record's drive label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatedFile {
    pub path: PathBuf,
    pub b1_label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub files: Vec<SimulatedFile>,
}

/// Generates the configured data files. One transient per drive scale
/// (oracle/analytic/synthetic modes) or one field sweep per angle.
pub fn cmd_simulate(
    config: &RunConfig,
    config_sha256: &str,
) -> Result<SimulateOutput, PipelineError> {
    let sim = config
        .simulate
        .as_ref()
        .ok_or_else(|| PipelineError::Invalid("missing [simulate] section".into()))?;
    let out_dir = &config.output.dir;
    let format = config.output.format;
    let mut files = Vec::new();

    if sim.mode == SimulateMode::Sweep {
        for (angle, rec) in generate_sweeps(config)? {
            let path = out_dir.join(format!("sweep_{angle}deg.{}", format.extension()));
            io::write_sweep(&path, &rec, format)?;
            io::write_sidecar(&path, &Sidecar::new("sweep", rec.seed, config_sha256))?;
            files.push(SimulatedFile {
                path,
                b1_label: format!("{angle}deg"),
            });
        }
        return Ok(SimulateOutput { files });
    }

    let grid = tau_grid(config)?;
    let scales = checked_scales(&sim.b1_scales)?;
    for (k, &scale) in scales.iter().enumerate() {
        let label = scale_label(scale);
        let seed = config.noise.seed.wrapping_add(k as u64);
        let mut rec = match sim.mode {
            SimulateMode::Oracle => {
                let params = pair_params(config)?;
                let pulse = PulseSpec::new(scale * base_b1(config)?, carrier_omega(config, &params), 0.0)
                    .map_err(invalid)?;
                let rec = rabi_transient_oracle(&params, &pulse, &grid).map_err(analysis)?;
                maybe_noise(rec, config, seed)?
            }
            SimulateMode::Analytic => {
                let params = pair_params(config)?;
                let regime = sim.regime.unwrap_or(CouplingRegime::WeakSelective);
                let rec = crate::rabi::nutation_curve(regime, scale * base_b1(config)?, params.g_a, &grid)
                    .map_err(analysis)?;
                maybe_noise(rec, config, seed)?
            }
            SimulateMode::Synthetic => {
                if sim.components.is_empty() {
                    return Err(PipelineError::Invalid(
                        "synthetic mode needs at least one [[simulate.components]] entry".into(),
                    ));
                }
                let comps = sim
                    .components
                    .iter()
                    .map(|c| {
                        let f = c.freq_at_scale(scale).map_err(PipelineError::Invalid)?;
                        OscComponent::new(f, c.amplitude, c.decay_ns, c.phase_rad).map_err(invalid)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                synthesize_transient(&comps, &grid, config.noise.sigma, seed).map_err(invalid)?
            }
            SimulateMode::Sweep => unreachable!("handled above"),
        };
        rec.meta.b1_label = label.clone();
        rec.meta.b1_scale = Some(scale);

        let path = out_dir.join(format!("transient_{label}.{}", format.extension()));
        io::write_transient(&path, &rec, format)?;
        io::write_sidecar(&path, &Sidecar::new("transient", rec.meta.seed, config_sha256))?;
        files.push(SimulatedFile {
            path,
            b1_label: label,
        });
    }
    Ok(SimulateOutput { files })
}

fn maybe_noise(
    rec: TransientRecord,
    config: &RunConfig,
    seed: u64,
) -> Result<TransientRecord, PipelineError> {
    if config.noise.sigma > 0.0 {
        add_noise(&rec, config.noise.sigma, seed).map_err(invalid)
    } else {
        Ok(rec)
    }
}

/// Per-angle resonance records from the [sweep] section.
fn generate_sweeps(config: &RunConfig) -> Result<Vec<(f64, SweepRecord)>, PipelineError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| PipelineError::Invalid("missing [sweep] section".into()))?;
    if sweep.peaks.is_empty() {
        return Err(PipelineError::Invalid(
            "sweep needs at least one [[sweep.peaks]] entry".into(),
        ));
    }
    if !(sweep.carrier_mhz > 0.0) || !sweep.carrier_mhz.is_finite() {
        return Err(PipelineError::Invalid(format!(
            "carrier_MHz must be positive, got {}",
            sweep.carrier_mhz
        )));
    }
    let grid = uniform_grid(sweep.start_mt, sweep.stop_mt, sweep.step_mt).map_err(invalid)?;
    let mut out = Vec::new();
    for (i, &angle) in sweep.angles_deg.iter().enumerate() {
        let peaks = resonance_peaks(sweep, angle)?;
        let seed = config.noise.seed.wrapping_add(i as u64);
        let mut rec =
            synthesize_sweep(&peaks, &grid, config.noise.sigma, seed).map_err(invalid)?;
        rec.angle_deg = Some(angle);
        rec.carrier_mhz = Some(sweep.carrier_mhz);
        out.push((angle, rec));
    }
    Ok(out)
}

/// Lorentzian line positions for one orientation: each configured center
/// resonates where the carrier meets its angle-dependent g-factor.
fn resonance_peaks(sweep: &SweepConfig, angle_deg: f64) -> Result<Vec<LorentzianPeak>, PipelineError> {
    let theta = angle_deg.to_radians();
    sweep
        .peaks
        .iter()
        .map(|p| {
            let g = axial_g(p.g_parallel, p.g_perpendicular, theta);
            if !(g > 0.0) || !g.is_finite() {
                return Err(PipelineError::Invalid(format!(
                    "peak g-factors must be positive (g_parallel={}, g_perpendicular={})",
                    p.g_parallel, p.g_perpendicular
                )));
            }
            Ok(LorentzianPeak {
                center: sweep.carrier_mhz / (MHZ_PER_MT_PER_G * g),
                hwhm: p.hwhm_mt,
                amplitude: p.amplitude,
            })
        })
        .collect()
}

/// Decay summary for one transient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub b1_label: String,
    pub n_maxima: usize,
    /// Fitted envelope decay time; absent when no decay was resolved.
    pub decay_ns: Option<Measurement>,
    pub amplitude: Option<Measurement>,
    pub message: String,
}

/// Everything `analyze` learned, in input order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub tables: Vec<ComponentTable>,
    pub decays: Vec<DecayReport>,
    pub spectra: Vec<PathBuf>,
}

/// Runs the frequency-domain chain on each transient file: magnitude
/// spectrum (written to disk before any fit, so a failed extraction still
/// leaves a diagnostic dump), component extraction, and an envelope decay
/// fit. Results land in `analysis.json` under the output directory.
pub fn cmd_analyze(
    inputs: &[PathBuf],
    config: &RunConfig,
) -> Result<AnalyzeReport, PipelineError> {
    if inputs.is_empty() {
        return Err(PipelineError::Invalid(
            "analyze needs at least one transient file".into(),
        ));
    }
    let opts = &config.analysis;
    if opts.n_components == 0 {
        return Err(PipelineError::Invalid("n_components must be at least 1".into()));
    }
    let settings = FftSettings {
        window: opts.window,
        zero_pad_factor: opts.zero_pad_factor,
    };
    let out_dir = &config.output.dir;
    let format = config.output.format;

    let mut tables = Vec::new();
    let mut decays = Vec::new();
    let mut spectra = Vec::new();
    let mut seen_labels: Vec<String> = Vec::new();
    for path in inputs {
        let rec = io::read_transient(path)?;
        let mut label = rec.meta.b1_label.clone();
        if seen_labels.iter().any(|l| l == &label) {
            label = format!("{label}_{}", seen_labels.len());
        }
        seen_labels.push(label.clone());

        let spectrum = fft_magnitude(&rec, &settings).map_err(analysis)?;
        let spec_name = format!("spectrum_{label}.{}", format.extension());
        io::write_spectrum(&out_dir.join(&spec_name), &spectrum, format)?;
        // Reports carry names relative to the output directory so that
        // identical runs produce identical bytes wherever they land.
        spectra.push(PathBuf::from(spec_name));

        let table = extract_from_spectrum(&spectrum, &label, opts.f_min_mhz, opts.n_components)
            .map_err(analysis)?;
        tables.push(table);
        decays.push(decay_report(&rec, &label));
    }

    let report = AnalyzeReport {
        tables,
        decays,
        spectra,
    };
    io::write_report(&out_dir.join("analysis.json"), &report)?;
    Ok(report)
}

/// Envelope decay of one transient. Failures to resolve a decay are a
/// result ("no decay detected"), not an error: an undamped tone is valid
/// input.
fn decay_report(rec: &TransientRecord, label: &str) -> DecayReport {
    let span = match (rec.tau_ns.first(), rec.tau_ns.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let maxima = match detect_envelope_maxima(rec) {
        Ok(m) => m,
        Err(e) => {
            return DecayReport {
                b1_label: label.to_string(),
                n_maxima: 0,
                decay_ns: None,
                amplitude: None,
                message: format!("no decay detected: {e}"),
            }
        }
    };
    match fit_exp_decay(&maxima) {
        Ok(fit) if fit.is_effectively_undamped(span) => DecayReport {
            b1_label: label.to_string(),
            n_maxima: maxima.len(),
            decay_ns: None,
            amplitude: None,
            message: "no decay detected".to_string(),
        },
        Ok(fit) => DecayReport {
            b1_label: label.to_string(),
            n_maxima: maxima.len(),
            decay_ns: Some(Measurement::new(fit.decay_ns, fit.decay_sigma_ns)),
            amplitude: Some(Measurement::new(fit.amplitude, fit.amplitude_sigma)),
            message: "decay detected".to_string(),
        },
        Err(FitError::TooFewPoints { .. }) => DecayReport {
            b1_label: label.to_string(),
            n_maxima: maxima.len(),
            decay_ns: None,
            amplitude: None,
            message: "no decay detected: too few envelope maxima".to_string(),
        },
        Err(e) => DecayReport {
            b1_label: label.to_string(),
            n_maxima: maxima.len(),
            decay_ns: None,
            amplitude: None,
            message: format!("decay fit failed: {e}"),
        },
    }
}

/// Detuning recovered for one frequency component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetuningEntry {
    pub component: String,
    pub detuning_mhz: Option<Measurement>,
    pub detuning_mt: Option<Measurement>,
    /// Why the inversion failed, when it did (e.g. a negative discriminant
    /// with its significance).
    pub note: Option<String>,
}

/// Decay-time vs spectral-width cross-check for one drive level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WidthEntry {
    pub b1_label: String,
    pub consistency: WidthConsistency,
}

/// Physics extracted from a two-drive-level component table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractReport {
    pub xi: f64,
    pub g_assumed: f64,
    pub detunings: Vec<DetuningEntry>,
    pub kappa_ratio: Option<Measurement>,
    pub kappa_note: Option<String>,
    pub width_checks: Vec<WidthEntry>,
}

/// Inverts the drive-scaling relations on an `analysis.json` produced from
/// transients at two drive levels (base first, then the level scaled by
/// `xi`). Per-component inversion failures are reported in place rather
/// than aborting, since a negative discriminant is itself a finding.
pub fn cmd_extract(
    analysis_path: &Path,
    config: &RunConfig,
) -> Result<ExtractReport, PipelineError> {
    let report: AnalyzeReport = io::read_report(analysis_path)?;
    if report.tables.len() < 2 {
        return Err(PipelineError::Invalid(format!(
            "extract needs component tables at two drive levels, got {}",
            report.tables.len()
        )));
    }
    let opts = &config.analysis;
    let base = &report.tables[0];
    let scaled = &report.tables[1];
    let n = base.components.len().min(scaled.components.len());
    if n == 0 {
        return Err(PipelineError::Analysis(
            "component tables are empty".into(),
        ));
    }

    let mut detunings = Vec::new();
    for i in 0..n {
        let name = match (i, n) {
            (0, 2) => "low".to_string(),
            (1, 2) => "high".to_string(),
            _ => format!("component_{i}"),
        };
        let small = base.components[i].freq_mhz;
        let large = scaled.components[i].freq_mhz;
        match larmor_detuning(small, large, opts.xi) {
            Ok(d) => {
                let field = detuning_to_field(d, opts.g_assumed)?;
                detunings.push(DetuningEntry {
                    component: name,
                    detuning_mhz: Some(d),
                    detuning_mt: Some(field),
                    note: None,
                });
            }
            Err(e) => detunings.push(DetuningEntry {
                component: name,
                detuning_mhz: None,
                detuning_mt: None,
                note: Some(e.to_string()),
            }),
        }
    }

    let (kappa_ratio, kappa_note) = match kappa_ratio_from_tables(base, scaled) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut width_checks = Vec::new();
    for decay in &report.decays {
        let Some(t) = decay.decay_ns else { continue };
        let Some(table) = report.tables.iter().find(|t| t.b1_label == decay.b1_label) else {
            continue;
        };
        let Some(low) = table.components.first() else { continue };
        width_checks.push(WidthEntry {
            b1_label: decay.b1_label.clone(),
            consistency: decay_width_consistency(t, low.width_mhz),
        });
    }

    let out = ExtractReport {
        xi: opts.xi,
        g_assumed: opts.g_assumed,
        detunings,
        kappa_ratio,
        kappa_note,
        width_checks,
    };
    io::write_report(&config.output.dir.join("extract_report.json"), &out)?;
    Ok(out)
}

fn detuning_to_field(
    d: Measurement,
    g: f64,
) -> Result<Measurement, PipelineError> {
    crate::spectral::detuning_to_field(d, g).map_err(invalid)
}

/// Per-angle resonance fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleFit {
    pub angle_deg: f64,
    pub file: PathBuf,
    /// Fitted line centers, ascending in field.
    pub centers_mt: Vec<Measurement>,
    /// Effective g-factors for the same lines.
    pub g: Vec<Measurement>,
}

/// Anisotropy call for one resonance line tracked across angles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakVerdict {
    /// Index in ascending-field order.
    pub peak_index: usize,
    pub g_parallel: Measurement,
    pub g_perpendicular: Measurement,
    pub z_value: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub carrier_mhz: f64,
    pub angles: Vec<AngleFit>,
    pub peaks: Vec<PeakVerdict>,
}

/// Generates the per-angle field sweeps, fits every resonance line, turns
/// line centers into effective g-factors and classifies each line as
/// isotropic or anisotropic. Needs at least three distinct angles.
pub fn cmd_sweep(config: &RunConfig, config_sha256: &str) -> Result<SweepReport, PipelineError> {
    let sweep_cfg = config
        .sweep
        .as_ref()
        .ok_or_else(|| PipelineError::Invalid("missing [sweep] section".into()))?;
    let mut sorted = sweep_cfg.angles_deg.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    if sorted.len() < 3 {
        return Err(PipelineError::Invalid(format!(
            "anisotropy verdicts need at least 3 distinct angles, got {}",
            sorted.len()
        )));
    }

    let out_dir = &config.output.dir;
    let format = config.output.format;
    let n_peaks = sweep_cfg.peaks.len();
    let fit_options = FitOptions::default();

    let mut angle_fits = Vec::new();
    for (angle, rec) in generate_sweeps(config)? {
        let path = out_dir.join(format!("sweep_{angle}deg.{}", format.extension()));
        io::write_sweep(&path, &rec, format)?;
        io::write_sidecar(&path, &Sidecar::new("sweep", rec.seed, config_sha256))?;

        let spectrum = SpectrumRecord::from_sweep(&rec);
        let fit = fit_lorentzians(&spectrum, n_peaks, None, &fit_options).map_err(analysis)?;
        let mut centers = Vec::new();
        let mut gs = Vec::new();
        for peak in &fit.peaks {
            let g = g_factor(sweep_cfg.carrier_mhz, peak.center).map_err(analysis)?;
            // b = f / (C g) means sigma_g / g = sigma_b / b.
            let g_sigma = g * peak.center_sigma / peak.center;
            centers.push(Measurement::new(peak.center, peak.center_sigma));
            gs.push(Measurement::new(g, g_sigma));
        }
        angle_fits.push(AngleFit {
            angle_deg: angle,
            file: path,
            centers_mt: centers,
            g: gs,
        });
    }

    // Lines do not cross in the supported scenarios, so ascending-field
    // position identifies a physical line across angles.
    let mut peaks = Vec::new();
    for k in 0..n_peaks {
        let theta: Vec<f64> = angle_fits.iter().map(|a| a.angle_deg.to_radians()).collect();
        let g: Vec<f64> = angle_fits.iter().map(|a| a.g[k].value).collect();
        let sigma: Vec<f64> = angle_fits.iter().map(|a| a.g[k].sigma).collect();
        let series = AngleSeries::new(theta, g, sigma).map_err(analysis)?;
        let fit = fit_anisotropy(&series).map_err(analysis)?;
        peaks.push(PeakVerdict {
            peak_index: k,
            g_parallel: fit.g_par,
            g_perpendicular: fit.g_perp,
            z_value: fit.z_value,
            verdict: fit.verdict,
        });
    }

    let report = SweepReport {
        carrier_mhz: sweep_cfg.carrier_mhz,
        angles: angle_fits,
        peaks,
    };
    io::write_report(&out_dir.join("sweep_report.json"), &report)?;
    Ok(report)
}

/// Agreement between the propagated-density-matrix ensemble and the
/// closed-form nutation model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    /// Amplitude factor applied to the closed-form curve.
    pub alpha: f64,
    /// max |oracle - alpha * analytic| / max |oracle|.
    pub max_rel_deviation: f64,
    pub n_offsets: usize,
    pub tau_points: usize,
}

/// Averages exact density-matrix transients over a flat detuning ensemble
/// and matches the closed-form curve against them, reporting the maximum
/// relative deviation after amplitude normalization.
pub fn cmd_oracle_compare(config: &RunConfig) -> Result<CompareReport, PipelineError> {
    let params = pair_params(config)?;
    let b1 = base_b1(config)?;
    let grid = tau_grid(config)?;
    let sim_regime = config
        .simulate
        .as_ref()
        .and_then(|s| s.regime)
        .unwrap_or(CouplingRegime::WeakSelective);
    let kappa = sim_regime.kappa();

    let pulse = PulseSpec::new(b1, carrier_omega(config, &params), 0.0).map_err(invalid)?;
    // Offsets are expressed in units of the on-resonance nutation rate; the
    // ensemble window and the closed-form truncation must cover the same
    // span for the shapes to be comparable.
    let w1 = kappa / 0.5 * nutation_rate(params.g_a, b1);
    let truncation = 20.0;
    let settings = EnsembleSettings {
        line: LineShape::flat(1.0).map_err(invalid)?,
        half_range: truncation * w1,
        n_points: 401,
    };
    let reference = oracle_ensemble_average(&params, &pulse, &grid, &settings).map_err(analysis)?;

    let quad = QuadratureSettings {
        truncation,
        ..QuadratureSettings::default()
    };
    let line = LineShape::flat(1.0).map_err(invalid)?;
    let candidate: Vec<f64> = grid
        .iter()
        .map(|&tau| delta_analytic(tau, b1, params.g_a, kappa, &line, &quad).map(|e| e.value))
        .collect::<Result<_, _>>()
        .map_err(analysis)?;

    let matched = match_curves(&reference.q, &candidate).map_err(analysis)?;
    let report = CompareReport {
        alpha: matched.alpha,
        max_rel_deviation: matched.max_rel_deviation,
        n_offsets: settings.n_points,
        tau_points: grid.len(),
    };
    io::write_report(&config.output.dir.join("oracle_compare.json"), &report)?;
    Ok(report)
}
