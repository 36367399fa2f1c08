//! Command-line driver for the spin-pair pipeline.
//!
//! A thin shell over the pipeline commands: it parses flags, loads the run
//! configuration, applies the seed/output/format overrides and maps errors
//! to the documented exit codes (0 success, 2 configuration or parse
//! problem, 3 filesystem problem, 4 analysis failure).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use spinpair_core::aniso::Verdict;
use spinpair_core::io::{DataFormat, IoError, RunConfig};
use spinpair_core::pipeline::{
    cmd_analyze, cmd_extract, cmd_oracle_compare, cmd_simulate, cmd_sweep, PipelineError,
};
use spinpair_core::records::Measurement;

#[derive(Parser)]
#[command(
    name = "spinpair",
    version,
    about = "Simulate and analyze pulsed spin-pair nutation data"
)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the noise seed from the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides the output directory from the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Overrides the data file format: csv or json.
    #[arg(long, global = true, value_name = "FMT", value_parser = DataFormat::from_str)]
    format: Option<DataFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate transient or field-sweep data files from the configuration.
    Simulate,
    /// Extract oscillation components and decay envelopes from transients.
    Analyze {
        /// Transient data files, one per drive level.
        #[arg(value_name = "FILE", required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Invert the drive-scaling relations on an analysis report.
    Extract {
        /// Analysis report from `analyze`; defaults to analysis.json in the
        /// output directory.
        #[arg(value_name = "REPORT")]
        report: Option<PathBuf>,
    },
    /// Fit per-angle resonance sweeps and classify line anisotropy.
    Sweep,
    /// Check the closed-form nutation curve against the exact
    /// density-matrix ensemble average and print the maximum deviation.
    OracleCompare,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    init_thread_cap()?;
    let config_path = cli
        .config
        .ok_or_else(|| PipelineError::Invalid("--config PATH is required".into()))?;
    let (mut config, config_sha) = RunConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
    }
    if let Some(dir) = cli.out {
        config.output.dir = dir;
    }
    if let Some(format) = cli.format {
        config.output.format = format;
    }
    std::fs::create_dir_all(&config.output.dir).map_err(|e| IoError::Io {
        path: config.output.dir.display().to_string(),
        source: e,
    })?;

    match cli.command {
        Command::Simulate => {
            let out = cmd_simulate(&config, &config_sha)?;
            for f in &out.files {
                println!("wrote {} ({})", f.path.display(), f.b1_label);
            }
        }
        Command::Analyze { inputs } => {
            let report = cmd_analyze(&inputs, &config)?;
            for table in &report.tables {
                println!("[{}] {} component(s):", table.b1_label, table.components.len());
                for c in &table.components {
                    println!(
                        "  f = {} MHz, width = {} MHz, amplitude = {:.4}",
                        meas(&c.freq_mhz),
                        meas(&c.width_mhz),
                        c.amplitude
                    );
                }
            }
            for d in &report.decays {
                match &d.decay_ns {
                    Some(t) => println!(
                        "[{}] envelope decay T = {} ns ({} maxima)",
                        d.b1_label,
                        meas(t),
                        d.n_maxima
                    ),
                    None => println!("[{}] {}", d.b1_label, d.message),
                }
            }
            println!("report: {}", config.output.dir.join("analysis.json").display());
        }
        Command::Extract { report } => {
            let path = report.unwrap_or_else(|| config.output.dir.join("analysis.json"));
            let report = cmd_extract(&path, &config)?;
            println!("xi = {}, assumed g = {}", report.xi, report.g_assumed);
            for d in &report.detunings {
                match (&d.detuning_mhz, &d.detuning_mt) {
                    (Some(mhz), Some(mt)) => println!(
                        "[{}] detuning = {} MHz = {} mT",
                        d.component,
                        meas(mhz),
                        meas(mt)
                    ),
                    _ => println!(
                        "[{}] {}",
                        d.component,
                        d.note.as_deref().unwrap_or("inversion failed")
                    ),
                }
            }
            match (&report.kappa_ratio, &report.kappa_note) {
                (Some(r), _) => println!("kappa ratio = {}", meas(r)),
                (None, Some(note)) => println!("kappa ratio: {note}"),
                (None, None) => {}
            }
            for w in &report.width_checks {
                println!(
                    "[{}] width check: measured {} MHz vs expected {} MHz ({:.2} sigma apart)",
                    w.b1_label,
                    meas(&w.consistency.measured_mhz),
                    meas(&w.consistency.expected_mhz),
                    w.consistency.discrepancy_sigma
                );
            }
            println!(
                "report: {}",
                config.output.dir.join("extract_report.json").display()
            );
        }
        Command::Sweep => {
            let report = cmd_sweep(&config, &config_sha)?;
            for a in &report.angles {
                let gs: Vec<String> = a.g.iter().map(meas).collect();
                println!("{:>5.1} deg: g = [{}]", a.angle_deg, gs.join(", "));
            }
            for p in &report.peaks {
                println!(
                    "peak {}: g_par = {}, g_perp = {}, z = {:.2} -> {}",
                    p.peak_index,
                    meas(&p.g_parallel),
                    meas(&p.g_perpendicular),
                    p.z_value,
                    verdict_str(p.verdict)
                );
            }
            println!(
                "report: {}",
                config.output.dir.join("sweep_report.json").display()
            );
        }
        Command::OracleCompare => {
            let report = cmd_oracle_compare(&config)?;
            println!(
                "max relative deviation = {:.3e} (amplitude factor {:.6}, {} offsets, {} tau points)",
                report.max_rel_deviation, report.alpha, report.n_offsets, report.tau_points
            );
        }
    }
    Ok(())
}

/// SPINPAIR_THREADS caps the worker pool used for internal parallelism.
fn init_thread_cap() -> Result<(), PipelineError> {
    let Some(raw) = std::env::var_os("SPINPAIR_THREADS") else {
        return Ok(());
    };
    let text = raw.to_string_lossy();
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            PipelineError::Invalid(format!(
                "SPINPAIR_THREADS must be a positive integer, got {text:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Invalid(format!("thread pool: {e}")))
}

fn meas(m: &Measurement) -> String {
    format!("{:.6} +/- {:.6}", m.value, m.sigma)
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Isotropic => "isotropic",
        Verdict::Anisotropic => "anisotropic",
    }
}
