//! The `qndlab` command line: argument parsing, command implementations and
//! the mapping from error families to exit codes.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimation::SpectrumEstimate;
use crate::fitting::{fit, model_target, FitProblem, FitReport, TargetKind};
use crate::om::OmModel;
use crate::output::Table;
use crate::pipeline::{self, PipelineReport};
use crate::synth::{read_dataset, synthesize, write_dataset, Channel};
use crate::theory::simple::{
    fixed_phase_output_spectrum, min_quadrature_spectrum, simple_residual_spectrum, ReadoutMode, SimpleModelParams,
};
use crate::theory::{full_output_cross_spectra, noise_budget, residual_budget, Port};
use crate::units::{hz_to_rad, rad_to_hz};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;
pub const EXIT_MODEL: i32 = 5;
pub const EXIT_PIPELINE: i32 = 6;
pub const EXIT_FIT: i32 = 7;

/// Exit status for an error family.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Format(_) => EXIT_FORMAT,
        Error::NonConvergence { .. } | Error::DivergentSusceptibility { .. } | Error::Domain(_) => EXIT_MODEL,
        Error::TooFewSegments { .. }
        | Error::SingularCrossMatrix { .. }
        | Error::DegenerateDenominator { .. }
        | Error::InsufficientBand { .. }
        | Error::GridMismatch(_)
        | Error::Stage { .. } => EXIT_PIPELINE,
        Error::DegenerateTarget(_) | Error::FitNonConvergence { .. } => EXIT_FIT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qndlab", version, about = "Optomechanical QND measurement laboratory")]
pub struct Cli {
    /// Run configuration (TOML); defaults reproduce the reference device.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `[run] out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run seed (overrides `[run] seed`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Residual information channels, e.g. `meter` or `meter,meter_squared`.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Band width for averaging the residual, Hz.
    #[arg(long = "band-hz", global = true, value_name = "F")]
    pub band_hz: Option<f64>,
    /// Switch off the drive and every classical noise source.
    #[arg(long = "vacuum-only", global = true)]
    pub vacuum_only: bool,
    /// Print the default configuration and exit.
    #[arg(long = "print-defaults")]
    pub print_defaults: bool,
    /// Number of segments to synthesize (overrides `[synth] n_segments`).
    #[arg(long, global = true, value_name = "N")]
    pub segments: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write model spectra: simplified model, full model, coherence, residual.
    Theory,
    /// Write a synthetic three-channel dataset.
    Synth,
    /// Run the estimation pipeline on a dataset.
    Estimate {
        dataset: PathBuf,
    },
    /// Fit detuning, signal phase and phase-noise background. Without a
    /// dataset the target is the noiseless model of the configuration.
    Fit {
        dataset: Option<PathBuf>,
    },
    /// Write per-source noise budgets of the signal, meter and residual.
    Budget,
}

/// Parse the process arguments, run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Effective configuration after command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.run.out_dir = o.clone();
    }
    if let Some(n) = cli.segments {
        cfg.synth.n_segments = n;
    }
    if let Some(list) = &cli.channels {
        cfg.estimate.channels = list.iter().map(|s| Channel::parse(s.trim())).collect::<Result<_>>()?;
    }
    if let Some(b) = cli.band_hz {
        cfg.estimate.band_widths_hz = vec![b];
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<String> {
    if cli.print_defaults {
        return Ok(RunConfig::default().to_toml());
    }
    let Some(command) = &cli.command else {
        return Err(Error::Config("no command given; see --help".into()));
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        // a second initialization (e.g. in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let cfg = effective_config(cli)?;
    let out = cfg.run.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match command {
        Command::Theory => cmd_theory(&cfg, cli.vacuum_only, &out),
        Command::Synth => cmd_synth(&cfg, cli.vacuum_only, &out),
        Command::Estimate { dataset } => cmd_estimate(&cfg, dataset, &out),
        Command::Fit { dataset } => cmd_fit(&cfg, cli.vacuum_only, dataset.as_deref(), &out),
        Command::Budget => cmd_budget(&cfg, cli.vacuum_only, &out),
    }
}

fn system_for(cfg: &RunConfig, vacuum_only: bool) -> Result<crate::SystemParams> {
    let s = cfg.system()?;
    Ok(if vacuum_only { s.vacuum_only() } else { s })
}

fn full_grid(cfg: &RunConfig, omega_m: f64) -> Vec<f64> {
    let span = hz_to_rad(cfg.theory.span_hz);
    crate::spectrum::linear_grid(omega_m - span, omega_m + span, cfg.theory.points)
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn cmd_theory(cfg: &RunConfig, vacuum_only: bool, out: &Path) -> Result<String> {
    let hash = cfg.hash();
    let system = system_for(cfg, vacuum_only)?;

    let mut simple = SimpleModelParams::illustration();
    simple.phi = cfg.theory.simple_phase_rad;
    if vacuum_only {
        simple.gamma_ba = 0.0;
    }
    let x = crate::spectrum::linear_grid(1.0 - cfg.theory.simple_span, 1.0 + cfg.theory.simple_span, cfg.theory.simple_points);
    let ql = simple_residual_spectrum(&simple, &x);
    let fi = simple_residual_spectrum(
        &SimpleModelParams {
            readout_mode: ReadoutMode::FixedImprecision,
            ..simple
        },
        &x,
    );
    let mut t = Table::new();
    t.push("omega_over_omega_m", x.clone())
        .push("residual_quantum_limit", ql)
        .push("residual_fixed_imprecision", fi)
        .push("s_min", min_quadrature_spectrum(&simple, &x))
        .push("s_fixed_phase", fixed_phase_output_spectrum(&simple, simple.phi, &x));
    t.write_csv(&out.join("theory_simple.csv"), &hash)?;

    let model = OmModel::new(&system)?;
    let grid = full_grid(cfg, system.mech.omega_m);
    let spectra = full_output_cross_spectra(&system, &grid)?;
    let msc = spectra.coherence()?;
    let residual = spectra.residual()?;
    let smin = min_quadrature_spectrum(&SimpleModelParams::from_system(&system)?, &grid);
    let chi_eff = grid
        .iter()
        .map(|&w| model.effective_susceptibility(w).map(|c| c.norm_sqr()))
        .collect::<Result<Vec<_>>>()
        .unwrap_or_else(|_| vec![f64::NAN; grid.len()]);
    let mut t = Table::new();
    t.push("frequency_hz", grid.iter().map(|&w| rad_to_hz(w)).collect())
        .push("s_xx", spectra.s_xx.clone())
        .push("s_yy", spectra.s_yy.clone())
        .push("s_xy_re", spectra.s_xy.iter().map(|c| c.re).collect())
        .push("s_xy_im", spectra.s_xy.iter().map(|c| c.im).collect())
        .push("msc", msc)
        .push("residual", residual)
        .push("s_min", smin)
        .push("chi_eff_sq", chi_eff);
    t.write_csv(&out.join("theory_full.csv"), &hash)?;
    Ok(format!(
        "config_hash = {hash}\nwrote {}\nwrote {}\n",
        out.join("theory_simple.csv").display(),
        out.join("theory_full.csv").display()
    ))
}

pub fn cmd_budget(cfg: &RunConfig, vacuum_only: bool, out: &Path) -> Result<String> {
    let hash = cfg.hash();
    let system = system_for(cfg, vacuum_only)?;
    let grid = full_grid(cfg, system.mech.omega_m);
    let files = [
        ("budget_signal.csv", noise_budget(&system, Port::Signal, None, &grid)?),
        ("budget_meter.csv", noise_budget(&system, Port::Meter, None, &grid)?),
        ("budget_residual.csv", residual_budget(&system, &grid)?),
    ];
    let mut msg = format!("config_hash = {hash}\n");
    for (name, b) in files {
        b.to_table().write_csv(&out.join(name), &hash)?;
        msg.push_str(&format!("wrote {}\n", out.join(name).display()));
    }
    Ok(msg)
}

pub fn cmd_synth(cfg: &RunConfig, vacuum_only: bool, out: &Path) -> Result<String> {
    let system = system_for(cfg, vacuum_only)?;
    let ds = synthesize(&system, &cfg.synth_config())?;
    let path = out.join("dataset.qndl");
    write_dataset(&ds, &path)?;
    Ok(format!(
        "config_hash = {}\nsegments = {}\nwrote {}\n",
        ds.meta.config_hash,
        ds.meta.n_segments,
        path.display()
    ))
}

fn estimate_tables(r: &PipelineReport) -> Table {
    let mut t = Table::new();
    t.push("frequency_hz", r.sum.frequencies_hz.clone());
    for (name, e) in [
        ("sum", &r.sum),
        ("difference", &r.difference),
        ("meter", &r.meter),
        ("msc", &r.msc),
        ("residual", &r.residual_normalized),
    ] {
        t.push(name, e.values.clone()).push(format!("{name}_stderr"), e.stderr.clone());
    }
    t
}

pub fn cmd_estimate(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<String> {
    let hash = cfg.hash();
    let ds = read_dataset(dataset)?;
    let r = pipeline::run(&ds, &cfg.estimate)?;
    estimate_tables(&r).write_csv(&out.join("spectra.csv"), &hash)?;
    let mut c = Table::new();
    c.push("frequency_hz", r.consistency.frequencies_hz.clone())
        .push("normalized_difference", r.consistency.normalized_difference.clone());
    c.write_csv(&out.join("consistency.csv"), &hash)?;
    for b in &r.banded {
        b.banded.to_table().write_csv(&out.join(format!("residual_banded_{:.0}hz.csv", b.width_hz)), &hash)?;
    }
    let report = format!(
        "config_hash = {hash}\ndataset_hash = {}\n{}",
        ds.meta.config_hash,
        r.summary()
    );
    write(out.join("report.txt"), &report)?;
    Ok(report)
}

fn targets_from_dataset(cfg: &RunConfig, dataset: &Path) -> Result<Vec<(TargetKind, SpectrumEstimate)>> {
    let ds = read_dataset(dataset)?;
    let r = pipeline::run(&ds, &cfg.estimate)?;
    let mut t = vec![(TargetKind::Signal, r.sum)];
    if cfg.fit.include_meter {
        t.push((TargetKind::Meter, r.meter));
    }
    Ok(t)
}

/// Noiseless self-consistency target on the synthesis frequency grid.
fn targets_from_model(cfg: &RunConfig, vacuum_only: bool) -> Result<Vec<(TargetKind, SpectrumEstimate)>> {
    let system = system_for(cfg, vacuum_only)?;
    let df = cfg.synth.sample_rate_hz / cfg.synth.segment_length as f64;
    let (lo, hi) = cfg.fit.band_hz;
    let freqs: Vec<f64> = ((lo / df).ceil() as usize..=(hi / df).floor() as usize).map(|k| k as f64 * df).collect();
    let mut t = vec![(TargetKind::Signal, model_target(&system, TargetKind::Signal, &freqs, 0.01)?)];
    if cfg.fit.include_meter {
        t.push((TargetKind::Meter, model_target(&system, TargetKind::Meter, &freqs, 0.01)?));
    }
    Ok(t)
}

pub fn run_fit(cfg: &RunConfig, vacuum_only: bool, dataset: Option<&Path>) -> Result<FitReport> {
    let targets = match dataset {
        Some(p) => targets_from_dataset(cfg, p)?,
        None => targets_from_model(cfg, vacuum_only)?,
    };
    let targets = if cfg.fit.include_signal {
        targets
    } else {
        targets.into_iter().filter(|(k, _)| *k != TargetKind::Signal).collect()
    };
    fit(&FitProblem {
        base: system_for(cfg, vacuum_only)?,
        bounds: cfg.fit.bounds.clone(),
        targets,
        settings: cfg.fit_settings(),
    })
}

pub fn cmd_fit(cfg: &RunConfig, vacuum_only: bool, dataset: Option<&Path>, out: &Path) -> Result<String> {
    let hash = cfg.hash();
    let r = run_fit(cfg, vacuum_only, dataset)?;
    r.curves_table().write_csv(&out.join("fit_curves.csv"), &hash)?;
    let report = format!("config_hash = {hash}\n{}", r.summary());
    write(out.join("fit_report.txt"), &report)?;
    Ok(report)
}
