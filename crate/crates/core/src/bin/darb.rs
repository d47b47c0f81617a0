use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::{info, warn};

use darb::beamsim::{BeamMethod, SchedulingMode};
use darb::experiments::{self, Experiment, ExperimentSpec};
use darb::optimizer::CVariant;
use darb::sysconfig::{ConfigFile, EeUnits};
use darb::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Fig2,
    Fig3,
    Fig4,
    Optimize,
    Sweep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhiArg {
    Haar,
    PhaseDft,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CVariantArg {
    Corrected,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitsArg {
    BitsPerJoule,
    Spectral,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Ideal,
    Full,
}

/// Energy-efficiency experiments for random-beam RIS downlinks.
#[derive(Debug, Parser)]
#[command(name = "darb", version)]
struct Cli {
    #[arg(value_enum)]
    experiment: ExperimentArg,
    /// Flat JSON file overriding the built-in parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    trials: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run the exhaustive (L, P_T) grid and report the gap.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    tfs_alpha: Option<f64>,
    /// Distance used for the scalar path loss of the analytic model, metres.
    #[arg(long)]
    beta_ref_dist: Option<f64>,
    #[arg(long, value_enum)]
    c_variant: Option<CVariantArg>,
    #[arg(long, value_enum)]
    phi: Option<PhiArg>,
    #[arg(long, value_enum)]
    units: Option<UnitsArg>,
    /// Scheduler for the fig2/fig3 rate estimates.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    l_list: Option<Vec<usize>>,
    /// Reference distances for `sweep`, metres.
    #[arg(long, value_delimiter = ',')]
    d_ref_list: Option<Vec<f64>>,
    /// Linear P_T/σ² for the i.i.d. unit-gain users of fig4.
    #[arg(long, conflicts_with = "fig4_layout")]
    iid_snr: Option<f64>,
    /// Run fig4 on the placed user layout instead of i.i.d. users.
    #[arg(long)]
    fig4_layout: bool,
    /// Write the trial-level trace at the optimum (optimize only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl Cli {
    fn resolve(&self) -> darb::Result<ExperimentSpec> {
        let experiment = match self.experiment {
            ExperimentArg::Fig2 => Experiment::Fig2,
            ExperimentArg::Fig3 => Experiment::Fig3,
            ExperimentArg::Fig4 => Experiment::Fig4,
            ExperimentArg::Optimize => Experiment::Optimize,
            ExperimentArg::Sweep => Experiment::Sweep,
        };
        let mut spec = ExperimentSpec::new(experiment);
        if let Some(path) = &self.config {
            ConfigFile::load(path)?.apply(&mut spec.scenario);
        }
        spec.seed = self.seed;
        spec.oracle = self.oracle;
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(a) = self.tfs_alpha {
            spec.scenario.system.alpha = a;
        }
        if let Some(d) = self.beta_ref_dist {
            spec.scenario.geometry.d_ref = d;
        }
        if let Some(c) = self.c_variant {
            spec.c_variant = match c {
                CVariantArg::Corrected => CVariant::Corrected,
                CVariantArg::Paper => CVariant::Paper,
            };
        }
        if let Some(p) = self.phi {
            spec.method = match p {
                PhiArg::Haar => BeamMethod::Haar,
                PhiArg::PhaseDft => BeamMethod::PhaseDft,
            };
        }
        if let Some(u) = self.units {
            spec.units = match u {
                UnitsArg::BitsPerJoule => EeUnits::BitsPerJoule,
                UnitsArg::Spectral => EeUnits::Spectral,
            };
        }
        if let Some(m) = self.mode {
            spec.mode = match m {
                ModeArg::Ideal => SchedulingMode::Ideal,
                ModeArg::Full => SchedulingMode::Full,
            };
        }
        if let Some(k) = &self.k_list {
            spec.k_list = k.clone();
        }
        if let Some(l) = &self.l_list {
            spec.l_list = l.clone();
        }
        if let Some(d) = &self.d_ref_list {
            spec.d_ref_list = d.clone();
        }
        if self.fig4_layout {
            spec.iid_snr = None;
        } else if let Some(s) = self.iid_snr {
            spec.iid_snr = Some(s);
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn open_out(path: Option<&PathBuf>) -> darb::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io { path: p.clone(), source: e })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_optimize(cli: &Cli, spec: &ExperimentSpec) -> darb::Result<u8> {
    let report = match experiments::run_optimize(spec) {
        Ok(r) => r,
        Err(interrupted) => {
            eprintln!("error: {}", interrupted.error);
            eprintln!("partial trace ({} records):", interrupted.trace.len());
            for r in &interrupted.trace {
                eprintln!("  t={} L={} P_T={} W EE={}", r.t, r.l, r.p_t, r.ee);
            }
            let code = match interrupted.error {
                Error::Infeasible { .. } => EXIT_INFEASIBLE,
                _ => EXIT_ERROR,
            };
            return Ok(code);
        }
    };
    experiments::write_optimize_trace(spec, &report, open_out(cli.out.as_ref())?)?;
    let r = &report.result;
    let u = spec.units.column_suffix();
    eprintln!(
        "L*={} P_T*={:.6} W ({:.4} dBW) EE={:.6e} {u} iterations={} converged={}",
        r.l,
        r.p_t,
        darb::sysconfig::watts_to_dbw(r.p_t),
        report.scale * r.ee,
        r.iterations,
        r.converged
    );
    eprintln!("monte carlo EE at optimum: {:.6e} ± {:.2e} {u}", report.mc_ee, report.mc_ee_stderr);
    if let Some(g) = report.oracle {
        eprintln!(
            "grid oracle: L={} P_T={:.6} W EE={:.6e} {u} gap={:.3e}",
            g.l,
            g.p_t,
            report.scale * g.ee,
            report.scale * (g.ee - r.ee)
        );
    }
    if let Some(path) = &cli.trace {
        let file = File::create(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        experiments::write_optimum_trace(spec, &report, BufWriter::new(file))?;
        info!("trial trace written to {}", path.display());
    }
    Ok(if r.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn run(cli: &Cli) -> darb::Result<u8> {
    let spec = cli.resolve()?;
    info!("{}", spec.provenance());
    if spec.experiment == Experiment::Optimize {
        return run_optimize(cli, &spec);
    }
    if cli.trace.is_some() {
        warn!("--trace only applies to optimize; ignored");
    }
    experiments::run_to_csv(&spec, open_out(cli.out.as_ref())?)?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Infeasible { .. } => EXIT_INFEASIBLE,
                _ => EXIT_ERROR,
            })
        }
    }
}
