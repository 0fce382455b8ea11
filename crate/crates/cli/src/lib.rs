//! Experiment runner for `qkdsim`: key-rate sweeps, closed-form
//! verification, Monte Carlo campaigns and CNOT-fault sweeps, all written
//! as CSV.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;
pub mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_overrides, ExperimentConfig};
use crate::error::{exit, CliError, Result};
use crate::table::Table;

const RATES_HELP: &str = "\
CSV columns: gamma[,p],e_b,e_p,sift,secure_fraction,l_sec,provenance
  p is present only for a gamma-p sweep; l_sec is empty unless protocol.l_sift is set.
  provenance is analytic (closed form) or oracle (density-matrix simulation).";

const SHOTS_HELP: &str = "\
CSV columns: n_identity_gates,gamma,qber,phase_error,sifted_bits,l_sec
  Preceded by '# seed = ...', '# profile = ...' and '# target = ...' comment lines,
  plus '# gate_time_ns = ... (assumed)' for profiles without a published gate time.
  gamma is the damping of the first target qubit at that delay.";

const SWEEP_BETA_HELP: &str = "\
CSV columns: site,beta,gamma,source,pass,e_b_joint,e_p_joint,e_b,e_p,secure_fraction,secure_fraction_no_sift
  source is table (closed-form joint rates) or oracle (circuit simulation).
  e_b, e_p are conditional on passing post-selection; secure_fraction includes the
  pass probability as sifting factor, secure_fraction_no_sift omits it.";

#[derive(Debug, Parser)]
#[command(name = "qkdsim", version, about = "Key-rate simulation for BB84, B92, BBM92 and dual-rail BB84")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep damping and write error and key rates.
    #[command(after_help = RATES_HELP)]
    Rates(Common),
    /// Check every closed form against the density-matrix simulation.
    Verify(Common),
    /// Sample block transmissions on a device profile.
    #[command(after_help = SHOTS_HELP)]
    Shots(Common),
    /// Sweep the CNOT failure probability for dual-rail BB84.
    #[command(name = "sweep-beta", after_help = SWEEP_BETA_HELP)]
    SweepBeta(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with [protocol], [sweep], [shots], [beta] and [output] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; stdout when omitted. The effective config is written next
    /// to it as <out>.config.toml.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// yorktown, bogota, or a profile .toml file.
    #[arg(long)]
    pub profile: Option<String>,
    /// Grid points (delays for `shots`).
    #[arg(long)]
    pub points: Option<usize>,
    /// Per-key overrides, e.g. `--protocol.delta 0.03 --sweep.stop 0.5`.
    #[arg(
        value_name = "--SECTION.KEY VALUE",
        trailing_var_arg = true,
        allow_hyphen_values = true
    )]
    pub overrides: Vec<String>,
}

impl Common {
    fn config(&self, points_key: &str) -> Result<ExperimentConfig> {
        // Named flags given after the first override land in the trailing
        // list; map them back so flag order does not matter.
        let mut config_path = self.config.clone();
        let mut pairs = Vec::new();
        for (key, value) in parse_overrides(&self.overrides)? {
            let quoted = || toml::Value::String(value.clone()).to_string();
            match key.as_str() {
                "config" => config_path = Some(PathBuf::from(&value)),
                "seed" => pairs.push(("shots.seed".into(), value)),
                "points" => pairs.push((points_key.into(), value)),
                "out" => pairs.push(("output.path".into(), quoted())),
                "profile" => pairs.push(("profile".into(), quoted())),
                _ => pairs.push((key, value)),
            }
        }
        if let Some(s) = self.seed {
            pairs.push(("shots.seed".into(), s.to_string()));
        }
        if let Some(p) = &self.profile {
            pairs.push(("profile".into(), toml::Value::String(p.clone()).to_string()));
        }
        if let Some(n) = self.points {
            pairs.push((points_key.into(), n.to_string()));
        }
        if let Some(o) = &self.out {
            let path = toml::Value::String(o.display().to_string()).to_string();
            pairs.push(("output.path".into(), path));
        }
        ExperimentConfig::load(config_path.as_deref(), &pairs)
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.toml");
    PathBuf::from(name)
}

fn emit(command: &str, cfg: &ExperimentConfig, table: &Table) -> Result<()> {
    let out = cfg.output.path.as_deref();
    table.write(out)?;
    if let Some(out) = out {
        let path = sidecar_path(out);
        let text = format!("# qkdsim {command}\n{}", cfg.to_toml());
        std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}

/// Runs one parsed command and returns the process exit status.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Rates(c) => {
            let cfg = c.config("sweep.points")?;
            emit("rates", &cfg, &commands::rates(&cfg)?)?;
        }
        Command::Shots(c) => {
            let cfg = c.config("shots.delay_points")?;
            emit("shots", &cfg, &commands::shots(&cfg)?)?;
        }
        Command::SweepBeta(c) => {
            let cfg = c.config("sweep.points")?;
            emit("sweep-beta", &cfg, &commands::sweep_beta(&cfg)?)?;
        }
        Command::Verify(c) => {
            parse_overrides(&c.overrides)?;
            return Ok(run_verify(&verify::Formulas::default(), c.points.unwrap_or(11)));
        }
    }
    Ok(exit::SUCCESS)
}

/// Prints the verification report and returns its exit status.
pub fn run_verify(formulas: &verify::Formulas, points: usize) -> i32 {
    let report = verify::run(formulas, points);
    print!("{}", report.render());
    if report.failures() > 0 {
        exit::VERIFICATION_FAILED
    } else {
        exit::SUCCESS
    }
}

/// Parses `args`, runs the command and reports errors on stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG_ERROR } else { exit::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit::CONFIG_ERROR
        }
    }
}
