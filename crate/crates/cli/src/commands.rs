//! `rates`, `shots` and `sweep-beta`.

use qkdsim::dualrail::{
    encoded_key_rate, fault_pass_probability, gad_encoded_rates, table1_rates, EncodedNoise,
    EncodingScheme, FaultSite, Site,
};
use qkdsim::montecarlo::{finite_key, run_blocks, HardwareProfile, ShotPlan, Target};
use qkdsim::noise::{AdParams, GadParams};
use qkdsim::protocols::{
    analytic_rates, raw_key_fraction, secure_fraction, secure_length, simulate_protocol,
    ChannelNoise, ErrorRates, ProtocolConfig,
};
use qkdsim::Error;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Grid, NoiseKind, ProtocolKind, Source, SweepParameter};
use crate::error::{CliError, Result};
use crate::table::{fmt_float, Table};

pub const RATES_COLUMNS: &[&str] = &["e_b", "e_p", "sift", "secure_fraction", "l_sec", "provenance"];

pub const SHOTS_COLUMNS: &[&str] = &[
    "n_identity_gates",
    "gamma",
    "qber",
    "phase_error",
    "sifted_bits",
    "l_sec",
];

pub const SWEEP_BETA_COLUMNS: &[&str] = &[
    "site",
    "beta",
    "gamma",
    "source",
    "pass",
    "e_b_joint",
    "e_p_joint",
    "e_b",
    "e_p",
    "secure_fraction",
    "secure_fraction_no_sift",
];

pub const GAMMA_GRID: Grid = Grid {
    start: 0.0,
    stop: 1.0,
    points: 101,
};

pub const GAMMA_P_GRID: Grid = Grid {
    start: 0.0,
    stop: 1.0,
    points: 21,
};

pub const BETA_GRID: Grid = Grid {
    start: 0.0,
    stop: 0.2,
    points: 41,
};

fn unsupported(what: &str) -> CliError {
    CliError::Model(Error::Unsupported(what.into()))
}

/// Rates at one grid point, and whether they come from a closed form.
fn rates_at(cfg: &ExperimentConfig, gamma: f64, p: f64) -> Result<(ErrorRates, Source)> {
    let pc = &cfg.protocol;
    if pc.kind != ProtocolKind::Bb84 && pc.kind != ProtocolKind::DualRail && pc.noise == NoiseKind::Gad {
        return Err(unsupported("generalized amplitude damping outside BB84"));
    }
    let protocol = match pc.kind {
        ProtocolKind::Bb84 => {
            let noise = match pc.noise {
                NoiseKind::Ad => ChannelNoise::Ad(AdParams::new(gamma)?),
                NoiseKind::Gad => ChannelNoise::Gad(GadParams::new(gamma, p)?),
            };
            Some(ProtocolConfig::bb84(noise, pc.delta)?)
        }
        ProtocolKind::B92 => Some(ProtocolConfig::b92(gamma, pc.delta)?),
        ProtocolKind::Bbm92 => Some(match pc.gamma_b {
            Some(gb) => ProtocolConfig::bbm92_asymmetric(gamma, gb, pc.delta)?,
            None => ProtocolConfig::bbm92(pc.pair, pc.distribution, gamma, pc.delta)?,
        }),
        ProtocolKind::DualRail => None,
    };
    if let Some(protocol) = protocol {
        let rates = match pc.source {
            Source::Analytic => analytic_rates(&protocol)?,
            Source::Oracle => simulate_protocol(&protocol)?,
        };
        return Ok((rates, pc.source));
    }

    if pc.delta != 0.0 {
        return Err(unsupported("readout error on dual-rail runs"));
    }
    let gad = match pc.noise {
        NoiseKind::Ad => GadParams::from(AdParams::new(gamma)?),
        NoiseKind::Gad => GadParams::new(gamma, p)?,
    };
    let fault = FaultSite::new(pc.fault, pc.beta)?;
    let analytic = pc.source == Source::Analytic
        && (fault.site() == Site::None
            || (pc.noise == NoiseKind::Ad && pc.scheme == EncodingScheme::AncillaBased));
    if analytic {
        if fault.site() == Site::None {
            return Ok((gad_encoded_rates(gad), Source::Analytic));
        }
        return Ok((table_rates(fault, gamma)?, Source::Analytic));
    }
    let noise = match pc.noise {
        NoiseKind::Ad => EncodedNoise::Ad(AdParams::new(gamma)?),
        NoiseKind::Gad => EncodedNoise::Gad(gad),
    };
    let report = encoded_key_rate(pc.scheme, noise, fault)?;
    Ok((report.rates, Source::Oracle))
}

/// Conditional rates built from the joint Table 1 entries.
fn table_rates(fault: FaultSite, gamma: f64) -> Result<ErrorRates> {
    let (e_b, e_p) = table1_rates(fault, gamma)?;
    let pass = fault_pass_probability(fault, gamma)?;
    if pass < 1e-14 {
        return Ok(ErrorRates::new(0.0, 0.0, 0.0)?);
    }
    Ok(ErrorRates::new(
        (e_b / pass).min(1.0),
        (e_p / pass).min(1.0),
        pass,
    )?)
}

fn provenance(s: Source) -> &'static str {
    match s {
        Source::Analytic => "analytic",
        Source::Oracle => "oracle",
    }
}

/// Key-rate sweep over γ, or over (γ, p) for generalized damping.
pub fn rates(cfg: &ExperimentConfig) -> Result<Table> {
    let two_d = cfg.sweep.parameter == Some(SweepParameter::GammaP);
    if cfg.sweep.parameter == Some(SweepParameter::Beta) {
        return Err(CliError::Config(
            "rates sweeps gamma or gamma-p; use sweep-beta for beta".into(),
        ));
    }
    if two_d && cfg.protocol.noise != NoiseKind::Gad {
        return Err(CliError::Config("a gamma-p sweep needs noise = \"gad\"".into()));
    }
    let points: Vec<(f64, f64)> = if two_d {
        let axis = cfg.grid(SweepParameter::GammaP, GAMMA_P_GRID).values();
        axis.iter()
            .flat_map(|&g| axis.iter().map(move |&p| (g, p)))
            .collect()
    } else {
        cfg.grid(SweepParameter::Gamma, GAMMA_GRID)
            .values()
            .into_iter()
            .map(|g| (g, cfg.protocol.p))
            .collect()
    };
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(g, p)| -> Result<Vec<String>> {
            let (r, source) = rates_at(cfg, g, p)?;
            let mut row = vec![fmt_float(g)];
            if two_d {
                row.push(fmt_float(p));
            }
            row.extend([
                fmt_float(r.e_b),
                fmt_float(r.e_p),
                fmt_float(r.sift),
                fmt_float(secure_fraction(&r)),
                cfg.protocol
                    .l_sift
                    .map(|l| secure_length(l, &r).to_string())
                    .unwrap_or_default(),
                provenance(source).into(),
            ]);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["gamma"];
    if two_d {
        header.push("p");
    }
    header.extend_from_slice(RATES_COLUMNS);
    let mut table = Table::new(header);
    table.rows = rows;
    Ok(table)
}

fn target(cfg: &ExperimentConfig) -> Result<Target> {
    let pc = &cfg.protocol;
    let default_qubits = match pc.kind {
        ProtocolKind::Bb84 | ProtocolKind::B92 => vec![0],
        ProtocolKind::Bbm92 => vec![0, 1],
        ProtocolKind::DualRail => (0..pc.scheme.n_qubits()).collect(),
    };
    let q = cfg.shots.qubits.clone().unwrap_or(default_qubits);
    let wrong_count = |n: usize| {
        CliError::Config(format!(
            "shots.qubits lists {} qubits, {:?} needs {n}",
            q.len(),
            pc.kind
        ))
    };
    Ok(match pc.kind {
        ProtocolKind::Bb84 | ProtocolKind::B92 => {
            let [qubit] = q[..] else { return Err(wrong_count(1)) };
            if pc.kind == ProtocolKind::Bb84 {
                Target::Bb84 { qubit }
            } else {
                Target::B92 { qubit }
            }
        }
        ProtocolKind::Bbm92 => {
            let [a, b] = q[..] else { return Err(wrong_count(2)) };
            Target::Bbm92 {
                pair: pc.pair,
                distribution: pc.distribution,
                qubits: [a, b],
            }
        }
        ProtocolKind::DualRail => Target::DualRail {
            scheme: pc.scheme,
            qubits: q,
        },
    })
}

/// Evenly spaced identity-gate counts up to the delay that damps `qubit`
/// to `max_gamma`.
fn default_delays(profile: &HardwareProfile, qubit: usize, max_gamma: f64, points: usize) -> Result<Vec<u64>> {
    if profile.gate_time_ns <= 0.0 {
        return Err(CliError::Config(
            "profile has zero gate time; list shots.delays explicitly".into(),
        ));
    }
    let t1_s = profile.qubits[qubit].t1_us * 1e-6;
    let max_gates = (-(-max_gamma).ln_1p() * t1_s / (profile.gate_time_ns * 1e-9)).round();
    if points == 1 {
        return Ok(vec![0]);
    }
    Ok((0..points)
        .map(|i| (max_gates * i as f64 / (points - 1) as f64).round() as u64)
        .collect())
}

/// Monte Carlo QBER and finite key length per delay.
pub fn shots(cfg: &ExperimentConfig) -> Result<Table> {
    let profile = cfg.hardware_profile()?;
    let target = target(cfg)?;
    let first = target.qubits()[0];
    if first >= profile.qubits.len() {
        return Err(CliError::Model(Error::QubitSelection(format!(
            "profile {} has no qubit {first}",
            profile.name
        ))));
    }
    let delays = match &cfg.shots.delays {
        Some(d) => d.clone(),
        None => default_delays(&profile, first, cfg.shots.max_gamma, cfg.shots.delay_points)?,
    };
    let s = &cfg.shots;
    let rows: Vec<Vec<String>> = delays
        .par_iter()
        .map(|&n| -> Result<Vec<String>> {
            let plan = ShotPlan {
                shots_per_block: s.shots_per_block,
                blocks: s.blocks,
                n_identity_gates: n,
                seed: s.seed,
                mode: s.mode,
            };
            let est = run_blocks(&target, &plan, &profile)?;
            let report = finite_key(&est);
            Ok(vec![
                n.to_string(),
                fmt_float(profile.gamma(first, n)?),
                fmt_float(est.qber),
                fmt_float(est.phase_error),
                est.sifted_bits.to_string(),
                report.l_sec.unwrap_or(0).to_string(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(SHOTS_COLUMNS.to_vec());
    table.comments = vec![
        format!("seed = {}", s.seed),
        format!("profile = {}", profile.name),
        format!("target = {target:?}"),
    ];
    if profile.gate_time_assumed {
        table
            .comments
            .push(format!("gate_time_ns = {} (assumed)", profile.gate_time_ns));
    }
    table.rows = rows;
    Ok(table)
}

/// One row of the β sweep, in [`SWEEP_BETA_COLUMNS`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaRow {
    pub site: Site,
    pub beta: f64,
    pub gamma: f64,
    pub source: Source,
    pub pass: f64,
    pub e_b_joint: f64,
    pub e_p_joint: f64,
    pub rates: ErrorRates,
}

impl BetaRow {
    pub fn secure_fraction(&self) -> f64 {
        secure_fraction(&self.rates)
    }

    pub fn secure_fraction_no_sift(&self) -> f64 {
        raw_key_fraction(&self.rates).max(0.0)
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.site.name().into(),
            fmt_float(self.beta),
            fmt_float(self.gamma),
            provenance(self.source).replace("analytic", "table"),
            fmt_float(self.pass),
            fmt_float(self.e_b_joint),
            fmt_float(self.e_p_joint),
            fmt_float(self.rates.e_b),
            fmt_float(self.rates.e_p),
            fmt_float(self.secure_fraction()),
            fmt_float(self.secure_fraction_no_sift()),
        ]
    }
}

pub fn beta_rows(cfg: &ExperimentConfig) -> Result<Vec<BetaRow>> {
    let gamma = cfg.beta.gamma;
    let scheme = cfg.beta.scheme;
    let betas = cfg.grid(SweepParameter::Beta, BETA_GRID).values();
    let jobs: Vec<(Site, f64, Source)> = cfg
        .beta
        .sites
        .iter()
        .flat_map(|&site| {
            betas.iter().flat_map(move |&b| {
                [(site, b, Source::Analytic), (site, b, Source::Oracle)]
            })
        })
        .filter(|&(_, _, src)| src == Source::Oracle || scheme == EncodingScheme::AncillaBased)
        .collect();
    jobs.par_iter()
        .map(|&(site, beta, source)| -> Result<BetaRow> {
            let fault = FaultSite::new(site, beta)?;
            let (rates, e_b_joint, e_p_joint) = match source {
                Source::Analytic => {
                    let (jb, jp) = table1_rates(fault, gamma)?;
                    (table_rates(fault, gamma)?, jb, jp)
                }
                Source::Oracle => {
                    let noise = EncodedNoise::Ad(AdParams::new(gamma)?);
                    let r = encoded_key_rate(scheme, noise, fault)?.rates;
                    (r, r.e_b * r.sift, r.e_p * r.sift)
                }
            };
            Ok(BetaRow {
                site,
                beta,
                gamma,
                source,
                pass: rates.sift,
                e_b_joint,
                e_p_joint,
                rates,
            })
        })
        .collect()
}

/// Key rate of dual-rail BB84 against the CNOT failure probability, one
/// curve per fault site, from both Table 1 and the circuit simulation.
pub fn sweep_beta(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(SWEEP_BETA_COLUMNS.to_vec());
    table.rows = beta_rows(cfg)?.iter().map(BetaRow::cells).collect();
    Ok(table)
}
