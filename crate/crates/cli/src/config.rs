//! Experiment configuration: a TOML file of named sections, with every key
//! also settable from the command line as `--section.key value`.

use std::path::{Path, PathBuf};

use qkdsim::dualrail::{EncodingScheme, Site};
use qkdsim::montecarlo::{HardwareProfile, SendMode};
use qkdsim::protocols::{Distribution, PairKind};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

const YORKTOWN: &str = include_str!("../profiles/yorktown.toml");
const BOGOTA: &str = include_str!("../profiles/bogota.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Bb84,
    B92,
    Bbm92,
    DualRail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Ad,
    Gad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Analytic,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Gamma,
    GammaP,
    Beta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    pub noise: NoiseKind,
    /// Readout flip probability.
    pub delta: f64,
    /// GAD excitation parameter when it is not swept.
    pub p: f64,
    pub pair: PairKind,
    pub distribution: Distribution,
    /// Fixes Bob's arm and sweeps Alice's for an asymmetric BBM92 run.
    pub gamma_b: Option<f64>,
    pub scheme: EncodingScheme,
    pub fault: Site,
    pub beta: f64,
    pub source: Source,
    /// Adds an `l_sec` column for a sifted key of this length.
    pub l_sift: Option<u64>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::Bb84,
            noise: NoiseKind::Ad,
            delta: 0.0,
            p: 0.5,
            pair: PairKind::Correlated,
            distribution: Distribution::CharlieMidpoint,
            gamma_b: None,
            scheme: EncodingScheme::AncillaBased,
            fault: Site::None,
            beta: 0.0,
            source: Source::Analytic,
            l_sift: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub parameter: Option<SweepParameter>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotsSection {
    pub shots_per_block: u64,
    pub blocks: u64,
    pub seed: u64,
    pub mode: SendMode,
    /// Physical qubits for the target; defaults to `0..k`.
    pub qubits: Option<Vec<usize>>,
    /// Explicit identity-gate counts. When absent, `delay_points` counts are
    /// spaced evenly up to the delay that damps the first qubit to
    /// `max_gamma`.
    pub delays: Option<Vec<u64>>,
    pub delay_points: usize,
    pub max_gamma: f64,
    /// Replaces every qubit's readout error.
    pub readout_error: Option<f64>,
    /// Replaces the profile's CNOT failure probability.
    pub cnot_beta: Option<f64>,
}

impl Default for ShotsSection {
    fn default() -> Self {
        Self {
            shots_per_block: 8192,
            blocks: 4,
            seed: 0,
            mode: SendMode::Block,
            qubits: None,
            delays: None,
            delay_points: 11,
            max_gamma: 0.5,
            readout_error: None,
            cnot_beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSection {
    /// Rail damping held fixed while β is swept.
    pub gamma: f64,
    pub sites: Vec<Site>,
    pub scheme: EncodingScheme,
}

impl Default for BetaSection {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            sites: Site::FAULTY.to_vec(),
            scheme: EncodingScheme::AncillaBased,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Preset name (`yorktown`, `bogota`) or path to a profile file.
    pub profile: String,
    pub protocol: ProtocolSection,
    pub sweep: SweepSection,
    pub shots: ShotsSection,
    pub beta: BetaSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: "yorktown".into(),
            protocol: ProtocolSection::default(),
            sweep: SweepSection::default(),
            shots: ShotsSection::default(),
            beta: BetaSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// A resolved sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(config_error(format!("{name} = {x} is outside [0, 1]")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `overrides` and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                text.parse::<Table>()
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for (key, raw) in overrides {
            apply_override(&mut table, key, raw)?;
        }
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.protocol;
        check_unit("protocol.delta", p.delta)?;
        check_unit("protocol.p", p.p)?;
        check_unit("protocol.beta", p.beta)?;
        if let Some(g) = p.gamma_b {
            check_unit("protocol.gamma_b", g)?;
        }
        if p.l_sift == Some(0) {
            return Err(config_error("protocol.l_sift must be positive"));
        }
        let s = &self.sweep;
        for (name, v) in [("sweep.start", s.start), ("sweep.stop", s.stop)] {
            if let Some(v) = v {
                check_unit(name, v)?;
            }
        }
        if let (Some(a), Some(b)) = (s.start, s.stop) {
            if a > b {
                return Err(config_error(format!("sweep.start = {a} exceeds sweep.stop = {b}")));
            }
        }
        if s.points == Some(0) {
            return Err(config_error("sweep.points must be at least 1"));
        }
        let sh = &self.shots;
        if sh.shots_per_block == 0 || sh.blocks == 0 {
            return Err(config_error("shots.shots_per_block and shots.blocks must be at least 1"));
        }
        if sh.delay_points == 0 {
            return Err(config_error("shots.delay_points must be at least 1"));
        }
        if !(0.0..1.0).contains(&sh.max_gamma) {
            return Err(config_error(format!(
                "shots.max_gamma = {} is outside [0, 1)",
                sh.max_gamma
            )));
        }
        if let Some(d) = sh.readout_error {
            check_unit("shots.readout_error", d)?;
        }
        if let Some(b) = sh.cnot_beta {
            check_unit("shots.cnot_beta", b)?;
        }
        check_unit("beta.gamma", self.beta.gamma)?;
        if self.beta.sites.is_empty() || self.beta.sites.contains(&Site::None) {
            return Err(config_error("beta.sites must list encoder, post-selection or decoder"));
        }
        self.hardware_profile()?;
        Ok(())
    }

    /// Axis for `parameter`, filled from the sweep section where it applies.
    pub fn grid(&self, parameter: SweepParameter, default: Grid) -> Grid {
        let mut g = default;
        if self.sweep.parameter.is_none_or(|p| p == parameter) {
            g.start = self.sweep.start.unwrap_or(g.start);
            g.stop = self.sweep.stop.unwrap_or(g.stop);
            g.points = self.sweep.points.unwrap_or(g.points);
        }
        g
    }

    /// The selected hardware profile with the shot-section overrides applied.
    pub fn hardware_profile(&self) -> Result<HardwareProfile> {
        let mut profile = load_profile(&self.profile)?;
        if let Some(d) = self.shots.readout_error {
            for q in &mut profile.qubits {
                q.readout_error = d;
            }
        }
        if let Some(b) = self.shots.cnot_beta {
            profile.cnot_beta = b;
        }
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses a preset name or a profile file.
pub fn load_profile(name: &str) -> Result<HardwareProfile> {
    let (text, origin) = match name {
        "yorktown" => (YORKTOWN.to_string(), name.to_string()),
        "bogota" => (BOGOTA.to_string(), name.to_string()),
        path if path.ends_with(".toml") => (
            std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.into(),
                source,
            })?,
            path.to_string(),
        ),
        other => {
            return Err(config_error(format!(
                "unknown profile {other:?}; use yorktown, bogota or a .toml path"
            )))
        }
    };
    toml::from_str(&text).map_err(|e| config_error(format!("profile {origin}: {}", e.message())))
}

/// Sets `section.key` (or a top-level `key`) in `table`. The value is read
/// as a TOML literal when possible and as a bare string otherwise.
pub fn apply_override(table: &mut Table, key: &str, raw: &str) -> Result<()> {
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    match parts.as_slice() {
        [k] => {
            table.insert((*k).to_string(), value);
        }
        [section, k] => {
            let entry = table
                .entry((*section).to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => {
                    t.insert((*k).to_string(), value);
                }
                _ => return Err(config_error(format!("{section} is not a section"))),
            }
        }
        _ => return Err(config_error(format!("malformed override key {key:?}"))),
    }
    Ok(())
}

/// Splits trailing `--section.key value` arguments into pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| config_error(format!("unexpected argument {flag:?}")))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| config_error(format!("--{key} needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        out.push((key, value));
    }
    Ok(out)
}
