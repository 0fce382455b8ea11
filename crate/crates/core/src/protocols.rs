//! Error rates and secure key rates for BB84, B92 and BBM92.
//!
//! Every configuration has two routes: a closed-form expression
//! ([`analytic_rates`] and the per-protocol functions) and a density-matrix
//! computation ([`simulate_protocol`]) that prepares the states, runs them
//! through the noise channels and evaluates the error traces with (possibly
//! noisy) measurement operators.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::noise::{
    ad_channel, doubled_delay_gamma, gad_channel, readout_povm, AdParams, Basis, GadParams,
    ReadoutParams,
};
use crate::qmat::{apply_channel, c, measure, DensityMatrix, KrausChannel, PureState};

/// Names of the closed-form operations in this module.
pub const CLOSED_FORM_OPS: &[&str] = &[
    "bb84_rates_ad",
    "bb84_rates_gad",
    "b92_rates",
    "bbm92_rates",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    B92,
    Bbm92,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelNoise {
    Ad(AdParams),
    Gad(GadParams),
}

impl ChannelNoise {
    pub fn gamma(&self) -> f64 {
        match self {
            ChannelNoise::Ad(a) => a.gamma(),
            ChannelNoise::Gad(g) => g.gamma(),
        }
    }

    pub fn channel(&self) -> KrausChannel {
        match *self {
            ChannelNoise::Ad(a) => ad_channel(a),
            ChannelNoise::Gad(g) => gad_channel(g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    /// `(|00> + |11>)/√2`
    Correlated,
    /// `(|01> - |10>)/√2`
    AntiCorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// A source halfway between the parties sends one half to each.
    CharlieMidpoint,
    /// Alice keeps one half and sends the other over the full distance.
    AliceSends,
}

/// One protocol configuration. Build through the constructors, which
/// reject combinations without a closed-form derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// For BBM92 with Charlie this is the half-length channel; for
    /// Alice-sends it is also the half-length value and is doubled internally.
    pub noise: ChannelNoise,
    pub readout_delta: f64,
    pub pair: Option<PairKind>,
    pub distribution: Option<Distribution>,
    pub gamma_a: Option<f64>,
    pub gamma_b: Option<f64>,
}

impl ProtocolConfig {
    pub fn bb84(noise: ChannelNoise, delta: f64) -> Result<Self> {
        Self {
            protocol: Protocol::Bb84,
            noise,
            readout_delta: delta,
            pair: None,
            distribution: None,
            gamma_a: None,
            gamma_b: None,
        }
        .validated()
    }

    pub fn b92(gamma: f64, delta: f64) -> Result<Self> {
        Self {
            protocol: Protocol::B92,
            noise: ChannelNoise::Ad(AdParams::new(gamma)?),
            readout_delta: delta,
            pair: None,
            distribution: None,
            gamma_a: None,
            gamma_b: None,
        }
        .validated()
    }

    pub fn bbm92(pair: PairKind, distribution: Distribution, gamma: f64, delta: f64) -> Result<Self> {
        Self {
            protocol: Protocol::Bbm92,
            noise: ChannelNoise::Ad(AdParams::new(gamma)?),
            readout_delta: delta,
            pair: Some(pair),
            distribution: Some(distribution),
            gamma_a: None,
            gamma_b: None,
        }
        .validated()
    }

    /// Correlated pair from a midpoint source with unequal arms.
    pub fn bbm92_asymmetric(gamma_a: f64, gamma_b: f64, delta: f64) -> Result<Self> {
        Self {
            protocol: Protocol::Bbm92,
            noise: ChannelNoise::Ad(AdParams::new(0.5 * (gamma_a + gamma_b))?),
            readout_delta: delta,
            pair: Some(PairKind::Correlated),
            distribution: Some(Distribution::CharlieMidpoint),
            gamma_a: Some(gamma_a),
            gamma_b: Some(gamma_b),
        }
        .validated()
    }

    /// Checks ranges and rejects configurations without a derivation.
    pub fn validated(self) -> Result<Self> {
        check_probability("gamma", self.noise.gamma())?;
        check_probability("delta", self.readout_delta)?;
        if let ChannelNoise::Gad(g) = self.noise {
            check_probability("p", g.p())?;
            if self.protocol != Protocol::Bb84 {
                return Err(Error::Unsupported(format!(
                    "{:?} under generalized amplitude damping",
                    self.protocol
                )));
            }
        }
        match self.protocol {
            Protocol::Bb84 | Protocol::B92 => {
                if self.pair.is_some()
                    || self.distribution.is_some()
                    || self.gamma_a.is_some()
                    || self.gamma_b.is_some()
                {
                    return Err(Error::Invalid(
                        "pair, distribution and per-arm damping only apply to BBM92".into(),
                    ));
                }
            }
            Protocol::Bbm92 => {
                let (pair, dist) = match (self.pair, self.distribution) {
                    (Some(p), Some(d)) => (p, d),
                    _ => {
                        return Err(Error::Invalid(
                            "BBM92 needs a pair kind and a distribution".into(),
                        ))
                    }
                };
                if pair == PairKind::AntiCorrelated && dist == Distribution::AliceSends {
                    return Err(Error::Unsupported(
                        "anti-correlated pair distributed by Alice".into(),
                    ));
                }
                match (self.gamma_a, self.gamma_b) {
                    (None, None) => {}
                    (Some(a), Some(b)) => {
                        check_probability("gamma_a", a)?;
                        check_probability("gamma_b", b)?;
                        if pair != PairKind::Correlated || dist != Distribution::CharlieMidpoint {
                            return Err(Error::Unsupported(
                                "asymmetric arms outside the correlated midpoint setup".into(),
                            ));
                        }
                    }
                    _ => {
                        return Err(Error::Invalid(
                            "gamma_a and gamma_b must be given together".into(),
                        ))
                    }
                }
            }
        }
        Ok(self)
    }

    /// Damping on Alice's and Bob's arm.
    pub fn arm_gammas(&self) -> Result<(f64, f64)> {
        if let (Some(a), Some(b)) = (self.gamma_a, self.gamma_b) {
            return Ok((a, b));
        }
        let g = self.noise.gamma();
        Ok(match self.distribution {
            Some(Distribution::AliceSends) => (0.0, doubled_delay_gamma(g)?),
            _ => (g, g),
        })
    }
}

/// Bit error rate, phase error rate and surviving fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub e_b: f64,
    pub e_p: f64,
    pub sift: f64,
}

impl ErrorRates {
    pub fn new(e_b: f64, e_p: f64, sift: f64) -> Result<Self> {
        Ok(Self {
            e_b: check_probability("e_b", e_b)?,
            e_p: check_probability("e_p", e_p)?,
            sift: check_probability("sift", sift)?,
        })
    }

    /// Clamps values within floating-point noise of `[0, 1]`.
    pub(crate) fn clamped(e_b: f64, e_p: f64, sift: f64) -> Self {
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        Self {
            e_b: clamp(e_b),
            e_p: clamp(e_p),
            sift: clamp(sift),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.e_b - other.e_b)
            .abs()
            .max((self.e_p - other.e_p).abs())
            .max((self.sift - other.sift).abs())
    }
}

/// `h(x) = -x log2 x - (1-x) log2 (1-x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    Ok(entropy(x))
}

pub(crate) fn entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// `1 - h(e_b) - h(e_p)`, possibly negative.
pub fn raw_key_fraction(rates: &ErrorRates) -> f64 {
    1.0 - entropy(rates.e_b) - entropy(rates.e_p)
}

/// `max(0, sift · (1 - h(e_b) - h(e_p)))`.
pub fn secure_fraction(rates: &ErrorRates) -> f64 {
    (rates.sift * raw_key_fraction(rates)).max(0.0)
}

/// `floor(l_sift · (1 - h(e_b) - h(e_p)))`, clamped at zero.
pub fn secure_length(l_sift: u64, rates: &ErrorRates) -> u64 {
    let raw = l_sift as f64 * raw_key_fraction(rates);
    if raw <= 0.0 {
        0
    } else {
        raw.floor() as u64
    }
}

/// Where a report's rates came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReportSource {
    Protocol(ProtocolConfig),
    DualRail(crate::dualrail::EncodedSetup),
    Counts(crate::montecarlo::QberEstimate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFlag {
    /// Post-selection never succeeds; all rates are reported as zero.
    NoSurvivors,
    /// No sifted bits were available.
    EmptyKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub rates: ErrorRates,
    pub secure_fraction: f64,
    pub l_sift: Option<u64>,
    pub l_sec: Option<u64>,
    pub source: ReportSource,
    pub flag: Option<ReportFlag>,
}

impl KeyRateReport {
    pub fn from_rates(rates: ErrorRates, source: ReportSource) -> Self {
        Self {
            secure_fraction: secure_fraction(&rates),
            rates,
            l_sift: None,
            l_sec: None,
            source,
            flag: None,
        }
    }

    /// Adds finite-length bookkeeping for a sifted key of `l_sift` bits.
    pub fn with_sifted_length(mut self, l_sift: u64) -> Self {
        self.l_sift = Some(l_sift);
        self.l_sec = Some(if self.flag.is_some() {
            0
        } else {
            secure_length(l_sift, &self.rates)
        });
        self
    }

    pub(crate) fn flagged(source: ReportSource, flag: ReportFlag) -> Self {
        Self {
            rates: ErrorRates::clamped(0.0, 0.0, 0.0),
            secure_fraction: 0.0,
            l_sift: None,
            l_sec: None,
            source,
            flag: Some(flag),
        }
    }
}

/// BB84 over AD(γ) with readout flip δ:
/// `e_b = γ/2 - δ(γ-1)`, `e_p = (1 + √(1-γ)(2δ-1))/2`.
pub fn bb84_rates_ad(gamma: f64, delta: f64) -> Result<ErrorRates> {
    check_probability("gamma", gamma)?;
    check_probability("delta", delta)?;
    let e_b = gamma / 2.0 - delta * (gamma - 1.0);
    Ok(ErrorRates::clamped(e_b, phase_error_ad(gamma, delta), 1.0))
}

/// BB84 over GAD(γ, p). Both error rates are independent of `p`, with and
/// without readout error, so this coincides with [`bb84_rates_ad`].
pub fn bb84_rates_gad(gamma: f64, p: f64, delta: f64) -> Result<ErrorRates> {
    check_probability("p", p)?;
    bb84_rates_ad(gamma, delta)
}

/// B92 over AD(γ): `e_b = δ`, `e_p` as for BB84.
pub fn b92_rates(gamma: f64, delta: f64) -> Result<ErrorRates> {
    check_probability("gamma", gamma)?;
    check_probability("delta", delta)?;
    Ok(ErrorRates::clamped(delta, phase_error_ad(gamma, delta), 1.0))
}

fn phase_error_ad(gamma: f64, delta: f64) -> f64 {
    0.5 * (1.0 + (1.0 - gamma).sqrt() * (2.0 * delta - 1.0))
}

/// A classical flip on each side with probability δ turns an error rate
/// `e` into `e(1-q) + (1-e)q` with `q = 2δ(1-δ)`.
fn with_two_sided_readout(e: f64, delta: f64) -> f64 {
    let q = 2.0 * delta * (1.0 - delta);
    e * (1.0 - q) + (1.0 - e) * q
}

/// BBM92 closed forms for the derived configurations.
pub fn bbm92_rates(cfg: &ProtocolConfig) -> Result<ErrorRates> {
    let cfg = cfg.validated()?;
    if cfg.protocol != Protocol::Bbm92 {
        return Err(Error::Invalid("bbm92_rates needs a BBM92 configuration".into()));
    }
    let g = cfg.noise.gamma();
    let (e_b, e_p) = match (cfg.pair, cfg.distribution, cfg.gamma_a, cfg.gamma_b) {
        (Some(PairKind::Correlated), Some(Distribution::CharlieMidpoint), Some(ga), Some(gb)) => (
            0.5 * (ga * (1.0 - gb) + gb * (1.0 - ga)),
            0.5 * (1.0 - ((1.0 - ga) * (1.0 - gb)).sqrt()),
        ),
        (Some(PairKind::Correlated), Some(Distribution::CharlieMidpoint), None, None) => {
            (g * (1.0 - g), g / 2.0)
        }
        (Some(PairKind::AntiCorrelated), Some(Distribution::CharlieMidpoint), None, None) => {
            (g, g / 2.0)
        }
        (Some(PairKind::Correlated), Some(Distribution::AliceSends), None, None) => {
            (g - g * g / 2.0, g / 2.0)
        }
        _ => return Err(Error::Unsupported(format!("BBM92 configuration {cfg:?}"))),
    };
    let d = cfg.readout_delta;
    Ok(ErrorRates::clamped(
        with_two_sided_readout(e_b, d),
        with_two_sided_readout(e_p, d),
        1.0,
    ))
}

/// Closed-form rates for any supported configuration.
pub fn analytic_rates(cfg: &ProtocolConfig) -> Result<ErrorRates> {
    let cfg = cfg.validated()?;
    let d = cfg.readout_delta;
    match (cfg.protocol, cfg.noise) {
        (Protocol::Bb84, ChannelNoise::Ad(a)) => bb84_rates_ad(a.gamma(), d),
        (Protocol::Bb84, ChannelNoise::Gad(g)) => bb84_rates_gad(g.gamma(), g.p(), d),
        (Protocol::B92, noise) => b92_rates(noise.gamma(), d),
        (Protocol::Bbm92, _) => bbm92_rates(&cfg),
    }
}

fn bell_state(pair: PairKind) -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let amps = match pair {
        PairKind::Correlated => vec![c(h, 0.0), z, z, c(h, 0.0)],
        PairKind::AntiCorrelated => vec![z, c(h, 0.0), c(-h, 0.0), z],
    };
    DensityMatrix::from_pure(&PureState::new(amps).expect("normalized Bell state"))
}

/// Probability that Bob's (noisy) measurement in `basis` returns the
/// outcome orthogonal to the prepared basis state `sent`.
fn flip_probability(
    channel: &KrausChannel,
    basis: Basis,
    sent: usize,
    readout: ReadoutParams,
) -> Result<f64> {
    let state = DensityMatrix::from_pure(&basis.states()[sent]);
    let received = apply_channel(&state, channel)?;
    let outcomes = measure(&received, &readout_povm(basis, readout))?;
    let wrong = basis.labels()[1 - sent];
    Ok(outcomes.probability(wrong).expect("label present"))
}

/// Rates computed from first principles: prepare, transmit through the
/// Kraus channels, and evaluate the error traces.
pub fn simulate_protocol(cfg: &ProtocolConfig) -> Result<ErrorRates> {
    let cfg = cfg.validated()?;
    let readout = ReadoutParams::new(cfg.readout_delta)?;
    match cfg.protocol {
        Protocol::Bb84 => {
            let ch = cfg.noise.channel();
            let e_b = 0.5
                * (flip_probability(&ch, Basis::Z, 0, readout)?
                    + flip_probability(&ch, Basis::Z, 1, readout)?);
            let e_p = 0.5
                * (flip_probability(&ch, Basis::X, 0, readout)?
                    + flip_probability(&ch, Basis::X, 1, readout)?);
            Ok(ErrorRates::clamped(e_b, e_p, 1.0))
        }
        Protocol::B92 => {
            let ch = cfg.noise.channel();
            let e_b = flip_probability(&ch, Basis::Z, 0, readout)?;
            let e_p = flip_probability(&ch, Basis::X, 0, readout)?;
            Ok(ErrorRates::clamped(e_b, e_p, 1.0))
        }
        Protocol::Bbm92 => simulate_bbm92(&cfg, readout),
    }
}

fn simulate_bbm92(cfg: &ProtocolConfig, readout: ReadoutParams) -> Result<ErrorRates> {
    let pair = cfg.pair.expect("validated BBM92 config");
    let (gamma_a, gamma_b) = cfg.arm_gammas()?;
    let mut rho = bell_state(pair);
    if cfg.distribution == Some(Distribution::CharlieMidpoint) {
        rho = apply_channel(&rho, &ad_channel(AdParams::new(gamma_a)?).on(&[0])?)?;
    }
    rho = apply_channel(&rho, &ad_channel(AdParams::new(gamma_b)?).on(&[1])?)?;

    // Error outcomes: disagreement for the correlated pair, agreement for
    // the anti-correlated one (in both bases).
    let error_rate = |basis: Basis| -> Result<f64> {
        let single = readout_povm(basis, readout);
        let joint = single.tensor(&single)?;
        let outcomes = measure(&rho, &joint)?;
        let [l0, l1] = basis.labels();
        let labels = match pair {
            PairKind::Correlated => [format!("{l0}{l1}"), format!("{l1}{l0}")],
            PairKind::AntiCorrelated => [format!("{l0}{l0}"), format!("{l1}{l1}")],
        };
        Ok(labels
            .iter()
            .map(|l| outcomes.probability(l).expect("label present"))
            .sum())
    };
    Ok(ErrorRates::clamped(
        error_rate(Basis::Z)?,
        error_rate(Basis::X)?,
        1.0,
    ))
}

/// Closed-form rates combined into a report with `l_sift` sifted bits.
pub fn key_report(cfg: &ProtocolConfig, l_sift: u64) -> Result<KeyRateReport> {
    let rates = analytic_rates(cfg)?;
    Ok(KeyRateReport::from_rates(rates, ReportSource::Protocol(*cfg)).with_sifted_length(l_sift))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn ad(g: f64) -> ChannelNoise {
        ChannelNoise::Ad(AdParams::new(g).unwrap())
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(close(binary_entropy(0.5).unwrap(), 1.0, 1e-15));
        let h = binary_entropy(0.11).unwrap();
        assert!(close(h, 0.49992, 1e-5));
        assert!(close(1.0 - 2.0 * h, 0.0, 2e-4));
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn secure_fraction_examples() {
        let f = |b, p, s| secure_fraction(&ErrorRates::new(b, p, s).unwrap());
        assert_eq!(f(0.0, 0.0, 1.0), 1.0);
        let h = entropy(0.11);
        assert!(close(f(0.11, 0.11, 1.0), 1.0 - 2.0 * h, 1e-15));
        assert!(close(f(0.11, 0.11, 1.0), 0.00016, 1e-5));
        assert!(close(f(0.0, 0.0, 0.7), 0.7, 1e-15));
        assert_eq!(f(0.2, 0.2, 1.0), 0.0);
    }

    #[test]
    fn bb84_examples() {
        let r = bb84_rates_ad(0.0, 0.0).unwrap();
        assert_eq!((r.e_b, r.e_p), (0.0, 0.0));
        let r = bb84_rates_ad(0.36, 0.0).unwrap();
        assert!(close(r.e_b, 0.18, 1e-15) && close(r.e_p, 0.1, 1e-15));
        let r = bb84_rates_ad(0.0, 0.03).unwrap();
        assert!(close(r.e_b, 0.03, 1e-15) && close(r.e_p, 0.03, 1e-15));
    }

    #[test]
    fn bb84_gad_examples() {
        for g in [0.0, 0.3, 0.8] {
            assert_eq!(bb84_rates_gad(g, 1.0, 0.0).unwrap(), bb84_rates_ad(g, 0.0).unwrap());
        }
        let r = bb84_rates_gad(0.5, 0.3, 0.0).unwrap();
        assert!(close(r.e_b, 0.25, 1e-15));
        let expected = (1.0 - 0.5f64.sqrt()) / 2.0;
        for p in [0.0, 0.3, 0.9] {
            let cfg = ProtocolConfig::bb84(ChannelNoise::Gad(GadParams::new(0.5, p).unwrap()), 0.0)
                .unwrap();
            let oracle = simulate_protocol(&cfg).unwrap();
            assert!(close(oracle.e_p, expected, 1e-12));
            assert!(close(oracle.e_p, 0.14645, 1e-5));
        }
    }

    #[test]
    fn b92_examples() {
        assert_eq!(b92_rates(0.99, 0.0).unwrap().e_b, 0.0);
        assert!(close(b92_rates(0.36, 0.0).unwrap().e_p, 0.1, 1e-15));
        let r = b92_rates(0.0, 0.1).unwrap();
        assert!(close(r.e_b, 0.1, 1e-15) && close(r.e_p, 0.1, 1e-15));
    }

    #[test]
    fn bbm92_examples() {
        let cfg =
            ProtocolConfig::bbm92(PairKind::Correlated, Distribution::CharlieMidpoint, 0.2, 0.0)
                .unwrap();
        let r = bbm92_rates(&cfg).unwrap();
        assert!(close(r.e_b, 0.16, 1e-15) && close(r.e_p, 0.1, 1e-15));

        let cfg = ProtocolConfig::bbm92(
            PairKind::AntiCorrelated,
            Distribution::CharlieMidpoint,
            0.2,
            0.0,
        )
        .unwrap();
        let r = bbm92_rates(&cfg).unwrap();
        assert!(close(r.e_b, 0.2, 1e-15) && close(r.e_p, 0.1, 1e-15));

        for g in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let sym =
                ProtocolConfig::bbm92(PairKind::Correlated, Distribution::CharlieMidpoint, g, 0.0)
                    .unwrap();
            let asym = ProtocolConfig::bbm92_asymmetric(g, g, 0.0).unwrap();
            let (a, b) = (bbm92_rates(&sym).unwrap(), bbm92_rates(&asym).unwrap());
            assert!(a.max_abs_diff(&b) <= 1e-12);
        }
    }

    #[test]
    fn unsupported_configurations_are_rejected() {
        assert!(matches!(
            ProtocolConfig::bbm92(PairKind::AntiCorrelated, Distribution::AliceSends, 0.2, 0.0),
            Err(Error::Unsupported(_))
        ));
        let gad = ChannelNoise::Gad(GadParams::new(0.2, 0.5).unwrap());
        let mut cfg = ProtocolConfig::b92(0.2, 0.0).unwrap();
        cfg.noise = gad;
        assert!(matches!(analytic_rates(&cfg), Err(Error::Unsupported(_))));
        assert!(matches!(simulate_protocol(&cfg), Err(Error::Unsupported(_))));
        let bb84 = ProtocolConfig::bb84(ad(0.2), 0.0).unwrap();
        assert!(bbm92_rates(&bb84).is_err());
        assert!(ProtocolConfig::bb84(ad(0.2), 1.5).is_err());
    }

    #[test]
    fn oracle_examples() {
        let cfg = ProtocolConfig::bb84(ad(0.36), 0.0).unwrap();
        let oracle = simulate_protocol(&cfg).unwrap();
        assert!(oracle.max_abs_diff(&bb84_rates_ad(0.36, 0.0).unwrap()) <= 1e-12);

        let cfg = ProtocolConfig::b92(0.0, 0.0).unwrap();
        let r = simulate_protocol(&cfg).unwrap();
        assert!(r.e_b.abs() < 1e-15 && r.e_p.abs() < 1e-15);
    }

    #[test]
    fn key_report_examples() {
        let cfg = ProtocolConfig::bb84(ad(0.0), 0.0).unwrap();
        assert_eq!(key_report(&cfg, 32768).unwrap().l_sec, Some(32768));

        let src = ReportSource::Protocol(cfg);
        let r = KeyRateReport::from_rates(ErrorRates::new(0.11, 0.11, 1.0).unwrap(), src.clone())
            .with_sifted_length(32768);
        assert_eq!(r.l_sec, Some(5));
        let r = KeyRateReport::from_rates(ErrorRates::new(0.2, 0.2, 1.0).unwrap(), src)
            .with_sifted_length(32768);
        assert_eq!(r.l_sec, Some(0));
        assert_eq!(r.secure_fraction, 0.0);
    }
}
