//! Dual-rail encoded BB84.
//!
//! Register layout: q0 and q1 are the two rails; the ancilla-based scheme
//! adds a flag qubit q2. Circuits:
//!
//! * encoder: `X(q1)`, then `CNOT(q0→q1)`, mapping `|0>→|01>`, `|1>→|10>`
//! * ancilla detection: `CNOT(q0→q2)`, `CNOT(q1→q2)`, keep `q2 = 1`;
//!   decoder `CNOT(q0→q1)`, decoded qubit q0
//! * optimal detection: `CNOT(q0→q1)`, keep `q1 = 1`, decoded qubit q0
//!
//! Error probabilities returned by [`run_encoded`] and [`table1_rates`] are
//! joint: "bit wrong and the run survived post-selection", per transmitted
//! logical qubit.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::noise::{
    dual_rail_ad, dual_rail_gad, noisy_cnot, AdParams, Basis, GadParams, NoisyCnotParams,
};
use crate::protocols::{ErrorRates, KeyRateReport, ReportFlag, ReportSource};
use crate::qmat::{
    apply_channel, c, embed, gates, partial_trace, ComplexMatrix, DensityMatrix, KrausChannel,
    PureState, VANISHING_PROBABILITY,
};

/// Names of the closed-form operations in this module.
pub const CLOSED_FORM_OPS: &[&str] = &[
    "table1_rates",
    "fault_pass_probability",
    "gad_encoded_rates",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingScheme {
    AncillaBased,
    Optimal,
}

impl EncodingScheme {
    pub fn n_qubits(self) -> usize {
        match self {
            EncodingScheme::AncillaBased => 3,
            EncodingScheme::Optimal => 2,
        }
    }

    /// The qubit whose `|1>` outcome marks a kept run.
    pub fn flag_qubit(self) -> usize {
        match self {
            EncodingScheme::AncillaBased => 2,
            EncodingScheme::Optimal => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Site {
    None,
    Encoder,
    PostSelection,
    Decoder,
}

impl Site {
    pub const FAULTY: [Site; 3] = [Site::Encoder, Site::PostSelection, Site::Decoder];

    pub fn name(self) -> &'static str {
        match self {
            Site::None => "none",
            Site::Encoder => "encoder",
            Site::PostSelection => "post-selection",
            Site::Decoder => "decoder",
        }
    }
}

/// Which CNOT is imperfect, and its failure probability β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSite {
    site: Site,
    beta: f64,
}

impl FaultSite {
    pub fn new(site: Site, beta: f64) -> Result<Self> {
        check_probability("beta", beta)?;
        let beta = if site == Site::None { 0.0 } else { beta };
        Ok(Self { site, beta })
    }

    pub fn none() -> Self {
        Self {
            site: Site::None,
            beta: 0.0,
        }
    }

    pub fn site(&self) -> Site {
        self.site
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EncodedNoise {
    Ad(AdParams),
    Gad(GadParams),
}

impl EncodedNoise {
    pub fn gamma(&self) -> f64 {
        match self {
            EncodedNoise::Ad(a) => a.gamma(),
            EncodedNoise::Gad(g) => g.gamma(),
        }
    }

    /// The product channel on both rails (q0, q1).
    pub fn channel(&self) -> KrausChannel {
        match *self {
            EncodedNoise::Ad(a) => dual_rail_ad(a),
            EncodedNoise::Gad(g) => dual_rail_gad(g),
        }
    }
}

/// Scheme, rail noise and fault placement for one encoded run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedSetup {
    pub scheme: EncodingScheme,
    pub noise: EncodedNoise,
    pub fault: FaultSite,
}

impl EncodedSetup {
    pub fn new(scheme: EncodingScheme, noise: EncodedNoise, fault: FaultSite) -> Result<Self> {
        if matches!(noise, EncodedNoise::Gad(_)) && fault.site != Site::None {
            return Err(Error::Unsupported(
                "imperfect CNOT combined with generalized amplitude damping".into(),
            ));
        }
        if scheme == EncodingScheme::Optimal && fault.site == Site::Decoder {
            return Err(Error::Unsupported(
                "the optimal scheme has no separate decoder CNOT".into(),
            ));
        }
        Ok(Self {
            scheme,
            noise,
            fault,
        })
    }

    pub(crate) fn cnot_betas(&self) -> CnotBetas {
        let b = self.fault.beta;
        let mut betas = CnotBetas::default();
        match self.fault.site {
            Site::None => {}
            Site::Encoder => betas.encoder = b,
            Site::PostSelection => betas.detect_first = b,
            Site::Decoder => betas.decoder = b,
        }
        betas
    }
}

/// Failure probability of each CNOT in the circuit. The optimal scheme only
/// uses `encoder` and `detect_first`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct CnotBetas {
    pub encoder: f64,
    pub detect_first: f64,
    pub detect_second: f64,
    pub decoder: f64,
}

impl CnotBetas {
    pub(crate) fn uniform(beta: f64) -> Self {
        Self {
            encoder: beta,
            detect_first: beta,
            detect_second: beta,
            decoder: beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRunResult {
    pub pass_probability: f64,
    /// Decoded qubit given survival; `None` when nothing survives.
    pub conditional_state: Option<DensityMatrix>,
    pub joint_error_z: f64,
    pub joint_error_x: f64,
}

fn single_qubit(state: &PureState) -> Result<()> {
    if state.n_qubits() != 1 {
        return Err(Error::Dimension(format!(
            "expected a single-qubit state, got {} qubits",
            state.n_qubits()
        )));
    }
    Ok(())
}

/// `α|0> + β|1>` ↦ `α|01> + β|10>`, computed directly from the map.
pub fn encode_map(state: &PureState) -> Result<DensityMatrix> {
    single_qubit(state)?;
    let [a, b] = [state.amplitudes()[0], state.amplitudes()[1]];
    let z = c(0.0, 0.0);
    Ok(DensityMatrix::from_pure(&PureState::new(vec![z, a, b, z])?))
}

/// Encodes through the circuit `X(q1); CNOT(q0→q1)`.
pub fn encode(state: &PureState) -> Result<DensityMatrix> {
    single_qubit(state)?;
    let rho = DensityMatrix::from_pure(&state.tensor(&PureState::zero())?);
    rho.apply_unitary(&gates::pauli_x(), &[1])?
        .apply_unitary(&gates::cnot(), &[0, 1])
}

fn cnot(rho: &DensityMatrix, beta: f64, control: usize, target: usize) -> Result<DensityMatrix> {
    if beta == 0.0 {
        rho.apply_unitary(&gates::cnot(), &[control, target])
    } else {
        noisy_cnot(rho, NoisyCnotParams::new(beta, control, target)?)
    }
}

/// Full register state just before the final measurements.
pub(crate) fn circuit_state(
    input: &PureState,
    scheme: EncodingScheme,
    rails: &KrausChannel,
    betas: CnotBetas,
) -> Result<DensityMatrix> {
    single_qubit(input)?;
    let n = scheme.n_qubits();
    let mut padded = input.clone();
    for _ in 1..n {
        padded = padded.tensor(&PureState::zero())?;
    }
    let mut rho = DensityMatrix::from_pure(&padded).apply_unitary(&gates::pauli_x(), &[1])?;
    rho = cnot(&rho, betas.encoder, 0, 1)?;
    rho = apply_channel(&rho, rails)?;
    match scheme {
        EncodingScheme::AncillaBased => {
            rho = cnot(&rho, betas.detect_first, 0, 2)?;
            rho = cnot(&rho, betas.detect_second, 1, 2)?;
            rho = cnot(&rho, betas.decoder, 0, 1)?;
        }
        EncodingScheme::Optimal => {
            rho = cnot(&rho, betas.detect_first, 0, 1)?;
        }
    }
    Ok(rho)
}

fn keep_effect(scheme: EncodingScheme) -> Result<ComplexMatrix> {
    embed(
        &ComplexMatrix::basis_projector(1, 2),
        &[scheme.flag_qubit()],
        scheme.n_qubits(),
    )
}

/// Joint error in `basis`: the total-variation distance between the kept
/// outcome distribution of the decoded qubit and `pass` times the ideal
/// distribution of `input`. For a basis-state input this is the
/// probability of keeping the run with the wrong bit.
fn joint_error(
    rho: &DensityMatrix,
    input: &PureState,
    keep: &ComplexMatrix,
    pass: f64,
    basis: Basis,
) -> Result<f64> {
    let n = rho.n_qubits();
    let mut tv = 0.0;
    let mut wrong = 0.0;
    let mut determinate = false;
    for outcome in basis.states() {
        let ideal = input.expectation(&outcome.projector()).re;
        let effect = &embed(&outcome.projector(), &[0], n)? * keep;
        let kept = rho.expectation(&effect)?.re;
        tv += 0.5 * (kept - pass * ideal).abs();
        if ideal < VANISHING_PROBABILITY {
            wrong += kept;
            determinate = true;
        }
    }
    // For basis eigenstates the distance is the kept mass on the wrong
    // outcome; summing it directly avoids cancellation against `pass`.
    Ok(if determinate { wrong } else { tv }.clamp(0.0, pass))
}

fn evaluate(
    input: &PureState,
    scheme: EncodingScheme,
    rails: &KrausChannel,
    betas: CnotBetas,
) -> Result<EncodedRunResult> {
    let rho = circuit_state(input, scheme, rails, betas)?;
    let keep = keep_effect(scheme)?;
    let pass = rho.expectation(&keep)?.re.clamp(0.0, 1.0);
    let joint_error_z = joint_error(&rho, input, &keep, pass, Basis::Z)?;
    let joint_error_x = joint_error(&rho, input, &keep, pass, Basis::X)?;
    let conditional_state = if pass < VANISHING_PROBABILITY {
        None
    } else {
        let kept = DensityMatrix::from_trusted(&(&keep * rho.matrix()) * &keep);
        Some(partial_trace(&kept, &[0])?.renormalized()?)
    };
    Ok(EncodedRunResult {
        pass_probability: pass,
        conditional_state,
        joint_error_z,
        joint_error_x,
    })
}

/// Encode, damp both rails, detect, post-select and decode one qubit.
pub fn run_encoded(
    state: &PureState,
    scheme: EncodingScheme,
    noise: EncodedNoise,
    fault: FaultSite,
) -> Result<EncodedRunResult> {
    let setup = EncodedSetup::new(scheme, noise, fault)?;
    evaluate(state, scheme, &noise.channel(), setup.cnot_betas())
}

/// Joint `(e_b, e_p)` for a single imperfect CNOT with AD(γ) on the rails.
pub fn table1_rates(fault: FaultSite, gamma: f64) -> Result<(f64, f64)> {
    check_probability("gamma", gamma)?;
    let b = fault.beta;
    Ok(match fault.site {
        Site::None => return Err(Error::Invalid("table1_rates needs a fault site".into())),
        Site::Encoder => {
            let e = b / 4.0 * (1.0 - gamma) * (1.0 + gamma);
            (e, e)
        }
        Site::PostSelection => (b / 4.0, b / 4.0),
        Site::Decoder => (b / 2.0 * (1.0 - gamma), b * (1.0 - gamma)),
    })
}

/// Survival probability for a single imperfect CNOT with AD(γ) on the
/// rails. Independent of the input state.
pub fn fault_pass_probability(fault: FaultSite, gamma: f64) -> Result<f64> {
    check_probability("gamma", gamma)?;
    let b = fault.beta;
    let g = gamma;
    Ok(match fault.site {
        Site::None | Site::Decoder => 1.0 - g,
        Site::Encoder => (1.0 - g) * ((1.0 - b) + b * (1.0 + g) / 2.0),
        Site::PostSelection => (1.0 - b) * (1.0 - g) + b / 2.0,
    })
}

/// Logical rates under GAD on both rails with no CNOT fault:
/// `e_b = e_p = pγ²(1-p) / s`, `sift = s = 1 - γ + 2pγ² - 2p²γ²`.
/// Error rates are zero when nothing survives.
pub fn gad_encoded_rates(params: GadParams) -> ErrorRates {
    let (g, p) = (params.gamma(), params.p());
    let sift = 1.0 - g + 2.0 * p * g * g - 2.0 * p * p * g * g;
    let e = if sift < VANISHING_PROBABILITY {
        0.0
    } else {
        p * g * g * (1.0 - p) / sift
    };
    ErrorRates::clamped(e, e, sift)
}

/// Conditional rates averaged over the four BB84 states.
///
/// `e_b` is the Z-basis joint error divided by the Z-basis survival
/// probability (likewise for `e_p`), and `sift` is the mean survival
/// probability. Returns `None` when nothing survives.
pub(crate) fn averaged_rates(
    scheme: EncodingScheme,
    rails: &KrausChannel,
    betas: CnotBetas,
) -> Result<Option<ErrorRates>> {
    let mut pass = [0.0; 2];
    let mut errors = [0.0; 2];
    for (i, basis) in [Basis::Z, Basis::X].into_iter().enumerate() {
        for state in basis.states() {
            let run = evaluate(&state, scheme, rails, betas)?;
            pass[i] += run.pass_probability / 2.0;
            errors[i] += match basis {
                Basis::Z => run.joint_error_z,
                Basis::X => run.joint_error_x,
            } / 2.0;
        }
    }
    if pass.iter().any(|&p| p < VANISHING_PROBABILITY) {
        return Ok(None);
    }
    Ok(Some(ErrorRates::clamped(
        errors[0] / pass[0],
        errors[1] / pass[1],
        0.5 * (pass[0] + pass[1]),
    )))
}

/// Asymptotic key rate of dual-rail BB84, with survival as the sifting
/// factor.
pub fn encoded_key_rate(
    scheme: EncodingScheme,
    noise: EncodedNoise,
    fault: FaultSite,
) -> Result<KeyRateReport> {
    let setup = EncodedSetup::new(scheme, noise, fault)?;
    let source = ReportSource::DualRail(setup);
    Ok(
        match averaged_rates(scheme, &noise.channel(), setup.cnot_betas())? {
            Some(rates) => KeyRateReport::from_rates(rates, source),
            None => KeyRateReport::flagged(source, ReportFlag::NoSurvivors),
        },
    )
}
