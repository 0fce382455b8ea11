//! Shot-level sampling of block transmissions on a simulated device.
//!
//! Each preparation's outcome distribution is computed exactly from the
//! density matrix, then every shot draws from it and flips each measured
//! bit independently with that qubit's readout error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dualrail::{circuit_state, CnotBetas, EncodingScheme};
use crate::error::{check_probability, Error, Result};
use crate::noise::{
    ad_channel, gamma_from_delay, noisy_cnot, AdParams, Basis, DampingSchedule, NoisyCnotParams,
};
use crate::protocols::{
    Distribution, ErrorRates, KeyRateReport, PairKind, ReportFlag, ReportSource,
};
use crate::qmat::{apply_channel, gates, tensor, DensityMatrix, KrausChannel, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSpec {
    pub t1_us: f64,
    pub readout_error: f64,
}

/// Device calibration data used to derive damping and readout noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    pub name: String,
    pub qubits: Vec<QubitSpec>,
    pub gate_time_ns: f64,
    #[serde(default)]
    pub cnot_beta: f64,
    /// Set when the gate time is not a published calibration value.
    #[serde(default)]
    pub gate_time_assumed: bool,
}

impl HardwareProfile {
    /// Five-qubit device with `T1 = 44.33 … 57.62 µs` and 35.6 ns identity gates.
    pub fn yorktown() -> Self {
        Self::from_table(
            "yorktown",
            &[44.33, 50.67, 70.27, 57.62, 56.94],
            &[0.107, 0.356, 0.079, 0.03, 0.054],
            false,
        )
    }

    /// Five-qubit device with `T1 = 97.6 … 151.1 µs`. No identity-gate time
    /// was published for it, so the 35.6 ns value is reused.
    pub fn bogota() -> Self {
        Self::from_table(
            "bogota",
            &[97.6, 218.2, 200.3, 111.3, 151.1],
            &[0.032, 0.0194, 0.0603, 0.05, 0.0178],
            true,
        )
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "yorktown" => Some(Self::yorktown()),
            "bogota" => Some(Self::bogota()),
            _ => None,
        }
    }

    fn from_table(name: &str, t1: &[f64], readout: &[f64], assumed: bool) -> Self {
        Self {
            name: name.into(),
            qubits: t1
                .iter()
                .zip(readout)
                .map(|(&t1_us, &readout_error)| QubitSpec {
                    t1_us,
                    readout_error,
                })
                .collect(),
            gate_time_ns: 35.6,
            cnot_beta: 0.0,
            gate_time_assumed: assumed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(Error::Invalid(format!("profile {} has no qubits", self.name)));
        }
        for q in &self.qubits {
            if !(q.t1_us > 0.0) || !q.t1_us.is_finite() {
                return Err(Error::ParameterRange {
                    name: "t1_us",
                    value: q.t1_us,
                    range: "(0, inf)",
                });
            }
            check_probability("readout_error", q.readout_error)?;
        }
        if !(self.gate_time_ns >= 0.0) || !self.gate_time_ns.is_finite() {
            return Err(Error::ParameterRange {
                name: "gate_time_ns",
                value: self.gate_time_ns,
                range: "[0, inf)",
            });
        }
        check_probability("cnot_beta", self.cnot_beta)?;
        Ok(())
    }

    fn qubit(&self, index: usize) -> Result<QubitSpec> {
        self.qubits.get(index).copied().ok_or_else(|| {
            Error::QubitSelection(format!(
                "profile {} has {} qubits, requested qubit {index}",
                self.name,
                self.qubits.len()
            ))
        })
    }

    /// Damping accumulated on `qubit` over `n_gates` identity gates.
    pub fn gamma(&self, qubit: usize, n_gates: u64) -> Result<f64> {
        let q = self.qubit(qubit)?;
        Ok(gamma_from_delay(&DampingSchedule::new(
            q.t1_us,
            self.gate_time_ns,
            n_gates,
        )?))
    }
}

/// What is being transmitted, and on which physical qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Bb84 {
        qubit: usize,
    },
    B92 {
        qubit: usize,
    },
    /// Qubits are (Alice, Bob).
    Bbm92 {
        pair: PairKind,
        distribution: Distribution,
        qubits: [usize; 2],
    },
    /// Rails first, then the flag qubit for the ancilla-based scheme.
    DualRail {
        scheme: EncodingScheme,
        qubits: Vec<usize>,
    },
}

impl Target {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Target::Bb84 { qubit } | Target::B92 { qubit } => vec![*qubit],
            Target::Bbm92 { qubits, .. } => qubits.to_vec(),
            Target::DualRail { qubits, .. } => qubits.clone(),
        }
    }

    fn validate(&self, profile: &HardwareProfile) -> Result<()> {
        let qubits = self.qubits();
        if let Target::DualRail { scheme, .. } = self {
            if qubits.len() != scheme.n_qubits() {
                return Err(Error::QubitSelection(format!(
                    "{scheme:?} needs {} physical qubits, got {}",
                    scheme.n_qubits(),
                    qubits.len()
                )));
            }
        }
        if let Target::Bbm92 {
            pair: PairKind::AntiCorrelated,
            distribution: Distribution::AliceSends,
            ..
        } = self
        {
            return Err(Error::Unsupported(
                "anti-correlated pair distributed by Alice".into(),
            ));
        }
        for (i, q) in qubits.iter().enumerate() {
            profile.qubit(*q)?;
            if qubits[..i].contains(q) {
                return Err(Error::QubitSelection(format!("qubit {q} assigned twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SendMode {
    /// Block `i` repeats preparation `i mod k` for every shot.
    Block,
    /// Every shot picks a preparation uniformly at random.
    RandomPerShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub shots_per_block: u64,
    pub blocks: u64,
    pub n_identity_gates: u64,
    pub seed: u64,
    pub mode: SendMode,
}

impl ShotPlan {
    pub const DEFAULT_SHOTS_PER_BLOCK: u64 = 8192;

    pub fn new(blocks: u64, n_identity_gates: u64, seed: u64) -> Self {
        Self {
            shots_per_block: Self::DEFAULT_SHOTS_PER_BLOCK,
            blocks,
            n_identity_gates,
            seed,
            mode: SendMode::Block,
        }
    }

    pub fn total_shots(&self) -> u64 {
        self.shots_per_block * self.blocks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    /// Kept shots measured in the same basis they were prepared in.
    pub sifted_bits: u64,
    pub z_bits: u64,
    pub x_bits: u64,
    pub errors_z: u64,
    pub errors_x: u64,
    /// `errors_z / z_bits`, zero without Z bits.
    pub qber: f64,
    /// `errors_x / x_bits`, zero without X bits.
    pub phase_error: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    z_bits: u64,
    x_bits: u64,
    errors_z: u64,
    errors_x: u64,
}

impl Counts {
    fn merge(self, o: Self) -> Self {
        Self {
            z_bits: self.z_bits + o.z_bits,
            x_bits: self.x_bits + o.x_bits,
            errors_z: self.errors_z + o.errors_z,
            errors_x: self.errors_x + o.errors_x,
        }
    }

    fn estimate(self) -> QberEstimate {
        let ratio = |e: u64, n: u64| if n == 0 { 0.0 } else { e as f64 / n as f64 };
        QberEstimate {
            sifted_bits: self.z_bits + self.x_bits,
            z_bits: self.z_bits,
            x_bits: self.x_bits,
            errors_z: self.errors_z,
            errors_x: self.errors_x,
            qber: ratio(self.errors_z, self.z_bits),
            phase_error: ratio(self.errors_x, self.x_bits),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    /// One measured bit; error when it differs from `expected`.
    Single { expected: u8 },
    /// Two measured bits; error when equality disagrees with `correlated`.
    Pair { correlated: bool },
    /// Bits are (decoded, flag); kept when the flag reads 1.
    Encoded { expected: u8 },
}

/// One prepared state: its exact outcome distribution over the measured
/// bits (first measured qubit is the most significant bit), the readout
/// error of each measured qubit and how outcomes are scored.
#[derive(Debug, Clone, PartialEq)]
struct Preparation {
    basis: Basis,
    probs: Vec<f64>,
    deltas: Vec<f64>,
    rule: Rule,
}

impl Preparation {
    fn n_bits(&self) -> usize {
        self.deltas.len()
    }

    /// `None` for discarded shots, otherwise whether the bit is wrong.
    fn score(&self, bits: usize) -> Option<bool> {
        let bit = |i: usize| ((bits >> (self.n_bits() - 1 - i)) & 1) as u8;
        match self.rule {
            Rule::Single { expected } => Some(bit(0) != expected),
            Rule::Pair { correlated } => Some((bit(0) == bit(1)) != correlated),
            Rule::Encoded { expected } => (bit(1) == 1).then(|| bit(0) != expected),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut outcome = self.probs.len() - 1;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                outcome = i;
                break;
            }
        }
        let n = self.n_bits();
        for (i, &d) in self.deltas.iter().enumerate() {
            if rng.gen::<f64>() < d {
                outcome ^= 1 << (n - 1 - i);
            }
        }
        outcome
    }

    /// Exact probabilities of a kept shot and of a kept, wrong shot.
    fn expected(&self) -> (f64, f64) {
        let n = self.n_bits();
        let (mut kept, mut wrong) = (0.0, 0.0);
        for (ideal, p) in self.probs.iter().enumerate() {
            for flips in 0..(1usize << n) {
                let mut w = *p;
                for (i, d) in self.deltas.iter().enumerate() {
                    let flipped = (flips >> (n - 1 - i)) & 1 == 1;
                    w *= if flipped { *d } else { 1.0 - d };
                }
                match self.score(ideal ^ flips) {
                    Some(true) => {
                        kept += w;
                        wrong += w;
                    }
                    Some(false) => kept += w,
                    None => {}
                }
            }
        }
        (kept, wrong)
    }
}

/// Distribution over computational outcomes of `measured` (in order) after
/// rotating each measured qubit into `basis`.
fn outcome_probs(rho: &DensityMatrix, measured: &[usize], basis: Basis) -> Result<Vec<f64>> {
    let mut rho = rho.clone();
    if basis == Basis::X {
        for &q in measured {
            rho = rho.apply_unitary(&gates::hadamard(), &[q])?;
        }
    }
    let n = rho.n_qubits();
    let mut probs = vec![0.0; 1 << measured.len()];
    for (index, p) in rho.populations().into_iter().enumerate() {
        let mut key = 0usize;
        for &q in measured {
            key = (key << 1) | ((index >> (n - 1 - q)) & 1);
        }
        probs[key] += p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    Ok(probs.into_iter().map(|p| p / total).collect())
}

fn damping(gamma: f64, qubit: usize) -> Result<KrausChannel> {
    ad_channel(AdParams::new(gamma)?).on(&[qubit])
}

/// Independent AD on q0 and q1 with possibly different strengths.
fn rail_damping(gamma0: f64, gamma1: f64) -> Result<KrausChannel> {
    let (a0, a1) = (ad_channel(AdParams::new(gamma0)?), ad_channel(AdParams::new(gamma1)?));
    let mut ops = Vec::new();
    for x in a0.operators() {
        for y in a1.operators() {
            ops.push(tensor(x, y)?);
        }
    }
    KrausChannel::new(ops)
}

fn preparations(
    target: &Target,
    n_gates: u64,
    profile: &HardwareProfile,
) -> Result<Vec<Preparation>> {
    target.validate(profile)?;
    let phys = target.qubits();
    let delta = |i: usize| profile.qubits[phys[i]].readout_error;
    let gamma = |i: usize, gates: u64| profile.gamma(phys[i], gates);
    let mut preps = Vec::new();
    match target {
        Target::Bb84 { .. } | Target::B92 { .. } => {
            let channel = damping(gamma(0, n_gates)?, 0)?;
            let sends: &[(Basis, usize)] = match target {
                Target::Bb84 { .. } => &[(Basis::Z, 0), (Basis::Z, 1), (Basis::X, 0), (Basis::X, 1)],
                _ => &[(Basis::Z, 0), (Basis::X, 0)],
            };
            for &(basis, k) in sends {
                let rho = apply_channel(&DensityMatrix::from_pure(&basis.states()[k]), &channel)?;
                preps.push(Preparation {
                    basis,
                    probs: outcome_probs(&rho, &[0], basis)?,
                    deltas: vec![delta(0)],
                    rule: Rule::Single { expected: k as u8 },
                });
            }
        }
        Target::Bbm92 {
            pair, distribution, ..
        } => {
            let mut rho = DensityMatrix::basis(2, 0)?;
            if *pair == PairKind::AntiCorrelated {
                rho = rho
                    .apply_unitary(&gates::pauli_x(), &[0])?
                    .apply_unitary(&gates::pauli_x(), &[1])?;
            }
            rho = rho.apply_unitary(&gates::hadamard(), &[0])?;
            rho = noisy_cnot(&rho, NoisyCnotParams::new(profile.cnot_beta, 0, 1)?)?;
            match distribution {
                Distribution::CharlieMidpoint => {
                    rho = apply_channel(&rho, &damping(gamma(0, n_gates)?, 0)?)?;
                    rho = apply_channel(&rho, &damping(gamma(1, n_gates)?, 1)?)?;
                }
                Distribution::AliceSends => {
                    rho = apply_channel(&rho, &damping(gamma(1, 2 * n_gates)?, 1)?)?;
                }
            }
            for basis in [Basis::Z, Basis::X] {
                preps.push(Preparation {
                    basis,
                    probs: outcome_probs(&rho, &[0, 1], basis)?,
                    deltas: vec![delta(0), delta(1)],
                    rule: Rule::Pair {
                        correlated: *pair == PairKind::Correlated,
                    },
                });
            }
        }
        Target::DualRail { scheme, .. } => {
            let rails = rail_damping(gamma(0, n_gates)?, gamma(1, n_gates)?)?;
            let betas = CnotBetas::uniform(profile.cnot_beta);
            let flag = scheme.flag_qubit();
            for (basis, k) in [(Basis::Z, 0), (Basis::Z, 1), (Basis::X, 0), (Basis::X, 1)] {
                let input: PureState = basis.states()[k].clone();
                let mut rho = circuit_state(&input, *scheme, &rails, betas)?;
                if basis == Basis::X {
                    rho = rho.apply_unitary(&gates::hadamard(), &[0])?;
                }
                preps.push(Preparation {
                    basis,
                    probs: outcome_probs(&rho, &[0, flag], Basis::Z)?,
                    deltas: vec![delta(0), delta(flag)],
                    rule: Rule::Encoded { expected: k as u8 },
                });
            }
        }
    }
    Ok(preps)
}

fn run_block(preps: &[Preparation], plan: &ShotPlan, block: u64) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(block);
    let mut counts = Counts::default();
    for _ in 0..plan.shots_per_block {
        let prep = match plan.mode {
            SendMode::Block => &preps[(block % preps.len() as u64) as usize],
            SendMode::RandomPerShot => &preps[rng.gen_range(0..preps.len())],
        };
        let outcome = prep.sample(&mut rng);
        if let Some(wrong) = prep.score(outcome) {
            let (bits, errors) = match prep.basis {
                Basis::Z => (&mut counts.z_bits, &mut counts.errors_z),
                Basis::X => (&mut counts.x_bits, &mut counts.errors_x),
            };
            *bits += 1;
            *errors += wrong as u64;
        }
    }
    counts
}

/// Samples every block of `plan` and pools the counts. Blocks are seeded
/// independently (stream `i` of the plan seed), so the result does not
/// depend on scheduling.
pub fn run_blocks(target: &Target, plan: &ShotPlan, profile: &HardwareProfile) -> Result<QberEstimate> {
    if plan.blocks == 0 || plan.shots_per_block == 0 {
        return Err(Error::Invalid("shot plan has no shots".into()));
    }
    profile.validate()?;
    let preps = preparations(target, plan.n_identity_gates, profile)?;
    let counts: Vec<Counts> = (0..plan.blocks)
        .into_par_iter()
        .map(|b| run_block(&preps, plan, b))
        .collect();
    Ok(counts
        .into_iter()
        .fold(Counts::default(), Counts::merge)
        .estimate())
}

/// Exact mean of the sampled rates: `e_b`, `e_p` and the kept fraction,
/// averaged over preparations with equal weight per basis.
pub fn expected_rates(
    target: &Target,
    n_identity_gates: u64,
    profile: &HardwareProfile,
) -> Result<ErrorRates> {
    profile.validate()?;
    let preps = preparations(target, n_identity_gates, profile)?;
    let mut kept = [0.0; 2];
    let mut wrong = [0.0; 2];
    for p in &preps {
        let i = (p.basis == Basis::X) as usize;
        let (k, w) = p.expected();
        kept[i] += k;
        wrong[i] += w;
    }
    let rate = |i: usize| if kept[i] > 0.0 { wrong[i] / kept[i] } else { 0.0 };
    let sift = (kept[0] + kept[1]) / preps.len() as f64;
    Ok(ErrorRates::clamped(rate(0), rate(1), sift))
}

/// Finite-length key from sampled counts.
pub fn finite_key(est: &QberEstimate) -> KeyRateReport {
    let source = ReportSource::Counts(*est);
    if est.sifted_bits == 0 {
        return KeyRateReport::flagged(source, ReportFlag::EmptyKey).with_sifted_length(0);
    }
    let rates = ErrorRates::clamped(est.qber, est.phase_error, 1.0);
    KeyRateReport::from_rates(rates, source).with_sifted_length(est.sifted_bits)
}

/// `√(e(1-e)/n)`, the binomial standard deviation of a rate over `n` bits.
pub fn binomial_sigma(e: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (e * (1.0 - e) / n as f64).sqrt()
}
