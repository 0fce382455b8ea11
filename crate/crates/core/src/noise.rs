//! Noise channels: amplitude damping (AD), generalized amplitude damping
//! (GAD), their dual-rail products, the imperfect CNOT, readout POVMs and
//! the delay-to-damping mapping used on idle hardware qubits.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::qmat::{
    apply_channel, gates, tensor, ComplexMatrix, DensityMatrix, KrausChannel, MeasurementSet,
    PureState,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdParams {
    gamma: f64,
}

impl AdParams {
    pub fn new(gamma: f64) -> Result<Self> {
        Ok(Self {
            gamma: check_probability("gamma", gamma)?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GadParams {
    gamma: f64,
    p: f64,
}

impl GadParams {
    pub fn new(gamma: f64, p: f64) -> Result<Self> {
        Ok(Self {
            gamma: check_probability("gamma", gamma)?,
            p: check_probability("p", p)?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl From<AdParams> for GadParams {
    fn from(ad: AdParams) -> Self {
        Self {
            gamma: ad.gamma,
            p: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyCnotParams {
    beta: f64,
    control: usize,
    target: usize,
}

impl NoisyCnotParams {
    pub fn new(beta: f64, control: usize, target: usize) -> Result<Self> {
        if control == target {
            return Err(Error::QubitSelection(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        Ok(Self {
            beta: check_probability("beta", beta)?,
            control,
            target,
        })
    }

    /// An ideal gate.
    pub fn ideal(control: usize, target: usize) -> Result<Self> {
        Self::new(0.0, control, target)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn control(&self) -> usize {
        self.control
    }

    pub fn target(&self) -> usize {
        self.target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    delta: f64,
}

impl ReadoutParams {
    pub fn new(delta: f64) -> Result<Self> {
        Ok(Self {
            delta: check_probability("delta", delta)?,
        })
    }

    pub fn ideal() -> Self {
        Self { delta: 0.0 }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Idle time of a qubit held for `n_gates` identity gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingSchedule {
    t1_us: f64,
    gate_time_ns: f64,
    n_gates: u64,
}

impl DampingSchedule {
    pub fn new(t1_us: f64, gate_time_ns: f64, n_gates: u64) -> Result<Self> {
        if !(t1_us > 0.0 && t1_us.is_finite()) {
            return Err(Error::ParameterRange {
                name: "t1_us",
                value: t1_us,
                range: "(0, inf)",
            });
        }
        if !(gate_time_ns >= 0.0 && gate_time_ns.is_finite()) {
            return Err(Error::ParameterRange {
                name: "gate_time_ns",
                value: gate_time_ns,
                range: "[0, inf)",
            });
        }
        Ok(Self {
            t1_us,
            gate_time_ns,
            n_gates,
        })
    }

    pub fn t1_us(&self) -> f64 {
        self.t1_us
    }

    pub fn gate_time_ns(&self) -> f64 {
        self.gate_time_ns
    }

    pub fn n_gates(&self) -> u64 {
        self.n_gates
    }

    /// Total idle time in seconds.
    pub fn duration_s(&self) -> f64 {
        self.n_gates as f64 * self.gate_time_ns * 1e-9
    }

    /// T1 in seconds.
    pub fn t1_s(&self) -> f64 {
        self.t1_us * 1e-6
    }

    pub fn with_gates(self, n_gates: u64) -> Self {
        Self { n_gates, ..self }
    }
}

fn ad_operators(gamma: f64) -> [ComplexMatrix; 2] {
    [
        ComplexMatrix::diagonal(&[1.0, (1.0 - gamma).sqrt()]),
        ComplexMatrix::from_real_rows(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]).expect("2x2"),
    ]
}

fn gad_operators(gamma: f64, p: f64) -> [ComplexMatrix; 4] {
    let [a0, a1] = ad_operators(gamma);
    let (sp, sq) = (p.sqrt(), (1.0 - p).sqrt());
    [
        a0.scale(sp),
        a1.scale(sp),
        ComplexMatrix::diagonal(&[(1.0 - gamma).sqrt(), 1.0]).scale(sq),
        ComplexMatrix::from_real_rows(2, 2, &[0.0, 0.0, gamma.sqrt(), 0.0])
            .expect("2x2")
            .scale(sq),
    ]
}

/// `A0 = diag(1, √(1-γ))`, `A1 = √γ |0><1|`, on qubit 0.
pub fn ad_channel(params: AdParams) -> KrausChannel {
    KrausChannel::new(ad_operators(params.gamma).to_vec()).expect("AD operators are complete")
}

/// The four GAD operators; `p = 1` recovers [`ad_channel`] in the first two.
pub fn gad_channel(params: GadParams) -> KrausChannel {
    KrausChannel::new(gad_operators(params.gamma, params.p).to_vec())
        .expect("GAD operators are complete")
}

/// Products ordered so that operator `k` applies `single[k % n]` to qubit 0
/// and `single[k / n]` to qubit 1.
fn product_channel(single: &[ComplexMatrix]) -> KrausChannel {
    let ops = single
        .iter()
        .flat_map(|second| single.iter().map(move |first| tensor(first, second).expect("4x4")))
        .collect();
    KrausChannel::new(ops).expect("product of complete channels is complete")
}

/// The four products of AD operators on qubits (0, 1), with `M_1` damping
/// rail 0 and `M_2` damping rail 1 (so `M_2|01> = √γ|00>`).
pub fn dual_rail_ad(params: AdParams) -> KrausChannel {
    product_channel(&ad_operators(params.gamma))
}

/// All 16 products of GAD operators on qubits (0, 1), indexed like
/// [`dual_rail_ad`]: operator `j + 4k` applies `A_j` to rail 0 and `A_k` to rail 1.
pub fn dual_rail_gad(params: GadParams) -> KrausChannel {
    product_channel(&gad_operators(params.gamma, params.p))
}

/// Kraus form of the imperfect CNOT: `√(1-β)·CNOT` plus the 16 two-qubit
/// Paulis weighted `√β/4`, which together replace the pair with `I/4`
/// with probability β and leave spectator qubits untouched.
pub fn noisy_cnot_channel(params: NoisyCnotParams) -> KrausChannel {
    let beta = params.beta;
    let mut ops = vec![gates::cnot().scale((1.0 - beta).sqrt())];
    if beta > 0.0 {
        let paulis = gates::paulis();
        for a in &paulis {
            for b in &paulis {
                ops.push(tensor(a, b).expect("4x4").scale(beta.sqrt() / 4.0));
            }
        }
    }
    KrausChannel::new(ops)
        .expect("noisy CNOT is complete")
        .on(&[params.control, params.target])
        .expect("distinct control and target")
}

/// `(1-β) U ρ U† + β (I/4)_{c,t} ⊗ Tr_{c,t} ρ`.
pub fn noisy_cnot(rho: &DensityMatrix, params: NoisyCnotParams) -> Result<DensityMatrix> {
    apply_channel(rho, &noisy_cnot_channel(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    /// The two basis states, outcome 0 first.
    pub fn states(self) -> [PureState; 2] {
        match self {
            Basis::Z => [PureState::zero(), PureState::one()],
            Basis::X => [PureState::plus(), PureState::minus()],
        }
    }

    pub fn labels(self) -> [&'static str; 2] {
        match self {
            Basis::Z => ["0", "1"],
            Basis::X => ["+", "-"],
        }
    }
}

/// Bob's measurement with each outcome flipped with probability δ:
/// `P_0 = (1-δ)|0><0| + δ|1><1|`, `P_1 = (1-δ)|1><1| + δ|0><0|`, and the
/// same in `{|+>, |->}` for the X basis.
pub fn readout_povm(basis: Basis, params: ReadoutParams) -> MeasurementSet {
    let d = params.delta;
    let [s0, s1] = basis.states();
    let (p0, p1) = (s0.projector(), s1.projector());
    let e0 = &p0.scale(1.0 - d) + &p1.scale(d);
    let e1 = &p1.scale(1.0 - d) + &p0.scale(d);
    let [l0, l1] = basis.labels();
    MeasurementSet::new(vec![e0, e1], vec![l0.into(), l1.into()]).expect("valid readout POVM")
}

/// `γ = 1 - exp(-t / T1)` with `t = n_gates · gate_time`.
pub fn gamma_from_delay(schedule: &DampingSchedule) -> f64 {
    -(-schedule.duration_s() / schedule.t1_s()).exp_m1()
}

/// Damping probability over twice the exposure time: `2γ - γ²`.
pub fn doubled_delay_gamma(gamma: f64) -> Result<f64> {
    let g = check_probability("gamma", gamma)?;
    Ok(g * (2.0 - g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{measure, partial_trace, re, MeasurementSet, TOL};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ad_limits() {
        let ch = ad_channel(AdParams::new(0.0).unwrap());
        assert!(ch.operators()[0].approx_eq(&ComplexMatrix::identity(2), TOL));
        assert!(ch.operators()[1].approx_eq(&ComplexMatrix::zeros(2, 2), TOL));

        let ch = ad_channel(AdParams::new(1.0).unwrap());
        assert!(ch.operators()[0].approx_eq(&ComplexMatrix::diagonal(&[1.0, 0.0]), TOL));
        assert!(ch.operators()[1].approx_eq(&ComplexMatrix::ket_bra(0, 1, 2), TOL));

        let ch = ad_channel(AdParams::new(0.36).unwrap());
        assert!(ch.operators()[0].approx_eq(&ComplexMatrix::diagonal(&[1.0, 0.8]), TOL));
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(AdParams::new(-0.01).is_err());
        assert!(AdParams::new(1.01).is_err());
        assert!(GadParams::new(0.5, 1.5).is_err());
        assert!(ReadoutParams::new(-1.0).is_err());
        assert!(NoisyCnotParams::new(0.1, 1, 1).is_err());
        assert!(NoisyCnotParams::new(2.0, 0, 1).is_err());
        assert!(doubled_delay_gamma(1.5).is_err());
        assert!(DampingSchedule::new(0.0, 35.6, 10).is_err());
        assert!(DampingSchedule::new(50.0, -1.0, 10).is_err());
    }

    #[test]
    fn gad_reduces_to_ad_at_p_one() {
        for g in [0.0, 0.2, 0.7, 1.0] {
            let gad = gad_channel(GadParams::new(g, 1.0).unwrap());
            let ad = ad_channel(AdParams::new(g).unwrap());
            for (a, b) in gad.operators()[..2].iter().zip(ad.operators()) {
                assert!(a.max_abs_diff(b) <= 1e-14);
            }
            for extra in &gad.operators()[2..] {
                assert!(extra.max_abs_diff(&ComplexMatrix::zeros(2, 2)) <= 1e-14);
            }
        }
    }

    #[test]
    fn gad_without_damping_is_identity() {
        let ch = gad_channel(GadParams::new(0.0, 0.3).unwrap());
        let rho = DensityMatrix::from_pure(&PureState::qubit(re(0.6), re(0.8)).unwrap());
        assert!(apply_channel(&rho, &ch).unwrap().approx_eq(&rho, TOL));
    }

    #[test]
    fn gad_excites_ground_state() {
        let ch = gad_channel(GadParams::new(0.5, 0.5).unwrap());
        let out = apply_channel(&DensityMatrix::basis(1, 0).unwrap(), &ch).unwrap();
        assert!(out
            .matrix()
            .approx_eq(&ComplexMatrix::diagonal(&[0.75, 0.25]), TOL));
    }

    #[test]
    fn dual_rail_kraus_action_on_logical_states() {
        let g: f64 = 0.3;
        let ch = dual_rail_ad(AdParams::new(g).unwrap());
        let ops = ch.operators();
        let ket01 = PureState::basis(2, 0b01).unwrap();
        let ket10 = PureState::basis(2, 0b10).unwrap();
        let apply = |m: &ComplexMatrix, s: &PureState| -> Vec<f64> {
            (0..4)
                .map(|i| (0..4).map(|j| m.get(i, j) * s.amplitudes()[j]).sum::<crate::qmat::C64>().re)
                .collect()
        };
        assert_eq!(apply(&ops[0], &ket01), vec![0.0, (1.0 - g).sqrt(), 0.0, 0.0]);
        assert_eq!(apply(&ops[1], &ket01), vec![0.0; 4]);
        assert_eq!(apply(&ops[2], &ket01), vec![g.sqrt(), 0.0, 0.0, 0.0]);
        assert_eq!(apply(&ops[3], &ket01), vec![0.0; 4]);
        assert_eq!(apply(&ops[0], &ket10), vec![0.0, 0.0, (1.0 - g).sqrt(), 0.0]);
        assert_eq!(apply(&ops[1], &ket10), vec![g.sqrt(), 0.0, 0.0, 0.0]);
        assert_eq!(apply(&ops[2], &ket10), vec![0.0; 4]);
        assert_eq!(apply(&ops[3], &ket10), vec![0.0; 4]);

        let out = apply_channel(&DensityMatrix::from_pure(&ket01), &ch).unwrap();
        assert!(out
            .matrix()
            .approx_eq(&ComplexMatrix::diagonal(&[0.3, 0.7, 0.0, 0.0]), TOL));
    }

    #[test]
    fn dual_rail_gad_on_logical_zero() {
        let (g, p) = (0.4, 0.5);
        let ch = dual_rail_gad(GadParams::new(g, p).unwrap());
        let out = apply_channel(&DensityMatrix::basis(2, 0b01).unwrap(), &ch).unwrap();
        let pops = out.populations();
        // |10><10| weight p γ² (1-p).
        assert!(close(pops[0b10], 0.04, TOL));
        assert!(close(pops[0b01], 1.0 - g + p * g * g - p * p * g * g, TOL));
        assert!(close(pops[0b11], g * (1.0 - p - p * g + p * p * g), TOL));
        assert!(close(pops[0b00], p * g * (1.0 - g + p * g), TOL));
    }

    #[test]
    fn dual_rail_gad_reduces_to_ad() {
        let g = 0.45;
        let gad = dual_rail_gad(GadParams::new(g, 1.0).unwrap());
        let ad = dual_rail_ad(AdParams::new(g).unwrap());
        let nonzero: Vec<_> = gad
            .operators()
            .iter()
            .filter(|m| m.max_abs_diff(&ComplexMatrix::zeros(4, 4)) > 0.0)
            .collect();
        assert_eq!(nonzero.len(), 4);
        for (a, b) in nonzero.iter().zip(ad.operators()) {
            assert!(a.max_abs_diff(b) <= 1e-14);
        }
        let id = dual_rail_gad(GadParams::new(0.0, 0.4).unwrap());
        let rho = DensityMatrix::from_pure(
            &PureState::new(vec![re(0.5), re(0.5), re(0.5), re(0.5)]).unwrap(),
        );
        assert!(apply_channel(&rho, &id).unwrap().approx_eq(&rho, TOL));
    }

    #[test]
    fn noisy_cnot_examples() {
        let ideal = NoisyCnotParams::ideal(0, 1).unwrap();
        let out = noisy_cnot(&DensityMatrix::basis(2, 0b10).unwrap(), ideal).unwrap();
        assert!(out.approx_eq(&DensityMatrix::basis(2, 0b11).unwrap(), TOL));

        let full = NoisyCnotParams::new(1.0, 0, 1).unwrap();
        let rho = DensityMatrix::from_pure(&PureState::new(vec![re(0.6), re(0.0), re(0.0), re(0.8)]).unwrap());
        let out = noisy_cnot(&rho, full).unwrap();
        assert!(out.approx_eq(&DensityMatrix::maximally_mixed(2).unwrap(), TOL));

        let partial = NoisyCnotParams::new(0.2, 0, 1).unwrap();
        let out = noisy_cnot(&DensityMatrix::basis(2, 0).unwrap(), partial).unwrap();
        let expected = &ComplexMatrix::basis_projector(0, 4).scale(0.8)
            + &ComplexMatrix::identity(4).scale(0.05);
        assert!(out.matrix().approx_eq(&expected, TOL));
    }

    #[test]
    fn noisy_cnot_keeps_spectator_marginal() {
        // Spectator q1 in |1>, pair (q0, q2) fully depolarized.
        let rho = DensityMatrix::basis(3, 0b010).unwrap();
        let out = noisy_cnot(&rho, NoisyCnotParams::new(1.0, 0, 2).unwrap()).unwrap();
        let spectator = partial_trace(&out, &[1]).unwrap();
        assert!(spectator
            .matrix()
            .approx_eq(&ComplexMatrix::basis_projector(1, 2), TOL));
        let pair = partial_trace(&out, &[0, 2]).unwrap();
        assert!(pair
            .matrix()
            .approx_eq(&ComplexMatrix::identity(4).scale(0.25), TOL));
    }

    #[test]
    fn readout_povm_examples() {
        let ideal = readout_povm(Basis::Z, ReadoutParams::ideal());
        assert!(ideal.effects()[0].approx_eq(&ComplexMatrix::basis_projector(0, 2), TOL));
        assert!(ideal.effects()[1].approx_eq(&ComplexMatrix::basis_projector(1, 2), TOL));

        for basis in [Basis::Z, Basis::X] {
            let useless = readout_povm(basis, ReadoutParams::new(0.5).unwrap());
            for e in useless.effects() {
                assert!(e.approx_eq(&ComplexMatrix::identity(2).scale(0.5), TOL));
            }
        }

        let m = readout_povm(Basis::Z, ReadoutParams::new(0.03).unwrap());
        let d = measure(&DensityMatrix::basis(1, 0).unwrap(), &m).unwrap();
        assert!(close(d.probability("0").unwrap(), 0.97, TOL));
        assert!(close(d.probability("1").unwrap(), 0.03, TOL));
    }

    #[test]
    fn delay_mapping() {
        let s = DampingSchedule::new(57.62, 35.6, 0).unwrap();
        assert_eq!(gamma_from_delay(&s), 0.0);
        let g = gamma_from_delay(&s.with_gates(1000));
        assert!(close(g, 1.0 - (-35.6f64 / 57.62).exp(), 1e-12));
        assert!(close(g, 0.46087, 1e-4));
        let far = gamma_from_delay(&s.with_gates(100_000_000));
        assert!(close(far, 1.0, 1e-12));
    }

    #[test]
    fn doubled_delay_examples() {
        assert_eq!(doubled_delay_gamma(0.0).unwrap(), 0.0);
        assert_eq!(doubled_delay_gamma(1.0).unwrap(), 1.0);
        assert!(close(doubled_delay_gamma(0.3).unwrap(), 0.51, 1e-15));
    }

    #[test]
    fn delay_sweeps_are_monotone() {
        let s = DampingSchedule::new(44.33, 35.6, 0).unwrap();
        let gammas: Vec<f64> = (0..50)
            .map(|k| gamma_from_delay(&s.with_gates(k * 250)))
            .collect();
        assert!(gammas.windows(2).all(|w| w[0] <= w[1]));
        let by_time: Vec<f64> = (0..50)
            .map(|k| gamma_from_delay(&DampingSchedule::new(44.33, k as f64, 500).unwrap()))
            .collect();
        assert!(by_time.windows(2).all(|w| w[0] <= w[1]));
    }

    fn random_logical_state(a: f64, b: f64, phase: f64) -> PureState {
        let norm = (a * a + b * b).sqrt();
        let beta = crate::qmat::C64::from_polar(b / norm, phase);
        PureState::new(vec![re(0.0), re(a / norm), beta, re(0.0)]).unwrap()
    }

    proptest! {
        #[test]
        fn constructors_are_complete(g in 0.0..=1.0f64, p in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let ad = AdParams::new(g).unwrap();
            let gad = GadParams::new(g, p).unwrap();
            for ch in [
                ad_channel(ad),
                gad_channel(gad),
                dual_rail_ad(ad),
                dual_rail_gad(gad),
                noisy_cnot_channel(NoisyCnotParams::new(b, 0, 1).unwrap()),
            ] {
                prop_assert!(ch.completeness_deviation() <= 1e-10);
            }
        }

        #[test]
        fn ideal_cnot_is_an_involution(
            amps in proptest::collection::vec(-1.0..1.0f64, 16),
        ) {
            let v: Vec<_> = amps.chunks(2).map(|c| crate::qmat::c(c[0], c[1])).collect();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let v = v.into_iter().map(|z| z / norm).collect();
            let rho = DensityMatrix::from_pure(&PureState::new(v).unwrap());
            let gate = NoisyCnotParams::ideal(2, 0).unwrap();
            let twice = noisy_cnot(&noisy_cnot(&rho, gate).unwrap(), gate).unwrap();
            prop_assert!(twice.approx_eq(&rho, 1e-12));
        }

        #[test]
        fn doubling_matches_twice_the_delay(t1 in 1.0..300.0f64, gt in 0.0..100.0f64, n in 0u64..20_000) {
            let s = DampingSchedule::new(t1, gt, n).unwrap();
            let twice = gamma_from_delay(&s.with_gates(2 * n));
            let doubled = doubled_delay_gamma(gamma_from_delay(&s)).unwrap();
            prop_assert!((twice - doubled).abs() <= 1e-12);
        }

        #[test]
        fn dual_rail_damping_never_populates_11(
            a in -1.0..1.0f64, b in -1.0..1.0f64, phase in 0.0..6.3f64, g in 0.0..=1.0f64,
        ) {
            prop_assume!(a * a + b * b > 1e-3);
            let rho = DensityMatrix::from_pure(&random_logical_state(a, b, phase));
            let out = apply_channel(&rho, &dual_rail_ad(AdParams::new(g).unwrap())).unwrap();
            prop_assert!(out.populations()[0b11] < 1e-14);
            let total = measure(&out, &MeasurementSet::computational(2).unwrap()).unwrap().total();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
