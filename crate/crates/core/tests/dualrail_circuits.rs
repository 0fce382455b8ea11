use proptest::prelude::*;
use qkdsim::dualrail::{
    encoded_key_rate, fault_pass_probability, gad_encoded_rates, run_encoded, table1_rates,
    EncodedNoise, EncodingScheme, FaultSite, Site,
};
use qkdsim::noise::{dual_rail_gad, AdParams, GadParams};
use qkdsim::protocols::{bb84_rates_ad, secure_fraction};
use qkdsim::qmat::{apply_channel, c, DensityMatrix, PureState};

const SCHEMES: [EncodingScheme; 2] = [EncodingScheme::AncillaBased, EncodingScheme::Optimal];

fn ad(g: f64) -> EncodedNoise {
    EncodedNoise::Ad(AdParams::new(g).unwrap())
}

fn qubit() -> impl Strategy<Value = PureState> {
    (0.0f64..=std::f64::consts::PI, 0.0f64..std::f64::consts::TAU).prop_map(|(theta, phi)| {
        let (s, co) = (theta / 2.0).sin_cos();
        PureState::qubit(c(co, 0.0), c(s * phi.cos(), s * phi.sin())).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn post_selection_restores_the_input(state in qubit(), g in 0.0f64..0.99) {
        let mut outputs = Vec::new();
        for scheme in SCHEMES {
            let r = run_encoded(&state, scheme, ad(g), FaultSite::none()).unwrap();
            prop_assert!((r.pass_probability - (1.0 - g)).abs() < 1e-12);
            let decoded = r.conditional_state.unwrap();
            prop_assert!(decoded.fidelity_with(&state).unwrap() >= 1.0 - 1e-10);
            outputs.push((r.pass_probability, decoded));
        }
        prop_assert!((outputs[0].0 - outputs[1].0).abs() < 1e-12);
        prop_assert!(outputs[0].1.approx_eq(&outputs[1].1, 1e-10));
    }
}

/// Independent derivation of the decoder-fault phase error: with
/// probability β the pair (q0, q1) is replaced by I/4 after detection, so
/// the decoded qubit is maximally mixed on that branch and the kept run is
/// wrong half the time.
fn decoder_phase_error_oracle(beta: f64, gamma: f64) -> f64 {
    beta * (1.0 - gamma) / 2.0
}

#[test]
fn table1_joint_rates_on_grid() {
    let grid = [0.0, 0.05, 0.1, 0.15, 0.2];
    let gammas = [0.0, 0.2, 0.4, 0.6, 0.8];
    for &b in &grid {
        for &g in &gammas {
            for site in Site::FAULTY {
                let fault = FaultSite::new(site, b).unwrap();
                let (e_b, e_p) = table1_rates(fault, g).unwrap();
                let z = [PureState::zero(), PureState::one()];
                let x = [PureState::plus(), PureState::minus()];
                let avg = |states: &[PureState], pick: fn(&qkdsim::dualrail::EncodedRunResult) -> f64| {
                    states
                        .iter()
                        .map(|s| pick(&run_encoded(s, EncodingScheme::AncillaBased, ad(g), fault).unwrap()))
                        .sum::<f64>()
                        / 2.0
                };
                let joint_z = avg(&z, |r| r.joint_error_z);
                let joint_x = avg(&x, |r| r.joint_error_x);
                assert!((joint_z - e_b).abs() < 1e-10, "{site:?} β={b} γ={g}");
                if site == Site::Decoder {
                    assert!((joint_x - decoder_phase_error_oracle(b, g)).abs() < 1e-10);
                } else {
                    assert!((joint_x - e_p).abs() < 1e-10, "{site:?} β={b} γ={g}");
                }
                let pass = run_encoded(&PureState::plus(), EncodingScheme::AncillaBased, ad(g), fault)
                    .unwrap()
                    .pass_probability;
                assert!((pass - fault_pass_probability(fault, g).unwrap()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn optimal_scheme_faults_match_ancilla_rows() {
    for site in [Site::Encoder, Site::PostSelection] {
        let fault = FaultSite::new(site, 0.1).unwrap();
        let (e_b, _) = table1_rates(fault, 0.5).unwrap();
        let r = run_encoded(&PureState::zero(), EncodingScheme::Optimal, ad(0.5), fault).unwrap();
        let expected = if site == Site::Encoder { e_b } else { 0.1 / 4.0 };
        assert!((r.joint_error_z - expected).abs() < 1e-10, "{site:?}");
    }
}

#[test]
fn gad_runs_match_closed_form() {
    for i in 0..=20 {
        for j in 0..=20 {
            let params = GadParams::new(i as f64 / 20.0, j as f64 / 20.0).unwrap();
            let closed = gad_encoded_rates(params);
            for scheme in SCHEMES {
                let rep =
                    encoded_key_rate(scheme, EncodedNoise::Gad(params), FaultSite::none()).unwrap();
                if closed.sift < 1e-14 {
                    assert!(rep.flag.is_some());
                    continue;
                }
                assert!(rep.rates.max_abs_diff(&closed) < 1e-10, "{params:?}");
            }
            if j == 0 || j == 20 {
                assert_eq!(closed.e_b, 0.0);
            }
        }
    }
}

#[test]
fn gad_image_of_logical_zero_matches_expansion() {
    let (g, p) = (0.3, 0.7);
    let out = apply_channel(
        &DensityMatrix::basis(2, 0b01).unwrap(),
        &dual_rail_gad(GadParams::new(g, p).unwrap()),
    )
    .unwrap();
    let pops = out.populations();
    let expected = [
        p * g * (1.0 - g + p * g),
        (1.0 - g + p * g) * (1.0 - p * g),
        (1.0 - p) * g * p * g,
        (1.0 - p) * g * (1.0 - p * g),
    ];
    for (a, b) in pops.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{pops:?} vs {expected:?}");
    }
    assert!(out.matrix().hermitian_deviation() < 1e-12);
    let off_diagonal = out.matrix().entries().iter().enumerate().filter(|(k, _)| k % 5 != 0).map(|(_, v)| v.norm()).fold(0.0, f64::max);
    assert!(off_diagonal < 1e-12);
}

#[test]
fn encoding_dominates_plain_bb84() {
    for i in 0..100 {
        let g = i as f64 / 99.0;
        let plain = secure_fraction(&bb84_rates_ad(g, 0.0).unwrap());
        let encoded = encoded_key_rate(EncodingScheme::AncillaBased, ad(g), FaultSite::none())
            .unwrap()
            .secure_fraction;
        assert!((encoded - (1.0 - g)).abs() < 1e-12);
        assert!(encoded >= plain - 1e-12, "γ={g}");
    }
}
