use qkdsim::protocols::ErrorRates;
use qkdsim_cli::commands::{self, SHOTS_COLUMNS, SWEEP_BETA_COLUMNS};
use qkdsim_cli::config::{ExperimentConfig, Source};
use qkdsim_cli::error::exit;
use qkdsim_cli::verify::Formulas;
use qkdsim_cli::{main_with, run_verify};

fn cfg(overrides: &[(&str, &str)]) -> ExperimentConfig {
    let pairs: Vec<(String, String)> = overrides
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    ExperimentConfig::load(None, &pairs).unwrap()
}

fn floats(col: Vec<&str>) -> Vec<f64> {
    col.into_iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn bb84_sweep_has_101_rows_starting_at_one() {
    let t = commands::rates(&cfg(&[])).unwrap();
    assert_eq!(t.rows.len(), 101);
    assert_eq!(
        t.header,
        ["gamma", "e_b", "e_p", "sift", "secure_fraction", "l_sec", "provenance"]
    );
    assert_eq!(t.column("secure_fraction").unwrap()[0], "1");
}

#[test]
fn b92_column_dominates_bb84() {
    let bb84 = floats(commands::rates(&cfg(&[])).unwrap().column("secure_fraction").unwrap());
    let b92 = floats(
        commands::rates(&cfg(&[("protocol.kind", "b92")]))
            .unwrap()
            .column("secure_fraction")
            .unwrap(),
    );
    assert!(bb84.iter().zip(&b92).all(|(a, b)| b >= a));
}

#[test]
fn dual_rail_sweep_is_one_minus_gamma() {
    for source in ["analytic", "oracle"] {
        let t = commands::rates(&cfg(&[("protocol.kind", "dual-rail"), ("protocol.source", source)]))
            .unwrap();
        let g = floats(t.column("gamma").unwrap());
        let f = floats(t.column("secure_fraction").unwrap());
        for (g, f) in g.iter().zip(f) {
            assert!((f - (1.0 - g)).abs() < 1e-11, "{source} γ={g}: {f}");
        }
    }
}

#[test]
fn gad_surface_uses_default_grid() {
    let t = commands::rates(&cfg(&[("protocol.noise", "gad"), ("sweep.parameter", "gamma-p")]))
        .unwrap();
    assert_eq!(t.rows.len(), 21 * 21);
    assert_eq!(&t.header[..2], ["gamma", "p"]);
}

#[test]
fn key_length_column_when_requested() {
    let t = commands::rates(&cfg(&[("protocol.l_sift", "32768"), ("sweep.points", "3")])).unwrap();
    assert_eq!(t.column("l_sec").unwrap(), ["32768", "0", "0"]);
}

#[test]
fn unsupported_rate_configs_fail() {
    for over in [
        [("protocol.kind", "b92"), ("protocol.noise", "gad")],
        [("protocol.kind", "dual-rail"), ("protocol.delta", "0.1")],
    ] {
        assert!(commands::rates(&cfg(&over)).is_err());
    }
}

#[test]
fn zero_delay_without_readout_error_has_no_errors() {
    let t = commands::shots(&cfg(&[("shots.readout_error", "0"), ("shots.delays", "[0, 0, 0]")]))
        .unwrap();
    assert_eq!(t.header, SHOTS_COLUMNS);
    assert!(t.column("qber").unwrap().iter().all(|q| *q == "0"));
}

#[test]
fn yorktown_key_length_shrinks_to_zero() {
    let t = commands::shots(&cfg(&[("shots.qubits", "[3]"), ("shots.seed", "5")])).unwrap();
    let g = floats(t.column("gamma").unwrap());
    assert!((g.last().unwrap() - 0.5).abs() < 1e-3);
    let l: Vec<u64> = t.column("l_sec").unwrap().iter().map(|s| s.parse().unwrap()).collect();
    assert!(l.windows(2).all(|w| w[1] <= w[0]), "{l:?}");
    assert_eq!(*l.last().unwrap(), 0);
    assert!(l[0] > 0);
}

#[test]
fn fixed_seed_reproduces_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let code = main_with([
            "qkdsim",
            "shots",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
            "--protocol.kind",
            "bbm92",
            "--profile",
            "bogota",
        ]);
        assert_eq!(code, exit::SUCCESS);
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("# seed = 42\n"));
    let sidecar = std::fs::read_to_string(dir.path().join("a.csv.config.toml")).unwrap();
    assert!(sidecar.starts_with("# qkdsim shots"));
    assert!(sidecar.contains("seed = 42"));
    let echoed: ExperimentConfig =
        toml::from_str(&sidecar).expect("sidecar parses as a config");
    assert_eq!(echoed.shots.seed, 42);
}

fn beta_rows(source: Source) -> Vec<qkdsim_cli::commands::BetaRow> {
    commands::beta_rows(&cfg(&[]))
        .unwrap()
        .into_iter()
        .filter(|r| r.source == source)
        .collect()
}

#[test]
fn beta_zero_rows_give_one_minus_gamma() {
    let t = commands::sweep_beta(&cfg(&[])).unwrap();
    assert_eq!(t.header, SWEEP_BETA_COLUMNS);
    assert_eq!(t.rows.len(), 3 * 41 * 2);
    for r in commands::beta_rows(&cfg(&[])).unwrap() {
        if r.beta == 0.0 {
            assert!((r.secure_fraction() - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn decoder_fault_costs_the_most() {
    use qkdsim::dualrail::Site;
    for (source, strict) in [(Source::Analytic, true), (Source::Oracle, false)] {
        let rows = beta_rows(source);
        let at = |site: Site, beta: f64| {
            rows.iter()
                .find(|r| r.site == site && r.beta == beta)
                .unwrap()
                .secure_fraction()
        };
        for r in rows.iter().filter(|r| r.site == Site::Decoder && r.beta > 0.0) {
            let d = r.secure_fraction();
            for other in [Site::Encoder, Site::PostSelection] {
                let o = at(other, r.beta);
                if o == 0.0 {
                    continue;
                }
                if strict {
                    assert!(d < o, "{source:?} β={}: decoder {d} vs {other:?} {o}", r.beta);
                } else {
                    assert!(d <= o + 1e-12, "{source:?} β={}", r.beta);
                }
            }
        }
    }
}

#[test]
fn encoder_bit_error_below_post_selection() {
    use qkdsim::dualrail::Site;
    let rows = beta_rows(Source::Analytic);
    for r in rows.iter().filter(|r| r.site == Site::Encoder && r.beta > 0.0) {
        let post = rows
            .iter()
            .find(|p| p.site == Site::PostSelection && p.beta == r.beta)
            .unwrap();
        assert!((r.e_b_joint - 0.75 * r.beta / 4.0).abs() < 1e-15);
        assert!(r.e_b_joint < post.e_b_joint);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(main_with(["qkdsim", "verify", "--points", "3"]), exit::SUCCESS);
    assert_eq!(main_with(["qkdsim", "rates", "--protocol.nope", "1"]), exit::CONFIG_ERROR);
    assert_eq!(main_with(["qkdsim", "rates", "--config", "/nonexistent.toml"]), exit::CONFIG_ERROR);
    assert_eq!(main_with(["qkdsim", "frobnicate"]), exit::CONFIG_ERROR);
    let dir = tempfile::tempdir().unwrap();
    let unwritable = dir.path().join("missing").join("out.csv");
    assert_eq!(
        main_with(["qkdsim", "rates", "--out", unwritable.to_str().unwrap()]),
        exit::CONFIG_ERROR
    );

    fn broken_bb84(g: f64, d: f64) -> qkdsim::Result<ErrorRates> {
        let mut r = qkdsim::protocols::bb84_rates_ad(g, d)?;
        r.e_b *= 1.01;
        Ok(r)
    }
    let formulas = Formulas {
        bb84_rates_ad: broken_bb84,
        ..Formulas::default()
    };
    assert_eq!(run_verify(&formulas, 5), exit::VERIFICATION_FAILED);
}

#[test]
fn config_file_sections_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(
        &path,
        "profile = \"bogota\"\n[protocol]\nkind = \"bbm92\"\npair = \"anti-correlated\"\n\
         [sweep]\nparameter = \"gamma\"\nstop = 0.5\npoints = 6\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(Some(&path), &[("sweep.points".into(), "3".into())]).unwrap();
    let t = commands::rates(&cfg).unwrap();
    assert_eq!(t.column("gamma").unwrap(), ["0", "0.25", "0.5"]);
    assert_eq!(t.column("e_b").unwrap(), ["0", "0.25", "0.5"]);
}
