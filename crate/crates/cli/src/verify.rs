//! Closed forms against the density-matrix simulation on fixed grids.

use qkdsim::dualrail::{
    encoded_key_rate, run_encoded, EncodedNoise, EncodingScheme, FaultSite, Site,
};
use qkdsim::noise::{AdParams, GadParams};
use qkdsim::protocols::{
    simulate_protocol, ChannelNoise, Distribution, ErrorRates, PairKind, ProtocolConfig,
};
use qkdsim::qmat::PureState;
use qkdsim::{dualrail, protocols, Result};

pub const TOLERANCE: f64 = 1e-10;

/// The closed forms under test, swappable so the harness can be checked
/// against a deliberately broken formula.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub bb84_rates_ad: fn(f64, f64) -> Result<ErrorRates>,
    pub bb84_rates_gad: fn(f64, f64, f64) -> Result<ErrorRates>,
    pub b92_rates: fn(f64, f64) -> Result<ErrorRates>,
    pub bbm92_rates: fn(&ProtocolConfig) -> Result<ErrorRates>,
    pub table1_rates: fn(FaultSite, f64) -> Result<(f64, f64)>,
    pub fault_pass_probability: fn(FaultSite, f64) -> Result<f64>,
    pub gad_encoded_rates: fn(GadParams) -> ErrorRates,
}

impl Default for Formulas {
    fn default() -> Self {
        Self {
            bb84_rates_ad: protocols::bb84_rates_ad,
            bb84_rates_gad: protocols::bb84_rates_gad,
            b92_rates: protocols::b92_rates,
            bbm92_rates: protocols::bbm92_rates,
            table1_rates: dualrail::table1_rates,
            fault_pass_probability: dualrail::fault_pass_probability,
            gad_encoded_rates: dualrail::gad_encoded_rates,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub op: &'static str,
    pub points: usize,
    pub max_deviation: f64,
    /// Context for the worst point.
    pub worst: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_deviation <= TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    /// Reported comparisons that do not affect the outcome.
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }

    pub fn covered_ops(&self) -> Vec<&'static str> {
        let mut ops: Vec<_> = self.checks.iter().map(|c| c.op).collect();
        ops.sort_unstable();
        ops.dedup();
        ops
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<24} {:>5} points  max |diff| = {:.3e}{}\n",
                if c.passed() { "PASS" } else { "FAIL" },
                c.op,
                c.points,
                c.max_deviation,
                if c.passed() {
                    String::new()
                } else {
                    format!("  at {}", c.worst)
                }
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("INFO {n}\n"));
        }
        out.push_str(&format!(
            "{} of {} checks failed\n",
            self.failures(),
            self.checks.len()
        ));
        out
    }
}

struct Tracker {
    op: &'static str,
    points: usize,
    max_deviation: f64,
    worst: String,
}

impl Tracker {
    fn new(op: &'static str) -> Self {
        Self {
            op,
            points: 0,
            max_deviation: 0.0,
            worst: String::new(),
        }
    }

    fn record(&mut self, deviation: f64, context: impl FnOnce() -> String) {
        self.points += 1;
        // NaN counts as a failure.
        if deviation.is_nan() || deviation > self.max_deviation {
            self.max_deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
            self.worst = context();
        }
    }

    fn fail(&mut self, context: String) {
        self.record(f64::INFINITY, || context);
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            op: self.op,
            points: self.points,
            max_deviation: self.max_deviation,
            worst: self.worst,
        }
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

const DELTAS: [f64; 3] = [0.0, 0.03, 0.1];

fn compare(t: &mut Tracker, closed: Result<ErrorRates>, cfg: &ProtocolConfig) {
    match (closed, simulate_protocol(cfg)) {
        (Ok(a), Ok(b)) => t.record(a.max_abs_diff(&b), || format!("{cfg:?}")),
        (a, b) => t.fail(format!("{cfg:?}: {a:?} / {b:?}")),
    }
}

fn check_protocols(f: &Formulas, n: usize) -> Vec<CheckResult> {
    let ad = |g| ChannelNoise::Ad(AdParams::new(g).expect("grid value"));
    let mut bb84 = Tracker::new("bb84_rates_ad");
    let mut gad = Tracker::new("bb84_rates_gad");
    let mut b92 = Tracker::new("b92_rates");
    let mut bbm92 = Tracker::new("bbm92_rates");
    for g in grid(n) {
        for d in DELTAS {
            compare(&mut bb84, (f.bb84_rates_ad)(g, d), &ProtocolConfig::bb84(ad(g), d).unwrap());
            compare(&mut b92, (f.b92_rates)(g, d), &ProtocolConfig::b92(g, d).unwrap());
            for p in grid(n.min(11)) {
                let noise = ChannelNoise::Gad(GadParams::new(g, p).unwrap());
                compare(&mut gad, (f.bb84_rates_gad)(g, p, d), &ProtocolConfig::bb84(noise, d).unwrap());
            }
            for (pair, dist) in [
                (PairKind::Correlated, Distribution::CharlieMidpoint),
                (PairKind::AntiCorrelated, Distribution::CharlieMidpoint),
                (PairKind::Correlated, Distribution::AliceSends),
            ] {
                let cfg = ProtocolConfig::bbm92(pair, dist, g, d).unwrap();
                compare(&mut bbm92, (f.bbm92_rates)(&cfg), &cfg);
            }
            for gb in grid(5) {
                let cfg = ProtocolConfig::bbm92_asymmetric(g, gb, d).unwrap();
                compare(&mut bbm92, (f.bbm92_rates)(&cfg), &cfg);
            }
        }
    }
    vec![bb84.finish(), gad.finish(), b92.finish(), bbm92.finish()]
}

fn joint_rates(fault: FaultSite, gamma: f64) -> Result<(f64, f64, f64)> {
    let noise = EncodedNoise::Ad(AdParams::new(gamma)?);
    let run = |s: PureState| run_encoded(&s, EncodingScheme::AncillaBased, noise, fault);
    let (z0, z1) = (run(PureState::zero())?, run(PureState::one())?);
    let (x0, x1) = (run(PureState::plus())?, run(PureState::minus())?);
    Ok((
        (z0.joint_error_z + z1.joint_error_z) / 2.0,
        (x0.joint_error_x + x1.joint_error_x) / 2.0,
        (z0.pass_probability + z1.pass_probability + x0.pass_probability + x1.pass_probability)
            / 4.0,
    ))
}

fn check_dualrail(f: &Formulas, n: usize, notes: &mut Vec<String>) -> Vec<CheckResult> {
    let mut table = Tracker::new("table1_rates");
    let mut pass = Tracker::new("fault_pass_probability");
    let mut decoder_max: Option<(f64, f64, f64, f64)> = None;
    let betas = [0.0, 0.05, 0.1, 0.15, 0.2];
    for &b in &betas {
        for g in grid(5) {
            for site in Site::FAULTY {
                let fault = FaultSite::new(site, b).unwrap();
                let ctx = || format!("{site:?} beta={b} gamma={g}");
                let (closed, expected_pass) =
                    match ((f.table1_rates)(fault, g), (f.fault_pass_probability)(fault, g)) {
                        (Ok(t), Ok(p)) => (t, p),
                        (a, b) => {
                            table.fail(format!("{}: {a:?} / {b:?}", ctx()));
                            continue;
                        }
                    };
                let (jz, jx, p) = joint_rates(fault, g).expect("valid grid point");
                table.record((closed.0 - jz).abs(), ctx);
                if site == Site::Decoder {
                    if decoder_max.is_none_or(|m| (closed.1 - jx).abs() > (m.2 - m.3).abs()) {
                        decoder_max = Some((b, g, closed.1, jx));
                    }
                } else {
                    table.record((closed.1 - jx).abs(), ctx);
                }
                pass.record((expected_pass - p).abs(), ctx);
            }
        }
    }
    if let Some((b, g, t, o)) = decoder_max {
        notes.push(format!(
            "decoder e_p: table {t:.6} vs simulated {o:.6} at beta={b} gamma={g} \
             (table gives beta(1-gamma), simulation gives beta(1-gamma)/2; not counted)"
        ));
    }

    let mut gad = Tracker::new("gad_encoded_rates");
    for g in grid(n.min(21)) {
        for p in grid(n.min(21)) {
            let params = GadParams::new(g, p).unwrap();
            let closed = (f.gad_encoded_rates)(params);
            for scheme in [EncodingScheme::AncillaBased, EncodingScheme::Optimal] {
                let report = encoded_key_rate(scheme, EncodedNoise::Gad(params), FaultSite::none())
                    .expect("valid grid point");
                let ctx = || format!("{scheme:?} gamma={g} p={p}");
                if report.flag.is_some() {
                    gad.record(closed.sift.abs(), ctx);
                } else {
                    gad.record(closed.max_abs_diff(&report.rates), ctx);
                }
            }
        }
    }
    vec![table.finish(), pass.finish(), gad.finish()]
}

/// Runs every comparison. `points` sets the γ grid (at least 2).
pub fn run(formulas: &Formulas, points: usize) -> VerifyReport {
    let n = points.max(2);
    let mut report = VerifyReport::default();
    report.checks.extend(check_protocols(formulas, n));
    report.checks.extend(check_dualrail(formulas, n, &mut report.notes));
    report
}

/// Every closed-form operation exported by the library.
pub fn closed_form_ops() -> Vec<&'static str> {
    let mut ops: Vec<_> = protocols::CLOSED_FORM_OPS
        .iter()
        .chain(dualrail::CLOSED_FORM_OPS)
        .copied()
        .collect();
    ops.sort_unstable();
    ops
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_closed_form_is_checked() {
        let report = run(&Formulas::default(), 3);
        assert_eq!(report.covered_ops(), closed_form_ops());
    }

    #[test]
    fn default_formulas_pass() {
        let report = run(&Formulas::default(), 11);
        assert_eq!(report.failures(), 0, "{}", report.render());
        assert_eq!(report.notes.len(), 1);
    }

    #[test]
    fn corrupted_formula_fails() {
        fn wrong_b92(g: f64, d: f64) -> Result<ErrorRates> {
            let mut r = protocols::b92_rates(g, d)?;
            r.e_p = 0.5 * (1.0 + (1.0 - g).sqrt());
            Ok(r)
        }
        let formulas = Formulas {
            b92_rates: wrong_b92,
            ..Formulas::default()
        };
        let report = run(&formulas, 5);
        assert_eq!(report.failures(), 1);
        assert!(report.render().contains("FAIL b92_rates"));
    }
}
