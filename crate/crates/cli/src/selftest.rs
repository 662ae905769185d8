//! Quick checks of the small worked examples; runs in well under a second.

use afrelay::baselines::{downlink_baseline, BaselineKind};
use afrelay::channel::{sample_rayleigh, Direction, DownlinkSystem, SystemDims, UplinkSystem};
use afrelay::downlink::{run_algorithm1, Alg1Options};
use afrelay::linalg::{c64, trace_re, CMat};
use afrelay::montecarlo::{aggregate, qpsk_detect, qpsk_modulate, Algorithm, ExperimentConfig, TrialResult};
use afrelay::uplink::{extract_precoder, forwarding_closed_form, precoder_sdp_uplink, run_algorithm2, UplinkOptions};
use afrelay::waterfill::water_fill;

use crate::config::parse_config;

type Check = (&'static str, fn() -> bool);

fn trial(mse: f64) -> TrialResult {
    TrialResult {
        algorithm: Algorithm::Alg2,
        point: 0,
        trial: 0,
        analytic_mse: mse,
        empirical_mse: mse,
        empirical_std_error: 0.0,
        ser: 0.0,
        iterations: 0,
        converged: true,
        source_power: 0.0,
        empirical_source_power: 0.0,
        trace: vec![mse],
        flagged: None,
    }
}

fn downlink() -> DownlinkSystem {
    let d = SystemDims::standard(Direction::Downlink);
    DownlinkSystem::from_snr(&d, &sample_rayleigh(&d, 1, 0), 20.0, 20.0, 1.0, 1.0).unwrap()
}

fn uplink() -> UplinkSystem {
    let d = SystemDims::standard(Direction::Uplink);
    UplinkSystem::from_snr(&d, &sample_rayleigh(&d, 1, 0), 20.0, 20.0, 1.0, 1.0).unwrap()
}

const CHECKS: &[Check] = &[
    ("qpsk (0,0) maps to (1+j)/sqrt2", || {
        let s = qpsk_modulate(&[false, false]).unwrap()[0];
        (s - c64(1.0, 1.0) / 2f64.sqrt()).norm() < 1e-15
    }),
    ("qpsk round trip on all symbols", || {
        let bits = [false, false, false, true, true, false, true, true];
        qpsk_detect(&qpsk_modulate(&bits).unwrap()) == bits
    }),
    ("qpsk unit energy", || qpsk_modulate(&[true, false]).unwrap().iter().all(|s| (s.norm_sqr() - 1.0).abs() < 1e-15)),
    ("aggregate of 1 and 3 is 2", || aggregate(&[trial(1.0), trial(3.0)], (0.0, 0.0)).unwrap().mean_mse_analytic == 2.0),
    ("empty config is the default", || parse_config("").ok() == Some(ExperimentConfig::standard(Direction::Downlink))),
    ("n_relay = 0 rejected", || parse_config("[system]\nn_relay = 0\n").is_err()),
    ("water-filling spends the budget", || (water_fill(&[1.0, 0.5], &[2.0, 1.0], 3.0).unwrap().total() - 3.0).abs() < 1e-12),
    ("direct AF saturates both budgets", || {
        let sys = downlink();
        let d = downlink_baseline(BaselineKind::DirectAf, &sys).unwrap();
        (trace_re(&(&d.t * d.t.adjoint())) - sys.p_s).abs() < 1e-8 && (d.relay_power(&sys) - sys.p_r).abs() < 1e-8
    }),
    ("zero iterations return the initialization", || {
        let sys = downlink();
        let (_, t) = run_algorithm1(&sys, &Alg1Options { max_iter: 0, ..Default::default() }).unwrap();
        t.iterations == 0 && !t.converged
    }),
    ("zero precoders give a zero relay", || {
        let sys = uplink();
        let p: Vec<CMat> = sys.h_mr.iter().map(|h| CMat::zeros(h.ncols(), 2)).collect();
        forwarding_closed_form(&p, &sys).unwrap().f_tilde.norm() == 0.0
    }),
    ("zero weight gives zero covariances", || {
        let sys = uplink();
        let q = precoder_sdp_uplink(&CMat::zeros(4, 4), &sys).unwrap();
        q.sdp_objective == 0.0 && q.q.iter().all(|m| m.norm() == 0.0)
    }),
    ("identity covariance extracts to identity", || {
        let p = extract_precoder(&[CMat::identity(2, 2)], &[2]).unwrap();
        (&p[0] - CMat::identity(2, 2)).norm() < 1e-12
    }),
    ("uplink zero iterations return the initialization", || {
        let (_, t) = run_algorithm2(&uplink(), &UplinkOptions { max_iter: 0, ..Default::default() }).unwrap();
        t.iterations == 0 && t.mse.len() == 1
    }),
];

/// Runs every check, returning one `ok`/`FAILED` line each and the names of
/// the failures.
pub fn run() -> (String, Vec<&'static str>) {
    let mut report = String::new();
    let mut failed = vec![];
    for (name, check) in CHECKS {
        let ok = std::panic::catch_unwind(check).unwrap_or(false);
        report += &format!("{} {name}\n", if ok { "ok    " } else { "FAILED" });
        if !ok {
            failed.push(*name);
        }
    }
    (report, failed)
}
