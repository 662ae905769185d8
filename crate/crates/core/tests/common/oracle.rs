//! Designers paired with independent numerical minimizers. Each function
//! returns `(designer value, oracle value)` for one seeded instance.

use super::*;
use afrelay::channel::{Direction, DownlinkSystem, SystemDims, UplinkSystem};
use afrelay::downlink::{self, mse_downlink, solve_precoder, update_equalizers};
use afrelay::linalg::{block_diag, inv_hpd, trace_re, vstack, CMat};
use afrelay::uplink::{
    closed_form_precoder_single_user, extract_precoder, f_from_tilde, forwarding_closed_form, identity_init, mse_bar,
    mse_uplink_optimal_b, pi_matrix, precoder_sdp_uplink,
};
use num_complex::Complex64;

pub const TOL: f64 = 1e-4;

pub const SCALAR_PRECODER_SEEDS: u64 = 20;
pub const PRECODER_DUAL_SEEDS: u64 = 6;
pub const FORWARDING_SEEDS: u64 = 6;
pub const POINT_TO_POINT_SEEDS: u64 = 6;
pub const COVARIANCE_SDP_SEEDS: u64 = 8;

fn scalar_downlink(seed: u64) -> (DownlinkSystem, CMat, CMat) {
    let mut r = rng(seed);
    let h1 = randn(&mut r, 1, 1);
    let h2 = randn(&mut r, 1, 1);
    let eta = 0.05 + randn(&mut r, 1, 1)[(0, 0)].norm_sqr() * 0.2;
    let v = 0.05 + randn(&mut r, 1, 1)[(0, 0)].norm_sqr() * 0.2;
    let sys = DownlinkSystem {
        h_br: h1,
        h_rm: vec![h2],
        r_eta: scalar(eta),
        r_v: vec![scalar(v)],
        streams: vec![1],
        p_s: 0.5 + (seed % 3) as f64,
        p_r: 0.5 + (seed % 4) as f64,
    };
    // a relay gain leaving room for some source power
    let mut w = randn(&mut r, 1, 1);
    let cap = 0.5 * sys.p_r / eta;
    if w[(0, 0)].norm_sqr() > cap {
        w *= Complex64::new((cap / w[(0, 0)].norm_sqr()).sqrt(), 0.0);
    }
    let g = if seed % 2 == 0 {
        randn(&mut r, 1, 1)
    } else {
        update_equalizers(&w, &downlink::identity_init(&sys).unwrap().t, &sys).unwrap().remove(0)
    };
    (sys, w, g)
}

/// 1x1 precoder step against golden section over magnitude and phase.
pub fn scalar_precoder(seed: u64) -> (f64, f64) {
    let (sys, w, g) = scalar_downlink(seed);
    let g = [g];
    let t = solve_precoder(&w, &g, &sys).unwrap();
    let got = mse_downlink(&g, &w, &t, &sys).unwrap();

    let wn = w[(0, 0)].norm_sqr();
    let h1 = sys.h_br[(0, 0)].norm_sqr();
    let r_max = sys.p_s.sqrt().min(((sys.p_r / wn - sys.r_eta[(0, 0)].re) / h1).sqrt());
    let at = |r: f64, phase: f64| {
        let t = CMat::from_element(1, 1, Complex64::from_polar(r, phase));
        mse_downlink(&g, &w, &t, &sys).unwrap()
    };
    let best_phase = |r: f64| {
        let grid = 64;
        let step = std::f64::consts::TAU / grid as f64;
        let k = (0..grid).min_by(|&a, &b| at(r, a as f64 * step).total_cmp(&at(r, b as f64 * step))).unwrap();
        let c = k as f64 * step;
        golden_section(&|p| at(r, p), c - step, c + step, 1e-10).1
    };
    (got, golden_section(&best_phase, 0.0, r_max, 1e-10).1)
}

/// Concave dual of the precoder program, maximized by nested golden section
/// over the source and relay multipliers.
fn precoder_dual_value(w: &CMat, g: &[CMat], sys: &DownlinkSystem) -> f64 {
    let c = block_diag(g) * vstack(&sys.h_rm).unwrap() * w * &sys.h_br;
    let a0 = c.adjoint() * &c;
    let hw = w * &sys.h_br;
    let a2 = hw.adjoint() * &hw;
    let n = sys.n_base();
    let c0 = mse_downlink(g, w, &CMat::zeros(n, sys.total_streams()), sys).unwrap();
    let c2 = trace_re(&(w * &sys.r_eta * w.adjoint())) - sys.p_r;
    let dual = |m1: f64, m2: f64| {
        let k = &a0 + CMat::identity(n, n) * Complex64::new(m1, 0.0) + &a2 * Complex64::new(m2, 0.0);
        c0 - trace_re(&(&c * inv_hpd(&k).unwrap() * c.adjoint())) - m1 * sys.p_s + m2 * c2
    };
    let hi = 1e4 * (1.0 + trace_re(&a0));
    let inner_max = |m1: f64| -golden_section(&|m2| -dual(m1, m2), 0.0, hi, 1e-11).1;
    -golden_section(&|m1| -inner_max(m1), 0.0, hi, 1e-11).1
}

/// 3x3 precoder program against its Lagrange dual.
pub fn precoder_dual(seed: u64) -> (f64, f64) {
    let dims = SystemDims::uniform(Direction::Downlink, 3, 3, 1, 3, 3);
    let sys = downlink(&dims, seed, 10.0 + 5.0 * seed as f64, 15.0);
    let init = downlink::identity_init(&sys).unwrap();
    let mut r = rng(100 + seed);
    let w = if seed % 2 == 0 { init.w.clone() } else { &init.w + randn(&mut r, 3, 3) * Complex64::new(0.2, 0.0) };
    let g = update_equalizers(&w, &init.t, &sys).unwrap();
    let t = solve_precoder(&w, &g, &sys).unwrap();
    (mse_downlink(&g, &w, &t, &sys).unwrap(), precoder_dual_value(&w, &g, &sys))
}

/// Closed-form whitened relay matrix against multi-start projected gradient
/// over all 2x2 relay matrices in the power ball.
pub fn forwarding(seed: u64) -> (f64, f64) {
    let dims = SystemDims::uniform(Direction::Uplink, 2, 2, 1, 2, 2);
    let sys = uplink(&dims, seed, 15.0, 10.0 + 5.0 * seed as f64);
    let mut r = rng(200 + seed);
    let p = if seed % 2 == 0 { vec![CMat::identity(2, 2)] } else { vec![randn(&mut r, 2, 2)] };
    let fw = forwarding_closed_form(&p, &sys).unwrap();
    let got = mse_bar(&fw.f_tilde, &p, &sys).unwrap();

    let obj = |x: &[f64]| mse_bar(&from_params(x, 2, 2), &p, &sys).unwrap();
    let radius = sys.p_r.sqrt();
    let mut oracle = f64::INFINITY;
    for start in 0..6 {
        let x0 = if start == 0 {
            to_params(&(CMat::identity(2, 2) * Complex64::new(radius / 2f64.sqrt(), 0.0)))
        } else {
            to_params(&randn(&mut r, 2, 2))
        };
        oracle = oracle.min(pgd_ball(&obj, &x0, radius, 4000).1);
    }
    (got, oracle)
}

/// Single-user closed-form precoder with a transparent noiseless second hop
/// against projected gradient on the point-to-point LMMSE problem.
pub fn point_to_point(seed: u64) -> (f64, f64) {
    let mut r = rng(300 + seed);
    let h = randn(&mut r, 2, 2);
    let r_n = rand_pd(&mut r, 2, 0.1) * Complex64::new(0.1, 0.0);
    let sys = UplinkSystem {
        h_mr: vec![h.clone()],
        h_rb: CMat::identity(2, 2),
        r_n: r_n.clone(),
        r_xi: CMat::zeros(2, 2),
        streams: vec![2],
        p_s: vec![0.5 + seed as f64],
        p_r: 1.0,
    };
    // any invertible relay matrix makes the second hop transparent
    let ft = rand_pd(&mut r, 2, 0.5);
    let p = closed_form_precoder_single_user(&ft, &sys).unwrap();
    assert!((trace_re(&(&p * p.adjoint())) - sys.p_s[0]).abs() <= 1e-8 * sys.p_s[0]);

    let gain = h.adjoint() * inv_hpd(&r_n).unwrap() * &h;
    let mse = |p: &CMat| trace_re(&inv_hpd(&(p.adjoint() * &gain * p + CMat::identity(2, 2))).unwrap());
    let obj = |x: &[f64]| mse(&from_params(x, 2, 2));
    let radius = sys.p_s[0].sqrt();
    let mut oracle = f64::INFINITY;
    for _ in 0..4 {
        oracle = oracle.min(pgd_ball(&obj, &to_params(&randn(&mut r, 2, 2)), radius, 4000).1);
    }
    (mse(&p), oracle)
}

/// Covariance SDP optimum plus the precoder-free terms against the MSE
/// evaluated directly at the extracted precoders.
pub fn covariance_sdp(seed: u64) -> (f64, f64) {
    let sys = standard_uplink(seed);
    let (p0, _) = identity_init(&sys).unwrap();
    let ft = forwarding_closed_form(&p0, &sys).unwrap().f_tilde;
    let pi = pi_matrix(&ft, &sys).unwrap();
    let cov = precoder_sdp_uplink(&pi, &sys).unwrap();
    let p = extract_precoder(&cov.q, &sys.streams).unwrap();
    let f = f_from_tilde(&ft, &p, &sys).unwrap();
    let via_sdp = cov.sdp_objective + sys.total_streams() as f64 - trace_re(&pi);
    (via_sdp, mse_uplink_optimal_b(&f, &p, &sys).unwrap())
}
