//! Downlink joint design of the BS precoder `T`, relay matrix `W` and
//! per-user equalizers `G_k` for the sum-MSE problem.
//!
//! Each alternating step solves its convex subproblem: equalizers in closed
//! form, the relay matrix from its KKT system with a bisected multiplier, and
//! the precoder from a Schur-complement SDP.


use crate::channel::DownlinkSystem;
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    block_diag, hermitian_eig, hermitian_sqrt, inv_hpd, kron, scaled_identity, solve_right, trace_re, vec, vstack,
    CMat,
};
use crate::qcqp::{ComplexQcqp, QuadTerm};
use crate::relay::{saturating_scale, scale, RelayProblem, RelaySolution};
use crate::sdp::{SdpProblem, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER};
use crate::trace::{converged, IterationTrace};
use crate::waterfill::{sqrt_level_matrix, water_fill};

/// Iterations of the second-hop alternation inside the separate-LMMSE start.
pub const SECOND_HOP_INNER_ITERS: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkDesign {
    /// `N_B x L`, column blocks `T_k`.
    pub t: CMat,
    /// `N_R x N_R`.
    pub w: CMat,
    /// `G_k`, `L_k x N_M,k`.
    pub g: Vec<CMat>,
    /// Relay KKT multiplier of the last relay update.
    pub lambda: f64,
}

impl DownlinkDesign {
    /// Block-diagonal `G`.
    pub fn g_matrix(&self) -> CMat {
        block_diag(&self.g)
    }

    pub fn source_power(&self) -> f64 {
        trace_re(&(&self.t * self.t.adjoint()))
    }

    pub fn relay_power(&self, sys: &DownlinkSystem) -> f64 {
        relay_power(&self.w, &self.t, sys)
    }

    /// Checks both budgets within `rel` relative slack.
    pub fn is_feasible(&self, sys: &DownlinkSystem, rel: f64) -> bool {
        self.source_power() <= sys.p_s * (1.0 + rel) && self.relay_power(sys) <= sys.p_r * (1.0 + rel)
    }

    pub fn mse(&self, sys: &DownlinkSystem) -> Result<f64> {
        mse_downlink(&self.g, &self.w, &self.t, sys)
    }
}

/// Columns of `m` belonging to user `k`.
fn user_cols(m: &CMat, sys: &DownlinkSystem, k: usize) -> CMat {
    let off = sys.stream_offsets()[k];
    m.columns(off, sys.streams[k]).into_owned()
}

/// `[H_RM,1; ..; H_RM,K]`.
fn h_rm_stacked(sys: &DownlinkSystem) -> CMat {
    vstack(&sys.h_rm).expect("column counts validated")
}

fn check_shapes(w: &CMat, t: &CMat, sys: &DownlinkSystem) -> Result<()> {
    let (nr, nb, l) = (sys.n_relay(), sys.n_base(), sys.total_streams());
    if w.shape() != (nr, nr) || t.shape() != (nb, l) {
        return invalid(format!(
            "expected W {nr}x{nr} and T {nb}x{l}, got W {:?} and T {:?}",
            w.shape(),
            t.shape()
        ));
    }
    Ok(())
}

fn check_g(g: &[CMat], sys: &DownlinkSystem) -> Result<()> {
    if g.len() != sys.num_users() {
        return invalid("one equalizer per user expected");
    }
    for (k, gk) in g.iter().enumerate() {
        if gk.shape() != (sys.streams[k], sys.h_rm[k].nrows()) {
            return invalid(format!("equalizer {k} has shape {:?}", gk.shape()));
        }
    }
    Ok(())
}

/// Relay input covariance `R_r = H_BR T T^H H_BR^H + R_eta`.
pub fn received_covariance(t: &CMat, sys: &DownlinkSystem) -> CMat {
    let ht = &sys.h_br * t;
    let r = &ht * ht.adjoint() + &sys.r_eta;
    crate::linalg::hermitian_part(&r)
}

/// `Tr(W R_r W^H)`.
pub fn relay_power(w: &CMat, t: &CMat, sys: &DownlinkSystem) -> f64 {
    trace_re(&(w * received_covariance(t, sys) * w.adjoint()))
}

/// Sum over users of `E||G_k y_k - s_k||^2`.
pub fn mse_downlink(g: &[CMat], w: &CMat, t: &CMat, sys: &DownlinkSystem) -> Result<f64> {
    check_shapes(w, t, sys)?;
    check_g(g, sys)?;
    let rr = received_covariance(t, sys);
    let wrw = w * &rr * w.adjoint();
    let hbt = &sys.h_br * t;
    let mut total = 0.0;
    for (k, gk) in g.iter().enumerate() {
        let h = &sys.h_rm[k];
        let cov = h * &wrw * h.adjoint() + &sys.r_v[k];
        let cross = gk * h * w * user_cols(&hbt, sys, k);
        total += trace_re(&(gk * cov * gk.adjoint())) - 2.0 * trace_re(&cross) + sys.streams[k] as f64;
    }
    Ok(total.max(0.0))
}

/// LMMSE equalizers `G_k = (H_k W A_k)^H (H_k W R W^H H_k^H + R_v,k)^{-1}`,
/// where `A_k` are the user's columns of `signal` and `R` the relay input covariance.
fn equalizers_for(w: &CMat, signal: &CMat, input_cov: &CMat, sys: &DownlinkSystem) -> Result<Vec<CMat>> {
    let wrw = w * input_cov * w.adjoint();
    let mut out = Vec::with_capacity(sys.num_users());
    for k in 0..sys.num_users() {
        let h = &sys.h_rm[k];
        let a = h * w * user_cols(signal, sys, k);
        let cov = h * &wrw * h.adjoint() + &sys.r_v[k];
        let g = solve_right(&a.adjoint(), &crate::linalg::hermitian_part(&cov))
            .map_err(|_| Error::InvalidInput(format!("equalizer {k}: singular received covariance")))?;
        out.push(g);
    }
    Ok(out)
}

/// Closed-form equalizers for fixed `(W, T)`.
pub fn update_equalizers(w: &CMat, t: &CMat, sys: &DownlinkSystem) -> Result<Vec<CMat>> {
    check_shapes(w, t, sys)?;
    let hbt = &sys.h_br * t;
    equalizers_for(w, &hbt, &received_covariance(t, sys), sys)
}

/// The relay subproblem for fixed `(G, T)`: Gram `H_RM^H G^H G H_RM`,
/// cross term `(H_BR T G H_RM)^H`, input covariance `R_r`.
pub fn relay_problem(g: &[CMat], t: &CMat, sys: &DownlinkSystem) -> Result<RelayProblem> {
    check_g(g, sys)?;
    let gh = block_diag(g) * h_rm_stacked(sys);
    let cross = (&sys.h_br * t * &gh).adjoint();
    Ok(RelayProblem { gram: gh.adjoint() * &gh, cross, input_cov: received_covariance(t, sys), power: sys.p_r })
}

/// `W(lambda)` and its transmit power `Tr(W R_r W^H)`.
pub fn relay_mse_power(lambda: f64, g: &[CMat], t: &CMat, sys: &DownlinkSystem) -> Result<(CMat, f64)> {
    relay_problem(g, t, sys)?.forwarding(lambda)
}

/// KKT multiplier and relay matrix for fixed `(G, T)`.
pub fn solve_relay_multiplier(g: &[CMat], t: &CMat, sys: &DownlinkSystem) -> Result<RelaySolution> {
    relay_problem(g, t, sys)?.solve()
}

/// The precoder subproblem for fixed `(W, G)` over `v = vec(T)`:
///
/// ```text
/// minimize  ||(I_L kron A0^{1/2}) v||^2 + 2 Re(vec(B0)^H v) + c0
/// s.t.      ||v||^2 - P_s <= 0
///           ||(I_L kron A2^{1/2}) v||^2 + Tr(W R_eta W^H) - P_r <= 0
/// ```
///
/// with `A0 = H_BR^H W^H H_RM^H G^H G H_RM W H_BR`, `A2 = H_BR^H W^H W H_BR`,
/// `B0 = -(G H_RM W H_BR)^H` and `c0` the `T`-independent part of the MSE, so
/// the objective equals the sum MSE.
pub fn precoder_qcqp(w: &CMat, g: &[CMat], sys: &DownlinkSystem) -> Result<ComplexQcqp> {
    check_g(g, sys)?;
    let (nr, l) = (sys.n_relay(), sys.total_streams());
    if w.shape() != (nr, nr) {
        return invalid("relay matrix has the wrong shape");
    }
    let gm = block_diag(g);
    let c = &gm * h_rm_stacked(sys) * w * &sys.h_br; // L x N_B
    let a0 = crate::linalg::hermitian_part(&(c.adjoint() * &c));
    let wh = w * &sys.h_br;
    let a2 = crate::linalg::hermitian_part(&(wh.adjoint() * &wh));
    let eye_l = CMat::identity(l, l);
    let b0 = -c.adjoint();
    let gh = &gm * h_rm_stacked(sys) * w;
    let rv = block_diag(&sys.r_v);
    let c0 = trace_re(&(&sys.r_eta * gh.adjoint() * &gh)) + l as f64 + trace_re(&(&gm * rv * gm.adjoint()));
    let c2 = trace_re(&(w * &sys.r_eta * w.adjoint())) - sys.p_r;
    let n = sys.n_base() * l;
    Ok(ComplexQcqp {
        objective: QuadTerm { factor: kron(&eye_l, &hermitian_sqrt(&a0)?), linear: vec(&b0), constant: c0 },
        constraints: vec![
            QuadTerm::pure(CMat::identity(n, n), -sys.p_s),
            QuadTerm::pure(kron(&eye_l, &hermitian_sqrt(&a2)?), c2),
        ],
    })
}

/// The precoder SDP over `(t, Re vec(T), Im vec(T))`.
pub fn build_precoder_sdp(w: &CMat, g: &[CMat], sys: &DownlinkSystem) -> Result<SdpProblem> {
    precoder_qcqp(w, g, sys)?.to_sdp()
}

/// Optimal `T` for fixed `(W, G)`.
pub fn solve_precoder(w: &CMat, g: &[CMat], sys: &DownlinkSystem) -> Result<CMat> {
    let sol = precoder_qcqp(w, g, sys)?.solve(DEFAULT_GAP_TOL, DEFAULT_MAX_ITER)?;
    crate::linalg::unvec(&sol.v, sys.n_base(), sys.total_streams())
}

/// `sqrt(P_s / L) [I; 0]`, the relay scaled identity saturating `P_r`, and LMMSE equalizers.
pub fn identity_init(sys: &DownlinkSystem) -> Result<DownlinkDesign> {
    let (nb, nr, l) = (sys.n_base(), sys.n_relay(), sys.total_streams());
    let t = scaled_identity(nb, l, (sys.p_s / l.min(nb) as f64).sqrt());
    let eye = CMat::identity(nr, nr);
    let c = saturating_scale(&eye, &received_covariance(&t, sys), sys.p_r);
    let w = scale(&eye, c);
    let g = update_equalizers(&w, &t, sys)?;
    Ok(DownlinkDesign { t, w, g, lambda: 0.0 })
}

/// Point-to-point LMMSE precoder over `y = H x + n`: `U_L diag(sqrt(levels))`
/// with levels water-filled over the top `L` eigenmodes of `H^H R^{-1} H`.
pub fn point_to_point_precoder(h: &CMat, noise: &CMat, streams: usize, power: f64) -> Result<CMat> {
    let gain = h.adjoint() * inv_hpd(noise)? * h;
    let eig = hermitian_eig(&crate::linalg::hermitian_part(&gain))?;
    let l = streams.min(eig.dim());
    let wf = water_fill(&vec![1.0; l], &eig.values[..l], power)?;
    let mut p = eig.leading_vectors(l) * sqrt_level_matrix(&wf.levels, l, l);
    if l < streams {
        p = crate::linalg::hstack(&[p, CMat::zeros(h.ncols(), streams - l)])?;
    }
    Ok(p)
}

/// Separate per-hop design: a water-filled point-to-point precoder and LMMSE
/// receiver `W1` on hop 1, a short multiuser alternation for `(W2, G)` on
/// hop 2, then `W = W2 W1` scaled to the relay budget and LMMSE equalizers.
pub fn separate_lmmse_init(sys: &DownlinkSystem) -> Result<DownlinkDesign> {
    let (nr, l) = (sys.n_relay(), sys.total_streams());
    let t = point_to_point_precoder(&sys.h_br, &sys.r_eta, l, sys.p_s)?;
    let rr = received_covariance(&t, sys);
    let w1 = solve_right(&(&sys.h_br * &t).adjoint(), &rr)?; // L x N_R

    // hop 2 treats the relay's stream estimates as a unit-covariance source
    let eye_l = CMat::identity(l, l);
    let mut w2 = scaled_identity(nr, l, (sys.p_r / l.min(nr) as f64).sqrt());
    let mut g = equalizers_for(&w2, &eye_l, &eye_l, sys)?;
    for _ in 0..SECOND_HOP_INNER_ITERS {
        let gh = block_diag(&g) * h_rm_stacked(sys);
        let step = RelayProblem { gram: gh.adjoint() * &gh, cross: gh.adjoint(), input_cov: eye_l.clone(), power: sys.p_r }
            .solve()?;
        w2 = step.w;
        g = equalizers_for(&w2, &eye_l, &eye_l, sys)?;
    }
    let w = &w2 * &w1;
    let c = saturating_scale(&w, &rr, sys.p_r);
    let w = scale(&w, c);
    let g = update_equalizers(&w, &t, sys)?;
    Ok(DownlinkDesign { t, w, g, lambda: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Identity,
    SeparateLmmse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg1Options {
    pub init: Init,
    pub threshold: f64,
    pub max_iter: usize,
    /// `false` keeps the initial precoder fixed and alternates only `G` and `W`.
    pub update_precoder: bool,
}

impl Default for Alg1Options {
    fn default() -> Self {
        Self { init: Init::Identity, threshold: DEFAULT_THRESHOLD, max_iter: DEFAULT_MAX_ITERATIONS, update_precoder: true }
    }
}

/// Alternates `G -> W -> T` until the sum MSE changes by at most `threshold`.
///
/// A step whose result has a higher MSE than the current iterate (possible
/// only through solver round-off) is rejected, so the trace never increases.
/// A failing subproblem ends the loop with the best iterate so far and
/// `converged = false`.
pub fn run_algorithm1(sys: &DownlinkSystem, opts: &Alg1Options) -> Result<(DownlinkDesign, IterationTrace)> {
    sys.validate()?;
    if !(opts.threshold > 0.0) {
        return invalid("threshold must be positive");
    }
    let mut d = match opts.init {
        Init::Identity => identity_init(sys)?,
        Init::SeparateLmmse => separate_lmmse_init(sys).or_else(|_| identity_init(sys))?,
    };
    let mut mse = d.mse(sys)?;
    let mut trace = IterationTrace::start(mse);
    for _ in 0..opts.max_iter {
        match algorithm1_step(sys, &d, mse, opts.update_precoder) {
            Ok((next, next_mse)) => {
                d = next;
                trace.push(next_mse);
                let done = converged(mse, next_mse, opts.threshold);
                mse = next_mse;
                if done {
                    trace.converged = true;
                    break;
                }
            }
            Err(e) => {
                trace.note = Some(e.to_string());
                break;
            }
        }
    }
    Ok((d, trace))
}

fn algorithm1_step(sys: &DownlinkSystem, cur: &DownlinkDesign, cur_mse: f64, update_precoder: bool) -> Result<(DownlinkDesign, f64)> {
    // G is kept optimal for the current (W, T) at the end of every step
    let g = cur.g.clone();
    let mut best = cur_mse;
    let mut w = cur.w.clone();
    let mut lambda = cur.lambda;
    let relay = solve_relay_multiplier(&g, &cur.t, sys)?;
    let m = mse_downlink(&g, &relay.w, &cur.t, sys)?;
    if m <= best {
        best = m;
        w = relay.w;
        lambda = relay.lambda;
    }
    let mut t = cur.t.clone();
    if update_precoder {
        let cand = solve_precoder(&w, &g, sys)?;
        let m = mse_downlink(&g, &w, &cand, sys)?;
        if m <= best && relay_power(&w, &cand, sys) <= sys.p_r * (1.0 + 1e-9) {
            t = cand;
        }
    }
    let g = update_equalizers(&w, &t, sys)?;
    let d = DownlinkDesign { t, w, g, lambda };
    let m = d.mse(sys)?;
    Ok((d, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use num_complex::Complex64;
    use crate::channel::{sample_rayleigh, ChannelSet, Direction, NoiseModel, PowerBudget, SystemDims};
    use crate::linalg::testutil::*;
    use crate::linalg::{frobenius, rel_diff};

    fn cplx(x: f64) -> Complex64 {
        c64(x, 0.0)
    }

    fn scalar_sys(h1: f64, h2: f64, eta: f64, v: f64, ps: f64, pr: f64) -> DownlinkSystem {
        let m = |x: f64| CMat::from_element(1, 1, cplx(x));
        DownlinkSystem { h_br: m(h1), h_rm: vec![m(h2)], r_eta: m(eta), r_v: vec![m(v)], streams: vec![1], p_s: ps, p_r: pr }
    }

    pub(crate) fn standard_sys(seed: u64, snr1: f64, snr2: f64) -> DownlinkSystem {
        let d = SystemDims::standard(Direction::Downlink);
        let ch = sample_rayleigh(&d, seed, 0);
        DownlinkSystem::from_snr(&d, &ch, snr1, snr2, 1.0, 1.0).unwrap()
    }

    #[test]
    fn covariance_cases() {
        let s = scalar_sys(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let r = received_covariance(&CMat::zeros(1, 1), &s);
        assert_eq!(r[(0, 0)].re, 1.0);
        let r = received_covariance(&CMat::from_element(1, 1, cplx(1.0)), &s);
        assert_eq!(r[(0, 0)].re, 2.0);
        let sys = standard_sys(3, 10.0, 10.0);
        let mut rg = rng(1);
        let t = randn(&mut rg, 4, 4);
        let r = received_covariance(&t, &sys);
        assert!(frobenius(&(&r - r.adjoint())) < 1e-12);
        let emin = hermitian_eig(&r).unwrap().min_value();
        let nmin = hermitian_eig(&sys.r_eta).unwrap().min_value();
        assert!(emin >= nmin - 1e-9);
    }

    #[test]
    fn mse_simple_cases() {
        let sys = standard_sys(4, 20.0, 20.0);
        let d = identity_init(&sys).unwrap();
        let zero: Vec<CMat> = d.g.iter().map(|g| CMat::zeros(g.nrows(), g.ncols())).collect();
        assert!((mse_downlink(&zero, &d.w, &d.t, &sys).unwrap() - 4.0).abs() < 1e-12);
        // noiseless scalar chain inverted exactly
        let s = scalar_sys(2.0, 0.5, 1e-300, 1e-300, 1.0, 4.0);
        let t = CMat::from_element(1, 1, cplx(1.0));
        let w = CMat::from_element(1, 1, cplx(2.0));
        let g = vec![CMat::from_element(1, 1, cplx(1.0 / (0.5 * 2.0 * 2.0)))];
        assert!(mse_downlink(&g, &w, &t, &s).unwrap() < 1e-12);
    }

    #[test]
    fn scalar_equalizer() {
        let s = scalar_sys(1.0, 1.0, 1.0, 1.0, 1.0, 10.0);
        let one = CMat::from_element(1, 1, cplx(1.0));
        let g = update_equalizers(&one, &one, &s).unwrap();
        assert!((g[0][(0, 0)] - cplx(1.0 / 3.0)).norm() < 1e-15);
        let g = update_equalizers(&CMat::zeros(1, 1), &one, &s).unwrap();
        assert_eq!(g[0][(0, 0)].norm(), 0.0);
    }

    #[test]
    fn equalizer_beats_perturbations() {
        let sys = standard_sys(5, 15.0, 15.0);
        let d = identity_init(&sys).unwrap();
        let base = d.mse(&sys).unwrap();
        let mut r = rng(77);
        for _ in 0..100 {
            let g: Vec<CMat> = d
                .g
                .iter()
                .map(|gk| {
                    let delta = randn(&mut r, gk.nrows(), gk.ncols());
                    gk + scale(&delta, 1e-3 / frobenius(&delta))
                })
                .collect();
            assert!(mse_downlink(&g, &d.w, &d.t, &sys).unwrap() >= base - 1e-12);
        }
    }

    #[test]
    fn equalizer_stationarity() {
        let sys = standard_sys(6, 10.0, 20.0);
        let d = identity_init(&sys).unwrap();
        let mut r = rng(8);
        let h = 1e-5;
        for _ in 0..20 {
            let dir: Vec<CMat> = d.g.iter().map(|gk| randn(&mut r, gk.nrows(), gk.ncols())).collect();
            let at = |s: f64| {
                let g: Vec<CMat> = d.g.iter().zip(&dir).map(|(gk, dk)| gk + scale(dk, s)).collect();
                mse_downlink(&g, &d.w, &d.t, &sys).unwrap()
            };
            let slope = (at(h) - at(-h)) / (2.0 * h);
            assert!(slope.abs() < 1e-6, "directional derivative {slope}");
        }
    }

    #[test]
    fn relay_power_scalar_oracle() {
        // scalar: w = conj(h1 t g h2) / ((|g h2|^2 + lam) r), f = |e|^2 / ((gram + lam)^2 r)
        let s = scalar_sys(0.8, 1.3, 0.5, 0.2, 2.0, 1.0);
        let t = CMat::from_element(1, 1, cplx(1.1));
        let g = vec![CMat::from_element(1, 1, c64(0.3, -0.2))];
        let lam = 0.7;
        let (w, f) = relay_mse_power(lam, &g, &t, &s).unwrap();
        let gh = c64(0.3, -0.2) * 1.3;
        let gram = gh.norm_sqr();
        let e = (0.8 * 1.1 * gh).conj();
        let r = 0.8f64.powi(2) * 1.1f64.powi(2) + 0.5;
        let w_ref = e / ((gram + lam) * r);
        assert!((w[(0, 0)] - w_ref).norm() < 1e-12);
        let f_ref = e.norm_sqr() / ((gram + lam).powi(2) * r);
        assert!((f - f_ref).abs() < 1e-10 * f_ref.max(1.0));
    }

    #[test]
    fn relay_zero_equalizer() {
        let sys = standard_sys(9, 10.0, 10.0);
        let d = identity_init(&sys).unwrap();
        let zero: Vec<CMat> = d.g.iter().map(|g| CMat::zeros(g.nrows(), g.ncols())).collect();
        let (w, f) = relay_mse_power(1.0, &zero, &d.t, &sys).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(frobenius(&w), 0.0);
        let s = solve_relay_multiplier(&zero, &d.t, &sys).unwrap();
        assert_eq!(s.lambda, 0.0);
        assert_eq!(frobenius(&s.w), 0.0);
    }

    #[test]
    fn relay_multiplier_tiny_budget() {
        let mut sys = standard_sys(10, 20.0, 20.0);
        let d = identity_init(&sys).unwrap();
        sys.p_r = 1e-4;
        let s = solve_relay_multiplier(&d.g, &d.t, &sys).unwrap();
        assert!(s.lambda > 0.0 && s.lambda <= s.lambda_bound);
        let f = relay_power(&s.w, &d.t, &sys);
        assert!((f - 1e-4).abs() / 1e-4 <= 1e-8, "{f}");
        sys.p_r = 1e9;
        let s = solve_relay_multiplier(&d.g, &d.t, &sys).unwrap();
        assert_eq!(s.lambda, 0.0);
    }

    #[test]
    fn precoder_zero_relay() {
        let sys = standard_sys(11, 10.0, 10.0);
        let w = CMat::zeros(4, 4);
        let g: Vec<CMat> = (0..2).map(|_| CMat::zeros(2, 2)).collect();
        let t = solve_precoder(&w, &g, &sys).unwrap();
        assert!(frobenius(&t) < 1e-5, "{}", frobenius(&t));
    }

    #[test]
    fn precoder_feasible_and_not_worse() {
        let sys = standard_sys(12, 20.0, 20.0);
        let d = identity_init(&sys).unwrap();
        let relay = solve_relay_multiplier(&d.g, &d.t, &sys).unwrap();
        let t = solve_precoder(&relay.w, &d.g, &sys).unwrap();
        assert!(trace_re(&(&t * t.adjoint())) <= sys.p_s * (1.0 + 1e-6));
        assert!(relay_power(&relay.w, &t, &sys) <= sys.p_r * (1.0 + 1e-6));
        let before = mse_downlink(&d.g, &relay.w, &d.t, &sys).unwrap();
        let after = mse_downlink(&d.g, &relay.w, &t, &sys).unwrap();
        assert!(after <= before + 1e-9);
        let q = precoder_qcqp(&relay.w, &d.g, &sys).unwrap();
        assert!((q.objective.eval(&vec(&t)) - after).abs() < 1e-9);
    }

    #[test]
    fn identity_init_saturates() {
        let sys = standard_sys(13, 10.0, 10.0);
        let d = identity_init(&sys).unwrap();
        assert!((d.source_power() - sys.p_s).abs() < 1e-12);
        assert!((d.relay_power(&sys) - sys.p_r).abs() < 1e-12);
    }

    #[test]
    fn separate_init_scalar_waterfill() {
        let s = scalar_sys(0.7, 1.2, 0.1, 0.1, 3.0, 2.0);
        let d = separate_lmmse_init(&s).unwrap();
        assert!((d.t[(0, 0)].norm() - 3f64.sqrt()).abs() < 1e-12);
        assert!((d.relay_power(&s) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn separate_init_low_noise_uses_all_modes() {
        let d = SystemDims::standard(Direction::Downlink);
        let ch = sample_rayleigh(&d, 14, 0);
        let sys = DownlinkSystem::from_snr(&d, &ch, 80.0, 20.0, 1.0, 1.0).unwrap();
        let des = separate_lmmse_init(&sys).unwrap();
        for j in 0..4 {
            assert!(des.t.column(j).norm() > 1e-3);
        }
        assert!(des.is_feasible(&sys, 1e-9));
    }

    #[test]
    fn zero_iterations_return_init() {
        let sys = standard_sys(15, 20.0, 20.0);
        let opts = Alg1Options { max_iter: 0, ..Default::default() };
        let (d, tr) = run_algorithm1(&sys, &opts).unwrap();
        assert_eq!(d, identity_init(&sys).unwrap());
        assert!(!tr.converged);
        assert_eq!(tr.mse.len(), 1);
    }

    #[test]
    fn algorithm1_descends_and_is_feasible() {
        let sys = standard_sys(16, 20.0, 20.0);
        let (d, tr) = run_algorithm1(&sys, &Alg1Options::default()).unwrap();
        assert!(tr.is_monotone(1e-9), "{:?}", tr.mse);
        assert!(tr.converged, "{:?}", tr);
        assert!(d.is_feasible(&sys, 1e-6));
        assert!((d.mse(&sys).unwrap() - tr.last()).abs() < 1e-12);
        let bd = d.g_matrix();
        assert_eq!(bd.shape(), (4, 4));
        assert!(bd.view((0, 2), (2, 2)).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn system_from_parts() {
        let d = SystemDims::standard(Direction::Downlink);
        let ch: ChannelSet = sample_rayleigh(&d, 1, 1);
        let noise = NoiseModel { relay: CMat::identity(4, 4), destination: vec![CMat::identity(2, 2); 2] };
        let b = PowerBudget { source: vec![1.0], relay: 2.0 };
        let s = DownlinkSystem::new(&d, &ch, &noise, &b).unwrap();
        assert_eq!(s.p_r, 2.0);
        assert!(rel_diff(&s.h_br, &ch.first_hop[0]) == 0.0);
    }
}
