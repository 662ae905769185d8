//! Uplink joint design of the per-user precoders `P_k`, relay matrix `F` and
//! BS equalizer `B`.
//!
//! Two loops are provided. [`run_algorithm2`] alternates a closed-form,
//! water-filled relay matrix in the whitened variable `F~ = F R_n^{1/2} Xi^{1/2}`
//! with an SDP over the precoder covariances `Q_k = P_k P_k^H`; it is exact
//! when every user sends at least as many streams as it has antennas and a
//! rank relaxation otherwise. [`run_algorithm1_uplink`] alternates `B`, `F`
//! and `P` directly, as in the downlink loop.

use crate::channel::UplinkSystem;
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    block_diag, hermitian_eig, hermitian_inv_sqrt, hermitian_part, hermitian_sqrt, hstack, inv_hpd, kron,
    scaled_identity, solve_right, trace_re, unvec, CMat, CVec,
};
use crate::qcqp::{ComplexQcqp, QuadTerm};
use crate::relay::{saturating_scale, scale, RelayProblem};
use crate::sdp::{
    hermitian_lmi, scalar_lmi, solve_sdp, AffineScalar, HermitianVarMap, SdpProblem, SdpStatus, DEFAULT_GAP_TOL,
    DEFAULT_MAX_ITER,
};
use crate::trace::{converged, IterationTrace};
use crate::waterfill::{sqrt_level_matrix, water_fill};

pub use crate::downlink::{DEFAULT_MAX_ITERATIONS, DEFAULT_THRESHOLD};

/// Relative slack under which a step's MSE counts as no worse than the current one.
const ACCEPT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkDesign {
    /// `P_k`, `N_M,k x L_k`.
    pub p: Vec<CMat>,
    /// `N_R x N_R`.
    pub f: CMat,
    /// `L x N_B`.
    pub b: CMat,
    /// Multiplier of the relay power constraint in the last relay update.
    pub mu_f: f64,
    /// Largest gap between the precoder subproblem at the extracted `P_k`
    /// and its rank-relaxed SDP value; zero outside the relaxed regime.
    pub relaxation_gap: f64,
}

impl UplinkDesign {
    pub fn p_matrix(&self) -> CMat {
        block_diag(&self.p)
    }

    pub fn source_powers(&self) -> Vec<f64> {
        self.p.iter().map(|p| trace_re(&(p * p.adjoint()))).collect()
    }

    pub fn relay_power(&self, sys: &UplinkSystem) -> f64 {
        relay_power(&self.f, &self.p, sys)
    }

    pub fn is_feasible(&self, sys: &UplinkSystem, rel: f64) -> bool {
        self.source_powers().iter().zip(&sys.p_s).all(|(&p, &b)| p <= b * (1.0 + rel))
            && self.relay_power(sys) <= sys.p_r * (1.0 + rel)
    }

    pub fn mse(&self, sys: &UplinkSystem) -> Result<f64> {
        mse_uplink(&self.b, &self.f, &self.p, sys)
    }
}

fn check_p(p: &[CMat], sys: &UplinkSystem) -> Result<()> {
    if p.len() != sys.num_users() {
        return invalid("one precoder per user expected");
    }
    for (k, pk) in p.iter().enumerate() {
        if pk.shape() != (sys.h_mr[k].ncols(), sys.streams[k]) {
            return invalid(format!("precoder {k} has shape {:?}", pk.shape()));
        }
    }
    Ok(())
}

fn check_f(f: &CMat, sys: &UplinkSystem) -> Result<()> {
    let nr = sys.n_relay();
    if f.shape() != (nr, nr) {
        return invalid(format!("relay matrix must be {nr}x{nr}, got {:?}", f.shape()));
    }
    Ok(())
}

/// `H_MR P`, `N_R x L`.
fn effective_first_hop(p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    check_p(p, sys)?;
    let cols: Vec<CMat> = sys.h_mr.iter().zip(p).map(|(h, pk)| h * pk).collect();
    hstack(&cols)
}

/// Relay input covariance `R_x = H_MR P P^H H_MR^H + R_n`.
pub fn relay_input_covariance(p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    let a = effective_first_hop(p, sys)?;
    Ok(hermitian_part(&(&a * a.adjoint() + &sys.r_n)))
}

/// `Tr(F R_x F^H)`.
pub fn relay_power(f: &CMat, p: &[CMat], sys: &UplinkSystem) -> f64 {
    match relay_input_covariance(p, sys) {
        Ok(rx) => trace_re(&(f * rx * f.adjoint())),
        Err(_) => f64::NAN,
    }
}

/// `E||B y - s||^2` for arbitrary `B`.
pub fn mse_uplink(b: &CMat, f: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<f64> {
    check_f(f, sys)?;
    let l = sys.total_streams();
    if b.shape() != (l, sys.n_base()) {
        return invalid(format!("equalizer must be {l}x{}, got {:?}", sys.n_base(), b.shape()));
    }
    let rx = relay_input_covariance(p, sys)?;
    let hf = &sys.h_rb * f;
    let cov = &hf * rx * hf.adjoint() + &sys.r_xi;
    let cross = b * &hf * effective_first_hop(p, sys)?;
    Ok((trace_re(&(b * cov * b.adjoint())) - 2.0 * trace_re(&cross) + l as f64).max(0.0))
}

/// LMMSE equalizer `B = (H_RB F H_MR P)^H (H_RB F R_x F^H H_RB^H + R_xi)^{-1}`.
pub fn equalizer_b(f: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    check_f(f, sys)?;
    let hf = &sys.h_rb * f;
    let a = &hf * effective_first_hop(p, sys)?;
    let cov = hermitian_part(&(&hf * relay_input_covariance(p, sys)? * hf.adjoint() + &sys.r_xi));
    solve_right(&a.adjoint(), &cov).map_err(|_| Error::InvalidInput("equalizer: singular received covariance".into()))
}

/// MSE with the optimal equalizer substituted:
/// `L - Tr(A^H (H_RB F R_x F^H H_RB^H + R_xi)^{-1} A)` with `A = H_RB F H_MR P`.
pub fn mse_uplink_optimal_b(f: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<f64> {
    check_f(f, sys)?;
    let hf = &sys.h_rb * f;
    let a = &hf * effective_first_hop(p, sys)?;
    let cov = &hf * relay_input_covariance(p, sys)? * hf.adjoint() + &sys.r_xi;
    let l = sys.total_streams() as f64;
    Ok((l - trace_re(&(a.adjoint() * inv_hpd(&cov)? * a))).max(0.0))
}

/// `R_n^{-1/2} H_MR P`, the whitened first hop.
fn whitened_first_hop(p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    Ok(hermitian_inv_sqrt(&sys.r_n)? * effective_first_hop(p, sys)?)
}

/// `Xi = R_n^{-1/2} H_MR P P^H H_MR^H R_n^{-1/2} + I`.
pub fn xi_matrix(p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    let s = whitened_first_hop(p, sys)?;
    let n = s.nrows();
    Ok(hermitian_part(&(&s * s.adjoint() + CMat::identity(n, n))))
}

/// `Theta = Xi^{-1/2} R_n^{-1/2} H_MR P (..)^H`, equal to `I - Xi^{-1}`.
pub fn theta_matrix(p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    let a = hermitian_inv_sqrt(&xi_matrix(p, sys)?)? * whitened_first_hop(p, sys)?;
    Ok(hermitian_part(&(&a * a.adjoint())))
}

/// `M = H_RB^H R_xi^{-1} H_RB`.
pub fn m_matrix(sys: &UplinkSystem) -> Result<CMat> {
    Ok(hermitian_part(&(sys.h_rb.adjoint() * inv_hpd(&sys.r_xi)? * &sys.h_rb)))
}

/// `F~ = F R_n^{1/2} Xi^{1/2}`; the relay power equals `Tr(F~ F~^H)`.
pub fn f_tilde_from(f: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    check_f(f, sys)?;
    Ok(f * hermitian_sqrt(&sys.r_n)? * hermitian_sqrt(&xi_matrix(p, sys)?)?)
}

/// `F = F~ Xi^{-1/2} R_n^{-1/2}`.
pub fn f_from_tilde(f_tilde: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<CMat> {
    check_f(f_tilde, sys)?;
    Ok(f_tilde * hermitian_inv_sqrt(&xi_matrix(p, sys)?)? * hermitian_inv_sqrt(&sys.r_n)?)
}

/// Optimal-equalizer MSE written in `F~`:
/// `L - Tr(C^H (H_RB F~ F~^H H_RB^H + R_xi)^{-1} C)`, `C = H_RB F~ Xi^{-1/2} R_n^{-1/2} H_MR P`.
pub fn mse_bar(f_tilde: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<f64> {
    check_f(f_tilde, sys)?;
    let hf = &sys.h_rb * f_tilde;
    let c = &hf * hermitian_inv_sqrt(&xi_matrix(p, sys)?)? * whitened_first_hop(p, sys)?;
    let cov = &hf * hf.adjoint() + &sys.r_xi;
    let l = sys.total_streams() as f64;
    Ok((l - trace_re(&(c.adjoint() * inv_hpd(&cov)? * c))).max(0.0))
}

/// The same MSE split into a relay-dependent and a relay-free term:
/// `Tr(Theta (F~^H M F~ + I)^{-1}) + Tr((P^H H_MR^H R_n^{-1} H_MR P + I)^{-1})`.
pub fn mse_split(f_tilde: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<f64> {
    check_f(f_tilde, sys)?;
    let n = sys.n_relay();
    let theta = theta_matrix(p, sys)?;
    let inner = f_tilde.adjoint() * m_matrix(sys)? * f_tilde + CMat::identity(n, n);
    let s = whitened_first_hop(p, sys)?;
    let l = s.ncols();
    let second = s.adjoint() * &s + CMat::identity(l, l);
    Ok(trace_re(&(theta * inv_hpd(&inner)?)) + trace_re(&inv_hpd(&second)?))
}

/// `Pi = (H_RB F~)^H (H_RB F~ F~^H H_RB^H + R_xi)^{-1} H_RB F~`.
pub fn pi_matrix(f_tilde: &CMat, sys: &UplinkSystem) -> Result<CMat> {
    check_f(f_tilde, sys)?;
    let c = &sys.h_rb * f_tilde;
    let cov = &c * c.adjoint() + &sys.r_xi;
    Ok(hermitian_part(&(c.adjoint() * inv_hpd(&cov)? * c)))
}

/// `L - Tr(Pi Xi^{-1/2} (Xi - I) Xi^{-1/2})`.
pub fn mse_pi_theta(pi: &CMat, xi: &CMat, streams: usize) -> Result<f64> {
    let n = xi.nrows();
    let r = hermitian_inv_sqrt(xi)?;
    let inner = &r * (xi - CMat::identity(n, n)) * &r;
    Ok(streams as f64 - trace_re(&(pi * inner)))
}

/// `Tr(Pi Xi^{-1}) + L - Tr(Pi)`, where `P` enters only through `Xi^{-1}`.
pub fn mse_pi_form(pi: &CMat, xi: &CMat, streams: usize) -> Result<f64> {
    Ok(trace_re(&(pi * inv_hpd(xi)?)) + streams as f64 - trace_re(pi))
}

#[derive(Debug, Clone)]
pub struct Forwarding {
    pub f_tilde: CMat,
    pub f: CMat,
    pub mu_f: f64,
}

/// Optimal `F~` for fixed precoders:
/// `F~ = U_M,L diag(sqrt(levels)) U_Theta,L^H` with the levels water-filled
/// over the paired top-`L` eigenvalues of `Theta` (weights) and `M` (gains).
pub fn forwarding_closed_form(p: &[CMat], sys: &UplinkSystem) -> Result<Forwarding> {
    sys.validate()?;
    let l = sys.total_streams();
    let theta = hermitian_eig(&theta_matrix(p, sys)?)?;
    let m = hermitian_eig(&m_matrix(sys)?)?;
    let wf = water_fill(&theta.values[..l], &m.values[..l], sys.p_r)?;
    let f_tilde = m.leading_vectors(l) * sqrt_level_matrix(&wf.levels, l, l) * theta.leading_vectors(l).adjoint();
    let f = f_from_tilde(&f_tilde, p, sys)?;
    Ok(Forwarding { f_tilde, f, mu_f: wf.mu })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderCovariances {
    /// `Q_k`, Hermitian PSD `N_M,k x N_M,k`.
    pub q: Vec<CMat>,
    /// `Tr(X)` at the SDP optimum.
    pub sdp_objective: f64,
}

/// `Tr(Pi (R_n^{-1/2} sum_k H_MR,k Q_k H_MR,k^H R_n^{-1/2} + I)^{-1})`.
pub fn covariance_objective(q: &[CMat], pi: &CMat, sys: &UplinkSystem) -> Result<f64> {
    let s = hermitian_inv_sqrt(&sys.r_n)?;
    let n = sys.n_relay();
    let mut y = CMat::identity(n, n);
    for (h, qk) in sys.h_mr.iter().zip(q) {
        let a = &s * h;
        y += &a * qk * a.adjoint();
    }
    Ok(trace_re(&(pi * inv_hpd(&y)?)))
}

/// SDP over `(X, Q_1..Q_K)`: minimize `Tr(X)` subject to
/// `[[X, Pi^{1/2}], [Pi^{1/2}, R_n^{-1/2} sum_k H_MR,k Q_k H_MR,k^H R_n^{-1/2} + I]] >= 0`,
/// `Q_k >= 0` and `Tr(Q_k) <= P_s,k`.
pub fn build_precoder_sdp_uplink(pi: &CMat, sys: &UplinkSystem) -> Result<(SdpProblem, HermitianVarMap, Vec<HermitianVarMap>)> {
    let n = sys.n_relay();
    if pi.shape() != (n, n) {
        return invalid("Pi must be N_R x N_R");
    }
    let xmap = HermitianVarMap { offset: 0, n };
    let mut offset = xmap.len();
    let qmaps: Vec<HermitianVarMap> = sys
        .h_mr
        .iter()
        .map(|h| {
            let m = HermitianVarMap { offset, n: h.ncols() };
            offset += m.len();
            m
        })
        .collect();
    let nv = offset;
    let mut objective = vec![0.0; nv];
    for i in xmap.diagonal() {
        objective[i] = 1.0;
    }
    let mut p = SdpProblem::new(objective);

    let root = hermitian_sqrt(pi)?;
    let mut constant = CMat::zeros(2 * n, 2 * n);
    constant.view_mut((0, n), (n, n)).copy_from(&root);
    constant.view_mut((n, 0), (n, n)).copy_from(&root);
    constant.view_mut((n, n), (n, n)).fill_with_identity();
    let mut coeffs = Vec::new();
    for (i, b) in xmap.basis() {
        let mut c = CMat::zeros(2 * n, 2 * n);
        c.view_mut((0, 0), (n, n)).copy_from(&b);
        coeffs.push((i, c));
    }
    let s = hermitian_inv_sqrt(&sys.r_n)?;
    for (h, qm) in sys.h_mr.iter().zip(&qmaps) {
        let a = &s * h;
        for (i, b) in qm.basis() {
            let mut c = CMat::zeros(2 * n, 2 * n);
            c.view_mut((n, n), (n, n)).copy_from(&(&a * b * a.adjoint()));
            coeffs.push((i, c));
        }
    }
    p.blocks.push(hermitian_lmi(&constant, &coeffs, nv)?);
    for (qm, &budget) in qmaps.iter().zip(&sys.p_s) {
        p.blocks.push(hermitian_lmi(&CMat::zeros(qm.n, qm.n), &qm.basis(), nv)?);
        let terms = qm.diagonal().map(|i| (i, -1.0)).collect();
        p.blocks.push(scalar_lmi(&AffineScalar { constant: budget, terms }, nv)?);
    }
    Ok((p, xmap, qmaps))
}

/// Optimal precoder covariances for fixed `F~` (through `Pi`).
pub fn precoder_sdp_uplink(pi: &CMat, sys: &UplinkSystem) -> Result<PrecoderCovariances> {
    let zeros = || sys.h_mr.iter().map(|h| CMat::zeros(h.ncols(), h.ncols())).collect::<Vec<_>>();
    if trace_re(pi) <= 1e-14 {
        return Ok(PrecoderCovariances { q: zeros(), sdp_objective: 0.0 });
    }
    let (problem, _, qmaps) = build_precoder_sdp_uplink(pi, sys)?;
    let sol = solve_sdp(&problem, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => return Err(Error::Infeasible(sol.message)),
        SdpStatus::NumericalFailure => return Err(Error::NumericalFailure(sol.message)),
    }
    let mut q = Vec::with_capacity(qmaps.len());
    for (qm, &budget) in qmaps.iter().zip(&sys.p_s) {
        // clean solver round-off: PSD projection, then the trace budget
        let eig = hermitian_eig(&hermitian_part(&qm.value(&sol.x)))?;
        let mut qk = eig.map_values(|v| v.max(0.0));
        let tr = trace_re(&qk);
        if tr > budget {
            qk = scale(&qk, budget / tr);
        }
        q.push(qk);
    }
    Ok(PrecoderCovariances { q, sdp_objective: sol.primal_objective })
}

/// `P_k` from `Q_k`: the Hermitian square root padded with zero columns when
/// `L_k >= N_M,k`, otherwise the `L_k` dominant eigen-directions scaled by the
/// square roots of their eigenvalues.
pub fn extract_precoder(q: &[CMat], streams: &[usize]) -> Result<Vec<CMat>> {
    if q.len() != streams.len() {
        return invalid("one covariance per user expected");
    }
    q.iter()
        .zip(streams)
        .map(|(qk, &l)| {
            let n = qk.nrows();
            if l >= n {
                let root = hermitian_sqrt(qk)?;
                hstack(&[root, CMat::zeros(n, l - n)])
            } else {
                let eig = hermitian_eig(&hermitian_part(qk))?;
                let vals: Vec<f64> = eig.values[..l].to_vec();
                Ok(eig.leading_vectors(l) * sqrt_level_matrix(&vals, l, l))
            }
        })
        .collect()
}

/// Single-user closed-form precoder `P = U_MR,L diag(sqrt(levels))`, levels
/// water-filled over the top-`L` eigenvalues of `Pi` (weights) and
/// `H_MR^H R_n^{-1} H_MR` (gains). Optimal when `Pi` is a multiple of the identity.
pub fn closed_form_precoder_single_user(f_tilde: &CMat, sys: &UplinkSystem) -> Result<CMat> {
    if sys.num_users() != 1 {
        return invalid("closed-form precoder needs a single user");
    }
    let l = sys.streams[0];
    let h = &sys.h_mr[0];
    if l > h.ncols() {
        return invalid("closed-form precoder needs L <= N_M");
    }
    let pi = hermitian_eig(&pi_matrix(f_tilde, sys)?)?;
    let gain = hermitian_eig(&hermitian_part(&(h.adjoint() * inv_hpd(&sys.r_n)? * h)))?;
    let wf = water_fill(&pi.values[..l], &gain.values[..l], sys.p_s[0])?;
    Ok(gain.leading_vectors(l) * sqrt_level_matrix(&wf.levels, l, l))
}

/// `sqrt(P_s,k / min(N_M,k, L_k)) [I; 0]` per user and `F = c I` saturating `P_r`.
pub fn identity_init(sys: &UplinkSystem) -> Result<(Vec<CMat>, CMat)> {
    sys.validate()?;
    let p: Vec<CMat> = sys
        .h_mr
        .iter()
        .zip(&sys.streams)
        .zip(&sys.p_s)
        .map(|((h, &l), &ps)| {
            let n = h.ncols();
            scaled_identity(n, l, (ps / n.min(l) as f64).sqrt())
        })
        .collect();
    let n = sys.n_relay();
    let eye = CMat::identity(n, n);
    let c = saturating_scale(&eye, &relay_input_covariance(&p, sys)?, sys.p_r);
    Ok((p, scale(&eye, c)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkOptions {
    pub threshold: f64,
    pub max_iter: usize,
}

impl Default for UplinkOptions {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, max_iter: DEFAULT_MAX_ITERATIONS }
    }
}

/// True when no user has more antennas than streams, so `Q_k -> P_k` is exact.
pub fn is_exact_regime(sys: &UplinkSystem) -> bool {
    sys.h_mr.iter().zip(&sys.streams).all(|(h, &l)| h.ncols() <= l)
}

fn finish(f: CMat, p: Vec<CMat>, mu_f: f64, gap: f64, sys: &UplinkSystem) -> Result<UplinkDesign> {
    let b = equalizer_b(&f, &p, sys)?;
    Ok(UplinkDesign { p, f, b, mu_f, relaxation_gap: gap })
}

fn no_worse(next: f64, cur: f64) -> bool {
    next <= cur + ACCEPT_SLACK * (1.0 + cur.abs())
}

/// Alternates the closed-form `F~` and the precoder-covariance SDP.
///
/// In the exact regime every step is optimal for its block, and a step
/// that would raise the MSE through round-off is rejected. In the relaxed
/// regime the trace may rise; the best iterate is returned and the largest
/// relaxation gap recorded.
pub fn run_algorithm2(sys: &UplinkSystem, opts: &UplinkOptions) -> Result<(UplinkDesign, IterationTrace)> {
    if !(opts.threshold > 0.0) {
        return invalid("threshold must be positive");
    }
    let (mut p, f0) = identity_init(sys)?;
    let exact = is_exact_regime(sys);
    let mut f_tilde = f_tilde_from(&f0, &p, sys)?;
    let mut mse = mse_bar(&f_tilde, &p, sys)?;
    let mut trace = IterationTrace::start(mse);
    let mut mu_f = 0.0;
    let mut gap: f64 = 0.0;
    let mut best = (mse, f_tilde.clone(), p.clone(), mu_f);
    for _ in 0..opts.max_iter {
        let step = (|| -> Result<(CMat, Vec<CMat>, f64, f64)> {
            let fw = forwarding_closed_form(&p, sys)?;
            let mut ft = fw.f_tilde;
            let after_f = mse_bar(&ft, &p, sys)?;
            if exact && !no_worse(after_f, mse) {
                ft = f_tilde.clone();
            }
            let pi = pi_matrix(&ft, sys)?;
            let cov = precoder_sdp_uplink(&pi, sys)?;
            let cand = extract_precoder(&cov.q, &sys.streams)?;
            let g = covariance_objective(&cand.iter().map(|pk| pk * pk.adjoint()).collect::<Vec<_>>(), &pi, sys)?
                - cov.sdp_objective;
            let base = mse_bar(&ft, &p, sys)?;
            let m = mse_bar(&ft, &cand, sys)?;
            if exact && !no_worse(m, base) {
                return Ok((ft, p.clone(), fw.mu_f, g));
            }
            Ok((ft, cand, fw.mu_f, g))
        })();
        match step {
            Ok((ft, np, mu, g)) => {
                f_tilde = ft;
                p = np;
                mu_f = mu;
                if !exact {
                    gap = gap.max(g);
                }
                let next = mse_bar(&f_tilde, &p, sys)?;
                trace.push(next);
                if next < best.0 {
                    best = (next, f_tilde.clone(), p.clone(), mu_f);
                }
                let done = converged(mse, next, opts.threshold);
                mse = next;
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
    if !exact && best.0 < mse {
        (_, f_tilde, p, mu_f) = best;
    }
    let f = f_from_tilde(&f_tilde, &p, sys)?;
    Ok((finish(f, p, mu_f, gap, sys)?, trace))
}

/// Precoder subproblem for fixed `(B, F)` over `v = (vec P_1, .., vec P_K)`:
/// the MSE as `||A v||^2 + 2 Re(g^H v) + c`, one ball per user, and the relay
/// power `sum_k ||F H_MR,k P_k||^2 + Tr(F R_n F^H) <= P_r`.
pub fn precoder_qcqp_uplink(b: &CMat, f: &CMat, sys: &UplinkSystem) -> Result<ComplexQcqp> {
    check_f(f, sys)?;
    let l = sys.total_streams();
    let bhf = b * &sys.h_rb * f;
    let offs = sys.stream_offsets();
    let mut obj_blocks = Vec::new();
    let mut relay_blocks = Vec::new();
    let mut linear = Vec::new();
    let mut sizes = Vec::new();
    for (k, h) in sys.h_mr.iter().enumerate() {
        let lk = sys.streams[k];
        let eye = CMat::identity(lk, lk);
        let c = &bhf * h;
        obj_blocks.push(kron(&eye, &c));
        relay_blocks.push(kron(&eye, &(f * h)));
        let d = c.rows(offs[k], lk).into_owned();
        linear.extend(crate::linalg::vec(&d.adjoint()).iter().map(|z| -z));
        sizes.push(h.ncols() * lk);
    }
    let n: usize = sizes.iter().sum();
    let hf = &sys.h_rb * f;
    let c0 = trace_re(&(b * (&hf * &sys.r_n * hf.adjoint() + &sys.r_xi) * b.adjoint())) + l as f64;
    let mut constraints = Vec::new();
    let mut off = 0;
    for (k, &sz) in sizes.iter().enumerate() {
        let mut sel = CMat::zeros(sz, n);
        sel.view_mut((0, off), (sz, sz)).fill_with_identity();
        constraints.push(QuadTerm::pure(sel, -sys.p_s[k]));
        off += sz;
    }
    let frf = trace_re(&(f * &sys.r_n * f.adjoint()));
    constraints.push(QuadTerm::pure(block_diag(&relay_blocks), frf - sys.p_r));
    Ok(ComplexQcqp {
        objective: QuadTerm { factor: block_diag(&obj_blocks), linear: CVec::from_vec(linear), constant: c0 },
        constraints,
    })
}

/// Optimal precoders for fixed `(B, F)`.
pub fn solve_precoder_uplink(b: &CMat, f: &CMat, sys: &UplinkSystem) -> Result<Vec<CMat>> {
    let sol = precoder_qcqp_uplink(b, f, sys)?.solve(DEFAULT_GAP_TOL, DEFAULT_MAX_ITER)?;
    let mut out = Vec::with_capacity(sys.num_users());
    let mut off = 0;
    for (h, &lk) in sys.h_mr.iter().zip(&sys.streams) {
        let sz = h.ncols() * lk;
        out.push(unvec(&sol.v.rows(off, sz).into_owned(), h.ncols(), lk)?);
        off += sz;
    }
    Ok(out)
}

/// Relay subproblem for fixed `(B, P)`.
pub fn relay_problem_uplink(b: &CMat, p: &[CMat], sys: &UplinkSystem) -> Result<RelayProblem> {
    let bh = b * &sys.h_rb;
    let a = effective_first_hop(p, sys)?;
    Ok(RelayProblem {
        gram: bh.adjoint() * &bh,
        cross: (a * &bh).adjoint(),
        input_cov: relay_input_covariance(p, sys)?,
        power: sys.p_r,
    })
}

/// Alternates `B -> F -> P` with the same safeguard as the downlink loop.
pub fn run_algorithm1_uplink(sys: &UplinkSystem, opts: &UplinkOptions) -> Result<(UplinkDesign, IterationTrace)> {
    if !(opts.threshold > 0.0) {
        return invalid("threshold must be positive");
    }
    let (p0, f0) = identity_init(sys)?;
    let mut d = finish(f0, p0, 0.0, 0.0, sys)?;
    let mut mse = d.mse(sys)?;
    let mut trace = IterationTrace::start(mse);
    for _ in 0..opts.max_iter {
        let step = (|| -> Result<UplinkDesign> {
            let mut f = d.f.clone();
            let mut mu = d.mu_f;
            let relay = relay_problem_uplink(&d.b, &d.p, sys)?.solve()?;
            let mut best = mse;
            let m = mse_uplink(&d.b, &relay.w, &d.p, sys)?;
            if no_worse(m, best) {
                best = m;
                f = relay.w;
                mu = relay.lambda;
            }
            let mut p = d.p.clone();
            let cand = solve_precoder_uplink(&d.b, &f, sys)?;
            let m = mse_uplink(&d.b, &f, &cand, sys)?;
            if no_worse(m, best) && relay_power(&f, &cand, sys) <= sys.p_r * (1.0 + 1e-9) {
                p = cand;
            }
            finish(f, p, mu, 0.0, sys)
        })();
        match step {
            Ok(next) => {
                let m = next.mse(sys)?;
                d = next;
                trace.push(m);
                let done = converged(mse, m, opts.threshold);
                mse = m;
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
