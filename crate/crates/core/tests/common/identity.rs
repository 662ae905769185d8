//! Algebraic identities; each function returns the relative mismatch on one
//! seeded instance.

use super::*;
use afrelay::channel::{Direction, SystemDims};
use afrelay::downlink::{mse_downlink, precoder_qcqp, relay_power};
use afrelay::linalg::{frobenius, hermitian_sqrt, inv_hpd, kron, trace_re, vec, CMat};
use afrelay::uplink::{f_tilde_from, mse_bar, mse_pi_form, mse_pi_theta, mse_split, mse_uplink_optimal_b, pi_matrix, xi_matrix};

pub const INSTANCES: u64 = 100;
pub const TOL: f64 = 1e-9;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// `C^H (C C^H + D)^{-1} C = I - (C^H D^{-1} C + I)^{-1}`.
pub fn inversion_lemma(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, m) = (2 + (seed % 4) as usize, 1 + (seed % 3) as usize);
    let c = randn(&mut r, n, m);
    let d = rand_pd(&mut r, n, 0.1);
    let lhs = c.adjoint() * inv_hpd(&(&c * c.adjoint() + &d)).unwrap() * &c;
    let rhs = CMat::identity(m, m) - inv_hpd(&(c.adjoint() * inv_hpd(&d).unwrap() * &c + CMat::identity(m, m))).unwrap();
    frobenius(&(&lhs - &rhs)) / (1.0 + frobenius(&lhs))
}

/// `Tr(N^H T^H A T N) = vec(T)^H (N^* kron A^{H/2}) (N^T kron A^{1/2}) vec(T)`
/// and `Tr(B^H T) = vec(B)^H vec(T)`.
pub fn kronecker_form(seed: u64) -> f64 {
    let mut r = rng(1000 + seed);
    let (n, l, k) = (2 + (seed % 3) as usize, 1 + (seed % 4) as usize, 1 + (seed % 2) as usize);
    let a = rand_pd(&mut r, n, 0.0);
    let t = randn(&mut r, n, l);
    let nm = randn(&mut r, l, k);
    let lhs = trace_re(&(nm.adjoint() * t.adjoint() * &a * &t * &nm));
    let root = hermitian_sqrt(&a).unwrap();
    let right = kron(&nm.transpose(), &root);
    let left = kron(&nm.map(|z| z.conj()), &root.adjoint());
    let vt = vec(&t);
    let rhs = (vt.adjoint() * left * right * &vt)[(0, 0)];
    let b = randn(&mut r, n, l);
    let tr = (b.adjoint() * &t).trace();
    let vv = vec(&b).dotc(&vt);
    rel(lhs, rhs.re).max(rhs.im.abs() / (1.0 + lhs.abs())).max((tr - vv).norm() / (1.0 + tr.norm()))
}

/// The vectorized precoder program reproduces the MSE and both power terms.
pub fn precoder_program(seed: u64) -> f64 {
    let dims = SystemDims::standard(Direction::Downlink);
    let sys = downlink(&dims, seed, 5.0 + (seed % 4) as f64 * 8.0, 20.0);
    let mut r = rng(2000 + seed);
    let w = randn(&mut r, 4, 4);
    let g: Vec<CMat> = (0..2).map(|_| randn(&mut r, 2, 2)).collect();
    let t = randn(&mut r, 4, 4);
    let q = precoder_qcqp(&w, &g, &sys).unwrap();
    let v = vec(&t);
    rel(q.objective.eval(&v), mse_downlink(&g, &w, &t, &sys).unwrap())
        .max(rel(q.constraints[0].eval(&v), trace_re(&(&t * t.adjoint())) - sys.p_s))
        .max(rel(q.constraints[1].eval(&v), relay_power(&w, &t, &sys) - sys.p_r))
}

/// Every rewrite of the uplink MSE agrees pairwise.
pub fn uplink_mse_chain(seed: u64) -> f64 {
    let dims = [
        SystemDims::standard(Direction::Uplink),
        SystemDims::uniform(Direction::Uplink, 4, 4, 2, 4, 2),
        SystemDims::uniform(Direction::Uplink, 3, 3, 1, 2, 2),
    ];
    let d = &dims[(seed % 3) as usize];
    let sys = uplink(d, seed, 5.0 + (seed % 5) as f64 * 6.0, 10.0 + (seed % 3) as f64 * 10.0);
    let mut r = rng(3000 + seed);
    let p: Vec<CMat> = d.users.iter().map(|u| randn(&mut r, u.n_mobile, u.streams)).collect();
    let f = randn(&mut r, d.n_relay, d.n_relay);
    let l = sys.total_streams();

    let ft = f_tilde_from(&f, &p, &sys).unwrap();
    let pi = pi_matrix(&ft, &sys).unwrap();
    let xi = xi_matrix(&p, &sys).unwrap();
    let all = [
        mse_uplink_optimal_b(&f, &p, &sys).unwrap(),
        mse_bar(&ft, &p, &sys).unwrap(),
        mse_split(&ft, &p, &sys).unwrap(),
        mse_pi_theta(&pi, &xi, l).unwrap(),
        mse_pi_form(&pi, &xi, l).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            worst = worst.max(rel(*a, *b));
        }
    }
    worst
}
