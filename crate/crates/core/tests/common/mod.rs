#![allow(dead_code)]

pub mod identity;
pub mod oracle;

use afrelay::channel::{complex_gaussian, sample_rayleigh, Direction, DownlinkSystem, SystemDims, UplinkSystem};
use afrelay::linalg::CMat;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> CMat {
    complex_gaussian(rng, rows, cols)
}

/// `B B^H + eps I`, positive definite.
pub fn rand_pd(rng: &mut ChaCha20Rng, n: usize, eps: f64) -> CMat {
    let b = randn(rng, n, n);
    &b * b.adjoint() + CMat::identity(n, n) * Complex64::new(eps, 0.0)
}

pub fn scalar(x: f64) -> CMat {
    CMat::from_element(1, 1, Complex64::new(x, 0.0))
}

pub fn downlink(dims: &SystemDims, seed: u64, snr1: f64, snr2: f64) -> DownlinkSystem {
    DownlinkSystem::from_snr(dims, &sample_rayleigh(dims, seed, 0), snr1, snr2, 1.0, 1.0).unwrap()
}

pub fn uplink(dims: &SystemDims, seed: u64, snr1: f64, snr2: f64) -> UplinkSystem {
    UplinkSystem::from_snr(dims, &sample_rayleigh(dims, seed, 0), snr1, snr2, 1.0, 1.0).unwrap()
}

pub fn standard_downlink(seed: u64) -> DownlinkSystem {
    downlink(&SystemDims::standard(Direction::Downlink), seed, 20.0, 20.0)
}

pub fn standard_uplink(seed: u64) -> UplinkSystem {
    uplink(&SystemDims::standard(Direction::Uplink), seed, 20.0, 20.0)
}

/// Complex matrix from interleaved `(re, im)` pairs in column-major order.
pub fn from_params(x: &[f64], rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |i, j| {
        let k = 2 * (j * rows + i);
        Complex64::new(x[k], x[k + 1])
    })
}

pub fn to_params(m: &CMat) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Projected gradient descent over the Euclidean ball `||x|| <= radius` with
/// central-difference gradients and Armijo backtracking. Returns the best value.
pub fn pgd_ball(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], radius: f64, iters: usize) -> (Vec<f64>, f64) {
    let project = |x: &mut Vec<f64>| {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > radius {
            x.iter_mut().for_each(|v| *v *= radius / n);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let mut fx = f(&x);
    let mut step: f64 = 1.0;
    for _ in 0..iters {
        let h = 1e-7;
        let grad: Vec<f64> = (0..x.len())
            .map(|i| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect();
        let mut accepted = false;
        step = (step * 2.0).min(1e3);
        while step > 1e-14 {
            let mut y: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            project(&mut y);
            let fy = f(&y);
            let dec: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / step;
            if fy <= fx - 1e-4 * dec && fy < fx {
                x = y;
                fx = fy;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (x, fx)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}
