//! Relay forwarding matrix from the KKT conditions of a single power constraint.
//!
//! For fixed source and destination filters the relay problem has the form
//!
//! ```text
//! minimize  Tr(W' Gram W R) - 2 Re Tr(E^H W) + const
//! s.t.      Tr(W R W^H) <= P
//! ```
//!
//! whose stationary point is `W(lambda) = (Gram + lambda I)^{-1} E R^{-1}`.
//! The transmit power `f(lambda) = Tr(W R W^H)` is decreasing in `lambda`,
//! bounded by `sqrt(Tr(E R^{-1} E^H) / P)`, and found by bisection.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eig, inv_hpd, trace_re, CMat, EigenDecomposition};

pub const BISECTION_MAX_STEPS: usize = 200;
pub const BISECTION_REL_TOL: f64 = 1e-8;
/// Regularization at `lambda = 0`, relative to `Tr(Gram) / N`.
pub const LAMBDA_MIN_REL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RelayProblem {
    /// `N x N` Hermitian PSD Gram matrix of the downstream chain.
    pub gram: CMat,
    /// `N x M` cross term `E`.
    pub cross: CMat,
    /// `M x M` covariance of the relay input.
    pub input_cov: CMat,
    pub power: f64,
}

#[derive(Debug, Clone)]
pub struct RelaySolution {
    pub w: CMat,
    pub lambda: f64,
    /// `Tr(W R W^H)` at the returned `W`.
    pub power: f64,
    /// Upper end of the bisection bracket.
    pub lambda_bound: f64,
    pub bisection_steps: usize,
}

struct Prepared {
    eig: EigenDecomposition,
    /// `U^H E R^{-1}`.
    y: CMat,
    /// Diagonal of `U^H E R^{-1} E^H U`.
    q: Vec<f64>,
}

impl RelayProblem {
    fn check(&self) -> Result<()> {
        let n = self.gram.nrows();
        if !self.gram.is_square() || self.cross.nrows() != n || self.input_cov.shape() != (self.cross.ncols(), self.cross.ncols()) {
            return invalid("relay problem: inconsistent dimensions");
        }
        if !(self.power > 0.0) {
            return invalid("relay power budget must be positive");
        }
        Ok(())
    }

    fn prepare(&self) -> Result<Prepared> {
        self.check()?;
        // normalize first so the eigenvalue clip is relative to the Gram scale
        let n = self.gram.nrows().max(1) as f64;
        let s = trace_re(&self.gram) / n;
        let mut eig = if s > 0.0 { hermitian_eig(&scale(&self.gram, 1.0 / s))? } else { hermitian_eig(&self.gram)? };
        if s > 0.0 {
            eig.values.iter_mut().for_each(|v| *v *= s);
        }
        let rinv = inv_hpd(&self.input_cov)?;
        let y = eig.vectors.adjoint() * &self.cross * &rinv;
        let qm = &y * &self.input_cov * y.adjoint();
        let mut q: Vec<f64> = (0..qm.nrows()).map(|i| qm[(i, i)].re.max(0.0)).collect();
        // cross-term mass on the Gram null space below round-off is noise
        let total: f64 = q.iter().sum();
        for (qi, &d) in q.iter_mut().zip(&eig.values) {
            if d <= 0.0 && *qi <= 1e-10 * total {
                *qi = 0.0;
            }
        }
        Ok(Prepared { eig, y, q })
    }

    /// `Tr(E R^{-1} E^H)`.
    fn cross_energy(p: &Prepared) -> f64 {
        p.q.iter().sum()
    }

    pub fn lambda_bound(&self) -> Result<f64> {
        let p = self.prepare()?;
        Ok((Self::cross_energy(&p) / self.power).sqrt())
    }

    fn power_of(p: &Prepared, lambda: f64) -> f64 {
        p.eig
            .values
            .iter()
            .zip(&p.q)
            .map(|(&d, &q)| if q == 0.0 { 0.0 } else { q / (d + lambda).powi(2) })
            .sum()
    }

    fn w_of(p: &Prepared, lambda: f64) -> CMat {
        let mut scaled = p.y.clone();
        for (i, &d) in p.eig.values.iter().enumerate() {
            let s = if d + lambda > 0.0 { 1.0 / (d + lambda) } else { 0.0 };
            scaled.row_mut(i).scale_mut(s);
        }
        &p.eig.vectors * scaled
    }

    fn singular_at(p: &Prepared, lambda: f64) -> bool {
        p.eig.values.iter().zip(&p.q).any(|(&d, &q)| d + lambda <= 0.0 && q > 0.0)
    }

    /// `W(lambda)` and `f(lambda)`; signals [`Error::SingularAtZero`] when the
    /// Gram matrix is singular on the range of `E` and `lambda = 0`.
    pub fn forwarding(&self, lambda: f64) -> Result<(CMat, f64)> {
        if !(lambda >= 0.0) {
            return invalid("lambda must be nonnegative");
        }
        let p = self.prepare()?;
        if Self::singular_at(&p, lambda) {
            return Err(Error::SingularAtZero);
        }
        let w = Self::w_of(&p, lambda);
        let power = trace_re(&(&w * &self.input_cov * w.adjoint()));
        Ok((w, power))
    }

    /// Multiplier and forwarding matrix satisfying the KKT conditions.
    pub fn solve(&self) -> Result<RelaySolution> {
        let p = self.prepare()?;
        let n = self.gram.nrows().max(1) as f64;
        let bound = (Self::cross_energy(&p) / self.power).sqrt();
        let finish = |lambda: f64, eval_at: f64, steps: usize| {
            let w = Self::w_of(&p, eval_at);
            let power = trace_re(&(&w * &self.input_cov * w.adjoint()));
            RelaySolution { w, lambda, power, lambda_bound: bound, bisection_steps: steps }
        };
        if Self::cross_energy(&p) == 0.0 {
            return Ok(finish(0.0, 0.0, 0));
        }
        // lambda = 0 branch, regularized when the Gram matrix is singular
        let lambda_min = LAMBDA_MIN_REL * self.gram.diagonal().iter().map(|z| z.re).sum::<f64>() / n;
        let at_zero = if Self::singular_at(&p, 0.0) { lambda_min } else { 0.0 };
        if !Self::singular_at(&p, at_zero) && Self::power_of(&p, at_zero) <= self.power {
            return Ok(finish(0.0, at_zero, 0));
        }
        let target = self.power;
        let (mut lo, mut hi) = (0.0, bound);
        if Self::power_of(&p, hi) > target * (1.0 + 1e-12) {
            return Err(Error::NumericalFailure(format!(
                "relay multiplier bracket failed: f({bound:e}) = {:e} > P_r = {target:e}",
                Self::power_of(&p, hi)
            )));
        }
        for step in 1..=BISECTION_MAX_STEPS {
            let mid = 0.5 * (lo + hi);
            let f = Self::power_of(&p, mid);
            if (f - target).abs() <= BISECTION_REL_TOL * target {
                return Ok(finish(mid, mid, step));
            }
            if f > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // the feasible end of the bracket
        Ok(finish(hi, hi, BISECTION_MAX_STEPS))
    }
}

/// `c` with `Tr(c^2 W R W^H) = P`; zero for a zero `W`.
pub fn saturating_scale(w: &CMat, input_cov: &CMat, power: f64) -> f64 {
    let cur = trace_re(&(w * input_cov * w.adjoint()));
    if cur > 0.0 {
        (power / cur).sqrt()
    } else {
        0.0
    }
}

pub(crate) fn scale(m: &CMat, s: f64) -> CMat {
    m * Complex64::new(s, 0.0)
}
