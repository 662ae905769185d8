//! Complex convex quadratically constrained quadratic programs, solved by
//! lifting to an SDP through Schur-complement LMIs.
//!
//! Each quadratic term is `||A v||^2 + 2 Re(g^H v) + c` over `v` in `C^n`.
//! The objective term is minimized subject to every constraint term `<= 0`.

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMat, CVec};
use crate::sdp::{schur_lmi, solve_sdp, AffineScalar, ComplexVarMap, SdpProblem, SdpSolution, SdpStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadTerm {
    pub factor: CMat,
    pub linear: CVec,
    pub constant: f64,
}

impl QuadTerm {
    /// `||A v||^2 + c` without a linear part.
    pub fn pure(factor: CMat, constant: f64) -> Self {
        let n = factor.ncols();
        Self { factor, linear: CVec::zeros(n), constant }
    }

    pub fn eval(&self, v: &CVec) -> f64 {
        (&self.factor * v).norm_squared() + 2.0 * self.linear.dotc(v).re + self.constant
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexQcqp {
    pub objective: QuadTerm,
    pub constraints: Vec<QuadTerm>,
}

#[derive(Debug, Clone)]
pub struct QcqpSolution {
    pub v: CVec,
    /// Objective term at `v`, constant included.
    pub value: f64,
    pub sdp: SdpSolution,
}

impl ComplexQcqp {
    pub fn dim(&self) -> usize {
        self.objective.factor.ncols()
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        for (i, q) in std::iter::once(&self.objective).chain(&self.constraints).enumerate() {
            if q.factor.ncols() != n || q.linear.len() != n {
                return invalid(format!("quadratic term {i}: expected {n} variables"));
            }
        }
        Ok(())
    }

    /// SDP over `x = (t, Re v, Im v)`: minimize `t` subject to
    /// `||A0 v||^2 <= t - 2 Re(g0^H v)` and `||Ai v||^2 <= -ci - 2 Re(gi^H v)`.
    pub fn to_sdp(&self) -> Result<SdpProblem> {
        self.check()?;
        let n = self.dim();
        let nv = 1 + 2 * n;
        let vars = ComplexVarMap::contiguous(1, n);
        let mut p = SdpProblem::new({
            let mut c = vec![0.0; nv];
            c[0] = 1.0;
            c
        });
        let rhs = |q: &QuadTerm, with_t: bool| {
            let mut terms = Vec::with_capacity(2 * n + 1);
            if with_t {
                terms.push((0, 1.0));
            }
            for j in 0..n {
                // -2 Re(conj(g_j) v_j) = -2 (Re g Re v + Im g Im v)
                let g = q.linear[j];
                if g.re != 0.0 {
                    terms.push((vars.re[j], -2.0 * g.re));
                }
                if g.im != 0.0 {
                    terms.push((vars.im[j], -2.0 * g.im));
                }
            }
            AffineScalar { constant: if with_t { 0.0 } else { -q.constant }, terms }
        };
        p.blocks.push(schur_lmi(&self.objective.factor, &vars, &rhs(&self.objective, true), nv)?);
        for q in &self.constraints {
            p.blocks.push(schur_lmi(&q.factor, &vars, &rhs(q, false), nv)?);
        }
        Ok(p)
    }

    pub fn solve(&self, gap_tol: f64, max_iter: usize) -> Result<QcqpSolution> {
        let p = self.to_sdp()?;
        let sdp = solve_sdp(&p, gap_tol, max_iter)?;
        match sdp.status {
            SdpStatus::Optimal => {}
            SdpStatus::Infeasible => return Err(Error::Infeasible(sdp.message.clone())),
            SdpStatus::NumericalFailure => return Err(Error::NumericalFailure(sdp.message.clone())),
        }
        let n = self.dim();
        let mut v = CVec::from_fn(n, |j, _| crate::linalg::c64(sdp.x[1 + j], sdp.x[1 + n + j]));
        // pull marginal violations of pure-norm constraints back onto the boundary
        let mut scale = 1.0f64;
        for q in &self.constraints {
            let quad = (&q.factor * &v).norm_squared();
            if q.linear.iter().all(|g| g.norm_sqr() == 0.0) && q.constant < 0.0 && quad > -q.constant {
                scale = scale.min((-q.constant / quad).sqrt());
            }
        }
        if scale < 1.0 {
            v *= crate::linalg::c64(scale, 0.0);
        }
        let value = self.objective.eval(&v);
        Ok(QcqpSolution { v, value, sdp })
    }
}
