//! Small dense semidefinite-program solver.
//!
//! Problems are stated in LMI form
//!
//! ```text
//! minimize    c' x
//! subject to  F0_b + sum_i x_i F_i,b  >= 0    for every block b
//!             a_k' x = b_k                    for every equality k
//! ```
//!
//! and solved by an infeasible-start primal-dual path-following method with
//! the HKM search direction and a Mehrotra predictor-corrector. The solver is
//! purely real symmetric; complex LMIs are realified by the builders
//! ([`schur_lmi`], [`hermitian_lmi`]) before they reach it.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::linalg::{c64, realify, CMat, RMat};

pub const DEFAULT_GAP_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Fraction-to-boundary factor for the step length.
pub const STEP_FRACTION: f64 = 0.98;
/// Primal/dual residual tolerance (relative) required for an optimal status.
pub const FEAS_TOL: f64 = 1e-9;
/// Minimum eigenvalue slack (relative) accepted on the returned LMI blocks.
pub const PSD_TOL: f64 = 1e-7;

/// Symmetric sparse matrix stored as upper-triangular triplets `(i, j, v)`, `i <= j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymSparse {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v` at `(i, j)` and, implicitly, at `(j, i)`.
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i.min(j), i.max(j), v));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn from_dense(m: &RMat) -> Self {
        let mut s = Self::new();
        for j in 0..m.ncols() {
            for i in 0..=j {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s.push(i, j, v);
            }
        }
        s
    }

    pub fn to_dense(&self, dim: usize) -> RMat {
        let mut m = RMat::zeros(dim, dim);
        self.add_to(1.0, &mut m);
        m
    }

    /// `out += alpha * self`.
    pub fn add_to(&self, alpha: f64, out: &mut RMat) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += alpha * v;
            if i != j {
                out[(j, i)] += alpha * v;
            }
        }
    }

    /// `tr(self * k)` for any square `k`.
    pub fn trace_with(&self, k: &RMat) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * k[(i, i)] } else { v * (k[(j, i)] + k[(i, j)]) })
            .sum()
    }

    fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

/// One affine LMI `constant + sum_i x_i coeffs[i] >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub constant: RMat,
    pub coeffs: Vec<SymSparse>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &[f64]) -> RMat {
        let mut m = self.constant.clone();
        for (xi, f) in x.iter().zip(&self.coeffs) {
            f.add_to(*xi, &mut m);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    pub equalities: Vec<Equality>,
}

impl SdpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, blocks: vec![], equalities: vec![] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return invalid("objective has non-finite entries");
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            let m = blk.dim();
            if !blk.constant.is_square() {
                return invalid(format!("block {b}: constant matrix is not square"));
            }
            if blk.coeffs.len() != n {
                return invalid(format!("block {b}: {} coefficient matrices for {n} variables", blk.coeffs.len()));
            }
            let asym = (&blk.constant - blk.constant.transpose()).norm();
            if asym > 1e-10 * (1.0 + blk.constant.norm()) {
                return invalid(format!("block {b}: constant matrix is not symmetric"));
            }
            for f in &blk.coeffs {
                if f.entries.iter().any(|&(i, j, v)| i >= m || j >= m || !v.is_finite()) {
                    return invalid(format!("block {b}: coefficient entry out of range"));
                }
            }
        }
        for (k, eq) in self.equalities.iter().enumerate() {
            if eq.coeffs.len() != n {
                return invalid(format!("equality {k}: expected {n} coefficients"));
            }
        }
        Ok(())
    }

    /// Minimum eigenvalue of each LMI block at `x`.
    pub fn block_min_eigenvalues(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| {
                if b.dim() == 0 {
                    return 0.0;
                }
                let e = SymmetricEigen::new(b.evaluate(x));
                e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Writes the problem in SDPA sparse format.
    ///
    /// SDPA states `sum_i x_i F_i - F_0 >= 0`, so the constant matrices are
    /// written negated. Equalities become a trailing diagonal (LP) block with
    /// the pair `a'x - b >= 0`, `b - a'x >= 0`. Each matrix line is
    /// `matno blkno i j value` with 1-based, upper-triangular indices.
    pub fn write_sdpa<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let n = self.num_vars();
        let neq = self.equalities.len();
        let nblocks = self.blocks.len() + usize::from(neq > 0);
        writeln!(out, "\"afrelay LMI problem, {n} variables")?;
        writeln!(out, "{n}")?;
        writeln!(out, "{nblocks}")?;
        let mut sizes: Vec<String> = self.blocks.iter().map(|b| b.dim().to_string()).collect();
        if neq > 0 {
            sizes.push(format!("-{}", 2 * neq));
        }
        writeln!(out, "{}", sizes.join(" "))?;
        let c: Vec<String> = self.objective.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", c.join(" "))?;
        for (b, blk) in self.blocks.iter().enumerate() {
            let m = blk.dim();
            for j in 0..m {
                for i in 0..=j {
                    let v = blk.constant[(i, j)];
                    if v != 0.0 {
                        writeln!(out, "0 {} {} {} {:.17e}", b + 1, i + 1, j + 1, -v)?;
                    }
                }
            }
            for (k, f) in blk.coeffs.iter().enumerate() {
                let d = f.to_dense(m);
                for j in 0..m {
                    for i in 0..=j {
                        let v = d[(i, j)];
                        if v != 0.0 {
                            writeln!(out, "{} {} {} {} {:.17e}", k + 1, b + 1, i + 1, j + 1, v)?;
                        }
                    }
                }
            }
        }
        if neq > 0 {
            let blk = self.blocks.len() + 1;
            for (e, eq) in self.equalities.iter().enumerate() {
                let (p, q) = (2 * e + 1, 2 * e + 2);
                if eq.rhs != 0.0 {
                    writeln!(out, "0 {blk} {p} {p} {:.17e}", eq.rhs)?;
                    writeln!(out, "0 {blk} {q} {q} {:.17e}", -eq.rhs)?;
                }
                for (k, &a) in eq.coeffs.iter().enumerate() {
                    if a != 0.0 {
                        writeln!(out, "{} {blk} {p} {p} {a:.17e}", k + 1)?;
                        writeln!(out, "{} {blk} {q} {q} {:.17e}", k + 1, -a)?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `sum_b tr(Z_b S_b)`.
    pub complementarity: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `primal_objective - dual_objective`.
    pub duality_gap: f64,
    pub iterations: usize,
    pub history: Vec<IterationLog>,
    pub message: String,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

struct Direction {
    dx: DVector<f64>,
    dw: DVector<f64>,
    ds: Vec<RMat>,
    dz: Vec<RMat>,
}

/// Largest `alpha` with `x + alpha dx >= 0` for `x > 0` given by its Cholesky factor.
fn max_step(chol_l: &RMat, dx: &RMat) -> f64 {
    if dx.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(a) = chol_l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = chol_l.solve_lower_triangular(&a.transpose()) else {
        return 0.0;
    };
    let w = (&w + w.transpose()) * 0.5;
    let lmin = SymmetricEigen::new(w).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn cholesky_l(m: &RMat) -> Option<RMat> {
    if m.nrows() == 0 {
        return Some(RMat::zeros(0, 0));
    }
    m.clone().cholesky().map(|c| c.l())
}

fn sym(m: RMat) -> RMat {
    (&m + m.transpose()) * 0.5
}

fn trace_prod(a: &RMat, b: &RMat) -> f64 {
    // tr(a b) for square a, b
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

struct Solver<'a> {
    p: &'a SdpProblem,
    n: usize,
    a: DMatrix<f64>,
    beq: DVector<f64>,
    c: DVector<f64>,
    total_dim: usize,
    f0_scale: f64,
    f_scale: f64,
}

impl<'a> Solver<'a> {
    fn new(p: &'a SdpProblem) -> Self {
        let n = p.num_vars();
        let neq = p.equalities.len();
        let a = DMatrix::from_fn(neq, n, |k, i| p.equalities[k].coeffs[i]);
        let beq = DVector::from_iterator(neq, p.equalities.iter().map(|e| e.rhs));
        let c = DVector::from_column_slice(&p.objective);
        let total_dim = p.blocks.iter().map(|b| b.dim()).sum();
        let f0_scale = p.blocks.iter().map(|b| b.constant.norm()).fold(0.0, f64::max);
        let f_scale = (0..n)
            .map(|i| p.blocks.iter().map(|b| b.coeffs[i].frobenius().powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Self { p, n, a, beq, c, total_dim, f0_scale, f_scale }
    }

    /// `[tr(F_i,b Z_b)]_i` summed over blocks.
    fn adjoint(&self, z: &[RMat]) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            self.p.blocks.iter().zip(z).map(|(b, zb)| b.coeffs[i].trace_with(zb)).sum()
        })
    }

    /// Schur complement `M_ij = sum_b tr(F_i Z F_j S^{-1})`.
    fn schur_matrix(&self, z: &[RMat], sinv: &[RMat]) -> RMat {
        let n = self.n;
        let mut m = RMat::zeros(n, n);
        for (b, blk) in self.p.blocks.iter().enumerate() {
            let dim = blk.dim();
            let (zb, sb) = (&z[b], &sinv[b]);
            let active: Vec<usize> = (0..n).filter(|&i| !blk.coeffs[i].is_empty()).collect();
            for &j in &active {
                let fj = &blk.coeffs[j];
                let g = if fj.nnz() > dim {
                    zb * fj.to_dense(dim) * sb
                } else {
                    let mut g = RMat::zeros(dim, dim);
                    for &(c, d, v) in &fj.entries {
                        g.ger(v, &zb.column(c), &sb.row(d).transpose(), 1.0);
                        if c != d {
                            g.ger(v, &zb.column(d), &sb.row(c).transpose(), 1.0);
                        }
                    }
                    g
                };
                for &i in &active {
                    m[(i, j)] += blk.coeffs[i].trace_with(&g);
                }
            }
        }
        sym(m)
    }

    fn solve_schur(m: &RMat, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        if let Some(ch) = m.clone().cholesky() {
            return Some(ch.solve(rhs));
        }
        let n = m.nrows();
        let reg = 1e-14 * (1.0 + m.trace().abs() / n.max(1) as f64);
        let mr = m + RMat::identity(n, n) * reg;
        if let Some(ch) = mr.clone().cholesky() {
            return Some(ch.solve(rhs));
        }
        mr.lu().solve(rhs)
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        m: &RMat,
        z: &[RMat],
        sinv: &[RMat],
        rs: &[RMat],
        rc: &[RMat],
        r_dual: &DVector<f64>,
        r_eq: &DVector<f64>,
    ) -> Option<Direction> {
        let blocks = &self.p.blocks;
        let k: Vec<RMat> = (0..blocks.len()).map(|b| (&rc[b] - &z[b] * &rs[b]) * &sinv[b]).collect();
        let h = DVector::from_fn(self.n, |i, _| blocks.iter().zip(&k).map(|(blk, kb)| blk.coeffs[i].trace_with(kb)).sum());
        let rhs = h - r_dual;
        let (dx, dw) = if self.a.nrows() == 0 {
            (Self::solve_schur(m, &rhs)?, DVector::zeros(0))
        } else {
            let minv_rhs = Self::solve_schur(m, &rhs)?;
            let at = self.a.transpose();
            let mut minv_at = RMat::zeros(self.n, self.a.nrows());
            for col in 0..at.ncols() {
                let sol = Self::solve_schur(m, &at.column(col).into_owned())?;
                minv_at.set_column(col, &sol);
            }
            let schur = &self.a * &minv_at;
            let dw = schur.lu().solve(&(r_eq - &self.a * &minv_rhs))?;
            (minv_rhs + &minv_at * &dw, dw)
        };
        let mut ds = Vec::with_capacity(blocks.len());
        let mut dz = Vec::with_capacity(blocks.len());
        for (b, blk) in blocks.iter().enumerate() {
            let mut d = rs[b].clone();
            for (i, f) in blk.coeffs.iter().enumerate() {
                if dx[i] != 0.0 {
                    f.add_to(dx[i], &mut d);
                }
            }
            let dzb = sym((&rc[b] - &z[b] * &d) * &sinv[b]);
            ds.push(d);
            dz.push(dzb);
        }
        if dx.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Direction { dx, dw, ds, dz })
    }

    fn step_lengths(&self, ls: &[RMat], lz: &[RMat], d: &Direction) -> (f64, f64) {
        let ap = ls.iter().zip(&d.ds).map(|(l, ds)| max_step(l, ds)).fold(f64::INFINITY, f64::min);
        let ad = lz.iter().zip(&d.dz).map(|(l, dz)| max_step(l, dz)).fold(f64::INFINITY, f64::min);
        ((STEP_FRACTION * ap).min(1.0), (STEP_FRACTION * ad).min(1.0))
    }

    fn run(&self, gap_tol: f64, max_iter: usize) -> SdpSolution {
        let p = self.p;
        let n = self.n;
        let nb = p.blocks.len();
        let ndim = self.total_dim.max(1) as f64;

        // starting point scaled after the usual primal-dual heuristics
        let zeta = (0..n)
            .map(|i| {
                let fi = p.blocks.iter().map(|b| b.coeffs[i].frobenius().powi(2)).sum::<f64>().sqrt();
                (1.0 + p.objective[i].abs()) / (1.0 + fi)
            })
            .fold(1.0, f64::max)
            * (n.max(1) as f64);
        let eta = (1.0 + self.f0_scale.max(self.f_scale)) / ndim.sqrt();
        let xi_z = 10.0 * zeta.max(1.0);
        let xi_s = 10.0 * eta.max(1.0);

        let mut x = DVector::<f64>::zeros(n);
        let mut w = DVector::<f64>::zeros(self.a.nrows());
        let mut s: Vec<RMat> = p.blocks.iter().map(|b| RMat::identity(b.dim(), b.dim()) * xi_s).collect();
        let mut z: Vec<RMat> = p.blocks.iter().map(|b| RMat::identity(b.dim(), b.dim()) * xi_z).collect();
        let z0_norm: f64 = z.iter().map(|m| m.norm()).sum();

        let mut history = Vec::new();
        let c_norm = self.c.norm();
        let b_norm = self.beq.norm();

        let finish = |status: SdpStatus, x: &DVector<f64>, pobj: f64, dobj: f64, history: Vec<IterationLog>, msg: String| {
            let iterations = history.len();
            SdpSolution {
                status,
                x: x.iter().copied().collect(),
                primal_objective: pobj,
                dual_objective: dobj,
                duality_gap: pobj - dobj,
                iterations,
                history,
                message: msg,
            }
        };

        let mut last = (f64::NAN, f64::NAN);
        for _iter in 0..=max_iter {
            let xs: Vec<f64> = x.iter().copied().collect();
            let fx: Vec<RMat> = p.blocks.iter().map(|b| b.evaluate(&xs)).collect();
            let rs: Vec<RMat> = (0..nb).map(|b| &fx[b] - &s[b]).collect();
            let fstar = self.adjoint(&z);
            let aw = self.a.transpose() * &w;
            let r_dual = &self.c - &fstar - &aw;
            let r_eq = &self.beq - &self.a * &x;
            let trzs: f64 = (0..nb).map(|b| trace_prod(&z[b], &s[b])).sum();
            let mu = trzs / ndim;
            let pobj = self.c.dot(&x);
            let dobj = -(0..nb).map(|b| trace_prod(&p.blocks[b].constant, &z[b])).sum::<f64>() + self.beq.dot(&w);
            let pres = rs.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + self.f0_scale)
                + r_eq.norm() / (1.0 + b_norm);
            let dres = r_dual.norm() / (1.0 + c_norm);
            last = (pobj, dobj);

            let gap_rel = (pobj - dobj).abs().max(trzs) / (1.0 + pobj.abs());
            if gap_rel <= gap_tol && pres <= FEAS_TOL && dres <= FEAS_TOL {
                let mins = p.block_min_eigenvalues(&xs);
                let ok = p
                    .blocks
                    .iter()
                    .zip(&mins)
                    .all(|(b, &e)| e >= -PSD_TOL * (1.0 + b.constant.norm()));
                if ok {
                    return finish(SdpStatus::Optimal, &x, pobj, dobj, history, String::new());
                }
            }

            // Farkas ray: F*(Z) + A'w ~ 0 relative to |Z|, with positive dual value
            let znorm: f64 = z.iter().map(|m| m.norm()).sum::<f64>() + w.norm();
            let ray = (&fstar + &aw).norm();
            if dobj > 0.0
                && znorm > 1e6 * z0_norm.max(1.0)
                && ray <= 1e-8 * znorm * self.f_scale.max(1.0)
                && dobj >= 1e-8 * znorm * self.f0_scale.max(1e-300)
            {
                return finish(SdpStatus::Infeasible, &x, pobj, dobj, history, "primal infeasibility certificate found".into());
            }

            if history.len() >= max_iter {
                break;
            }

            let (Some(ls), Some(lz)) = (
                s.iter().map(cholesky_l).collect::<Option<Vec<_>>>(),
                z.iter().map(cholesky_l).collect::<Option<Vec<_>>>(),
            ) else {
                return finish(SdpStatus::NumericalFailure, &x, pobj, dobj, history, "iterate lost definiteness".into());
            };
            let sinv: Vec<RMat> = ls
                .iter()
                .map(|l| {
                    let d = l.nrows();
                    let linv = l.solve_lower_triangular(&RMat::identity(d, d)).unwrap_or_else(|| RMat::zeros(d, d));
                    linv.transpose() * linv
                })
                .collect();

            let m = self.schur_matrix(&z, &sinv);

            // predictor
            let rc_aff: Vec<RMat> = (0..nb).map(|b| -(&z[b] * &s[b])).collect();
            let Some(aff) = self.direction(&m, &z, &sinv, &rs, &rc_aff, &r_dual, &r_eq) else {
                return finish(SdpStatus::NumericalFailure, &x, pobj, dobj, history, "Schur system is singular".into());
            };
            let (ap, ad) = self.step_lengths(&ls, &lz, &aff);
            let mu_aff = (0..nb)
                .map(|b| trace_prod(&(&s[b] + &aff.ds[b] * ap), &(&z[b] + &aff.dz[b] * ad)))
                .sum::<f64>()
                / ndim;
            let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

            // corrector
            let rc: Vec<RMat> = (0..nb)
                .map(|b| {
                    let d = s[b].nrows();
                    RMat::identity(d, d) * (sigma * mu) - &z[b] * &s[b] - &aff.dz[b] * &aff.ds[b]
                })
                .collect();
            let Some(dir) = self.direction(&m, &z, &sinv, &rs, &rc, &r_dual, &r_eq) else {
                return finish(SdpStatus::NumericalFailure, &x, pobj, dobj, history, "Schur system is singular".into());
            };
            let (ap, ad) = self.step_lengths(&ls, &lz, &dir);

            history.push(IterationLog {
                primal_objective: pobj,
                dual_objective: dobj,
                complementarity: trzs,
                primal_residual: pres,
                dual_residual: dres,
                step_primal: ap,
                step_dual: ad,
            });

            if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
                return finish(SdpStatus::NumericalFailure, &x, pobj, dobj, history, "step length collapsed".into());
            }
            x += &dir.dx * ap;
            w += &dir.dw * ad;
            for b in 0..nb {
                s[b] = sym(&s[b] + &dir.ds[b] * ap);
                z[b] = sym(&z[b] + &dir.dz[b] * ad);
            }
        }
        finish(
            SdpStatus::NumericalFailure,
            &x,
            last.0,
            last.1,
            history,
            format!("iteration limit {max_iter} reached without closing the gap"),
        )
    }
}

/// Solves `p` to relative gap `gap_tol` (gap normalized by `1 + |primal|`).
///
/// Returns an error only for malformed problems; solver outcomes are reported
/// through [`SdpSolution::status`].
pub fn solve_sdp(p: &SdpProblem, gap_tol: f64, max_iter: usize) -> Result<SdpSolution> {
    p.validate()?;
    if !(gap_tol > 0.0) {
        return invalid("gap tolerance must be positive");
    }
    Ok(Solver::new(p).run(gap_tol, max_iter))
}

/// Index map from the entries of a complex vector to real decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVarMap {
    pub re: Vec<usize>,
    pub im: Vec<usize>,
}

impl ComplexVarMap {
    /// Entries `k = 0..len` mapped to `offset + k` (real) and `offset + len + k` (imaginary).
    pub fn contiguous(offset: usize, len: usize) -> Self {
        Self { re: (offset..offset + len).collect(), im: (offset + len..offset + 2 * len).collect() }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

/// Real parameterization of an `n x n` Hermitian matrix variable: `n`
/// diagonal entries, then `(Re, Im)` of each strictly upper entry, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianVarMap {
    pub offset: usize,
    pub n: usize,
}

impl HermitianVarMap {
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn diagonal(&self) -> impl Iterator<Item = usize> + '_ {
        self.offset..self.offset + self.n
    }

    /// `(variable index, basis matrix)` pairs; the matrix equals `sum_i x_i B_i`.
    pub fn basis(&self) -> Vec<(usize, CMat)> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut b = CMat::zeros(n, n);
            b[(i, i)] = c64(1.0, 0.0);
            out.push((self.offset + i, b));
        }
        let mut idx = self.offset + n;
        for i in 0..n {
            for j in i + 1..n {
                let mut re = CMat::zeros(n, n);
                re[(i, j)] = c64(1.0, 0.0);
                re[(j, i)] = c64(1.0, 0.0);
                let mut im = CMat::zeros(n, n);
                im[(i, j)] = c64(0.0, 1.0);
                im[(j, i)] = c64(0.0, -1.0);
                out.push((idx, re));
                out.push((idx + 1, im));
                idx += 2;
            }
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for (i, b) in self.basis() {
            m += b * c64(x[i], 0.0);
        }
        m
    }
}

/// `constant + sum terms[k].1 * x[terms[k].0]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineScalar {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineScalar {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: vec![] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

/// LMI block encoding `||A v||^2 <= s(x)` through the Schur complement
/// `[[I, A v], [(A v)^H, s(x)]] >= 0`.
///
/// The complex column `A v` is realified as `[Re(Av); Im(Av)]`, which keeps
/// the block real symmetric of size `2m + 1`. A zero factor yields the
/// `1 x 1` block `s(x) >= 0`.
pub fn schur_lmi(quad_factor: &CMat, vars: &ComplexVarMap, rhs: &AffineScalar, num_vars: usize) -> Result<LmiBlock> {
    if vars.re.len() != vars.im.len() || vars.len() != quad_factor.ncols() {
        return invalid(format!(
            "schur_lmi: factor has {} columns but the variable map has {} entries",
            quad_factor.ncols(),
            vars.len()
        ));
    }
    if vars.re.iter().chain(&vars.im).chain(rhs.terms.iter().map(|(i, _)| i)).any(|&i| i >= num_vars) {
        return invalid("schur_lmi: variable index out of range");
    }
    let zero = quad_factor.iter().all(|z| z.norm_sqr() == 0.0);
    let m = if zero { 0 } else { quad_factor.nrows() };
    let dim = 2 * m + 1;
    let corner = 2 * m;
    let mut constant = RMat::zeros(dim, dim);
    for i in 0..2 * m {
        constant[(i, i)] = 1.0;
    }
    constant[(corner, corner)] = rhs.constant;
    let mut coeffs = vec![SymSparse::new(); num_vars];
    if m > 0 {
        for k in 0..vars.len() {
            let col = quad_factor.column(k);
            let (vr, vi) = (vars.re[k], vars.im[k]);
            for r in 0..m {
                let a = col[r];
                // Re(v_k) contributes a, Im(v_k) contributes i*a
                coeffs[vr].push(r, corner, a.re);
                coeffs[vr].push(m + r, corner, a.im);
                coeffs[vi].push(r, corner, -a.im);
                coeffs[vi].push(m + r, corner, a.re);
            }
        }
    }
    for &(i, a) in &rhs.terms {
        coeffs[i].push(corner, corner, a);
    }
    Ok(LmiBlock { constant, coeffs })
}

/// Realified LMI `C + sum_i x_i H_i >= 0` for Hermitian `C` and `H_i`,
/// via the embedding `[[Re, -Im], [Im, Re]]`.
pub fn hermitian_lmi(constant: &CMat, coeffs: &[(usize, CMat)], num_vars: usize) -> Result<LmiBlock> {
    let n = constant.nrows();
    if !constant.is_square() || coeffs.iter().any(|(_, h)| h.shape() != (n, n)) {
        return invalid("hermitian_lmi: coefficient shapes differ");
    }
    if coeffs.iter().any(|&(i, _)| i >= num_vars) {
        return invalid("hermitian_lmi: variable index out of range");
    }
    let c = realify(constant);
    let mut out = vec![SymSparse::new(); num_vars];
    for (i, h) in coeffs {
        let d = realify(h);
        for j in 0..d.ncols() {
            for r in 0..=j {
                let v = 0.5 * (d[(r, j)] + d[(j, r)]);
                out[*i].push(r, j, v);
            }
        }
    }
    Ok(LmiBlock { constant: (&c + c.transpose()) * 0.5, coeffs: out })
}

/// Convenience for scalar constraints `constant + a'x >= 0` as a `1 x 1` block.
pub fn scalar_lmi(rhs: &AffineScalar, num_vars: usize) -> Result<LmiBlock> {
    schur_lmi(&CMat::zeros(0, 0), &ComplexVarMap { re: vec![], im: vec![] }, rhs, num_vars)
}
