//! Water-filling over paired eigenmodes.
//!
//! Solves `minimize sum_i theta_i / (m_i x_i + 1)` subject to
//! `sum_i x_i <= P`, `x >= 0`, whose solution is
//! `x_i = (nu sqrt(theta_i / m_i) - 1 / m_i)^+` with the water level `nu`
//! (`mu = 1 / nu^2`) chosen so the budget is met with equality.

use crate::error::{invalid, Result};
use crate::linalg::{c64, CMat};

/// Modes whose weight or gain falls below this fraction of the largest are left dry.
pub const MODE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    /// Power `x_i` per mode, in the input order.
    pub levels: Vec<f64>,
    /// Lagrange multiplier `mu = 1 / nu^2`; zero when no mode receives power.
    pub mu: f64,
}

impl WaterFill {
    pub fn total(&self) -> f64 {
        self.levels.iter().sum()
    }

    /// Indices of modes with positive power.
    pub fn active(&self) -> Vec<usize> {
        (0..self.levels.len()).filter(|&i| self.levels[i] > 0.0).collect()
    }
}

/// Exact water level: the power is piecewise linear in `nu`, so the active
/// set is found by sorting breakpoints instead of iterating on `mu`.
pub fn water_fill(theta: &[f64], gain: &[f64], power: f64) -> Result<WaterFill> {
    if theta.len() != gain.len() {
        return invalid("water_fill: weight and gain lengths differ");
    }
    if !(power >= 0.0) || theta.iter().chain(gain).any(|v| !v.is_finite()) {
        return invalid("water_fill: inputs must be finite and power nonnegative");
    }
    let tmax = theta.iter().copied().fold(0.0, f64::max);
    let gmax = gain.iter().copied().fold(0.0, f64::max);
    let mut modes: Vec<(usize, f64, f64)> = (0..theta.len())
        .filter(|&i| theta[i] > MODE_FLOOR * tmax && gain[i] > MODE_FLOOR * gmax && theta[i] > 0.0 && gain[i] > 0.0)
        .map(|i| {
            let a = (theta[i] / gain[i]).sqrt();
            let b = 1.0 / gain[i];
            (i, a, b)
        })
        .collect();
    let mut levels = vec![0.0; theta.len()];
    if modes.is_empty() || power == 0.0 {
        return Ok(WaterFill { levels, mu: 0.0 });
    }
    // breakpoint nu_i = b_i / a_i; mode i is wet once nu exceeds it
    modes.sort_by(|x, y| (x.2 / x.1).total_cmp(&(y.2 / y.1)));
    let (mut sa, mut sb) = (0.0, 0.0);
    let mut nu = 0.0;
    let mut count = 0;
    for (k, &(_, a, b)) in modes.iter().enumerate() {
        sa += a;
        sb += b;
        let cand = (power + sb) / sa;
        let next = modes.get(k + 1).map(|m| m.2 / m.1).unwrap_or(f64::INFINITY);
        if cand <= next {
            nu = cand;
            count = k + 1;
            break;
        }
    }
    for &(i, a, b) in &modes[..count] {
        levels[i] = (nu * a - b).max(0.0);
    }
    // absorb round-off so the budget is met exactly
    let tot: f64 = levels.iter().sum();
    if tot > 0.0 {
        let s = power / tot;
        levels.iter_mut().for_each(|x| *x *= s);
    }
    Ok(WaterFill { levels, mu: 1.0 / (nu * nu) })
}

/// `diag(sqrt(levels))` padded to `rows x cols`.
pub fn sqrt_level_matrix(levels: &[f64], rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for (i, &x) in levels.iter().enumerate().take(rows.min(cols)) {
        m[(i, i)] = c64(x.max(0.0).sqrt(), 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(theta: &[f64], gain: &[f64], x: &[f64]) -> f64 {
        theta.iter().zip(gain).zip(x).map(|((t, m), x)| t / (m * x + 1.0)).sum()
    }

    #[test]
    fn equal_modes_split_evenly() {
        let w = water_fill(&[1.0, 1.0], &[2.0, 2.0], 4.0).unwrap();
        assert!((w.levels[0] - 2.0).abs() < 1e-14 && (w.levels[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn weak_mode_stays_dry_at_low_power() {
        let w = water_fill(&[1.0, 1.0], &[10.0, 0.1], 0.1).unwrap();
        assert_eq!(w.levels[1], 0.0);
        assert!((w.levels[0] - 0.1).abs() < 1e-14);
        assert_eq!(w.active(), vec![0]);
    }

    #[test]
    fn zero_weights_get_nothing() {
        let w = water_fill(&[0.0, 0.0], &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(w.levels, vec![0.0, 0.0]);
        assert_eq!(w.mu, 0.0);
    }

    #[test]
    fn kkt_and_budget() {
        let theta = [3.0, 1.0, 0.2];
        let gain = [5.0, 0.7, 2.0];
        let w = water_fill(&theta, &gain, 1.5).unwrap();
        assert!((w.total() - 1.5).abs() < 1e-12);
        // active modes share the marginal value theta m / (m x + 1)^2 = mu
        for i in w.active() {
            let marg = theta[i] * gain[i] / (gain[i] * w.levels[i] + 1.0).powi(2);
            assert!((marg - w.mu).abs() < 1e-9 * w.mu, "{marg} vs {}", w.mu);
        }
        for i in 0..3 {
            if w.levels[i] == 0.0 {
                assert!(theta[i] * gain[i] <= w.mu * (1.0 + 1e-12));
            }
        }
        // no budget-preserving perturbation improves
        let base = objective(&theta, &gain, &w.levels);
        for (i, j) in [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)] {
            let mut x = w.levels.clone();
            let d = 1e-4f64.min(x[i]);
            x[i] -= d;
            x[j] += d;
            assert!(objective(&theta, &gain, &x) >= base - 1e-15);
        }
    }

    #[test]
    fn joint_scaling_keeps_active_set() {
        let theta = [2.0, 1.0, 0.5, 0.05];
        let gain = [4.0, 1.0, 0.3, 0.1];
        let base = water_fill(&theta, &gain, 0.8).unwrap().active();
        for alpha in [0.01, 0.5, 3.0, 100.0] {
            let g: Vec<f64> = gain.iter().map(|m| m / alpha).collect();
            let w = water_fill(&theta, &g, 0.8 * alpha).unwrap();
            assert_eq!(w.active(), base, "alpha {alpha}");
        }
    }
}
