/// Per-iteration MSE of an alternating design.
///
/// `mse[0]` is the value at the initialization and `mse[i]` the value after
/// iteration `i`, always with the equalizer optimal for the current
/// precoder/relay pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub mse: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the loop stopped on a failure and returned its best iterate.
    pub note: Option<String>,
}

impl IterationTrace {
    pub fn start(mse: f64) -> Self {
        Self { mse: vec![mse], ..Self::default() }
    }

    pub fn last(&self) -> f64 {
        *self.mse.last().expect("trace starts with the initial MSE")
    }

    pub fn push(&mut self, mse: f64) {
        self.mse.push(mse);
        self.iterations += 1;
    }

    /// True when no entry exceeds its predecessor by more than `rel * (1 + prev)`.
    pub fn is_monotone(&self, rel: f64) -> bool {
        self.mse.windows(2).all(|w| w[1] <= w[0] + rel * (1.0 + w[0]))
    }
}

/// Stop rule shared by every loop: `|MSE_prev - MSE_next| <= threshold`.
pub(crate) fn converged(prev: f64, next: f64, threshold: f64) -> bool {
    (prev - next).abs() <= threshold
}
