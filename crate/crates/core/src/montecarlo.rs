//! Link-level Monte-Carlo harness: QPSK symbols through designed systems,
//! empirical MSE and SER against the analytic MSE, and per-point aggregation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{downlink_baseline, uplink_baseline, BaselineKind};
use crate::channel::{
    complex_gaussian, derive_rng, purpose, sample_rayleigh, Direction, DownlinkSystem, SystemDims, UplinkSystem,
};
use crate::downlink::{self, Alg1Options, DownlinkDesign, Init};
use crate::error::{invalid, Error, Result};
use crate::linalg::{c64, hermitian_sqrt, trace_re, CMat};
use crate::trace::IterationTrace;
use crate::uplink::{self, UplinkDesign, UplinkOptions};

pub const DEFAULT_SYMBOLS: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 500;
/// Relative power slack beyond which a returned design is flagged.
pub const FEASIBILITY_SLACK: f64 = 1e-6;

/// Gray-mapped QPSK: bit pair `(b0, b1)` maps to `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn qpsk_modulate(bits: &[bool]) -> Result<Vec<num_complex::Complex64>> {
    if bits.len() % 2 != 0 {
        return invalid("QPSK needs an even number of bits");
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let sign = |b: bool| if b { -a } else { a };
    Ok(bits.chunks(2).map(|p| c64(sign(p[0]), sign(p[1]))).collect())
}

/// Nearest-point detection, inverse of [`qpsk_modulate`].
pub fn qpsk_detect(symbols: &[num_complex::Complex64]) -> Vec<bool> {
    symbols.iter().flat_map(|z| [z.re < 0.0, z.im < 0.0]).collect()
}

fn qpsk_hard(z: num_complex::Complex64) -> (bool, bool) {
    (z.re < 0.0, z.im < 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Joint downlink design from the identity start.
    Alg1,
    /// Joint downlink design from the separate per-hop start.
    Alg1Separate,
    /// Downlink relay and equalizers with the precoder held at its start.
    Alg1FixedT,
    /// Uplink closed-form relay with covariance SDP.
    Alg2,
    /// Uplink three-block alternation.
    Alg1Uplink,
    Baseline(BaselineKind),
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Alg1 => "alg1",
            Self::Alg1Separate => "alg1_separate",
            Self::Alg1FixedT => "alg1_fixed_t",
            Self::Alg2 => "alg2",
            Self::Alg1Uplink => "alg1_uplink",
            Self::Baseline(k) => k.as_str(),
        }
    }

    pub fn supports(self, dir: Direction) -> bool {
        match self {
            Self::Alg1 | Self::Alg1Separate | Self::Alg1FixedT => dir == Direction::Downlink,
            Self::Alg2 | Self::Alg1Uplink => dir == Direction::Uplink,
            Self::Baseline(BaselineKind::NoSourcePrecoder) => dir == Direction::Uplink,
            Self::Baseline(_) => true,
        }
    }

    /// Every designer available for a direction, iterative ones first.
    pub fn all_for(dir: Direction) -> Vec<Algorithm> {
        let mut v = match dir {
            Direction::Downlink => vec![Self::Alg1, Self::Alg1Separate, Self::Alg1FixedT],
            Direction::Uplink => vec![Self::Alg2, Self::Alg1Uplink],
        };
        v.extend(BaselineKind::ALL.into_iter().map(Self::Baseline).filter(|a| a.supports(dir)));
        v
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "alg1" => Self::Alg1,
            "alg1_separate" => Self::Alg1Separate,
            "alg1_fixed_t" => Self::Alg1FixedT,
            "alg2" => Self::Alg2,
            "alg1_uplink" => Self::Alg1Uplink,
            other => Self::Baseline(other.parse().map_err(|_| Error::InvalidInput(format!("unknown algorithm '{other}'")))?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Downlink(DownlinkDesign),
    Uplink(UplinkDesign),
}

#[derive(Debug, Clone)]
pub enum System {
    Downlink(DownlinkSystem),
    Uplink(UplinkSystem),
}

impl System {
    pub fn from_snr(dims: &SystemDims, seed: u64, trial: u64, snr1_db: f64, snr2_db: f64, p_s: f64, p_r: f64) -> Result<Self> {
        let ch = sample_rayleigh(dims, seed, trial);
        Ok(match dims.direction {
            Direction::Downlink => Self::Downlink(DownlinkSystem::from_snr(dims, &ch, snr1_db, snr2_db, p_s, p_r)?),
            Direction::Uplink => Self::Uplink(UplinkSystem::from_snr(dims, &ch, snr1_db, snr2_db, p_s, p_r)?),
        })
    }

    pub fn direction(&self) -> Direction {
        match self {
            Self::Downlink(_) => Direction::Downlink,
            Self::Uplink(_) => Direction::Uplink,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub threshold: f64,
    pub max_iter: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { threshold: downlink::DEFAULT_THRESHOLD, max_iter: downlink::DEFAULT_MAX_ITERATIONS }
    }
}

/// Runs one designer; non-iterative designs get a single-entry trace.
pub fn design(alg: Algorithm, sys: &System, opts: &DesignOptions) -> Result<(Design, IterationTrace)> {
    if !alg.supports(sys.direction()) {
        return invalid(format!("{alg} does not support the {} direction", sys.direction().as_str()));
    }
    let down = |init, update_precoder| Alg1Options { init, threshold: opts.threshold, max_iter: opts.max_iter, update_precoder };
    let up = UplinkOptions { threshold: opts.threshold, max_iter: opts.max_iter };
    match (alg, sys) {
        (Algorithm::Alg1, System::Downlink(s)) => downlink_run(s, &down(Init::Identity, true)),
        (Algorithm::Alg1Separate, System::Downlink(s)) => downlink_run(s, &down(Init::SeparateLmmse, true)),
        (Algorithm::Alg1FixedT, System::Downlink(s)) => downlink_run(s, &down(Init::Identity, false)),
        (Algorithm::Alg2, System::Uplink(s)) => uplink::run_algorithm2(s, &up).map(|(d, t)| (Design::Uplink(d), t)),
        (Algorithm::Alg1Uplink, System::Uplink(s)) => uplink::run_algorithm1_uplink(s, &up).map(|(d, t)| (Design::Uplink(d), t)),
        (Algorithm::Baseline(k), System::Downlink(s)) => {
            let d = downlink_baseline(k, s)?;
            let m = d.mse(s)?;
            Ok((Design::Downlink(d), IterationTrace::start(m)))
        }
        (Algorithm::Baseline(k), System::Uplink(s)) => {
            let d = uplink_baseline(k, s)?;
            let m = d.mse(s)?;
            Ok((Design::Uplink(d), IterationTrace::start(m)))
        }
        _ => unreachable!("direction checked above"),
    }
}

fn downlink_run(s: &DownlinkSystem, o: &Alg1Options) -> Result<(Design, IterationTrace)> {
    downlink::run_algorithm1(s, o).map(|(d, t)| (Design::Downlink(d), t))
}

/// Empirical statistics of one transmission block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStats {
    /// Mean over symbol times of `||s_hat - s||^2`.
    pub mse: f64,
    /// Standard error of that mean.
    pub mse_std_error: f64,
    pub ser: f64,
    /// Mean transmitted source power per symbol time.
    pub source_power: f64,
}

/// `streams x n` QPSK block with its bits.
fn qpsk_block<R: Rng>(rng: &mut R, streams: usize, n: usize) -> CMat {
    let bits: Vec<bool> = (0..2 * streams * n).map(|_| rng.random()).collect();
    let syms = qpsk_modulate(&bits).expect("even bit count");
    CMat::from_row_slice(streams, n, &syms)
}

fn colored_noise<R: Rng>(rng: &mut R, cov: &CMat, n: usize) -> Result<CMat> {
    Ok(hermitian_sqrt(cov)? * complex_gaussian(rng, cov.nrows(), n))
}

fn stats(s: &CMat, s_hat: &CMat, tx: &CMat) -> LinkStats {
    let n = s.ncols();
    let err = s_hat - s;
    let e: Vec<f64> = err.column_iter().map(|c| c.norm_squared()).collect();
    let mean = e.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let errors = s.iter().zip(s_hat.iter()).filter(|(a, b)| qpsk_hard(**a) != qpsk_hard(**b)).count();
    LinkStats {
        mse: mean,
        mse_std_error: (var / n as f64).sqrt(),
        ser: errors as f64 / s.len().max(1) as f64,
        source_power: tx.norm_squared() / n as f64,
    }
}

/// Transmits `n` symbols per stream through a designed system; symbols and
/// noise are drawn from the `(seed, trial, point)` streams.
pub fn simulate(sys: &System, design: &Design, n: usize, seed: u64, trial: u64, point: u64) -> Result<LinkStats> {
    if n == 0 {
        return invalid("at least one symbol per stream");
    }
    let mut sym_rng = derive_rng(seed, trial, purpose::SYMBOLS, point);
    let mut noise_rng = derive_rng(seed, trial, purpose::NOISE, point);
    match (sys, design) {
        (System::Downlink(s), Design::Downlink(d)) => {
            let l = s.total_streams();
            let sym = qpsk_block(&mut sym_rng, l, n);
            let tx = &d.t * &sym;
            let relay_in = &s.h_br * &tx + colored_noise(&mut noise_rng, &s.r_eta, n)?;
            let relay_out = &d.w * relay_in;
            let mut est = CMat::zeros(l, n);
            let offs = s.stream_offsets();
            for k in 0..s.num_users() {
                let y = &s.h_rm[k] * &relay_out + colored_noise(&mut noise_rng, &s.r_v[k], n)?;
                est.rows_mut(offs[k], s.streams[k]).copy_from(&(&d.g[k] * y));
            }
            Ok(stats(&sym, &est, &tx))
        }
        (System::Uplink(s), Design::Uplink(d)) => {
            let l = s.total_streams();
            let sym = qpsk_block(&mut sym_rng, l, n);
            let tx = d.p_matrix() * &sym;
            let relay_in = s.h_mr_stacked() * &tx + colored_noise(&mut noise_rng, &s.r_n, n)?;
            let y = &s.h_rb * (&d.f * relay_in) + colored_noise(&mut noise_rng, &s.r_xi, n)?;
            Ok(stats(&sym, &(&d.b * y), &tx))
        }
        _ => invalid("design and system directions differ"),
    }
}

fn analytic(sys: &System, design: &Design) -> Result<(f64, bool, f64)> {
    match (sys, design) {
        (System::Downlink(s), Design::Downlink(d)) => {
            Ok((d.mse(s)?, d.is_feasible(s, FEASIBILITY_SLACK), trace_re(&(&d.t * d.t.adjoint()))))
        }
        (System::Uplink(s), Design::Uplink(d)) => {
            Ok((d.mse(s)?, d.is_feasible(s, FEASIBILITY_SLACK), d.source_powers().iter().sum()))
        }
        _ => invalid("design and system directions differ"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dims: SystemDims,
    /// `(first-hop SNR dB, second-hop SNR dB)` points.
    pub sweep: Vec<(f64, f64)>,
    pub symbols_per_stream: usize,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub threshold: f64,
    pub max_iter: usize,
    pub p_s: f64,
    pub p_r: f64,
}

impl ExperimentConfig {
    /// Downlink sweeps the first-hop SNR at a 20 dB second hop, uplink the
    /// second-hop SNR at a 20 dB first hop.
    pub fn standard(direction: Direction) -> Self {
        let snrs = [0.0, 10.0, 20.0, 30.0];
        let sweep = match direction {
            Direction::Downlink => snrs.iter().map(|&s| (s, 20.0)).collect(),
            Direction::Uplink => snrs.iter().map(|&s| (20.0, s)).collect(),
        };
        Self {
            dims: SystemDims::standard(direction),
            sweep,
            symbols_per_stream: DEFAULT_SYMBOLS,
            trials: DEFAULT_TRIALS,
            seed: 1,
            algorithms: Algorithm::all_for(direction),
            threshold: downlink::DEFAULT_THRESHOLD,
            max_iter: downlink::DEFAULT_MAX_ITERATIONS,
            p_s: 1.0,
            p_r: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.trials == 0 || self.symbols_per_stream == 0 || self.sweep.is_empty() || self.algorithms.is_empty() {
            return invalid("trials, symbols, sweep and algorithms must be non-empty");
        }
        if !(self.threshold > 0.0) || !(self.p_s > 0.0) || !(self.p_r > 0.0) {
            return invalid("threshold and powers must be positive");
        }
        if let Some(a) = self.algorithms.iter().find(|a| !a.supports(self.dims.direction)) {
            return invalid(format!("{a} does not support the {} direction", self.dims.direction.as_str()));
        }
        if self.sweep.iter().any(|&(a, b)| !a.is_finite() || !b.is_finite()) {
            return invalid("sweep SNRs must be finite");
        }
        Ok(())
    }

    pub fn design_options(&self) -> DesignOptions {
        DesignOptions { threshold: self.threshold, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub algorithm: Algorithm,
    pub point: usize,
    pub trial: usize,
    pub analytic_mse: f64,
    pub empirical_mse: f64,
    pub empirical_std_error: f64,
    pub ser: f64,
    pub iterations: usize,
    pub converged: bool,
    pub source_power: f64,
    pub empirical_source_power: f64,
    pub trace: Vec<f64>,
    /// Reason the trial is excluded from aggregation.
    pub flagged: Option<String>,
}

impl TrialResult {
    fn flagged(algorithm: Algorithm, point: usize, trial: usize, why: String) -> Self {
        Self {
            algorithm,
            point,
            trial,
            analytic_mse: f64::NAN,
            empirical_mse: f64::NAN,
            empirical_std_error: f64::NAN,
            ser: f64::NAN,
            iterations: 0,
            converged: false,
            source_power: f64::NAN,
            empirical_source_power: f64::NAN,
            trace: vec![],
            flagged: Some(why),
        }
    }
}

/// One channel realization at one sweep point through one designer.
pub fn run_trial(alg: Algorithm, cfg: &ExperimentConfig, point: usize, trial: usize) -> TrialResult {
    match try_trial(alg, cfg, point, trial) {
        Ok(r) => r,
        Err(e) => TrialResult::flagged(alg, point, trial, e.to_string()),
    }
}

fn try_trial(alg: Algorithm, cfg: &ExperimentConfig, point: usize, trial: usize) -> Result<TrialResult> {
    let (snr1, snr2) = *cfg.sweep.get(point).ok_or_else(|| Error::InvalidInput("sweep point out of range".into()))?;
    let sys = System::from_snr(&cfg.dims, cfg.seed, trial as u64, snr1, snr2, cfg.p_s, cfg.p_r)?;
    let (d, trace) = design(alg, &sys, &cfg.design_options())?;
    let (mse, feasible, power) = analytic(&sys, &d)?;
    let link = simulate(&sys, &d, cfg.symbols_per_stream, cfg.seed, trial as u64, point as u64)?;
    let flagged = if !feasible {
        Some("design violates a power budget".to_string())
    } else if !mse.is_finite() || !link.mse.is_finite() {
        Some("non-finite MSE".to_string())
    } else {
        None
    };
    Ok(TrialResult {
        algorithm: alg,
        point,
        trial,
        analytic_mse: mse,
        empirical_mse: link.mse,
        empirical_std_error: link.mse_std_error,
        ser: link.ser,
        iterations: trace.iterations,
        converged: trace.converged,
        source_power: power,
        empirical_source_power: link.source_power,
        trace: trace.mse,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub algorithm: Algorithm,
    pub snr1_db: f64,
    pub snr2_db: f64,
    pub mean_mse_analytic: f64,
    pub mean_mse_empirical: f64,
    pub mean_ser: f64,
    pub mean_iters: f64,
    pub trials_ok: usize,
    pub trials_flagged: usize,
}

/// Means over the unflagged trials. The sum runs in trial order, so the
/// result does not depend on the order the trials were produced in.
pub fn aggregate(results: &[TrialResult], snr: (f64, f64)) -> Result<AggregateResult> {
    let Some(first) = results.first() else {
        return invalid("no trials to aggregate");
    };
    let mut ok: Vec<&TrialResult> = results.iter().filter(|r| r.flagged.is_none()).collect();
    let flagged = results.len() - ok.len();
    if ok.is_empty() {
        return Err(Error::EmptyAggregate { flagged });
    }
    ok.sort_by_key(|r| r.trial);
    let n = ok.len() as f64;
    let mean = |f: fn(&TrialResult) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
    Ok(AggregateResult {
        algorithm: first.algorithm,
        snr1_db: snr.0,
        snr2_db: snr.1,
        mean_mse_analytic: mean(|r| r.analytic_mse),
        mean_mse_empirical: mean(|r| r.empirical_mse),
        mean_ser: mean(|r| r.ser),
        mean_iters: mean(|r| r.iterations as f64),
        trials_ok: ok.len(),
        trials_flagged: flagged,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// One entry per `(point, algorithm)`, points outermost.
    pub aggregates: Vec<AggregateResult>,
    /// All trials sorted by `(point, algorithm index, trial)`.
    pub trials: Vec<TrialResult>,
}

/// Runs every `(point, algorithm, trial)` on `jobs` worker threads
/// (0 picks the rayon default). Output is independent of `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for point in 0..cfg.sweep.len() {
        for (ai, &alg) in cfg.algorithms.iter().enumerate() {
            for trial in 0..cfg.trials {
                tasks.push((point, ai, alg, trial));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let trials: Vec<TrialResult> =
        pool.install(|| tasks.par_iter().map(|&(point, _, alg, trial)| run_trial(alg, cfg, point, trial)).collect());
    let mut aggregates = Vec::new();
    for point in 0..cfg.sweep.len() {
        for alg in &cfg.algorithms {
            let group: Vec<TrialResult> =
                trials.iter().filter(|r| r.point == point && r.algorithm == *alg).cloned().collect();
            aggregates.push(aggregate(&group, cfg.sweep[point])?);
        }
    }
    Ok(ExperimentOutput { aggregates, trials })
}
