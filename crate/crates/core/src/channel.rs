//! System dimensions, channel realizations, noise and power settings.
//!
//! Channels follow the convention `output = H * input`:
//!
//! | link            | matrix      | shape            |
//! |-----------------|-------------|------------------|
//! | BS -> relay     | `h_br`      | `N_R x N_B`      |
//! | relay -> user k | `h_rm[k]`   | `N_M,k x N_R`    |
//! | user k -> relay | `h_mr[k]`   | `N_R x N_M,k`    |
//! | relay -> BS     | `h_rb`      | `N_B x N_R`      |

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c64, ensure_finite, is_hermitian, CMat, HERMITIAN_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Downlink,
    Uplink,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Downlink => "downlink",
            Direction::Uplink => "uplink",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "downlink" => Ok(Direction::Downlink),
            "uplink" => Ok(Direction::Uplink),
            _ => Err(Error::Parse(format!("unknown direction {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserDims {
    pub n_mobile: usize,
    pub streams: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDims {
    pub n_base: usize,
    pub n_relay: usize,
    pub users: Vec<UserDims>,
    pub direction: Direction,
}

impl SystemDims {
    /// `K` users with identical antenna and stream counts.
    pub fn uniform(direction: Direction, n_base: usize, n_relay: usize, users: usize, n_mobile: usize, streams: usize) -> Self {
        Self { n_base, n_relay, users: vec![UserDims { n_mobile, streams }; users], direction }
    }

    /// Four BS and relay antennas, two users with two antennas and two streams each.
    pub fn standard(direction: Direction) -> Self {
        Self::uniform(direction, 4, 4, 2, 2, 2)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn total_streams(&self) -> usize {
        self.users.iter().map(|u| u.streams).sum()
    }

    pub fn streams(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.streams).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_base == 0 || self.n_relay == 0 {
            return invalid("antenna counts must be at least 1");
        }
        if self.users.is_empty() {
            return invalid("at least one user is required");
        }
        for (k, u) in self.users.iter().enumerate() {
            if u.n_mobile == 0 || u.streams == 0 {
                return invalid(format!("user {k}: antenna and stream counts must be at least 1"));
            }
        }
        let l = self.total_streams();
        if l > self.n_base.min(self.n_relay) {
            return invalid(format!(
                "total streams {l} exceed min(N_B, N_R) = {}",
                self.n_base.min(self.n_relay)
            ));
        }
        Ok(())
    }

    /// Expected `(rows, cols)` of the first- and second-hop matrices.
    pub fn hop_shapes(&self) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        match self.direction {
            Direction::Downlink => (
                vec![(self.n_relay, self.n_base)],
                self.users.iter().map(|u| (u.n_mobile, self.n_relay)).collect(),
            ),
            Direction::Uplink => (
                self.users.iter().map(|u| (self.n_relay, u.n_mobile)).collect(),
                vec![(self.n_base, self.n_relay)],
            ),
        }
    }
}

/// One realization of both hops. Downlink: `first_hop = [H_BR]`,
/// `second_hop = [H_RM,1 .. H_RM,K]`. Uplink: `first_hop = [H_MR,1 .. H_MR,K]`,
/// `second_hop = [H_RB]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub direction: Direction,
    pub first_hop: Vec<CMat>,
    pub second_hop: Vec<CMat>,
}

impl ChannelSet {
    pub fn check(&self, dims: &SystemDims) -> Result<()> {
        if self.direction != dims.direction {
            return invalid("channel direction does not match the system dimensions");
        }
        let (first, second) = dims.hop_shapes();
        let shapes = |v: &[CMat]| v.iter().map(|m| m.shape()).collect::<Vec<_>>();
        if shapes(&self.first_hop) != first || shapes(&self.second_hop) != second {
            return invalid(format!(
                "channel shapes {:?}/{:?} do not match expected {first:?}/{second:?}",
                shapes(&self.first_hop),
                shapes(&self.second_hop)
            ));
        }
        for m in self.first_hop.iter().chain(&self.second_hop) {
            ensure_finite(m, "channel matrix")?;
        }
        Ok(())
    }

    /// Writes the realization in the plain-text matrix format.
    ///
    /// ```text
    /// channels <direction> <n_first> <n_second>
    /// <rows> <cols>
    /// <re> <im>          (rows*cols lines, row-major)
    /// ...                (first-hop matrices, then second-hop matrices)
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "channels {} {} {}\n",
            self.direction.as_str(),
            self.first_hop.len(),
            self.second_hop.len()
        );
        for m in self.first_hop.iter().chain(&self.second_hop) {
            s.push_str(&matrix_to_text(m));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (n, header) = lines.next().ok_or_else(|| Error::Parse("empty channel file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "channels" {
            return Err(Error::Parse(format!("line {}: expected 'channels <direction> <n_first> <n_second>'", n + 1)));
        }
        let direction: Direction = parts[1].parse()?;
        let count = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("line {}: bad count {s:?}", n + 1)));
        let (nf, ns) = (count(parts[2])?, count(parts[3])?);
        let mut mats = Vec::with_capacity(nf + ns);
        for _ in 0..nf + ns {
            mats.push(read_matrix(&mut lines)?);
        }
        if let Some((n, _)) = lines.next() {
            return Err(Error::Parse(format!("line {}: trailing content after last matrix", n + 1)));
        }
        let second_hop = mats.split_off(nf);
        Ok(Self { direction, first_hop: mats, second_hop })
    }
}

/// `rows cols` header followed by one `re im` line per entry, row-major.
pub fn matrix_to_text(m: &CMat) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let _ = writeln!(s, "{:.17e} {:.17e}", z.re, z.im);
        }
    }
    s
}

fn read_matrix<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<CMat> {
    let (n, header) = lines.next().ok_or_else(|| Error::Parse("unexpected end of file, expected 'rows cols'".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("line {}: expected 'rows cols'", n + 1)))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("line {}: expected 'rows cols'", n + 1)));
    };
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let (n, line) = lines.next().ok_or_else(|| Error::Parse("unexpected end of file inside a matrix".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("line {}: expected 're im'", n + 1)))?;
            let [re, im] = vals[..] else {
                return Err(Error::Parse(format!("line {}: expected 're im'", n + 1)));
            };
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::Parse(format!("line {}: non-finite entry", n + 1)));
            }
            m[(i, j)] = c64(re, im);
        }
    }
    Ok(m)
}

/// Relay-side and destination-side noise covariances.
/// Downlink: `relay = R_eta`, `destination = [R_v,1 .. R_v,K]`.
/// Uplink: `relay = R_n`, `destination = [R_xi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub relay: CMat,
    pub destination: Vec<CMat>,
}

/// Downlink: `source = [P_s]`. Uplink: `source = [P_s,1 .. P_s,K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBudget {
    pub source: Vec<f64>,
    pub relay: f64,
}

/// `sigma^2 I_dim` with `sigma^2 = power / 10^(snr_db / 10)`.
pub fn snr_to_noise(snr_db: f64, power: f64, dim: usize) -> Result<CMat> {
    if !(power > 0.0) || !snr_db.is_finite() {
        return invalid(format!("snr_to_noise: power {power} and SNR {snr_db} dB must be positive/finite"));
    }
    let sigma2 = power / 10f64.powf(snr_db / 10.0);
    Ok(CMat::identity(dim, dim).scale(sigma2))
}

/// Stream tags for [`derive_rng`].
pub mod purpose {
    pub const CHANNEL: u64 = 1;
    pub const SYMBOLS: u64 = 2;
    pub const NOISE: u64 = 3;
}

/// ChaCha20 (rand_chacha 0.9) keyed by the 32 bytes
/// `seed || trial || purpose || point`, each as little-endian `u64`.
///
/// Every `(seed, trial, purpose, point)` tuple gets its own stream, so draws are
/// independent of evaluation order and worker count.
pub fn derive_rng(seed: u64, trial: u64, purpose: u64, point: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&purpose.to_le_bytes());
    key[24..32].copy_from_slice(&point.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// `rows x cols` matrix of i.i.d. CN(0, 1) entries, drawn row-major, real part first.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(i, j)] = c64(re * s, im * s);
        }
    }
    m
}

/// Rayleigh realization for `(seed, trial)`; first-hop matrices are drawn before second-hop ones.
pub fn sample_rayleigh(dims: &SystemDims, seed: u64, trial: u64) -> ChannelSet {
    let mut rng = derive_rng(seed, trial, purpose::CHANNEL, 0);
    let (first, second) = dims.hop_shapes();
    let first_hop = first.iter().map(|&(r, c)| complex_gaussian(&mut rng, r, c)).collect();
    let second_hop = second.iter().map(|&(r, c)| complex_gaussian(&mut rng, r, c)).collect();
    ChannelSet { direction: dims.direction, first_hop, second_hop }
}

fn check_cov(m: &CMat, n: usize, what: &str) -> Result<()> {
    if m.shape() != (n, n) {
        return invalid(format!("{what}: expected {n}x{n}, got {}x{}", m.nrows(), m.ncols()));
    }
    ensure_finite(m, what)?;
    if !is_hermitian(m, HERMITIAN_TOL) {
        return invalid(format!("{what} is not Hermitian"));
    }
    Ok(())
}

fn check_power(p: f64, what: &str) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        invalid(format!("{what} must be positive, got {p}"))
    }
}

/// Everything a downlink designer needs for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkSystem {
    pub h_br: CMat,
    pub h_rm: Vec<CMat>,
    pub r_eta: CMat,
    pub r_v: Vec<CMat>,
    pub streams: Vec<usize>,
    pub p_s: f64,
    pub p_r: f64,
}

impl DownlinkSystem {
    pub fn new(dims: &SystemDims, ch: &ChannelSet, noise: &NoiseModel, budget: &PowerBudget) -> Result<Self> {
        if dims.direction != Direction::Downlink {
            return invalid("downlink system built from uplink dimensions");
        }
        dims.validate()?;
        ch.check(dims)?;
        if noise.destination.len() != dims.num_users() || budget.source.len() != 1 {
            return invalid("downlink needs one destination covariance per user and one source budget");
        }
        let s = Self {
            h_br: ch.first_hop[0].clone(),
            h_rm: ch.second_hop.clone(),
            r_eta: noise.relay.clone(),
            r_v: noise.destination.clone(),
            streams: dims.streams(),
            p_s: budget.source[0],
            p_r: budget.relay,
        };
        s.validate()?;
        Ok(s)
    }

    /// Noise from the first-hop SNR `P_s / sigma_eta^2` and second-hop SNR `P_r / sigma_v^2`.
    pub fn from_snr(dims: &SystemDims, ch: &ChannelSet, snr1_db: f64, snr2_db: f64, p_s: f64, p_r: f64) -> Result<Self> {
        let noise = NoiseModel {
            relay: snr_to_noise(snr1_db, p_s, dims.n_relay)?,
            destination: dims.users.iter().map(|u| snr_to_noise(snr2_db, p_r, u.n_mobile)).collect::<Result<_>>()?,
        };
        Self::new(dims, ch, &noise, &PowerBudget { source: vec![p_s], relay: p_r })
    }

    pub fn validate(&self) -> Result<()> {
        let (nr, nb) = self.h_br.shape();
        let k = self.h_rm.len();
        if k == 0 || self.r_v.len() != k || self.streams.len() != k {
            return invalid("inconsistent user count");
        }
        for (i, h) in self.h_rm.iter().enumerate() {
            if h.ncols() != nr {
                return invalid(format!("h_rm[{i}] has {} columns, expected N_R = {nr}", h.ncols()));
            }
            ensure_finite(h, "h_rm")?;
            check_cov(&self.r_v[i], h.nrows(), "destination noise covariance")?;
        }
        ensure_finite(&self.h_br, "h_br")?;
        check_cov(&self.r_eta, nr, "relay noise covariance")?;
        check_power(self.p_s, "source power")?;
        check_power(self.p_r, "relay power")?;
        let l = self.total_streams();
        if self.streams.contains(&0) || l > nb.min(nr) {
            return invalid(format!("total streams {l} must be positive and at most min(N_B, N_R)"));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.h_rm.len()
    }
    pub fn n_base(&self) -> usize {
        self.h_br.ncols()
    }
    pub fn n_relay(&self) -> usize {
        self.h_br.nrows()
    }
    pub fn total_streams(&self) -> usize {
        self.streams.iter().sum()
    }
    /// First stream index of each user.
    pub fn stream_offsets(&self) -> Vec<usize> {
        offsets(&self.streams)
    }
}

/// Everything an uplink designer needs for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkSystem {
    pub h_mr: Vec<CMat>,
    pub h_rb: CMat,
    pub r_n: CMat,
    pub r_xi: CMat,
    pub streams: Vec<usize>,
    pub p_s: Vec<f64>,
    pub p_r: f64,
}

impl UplinkSystem {
    pub fn new(dims: &SystemDims, ch: &ChannelSet, noise: &NoiseModel, budget: &PowerBudget) -> Result<Self> {
        if dims.direction != Direction::Uplink {
            return invalid("uplink system built from downlink dimensions");
        }
        dims.validate()?;
        ch.check(dims)?;
        if noise.destination.len() != 1 || budget.source.len() != dims.num_users() {
            return invalid("uplink needs one destination covariance and one source budget per user");
        }
        let s = Self {
            h_mr: ch.first_hop.clone(),
            h_rb: ch.second_hop[0].clone(),
            r_n: noise.relay.clone(),
            r_xi: noise.destination[0].clone(),
            streams: dims.streams(),
            p_s: budget.source.clone(),
            p_r: budget.relay,
        };
        s.validate()?;
        Ok(s)
    }

    /// Noise from `P_s / sigma_n^2` (with `P_s` the total source power, split
    /// evenly as `P_s,k = P_s / K`) and `P_r / sigma_xi^2`.
    pub fn from_snr(dims: &SystemDims, ch: &ChannelSet, snr1_db: f64, snr2_db: f64, p_s: f64, p_r: f64) -> Result<Self> {
        let k = dims.num_users();
        let noise = NoiseModel {
            relay: snr_to_noise(snr1_db, p_s, dims.n_relay)?,
            destination: vec![snr_to_noise(snr2_db, p_r, dims.n_base)?],
        };
        let budget = PowerBudget { source: vec![p_s / k.max(1) as f64; k], relay: p_r };
        Self::new(dims, ch, &noise, &budget)
    }

    pub fn validate(&self) -> Result<()> {
        let (nb, nr) = self.h_rb.shape();
        let k = self.h_mr.len();
        if k == 0 || self.p_s.len() != k || self.streams.len() != k {
            return invalid("inconsistent user count");
        }
        for h in &self.h_mr {
            if h.nrows() != nr {
                return invalid(format!("h_mr has {} rows, expected N_R = {nr}", h.nrows()));
            }
            ensure_finite(h, "h_mr")?;
        }
        ensure_finite(&self.h_rb, "h_rb")?;
        check_cov(&self.r_n, nr, "relay noise covariance")?;
        check_cov(&self.r_xi, nb, "destination noise covariance")?;
        for &p in &self.p_s {
            check_power(p, "source power")?;
        }
        check_power(self.p_r, "relay power")?;
        let l = self.total_streams();
        if self.streams.contains(&0) || l > nb.min(nr) {
            return invalid(format!("total streams {l} must be positive and at most min(N_B, N_R)"));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.h_mr.len()
    }
    pub fn n_base(&self) -> usize {
        self.h_rb.nrows()
    }
    pub fn n_relay(&self) -> usize {
        self.h_rb.ncols()
    }
    pub fn total_streams(&self) -> usize {
        self.streams.iter().sum()
    }
    pub fn stream_offsets(&self) -> Vec<usize> {
        offsets(&self.streams)
    }
    /// `[H_MR,1 .. H_MR,K]`, `N_R x sum N_M,k`.
    pub fn h_mr_stacked(&self) -> CMat {
        crate::linalg::hstack(&self.h_mr).expect("row counts validated")
    }
}

fn offsets(streams: &[usize]) -> Vec<usize> {
    streams
        .iter()
        .scan(0, |acc, &l| {
            let o = *acc;
            *acc += l;
            Some(o)
        })
        .collect()
}
