//! Suboptimal reference designs for both link directions.

use std::fmt;
use std::str::FromStr;

use crate::channel::{DownlinkSystem, UplinkSystem};
use crate::downlink::{self, Alg1Options, DownlinkDesign};
use crate::error::{Error, Result};
use crate::linalg::{solve_right, vstack, CMat};
use crate::relay::{saturating_scale, scale, RelayProblem};
use crate::uplink::{self, UplinkDesign};

/// Alternations of the first-hop multiuser design in the uplink separate scheme.
pub const FIRST_HOP_INNER_ITERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// Identity-proportional precoder and relay matrix, LMMSE receiver.
    DirectAf,
    /// LMMSE equalization of hop 1 at the relay, then of hop 2 at the receiver.
    PerHop,
    /// Each hop designed on its own.
    SeparateLmmse,
    /// Identity-proportional source, jointly designed relay and receiver.
    NoSourcePrecoder,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::DirectAf, Self::PerHop, Self::SeparateLmmse, Self::NoSourcePrecoder];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DirectAf => "direct_af",
            Self::PerHop => "per_hop_equalization",
            Self::SeparateLmmse => "separate_lmmse",
            Self::NoSourcePrecoder => "no_source_precoder",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    /// Also accepts `per_hop` for [`BaselineKind::PerHop`].
    fn from_str(s: &str) -> Result<Self> {
        if s == "per_hop" {
            return Ok(Self::PerHop);
        }
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown baseline '{s}'")))
    }
}

/// `[A; 0]` padded to `rows` rows.
fn pad_rows(a: &CMat, rows: usize) -> Result<CMat> {
    if a.nrows() == rows {
        return Ok(a.clone());
    }
    vstack(&[a.clone(), CMat::zeros(rows - a.nrows(), a.ncols())])
}

pub fn downlink_baseline(kind: BaselineKind, sys: &DownlinkSystem) -> Result<DownlinkDesign> {
    sys.validate()?;
    match kind {
        BaselineKind::DirectAf => downlink::identity_init(sys),
        BaselineKind::PerHop => {
            let t = downlink::identity_init(sys)?.t;
            let rr = downlink::received_covariance(&t, sys);
            let w1 = solve_right(&(&sys.h_br * &t).adjoint(), &rr)?;
            let w = pad_rows(&w1, sys.n_relay())?;
            let w = scale(&w, saturating_scale(&w, &rr, sys.p_r));
            let g = downlink::update_equalizers(&w, &t, sys)?;
            Ok(DownlinkDesign { t, w, g, lambda: 0.0 })
        }
        BaselineKind::SeparateLmmse => downlink::separate_lmmse_init(sys),
        BaselineKind::NoSourcePrecoder => {
            let opts = Alg1Options { update_precoder: false, ..Default::default() };
            Ok(downlink::run_algorithm1(sys, &opts)?.0)
        }
    }
}

pub fn uplink_baseline(kind: BaselineKind, sys: &UplinkSystem) -> Result<UplinkDesign> {
    sys.validate()?;
    let (p, f) = match kind {
        BaselineKind::DirectAf => uplink::identity_init(sys)?,
        BaselineKind::PerHop => {
            let (p, _) = uplink::identity_init(sys)?;
            let (w1, rx) = first_hop_receiver(&p, sys)?;
            let f = pad_rows(&w1, sys.n_relay())?;
            (p, scale(&f, saturating_scale(&f, &rx, sys.p_r)))
        }
        BaselineKind::SeparateLmmse => separate_lmmse_uplink(sys)?,
        BaselineKind::NoSourcePrecoder => {
            let (p, _) = uplink::identity_init(sys)?;
            let f = uplink::forwarding_closed_form(&p, sys)?.f;
            (p, f)
        }
    };
    let b = uplink::equalizer_b(&f, &p, sys)?;
    Ok(UplinkDesign { p, f, b, mu_f: 0.0, relaxation_gap: 0.0 })
}

/// LMMSE estimate of all streams at the relay, `(H_MR P)^H R_x^{-1}`, and `R_x`.
fn first_hop_receiver(p: &[CMat], sys: &UplinkSystem) -> Result<(CMat, CMat)> {
    let rx = uplink::relay_input_covariance(p, sys)?;
    let a: Vec<CMat> = sys.h_mr.iter().zip(p).map(|(h, pk)| h * pk).collect();
    let a = crate::linalg::hstack(&a)?;
    Ok((solve_right(&a.adjoint(), &rx)?, rx))
}

/// Hop 1 as a multiuser uplink to the relay (alternating the relay's LMMSE
/// receiver with per-user precoders), hop 2 as a point-to-point link carrying
/// the relay's stream estimates, combined as `F = F2 F1` scaled to `P_r`.
fn separate_lmmse_uplink(sys: &UplinkSystem) -> Result<(Vec<CMat>, CMat)> {
    let (mut p, _) = uplink::identity_init(sys)?;
    let offs = sys.stream_offsets();
    for _ in 0..FIRST_HOP_INNER_ITERS {
        let (f1, _) = first_hop_receiver(&p, sys)?;
        // without the relay constraint the first-hop MSE decouples over users
        p = sys
            .h_mr
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let lk = sys.streams[k];
                let fh = &f1 * h;
                let rows = fh.rows(offs[k], lk).into_owned();
                let prob = RelayProblem {
                    gram: fh.adjoint() * &fh,
                    cross: rows.adjoint(),
                    input_cov: CMat::identity(lk, lk),
                    power: sys.p_s[k],
                };
                Ok(prob.solve()?.w)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    let (f1, rx) = first_hop_receiver(&p, sys)?;
    let l = sys.total_streams();
    let f2 = downlink::point_to_point_precoder(&sys.h_rb, &sys.r_xi, l, sys.p_r)?;
    let f = f2 * f1;
    let f = scale(&f, saturating_scale(&f, &rx, sys.p_r));
    Ok((p, f))
}
