//! Domain types and closed-form physical-layer quantities.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::trace::IterationTrace;

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// Relative power below which a user's signal at another receiver is treated
/// as absent, so that receiver has nothing to cancel (zero-forced beams).
pub const NEGLIGIBLE_CROSS_POWER: f64 = 1e-12;
/// Tolerance used when checking whole iterates for feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// One channel realization.
///
/// `h_r[k]` and `h_d[k]` are stored as column vectors; the row channels used
/// in the signal model are their conjugate transposes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS to IRS, M x N.
    pub g: CMat,
    /// IRS to user k, length M.
    pub h_r: Vec<CVec>,
    /// BS to user k, length N.
    pub h_d: Vec<CVec>,
    pub d_direct: Vec<f64>,
    pub d_irs_user: Vec<f64>,
    pub d_bs_irs: f64,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.h_d.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.g.ncols().max(self.h_d.first().map_or(0, |h| h.len()))
    }

    pub fn num_elements(&self) -> usize {
        self.g.nrows()
    }

    /// Same direct links with the IRS removed.
    pub fn without_irs(&self) -> Self {
        let n = self.num_antennas();
        Self {
            g: CMat::zeros(0, n),
            h_r: vec![CVec::zeros(0); self.num_users()],
            h_d: self.h_d.clone(),
            d_direct: self.d_direct.clone(),
            d_irs_user: self.d_irs_user.clone(),
            d_bs_irs: self.d_bs_irs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_users();
        let (m, n) = (self.g.nrows(), self.num_antennas());
        if k == 0 {
            return Err(Error::Dimension("channel set has no users".into()));
        }
        if m > 0 && self.g.ncols() != n {
            return Err(Error::Dimension("G has the wrong number of columns".into()));
        }
        if self.h_r.len() != k || self.d_direct.len() != k || self.d_irs_user.len() != k {
            return Err(Error::Dimension("per-user channel lists differ in length".into()));
        }
        for i in 0..k {
            if self.h_d[i].len() != n {
                return Err(Error::Dimension(format!("h_d[{i}] has length {}, expected {n}", self.h_d[i].len())));
            }
            if self.h_r[i].len() != m {
                return Err(Error::Dimension(format!("h_r[{i}] has length {}, expected {m}", self.h_r[i].len())));
            }
        }
        let finite = self.g.iter().chain(self.h_r.iter().flatten()).chain(self.h_d.iter().flatten())
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::Domain("channel set contains non-finite entries".into()));
        }
        Ok(())
    }

    pub fn check_against(&self, cfg: &SystemConfig) -> Result<()> {
        self.validate()?;
        if self.num_users() != cfg.num_users
            || self.num_antennas() != cfg.num_antennas
            || self.num_elements() != cfg.num_elements
        {
            return Err(Error::Dimension(format!(
                "channels are K={} N={} M={}, config says K={} N={} M={}",
                self.num_users(), self.num_antennas(), self.num_elements(),
                cfg.num_users, cfg.num_antennas, cfg.num_elements
            )));
        }
        Ok(())
    }
}

/// IRS phases, unit amplitude per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShift {
    pub theta: Vec<f64>,
}

impl PhaseShift {
    /// Wraps every angle into [0, 2π).
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta: theta.into_iter().map(wrap_angle).collect() }
    }

    pub fn zeros(m: usize) -> Self {
        Self { theta: vec![0.0; m] }
    }

    /// Diagonal of Θ, e^{jθ_m}.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }

    /// Lifted vector ū = [u; 1] with u_m = e^{-jθ_m}.
    pub fn lifted(&self) -> CVec {
        let m = self.theta.len();
        CVec::from_fn(m + 1, |i, _| {
            if i < m { Complex64::from_polar(1.0, -self.theta[i]) } else { Complex64::new(1.0, 0.0) }
        })
    }

    /// Inverse of [`PhaseShift::lifted`] for any vector with a nonzero last entry.
    pub fn from_lifted(u_bar: &CVec) -> Self {
        let m = u_bar.len() - 1;
        let ref_arg = u_bar[m].arg();
        Self::new((0..m).map(|i| ref_arg - u_bar[i].arg()).collect())
    }
}

pub fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w >= TAU { 0.0 } else { w }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub w: Vec<CVec>,
    pub lifted: Option<Vec<CMat>>,
}

impl Beamformers {
    pub fn new(w: Vec<CVec>) -> Self {
        Self { w, lifted: None }
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        Self::new(vec![CVec::zeros(n); k])
    }

    pub fn outer_products(&self) -> Vec<CMat> {
        self.w.iter().map(|w| w * w.adjoint()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit {
    pub rho: Vec<f64>,
}

impl PowerSplit {
    pub fn uniform(k: usize, rho: f64) -> Self {
        Self { rho: vec![rho; k] }
    }
}

/// SIC decoding order. `pos[k]` is the zero-based position of user k in the
/// decoding sequence; users with a larger position are decoded later and are
/// residual interference to user k.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOrder {
    pub pos: Vec<usize>,
}

impl DecodingOrder {
    pub fn identity(k: usize) -> Self {
        Self { pos: (0..k).collect() }
    }

    pub fn from_positions(pos: Vec<usize>) -> Result<Self> {
        let o = Self { pos };
        if !o.is_valid() {
            return Err(Error::OrderContract(format!("{:?} is not a permutation", o.pos)));
        }
        Ok(o)
    }

    /// Builds the order from the decoding sequence (first decoded user first).
    pub fn from_sequence(seq: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; seq.len()];
        for (p, &k) in seq.iter().enumerate() {
            if k >= seq.len() || pos[k] != usize::MAX {
                return Err(Error::OrderContract(format!("{seq:?} is not a permutation")));
            }
            pos[k] = p;
        }
        Ok(Self { pos })
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.pos.len()];
        for &p in &self.pos {
            if p >= seen.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        true
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn position(&self, k: usize) -> usize {
        self.pos[k]
    }

    /// Users in decoding sequence.
    pub fn sequence(&self) -> Vec<usize> {
        let mut seq: Vec<usize> = (0..self.pos.len()).collect();
        seq.sort_by_key(|&k| self.pos[k]);
        seq
    }

    /// Users decoded after k.
    pub fn later(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let pk = self.pos[k];
        (0..self.pos.len()).filter(move |&j| self.pos[j] > pk)
    }

    /// All ordered pairs (k, k̄) with s(k) < s(k̄).
    pub fn sic_pairs(&self) -> Vec<(usize, usize)> {
        let seq = self.sequence();
        let mut out = Vec::new();
        for a in 0..seq.len() {
            for b in a + 1..seq.len() {
                out.push((seq[a], seq[b]));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub order: DecodingOrder,
    pub beams: Beamformers,
    pub split: PowerSplit,
    pub phases: PhaseShift,
    pub objective: f64,
    pub trace: IterationTrace,
    pub converged: bool,
}

fn check_user(channels: &ChannelSet, k: usize) -> Result<()> {
    if k >= channels.num_users() {
        return Err(Error::Dimension(format!("user {k} out of range")));
    }
    Ok(())
}

/// h_k = (h_{r,k}ᴴ Θ G + h_{d,k}ᴴ)ᴴ.
pub fn effective_channel(channels: &ChannelSet, phases: &PhaseShift, k: usize) -> Result<CVec> {
    check_user(channels, k)?;
    let m = channels.num_elements();
    if phases.theta.len() != m {
        return Err(Error::Dimension(format!("{} phases for {m} elements", phases.theta.len())));
    }
    if channels.h_d[k].len() != channels.num_antennas() || channels.h_r[k].len() != m {
        return Err(Error::Dimension(format!("user {k} channel lengths do not match")));
    }
    Ok(effective_channel_unchecked(channels, &phases.coefficients(), k))
}

pub(crate) fn effective_channel_unchecked(channels: &ChannelSet, coeff: &[Complex64], k: usize) -> CVec {
    // row r = Σ_m conj(h_r[m]) e^{jθ_m} G[m,:] + conj(h_d); h_k = conj(r)
    let mut h = channels.h_d[k].clone();
    for (mi, c) in coeff.iter().enumerate() {
        let s = (channels.h_r[k][mi].conj() * c).conj();
        for n in 0..h.len() {
            h[n] += s * channels.g[(mi, n)].conj();
        }
    }
    h
}

pub fn effective_channels(channels: &ChannelSet, phases: &PhaseShift) -> Result<Vec<CVec>> {
    (0..channels.num_users()).map(|k| effective_channel(channels, phases, k)).collect()
}

/// ‖h_k‖² for every user.
pub fn combined_gains(channels: &ChannelSet, phases: &PhaseShift) -> Result<Vec<f64>> {
    Ok(effective_channels(channels, phases)?.iter().map(|h| h.norm_squared()).collect())
}

/// P[(k, j)] = |h_kᴴ w_j|², power of beam j received by user k.
pub fn received_powers(h: &[CVec], w: &[CVec]) -> DMatrix<f64> {
    DMatrix::from_fn(h.len(), w.len(), |k, j| h[k].dotc(&w[j]).norm_sqr())
}

pub(crate) fn sinr_from(p: &DMatrix<f64>, rho: f64, order: &DecodingOrder, cfg: &SystemConfig, k: usize) -> f64 {
    cross_sinr_from(p, rho, order, cfg, k, k)
}

pub(crate) fn cross_sinr_from(
    p: &DMatrix<f64>,
    rho_kbar: f64,
    order: &DecodingOrder,
    cfg: &SystemConfig,
    k: usize,
    kbar: usize,
) -> f64 {
    let interf: f64 = order.later(k).map(|j| p[(kbar, j)]).sum();
    rho_kbar * p[(kbar, k)] / (rho_kbar * interf + rho_kbar * cfg.noise_antenna_var + cfg.noise_id_var)
}

pub(crate) fn harvested_from(p: &DMatrix<f64>, rho: f64, cfg: &SystemConfig, k: usize) -> f64 {
    let total: f64 = p.row(k).iter().sum();
    cfg.eh_efficiency * (1.0 - rho) * (total + cfg.noise_antenna_var)
}

fn powers_for(channels: &ChannelSet, phases: &PhaseShift, beams: &Beamformers) -> Result<DMatrix<f64>> {
    let h = effective_channels(channels, phases)?;
    if beams.w.len() != h.len() || beams.w.iter().any(|w| w.len() != channels.num_antennas()) {
        return Err(Error::Dimension("beamformer dimensions do not match the channels".into()));
    }
    Ok(received_powers(&h, &beams.w))
}

/// SINR of user k decoding its own message.
pub fn sinr(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    phases: &PhaseShift,
    beams: &Beamformers,
    split: &PowerSplit,
    order: &DecodingOrder,
    k: usize,
) -> Result<f64> {
    check_user(channels, k)?;
    let p = powers_for(channels, phases, beams)?;
    Ok(sinr_from(&p, split.rho[k], order, cfg, k))
}

/// SINR at user k̄ when decoding user k's message; requires s(k) ≤ s(k̄).
#[allow(clippy::too_many_arguments)]
pub fn cross_sinr(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    phases: &PhaseShift,
    beams: &Beamformers,
    split: &PowerSplit,
    order: &DecodingOrder,
    k: usize,
    kbar: usize,
) -> Result<f64> {
    check_user(channels, k)?;
    check_user(channels, kbar)?;
    if order.position(k) > order.position(kbar) {
        return Err(Error::OrderContract(format!("user {k} is decoded after user {kbar}")));
    }
    let p = powers_for(channels, phases, beams)?;
    Ok(cross_sinr_from(&p, split.rho[kbar], order, cfg, k, kbar))
}

pub fn harvested_power(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    phases: &PhaseShift,
    beams: &Beamformers,
    split: &PowerSplit,
    k: usize,
) -> Result<f64> {
    check_user(channels, k)?;
    let p = powers_for(channels, phases, beams)?;
    Ok(harvested_from(&p, split.rho[k], cfg, k))
}

pub fn total_power(beams: &Beamformers) -> f64 {
    beams.w.iter().map(|w| w.norm_squared()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ConstraintKind {
    Qos,
    Sic,
    Energy,
    SplitBounds,
    PhaseBounds,
    Order,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    /// User, element or pair the constraint belongs to.
    pub index: usize,
    pub other: Option<usize>,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub tol: f64,
    pub checks: Vec<ConstraintCheck>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn min_margin(&self) -> f64 {
        self.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }

    /// Smallest margin over the QoS, SIC and energy rows only.
    pub fn min_service_margin(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| matches!(c.kind, ConstraintKind::Qos | ConstraintKind::Sic | ConstraintKind::Energy))
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn violated_kinds(&self) -> BTreeSet<ConstraintKind> {
        self.violations().map(|c| c.kind).collect()
    }
}

/// True when user k's signal at k̄ is too weak to matter, so k̄ has nothing to
/// cancel and the SIC condition for the pair is vacuous.
pub(crate) fn sic_pair_vacuous(p: &DMatrix<f64>, cfg: &SystemConfig, k: usize, kbar: usize) -> bool {
    k != kbar && p[(kbar, k)] <= NEGLIGIBLE_CROSS_POWER * cfg.noise_antenna_var
}

/// Evaluates every original constraint with a normalized signed margin.
///
/// Margins: QoS `SINR/γ − 1`; SIC `SINR_{k̄←k}/SINR_k − 1`; energy `E/e − 1`;
/// split `min(ρ, 1 − ρ)`; phase `min(θ, 2π − θ)`; order `0` if valid else `−1`.
#[allow(clippy::too_many_arguments)]
pub fn check_parts(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    phases: &PhaseShift,
    beams: &Beamformers,
    split: &PowerSplit,
    order: &DecodingOrder,
    tol: f64,
) -> Result<FeasibilityReport> {
    let k_users = channels.num_users();
    if split.rho.len() != k_users || order.len() != k_users {
        return Err(Error::Dimension("split or order length does not match the user count".into()));
    }
    let p = powers_for(channels, phases, beams)?;
    let mut checks = Vec::new();
    let mut push = |kind, index, other, margin: f64| {
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        checks.push(ConstraintCheck { kind, index, other, margin, passed: margin >= -tol });
    };
    let order_ok = order.is_valid();
    for k in 0..k_users {
        let s = sinr_from(&p, split.rho[k], order, cfg, k);
        push(ConstraintKind::Qos, k, None, s / cfg.sinr_threshold - 1.0);
    }
    if order_ok {
        for (k, kbar) in order.sic_pairs() {
            if sic_pair_vacuous(&p, cfg, k, kbar) {
                continue;
            }
            let own = sinr_from(&p, split.rho[k], order, cfg, k);
            let cross = cross_sinr_from(&p, split.rho[kbar], order, cfg, k, kbar);
            let margin = if own > 0.0 { cross / own - 1.0 } else { cross };
            push(ConstraintKind::Sic, k, Some(kbar), margin);
        }
    }
    for k in 0..k_users {
        let e = harvested_from(&p, split.rho[k], cfg, k);
        push(ConstraintKind::Energy, k, None, e / cfg.energy_threshold - 1.0);
    }
    for (k, &r) in split.rho.iter().enumerate() {
        push(ConstraintKind::SplitBounds, k, None, r.min(1.0 - r));
    }
    for (m, &t) in phases.theta.iter().enumerate() {
        push(ConstraintKind::PhaseBounds, m, None, t.min(TAU - t));
    }
    push(ConstraintKind::Order, 0, None, if order_ok { 0.0 } else { -1.0 });
    Ok(FeasibilityReport { tol, checks })
}

pub fn check_feasibility(
    channels: &ChannelSet,
    solution: &Solution,
    cfg: &SystemConfig,
    tol: f64,
) -> Result<FeasibilityReport> {
    check_parts(cfg, channels, &solution.phases, &solution.beams, &solution.split, &solution.order, tol)
}
