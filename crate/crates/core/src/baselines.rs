//! Comparison algorithms built from the same subproblem solvers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::jdbpr::{run_jdbpr, run_stage2, BeamStrategy, Stage2Options};
use crate::model::{CMat, CVec, ChannelSet, DecodingOrder, PhaseShift, Solution};
use crate::stage1::{order_from_gains, run_stage1};

/// Largest user count for which every decoding order is tried.
pub const MAX_EXHAUSTIVE_USERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlgorithmId {
    JdbprOpt,
    ExJbprOpt,
    JdbprCom,
    JdbprZf,
    JdbpRan,
    NoIrs,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::JdbprOpt,
        AlgorithmId::ExJbprOpt,
        AlgorithmId::JdbprCom,
        AlgorithmId::JdbprZf,
        AlgorithmId::JdbpRan,
        AlgorithmId::NoIrs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::JdbprOpt => "JDBPR_OPT",
            Self::ExJbprOpt => "EX_JBPR_OPT",
            Self::JdbprCom => "JDBPR_COM",
            Self::JdbprZf => "JDBPR_ZF",
            Self::JdbpRan => "JDBP_RAN",
            Self::NoIrs => "NO_IRS",
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm '{s}'")))
    }
}

pub fn run_algorithm<R: Rng + Clone>(id: AlgorithmId, cfg: &SystemConfig, channels: &ChannelSet, rng: &mut R) -> Result<Solution> {
    match id {
        AlgorithmId::JdbprOpt => run_jdbpr(cfg, channels, rng),
        AlgorithmId::ExJbprOpt => run_exhaustive_order(cfg, channels, rng),
        AlgorithmId::JdbprCom => run_non_alternating(cfg, channels, rng),
        AlgorithmId::JdbprZf => run_zf(cfg, channels, rng),
        AlgorithmId::JdbpRan => run_random_phase(cfg, channels, rng),
        AlgorithmId::NoIrs => run_no_irs(cfg, channels, rng),
    }
}

/// All permutations of 0..k in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..k).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

/// Stage 2 under every decoding order, each from the same Stage-1 phases
/// and the same random stream. Order preservation is only enforced for
/// the order Stage 1 itself picks; the others start out violating it.
pub fn exhaustive_runs<R: Rng + Clone>(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    rng: &mut R,
) -> Result<Vec<(DecodingOrder, Result<Solution>)>> {
    let k = channels.num_users();
    if k > MAX_EXHAUSTIVE_USERS {
        return Err(Error::TooManyUsers { k, max: MAX_EXHAUSTIVE_USERS });
    }
    channels.check_against(cfg)?;
    let (phases, gain_order) = run_stage1(channels, cfg.randomization_count, rng)?;
    let mut out = Vec::new();
    for seq in permutations(k) {
        let order = DecodingOrder::from_sequence(&seq)?;
        let mut opts = Stage2Options::from_config(cfg);
        opts.preserve_order = order == gain_order;
        let mut r = rng.clone();
        let sol = run_stage2(cfg, channels, phases.clone(), order.clone(), &opts, &mut r);
        out.push((order, sol));
    }
    Ok(out)
}

/// Minimum-power feasible result over every decoding order.
pub fn run_exhaustive_order<R: Rng + Clone>(cfg: &SystemConfig, channels: &ChannelSet, rng: &mut R) -> Result<Solution> {
    exhaustive_runs(cfg, channels, rng)?
        .into_iter()
        .filter_map(|(_, s)| s.ok())
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .ok_or_else(|| Error::ScenarioInfeasible("no decoding order admits a feasible point".into()))
}

/// One beamforming, power-split and phase-shift pass without alternation.
pub fn run_non_alternating<R: Rng>(cfg: &SystemConfig, channels: &ChannelSet, rng: &mut R) -> Result<Solution> {
    channels.check_against(cfg)?;
    let (phases, order) = run_stage1(channels, cfg.randomization_count, rng)?;
    let opts = Stage2Options { max_iters: 1, ..Stage2Options::from_config(cfg) };
    run_stage2(cfg, channels, phases, order, &opts, rng)
}

/// Columns of H(HᴴH)⁻¹ for H = [h_1 … h_K], each normalized.
pub fn zero_forcing_directions(h: &[CVec]) -> Result<Vec<CVec>> {
    let k = h.len();
    let n = h.first().map_or(0, |v| v.len());
    if k == 0 || k > n {
        return Err(Error::RankDeficient);
    }
    let hm = CMat::from_columns(h);
    let gram = hm.adjoint() * &hm;
    let inv = gram.cholesky().ok_or(Error::RankDeficient)?.inverse();
    let w = hm * inv;
    w.column_iter()
        .map(|c| {
            let norm = c.norm();
            if norm > 0.0 && norm.is_finite() { Ok(c.unscale(norm)) } else { Err(Error::RankDeficient) }
        })
        .collect()
}

/// Zero-forcing beams with LP powers; split and phases still alternate and
/// the directions are recomputed for each new set of phases.
pub fn run_zf<R: Rng>(cfg: &SystemConfig, channels: &ChannelSet, rng: &mut R) -> Result<Solution> {
    channels.check_against(cfg)?;
    if channels.num_users() > channels.num_antennas() {
        return Err(Error::RankDeficient);
    }
    let (phases, order) = run_stage1(channels, cfg.randomization_count, rng)?;
    let opts = Stage2Options { beams: BeamStrategy::ZeroForcing, ..Stage2Options::from_config(cfg) };
    run_stage2(cfg, channels, phases, order, &opts, rng)
}

/// Phases drawn once uniformly and held fixed; the order follows the gains
/// under those phases.
pub fn run_random_phase<R: Rng>(cfg: &SystemConfig, channels: &ChannelSet, rng: &mut R) -> Result<Solution> {
    channels.check_against(cfg)?;
    let phases = PhaseShift::new((0..channels.num_elements()).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect());
    let order = order_from_gains(channels, &phases)?;
    let opts = Stage2Options { optimize_phases: false, ..Stage2Options::from_config(cfg) };
    run_stage2(cfg, channels, phases, order, &opts, rng)
}

/// The same scenario with the IRS removed.
pub fn run_no_irs<R: Rng>(cfg: &SystemConfig, channels: &ChannelSet, rng: &mut R) -> Result<Solution> {
    run_jdbpr(&cfg.without_irs(), &channels.without_irs(), rng)
}
