//! Two-stage joint design: decoding order from the gain-maximizing phases,
//! then alternating beamforming, power-split and phase-shift updates.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::baselines::zero_forcing_directions;
use crate::beamforming::{
    allocate_powers, initial_beamformers, lifted_min_margin, randomized_rank_one, restore_feasibility, solve_beamforming,
    BeamformingInput,
};
use crate::conic::DEFAULT_RANK_TOL;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{
    check_parts, effective_channels, received_powers, total_power, Beamformers, CMat, ChannelSet, DecodingOrder,
    PhaseShift, PowerSplit, Solution, FEASIBILITY_TOL,
};
use crate::phase_shift::{solve_phase_shift, PhaseShiftInput};
use crate::power_split::{solve_power_split, PsInput};
use crate::stage1::run_stage1;
use crate::trace::{IterationRecord, IterationTrace, SubproblemStatus};

/// Restoration programs allowed when looking for a feasible starting point.
pub const RESTORATION_STEPS: usize = 30;
pub const INITIAL_SPLIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamStrategy {
    /// Semidefinite program with the SIC surrogate.
    Sdp,
    /// Zero-forcing directions with LP power allocation.
    ZeroForcing,
}

#[derive(Debug, Clone)]
pub struct Stage2Options {
    pub max_iters: usize,
    pub eps: f64,
    pub randomization: usize,
    pub optimize_phases: bool,
    /// Keep the combined gains ascending along the decoding order during
    /// phase updates.
    pub preserve_order: bool,
    pub beams: BeamStrategy,
}

impl Stage2Options {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            max_iters: cfg.max_iters,
            eps: cfg.convergence_eps,
            randomization: cfg.randomization_count,
            optimize_phases: cfg.num_elements > 0,
            preserve_order: true,
            beams: BeamStrategy::Sdp,
        }
    }
}

fn status_of(e: &Error) -> SubproblemStatus {
    match e {
        Error::Infeasible(_) | Error::ScenarioInfeasible(_) => SubproblemStatus::Infeasible,
        _ => SubproblemStatus::NumericalFailure,
    }
}

struct Candidate {
    beams: Beamformers,
    lifted: Option<Vec<CMat>>,
    rank_ratio: f64,
}

#[allow(clippy::too_many_arguments)]
fn beam_step<R: Rng>(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    phases: &PhaseShift,
    split: &PowerSplit,
    order: &DecodingOrder,
    reference: &[CMat],
    strategy: BeamStrategy,
    randomization: usize,
    rng: &mut R,
) -> Result<Candidate> {
    let h = effective_channels(channels, phases)?;
    match strategy {
        BeamStrategy::Sdp => {
            let input = BeamformingInput::new(cfg, h, split.rho.clone(), order.clone(), reference.to_vec());
            let out = solve_beamforming(&input)?;
            let lifted = out.beams.lifted.clone();
            let rank_ratio = out.rank_ratios.iter().copied().fold(0.0, f64::max);
            let mut w = out.beams.w;
            let outer = |w: &[crate::model::CVec]| w.iter().map(|v| v * v.adjoint()).collect::<Vec<CMat>>();
            let feasible = lifted_min_margin(&input, &outer(&w)) >= 0.0;
            if let (Some(l), true) = (&lifted, rank_ratio > DEFAULT_RANK_TOL || !feasible) {
                if let Some(alt) = randomized_rank_one(&input, l, randomization, rng)? {
                    let power = |w: &[crate::model::CVec]| w.iter().map(|v| v.norm_squared()).sum::<f64>();
                    if !feasible || power(&alt) < power(&w) {
                        w = alt;
                    }
                }
            }
            Ok(Candidate { beams: Beamformers::new(w), lifted, rank_ratio })
        }
        BeamStrategy::ZeroForcing => {
            let dirs = zero_forcing_directions(&h)?;
            let input = BeamformingInput::new(cfg, h, split.rho.clone(), order.clone(), Vec::new());
            let w = allocate_powers(&input, &dirs)?.ok_or_else(|| Error::Infeasible("zero-forcing power allocation".into()))?;
            Ok(Candidate { beams: Beamformers::new(w), lifted: None, rank_ratio: 0.0 })
        }
    }
}

/// Alternating second stage from given phases and order. Returns the best
/// feasible iterate; `converged` is false when `max_iters` ran out.
pub fn run_stage2<R: Rng>(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    phases: PhaseShift,
    order: DecodingOrder,
    opts: &Stage2Options,
    rng: &mut R,
) -> Result<Solution> {
    let k_users = channels.num_users();
    let mut phases = phases;
    let mut split = PowerSplit::uniform(k_users, INITIAL_SPLIT);
    let optimize_phases = opts.optimize_phases && channels.num_elements() > 0;

    let mut reference: Vec<CMat> = Vec::new();
    let mut trace = IterationTrace::default();
    if opts.beams == BeamStrategy::Sdp {
        let h = effective_channels(channels, &phases)?;
        let mut input = BeamformingInput::new(cfg, h, split.rho.clone(), order.clone(), Vec::new());
        input.reference = initial_beamformers(&input)?;
        reference = restore_feasibility(&input, input.reference.clone(), RESTORATION_STEPS)?;
        trace.initial_objective = reference.iter().map(|w| w.trace().re).sum();
    }

    let mut incumbent: Option<(Beamformers, f64)> = None;
    let mut converged = false;
    let mut quiet_before = false;
    for r in 1..=opts.max_iters.max(1) {
        let start = Instant::now();
        let prev = incumbent.as_ref().map_or(trace.initial_objective, |(_, o)| *o);

        let mut rank_ratio = 0.0;
        let bf_status = match beam_step(cfg, channels, &phases, &split, &order, &reference, opts.beams, opts.randomization, rng) {
            Ok(c) => {
                rank_ratio = c.rank_ratio;
                let ok = check_parts(cfg, channels, &phases, &c.beams, &split, &order, FEASIBILITY_TOL)?.feasible();
                let obj = total_power(&c.beams);
                if ok && incumbent.as_ref().is_none_or(|(_, o)| obj <= *o) {
                    reference = c.beams.outer_products();
                    incumbent = Some((c.beams, obj));
                    SubproblemStatus::Accepted
                } else {
                    if incumbent.is_none() {
                        if let Some(l) = c.lifted {
                            reference = l;
                        }
                    }
                    SubproblemStatus::Rejected
                }
            }
            Err(e) => {
                if incumbent.is_none() && r == 1 && matches!(e, Error::Infeasible(_) | Error::ScenarioInfeasible(_)) {
                    return Err(Error::ScenarioInfeasible(format!("first beamforming solve: {e}")));
                }
                status_of(&e)
            }
        };

        let Some((beams, objective)) = incumbent.clone() else {
            log::debug!("iteration {r}: no incumbent, bf {bf_status:?}, rank {rank_ratio:.2e}");
            trace.records.push(IterationRecord {
                r,
                objective: prev,
                beamforming: bf_status,
                split: SubproblemStatus::Skipped,
                phase: SubproblemStatus::Skipped,
                min_margin: f64::NEG_INFINITY,
                max_rank_ratio: rank_ratio,
                ms: start.elapsed().as_secs_f64() * 1e3,
            });
            continue;
        };
        if trace.initial_objective == 0.0 {
            trace.initial_objective = objective;
        }

        let ps_status = {
            let p = received_powers(&effective_channels(channels, &phases)?, &beams.w);
            let input = PsInput::new(cfg, p, order.clone(), split.rho.clone());
            match solve_power_split(&input) {
                Ok(out) => {
                    if check_parts(cfg, channels, &phases, &beams, &out.split, &order, FEASIBILITY_TOL)?.feasible() {
                        split = out.split;
                        SubproblemStatus::Accepted
                    } else {
                        SubproblemStatus::Rejected
                    }
                }
                Err(e) => status_of(&e),
            }
        };

        let ph_status = if optimize_phases {
            let mut input = PhaseShiftInput::new(cfg, channels, &beams, &split, &order, &phases)?;
            input.preserve_order = opts.preserve_order;
            match solve_phase_shift(&input, opts.randomization, rng) {
                Ok(out) if out.stalled => SubproblemStatus::Stall,
                Ok(out) => {
                    if check_parts(cfg, channels, &out.phases, &beams, &split, &order, FEASIBILITY_TOL)?.feasible() {
                        phases = out.phases;
                        SubproblemStatus::Accepted
                    } else {
                        SubproblemStatus::Rejected
                    }
                }
                Err(e) => status_of(&e),
            }
        } else {
            SubproblemStatus::Skipped
        };

        let report = check_parts(cfg, channels, &phases, &beams, &split, &order, FEASIBILITY_TOL)?;
        trace.records.push(IterationRecord {
            r,
            objective,
            beamforming: bf_status,
            split: ps_status,
            phase: ph_status,
            min_margin: report.min_service_margin(),
            max_rank_ratio: rank_ratio,
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        log::debug!(
            "iteration {r}: objective {objective:.6e}, bf {bf_status:?}, ps {ps_status:?}, ph {ph_status:?}, rank {rank_ratio:.2e}"
        );
        // a rejected beamforming step leaves the objective unchanged without
        // saying anything about convergence; it needs a second quiet pass
        let quiet = prev > 0.0 && prev.is_finite() && (prev - objective) / prev < opts.eps;
        if quiet && r > 1 && (bf_status == SubproblemStatus::Accepted || quiet_before) {
            converged = true;
            break;
        }
        quiet_before = quiet;
    }

    let (beams, objective) = incumbent.ok_or_else(|| Error::ScenarioInfeasible("no feasible beamformers found".into()))?;
    Ok(Solution { order, beams, split, phases, objective, trace, converged })
}

/// Stage 1 followed by the alternating stage with the configured options.
pub fn run_jdbpr<R: Rng>(cfg: &SystemConfig, channels: &ChannelSet, rng: &mut R) -> Result<Solution> {
    channels.check_against(cfg)?;
    let (phases, order) = run_stage1(channels, cfg.randomization_count, rng)?;
    run_stage2(cfg, channels, phases, order, &Stage2Options::from_config(cfg), rng)
}

/// Order-of-magnitude cost r·(K·N^3.5 + (M+1)^3.5 + K), for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityEstimate {
    pub iterations: usize,
    pub beamforming: f64,
    pub phase_shift: f64,
    pub power_split: f64,
    pub total: f64,
}

pub fn complexity_estimate(cfg: &SystemConfig, iterations: usize) -> ComplexityEstimate {
    let k = cfg.num_users as f64;
    let beamforming = k * (cfg.num_antennas as f64).powf(3.5);
    let phase_shift = (cfg.num_elements as f64 + 1.0).powf(3.5);
    let power_split = k;
    let total = iterations as f64 * (beamforming + phase_shift + power_split);
    ComplexityEstimate { iterations, beamforming, phase_shift, power_split, total }
}
