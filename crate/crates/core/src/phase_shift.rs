//! Phase-shift update at fixed beams and power split.
//!
//! With ū = [u; 1] the power of beam j at user k is affine in Ū = ūūᴴ, so
//! QoS, energy and the decoding-order rows are linear. The SIC rows reuse the
//! log-domain surrogate. The slack is maximized and unit-modulus phases are
//! recovered by Gaussian randomization, screening every candidate against the
//! original constraints.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::conic::{self, HermitianCoeff, HermitianSdpProblem, LinearExpr, Objective, SdpStatus, Sense};
use crate::error::{Error, Result};
use crate::model::{
    check_parts, combined_gains, effective_channels, received_powers, sic_pair_vacuous, Beamformers, CMat, CVec,
    ChannelSet, DecodingOrder, PhaseShift, PowerSplit,
};
use crate::sca::{SicSurrogate, Term, DEFAULT_SECANT_RATIO};
use crate::stage1::{build_gain_matrix, element_gains, randomized_candidates};

/// S = [[p pᴴ, p q*], [q pᴴ, 0]] and q for beam `from` received at user
/// `at`, with p = diag(h_{r,at}ᴴ) G w and q = h_{d,at}ᴴ w.
/// ūᴴSū + |q|² equals |(h_{r,at}ᴴ Θ G + h_{d,at}ᴴ) w|².
pub fn build_signal_lift(channels: &ChannelSet, beams: &Beamformers, from: usize, at: usize) -> Result<(CMat, Complex64)> {
    let m = channels.num_elements();
    if m == 0 {
        return Err(Error::Dimension("signal lift needs at least one IRS element".into()));
    }
    if from >= beams.w.len() || at >= channels.num_users() {
        return Err(Error::Dimension(format!("pair ({from}, {at}) out of range")));
    }
    let w = &beams.w[from];
    if w.len() != channels.num_antennas() {
        return Err(Error::Dimension("beam length does not match the antenna count".into()));
    }
    let p = element_gains(channels, at) * w;
    let q = channels.h_d[at].dotc(w);
    let mut s = CMat::zeros(m + 1, m + 1);
    s.view_mut((0, 0), (m, m)).copy_from(&(&p * p.adjoint()));
    for i in 0..m {
        s[(i, m)] = p[i] * q.conj();
        s[(m, i)] = q * p[i].conj();
    }
    Ok((s, q))
}

#[derive(Debug, Clone)]
pub struct PhaseShiftInput {
    pub cfg: SystemConfig,
    pub channels: ChannelSet,
    pub beams: Beamformers,
    pub split: PowerSplit,
    pub order: DecodingOrder,
    /// Incumbent phases, also the linearization point.
    pub reference: PhaseShift,
    /// `lifts[from][at]`, see [`build_signal_lift`].
    pub lifts: Vec<Vec<(CMat, Complex64)>>,
    /// Gain matrices R_k and direct gains ‖h_{d,k}‖².
    pub gains: Vec<CMat>,
    pub direct: Vec<f64>,
    /// Keep combined gains ascending along the decoding order.
    pub preserve_order: bool,
    pub secant_ratio: f64,
}

impl PhaseShiftInput {
    pub fn new(
        cfg: &SystemConfig,
        channels: &ChannelSet,
        beams: &Beamformers,
        split: &PowerSplit,
        order: &DecodingOrder,
        reference: &PhaseShift,
    ) -> Result<Self> {
        let k_users = channels.num_users();
        if beams.w.len() != k_users || split.rho.len() != k_users || order.len() != k_users {
            return Err(Error::Dimension("phase-shift input lists differ in length".into()));
        }
        if reference.theta.len() != channels.num_elements() {
            return Err(Error::Dimension("reference phases do not match the IRS size".into()));
        }
        if split.rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Domain("power split must lie strictly inside (0, 1)".into()));
        }
        let lifts = (0..k_users)
            .map(|from| (0..k_users).map(|at| build_signal_lift(channels, beams, from, at)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let gains = (0..k_users).map(|k| build_gain_matrix(channels, k)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            channels: channels.clone(),
            beams: beams.clone(),
            split: split.clone(),
            order: order.clone(),
            reference: reference.clone(),
            lifts,
            gains,
            direct: channels.h_d.iter().map(|h| h.norm_squared()).collect(),
            preserve_order: true,
            secant_ratio: DEFAULT_SECANT_RATIO,
        })
    }

    pub fn num_users(&self) -> usize {
        self.lifts.len()
    }

    /// C_k = σ² + δ²/ρ_k.
    pub fn c(&self, k: usize) -> f64 {
        self.cfg.noise_antenna_var + self.cfg.noise_id_var / self.split.rho[k]
    }

    /// Σ_j weight_j · (power of beam j at user `at`) as one affine term in Ū.
    fn power_expr(&self, u: usize, at: usize, beams: &[(usize, f64)]) -> LinearExpr {
        let dim = self.gains[0].nrows();
        let mut mat = CMat::zeros(dim, dim);
        let mut c = 0.0;
        for &(from, wgt) in beams {
            let (s, q) = &self.lifts[from][at];
            mat += s * Complex64::new(wgt, 0.0);
            c += wgt * q.norm_sqr();
        }
        LinearExpr::constant(c).mat(u, HermitianCoeff::Dense(mat))
    }

    /// Received powers P[(at, from)] at the phases.
    fn powers(&self, phases: &PhaseShift) -> Result<nalgebra::DMatrix<f64>> {
        Ok(received_powers(&effective_channels(&self.channels, phases)?, &self.beams.w))
    }
}

/// Value of ūᴴ A ū for Hermitian A.
pub fn lifted_value(a: &CMat, u_bar: &CVec) -> f64 {
    (u_bar.adjoint() * a * u_bar)[(0, 0)].re
}

const SLACK_FLOOR: f64 = -1.0;

pub struct P51 {
    pub problem: HermitianSdpProblem,
    pub lifted: usize,
    pub slack: usize,
}

/// Max-slack program in Ū, linearized at the reference phases.
pub fn build_p51(input: &PhaseShiftInput) -> Result<P51> {
    let k_users = input.num_users();
    let m = input.channels.num_elements();
    if m == 0 {
        return Err(Error::Dimension("phase-shift program needs at least one IRS element".into()));
    }
    if !input.order.is_valid() {
        return Err(Error::OrderContract("decoding order is not a permutation".into()));
    }
    let gamma = input.cfg.sinr_threshold;
    let p_ref = input.powers(&input.reference)?;
    let later = |k: usize| input.order.later(k).collect::<Vec<_>>();

    let mut p = HermitianSdpProblem::new();
    let u = p.add_matrix_var("U", m + 1);
    // the incumbent reaches s = 0, so the floor never binds at the optimum
    // and keeps the variable away from a free split
    let s = p.add_scalar_var("slack", SLACK_FLOOR, f64::INFINITY);
    p.objective = Objective::Maximize(LinearExpr::new().scalar(s, 1.0));
    for i in 0..=m {
        p.constrain(LinearExpr::new().mat(u, HermitianCoeff::diag_unit(i)), Sense::Eq, 1.0, format!("diag {i}"));
    }

    for k in 0..k_users {
        // (P_kk − γ Σ_later P_kj − γC_k) / n_k ≥ s
        let lk = later(k);
        let scale = gamma * (lk.iter().map(|&j| p_ref[(k, j)]).sum::<f64>() + input.c(k));
        let mut terms = vec![(k, 1.0)];
        terms.extend(lk.iter().map(|&j| (j, -gamma)));
        let e = input.power_expr(u, k, &terms).plus_const(-gamma * input.c(k)).scaled(1.0 / scale).scalar(s, -1.0);
        let c = e.constant;
        p.constrain(LinearExpr { constant: 0.0, ..e }, Sense::Ge, -c, format!("qos {k}"));
    }

    for k in 0..k_users {
        // η(1−ρ)(Σ_j P_kj + σ²)/e − 1 ≥ s
        let all: Vec<(usize, f64)> = (0..k_users).map(|j| (j, 1.0)).collect();
        let gain = input.cfg.eh_efficiency * (1.0 - input.split.rho[k]) / input.cfg.energy_threshold;
        let e = input
            .power_expr(u, k, &all)
            .plus_const(input.cfg.noise_antenna_var)
            .scaled(gain)
            .scalar(s, -1.0);
        let c = e.constant;
        p.constrain(LinearExpr { constant: 0.0, ..e }, Sense::Ge, 1.0 - c, format!("energy {k}"));
    }

    for (k, kbar) in input.order.sic_pairs() {
        if sic_pair_vacuous(&p_ref, &input.cfg, k, kbar) {
            continue;
        }
        let lk = later(k);
        let ones: Vec<(usize, f64)> = lk.iter().map(|&j| (j, 1.0)).collect();
        let sum_at = |at: usize| lk.iter().map(|&j| p_ref[(at, j)]).sum::<f64>();
        let sur = SicSurrogate {
            signal: Term { expr: input.power_expr(u, k, &[(k, 1.0)]), at_ref: p_ref[(k, k)] },
            own_interference: Term { expr: input.power_expr(u, k, &ones).plus_const(input.c(k)), at_ref: sum_at(k) + input.c(k) },
            own_floor: input.c(k),
            cross: Term { expr: input.power_expr(u, kbar, &[(k, 1.0)]), at_ref: p_ref[(kbar, k)] },
            other_interference: Term {
                expr: input.power_expr(u, kbar, &ones).plus_const(input.c(kbar)),
                at_ref: sum_at(kbar) + input.c(kbar),
            },
        };
        sur.add_to(&mut p, input.secant_ratio, 0.0, Some((s, 1.0)), &format!("sic {k}->{kbar}"))?;
    }

    if input.preserve_order {
        let g_ref = combined_gains(&input.channels, &input.reference)?;
        for pair in input.order.sequence().windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let scale = (g_ref[a] + g_ref[b]).max(f64::MIN_POSITIVE);
            let diff = (&input.gains[b] - &input.gains[a]) * Complex64::new(1.0 / scale, 0.0);
            let c = (input.direct[b] - input.direct[a]) / scale;
            p.constrain(LinearExpr::new().mat(u, HermitianCoeff::Dense(diff)), Sense::Ge, -c, format!("order {a}<{b}"));
        }
    }
    Ok(P51 { problem: p, lifted: u, slack: s })
}

#[derive(Debug, Clone)]
pub struct PhaseShiftOutput {
    pub phases: PhaseShift,
    /// No randomized candidate passed screening; `phases` is the incumbent.
    pub stalled: bool,
    /// Optimal slack of the lifted program, if it was solved.
    pub slack: Option<f64>,
    /// Smallest QoS, SIC or energy margin at the returned phases.
    pub min_margin: f64,
    pub feasible_candidates: usize,
}

/// Gains ascending along the order, up to relative round-off.
pub fn respects_order(channels: &ChannelSet, phases: &PhaseShift, order: &DecodingOrder) -> Result<bool> {
    let g = combined_gains(channels, phases)?;
    Ok(order.sequence().windows(2).all(|w| g[w[1]] >= g[w[0]] - 1e-9 * g[w[0]].abs()))
}

/// Smallest service margin at the phases when every original constraint
/// holds with nonnegative margin (and the order is kept if required).
pub fn screen(input: &PhaseShiftInput, phases: &PhaseShift) -> Option<f64> {
    let report = check_parts(&input.cfg, &input.channels, phases, &input.beams, &input.split, &input.order, 0.0).ok()?;
    if !report.feasible() {
        return None;
    }
    if input.preserve_order && !respects_order(&input.channels, phases, &input.order).ok()? {
        return None;
    }
    Some(report.min_service_margin())
}

/// Randomizes around a lifted matrix and keeps the screened candidate with
/// the largest margin; ties keep the earliest. Falls back to the incumbent.
pub fn select_candidate<R: Rng>(input: &PhaseShiftInput, u_bar: &CMat, t: usize, rng: &mut R) -> PhaseShiftOutput {
    let candidates = randomized_candidates(u_bar, t.max(1), rng);
    let scored: Vec<(usize, f64)> =
        candidates.par_iter().enumerate().filter_map(|(i, c)| screen(input, c).map(|m| (i, m))).collect();
    let best = scored.iter().copied().fold(None, |acc: Option<(usize, f64)>, (i, m)| match acc {
        Some((_, bm)) if bm >= m => acc,
        _ => Some((i, m)),
    });
    match best {
        Some((i, m)) => PhaseShiftOutput {
            phases: candidates[i].clone(),
            stalled: false,
            slack: None,
            min_margin: m,
            feasible_candidates: scored.len(),
        },
        None => PhaseShiftOutput {
            phases: input.reference.clone(),
            stalled: true,
            slack: None,
            min_margin: screen(input, &input.reference).unwrap_or(f64::NEG_INFINITY),
            feasible_candidates: 0,
        },
    }
}

/// Solves the lifted program and randomizes `t` candidates from it.
pub fn solve_phase_shift<R: Rng>(input: &PhaseShiftInput, t: usize, rng: &mut R) -> Result<PhaseShiftOutput> {
    let built = build_p51(input)?;
    let sol = conic::solve(&built.problem, conic::DEFAULT_TOL)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => return Err(Error::Infeasible("phase-shift program".into())),
        SdpStatus::NumericalFailure => return Err(Error::NumericalFailure("phase-shift program".into())),
    }
    let mut out = select_candidate(input, &sol.matrices[built.lifted], t, rng);
    out.slack = Some(sol.scalars[built.slack]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{allocate_powers, BeamformingInput};
    use crate::sca::log_tangent;
    use crate::stage1::order_from_gains;
    use crate::testutil::{random_channels, random_cvec, random_psd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_phases<R: Rng>(rng: &mut R, m: usize) -> PhaseShift {
        PhaseShift::new((0..m).map(|_| rng.random::<f64>() * TAU).collect())
    }

    #[test]
    fn lift_reproduces_the_unlifted_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = random_channels(&mut rng, 3, 4, 6);
        let beams = Beamformers::new((0..3).map(|_| random_cvec(&mut rng, 4)).collect());
        let ph = random_phases(&mut rng, 6);
        let h = effective_channels(&ch, &ph).unwrap();
        for from in 0..3 {
            for at in 0..3 {
                let (s, q) = build_signal_lift(&ch, &beams, from, at).unwrap();
                assert_eq!(s[(6, 6)], Complex64::new(0.0, 0.0));
                assert!((&s - s.adjoint()).norm() < 1e-12);
                let want = h[at].dotc(&beams.w[from]).norm_sqr();
                let got = lifted_value(&s, &ph.lifted()) + q.norm_sqr();
                assert!((got - want).abs() <= 1e-10 * want.max(1.0), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn lift_without_direct_path_or_beam() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut ch = random_channels(&mut rng, 2, 3, 4);
        ch.h_d = vec![CVec::zeros(3); 2];
        let beams = Beamformers::new(vec![random_cvec(&mut rng, 3), CVec::zeros(3)]);
        let ph = random_phases(&mut rng, 4);
        let (s, q) = build_signal_lift(&ch, &beams, 0, 1).unwrap();
        assert_eq!(q, Complex64::new(0.0, 0.0));
        let p = element_gains(&ch, 1) * &beams.w[0];
        let u: CVec = ph.lifted().rows(0, 4).into_owned();
        let direct = u.dotc(&p).norm_sqr();
        assert!((lifted_value(&s, &ph.lifted()) - direct).abs() <= 1e-12 * direct.max(1.0));
        let (s0, q0) = build_signal_lift(&ch, &beams, 1, 0).unwrap();
        assert_eq!(s0.norm(), 0.0);
        assert_eq!(q0, Complex64::new(0.0, 0.0));
        assert!(build_signal_lift(&ch.without_irs(), &beams, 0, 0).is_err());
    }

    #[test]
    fn signal_tangent_is_tight_and_bounds_above() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ch = random_channels(&mut rng, 2, 3, 4);
        let beams = Beamformers::new((0..2).map(|_| random_cvec(&mut rng, 3)).collect());
        let ph = random_phases(&mut rng, 4);
        let (s, q) = build_signal_lift(&ch, &beams, 0, 0).unwrap();
        let u_ref = ph.lifted() * ph.lifted().adjoint();
        let x0 = HermitianCoeff::Dense(s.clone()).inner(&u_ref) + q.norm_sqr();
        assert!((log_tangent(x0, x0) - x0.ln()).abs() < 1e-14);
        for _ in 0..10_000 {
            let rank = 1 + rng.random_range(0..5);
            let mut u = random_psd(&mut rng, 5, rank);
            // unit diagonal keeps the sample inside the feasible set
            let d: Vec<f64> = (0..5).map(|i| u[(i, i)].re.sqrt()).collect();
            for i in 0..5 {
                for j in 0..5 {
                    u[(i, j)] /= Complex64::new(d[i] * d[j], 0.0);
                }
            }
            let x = HermitianCoeff::Dense(s.clone()).inner(&u) + q.norm_sqr();
            assert!(x > 0.0);
            assert!(log_tangent(x0, x) >= x.ln() - 1e-12);
        }
    }

    /// K users with beams at minimum power for the given phases, so every
    /// QoS or energy row is tight. Takes the first draw from `seed` on whose
    /// matched-filter directions the targets are reachable.
    fn tight_scenario(seed: u64, k: usize, n: usize, m: usize) -> (SystemConfig, PhaseShiftInput) {
        let cfg = SystemConfig { num_users: k, num_antennas: n, num_elements: m, sinr_threshold: 0.3, ..Default::default() };
        for draw in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + draw);
            let mut ch = random_channels(&mut rng, k, n, m);
            ch.g *= Complex64::new(1e-2, 0.0);
            for h in ch.h_d.iter_mut() {
                *h *= Complex64::new(1e-3, 0.0);
            }
            let ph = random_phases(&mut rng, m);
            let order = order_from_gains(&ch, &ph).unwrap();
            let h = effective_channels(&ch, &ph).unwrap();
            let bf = BeamformingInput::new(&cfg, h.clone(), vec![0.5; k], order.clone(), vec![]);
            if let Some(w) = allocate_powers(&bf, &h).unwrap() {
                let beams = Beamformers::new(w);
                let input = PhaseShiftInput::new(&cfg, &ch, &beams, &PowerSplit::uniform(k, 0.5), &order, &ph).unwrap();
                return (cfg, input);
            }
        }
        panic!("no reachable draw");
    }

    #[test]
    fn single_user_program_has_only_qos_energy_and_diagonal_rows() {
        let (_, input) = tight_scenario(21, 1, 2, 3);
        let built = build_p51(&input).unwrap();
        let labels: Vec<&str> = built.problem.constraints.iter().map(|c| c.label.as_str()).collect();
        assert!(labels.iter().all(|l| l.starts_with("diag") || l.starts_with("qos") || l.starts_with("energy")), "{labels:?}");
        assert_eq!(labels.len(), 4 + 2);
    }

    #[test]
    fn slack_is_nonnegative_and_the_result_is_feasible() {
        let (_, input) = tight_scenario(22, 3, 4, 6);
        assert!(screen(&input, &input.reference).is_some());
        let out = solve_phase_shift(&input, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(out.slack.unwrap() >= -1e-7, "{:?}", out.slack);
        assert!(!out.stalled);
        assert!(out.feasible_candidates > 0);
        let report =
            check_parts(&input.cfg, &input.channels, &out.phases, &input.beams, &input.split, &input.order, 1e-6).unwrap();
        assert!(report.feasible());
        assert!(respects_order(&input.channels, &out.phases, &input.order).unwrap());
        assert!(out.phases.theta.iter().all(|&t| (0.0..TAU).contains(&t)));
    }

    #[test]
    fn rank_one_lift_returns_its_own_phases() {
        let (_, input) = tight_scenario(23, 2, 3, 4);
        let ub = input.reference.lifted();
        let out = select_candidate(&input, &(&ub * ub.adjoint()), 5, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(!out.stalled);
        for (a, b) in out.phases.theta.iter().zip(&input.reference.theta) {
            let d = (a - b).rem_euclid(TAU);
            assert!(d.min(TAU - d) < 1e-9);
        }
        let p = input.powers(&out.phases).unwrap();
        for from in 0..2 {
            for at in 0..2 {
                let (s, q) = &input.lifts[from][at];
                let v = lifted_value(s, &out.phases.lifted()) + q.norm_sqr();
                assert!((v - p[(at, from)]).abs() <= 1e-8 * p[(at, from)]);
            }
        }
    }

    #[test]
    fn identity_lift_with_tight_rows_keeps_the_incumbent() {
        let (_, input) = tight_scenario(24, 3, 3, 8);
        let out = select_candidate(&input, &CMat::identity(9, 9), 50, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(out.stalled);
        assert_eq!(out.phases, input.reference);
        assert_eq!(out.feasible_candidates, 0);
    }

    #[test]
    fn two_element_toy_is_close_to_the_grid_optimum() {
        let (_, input) = tight_scenario(25, 2, 2, 2);
        let out = solve_phase_shift(&input, 1000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(!out.stalled);
        let mut grid_best = f64::NEG_INFINITY;
        for a in 0..360 {
            for b in 0..360 {
                let ph = PhaseShift::new(vec![(a as f64).to_radians(), (b as f64).to_radians()]);
                if let Some(m) = screen(&input, &ph) {
                    grid_best = grid_best.max(m);
                }
            }
        }
        assert!(out.min_margin >= grid_best - 0.05 * grid_best.abs(), "{} vs grid {grid_best}", out.min_margin);
    }
}
