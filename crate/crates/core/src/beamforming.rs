//! Transmit covariance subproblem: SDR with SCA-linearized SIC conditions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::conic::{self, HermitianCoeff, HermitianSdpProblem, LinearExpr, Objective, SdpStatus, Sense};
use crate::error::{Error, Result};
use crate::model::{cross_sinr_from, harvested_from, sic_pair_vacuous, sinr_from, Beamformers, CMat, CVec, DecodingOrder};
use crate::sca::{log_tangent, SicSurrogate, Term, DEFAULT_SECANT_RATIO};

/// Relative tightening applied to every right-hand side so the extracted
/// rank-one point clears the feasibility check despite solver round-off.
pub const BACKOFF: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct BeamformingInput {
    /// Effective channels h_k.
    pub channels: Vec<CVec>,
    pub rho: Vec<f64>,
    pub order: DecodingOrder,
    /// Linearization point W^(r).
    pub reference: Vec<CMat>,
    pub sinr_threshold: f64,
    pub energy_threshold: f64,
    pub noise_antenna_var: f64,
    pub noise_id_var: f64,
    pub eh_efficiency: f64,
    pub secant_ratio: f64,
}

impl BeamformingInput {
    pub fn new(cfg: &SystemConfig, channels: Vec<CVec>, rho: Vec<f64>, order: DecodingOrder, reference: Vec<CMat>) -> Self {
        Self {
            channels,
            rho,
            order,
            reference,
            sinr_threshold: cfg.sinr_threshold,
            energy_threshold: cfg.energy_threshold,
            noise_antenna_var: cfg.noise_antenna_var,
            noise_id_var: cfg.noise_id_var,
            eh_efficiency: cfg.eh_efficiency,
            secant_ratio: DEFAULT_SECANT_RATIO,
        }
    }

    /// Scenario constants of this input as a configuration (for the
    /// shared SINR and energy helpers).
    fn as_config(&self) -> SystemConfig {
        SystemConfig {
            num_users: self.num_users(),
            sinr_threshold: self.sinr_threshold,
            energy_threshold: self.energy_threshold,
            noise_antenna_var: self.noise_antenna_var,
            noise_id_var: self.noise_id_var,
            eh_efficiency: self.eh_efficiency,
            ..SystemConfig::default()
        }
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    /// A_k = σ² + δ²/ρ_k.
    pub fn a(&self, k: usize) -> f64 {
        self.noise_antenna_var + self.noise_id_var / self.rho[k]
    }

    /// Right-hand side of the energy constraint on Σ_j h_kᴴW_jh_k.
    pub fn energy_floor(&self, k: usize) -> f64 {
        self.energy_threshold / (self.eh_efficiency * (1.0 - self.rho[k])) - self.noise_antenna_var
    }

    fn validate(&self) -> Result<()> {
        let k = self.num_users();
        if k == 0 || self.rho.len() != k || self.order.len() != k || self.reference.len() != k {
            return Err(Error::Dimension("beamforming input lists differ in length".into()));
        }
        let n = self.channels[0].len();
        if self.channels.iter().any(|h| h.len() != n) || self.reference.iter().any(|w| w.nrows() != n || w.ncols() != n) {
            return Err(Error::Dimension("beamforming input has inconsistent antenna counts".into()));
        }
        if self.rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Domain("power split must lie strictly inside (0, 1)".into()));
        }
        if !self.order.is_valid() {
            return Err(Error::OrderContract("decoding order is not a permutation".into()));
        }
        Ok(())
    }

    /// hᴴ W h of a lifted matrix.
    fn quad(&self, k: usize, w: &CMat) -> f64 {
        quad(&self.channels[k], w)
    }

    /// Received power matrix P[(k, j)] = h_kᴴ W_j h_k.
    pub fn lifted_powers(&self, w: &[CMat]) -> DMatrix<f64> {
        DMatrix::from_fn(self.num_users(), w.len(), |k, j| self.quad(k, &w[j]))
    }
}

pub(crate) fn quad(h: &CVec, w: &CMat) -> f64 {
    (h.adjoint() * w * h)[(0, 0)].re
}

fn outer(h: &CVec) -> CMat {
    h * h.adjoint()
}

/// f̂₁: ln(h_kᴴW_k^(r)h_k) + (h_kᴴW_kh_k − h_kᴴW_k^(r)h_k)/(h_kᴴW_k^(r)h_k).
pub fn f1_hat(h: &CVec, w_ref: &CMat, w: &CMat) -> f64 {
    log_tangent(quad(h, w_ref), quad(h, w))
}

/// f̂₂: first-order bound of ln(Σ_{j∈later} h_k̄ᴴW_jh_k̄ + A_k̄) at W^(r).
pub fn f2_hat(h_kbar: &CVec, later: &[usize], w_ref: &[CMat], w: &[CMat], a_kbar: f64) -> f64 {
    let at_ref: f64 = later.iter().map(|&j| quad(h_kbar, &w_ref[j])).sum::<f64>() + a_kbar;
    let val: f64 = later.iter().map(|&j| quad(h_kbar, &w[j])).sum::<f64>() + a_kbar;
    log_tangent(at_ref, val)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P32Mode {
    /// Minimize transmit power.
    Power,
    /// Minimize a common violation level t ≥ −0.01 of all constraints; used to
    /// find a strictly feasible starting point.
    Restoration,
    /// Power minimization under QoS and energy only (exact SDR, no SIC rows).
    WithoutSic,
}

pub struct P32 {
    pub problem: HermitianSdpProblem,
    /// Matrix variables are W_k / power_unit.
    pub power_unit: f64,
    /// Violation variable in restoration mode.
    pub violation: Option<usize>,
}

/// Lowest violation level the restoration program may reach.
const RESTORATION_FLOOR: f64 = -1e-2;

pub fn build_p32(input: &BeamformingInput) -> Result<HermitianSdpProblem> {
    Ok(build_p32_mode(input, P32Mode::Power)?.problem)
}

pub fn build_p32_mode(input: &BeamformingInput, mode: P32Mode) -> Result<P32> {
    input.validate()?;
    let k_users = input.num_users();
    let n = input.channels[0].len();
    let p0 = input.reference.iter().map(|w| w.trace().re).sum::<f64>() / k_users as f64;
    if !(p0 > 0.0 && p0.is_finite()) {
        return Err(Error::DegenerateLinearization("reference beamformers carry no power".into()));
    }
    let mut p = HermitianSdpProblem::new();
    let vars: Vec<usize> = (0..k_users).map(|k| p.add_matrix_var(format!("W{k}"), n)).collect();
    let hh: Vec<CMat> = input.channels.iter().map(outer).collect();
    let coeff = |k: usize, s: f64| HermitianCoeff::Dense(&hh[k] * Complex64::new(s * p0, 0.0));
    let violation = match mode {
        P32Mode::Power | P32Mode::WithoutSic => None,
        P32Mode::Restoration => Some(p.add_scalar_var("t", RESTORATION_FLOOR, f64::INFINITY)),
    };
    let tighten = if violation.is_some() { 0.0 } else { BACKOFF };

    let mut obj = LinearExpr::new();
    for &v in &vars {
        obj = obj.mat(v, HermitianCoeff::Dense(CMat::identity(n, n) * Complex64::new(p0, 0.0)));
    }
    p.objective = match violation {
        None => Objective::Minimize(obj),
        Some(t) => Objective::Minimize(obj.scaled(1e-6 / (p0 * k_users as f64)).scalar(t, 1.0)),
    };

    // received-power expressions in the scaled variables
    let rx = |at: usize, from: usize| LinearExpr::new().mat(vars[from], coeff(at, 1.0));
    let rx_later = |at: usize, of: usize| {
        input.order.later(of).fold(LinearExpr::new(), |e, j| e.mat(vars[j], coeff(at, 1.0)))
    };
    let gamma = input.sinr_threshold;
    for k in 0..k_users {
        // (h W_k h − γ Σ later)/(γA_k) ≥ 1 (+ backoff), or ≥ 1 − t
        let scale = 1.0 / (gamma * input.a(k));
        let mut e = rx(k, k).scaled(scale).add(&rx_later(k, k), -gamma * scale);
        if let Some(t) = violation {
            e = e.scalar(t, 1.0);
        }
        p.constrain(e, Sense::Ge, 1.0 + tighten, format!("qos {k}"));
    }
    for k in 0..k_users {
        let floor = input.energy_floor(k);
        if floor <= 0.0 {
            continue;
        }
        let mut e = (0..k_users).fold(LinearExpr::new(), |e, j| e.add(&rx(k, j), 1.0 / floor));
        if let Some(t) = violation {
            e = e.scalar(t, 1.0);
        }
        p.constrain(e, Sense::Ge, 1.0 + tighten, format!("energy {k}"));
    }
    let w_ref = &input.reference;
    let sic_pairs = if mode == P32Mode::WithoutSic { Vec::new() } else { input.order.sic_pairs() };
    let p_ref = input.lifted_powers(w_ref);
    let cfg = input.as_config();
    for (k, kbar) in sic_pairs {
        if sic_pair_vacuous(&p_ref, &cfg, k, kbar) {
            continue;
        }
        let later: Vec<usize> = input.order.later(k).collect();
        let own_ref: f64 = later.iter().map(|&j| input.quad(k, &w_ref[j])).sum::<f64>() + input.a(k);
        let other_ref: f64 = later.iter().map(|&j| input.quad(kbar, &w_ref[j])).sum::<f64>() + input.a(kbar);
        let sur = SicSurrogate {
            signal: Term { expr: rx(k, k), at_ref: input.quad(k, &w_ref[k]) },
            own_interference: Term { expr: rx_later(k, k).plus_const(input.a(k)), at_ref: own_ref },
            own_floor: input.a(k),
            cross: Term { expr: rx(kbar, k), at_ref: input.quad(kbar, &w_ref[k]) },
            other_interference: Term { expr: rx_later(kbar, k).plus_const(input.a(kbar)), at_ref: other_ref },
        };
        sur.add_to(&mut p, input.secant_ratio, -tighten, violation.map(|t| (t, -1.0)), &format!("sic {k}->{kbar}"))?;
    }
    Ok(P32 { problem: p, power_unit: p0, violation })
}

#[derive(Debug, Clone)]
pub struct BeamformingOutput {
    pub beams: Beamformers,
    /// Σ_k ‖w_k‖² of the returned beams, in watts.
    pub objective: f64,
    /// Σ_k Tr(W_k) of the relaxed solution, in watts.
    pub relaxed_objective: f64,
    /// True when the extracted directions needed a power re-allocation to
    /// meet the original constraints.
    pub repaired: bool,
    pub rank_ratios: Vec<f64>,
    pub iterations: usize,
}

fn finish(input: &BeamformingInput, built: &P32, sol: &conic::SdpSolution) -> BeamformingOutput {
    let mats: Vec<CMat> = sol.matrices.iter().map(|m| m * Complex64::new(built.power_unit, 0.0)).collect();
    let mut w = Vec::with_capacity(mats.len());
    let mut ratios = Vec::with_capacity(mats.len());
    for m in &mats {
        let (v, r) = conic::extract_rank_one(m);
        w.push(v);
        ratios.push(r);
    }
    let relaxed_objective = mats.iter().map(|m| m.trace().re).sum();
    let mut repaired = false;
    let rank_one: Vec<CMat> = w.iter().map(outer).collect();
    if lifted_min_margin(input, &rank_one) < 0.0 {
        if let Ok(Some(fixed)) = allocate_powers(input, &w) {
            w = fixed;
            repaired = true;
        }
    }
    BeamformingOutput {
        objective: w.iter().map(|v| v.norm_squared()).sum(),
        relaxed_objective,
        repaired,
        beams: Beamformers { w, lifted: Some(mats) },
        rank_ratios: ratios,
        iterations: sol.stats.iterations,
    }
}

fn status_error(status: SdpStatus, what: &str) -> Error {
    match status {
        SdpStatus::Infeasible => Error::Infeasible(what.to_string()),
        _ => Error::NumericalFailure(what.to_string()),
    }
}

/// Solver tolerance for the covariance program. Interior-point iterates
/// carry O(μ) mass off the rank-one optimum, so a tighter stop than the
/// generic default is needed to resolve λ₂/λ₁ below the rank tolerance.
pub const SOLVE_TOL: f64 = 1e-10;
/// Polishing tolerance used when the first solve leaves a visible second
/// eigenvalue; its result is accepted when all residuals are below
/// `POLISH_ACCEPT` even if the solver stalls before reaching it.
const POLISH_TOL: f64 = 1e-12;
const POLISH_ACCEPT: f64 = 1e-9;
const FALLBACK_TOLS: [f64; 2] = [1e-8, 1e-6];

/// One SCA pass: solve the convexified program at the input's reference point.
pub fn solve_beamforming(input: &BeamformingInput) -> Result<BeamformingOutput> {
    let built = build_p32_mode(input, P32Mode::Power)?;
    let mut sol = conic::solve(&built.problem, SOLVE_TOL)?;
    // badly scaled instances can stall just short of the tight stop
    for tol in FALLBACK_TOLS {
        if sol.is_optimal() || sol.status == SdpStatus::Infeasible {
            break;
        }
        sol = conic::solve(&built.problem, tol)?;
    }
    if !sol.is_optimal() {
        return Err(status_error(sol.status, "beamforming program"));
    }
    let out = finish(input, &built, &sol);
    if max_ratio(&out) <= conic::DEFAULT_RANK_TOL {
        return Ok(out);
    }
    let polished = conic::solve(&built.problem, POLISH_TOL)?;
    let s = &polished.stats;
    if polished.status == SdpStatus::Infeasible || s.primal_residual.max(s.dual_residual).max(s.gap) > POLISH_ACCEPT {
        return Ok(out);
    }
    let alt = finish(input, &built, &polished);
    Ok(if max_ratio(&alt) < max_ratio(&out) { alt } else { out })
}

fn max_ratio(out: &BeamformingOutput) -> f64 {
    out.rank_ratios.iter().fold(0.0, |a, &b| a.max(b))
}

/// Repeats SCA passes, moving the reference to each new solution, until the
/// relative decrease of Σ Tr(W_k) is at most `eps` or `max_passes` is hit.
pub fn solve_beamforming_inner(input: &BeamformingInput, eps: f64, max_passes: usize) -> Result<BeamformingOutput> {
    let mut cur = input.clone();
    let mut best = solve_beamforming(&cur)?;
    for _ in 1..max_passes {
        cur.reference = best.beams.lifted.clone().expect("lifted");
        let next = match solve_beamforming(&cur) {
            Ok(o) => o,
            Err(_) => break,
        };
        let prev = best.objective;
        if next.objective <= prev {
            best = next;
        }
        if (prev - best.objective) / prev <= eps {
            break;
        }
    }
    Ok(best)
}

/// Minimum-power allocation for fixed unit beam directions. With the
/// directions fixed every constraint is linear in the powers p_k = ‖w_k‖²
/// (in the SIC ratio the desired power p_k cancels), so this is an LP.
/// SIC pairs whose cross gain |h_k̄ᴴv_k|² is below `VACUOUS_GAIN`·‖h_k̄‖²
/// are left out. Returns `Ok(None)` if the LP is infeasible.
pub fn allocate_powers(input: &BeamformingInput, directions: &[CVec]) -> Result<Option<Vec<CVec>>> {
    input_dims(input, directions.len())?;
    let mut backoff = BACKOFF;
    let mut last = None;
    for _ in 0..4 {
        let Some(w) = allocate_powers_once(input, directions, backoff)? else {
            return Ok(last);
        };
        let m = lifted_min_margin(input, &w.iter().map(outer).collect::<Vec<_>>());
        last = Some(w);
        if m >= 0.0 {
            break;
        }
        backoff += 10.0 * m.abs();
    }
    Ok(last)
}

fn allocate_powers_once(input: &BeamformingInput, directions: &[CVec], backoff: f64) -> Result<Option<Vec<CVec>>> {
    let k_users = input.num_users();
    let v: Vec<CVec> = directions
        .iter()
        .map(|d| {
            let n = d.norm();
            if n > 0.0 { d.unscale(n) } else { d.clone() }
        })
        .collect();
    let a = DMatrix::from_fn(k_users, k_users, |k, j| input.channels[k].dotc(&v[j]).norm_sqr());
    let unit = (0..k_users)
        .map(|k| input.sinr_threshold * input.a(k) / a[(k, k)].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
        .max(
            (0..k_users)
                .map(|k| input.energy_floor(k) / a.row(k).iter().sum::<f64>().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max),
        );
    if !(unit > 0.0 && unit.is_finite()) {
        return Ok(None);
    }
    let mut lp = minilp::Problem::new(minilp::OptimizationDirection::Minimize);
    let vars: Vec<minilp::Variable> = (0..k_users).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let gamma = input.sinr_threshold;
    for k in 0..k_users {
        let s = unit / (gamma * input.a(k));
        let mut row = vec![(vars[k], a[(k, k)] * s)];
        row.extend(input.order.later(k).map(|j| (vars[j], -gamma * a[(k, j)] * s)));
        lp.add_constraint(&row[..], minilp::ComparisonOp::Ge, 1.0 + backoff);
        let floor = input.energy_floor(k);
        if floor > 0.0 {
            let row: Vec<_> = (0..k_users).map(|j| (vars[j], a[(k, j)] * unit / floor)).collect();
            lp.add_constraint(&row[..], minilp::ComparisonOp::Ge, 1.0 + backoff);
        }
    }
    for (k, kbar) in input.order.sic_pairs() {
        if a[(kbar, k)] <= VACUOUS_GAIN * input.channels[kbar].norm_squared() {
            continue;
        }
        // a_k̄k (I_k + A_k) ≥ a_kk (I_k̄ + A_k̄), I over users decoded after k
        let (c1, c2) = (a[(kbar, k)], a[(k, k)]);
        let norm = c2 * input.a(kbar) + c1 * input.a(k);
        let row: Vec<_> = input.order.later(k).map(|j| (vars[j], (c1 * a[(k, j)] - c2 * a[(kbar, j)]) * unit / norm)).collect();
        let rhs = (c2 * input.a(kbar) - c1 * input.a(k)) / norm;
        lp.add_constraint(&row[..], minilp::ComparisonOp::Ge, rhs + backoff);
    }
    match lp.solve() {
        Ok(sol) => Ok(Some(
            vars.iter().zip(&v).map(|(&x, d)| d * Complex64::new((sol[x].max(0.0) * unit).sqrt(), 0.0)).collect(),
        )),
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(minilp::Error::Unbounded) => Err(Error::NumericalFailure("power allocation is unbounded".into())),
    }
}

/// Gaussian randomization around high-rank covariances: each draw takes
/// w_k ~ CN(0, W_k) as a direction, powers come from the LP, and the
/// cheapest draw with every margin non-negative is kept. The principal
/// eigenvectors are tried first.
pub fn randomized_rank_one<R: Rng>(input: &BeamformingInput, mats: &[CMat], draws: usize, rng: &mut R) -> Result<Option<Vec<CVec>>> {
    input_dims(input, mats.len())?;
    let roots: Vec<CMat> = mats.iter().map(psd_root).collect();
    let mut best: Option<(Vec<CVec>, f64)> = None;
    let consider = |dirs: Vec<CVec>, best: &mut Option<(Vec<CVec>, f64)>| -> Result<()> {
        if let Some(w) = allocate_powers(input, &dirs)? {
            let lifted: Vec<CMat> = w.iter().map(outer).collect();
            let obj: f64 = w.iter().map(|v| v.norm_squared()).sum();
            if lifted_min_margin(input, &lifted) >= 0.0 && best.as_ref().is_none_or(|(_, b)| obj < *b) {
                *best = Some((w, obj));
            }
        }
        Ok(())
    };
    consider(mats.iter().map(|m| conic::extract_rank_one(m).0).collect(), &mut best)?;
    for _ in 0..draws {
        let dirs = roots
            .iter()
            .map(|r| {
                let z = CVec::from_fn(r.ncols(), |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                });
                r * z
            })
            .collect();
        consider(dirs, &mut best)?;
    }
    Ok(best.map(|(w, _)| w))
}

fn psd_root(m: &CMat) -> CMat {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0)));
    &eig.eigenvectors * d
}

/// Relative cross gain below which an SIC pair is treated as vacuous by the
/// power allocation.
pub const VACUOUS_GAIN: f64 = 1e-14;

fn input_dims(input: &BeamformingInput, n: usize) -> Result<()> {
    if n != input.num_users() || input.rho.len() != n || input.order.len() != n {
        return Err(Error::Dimension("power allocation lists differ in length".into()));
    }
    Ok(())
}

/// Smallest normalized margin of QoS, SIC and energy at lifted beams.
/// Vacuous SIC pairs are skipped as in the feasibility check.
pub fn lifted_min_margin(input: &BeamformingInput, w: &[CMat]) -> f64 {
    let cfg = &input.as_config();
    let p = input.lifted_powers(w);
    let mut m = f64::INFINITY;
    for k in 0..input.num_users() {
        let s = sinr_from(&p, input.rho[k], &input.order, cfg, k);
        m = m.min(s / cfg.sinr_threshold - 1.0);
        m = m.min(harvested_from(&p, input.rho[k], cfg, k) / cfg.energy_threshold - 1.0);
    }
    for (k, kbar) in input.order.sic_pairs() {
        if sic_pair_vacuous(&p, cfg, k, kbar) {
            continue;
        }
        let own = sinr_from(&p, input.rho[k], &input.order, cfg, k);
        let cross = cross_sinr_from(&p, input.rho[kbar], &input.order, cfg, k, kbar);
        m = m.min(if own > 0.0 { cross / own - 1.0 } else { cross });
    }
    m
}

/// Interference-padded MRT: W_k = p_k ĥ_kĥ_kᴴ with p_k = γA_kK/‖h_k‖²,
/// doubled until every QoS and energy constraint holds. `None` when scaling
/// alone cannot reach the SINR targets (interference-limited users).
pub fn padded_mrt(input: &BeamformingInput) -> Option<Vec<CMat>> {
    let base = mrt_base(input);
    let mut scale = 1.0;
    for _ in 0..64 {
        let w: Vec<CMat> = base.iter().map(|m| m * Complex64::new(scale, 0.0)).collect();
        let p = input.lifted_powers(&w);
        let ok = (0..input.num_users()).all(|k| {
            let interf: f64 = input.order.later(k).map(|j| p[(k, j)]).sum();
            p[(k, k)] >= input.sinr_threshold * (interf + input.a(k)) && p.row(k).sum() >= input.energy_floor(k)
        });
        if ok {
            return Some(w);
        }
        scale *= 2.0;
    }
    None
}

fn mrt_base(input: &BeamformingInput) -> Vec<CMat> {
    let k_users = input.num_users();
    (0..k_users)
        .map(|k| {
            let h = &input.channels[k];
            let g = h.norm_squared();
            let pk = input.sinr_threshold * input.a(k) * k_users as f64 / g;
            outer(h) * Complex64::new(pk / g, 0.0)
        })
        .collect()
}

/// Starting covariances: padded MRT, or the QoS/energy-only optimum when
/// padded MRT cannot meet the SINR targets.
pub fn initial_beamformers(input: &BeamformingInput) -> Result<Vec<CMat>> {
    if let Some(w) = padded_mrt(input) {
        return Ok(w);
    }
    let mut cur = input.clone();
    cur.reference = mrt_base(input);
    let built = build_p32_mode(&cur, P32Mode::WithoutSic)?;
    let sol = conic::solve(&built.problem, conic::DEFAULT_TOL)?;
    if !sol.is_optimal() {
        return Err(match sol.status {
            SdpStatus::Infeasible => Error::ScenarioInfeasible("QoS and energy targets cannot be met jointly".into()),
            s => status_error(s, "initial beamforming program"),
        });
    }
    Ok(sol.matrices.iter().map(|m| m * Complex64::new(built.power_unit, 0.0)).collect())
}

/// Drives the common violation level of all (surrogate) constraints below
/// zero by successive restoration programs, starting from `start`. Returns
/// a strictly feasible lifted point.
pub fn restore_feasibility(input: &BeamformingInput, start: Vec<CMat>, max_steps: usize) -> Result<Vec<CMat>> {
    let mut cur = input.clone();
    cur.reference = start;
    if lifted_min_margin(&cur, &cur.reference) > 0.0 {
        return Ok(cur.reference);
    }
    for _ in 0..max_steps {
        let built = build_p32_mode(&cur, P32Mode::Restoration)?;
        let sol = conic::solve(&built.problem, conic::DEFAULT_TOL)?;
        if !sol.is_optimal() {
            return Err(status_error(sol.status, "restoration program"));
        }
        let mats: Vec<CMat> = sol.matrices.iter().map(|m| m * Complex64::new(built.power_unit, 0.0)).collect();
        let t = sol.scalars[built.violation.expect("restoration variable")];
        cur.reference = mats;
        if t < 0.0 && lifted_min_margin(&cur, &cur.reference) > 0.0 {
            return Ok(cur.reference);
        }
    }
    Err(Error::ScenarioInfeasible("no strictly feasible starting beamformers found".into()))
}
