//! Power-splitting subproblem: maximize a common slack over the QoS, SIC and
//! energy constraints in ρ with beams and phases fixed.
//!
//! Each user gets a 2×2 Hermitian block [[τ_k, 1], [1, ρ_k]] whose PSD
//! condition is τ_kρ_k ≥ 1, i.e. τ_k ≥ 1/ρ_k.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::conic::{self, HermitianCoeff, HermitianSdpProblem, LinearExpr, Objective, SdpStatus, Sense};
use crate::error::{Error, Result};
use crate::model::{DecodingOrder, PowerSplit, NEGLIGIBLE_CROSS_POWER};

#[derive(Debug, Clone)]
pub struct PsInput {
    /// P[(k, j)] = |h_kᴴw_j|² at the fixed beams and phases.
    pub powers: DMatrix<f64>,
    pub order: DecodingOrder,
    /// Linearization point ρ^(r).
    pub rho_ref: Vec<f64>,
    pub sinr_threshold: f64,
    pub energy_threshold: f64,
    pub noise_antenna_var: f64,
    pub noise_id_var: f64,
    pub eh_efficiency: f64,
}

impl PsInput {
    pub fn new(cfg: &SystemConfig, powers: DMatrix<f64>, order: DecodingOrder, rho_ref: Vec<f64>) -> Self {
        Self {
            powers,
            order,
            rho_ref,
            sinr_threshold: cfg.sinr_threshold,
            energy_threshold: cfg.energy_threshold,
            noise_antenna_var: cfg.noise_antenna_var,
            noise_id_var: cfg.noise_id_var,
            eh_efficiency: cfg.eh_efficiency,
        }
    }

    pub fn num_users(&self) -> usize {
        self.powers.nrows()
    }

    /// B_kk: desired-signal power at user k.
    pub fn b_own(&self, k: usize) -> f64 {
        self.powers[(k, k)]
    }

    /// Interference at user `at` from the users decoded after `of`.
    pub fn b_later(&self, at: usize, of: usize) -> f64 {
        self.order.later(of).map(|j| self.powers[(at, j)]).sum()
    }

    /// Total received power at user k.
    pub fn b_total(&self, k: usize) -> f64 {
        self.powers.row(k).iter().sum()
    }

    /// c_k = e/(η(P_tot + σ²)); energy holds iff ρ_k ≤ 1 − c_k.
    pub fn energy_ratio(&self, k: usize) -> f64 {
        self.energy_threshold / (self.eh_efficiency * (self.b_total(k) + self.noise_antenna_var))
    }

    fn validate(&self) -> Result<()> {
        let k = self.num_users();
        if k == 0 || self.powers.ncols() != k || self.order.len() != k || self.rho_ref.len() != k {
            return Err(Error::Dimension("power-split input lists differ in length".into()));
        }
        if !self.order.is_valid() {
            return Err(Error::OrderContract("decoding order is not a permutation".into()));
        }
        if self.powers.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("received powers must be finite and non-negative".into()));
        }
        if self.rho_ref.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Domain("reference split must lie strictly inside (0, 1)".into()));
        }
        Ok(())
    }

    /// SIC pairs that carry a constraint (negligible cross power is vacuous).
    pub fn active_sic_pairs(&self) -> Vec<(usize, usize)> {
        self.order
            .sic_pairs()
            .into_iter()
            .filter(|&(k, kbar)| self.powers[(kbar, k)] > NEGLIGIBLE_CROSS_POWER * self.noise_antenna_var)
            .collect()
    }
}

/// Tangent upper bound of −1/ρ at ρ_r: −1/ρ_r + (ρ − ρ_r)/ρ_r².
pub fn inv_rho_upper_bound(rho_ref: f64, rho: f64) -> f64 {
    -1.0 / rho_ref + (rho - rho_ref) / (rho_ref * rho_ref)
}

/// Margins are normalized, so −1 already means every constraint is badly
/// violated. A bounded slack keeps the interior-point iterates stable.
const SLACK_FLOOR: f64 = -1.0;
/// Negative slack still passed on to the caller's feasibility check.
pub const SLACK_TOLERANCE: f64 = 1e-6;

/// Indices of the variables of a built program.
#[derive(Debug, Clone)]
pub struct P41 {
    pub problem: HermitianSdpProblem,
    /// One 2×2 block per user: τ_k at (0,0), ρ_k at (1,1).
    pub blocks: Vec<usize>,
    pub slack: usize,
}

fn entry(r: usize, c: usize, v: Complex64) -> HermitianCoeff {
    HermitianCoeff::Sparse(vec![(r, c, v)])
}

fn tau(b: usize, s: f64) -> LinearExpr {
    LinearExpr::new().mat(b, entry(0, 0, Complex64::new(s, 0.0)))
}

fn rho(b: usize, s: f64) -> LinearExpr {
    LinearExpr::new().mat(b, entry(1, 1, Complex64::new(s, 0.0)))
}

pub fn build_p41(input: &PsInput) -> Result<P41> {
    input.validate()?;
    let k_users = input.num_users();
    let mut p = HermitianSdpProblem::new();
    let blocks: Vec<usize> = (0..k_users).map(|k| p.add_matrix_var(format!("X{k}"), 2)).collect();
    let slack = p.add_scalar_var("s", SLACK_FLOOR, f64::INFINITY);
    p.objective = Objective::Maximize(LinearExpr::new().scalar(slack, 1.0));
    let (gamma, sigma, delta) = (input.sinr_threshold, input.noise_antenna_var, input.noise_id_var);

    for (k, &b) in blocks.iter().enumerate() {
        // off-diagonal fixed to 1 so that PSD means τρ ≥ 1
        p.constrain(LinearExpr::new().mat(b, entry(0, 1, Complex64::new(0.5, 0.0))), Sense::Eq, 1.0, format!("link re {k}"));
        p.constrain(LinearExpr::new().mat(b, entry(0, 1, Complex64::new(0.0, 0.5))), Sense::Eq, 0.0, format!("link im {k}"));
        p.constrain(rho(b, 1.0), Sense::Le, 1.0, format!("rho {k}"));

        // (B_kk − γ(B_int + σ²) − γδ²τ)/B_kk ≥ s
        let bkk = input.b_own(k);
        if !(bkk > 0.0) {
            return Err(Error::Domain(format!("user {k} receives no signal power")));
        }
        let e = tau(b, -gamma * delta / bkk).scalar(slack, -1.0);
        p.constrain(e, Sense::Ge, -(bkk - gamma * (input.b_later(k, k) + sigma)) / bkk, format!("qos {k}"));

        // (1 − ρ)/c_k − 1 ≥ s
        let c = input.energy_ratio(k);
        let e = rho(b, -1.0 / c).scalar(slack, -1.0);
        p.constrain(e, Sense::Ge, 1.0 - 1.0 / c, format!("energy {k}"));
    }

    // B_kk δ²τ_k̄ − B_k̄k δ² (tangent of −1/ρ_k) ≤ B_k̄k(B_int,k + σ²) − B_kk(B_int,k̄ + σ²)
    for (k, kbar) in input.active_sic_pairs() {
        let bkk = input.b_own(k);
        let bcross = input.powers[(kbar, k)];
        let r0 = input.rho_ref[k];
        let own_side = bcross * (input.b_later(k, k) + sigma);
        let other_side = bkk * (input.b_later(kbar, k) + sigma);
        let scale = bcross * (input.b_later(k, k) + sigma + delta / r0);
        // rhs − lhs ≥ s·scale, lhs = B_kk δ² τ_k̄ + B_k̄k δ² (−2/ρ_r + ρ_k/ρ_r²)
        let e = tau(blocks[kbar], -bkk * delta / scale)
            .add(&rho(blocks[k], -bcross * delta / (r0 * r0 * scale)), 1.0)
            .scalar(slack, -1.0);
        let rhs = -(own_side - other_side + 2.0 * bcross * delta / r0) / scale;
        p.constrain(e, Sense::Ge, rhs, format!("sic {k}->{kbar}"));
    }
    Ok(P41 { problem: p, blocks, slack })
}

#[derive(Debug, Clone)]
pub struct PowerSplitOutput {
    pub split: PowerSplit,
    /// Optimal common slack of the linearized program.
    pub slack: f64,
}

/// Solves the max-slack program. An optimal slack below −`SLACK_TOLERANCE`
/// means the constraints cannot all hold for any ρ and is reported as
/// `Infeasible`.
pub fn solve_power_split(input: &PsInput) -> Result<PowerSplitOutput> {
    let built = build_p41(input)?;
    let sol = conic::solve(&built.problem, conic::DEFAULT_TOL)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => return Err(Error::Infeasible("power-split program".into())),
        SdpStatus::NumericalFailure => return Err(Error::NumericalFailure("power-split program".into())),
    }
    let slack = sol.scalars[built.slack];
    // beams from the previous step are tight up to the solver tolerance,
    // so the best slack at a feasible point can sit a hair below zero
    if slack < -SLACK_TOLERANCE {
        return Err(Error::Infeasible(format!("power-split slack {slack:.3e} is negative")));
    }
    let rho = built.blocks.iter().map(|&b| sol.matrices[b][(1, 1)].re).collect::<Vec<_>>();
    if rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::NumericalFailure("power-split solution left (0, 1)".into()));
    }
    Ok(PowerSplitOutput { split: PowerSplit { rho }, slack })
}

/// Exact (un-linearized) slack of the program at a given split; the
/// linearized slack never exceeds it.
pub fn exact_slack(input: &PsInput, rho: &[f64]) -> f64 {
    let (gamma, sigma, delta) = (input.sinr_threshold, input.noise_antenna_var, input.noise_id_var);
    let mut s = f64::INFINITY;
    for k in 0..input.num_users() {
        let bkk = input.b_own(k);
        s = s.min((bkk - gamma * (input.b_later(k, k) + sigma + delta / rho[k])) / bkk);
        s = s.min((1.0 - rho[k]) / input.energy_ratio(k) - 1.0);
    }
    for (k, kbar) in input.active_sic_pairs() {
        let bkk = input.b_own(k);
        let bcross = input.powers[(kbar, k)];
        let r0 = input.rho_ref[k];
        let scale = bcross * (input.b_later(k, k) + sigma + delta / r0);
        let lhs = bkk * (input.b_later(kbar, k) + sigma + delta / rho[kbar]);
        let rhs = bcross * (input.b_later(k, k) + sigma + delta / rho[k]);
        s = s.min((rhs - lhs) / scale);
    }
    s
}
