//! Stage 1: IRS phases that maximize the sum of combined channel gains, and
//! the SIC decoding order derived from them.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::conic::{self, HermitianCoeff, HermitianSdpProblem, LinearExpr, Objective, SdpSolution, Sense};
use crate::error::{Error, Result};
use crate::model::{combined_gains, effective_channel_unchecked, CMat, CVec, ChannelSet, DecodingOrder, PhaseShift};

/// Eigenvalues of the lifted matrix below this are treated as zero.
pub const EIG_CLAMP: f64 = 1e-12;

/// R_k = [[a aᴴ, a h_d], [h_dᴴ aᴴ, 0]] with a = diag(h_{r,k}ᴴ) G, so that
/// ūᴴ R_k ū + ‖h_d‖² is user k's combined gain for ū = [u; 1].
pub fn build_gain_matrix(channels: &ChannelSet, k: usize) -> Result<CMat> {
    let m = channels.num_elements();
    if m == 0 {
        return Err(Error::Dimension("gain matrix needs at least one IRS element".into()));
    }
    if k >= channels.num_users() {
        return Err(Error::Dimension(format!("user {k} out of range")));
    }
    let a = element_gains(channels, k);
    let ahd = &a * &channels.h_d[k];
    let mut r = CMat::zeros(m + 1, m + 1);
    r.view_mut((0, 0), (m, m)).copy_from(&(&a * a.adjoint()));
    for i in 0..m {
        r[(i, m)] = ahd[i];
        r[(m, i)] = ahd[i].conj();
    }
    Ok(r)
}

/// diag(h_{r,k}ᴴ) G, M x N.
pub(crate) fn element_gains(channels: &ChannelSet, k: usize) -> CMat {
    let mut a = channels.g.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= channels.h_r[k][i].conj();
    }
    a
}

/// Semidefinite relaxation of the gain-sum maximization over unit-modulus
/// phases. The returned objective includes Σ‖h_d‖².
pub fn solve_p21(channels: &ChannelSet) -> Result<SdpSolution> {
    let m = channels.num_elements();
    let mut sum = build_gain_matrix(channels, 0)?;
    for k in 1..channels.num_users() {
        sum += build_gain_matrix(channels, k)?;
    }
    let direct: f64 = channels.h_d.iter().map(|h| h.norm_squared()).sum();
    let mut p = HermitianSdpProblem::new();
    let u = p.add_matrix_var("U", m + 1);
    p.objective = Objective::Maximize(LinearExpr::constant(direct).mat(u, HermitianCoeff::Dense(sum)));
    for i in 0..=m {
        p.constrain(LinearExpr::new().mat(u, HermitianCoeff::diag_unit(i)), Sense::Eq, 1.0, format!("diag {i}"));
    }
    conic::solve(&p, conic::DEFAULT_TOL)
}

/// Draws `t` unit-modulus candidates from a lifted PSD matrix:
/// Ū = VΣVᴴ, ū = VΣ^{1/2} r with r ~ CN(0, I), θ_m from the phase of
/// ū_m relative to the last entry.
pub fn randomized_candidates<R: Rng>(u_bar: &CMat, t: usize, rng: &mut R) -> Vec<PhaseShift> {
    let n = u_bar.nrows();
    let herm = (u_bar + u_bar.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut factor = eig.eigenvectors.clone();
    for (j, mut col) in factor.column_iter_mut().enumerate() {
        let l = eig.eigenvalues[j];
        col *= Complex64::new(if l > EIG_CLAMP { l.sqrt() } else { 0.0 }, 0.0);
    }
    let half = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    (0..t)
        .map(|_| {
            let r = CVec::from_fn(n, |_, _| Complex64::new(half.sample(rng), half.sample(rng)));
            PhaseShift::from_lifted(&(&factor * r))
        })
        .collect()
}

pub(crate) fn gain_sum(channels: &ChannelSet, phases: &PhaseShift) -> f64 {
    let coeff = phases.coefficients();
    (0..channels.num_users())
        .map(|k| effective_channel_unchecked(channels, &coeff, k).norm_squared())
        .sum()
}

/// Best of `t` randomized candidates by total combined gain. Ties keep the
/// earliest candidate.
pub fn gaussian_randomization<R: Rng>(u_bar: &CMat, channels: &ChannelSet, t: usize, rng: &mut R) -> (PhaseShift, f64) {
    let mut best: Option<(PhaseShift, f64)> = None;
    for cand in randomized_candidates(u_bar, t.max(1), rng) {
        let v = gain_sum(channels, &cand);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((cand, v));
        }
    }
    best.expect("at least one candidate")
}

/// Ascending combined gain (weakest decoded first), ties by user index.
pub fn order_from_gains(channels: &ChannelSet, phases: &PhaseShift) -> Result<DecodingOrder> {
    let gains = combined_gains(channels, phases)?;
    let mut seq: Vec<usize> = (0..gains.len()).collect();
    seq.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));
    DecodingOrder::from_sequence(&seq)
}

/// Stage 1 end to end: relaxation, randomization and the induced order.
/// Without IRS elements the phases are empty and the order follows ‖h_d‖².
pub fn run_stage1<R: Rng>(channels: &ChannelSet, t: usize, rng: &mut R) -> Result<(PhaseShift, DecodingOrder)> {
    if channels.num_elements() == 0 {
        let phases = PhaseShift::zeros(0);
        let order = order_from_gains(channels, &phases)?;
        return Ok((phases, order));
    }
    let sdp = solve_p21(channels)?;
    if !sdp.is_optimal() {
        return Err(Error::NumericalFailure(format!("phase relaxation ended with {:?}", sdp.status)));
    }
    let (phases, _) = gaussian_randomization(&sdp.matrices[0], channels, t, rng);
    let order = order_from_gains(channels, &phases)?;
    Ok((phases, order))
}
