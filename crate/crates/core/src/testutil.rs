use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{CMat, CVec, ChannelSet};

pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_cvec<R: Rng>(rng: &mut R, n: usize) -> CVec {
    DVector::from_fn(n, |_, _| cn(rng))
}

pub fn random_cmat<R: Rng>(rng: &mut R, r: usize, c: usize) -> CMat {
    DMatrix::from_fn(r, c, |_, _| cn(rng))
}

/// Unit-scale random channels, useful where path loss is irrelevant.
pub fn random_channels<R: Rng>(rng: &mut R, k: usize, n: usize, m: usize) -> ChannelSet {
    ChannelSet {
        g: random_cmat(rng, m, n),
        h_r: (0..k).map(|_| random_cvec(rng, m)).collect(),
        h_d: (0..k).map(|_| random_cvec(rng, n)).collect(),
        d_direct: vec![1.0; k],
        d_irs_user: vec![1.0; k],
        d_bs_irs: 1.0,
    }
}

/// Random Hermitian PSD matrix of rank `rank`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let f = random_cmat(rng, n, rank);
    &f * f.adjoint()
}
