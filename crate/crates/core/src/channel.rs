//! Channel synthesis: ULA steering vectors, Rician and Rayleigh links,
//! distance-based path loss, and a plain-text dump format.
//!
//! Angles are azimuths measured in the horizontal plane from the x-axis
//! (the array broadside) to the link direction:
//! - BS departure angle: direction BS -> IRS,
//! - IRS arrival angle: direction IRS -> BS,
//! - IRS departure angle for user k: direction IRS -> user k.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{CMat, CVec, ChannelSet};

/// Rician factors at or above this are treated as pure line of sight.
pub const PURE_LOS_KAPPA: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub bs: [f64; 3],
    pub irs: [f64; 3],
    pub users: Vec<[f64; 3]>,
    pub d_direct: Vec<f64>,
    pub d_irs_user: Vec<f64>,
    pub d_bs_irs: f64,
    pub aod_bs: f64,
    pub aoa_irs: f64,
    pub aod_irs: Vec<f64>,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn azimuth(from: &[f64; 3], to: &[f64; 3]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

impl Topology {
    pub fn from_positions(cfg: &SystemConfig, users: Vec<[f64; 3]>) -> Result<Self> {
        if users.len() != cfg.num_users {
            return Err(Error::Dimension(format!("{} user positions for K={}", users.len(), cfg.num_users)));
        }
        let (bs, irs) = (cfg.bs_position, cfg.irs_position);
        let d_direct: Vec<f64> = users.iter().map(|u| dist(&bs, u)).collect();
        let d_irs_user: Vec<f64> = users.iter().map(|u| dist(&irs, u)).collect();
        let d_bs_irs = dist(&bs, &irs);
        let aod_irs = users.iter().map(|u| azimuth(&irs, u)).collect();
        Ok(Self {
            bs,
            irs,
            d_direct,
            d_irs_user,
            d_bs_irs,
            aod_bs: azimuth(&bs, &irs),
            aoa_irs: azimuth(&irs, &bs),
            aod_irs,
            users,
        })
    }

    /// Users uniform over the disc of radius `user_radius` at ground level.
    pub fn random<R: Rng>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        let users = (0..cfg.num_users)
            .map(|_| {
                let r = cfg.user_radius * rng.random::<f64>().sqrt();
                let phi = TAU * rng.random::<f64>();
                [r * phi.cos(), r * phi.sin(), 0.0]
            })
            .collect();
        Self::from_positions(cfg, users)
    }
}

/// Row steering vector, element i = e^{-j2π (d/λ) i sin(angle)}.
pub fn array_response(n: usize, spacing_ratio: f64, angle: f64) -> CVec {
    let s = angle.sin();
    DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, -2.0 * PI * spacing_ratio * i as f64 * s))
}

/// c0 · d^{-α} with a 1 m reference distance.
pub fn path_gain(d: f64, exponent: f64, c0: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(c0 * d.powf(-exponent))
}

fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// √(κ/(1+κ))·LoS + √(1/(1+κ))·NLoS, NLoS i.i.d. CN(0, 1) drawn row-major.
pub fn rician_matrix<R: Rng>(rows: usize, cols: usize, kappa: f64, los: &CMat, rng: &mut R) -> Result<CMat> {
    if kappa.is_nan() || kappa < 0.0 {
        return Err(Error::Domain(format!("Rician factor must be non-negative, got {kappa}")));
    }
    if los.nrows() != rows || los.ncols() != cols {
        return Err(Error::Dimension(format!(
            "LoS is {}x{}, expected {rows}x{cols}", los.nrows(), los.ncols()
        )));
    }
    let mut nlos = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            nlos[(r, c)] = cn(rng);
        }
    }
    if kappa >= PURE_LOS_KAPPA {
        return Ok(los.clone());
    }
    let a = (kappa / (1.0 + kappa)).sqrt();
    let b = (1.0 / (1.0 + kappa)).sqrt();
    Ok(los * Complex64::new(a, 0.0) + nlos * Complex64::new(b, 0.0))
}

/// Draws one realization. Random numbers are consumed in this order: every
/// direct link (user by user), the NLoS part of G (row-major), then each
/// user's IRS link. The direct links of a draw do not depend on M.
pub fn generate_channels<R: Rng>(cfg: &SystemConfig, topo: &Topology, rng: &mut R) -> Result<ChannelSet> {
    let (k, n, m) = (cfg.num_users, cfg.num_antennas, cfg.num_elements);
    if topo.users.len() != k {
        return Err(Error::Dimension("topology and config disagree on K".into()));
    }
    let c0 = cfg.path_loss_ref;
    let sr = cfg.element_spacing_ratio;

    let mut h_d = Vec::with_capacity(k);
    for u in 0..k {
        let amp = path_gain(topo.d_direct[u], cfg.exponent_direct, c0)?.sqrt();
        let row: CVec = DVector::from_fn(n, |_, _| cn(rng));
        h_d.push(row.map(|z| z.conj() * amp));
    }

    let g = if m > 0 {
        let a_m = array_response(m, sr, topo.aoa_irs);
        let a_n = array_response(n, sr, topo.aod_bs);
        // a_Mᴴ a_N as an outer product of a column and a row
        let los = DMatrix::from_fn(m, n, |i, j| a_m[i].conj() * a_n[j]);
        let amp = path_gain(topo.d_bs_irs, cfg.exponent_bs_irs, c0)?.sqrt();
        rician_matrix(m, n, cfg.rician_bs_irs, &los, rng)? * Complex64::new(amp, 0.0)
    } else {
        DMatrix::zeros(0, n)
    };

    let mut h_r = Vec::with_capacity(k);
    for u in 0..k {
        if m > 0 {
            let los = DMatrix::from_row_slice(1, m, array_response(m, sr, topo.aod_irs[u]).as_slice());
            let amp = path_gain(topo.d_irs_user[u], cfg.exponent_irs_user, c0)?.sqrt();
            let row = rician_matrix(1, m, cfg.rician_irs_user, &los, rng)? * Complex64::new(amp, 0.0);
            h_r.push(row.adjoint().column(0).into_owned());
        } else {
            h_r.push(DVector::zeros(0));
        }
    }
    Ok(ChannelSet {
        g,
        h_r,
        h_d,
        d_direct: topo.d_direct.clone(),
        d_irs_user: topo.d_irs_user.clone(),
        d_bs_irs: topo.d_bs_irs,
    })
}

/// Text dump, one complex entry `re im` per line, row-major:
///
/// ```text
/// irs-swipt-channels 1
/// seed <u64>
/// dims <K> <N> <M>
/// d_bs_irs <f64>
/// d_direct <K values>
/// d_irs_user <K values>
/// G                 (M*N entries)
/// h_r <k>           (M entries, one block per user)
/// h_d <k>           (N entries, one block per user)
/// ```
pub fn dump_channels(ch: &ChannelSet, seed: u64) -> String {
    let (k, n, m) = (ch.num_users(), ch.num_antennas(), ch.num_elements());
    let mut s = String::new();
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(s, "irs-swipt-channels 1");
    let _ = writeln!(s, "seed {seed}");
    let _ = writeln!(s, "dims {k} {n} {m}");
    let _ = writeln!(s, "d_bs_irs {:e}", ch.d_bs_irs);
    let _ = writeln!(s, "d_direct {}", join(&ch.d_direct));
    let _ = writeln!(s, "d_irs_user {}", join(&ch.d_irs_user));
    let _ = writeln!(s, "G");
    for r in 0..m {
        for c in 0..n {
            let z = ch.g[(r, c)];
            let _ = writeln!(s, "{:e} {:e}", z.re, z.im);
        }
    }
    for (label, list) in [("h_r", &ch.h_r), ("h_d", &ch.h_d)] {
        for (u, v) in list.iter().enumerate() {
            let _ = writeln!(s, "{label} {u}");
            for z in v.iter() {
                let _ = writeln!(s, "{:e} {:e}", z.re, z.im);
            }
        }
    }
    s
}

struct Cursor<'a> {
    lines: Vec<&'a str>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let l = self.lines.get(self.at).copied().ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
        self.at += 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.line()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::Parse(format!("expected `{key}`, found `{line}`")));
        }
        Ok(it.collect())
    }

    fn complex(&mut self) -> Result<Complex64> {
        let line = self.line()?;
        let v: Vec<f64> = line.split_whitespace().map(num).collect::<Result<_>>()?;
        match v[..] {
            [re, im] => Ok(Complex64::new(re, im)),
            _ => Err(Error::Parse(format!("expected `re im`, found `{line}`"))),
        }
    }
}

fn num(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")))
}

fn int(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")))
}

fn single(v: Vec<&str>, what: &str) -> Result<String> {
    match v[..] {
        [x] => Ok(x.to_string()),
        _ => Err(Error::Parse(format!("{what} takes one value"))),
    }
}

/// Parses [`dump_channels`] output; returns the channels and the seed.
pub fn load_channels(text: &str) -> Result<(ChannelSet, u64)> {
    let mut cur = Cursor { lines: text.lines().map(str::trim).filter(|l| !l.is_empty()).collect(), at: 0 };
    if cur.line()? != "irs-swipt-channels 1" {
        return Err(Error::Parse("unrecognized header".into()));
    }
    let seed = single(cur.keyed("seed")?, "seed")?
        .parse::<u64>()
        .map_err(|e| Error::Parse(e.to_string()))?;
    let dims = cur.keyed("dims")?.into_iter().map(int).collect::<Result<Vec<_>>>()?;
    let [k, n, m] = dims[..] else {
        return Err(Error::Parse("dims takes three values".into()));
    };
    let d_bs_irs = num(&single(cur.keyed("d_bs_irs")?, "d_bs_irs")?)?;
    let d_direct = cur.keyed("d_direct")?.into_iter().map(num).collect::<Result<Vec<_>>>()?;
    let d_irs_user = cur.keyed("d_irs_user")?.into_iter().map(num).collect::<Result<Vec<_>>>()?;
    if d_direct.len() != k || d_irs_user.len() != k {
        return Err(Error::Parse("distance lists must have K entries".into()));
    }
    cur.keyed("G")?;
    let mut g = DMatrix::zeros(m, n);
    for r in 0..m {
        for c in 0..n {
            g[(r, c)] = cur.complex()?;
        }
    }
    let mut block = |label: &str, len: usize| -> Result<Vec<CVec>> {
        let mut out = Vec::with_capacity(k);
        for u in 0..k {
            if int(&single(cur.keyed(label)?, label)?)? != u {
                return Err(Error::Parse(format!("expected `{label} {u}`")));
            }
            let mut v = DVector::zeros(len);
            for i in 0..len {
                v[i] = cur.complex()?;
            }
            out.push(v);
        }
        Ok(out)
    };
    let h_r = block("h_r", m)?;
    let h_d = block("h_d", n)?;
    let ch = ChannelSet { g, h_r, h_d, d_direct, d_irs_user, d_bs_irs };
    ch.validate()?;
    Ok((ch, seed))
}

pub fn save_channels(path: impl AsRef<Path>, ch: &ChannelSet, seed: u64) -> Result<()> {
    std::fs::write(path, dump_channels(ch, seed))?;
    Ok(())
}

pub fn read_channels(path: impl AsRef<Path>) -> Result<(ChannelSet, u64)> {
    load_channels(&std::fs::read_to_string(path)?)
}
