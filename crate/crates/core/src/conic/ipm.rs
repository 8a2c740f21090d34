//! Primal-dual path-following interior-point method for block-diagonal
//! semidefinite programs in standard primal form:
//!
//! ```text
//!   min  <C, X>   s.t.  <A_i, X> = b_i  (i = 1..m),   X = diag(X_1, ..., X_p) ⪰ 0
//!   max  b'y      s.t.  C - Σ y_i A_i = Z ⪰ 0
//! ```
//!
//! Each block is either a real symmetric PSD block or a nonnegative-orthant
//! (LP) block. Search directions use the HKM scaling with a Mehrotra
//! predictor-corrector; the Schur complement system is only `m × m`, which is
//! what makes this cheap for the lifted phase-shift programs where the matrix
//! block is large but the constraint count is small.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Coefficient of one constraint (or the objective) restricted to one block.
#[derive(Debug, Clone)]
pub(crate) enum BlockCoeff {
    /// Upper-triangle entries `(r, c, v)`, `r <= c`; the matrix is symmetric.
    PsdSparse(Vec<(usize, usize, f64)>),
    PsdDense(DMatrix<f64>),
    Lp(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockKind {
    Psd(usize),
    Lp(usize),
}

impl BlockKind {
    fn dim(self) -> usize {
        match self {
            BlockKind::Psd(n) | BlockKind::Lp(n) => n,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StdProblem {
    pub blocks: Vec<BlockKind>,
    /// Objective per block (`None` = zero).
    pub c: Vec<Option<BlockCoeff>>,
    /// Constraint rows: list of `(block, coeff)`.
    pub a: Vec<Vec<(usize, BlockCoeff)>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum BlockVal {
    Psd(DMatrix<f64>),
    Lp(DVector<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Failure,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub x: Vec<BlockVal>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub y: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub tol: f64,
    pub infeas_tol: f64,
    /// A run that breaks down or stalls is still reported optimal when its
    /// best iterate reached this accuracy.
    pub reduced_tol: f64,
    pub max_iter: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            infeas_tol: 1e-8,
            reduced_tol: 1e-6,
            max_iter: 120,
        }
    }
}

// ---------------------------------------------------------------------------
// block algebra
// ---------------------------------------------------------------------------

fn coeff_inner(coeff: &BlockCoeff, x: &BlockVal) -> f64 {
    match (coeff, x) {
        (BlockCoeff::PsdSparse(entries), BlockVal::Psd(m)) => entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * m[(r, c)] } else { v * (m[(r, c)] + m[(c, r)]) })
            .sum(),
        (BlockCoeff::PsdDense(a), BlockVal::Psd(m)) => a.dot(m),
        (BlockCoeff::Lp(entries), BlockVal::Lp(v)) => entries.iter().map(|&(i, a)| a * v[i]).sum(),
        _ => panic!("block kind mismatch"),
    }
}

/// `target += alpha * coeff`
fn coeff_axpy(coeff: &BlockCoeff, alpha: f64, target: &mut BlockVal) {
    match (coeff, target) {
        (BlockCoeff::PsdSparse(entries), BlockVal::Psd(m)) => {
            for &(r, c, v) in entries {
                m[(r, c)] += alpha * v;
                if r != c {
                    m[(c, r)] += alpha * v;
                }
            }
        }
        (BlockCoeff::PsdDense(a), BlockVal::Psd(m)) => *m += a * alpha,
        (BlockCoeff::Lp(entries), BlockVal::Lp(v)) => {
            for &(i, a) in entries {
                v[i] += alpha * a;
            }
        }
        _ => panic!("block kind mismatch"),
    }
}

fn coeff_norm_sq(coeff: &BlockCoeff) -> f64 {
    match coeff {
        BlockCoeff::PsdSparse(entries) => entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum(),
        BlockCoeff::PsdDense(a) => a.norm_squared(),
        BlockCoeff::Lp(entries) => entries.iter().map(|&(_, a)| a * a).sum(),
    }
}

fn coeff_scale(coeff: &mut BlockCoeff, s: f64) {
    match coeff {
        BlockCoeff::PsdSparse(entries) => entries.iter_mut().for_each(|e| e.2 *= s),
        BlockCoeff::PsdDense(a) => *a *= s,
        BlockCoeff::Lp(entries) => entries.iter_mut().for_each(|e| e.1 *= s),
    }
}

fn coeff_trace(coeff: &BlockCoeff) -> f64 {
    match coeff {
        BlockCoeff::PsdSparse(entries) => entries.iter().filter(|e| e.0 == e.1).map(|e| e.2).sum(),
        BlockCoeff::PsdDense(a) => a.trace(),
        BlockCoeff::Lp(entries) => entries.iter().map(|e| e.1).sum(),
    }
}

fn zeros_like(kinds: &[BlockKind]) -> Vec<BlockVal> {
    kinds
        .iter()
        .map(|k| match *k {
            BlockKind::Psd(n) => BlockVal::Psd(DMatrix::zeros(n, n)),
            BlockKind::Lp(n) => BlockVal::Lp(DVector::zeros(n)),
        })
        .collect()
}

fn val_dot(a: &[BlockVal], b: &[BlockVal]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (BlockVal::Psd(p), BlockVal::Psd(q)) => p.dot(q),
            (BlockVal::Lp(p), BlockVal::Lp(q)) => p.dot(q),
            _ => unreachable!(),
        })
        .sum()
}

fn val_norm(a: &[BlockVal]) -> f64 {
    val_dot(a, a).sqrt()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` (capped at `cap`) with `x + alpha * dx` in the cone.
fn max_step(x: &[BlockVal], dx: &[BlockVal], cap: f64) -> f64 {
    let mut alpha = cap;
    for (xb, dxb) in x.iter().zip(dx) {
        match (xb, dxb) {
            (BlockVal::Psd(xm), BlockVal::Psd(dm)) => {
                let Some(chol) = Cholesky::new(xm.clone()) else {
                    return 0.0;
                };
                let l = chol.l();
                // L^{-1} dX L^{-T}
                let linv = match l.clone().try_inverse() {
                    Some(v) => v,
                    None => return 0.0,
                };
                let t = &linv * dm * linv.transpose();
                let eig = SymmetricEigen::new(sym(&t));
                let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                if lmin < 0.0 {
                    alpha = alpha.min(-1.0 / lmin);
                }
            }
            (BlockVal::Lp(xv), BlockVal::Lp(dv)) => {
                for i in 0..xv.len() {
                    if dv[i] < 0.0 {
                        alpha = alpha.min(-xv[i] / dv[i]);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    alpha.max(0.0)
}

fn add_scaled(x: &mut [BlockVal], dx: &[BlockVal], alpha: f64) {
    for (xb, dxb) in x.iter_mut().zip(dx) {
        match (xb, dxb) {
            (BlockVal::Psd(p), BlockVal::Psd(q)) => {
                *p += q * alpha;
                let s = sym(p);
                *p = s;
            }
            (BlockVal::Lp(p), BlockVal::Lp(q)) => p.axpy(alpha, q, 1.0),
            _ => unreachable!(),
        }
    }
}

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

struct Scaled {
    prob: StdProblem,
    row_scale: Vec<f64>,
    obj_scale: f64,
}

fn equilibrate(mut prob: StdProblem) -> Scaled {
    let mut row_scale = Vec::with_capacity(prob.a.len());
    for (row, bi) in prob.a.iter_mut().zip(prob.b.iter_mut()) {
        let nrm = row.iter().map(|(_, c)| coeff_norm_sq(c)).sum::<f64>().sqrt();
        let s = if nrm > 0.0 { 1.0 / nrm } else { 1.0 };
        for (_, c) in row.iter_mut() {
            coeff_scale(c, s);
        }
        *bi *= s;
        row_scale.push(s);
    }
    let cn = prob.c.iter().flatten().map(coeff_norm_sq).sum::<f64>().sqrt();
    let obj_scale = if cn > 0.0 { 1.0 / cn.max(1e-300) } else { 1.0 };
    for c in prob.c.iter_mut().flatten() {
        coeff_scale(c, obj_scale);
    }
    Scaled {
        prob,
        row_scale,
        obj_scale,
    }
}

struct Workspace<'a> {
    p: &'a StdProblem,
    /// For each block, the constraint rows that touch it with their coefficient.
    by_block: Vec<Vec<(usize, &'a BlockCoeff)>>,
}

impl<'a> Workspace<'a> {
    fn new(p: &'a StdProblem) -> Self {
        let mut by_block = vec![Vec::new(); p.blocks.len()];
        for (i, row) in p.a.iter().enumerate() {
            for (b, c) in row {
                by_block[*b].push((i, c));
            }
        }
        Self { p, by_block }
    }

    fn a_op(&self, x: &[BlockVal]) -> DVector<f64> {
        DVector::from_iterator(
            self.p.a.len(),
            self.p.a.iter().map(|row| row.iter().map(|(b, c)| coeff_inner(c, &x[*b])).sum::<f64>()),
        )
    }

    fn a_adj(&self, y: &DVector<f64>) -> Vec<BlockVal> {
        let mut out = zeros_like(&self.p.blocks);
        for (i, row) in self.p.a.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (b, c) in row {
                coeff_axpy(c, y[i], &mut out[*b]);
            }
        }
        out
    }

    fn c_val(&self) -> Vec<BlockVal> {
        let mut out = zeros_like(&self.p.blocks);
        for (b, c) in self.p.c.iter().enumerate() {
            if let Some(c) = c {
                coeff_axpy(c, 1.0, &mut out[b]);
            }
        }
        out
    }

    /// Schur complement `M_ij = <A_i, X A_j Z^{-1}>`.
    fn schur(&self, x: &[BlockVal], zinv: &[BlockVal]) -> DMatrix<f64> {
        let m = self.p.a.len();
        let mut mat = DMatrix::<f64>::zeros(m, m);
        for (b, rows) in self.by_block.iter().enumerate() {
            match (&x[b], &zinv[b]) {
                (BlockVal::Psd(xm), BlockVal::Psd(zi)) => {
                    // dense products for dense coefficients
                    let mut dense_prod: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(rows.len());
                    for (_, c) in rows {
                        dense_prod.push(match c {
                            BlockCoeff::PsdDense(a) => Some(xm * a * zi),
                            _ => None,
                        });
                    }
                    for p in 0..rows.len() {
                        for q in p..rows.len() {
                            let (i, ci) = rows[p];
                            let (j, cj) = rows[q];
                            let v = match (&dense_prod[p], &dense_prod[q]) {
                                (_, Some(bq)) => inner_nonsym(ci, bq),
                                (Some(bp), None) => inner_nonsym(cj, bp),
                                (None, None) => sparse_pair(ci, cj, xm, zi),
                            };
                            mat[(i, j)] += v;
                            if i != j {
                                mat[(j, i)] += v;
                            }
                        }
                    }
                }
                (BlockVal::Lp(xv), BlockVal::Lp(ziv)) => {
                    let n = xv.len();
                    let mut touch: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
                    for (i, c) in rows {
                        if let BlockCoeff::Lp(entries) = c {
                            for &(k, a) in entries {
                                touch[k].push((*i, a));
                            }
                        }
                    }
                    for k in 0..n {
                        let d = xv[k] * ziv[k];
                        for &(i, ai) in &touch[k] {
                            for &(j, aj) in &touch[k] {
                                mat[(i, j)] += ai * aj * d;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        mat
    }
}

/// `Tr(A B)` for symmetric `A` given as coefficient and a general `B`.
fn inner_nonsym(a: &BlockCoeff, bmat: &DMatrix<f64>) -> f64 {
    match a {
        BlockCoeff::PsdSparse(entries) => entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * bmat[(r, c)] } else { v * (bmat[(r, c)] + bmat[(c, r)]) })
            .sum(),
        BlockCoeff::PsdDense(am) => am.dot(bmat),
        BlockCoeff::Lp(_) => unreachable!(),
    }
}

/// `Tr(A X B Z^{-1})` for two sparse symmetric coefficients.
fn sparse_pair(a: &BlockCoeff, b: &BlockCoeff, x: &DMatrix<f64>, zi: &DMatrix<f64>) -> f64 {
    let (BlockCoeff::PsdSparse(ea), BlockCoeff::PsdSparse(eb)) = (a, b) else {
        unreachable!()
    };
    let mut s = 0.0;
    for &(p, q, va) in ea {
        let pa: &[(usize, usize)] = if p == q { &[(p, q)] } else { &[(p, q), (q, p)] };
        for &(r, t, vb) in eb {
            let pb: &[(usize, usize)] = if r == t { &[(r, t)] } else { &[(r, t), (t, r)] };
            // Tr(e_p e_q' X e_r e_t' Zi) = X[q,r] Zi[t,p]
            for &(p1, q1) in pa {
                for &(r1, t1) in pb {
                    s += va * vb * x[(q1, r1)] * zi[(t1, p1)];
                }
            }
        }
    }
    s
}

fn solve_spd(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let diag_max = mat.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = mat.clone();
        if reg > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += reg;
            }
        }
        if let Some(ch) = Cholesky::new(m) {
            let mut sol = ch.solve(rhs);
            // iterative refinement against the unregularized matrix
            for _ in 0..3 {
                let r = rhs - mat * &sol;
                if r.norm() <= 1e-15 * rhs.norm() {
                    break;
                }
                sol += ch.solve(&r);
            }
            if sol.iter().all(|v| v.is_finite()) {
                return Some(sol);
            }
        }
        reg = if reg == 0.0 { 1e-14 * diag_max } else { reg * 100.0 };
    }
    None
}

fn invert_blocks(z: &[BlockVal]) -> Option<Vec<BlockVal>> {
    z.iter()
        .map(|b| match b {
            BlockVal::Psd(m) => Cholesky::new(m.clone()).map(|c| BlockVal::Psd(sym(&c.inverse()))),
            BlockVal::Lp(v) => {
                if v.iter().all(|&e| e > 0.0) {
                    Some(BlockVal::Lp(v.map(|e| 1.0 / e)))
                } else {
                    None
                }
            }
        })
        .collect()
}

/// HKM direction for target term `t` (block-wise), dual residual `rd`.
#[allow(clippy::too_many_arguments)]
fn direction(
    ws: &Workspace,
    schur: &DMatrix<f64>,
    x: &[BlockVal],
    zinv: &[BlockVal],
    rp: &DVector<f64>,
    rd: &[BlockVal],
    t: &[BlockVal],
) -> Option<(Vec<BlockVal>, DVector<f64>, Vec<BlockVal>)> {
    // K = X Rd Z^{-1} (per block, LP elementwise)
    let k: Vec<BlockVal> = x
        .iter()
        .zip(rd)
        .zip(zinv)
        .map(|((xb, rb), zb)| match (xb, rb, zb) {
            (BlockVal::Psd(xm), BlockVal::Psd(rm), BlockVal::Psd(zm)) => BlockVal::Psd(sym(&(xm * rm * zm))),
            (BlockVal::Lp(xv), BlockVal::Lp(rv), BlockVal::Lp(zv)) => {
                BlockVal::Lp(xv.component_mul(rv).component_mul(zv))
            }
            _ => unreachable!(),
        })
        .collect();
    let rhs = rp - ws.a_op(t) + ws.a_op(&k);
    let dy = solve_spd(schur, &rhs)?;
    let aty = ws.a_adj(&dy);
    let dz: Vec<BlockVal> = rd
        .iter()
        .zip(&aty)
        .map(|(r, a)| match (r, a) {
            (BlockVal::Psd(rm), BlockVal::Psd(am)) => BlockVal::Psd(rm - am),
            (BlockVal::Lp(rv), BlockVal::Lp(av)) => BlockVal::Lp(rv - av),
            _ => unreachable!(),
        })
        .collect();
    let dx: Vec<BlockVal> = t
        .iter()
        .zip(x)
        .zip(&dz)
        .zip(zinv)
        .map(|(((tb, xb), dzb), zb)| match (tb, xb, dzb, zb) {
            (BlockVal::Psd(tm), BlockVal::Psd(xm), BlockVal::Psd(dzm), BlockVal::Psd(zm)) => {
                BlockVal::Psd(sym(&(tm - xm * dzm * zm)))
            }
            (BlockVal::Lp(tv), BlockVal::Lp(xv), BlockVal::Lp(dzv), BlockVal::Lp(zv)) => {
                BlockVal::Lp(tv - xv.component_mul(dzv).component_mul(zv))
            }
            _ => unreachable!(),
        })
        .collect();
    if dx.iter().chain(dz.iter()).any(|b| match b {
        BlockVal::Psd(m) => m.iter().any(|v| !v.is_finite()),
        BlockVal::Lp(v) => v.iter().any(|v| !v.is_finite()),
    }) {
        return None;
    }
    Some((dx, dy, dz))
}

/// Substitute `X = X' + eps I` in every PSD block (used by the failure retry).
pub(crate) fn shift_psd_lower_bound(prob: &StdProblem, eps: f64) -> StdProblem {
    let mut out = prob.clone();
    for (row, bi) in out.a.iter().zip(out.b.iter_mut()) {
        for (b, c) in row {
            if matches!(prob.blocks[*b], BlockKind::Psd(_)) {
                *bi -= eps * coeff_trace(c);
            }
        }
    }
    out
}

pub(crate) fn solve(prob: &StdProblem, settings: &IpmSettings) -> IpmResult {
    let scaled = equilibrate(prob.clone());
    let p = &scaled.prob;
    let ws = Workspace::new(p);
    let m = p.a.len();
    let nu: f64 = p.blocks.iter().map(|k| k.dim() as f64).sum();
    let b = DVector::from_vec(p.b.clone());
    let bnorm = b.norm();
    let c = ws.c_val();
    let cnorm = val_norm(&c);

    // starting point
    let mut x = zeros_like(&p.blocks);
    let mut z = zeros_like(&p.blocks);
    for (bi, kind) in p.blocks.iter().enumerate() {
        let n = kind.dim() as f64;
        let mut amax: f64 = 0.0;
        let mut xi: f64 = 10.0_f64.max(n.sqrt());
        for (i, coeff) in &ws.by_block[bi] {
            let an = coeff_norm_sq(coeff).sqrt();
            amax = amax.max(an);
            xi = xi.max(n * (1.0 + p.b[*i].abs()) / (1.0 + an));
        }
        let cb = p.c[bi].as_ref().map(|cc| coeff_norm_sq(cc).sqrt()).unwrap_or(0.0);
        let eta = 10.0_f64.max(n.sqrt()).max(amax).max(cb);
        match (&mut x[bi], &mut z[bi]) {
            (BlockVal::Psd(xm), BlockVal::Psd(zm)) => {
                xm.fill_with_identity();
                *xm *= xi;
                zm.fill_with_identity();
                *zm *= eta;
            }
            (BlockVal::Lp(xv), BlockVal::Lp(zv)) => {
                xv.fill(xi);
                zv.fill(eta);
            }
            _ => unreachable!(),
        }
    }
    let mut y = DVector::<f64>::zeros(m);

    let mut status = IpmStatus::Failure;
    let mut iterations = 0;
    let mut pinf = f64::INFINITY;
    let mut dinf = f64::INFINITY;
    let mut gap = f64::INFINITY;
    let mut small_steps = 0;
    let mut best: Option<(f64, Vec<BlockVal>, DVector<f64>, [f64; 3])> = None;
    let mut since_best = 0;

    for it in 0..settings.max_iter {
        iterations = it;
        let rp = &b - ws.a_op(&x);
        let aty = ws.a_adj(&y);
        let rd: Vec<BlockVal> = c
            .iter()
            .zip(&z)
            .zip(&aty)
            .map(|((cb, zb), ab)| match (cb, zb, ab) {
                (BlockVal::Psd(cm), BlockVal::Psd(zm), BlockVal::Psd(am)) => BlockVal::Psd(cm - zm - am),
                (BlockVal::Lp(cv), BlockVal::Lp(zv), BlockVal::Lp(av)) => BlockVal::Lp(cv - zv - av),
                _ => unreachable!(),
            })
            .collect();
        let xz = val_dot(&x, &z);
        let mu = xz / nu;
        let pobj = val_dot(&c, &x);
        let dobj = b.dot(&y);
        pinf = rp.norm() / (1.0 + bnorm);
        dinf = val_norm(&rd) / (1.0 + cnorm);
        let denom = 1.0 + pobj.abs() + dobj.abs();
        gap = ((pobj - dobj).abs()).max(xz) / denom;
        log::trace!("ipm {it}: pobj {pobj:.6e} dobj {dobj:.6e} pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e}");
        if pinf <= settings.tol && dinf <= settings.tol && gap <= settings.tol {
            status = IpmStatus::Optimal;
            best = None;
            break;
        }
        let merit = pinf.max(dinf).max(gap);
        if best.as_ref().is_none_or(|b| merit < 0.9 * b.0) {
            best = Some((merit, x.clone(), y.clone(), [pinf, dinf, gap]));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 12 {
                break;
            }
        }
        // infeasibility certificates
        if dobj > 0.0 {
            let ray = val_norm(
                &aty.iter()
                    .zip(&z)
                    .map(|(a, zb)| match (a, zb) {
                        (BlockVal::Psd(am), BlockVal::Psd(zm)) => BlockVal::Psd(am + zm),
                        (BlockVal::Lp(av), BlockVal::Lp(zv)) => BlockVal::Lp(av + zv),
                        _ => unreachable!(),
                    })
                    .collect::<Vec<_>>(),
            );
            if ray / dobj < settings.infeas_tol {
                status = IpmStatus::PrimalInfeasible;
                break;
            }
        }
        if pobj < 0.0 {
            let ax = ws.a_op(&x).norm();
            if ax / (-pobj) < settings.infeas_tol && pinf > settings.tol {
                status = IpmStatus::DualInfeasible;
                break;
            }
        }

        let Some(zinv) = invert_blocks(&z) else {
            break;
        };
        let schur = ws.schur(&x, &zinv);

        // predictor
        let t_aff: Vec<BlockVal> = x
            .iter()
            .map(|xb| match xb {
                BlockVal::Psd(xm) => BlockVal::Psd(-xm),
                BlockVal::Lp(xv) => BlockVal::Lp(-xv),
            })
            .collect();
        let Some((dx_a, _dy_a, dz_a)) = direction(&ws, &schur, &x, &zinv, &rp, &rd, &t_aff) else {
            break;
        };
        let ap = max_step(&x, &dx_a, 1.0);
        let ad = max_step(&z, &dz_a, 1.0);
        let mut xa = x.clone();
        add_scaled(&mut xa, &dx_a, ap);
        let mut za = z.clone();
        add_scaled(&mut za, &dz_a, ad);
        let mu_a = val_dot(&xa, &za) / nu;
        let sigma = (mu_a / mu).clamp(0.0, 1.0).powi(3).max(if pinf > 1e3 * settings.tol { 1e-3 } else { 0.0 });

        // corrector
        let t_cor: Vec<BlockVal> = x
            .iter()
            .zip(&zinv)
            .zip(dx_a.iter().zip(&dz_a))
            .map(|((xb, zb), (dxb, dzb))| match (xb, zb, dxb, dzb) {
                (BlockVal::Psd(xm), BlockVal::Psd(zm), BlockVal::Psd(dxm), BlockVal::Psd(dzm)) => {
                    BlockVal::Psd(zm * (sigma * mu) - xm - sym(&(dxm * dzm * zm)))
                }
                (BlockVal::Lp(xv), BlockVal::Lp(zv), BlockVal::Lp(dxv), BlockVal::Lp(dzv)) => {
                    BlockVal::Lp(zv * (sigma * mu) - xv - dxv.component_mul(dzv).component_mul(zv))
                }
                _ => unreachable!(),
            })
            .collect();
        let Some((dx, dy, dz)) = direction(&ws, &schur, &x, &zinv, &rp, &rd, &t_cor) else {
            break;
        };
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let ap = (gamma * max_step(&x, &dx, 1.0 / gamma)).min(1.0);
        let ad = (gamma * max_step(&z, &dz, 1.0 / gamma)).min(1.0);
        if ap.min(ad) < 1e-10 {
            small_steps += 1;
            if small_steps > 3 {
                break;
            }
        } else {
            small_steps = 0;
        }
        add_scaled(&mut x, &dx, ap);
        add_scaled(&mut z, &dz, ad);
        y.axpy(ad, &dy, 1.0);
    }

    if let Some((merit, bx, by, [bp, bd, bg])) = best {
        if status == IpmStatus::Failure {
            x = bx;
            y = by;
            pinf = bp;
            dinf = bd;
            gap = bg;
            if merit <= settings.reduced_tol {
                status = IpmStatus::Optimal;
            }
        }
    }
    // undo scaling on y: constraints were scaled by row_scale, objective by obj_scale
    let yv: Vec<f64> = y
        .iter()
        .zip(&scaled.row_scale)
        .map(|(yi, s)| yi * s / scaled.obj_scale)
        .collect();
    IpmResult {
        status,
        x,
        y: yv,
        iterations,
        primal_residual: pinf,
        dual_residual: dinf,
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_entry(i: usize, v: f64) -> BlockCoeff {
        BlockCoeff::PsdSparse(vec![(i, i, v)])
    }

    #[test]
    fn lp_only() {
        // min x0 + 2 x1  s.t. x0 + x1 = 1
        let prob = StdProblem {
            blocks: vec![BlockKind::Lp(2)],
            c: vec![Some(BlockCoeff::Lp(vec![(0, 1.0), (1, 2.0)]))],
            a: vec![vec![(0, BlockCoeff::Lp(vec![(0, 1.0), (1, 1.0)]))]],
            b: vec![1.0],
        };
        let r = solve(&prob, &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        let BlockVal::Lp(x) = &r.x[0] else { panic!() };
        assert!((x[0] - 1.0).abs() < 1e-7 && x[1].abs() < 1e-7);
    }

    #[test]
    fn min_eigenvalue() {
        // min <C,X> s.t. Tr X = 1 -> lambda_min(C)
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 3.0]);
        let prob = StdProblem {
            blocks: vec![BlockKind::Psd(2)],
            c: vec![Some(BlockCoeff::PsdDense(c))],
            a: vec![vec![(0, BlockCoeff::PsdSparse(vec![(0, 0, 1.0), (1, 1, 1.0)]))]],
            b: vec![1.0],
        };
        let r = solve(&prob, &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        let BlockVal::Psd(x) = &r.x[0] else { panic!() };
        let obj = x[(0, 0)] + 2.0 * x[(0, 1)] + 3.0 * x[(1, 1)];
        assert!((obj - (2.0 - 2f64.sqrt())).abs() < 1e-7, "{obj}");
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let prob = StdProblem {
            blocks: vec![BlockKind::Psd(1)],
            c: vec![Some(diag_entry(0, 1.0))],
            a: vec![vec![(0, diag_entry(0, 1.0))], vec![(0, diag_entry(0, 1.0))]],
            b: vec![1.0, 2.0],
        };
        let r = solve(&prob, &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::PrimalInfeasible);
    }

    #[test]
    fn negative_requirement_is_infeasible() {
        // X >= 0 with X11 = -1
        let prob = StdProblem {
            blocks: vec![BlockKind::Psd(2)],
            c: vec![None],
            a: vec![vec![(0, diag_entry(0, 1.0))]],
            b: vec![-1.0],
        };
        let r = solve(&prob, &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::PrimalInfeasible);
    }

    #[test]
    fn maxcut_like_relaxation_is_fast_and_bounded() {
        use rand::{Rng, SeedableRng};
        let n = 62;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut c = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random::<f64>() - 0.5;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let prob = StdProblem {
            blocks: vec![BlockKind::Psd(n)],
            c: vec![Some(BlockCoeff::PsdDense(c.clone()))],
            a: (0..n).map(|i| vec![(0, diag_entry(i, 1.0))]).collect(),
            b: vec![1.0; n],
        };
        let r = solve(&prob, &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Optimal);
        let BlockVal::Psd(x) = &r.x[0] else { panic!() };
        // relaxation lower-bounds every +-1 assignment; compare with n*lambda_min bound
        let obj = c.dot(x);
        let lmin = SymmetricEigen::new(c.clone()).eigenvalues.min();
        assert!(obj >= n as f64 * lmin - 1e-6);
        for i in 0..n {
            assert!((x[(i, i)] - 1.0).abs() < 1e-7);
        }
        // dual bound: b'y equals the primal objective at optimality
        let dual: f64 = r.y.iter().sum();
        assert!((dual - obj).abs() < 1e-5 * (1.0 + obj.abs()), "{dual} vs {obj}");
    }
}
