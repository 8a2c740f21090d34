//! Lifted convex subproblems in a solver-agnostic form and their solution.
//!
//! Hermitian matrix variables are mapped to real symmetric blocks of twice the
//! size, `X ↦ [[Re X, −Im X], [Im X, Re X]]`, with `Re Tr(AX) = ½ Tr(Ã Y)`.
//! Scalar variables become shifted, possibly split, nonnegative variables in
//! one LP block; inequalities get slack variables.

mod ipm;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CMat, CVec};
use ipm::{BlockCoeff, BlockKind, BlockVal, IpmSettings, IpmStatus, StdProblem};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_RANK_TOL: f64 = 1e-6;
/// Diagonal shift used by the single retry after a numerical failure.
pub const RETRY_SHIFT: f64 = 1e-9;

/// Hermitian coefficient matrix of a trace term.
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianCoeff {
    Dense(CMat),
    /// Upper-triangle entries `(r, c, v)` with `r <= c`; the lower part is the
    /// conjugate mirror. Diagonal entries must be real.
    Sparse(Vec<(usize, usize, Complex64)>),
}

impl HermitianCoeff {
    pub fn diag_unit(i: usize) -> Self {
        Self::Sparse(vec![(i, i, Complex64::new(1.0, 0.0))])
    }

    pub fn to_dense(&self, n: usize) -> CMat {
        match self {
            Self::Dense(m) => m.clone(),
            Self::Sparse(e) => {
                let mut m = CMat::zeros(n, n);
                for &(r, c, v) in e {
                    m[(r, c)] += v;
                    if r != c {
                        m[(c, r)] += v.conj();
                    }
                }
                m
            }
        }
    }

    /// Re Tr(A X).
    pub fn inner(&self, x: &CMat) -> f64 {
        match self {
            Self::Dense(a) => a.iter().zip(x.transpose().iter()).map(|(a, x)| (a * x).re).sum(),
            Self::Sparse(e) => e
                .iter()
                .map(|&(r, c, v)| if r == c { (v * x[(r, r)]).re } else { 2.0 * (v * x[(c, r)]).re })
                .sum(),
        }
    }

    fn dim_ok(&self, n: usize) -> bool {
        match self {
            Self::Dense(m) => m.nrows() == n && m.ncols() == n,
            Self::Sparse(e) => e.iter().all(|&(r, c, _)| r <= c && c < n),
        }
    }

    fn is_hermitian(&self) -> bool {
        match self {
            Self::Dense(m) => {
                let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                (m - m.adjoint()).iter().all(|z| z.norm() <= 1e-12 * scale)
            }
            Self::Sparse(e) => e.iter().all(|&(r, c, v)| r != c || v.im.abs() <= 1e-12 * v.norm().max(f64::MIN_POSITIVE)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub matrix_terms: Vec<(usize, HermitianCoeff)>,
    pub scalar_terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Self::default() }
    }

    pub fn mat(mut self, var: usize, coeff: HermitianCoeff) -> Self {
        self.matrix_terms.push((var, coeff));
        self
    }

    pub fn scalar(mut self, var: usize, c: f64) -> Self {
        self.scalar_terms.push((var, c));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add(mut self, other: &LinearExpr, s: f64) -> Self {
        for (v, c) in &other.matrix_terms {
            self.matrix_terms.push((*v, scale_coeff(c, s)));
        }
        for &(v, c) in &other.scalar_terms {
            self.scalar_terms.push((v, s * c));
        }
        self.constant += s * other.constant;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        LinearExpr::new().add(self, s)
    }

    pub fn evaluate(&self, matrices: &[CMat], scalars: &[f64]) -> f64 {
        self.constant
            + self.matrix_terms.iter().map(|(v, c)| c.inner(&matrices[*v])).sum::<f64>()
            + self.scalar_terms.iter().map(|&(v, c)| c * scalars[v]).sum::<f64>()
    }
}

fn scale_coeff(c: &HermitianCoeff, s: f64) -> HermitianCoeff {
    match c {
        HermitianCoeff::Dense(m) => HermitianCoeff::Dense(m * Complex64::new(s, 0.0)),
        HermitianCoeff::Sparse(e) => HermitianCoeff::Sparse(e.iter().map(|&(r, c, v)| (r, c, v * s)).collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: LinearExpr,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Minimize(LinearExpr),
    Maximize(LinearExpr),
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixVar {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSdpProblem {
    pub matrix_vars: Vec<MatrixVar>,
    pub scalar_vars: Vec<ScalarVar>,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
}

impl Default for HermitianSdpProblem {
    fn default() -> Self {
        Self { matrix_vars: Vec::new(), scalar_vars: Vec::new(), objective: Objective::Feasibility, constraints: Vec::new() }
    }
}

impl HermitianSdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_matrix_var(&mut self, name: impl Into<String>, dim: usize) -> usize {
        self.matrix_vars.push(MatrixVar { name: name.into(), dim });
        self.matrix_vars.len() - 1
    }

    pub fn add_scalar_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.scalar_vars.push(ScalarVar { name: name.into(), lower, upper });
        self.scalar_vars.len() - 1
    }

    pub fn constrain(&mut self, expr: LinearExpr, sense: Sense, rhs: f64, label: impl Into<String>) {
        self.constraints.push(Constraint { expr, sense, rhs, label: label.into() });
    }

    pub fn validate(&self) -> Result<()> {
        let check_expr = |e: &LinearExpr, what: &str| -> Result<()> {
            for (v, c) in &e.matrix_terms {
                let var = self.matrix_vars.get(*v).ok_or_else(|| Error::Dimension(format!("{what}: unknown matrix variable {v}")))?;
                if !c.dim_ok(var.dim) {
                    return Err(Error::Dimension(format!("{what}: coefficient does not fit `{}`", var.name)));
                }
                if !c.is_hermitian() {
                    return Err(Error::Domain(format!("{what}: coefficient on `{}` is not Hermitian", var.name)));
                }
            }
            for &(v, c) in &e.scalar_terms {
                if v >= self.scalar_vars.len() {
                    return Err(Error::Dimension(format!("{what}: unknown scalar variable {v}")));
                }
                if !c.is_finite() {
                    return Err(Error::Domain(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        for (i, m) in self.matrix_vars.iter().enumerate() {
            if m.dim == 0 {
                return Err(Error::Dimension(format!("matrix variable {i} has dimension 0")));
            }
        }
        for s in &self.scalar_vars {
            if s.lower.is_nan() || s.upper.is_nan() || s.lower > s.upper || s.lower == f64::INFINITY || s.upper == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("scalar `{}` has bounds [{}, {}]", s.name, s.lower, s.upper)));
            }
        }
        match &self.objective {
            Objective::Minimize(e) | Objective::Maximize(e) => check_expr(e, "objective")?,
            Objective::Feasibility => {}
        }
        for c in &self.constraints {
            check_expr(&c.expr, &c.label)?;
            if !c.rhs.is_finite() {
                return Err(Error::Domain(format!("{}: non-finite right-hand side", c.label)));
            }
        }
        Ok(())
    }

    /// Plain-text listing: variables, then one line per coefficient triplet.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "matrix_vars {}", self.matrix_vars.len());
        for (i, v) in self.matrix_vars.iter().enumerate() {
            let _ = writeln!(s, "X {i} {} {}", v.name, v.dim);
        }
        let _ = writeln!(s, "scalar_vars {}", self.scalar_vars.len());
        for (i, v) in self.scalar_vars.iter().enumerate() {
            let _ = writeln!(s, "t {i} {} {:e} {:e}", v.name, v.lower, v.upper);
        }
        let expr_lines = |s: &mut String, e: &LinearExpr| {
            for (v, c) in &e.matrix_terms {
                let n = self.matrix_vars[*v].dim;
                let dense = c.to_dense(n);
                for r in 0..n {
                    for cc in r..n {
                        let z = dense[(r, cc)];
                        if z.norm() != 0.0 {
                            let _ = writeln!(s, "  X {v} {r} {cc} {:e} {:e}", z.re, z.im);
                        }
                    }
                }
            }
            for &(v, c) in &e.scalar_terms {
                let _ = writeln!(s, "  t {v} {c:e}");
            }
            if e.constant != 0.0 {
                let _ = writeln!(s, "  const {:e}", e.constant);
            }
        };
        match &self.objective {
            Objective::Minimize(e) => {
                let _ = writeln!(s, "minimize");
                expr_lines(&mut s, e);
            }
            Objective::Maximize(e) => {
                let _ = writeln!(s, "maximize");
                expr_lines(&mut s, e);
            }
            Objective::Feasibility => {
                let _ = writeln!(s, "feasibility");
            }
        }
        let _ = writeln!(s, "constraints {}", self.constraints.len());
        for c in &self.constraints {
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Eq => "==",
                Sense::Ge => ">=",
            };
            let _ = writeln!(s, "row {} {op} {:e}", c.label.replace(char::is_whitespace, "_"), c.rhs);
            expr_lines(&mut s, &c.expr);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub retried: bool,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub matrices: Vec<CMat>,
    pub scalars: Vec<f64>,
    pub objective: f64,
    pub stats: SolverStats,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// How one scalar variable is expressed through LP variables.
struct ScalarMap {
    offset: f64,
    parts: Vec<(usize, f64)>,
}

struct Lowered {
    std: StdProblem,
    scalar_maps: Vec<ScalarMap>,
    lp_block: Option<usize>,
}

fn embed(coeff: &HermitianCoeff, n: usize) -> BlockCoeff {
    match coeff {
        HermitianCoeff::Dense(a) => {
            let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
            for r in 0..n {
                for c in 0..n {
                    let z = a[(r, c)] * 0.5;
                    m[(r, c)] = z.re;
                    m[(n + r, n + c)] = z.re;
                    m[(r, n + c)] = -z.im;
                    m[(n + r, c)] = z.im;
                }
            }
            BlockCoeff::PsdDense(m)
        }
        HermitianCoeff::Sparse(entries) => {
            let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for &(r, c, v) in entries {
                let h = v * 0.5;
                *acc.entry((r, c)).or_default() += h.re;
                *acc.entry((n + r, n + c)).or_default() += h.re;
                if r != c {
                    *acc.entry((r, n + c)).or_default() -= h.im;
                    *acc.entry((c, n + r)).or_default() += h.im;
                }
            }
            BlockCoeff::PsdSparse(acc.into_iter().filter(|(_, v)| *v != 0.0).map(|((r, c), v)| (r, c, v)).collect())
        }
    }
}

fn merge(a: BlockCoeff, b: BlockCoeff, dim: usize) -> BlockCoeff {
    use BlockCoeff::*;
    match (a, b) {
        (PsdSparse(mut x), PsdSparse(y)) => {
            x.extend(y);
            let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (r, c, v) in x {
                *acc.entry((r, c)).or_default() += v;
            }
            PsdSparse(acc.into_iter().map(|((r, c), v)| (r, c, v)).collect())
        }
        (a, b) => {
            let mut m = to_dense_real(&a, dim);
            m += to_dense_real(&b, dim);
            PsdDense(m)
        }
    }
}

fn to_dense_real(c: &BlockCoeff, dim: usize) -> DMatrix<f64> {
    match c {
        BlockCoeff::PsdDense(m) => m.clone(),
        BlockCoeff::PsdSparse(e) => {
            let mut m = DMatrix::zeros(dim, dim);
            for &(r, c, v) in e {
                m[(r, c)] += v;
                if r != c {
                    m[(c, r)] += v;
                }
            }
            m
        }
        BlockCoeff::Lp(_) => unreachable!("LP coefficient in a PSD block"),
    }
}

fn lower(p: &HermitianSdpProblem) -> Lowered {
    let nm = p.matrix_vars.len();
    let mut blocks: Vec<BlockKind> = p.matrix_vars.iter().map(|v| BlockKind::Psd(2 * v.dim)).collect();
    let mut n_lp = 0usize;
    let mut new_lp = || {
        n_lp += 1;
        n_lp - 1
    };
    let mut extra_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let scalar_maps: Vec<ScalarMap> = p
        .scalar_vars
        .iter()
        .map(|v| {
            let (lo, hi) = (v.lower, v.upper);
            if lo == hi {
                ScalarMap { offset: lo, parts: vec![] }
            } else if lo.is_finite() {
                let a = new_lp();
                if hi.is_finite() {
                    let s = new_lp();
                    extra_rows.push((vec![(a, 1.0), (s, 1.0)], hi - lo));
                }
                ScalarMap { offset: lo, parts: vec![(a, 1.0)] }
            } else if hi.is_finite() {
                ScalarMap { offset: hi, parts: vec![(new_lp(), -1.0)] }
            } else {
                let (a, b) = (new_lp(), new_lp());
                ScalarMap { offset: 0.0, parts: vec![(a, 1.0), (b, -1.0)] }
            }
        })
        .collect();

    // row assembly; returns per-block coefficients and the constant moved out
    let lower_expr = |e: &LinearExpr, lp_terms: &mut Vec<(usize, f64)>| -> (Vec<(usize, BlockCoeff)>, f64) {
        let mut per_block: BTreeMap<usize, BlockCoeff> = BTreeMap::new();
        for (v, c) in &e.matrix_terms {
            let n = p.matrix_vars[*v].dim;
            let emb = embed(c, n);
            let merged = match per_block.remove(v) {
                Some(prev) => merge(prev, emb, 2 * n),
                None => emb,
            };
            per_block.insert(*v, merged);
        }
        let mut constant = e.constant;
        for &(v, c) in &e.scalar_terms {
            let map = &scalar_maps[v];
            constant += c * map.offset;
            for &(lp, s) in &map.parts {
                lp_terms.push((lp, c * s));
            }
        }
        (per_block.into_iter().collect(), constant)
    };

    let mut rows: Vec<(Vec<(usize, BlockCoeff)>, Vec<(usize, f64)>, f64)> = Vec::new();
    for con in &p.constraints {
        let mut lp_terms = Vec::new();
        let (mats, constant) = lower_expr(&con.expr, &mut lp_terms);
        match con.sense {
            Sense::Le => lp_terms.push((new_lp(), 1.0)),
            Sense::Ge => lp_terms.push((new_lp(), -1.0)),
            Sense::Eq => {}
        }
        rows.push((mats, lp_terms, con.rhs - constant));
    }
    for (terms, rhs) in extra_rows {
        rows.push((Vec::new(), terms, rhs));
    }

    let (obj_mats, obj_lp) = match &p.objective {
        Objective::Feasibility => (Vec::new(), Vec::new()),
        Objective::Minimize(e) | Objective::Maximize(e) => {
            let sign = if matches!(p.objective, Objective::Maximize(_)) { -1.0 } else { 1.0 };
            let mut lp_terms = Vec::new();
            let (mats, _) = lower_expr(&e.scaled(sign), &mut lp_terms);
            (mats, lp_terms)
        }
    };

    let lp_block = if n_lp > 0 {
        blocks.push(BlockKind::Lp(n_lp));
        Some(nm)
    } else {
        None
    };
    let compact_lp = |terms: Vec<(usize, f64)>| -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in terms {
            *acc.entry(i).or_default() += v;
        }
        acc.into_iter().filter(|(_, v)| *v != 0.0).collect()
    };
    let mut c: Vec<Option<BlockCoeff>> = vec![None; blocks.len()];
    for (v, coeff) in obj_mats {
        c[v] = Some(coeff);
    }
    if let Some(lb) = lp_block {
        let t = compact_lp(obj_lp);
        if !t.is_empty() {
            c[lb] = Some(BlockCoeff::Lp(t));
        }
    }
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    for (mats, lp_terms, rhs) in rows {
        let mut row = mats;
        let t = compact_lp(lp_terms);
        if let (Some(lb), false) = (lp_block, t.is_empty()) {
            row.push((lb, BlockCoeff::Lp(t)));
        }
        a.push(row);
        b.push(rhs);
    }
    Lowered { std: StdProblem { blocks, c, a, b }, scalar_maps, lp_block }
}

fn recover(p: &HermitianSdpProblem, low: &Lowered, x: &[BlockVal]) -> (Vec<CMat>, Vec<f64>) {
    let matrices = p
        .matrix_vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let n = v.dim;
            let BlockVal::Psd(y) = &x[i] else { unreachable!() };
            CMat::from_fn(n, n, |r, c| {
                Complex64::new(
                    0.5 * (y[(r, c)] + y[(n + r, n + c)]),
                    0.5 * (y[(n + r, c)] - y[(r, n + c)]),
                )
            })
        })
        .collect();
    let lp = low.lp_block.map(|b| match &x[b] {
        BlockVal::Lp(v) => v.clone(),
        _ => unreachable!(),
    });
    let scalars = low
        .scalar_maps
        .iter()
        .map(|m| m.offset + m.parts.iter().map(|&(i, s)| s * lp.as_ref().map_or(0.0, |v| v[i])).sum::<f64>())
        .collect();
    (matrices, scalars)
}

/// Solves the problem. Malformed input is an `Err`; solver outcomes are
/// reported through [`SdpSolution::status`].
pub fn solve(problem: &HermitianSdpProblem, tol: f64) -> Result<SdpSolution> {
    problem.validate()?;
    let low = lower(problem);
    let settings = IpmSettings { tol, infeas_tol: tol, reduced_tol: 100.0 * tol, ..IpmSettings::default() };
    let mut res = ipm::solve(&low.std, &settings);
    let mut retried = false;
    if matches!(res.status, IpmStatus::Failure | IpmStatus::DualInfeasible) {
        retried = true;
        let shifted = ipm::shift_psd_lower_bound(&low.std, RETRY_SHIFT);
        res = ipm::solve(&shifted, &settings);
        if res.status == IpmStatus::Optimal {
            for (blk, kind) in res.x.iter_mut().zip(&low.std.blocks) {
                if let (BlockVal::Psd(m), BlockKind::Psd(_)) = (blk, kind) {
                    for i in 0..m.nrows() {
                        m[(i, i)] += RETRY_SHIFT;
                    }
                }
            }
        }
    }
    let status = match res.status {
        IpmStatus::Optimal => SdpStatus::Optimal,
        IpmStatus::PrimalInfeasible => SdpStatus::Infeasible,
        IpmStatus::DualInfeasible | IpmStatus::Failure => SdpStatus::NumericalFailure,
    };
    let (matrices, scalars) = recover(problem, &low, &res.x);
    let objective = match &problem.objective {
        Objective::Minimize(e) | Objective::Maximize(e) => e.evaluate(&matrices, &scalars),
        Objective::Feasibility => 0.0,
    };
    Ok(SdpSolution {
        status,
        matrices,
        scalars,
        objective,
        stats: SolverStats {
            iterations: res.iterations,
            primal_residual: res.primal_residual,
            dual_residual: res.dual_residual,
            gap: res.gap,
            retried,
        },
    })
}

/// Top eigenpair factor `√λ₁ v₁` and the ratio `λ₂/λ₁` (negative eigenvalues
/// are treated as zero).
pub fn extract_rank_one(x: &CMat) -> (CVec, f64) {
    let n = x.nrows();
    if n == 0 {
        return (CVec::zeros(0), 0.0);
    }
    let herm = (x + x.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[idx[0]].max(0.0);
    if l1 == 0.0 {
        return (CVec::zeros(n), 0.0);
    }
    let l2 = if n > 1 { eig.eigenvalues[idx[1]].max(0.0) } else { 0.0 };
    let v = eig.eigenvectors.column(idx[0]) * Complex64::new(l1.sqrt(), 0.0);
    (v, l2 / l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_cvec, random_psd};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn one_by_one_trace() {
        let mut p = HermitianSdpProblem::new();
        let x = p.add_matrix_var("X", 1);
        p.objective = Objective::Minimize(LinearExpr::new().mat(x, HermitianCoeff::diag_unit(0)));
        p.constrain(LinearExpr::new().mat(x, HermitianCoeff::diag_unit(0)), Sense::Eq, 1.0, "x11");
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn hermitian_min_eigenvalue() {
        let cm = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, -2.0), c(0.5, 2.0), c(-0.3, 0.0)]);
        let mut p = HermitianSdpProblem::new();
        let x = p.add_matrix_var("X", 2);
        p.objective = Objective::Minimize(LinearExpr::new().mat(x, HermitianCoeff::Dense(cm.clone())));
        p.constrain(LinearExpr::new().mat(x, HermitianCoeff::Dense(CMat::identity(2, 2))), Sense::Eq, 1.0, "trace");
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        let lmin = SymmetricEigen::new(cm).eigenvalues.min();
        assert!((s.objective - lmin).abs() < 1e-6, "{} vs {lmin}", s.objective);
        let (_, ratio) = extract_rank_one(&s.matrices[0]);
        assert!(ratio < 1e-6);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut p = HermitianSdpProblem::new();
        let x = p.add_matrix_var("X", 1);
        p.constrain(LinearExpr::new().mat(x, HermitianCoeff::diag_unit(0)), Sense::Eq, 1.0, "a");
        p.constrain(LinearExpr::new().mat(x, HermitianCoeff::diag_unit(0)), Sense::Eq, 2.0, "b");
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
    }

    #[test]
    fn scalar_bounds_and_senses() {
        // max t1 + t2 s.t. t1 <= 3, t1 in [0, 10], t2 in (-inf, 1.5], t1 + t2 >= 0
        let mut p = HermitianSdpProblem::new();
        let t1 = p.add_scalar_var("t1", 0.0, 10.0);
        let t2 = p.add_scalar_var("t2", f64::NEG_INFINITY, 1.5);
        p.objective = Objective::Maximize(LinearExpr::new().scalar(t1, 1.0).scalar(t2, 1.0));
        p.constrain(LinearExpr::new().scalar(t1, 1.0), Sense::Le, 3.0, "cap");
        p.constrain(LinearExpr::new().scalar(t1, 1.0).scalar(t2, 1.0), Sense::Ge, 0.0, "sum");
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.scalars[t1] - 3.0).abs() < 1e-6);
        assert!((s.scalars[t2] - 1.5).abs() < 1e-6);
        assert!((s.objective - 4.5).abs() < 1e-6);
    }

    #[test]
    fn feasibility_problem_returns_a_feasible_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = HermitianSdpProblem::new();
        let x = p.add_matrix_var("X", 3);
        let a = random_psd(&mut rng, 3, 2);
        for i in 0..3 {
            p.constrain(LinearExpr::new().mat(x, HermitianCoeff::diag_unit(i)), Sense::Eq, 1.0, format!("d{i}"));
        }
        p.constrain(LinearExpr::new().mat(x, HermitianCoeff::Dense(a.clone())), Sense::Ge, a.trace().re, "gain");
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        for con in &p.constraints {
            let v = con.expr.evaluate(&s.matrices, &s.scalars);
            let ok = match con.sense {
                Sense::Eq => (v - con.rhs).abs() <= 1e-6 * (1.0 + con.rhs.abs()),
                Sense::Ge => v >= con.rhs - 1e-6 * (1.0 + con.rhs.abs()),
                Sense::Le => v <= con.rhs + 1e-6 * (1.0 + con.rhs.abs()),
            };
            assert!(ok, "{} violated", con.label);
        }
        let ev = SymmetricEigen::new(s.matrices[0].clone()).eigenvalues.min();
        assert!(ev >= -1e-8);
    }

    #[test]
    fn sparse_and_dense_coefficients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_psd(&mut rng, 3, 3);
        let sp = HermitianCoeff::Sparse(vec![(0, 1, c(0.3, -0.8)), (2, 2, c(1.5, 0.0)), (1, 2, c(-0.2, 0.1))]);
        let de = HermitianCoeff::Dense(sp.to_dense(3));
        assert!((sp.inner(&x) - de.inner(&x)).abs() < 1e-12);
        let direct = (sp.to_dense(3) * &x).trace();
        assert!((direct.re - sp.inner(&x)).abs() < 1e-12 && direct.im.abs() < 1e-12);
    }

    #[test]
    fn malformed_problems_are_rejected() {
        let mut p = HermitianSdpProblem::new();
        let x = p.add_matrix_var("X", 2);
        let bad = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 1.0), c(1.0, 1.0), c(0.0, 0.0)]);
        p.constrain(LinearExpr::new().mat(x, HermitianCoeff::Dense(bad)), Sense::Eq, 1.0, "bad");
        assert!(solve(&p, DEFAULT_TOL).is_err());
        let mut q = HermitianSdpProblem::new();
        q.add_scalar_var("t", 2.0, 1.0);
        assert!(solve(&q, DEFAULT_TOL).is_err());
    }

    #[test]
    fn dump_lists_every_row() {
        let mut p = HermitianSdpProblem::new();
        let x = p.add_matrix_var("U", 2);
        let t = p.add_scalar_var("s", 0.0, f64::INFINITY);
        p.objective = Objective::Maximize(LinearExpr::new().scalar(t, 1.0));
        p.constrain(LinearExpr::new().mat(x, HermitianCoeff::diag_unit(1)), Sense::Eq, 1.0, "diag 1");
        let d = p.dump();
        assert!(d.contains("X 0 U 2"));
        assert!(d.contains("row diag_1 == 1e0"));
        assert!(d.contains("  X 0 1 1 1e0 0e0"));
    }

    #[test]
    fn rank_one_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = random_cvec(&mut rng, 4);
        let (v, ratio) = extract_rank_one(&(&w * w.adjoint()));
        assert!(ratio < 1e-12);
        let phase = w.dotc(&v) / w.norm_squared();
        assert!((phase.norm() - 1.0).abs() < 1e-10);
        assert!((&v - &w * phase).norm() < 1e-10 * w.norm());
        let (_, r) = extract_rank_one(&CMat::identity(2, 2));
        assert!((r - 1.0).abs() < 1e-12);
        let (z, r0) = extract_rank_one(&CMat::zeros(3, 3));
        assert_eq!(r0, 0.0);
        assert_eq!(z.norm(), 0.0);
    }

    proptest! {
        #[test]
        fn rank_one_reconstruction_bound(seed in 0u64..1000, rank in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_psd(&mut rng, 4, rank);
            let (v, _) = extract_rank_one(&x);
            let err = (&x - &v * v.adjoint()).norm() / x.norm();
            let eig = SymmetricEigen::new(x.clone()).eigenvalues;
            let l1 = eig.max();
            let sum_sq: f64 = eig.iter().map(|l| l * l).sum();
            let bound = (1.0 - l1 * l1 / sum_sq).max(0.0).sqrt();
            prop_assert!(err <= bound + 1e-9);
        }

        #[test]
        fn solve_is_deterministic(seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_psd(&mut rng, 3, 3);
            let mut p = HermitianSdpProblem::new();
            let x = p.add_matrix_var("X", 3);
            p.objective = Objective::Minimize(LinearExpr::new().mat(x, HermitianCoeff::Dense(a)));
            p.constrain(LinearExpr::new().mat(x, HermitianCoeff::Dense(CMat::identity(3, 3))), Sense::Eq, 1.0, "t");
            let s1 = solve(&p, DEFAULT_TOL).unwrap();
            let s2 = solve(&p, DEFAULT_TOL).unwrap();
            prop_assert_eq!(s1.objective.to_bits(), s2.objective.to_bits());
        }
    }
}
