//! Convex surrogates shared by the beamforming and phase-shift subproblems.
//!
//! The SIC condition in log form reads
//! `ln x − ln v₁ − ln v₂ + ln v₄ ≤ 0`, with
//! x the desired-signal power at user k, v₁ its interference plus noise,
//! v₂ user k's signal at k̄ and v₄ the interference plus noise at k̄ seen while
//! decoding k. The concave `ln x` and `ln v₄` get first-order upper bounds at
//! the expansion point. The convex `−ln v₁` and `−ln v₂` are replaced by a
//! piecewise-linear majorant built from chords through three nodes around the
//! expansion point plus a flat tail above the last node, which keeps the
//! subproblem a linear SDP while staying exact at the expansion point.

use crate::conic::{HermitianSdpProblem, LinearExpr, Sense};
use crate::error::{Error, Result};

/// Default spread of the secant nodes around the expansion point.
pub const DEFAULT_SECANT_RATIO: f64 = 4.0;

/// ln x0 + (x − x0)/x0, an upper bound of ln x for every x > 0.
pub fn log_tangent(x0: f64, x: f64) -> f64 {
    x0.ln() + (x - x0) / x0
}

/// Piecewise-linear upper bound of −ln x on `[lower, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegLogSecant {
    nodes: Vec<f64>,
}

impl NegLogSecant {
    /// Nodes at `center/ratio` (raised to `floor` if needed), `center`
    /// and `center·ratio`.
    pub fn new(center: f64, floor: f64, ratio: f64) -> Self {
        let lo = (center / ratio).max(floor).min(center);
        let mut nodes = vec![lo, center, center * ratio];
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
        Self { nodes }
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    /// Affine pieces `(slope, intercept)`; the bound is their maximum.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .nodes
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let slope = (-b.ln() + a.ln()) / (b - a);
                (slope, -a.ln() - slope * a)
            })
            .collect();
        out.push((0.0, -self.nodes[self.nodes.len() - 1].ln()));
        out
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces().iter().map(|(s, c)| s * x + c).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Affine quantity (in the problem's variables) with its value at the
/// expansion point.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub expr: LinearExpr,
    pub at_ref: f64,
}

pub(crate) struct SicSurrogate {
    pub signal: Term,
    pub own_interference: Term,
    /// Known lower bound of the own interference-plus-noise term.
    pub own_floor: f64,
    pub cross: Term,
    pub other_interference: Term,
}

impl SicSurrogate {
    /// Value of the surrogate left-hand side for given term values.
    #[cfg(test)]
    pub fn value(&self, ratio: f64, x: f64, v1: f64, v2: f64, v4: f64) -> f64 {
        let s1 = NegLogSecant::new(1.0, self.own_floor / self.own_interference.at_ref, ratio);
        let s2 = NegLogSecant::new(1.0, 0.0, ratio);
        log_tangent(self.signal.at_ref, x) + log_tangent(self.other_interference.at_ref, v4)
            - self.own_interference.at_ref.ln()
            + s1.eval(v1 / self.own_interference.at_ref)
            - self.cross.at_ref.ln()
            + s2.eval(v2 / self.cross.at_ref)
    }

    /// Adds `surrogate ≤ rhs − slack_coef·slack` with auxiliary scalars so
    /// that only three rows touch the matrix variables.
    pub fn add_to(
        &self,
        p: &mut HermitianSdpProblem,
        ratio: f64,
        rhs: f64,
        slack: Option<(usize, f64)>,
        label: &str,
    ) -> Result<()> {
        for (name, t) in [("signal", &self.signal), ("own", &self.own_interference), ("cross", &self.cross), ("other", &self.other_interference)] {
            if !(t.at_ref > 0.0 && t.at_ref.is_finite()) {
                return Err(Error::DegenerateLinearization(format!("{label}: {name} term is {} at the expansion point", t.at_ref)));
            }
        }
        let s1 = NegLogSecant::new(1.0, self.own_floor / self.own_interference.at_ref, ratio);
        let s2 = NegLogSecant::new(1.0, 0.0, ratio);

        // z = x/x0 + v4/v4_0, v1' = v1/v1_0, v2' = v2/v2_0
        let z = p.add_scalar_var(format!("{label}.z"), 0.0, f64::INFINITY);
        let v1 = p.add_scalar_var(format!("{label}.v1"), s1.lower(), f64::INFINITY);
        let v2 = p.add_scalar_var(format!("{label}.v2"), s2.lower(), f64::INFINITY);
        let zexpr = self.signal.expr.scaled(1.0 / self.signal.at_ref)
            .add(&self.other_interference.expr, 1.0 / self.other_interference.at_ref)
            .scalar(z, -1.0);
        let zc = zexpr.constant;
        p.constrain(LinearExpr { constant: 0.0, ..zexpr }, Sense::Eq, -zc, format!("{label}.z"));
        for (var, t, name) in [(v1, &self.own_interference, "v1"), (v2, &self.cross, "v2")] {
            let e = t.expr.scaled(1.0 / t.at_ref).scalar(var, -1.0);
            let c = e.constant;
            p.constrain(LinearExpr { constant: 0.0, ..e }, Sense::Eq, -c, format!("{label}.{name}"));
        }
        let base = self.signal.at_ref.ln() + self.other_interference.at_ref.ln() - 2.0
            - self.own_interference.at_ref.ln()
            - self.cross.at_ref.ln();
        for (i, (a1, b1)) in s1.pieces().into_iter().enumerate() {
            for (j, (a2, b2)) in s2.pieces().into_iter().enumerate() {
                let mut e = LinearExpr::new().scalar(z, 1.0).scalar(v1, a1).scalar(v2, a2);
                if let Some((s, c)) = slack {
                    e = e.scalar(s, c);
                }
                p.constrain(e, Sense::Le, rhs - base - b1 - b2, format!("{label}.piece{i}{j}"));
            }
        }
        Ok(())
    }
}
