use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::units::watts_to_dbm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubproblemStatus {
    /// Solved and the new block value was accepted.
    Accepted,
    /// Solved but the result was worse than or not as safe as the incumbent.
    Rejected,
    Infeasible,
    /// No randomized candidate passed the screening; incumbent kept.
    Stall,
    NumericalFailure,
    /// Block not optimized by this algorithm.
    Skipped,
}

impl SubproblemStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accepted => "accepted",
            Self::Rejected => "rejected",
            Self::Infeasible => "infeasible",
            Self::Stall => "stall",
            Self::NumericalFailure => "numerical_failure",
            Self::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub r: usize,
    pub objective: f64,
    pub beamforming: SubproblemStatus,
    pub split: SubproblemStatus,
    pub phase: SubproblemStatus,
    pub min_margin: f64,
    pub max_rank_ratio: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IterationTrace {
    /// Power of the initial point the first iteration descends from.
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// True when no recorded objective exceeds its predecessor by more than `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.records.windows(2).all(|w| w[1].objective <= w[0].objective + tol)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "r", "objective_W", "objective_dBm", "status_beamforming", "status_split",
            "status_phase", "min_margin", "max_rank_ratio", "ms",
        ])?;
        for rec in &self.records {
            let dbm = watts_to_dbm(rec.objective).map(|d| d.to_string()).unwrap_or_default();
            w.write_record([
                rec.r.to_string(),
                rec.objective.to_string(),
                dbm,
                rec.beamforming.as_str().to_string(),
                rec.split.as_str().to_string(),
                rec.phase.as_str().to_string(),
                rec.min_margin.to_string(),
                rec.max_rank_ratio.to_string(),
                format!("{:.3}", rec.ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
