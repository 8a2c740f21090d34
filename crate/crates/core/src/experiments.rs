//! Scenario construction, parameter sweeps and result files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_algorithm, AlgorithmId};
use crate::channel::{generate_channels, Topology};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{
    check_feasibility, Beamformers, CVec, ChannelSet, DecodingOrder, FeasibilityReport, PhaseShift, PowerSplit, Solution,
    FEASIBILITY_TOL,
};
use crate::rng::{substream, Purpose};
use crate::units::{db_to_linear, dbm_to_watts, watts_to_dbm};

/// The simulation defaults (K=4, N=4, M=30, σ² = −70 dBm, ...).
pub fn default_config() -> SystemConfig {
    SystemConfig::default()
}

/// Topology and channels of draw `draw` under `seed`. The topology only
/// depends on (seed, draw), so sweeps over thresholds reuse the same users.
pub fn build_scenario(cfg: &SystemConfig, seed: u64, draw: u64) -> Result<ChannelSet> {
    let topo = Topology::random(cfg, &mut substream(seed, Purpose::Topology, draw))?;
    generate_channels(cfg, &topo, &mut substream(seed, Purpose::Channel, draw))
}

/// Runs one algorithm on draw `draw`; the random stream is shared by every
/// algorithm on that draw.
pub fn run_on_draw(id: AlgorithmId, cfg: &SystemConfig, channels: &ChannelSet, seed: u64, draw: u64) -> Result<Solution> {
    run_algorithm(id, cfg, channels, &mut substream(seed, Purpose::Randomization, draw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "gamma_db")]
    GammaDb,
    #[serde(rename = "e_dbm")]
    EDbm,
    M,
    N,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GammaDb => "gamma_db",
            Self::EDbm => "e_dbm",
            Self::M => "M",
            Self::N => "N",
        }
    }

    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= 1e6 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} must be a non-negative integer, got {value}", self.as_str())))
            }
        };
        let mut cfg = base.clone();
        match self {
            Self::GammaDb => cfg.sinr_threshold = db_to_linear(value),
            Self::EDbm => cfg.energy_threshold = dbm_to_watts(value),
            Self::M => cfg.num_elements = count()?,
            Self::N => cfg.num_antennas = count()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub algorithms: Vec<AlgorithmId>,
    pub num_draws: usize,
    pub base: SystemConfig,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    parameter: SweepParameter,
    values: Vec<f64>,
    algorithms: Vec<String>,
    #[serde(default = "default_draws")]
    num_draws: usize,
    seed: Option<u64>,
    /// Config file, relative to the sweep file.
    base_config: Option<PathBuf>,
}

fn default_draws() -> usize {
    20
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.num_draws == 0 {
            return Err(Error::Config("num_draws must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("sweep needs at least one algorithm".into()));
        }
        for &v in &self.values {
            self.parameter.apply(&self.base, v)?;
        }
        Ok(())
    }

    /// Parses the sweep file format; `dir` resolves `base_config`.
    pub fn from_toml_str(text: &str, dir: &Path) -> Result<Self> {
        let raw: SweepFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let base = match &raw.base_config {
            Some(p) => SystemConfig::from_file(dir.join(p))?,
            None => default_config(),
        };
        let algorithms = raw.algorithms.iter().map(|a| a.parse()).collect::<Result<Vec<_>>>()?;
        let spec = Self {
            parameter: raw.parameter,
            values: raw.values,
            algorithms,
            num_draws: raw.num_draws,
            seed: raw.seed.unwrap_or(base.rng_seed),
            base,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub value: f64,
    pub algorithm: AlgorithmId,
    pub draw: u64,
    pub objective_w: Option<f64>,
    pub objective_dbm: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub ms: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub value: f64,
    pub algorithm: AlgorithmId,
    pub median_w: Option<f64>,
    pub mean_w: Option<f64>,
    pub feasible: usize,
    pub infeasible: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Result row of one run; errors become infeasible rows.
pub fn evaluate(value: f64, id: AlgorithmId, cfg: &SystemConfig, channels: &ChannelSet, seed: u64, draw: u64) -> ResultRow {
    let start = Instant::now();
    let out = run_on_draw(id, cfg, channels, seed, draw);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = ResultRow {
        value,
        algorithm: id,
        draw,
        objective_w: None,
        objective_dbm: None,
        iterations: 0,
        converged: false,
        feasible: false,
        ms,
        error: String::new(),
    };
    match out {
        Ok(sol) => {
            // runs on the reduced scenario are checked against it
            let check_cfg;
            let (cfg_used, ch_used) = if id == AlgorithmId::NoIrs {
                check_cfg = cfg.without_irs();
                (&check_cfg, channels.without_irs())
            } else {
                (cfg, channels.clone())
            };
            match check_feasibility(&ch_used, &sol, cfg_used, FEASIBILITY_TOL) {
                Ok(r) if r.feasible() => row.feasible = true,
                Ok(r) => row.error = format!("returned point violates {:?}", r.violated_kinds()),
                Err(e) => row.error = e.to_string(),
            }
            row.objective_w = Some(sol.objective);
            row.objective_dbm = watts_to_dbm(sol.objective).ok();
            row.iterations = sol.trace.len();
            row.converged = sol.converged;
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn aggregate(rows: &[ResultRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(usize, AlgorithmId), (f64, Vec<f64>, usize)> = BTreeMap::new();
    let mut value_index: Vec<f64> = Vec::new();
    for r in rows {
        let vi = match value_index.iter().position(|&v| v == r.value) {
            Some(i) => i,
            None => {
                value_index.push(r.value);
                value_index.len() - 1
            }
        };
        let g = groups.entry((vi, r.algorithm)).or_insert((r.value, Vec::new(), 0));
        match (r.feasible, r.objective_w) {
            (true, Some(o)) => g.1.push(o),
            _ => g.2 += 1,
        }
    }
    groups
        .into_iter()
        .map(|((_, algorithm), (value, objs, infeasible))| Aggregate {
            value,
            algorithm,
            median_w: median(&objs),
            mean_w: (!objs.is_empty()).then(|| objs.iter().sum::<f64>() / objs.len() as f64),
            feasible: objs.len(),
            infeasible,
        })
        .collect()
}

/// Runs every (value, draw) cell in the thread pool. `emit` sees each row as
/// soon as its cell finishes, one call at a time; the returned rows are in
/// (value, draw, algorithm) order regardless of scheduling.
pub fn run_sweep_with<F>(spec: &SweepSpec, emit: F) -> Result<SweepResult>
where
    F: FnMut(&ResultRow) + Send,
{
    spec.validate()?;
    let emit = Mutex::new(emit);
    let cells: Vec<(usize, u64)> =
        (0..spec.values.len()).flat_map(|vi| (0..spec.num_draws as u64).map(move |d| (vi, d))).collect();
    let mut per_cell: Vec<(usize, u64, Vec<ResultRow>)> = cells
        .par_iter()
        .map(|&(vi, draw)| {
            let value = spec.values[vi];
            let rows = match spec.parameter.apply(&spec.base, value).and_then(|cfg| {
                build_scenario(&cfg, spec.seed, draw).map(|ch| (cfg, ch))
            }) {
                Ok((cfg, ch)) => spec.algorithms.iter().map(|&a| evaluate(value, a, &cfg, &ch, spec.seed, draw)).collect(),
                Err(e) => spec
                    .algorithms
                    .iter()
                    .map(|&a| ResultRow {
                        value,
                        algorithm: a,
                        draw,
                        objective_w: None,
                        objective_dbm: None,
                        iterations: 0,
                        converged: false,
                        feasible: false,
                        ms: 0.0,
                        error: e.to_string(),
                    })
                    .collect(),
            };
            let mut f = emit.lock().expect("emitter lock");
            for r in &rows {
                f(r);
            }
            (vi, draw, rows)
        })
        .collect();
    per_cell.sort_by_key(|(vi, d, _)| (*vi, *d));
    let rows: Vec<ResultRow> = per_cell.into_iter().flat_map(|(_, _, r)| r).collect();
    let aggregates = aggregate(&rows);
    Ok(SweepResult { parameter: spec.parameter, seed: spec.seed, rows, aggregates })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, |_| {})
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const RESULTS_HEADER: [&str; 10] =
    ["value", "algorithm", "draw", "objective_W", "objective_dBm", "iterations", "converged", "feasible", "ms", "error"];

pub fn write_rows_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.algorithm.to_string(),
            r.draw.to_string(),
            opt(r.objective_w),
            opt(r.objective_dbm),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.feasible.to_string(),
            format!("{:.3}", r.ms),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    parameter: &'a str,
    seed: u64,
    rows: usize,
    aggregates: &'a [Aggregate],
}

/// Writes `results.csv` and `summary.json` into `dir`.
pub fn write_sweep(dir: impl AsRef<Path>, result: &SweepResult) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_rows_csv(&result.rows, std::fs::File::create(dir.join("results.csv"))?)?;
    let summary = Summary {
        parameter: result.parameter.as_str(),
        seed: result.seed,
        rows: result.rows.len(),
        aggregates: &result.aggregates,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

/// A solution together with everything needed to rebuild its scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredSolution {
    pub algorithm: AlgorithmId,
    pub seed: u64,
    pub draw: u64,
    pub config: SystemConfig,
    /// Decoding sequence, first decoded first.
    pub order: Vec<usize>,
    /// `beams[k][n] = [re, im]`.
    pub beams: Vec<Vec<[f64; 2]>>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub objective_w: f64,
    pub converged: bool,
}

impl StoredSolution {
    pub fn new(algorithm: AlgorithmId, cfg: &SystemConfig, seed: u64, draw: u64, sol: &Solution) -> Self {
        Self {
            algorithm,
            seed,
            draw,
            config: cfg.clone(),
            order: sol.order.sequence(),
            beams: sol.beams.w.iter().map(|w| w.iter().map(|z| [z.re, z.im]).collect()).collect(),
            rho: sol.split.rho.clone(),
            theta: sol.phases.theta.clone(),
            objective_w: sol.objective,
            converged: sol.converged,
        }
    }

    /// Scenario configuration and channels the solution lives on.
    pub fn scenario(&self) -> Result<(SystemConfig, ChannelSet)> {
        let ch = build_scenario(&self.config, self.seed, self.draw)?;
        Ok(if self.algorithm == AlgorithmId::NoIrs {
            (self.config.without_irs(), ch.without_irs())
        } else {
            (self.config.clone(), ch)
        })
    }

    pub fn to_solution(&self) -> Result<Solution> {
        let w = self
            .beams
            .iter()
            .map(|b| CVec::from_iterator(b.len(), b.iter().map(|&[re, im]| Complex64::new(re, im))))
            .collect();
        Ok(Solution {
            order: DecodingOrder::from_sequence(&self.order)?,
            beams: Beamformers::new(w),
            split: PowerSplit { rho: self.rho.clone() },
            phases: PhaseShift { theta: self.theta.clone() },
            objective: self.objective_w,
            trace: Default::default(),
            converged: self.converged,
        })
    }

    /// Re-checks every original constraint on the rebuilt scenario.
    pub fn verify(&self, tol: f64) -> Result<FeasibilityReport> {
        let (cfg, ch) = self.scenario()?;
        check_feasibility(&ch, &self.to_solution()?, &cfg, tol)
    }
}
