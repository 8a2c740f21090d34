use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irs_swipt::baselines::AlgorithmId;
use irs_swipt::experiments::{
    build_scenario, default_config, run_on_draw, run_sweep_with, write_sweep, StoredSolution, SweepSpec,
};
use irs_swipt::model::FEASIBILITY_TOL;
use irs_swipt::units::watts_to_dbm;
use irs_swipt::{Result, SystemConfig};

#[derive(Parser)]
#[command(name = "irs-swipt", version, about = "Transmit-power minimization for IRS-assisted SWIPT NOMA downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config file (flat key = value)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated algorithm ids, e.g. JDBPR_OPT,NO_IRS
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<AlgorithmId>>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve single scenarios and print a summary plus the trace CSV
    Run(Common),
    /// Run a parameter sweep described by a sweep file
    Sweep {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-validate a stored solution against the original constraints
    Check {
        solution: PathBuf,
        #[arg(long, default_value_t = FEASIBILITY_TOL)]
        tol: f64,
    },
}

fn load_config(c: &Common) -> Result<SystemConfig> {
    let mut cfg = match &c.config {
        Some(p) => SystemConfig::from_file(p)?,
        None => default_config(),
    };
    if let Some(m) = c.max_iters {
        cfg.max_iters = m;
    }
    if let Some(s) = c.seed {
        cfg.rng_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(c: &Common) -> Result<bool> {
    let cfg = load_config(c)?;
    let algorithms = c.algorithms.clone().unwrap_or_else(|| vec![AlgorithmId::JdbprOpt]);
    let mut all_ok = true;
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
    }
    for draw in 0..c.draws.unwrap_or(1) as u64 {
        let channels = build_scenario(&cfg, cfg.rng_seed, draw)?;
        for &alg in &algorithms {
            let sol = match run_on_draw(alg, &cfg, &channels, cfg.rng_seed, draw) {
                Ok(s) => s,
                Err(e) => {
                    println!("{alg} draw {draw}: {e}");
                    all_ok = false;
                    continue;
                }
            };
            let stored = StoredSolution::new(alg, &cfg, cfg.rng_seed, draw, &sol);
            let feasible = stored.verify(FEASIBILITY_TOL)?.feasible();
            all_ok &= feasible;
            let dbm = watts_to_dbm(sol.objective).map(|d| format!("{d:.3}")).unwrap_or_else(|_| "-".into());
            println!(
                "{alg} draw {draw}: objective {:.6e} W ({dbm} dBm), {} iterations, converged {}, feasible {feasible}",
                sol.objective,
                sol.trace.len(),
                sol.converged
            );
            println!("  order {:?} rho {:?}", sol.order.sequence(), sol.split.rho);
            match &c.out {
                Some(dir) => {
                    let id = format!("{}_{draw}", alg.as_str().to_ascii_lowercase());
                    sol.trace.write_csv(std::fs::File::create(dir.join(format!("trace_{id}.csv")))?)?;
                    std::fs::write(dir.join(format!("solution_{id}.json")), serde_json::to_string_pretty(&stored)?)?;
                }
                None => sol.trace.write_csv(std::io::stdout().lock())?,
            }
        }
    }
    Ok(all_ok)
}

fn sweep(path: &Path, c: &Common) -> Result<bool> {
    let mut spec = SweepSpec::from_file(path)?;
    if let Some(p) = &c.config {
        spec.base = SystemConfig::from_file(p)?;
    }
    if let Some(m) = c.max_iters {
        spec.base.max_iters = m;
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(d) = c.draws {
        spec.num_draws = d;
    }
    if let Some(a) = &c.algorithms {
        spec.algorithms = a.clone();
    }
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let result = run_sweep_with(&spec, |row| {
        eprintln!(
            "{} = {} {} draw {}: {}",
            spec.parameter.as_str(),
            row.value,
            row.algorithm,
            row.draw,
            match row.objective_w {
                Some(w) if row.feasible => format!("{w:.6e} W"),
                _ => format!("infeasible ({})", row.error),
            }
        );
    })?;
    write_sweep(&out, &result)?;
    for a in &result.aggregates {
        println!(
            "{} = {} {}: median {} W, {} feasible, {} infeasible",
            spec.parameter.as_str(),
            a.value,
            a.algorithm,
            a.median_w.map(|m| format!("{m:.6e}")).unwrap_or_else(|| "-".into()),
            a.feasible,
            a.infeasible
        );
    }
    println!("wrote {}", out.join("results.csv").display());
    Ok(true)
}

fn check(path: &Path, tol: f64) -> Result<bool> {
    let stored: StoredSolution = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let report = stored.verify(tol)?;
    for c in report.violations() {
        println!("violated: {:?} {} {:?} margin {:.3e}", c.kind, c.index, c.other, c.margin);
    }
    println!(
        "{} draw {}: {} (min margin {:.3e})",
        stored.algorithm,
        stored.draw,
        if report.feasible() { "feasible" } else { "infeasible" },
        report.min_margin()
    );
    Ok(report.feasible())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep { spec, common } => sweep(spec, common),
        Command::Check { solution, tol } => check(solution, *tol),
    };
    match out {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
