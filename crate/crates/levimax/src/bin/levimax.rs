//! Command-line front end: scenario execution and report emission.
//!
//! Exit codes: 0 = all checked criteria pass, 1 = a criterion failed,
//! 2 = usage or configuration error (including a violated theorem
//! hypothesis, which makes the check inapplicable rather than failed).

use clap::{Args, Parser, Subcommand};
use levimax::adapted::{adapt, verify_adapted};
use levimax::disc::{solve_disc, DiscParams};
use levimax::levi::{is_strictly_psh, levi_matrix};
use levimax::regmax::{RegMax, ThetaVector};
use levimax::scenario::{Scenario, BUILTINS};
use levimax::verify::{verify_estimate, verify_hessian_bound};
use levimax::{Error, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "levimax", version, about = "Levi forms, regularized maxima and J-complex discs on a chart")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON path, or `builtin:<name>`.
    #[arg(long)]
    scenario: String,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-node CSV dump here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Regularized maximum evaluations.
    Regmax {
        #[command(subcommand)]
        command: RegmaxCommand,
    },
    /// Levi-form sweeps.
    Levi {
        #[command(subcommand)]
        command: LeviCommand,
    },
    /// Adapted-coordinate normalization at the origin.
    Adapt(ScenarioArgs),
    /// J-complex disc solves.
    Disc {
        #[command(subcommand)]
        command: DiscCommand,
    },
    /// Smoothing verification sweeps.
    Smooth {
        #[command(subcommand)]
        command: SmoothCommand,
    },
    /// Scenario registry operations.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Subcommand)]
enum RegmaxCommand {
    /// Evaluate M_theta(t) and its gradient.
    Eval {
        /// Comma-separated arguments t_1,...,t_k.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Comma-separated widths theta_1,...,theta_k.
        #[arg(long, value_delimiter = ',', required = true)]
        theta: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum LeviCommand {
    /// Strict plurisubharmonicity (or vanishing) sweep over the grid.
    Check(ScenarioArgs),
}

#[derive(Subcommand)]
enum DiscCommand {
    /// Solve the disc at the origin with direction e_1.
    Solve(ScenarioArgs),
}

#[derive(Subcommand)]
enum SmoothCommand {
    /// Proposition-1 sandwich estimate on the grid.
    Estimate(ScenarioArgs),
    /// Theorem-3.2 Hessian lower bound on the grid.
    Hessian(ScenarioArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// List builtin scenario names.
    List,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("LEVIMAX_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[derive(Serialize)]
struct RegmaxReport {
    t: Vec<f64>,
    theta: Vec<f64>,
    value: f64,
    lower: f64,
    upper: f64,
    gradient: Vec<f64>,
}

#[derive(Serialize)]
struct LeviVanishReport {
    scenario: String,
    criterion: String,
    pass: bool,
    tolerance: f64,
    worst_abs_eigen: f64,
    worst_point: Vec<f64>,
    nodes: usize,
    seed: u64,
}

#[derive(Serialize)]
struct DiscReport {
    scenario: String,
    criterion: String,
    pass: bool,
    tolerance: f64,
    iterations: usize,
    final_increment: f64,
    cr_residual: f64,
    seed: u64,
}

#[derive(Serialize)]
struct AdaptCliReport {
    scenario: String,
    criterion: String,
    pass: bool,
    a_at_zero: f64,
    dz_a_at_zero: f64,
    levi_identity_residual: f64,
    seed: u64,
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Regmax {
            command: RegmaxCommand::Eval { t, theta },
        } => {
            let theta = ThetaVector::new(theta)?;
            let rm = RegMax::new();
            let value = rm.eval(&t, &theta)?;
            let gradient = rm.grad(&t, &theta)?;
            let lower = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let upper = t
                .iter()
                .zip(theta.as_slice())
                .map(|(a, b)| a + b)
                .fold(f64::NEG_INFINITY, f64::max);
            let report = RegmaxReport {
                t,
                theta: theta.as_slice().to_vec(),
                value,
                lower,
                upper,
                gradient,
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Levi {
            command: LeviCommand::Check(args),
        } => levi_check(&args),
        Command::Adapt(args) => adapt_cmd(&args),
        Command::Disc {
            command: DiscCommand::Solve(args),
        } => disc_solve(&args),
        Command::Smooth { command } => match command {
            SmoothCommand::Estimate(args) => smooth_estimate(&args),
            SmoothCommand::Hessian(args) => smooth_hessian(&args),
        },
        Command::Scenario {
            command: ScenarioCommand::List,
        } => {
            for name in BUILTINS {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn emit(args: &ScenarioArgs, json: &str, csv: Option<String>) -> Result<()> {
    println!("{json}");
    if let Some(path) = &args.out {
        std::fs::write(path, json)?;
    }
    if let Some(path) = &args.csv {
        match csv {
            Some(csv) => std::fs::write(path, csv)?,
            None => {
                return Err(Error::Scenario(
                    "this subcommand has no CSV dump".into(),
                ))
            }
        }
    }
    Ok(())
}

fn levi_check(args: &ScenarioArgs) -> Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let structure = scenario.build_structure()?;
    let fields = scenario.build_fields()?;
    let metric = scenario.build_metric();
    let grid = scenario.build_grid();
    if scenario.levi_vanishes {
        let tol = scenario.tolerances.levi;
        let mut worst = 0.0f64;
        let mut worst_point = Vec::new();
        for u in &fields {
            for p in &grid {
                let form = levi_matrix(&structure, u, p)?;
                let eig = form
                    .matrix
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                if eig > worst {
                    worst = eig;
                    worst_point = p.clone();
                }
            }
        }
        let report = LeviVanishReport {
            scenario: scenario.name.clone(),
            criterion: "levi_vanishes".into(),
            pass: worst <= tol,
            tolerance: tol,
            worst_abs_eigen: worst,
            worst_point,
            nodes: grid.len(),
            seed: scenario.seed,
        };
        emit(args, &serde_json::to_string_pretty(&report)?, None)?;
        Ok(report.pass)
    } else {
        let margin = scenario.psh_margin.unwrap_or(0.0);
        let mut pass = true;
        let mut reports = Vec::new();
        for u in &fields {
            let report = is_strictly_psh(&structure, u, &grid, &metric, margin)?;
            pass &= report.pass;
            reports.push(report);
        }
        emit(args, &serde_json::to_string_pretty(&reports)?, None)?;
        Ok(pass)
    }
}

fn adapt_cmd(args: &ScenarioArgs) -> Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let structure = scenario.build_structure()?;
    let fields = scenario.build_fields()?;
    let origin = vec![0.0; 2 * scenario.n];
    let chart = adapt(&structure, &origin)?;
    let report = verify_adapted(
        &structure,
        &chart,
        &fields[0],
        1e-8,
        scenario.tolerances.levi,
    )?;
    let cli_report = AdaptCliReport {
        scenario: scenario.name.clone(),
        criterion: "adapted_coordinates".into(),
        pass: report.pass,
        a_at_zero: report.a_at_zero,
        dz_a_at_zero: report.dz_a_at_zero,
        levi_identity_residual: report.levi_identity_residual,
        seed: scenario.seed,
    };
    emit(args, &serde_json::to_string_pretty(&cli_report)?, None)?;
    Ok(cli_report.pass)
}

fn disc_solve(args: &ScenarioArgs) -> Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let structure = scenario.build_structure()?;
    let spec = scenario.disc.clone().unwrap_or_default();
    let params = DiscParams {
        r: spec.r,
        tol: spec.tol,
        ..DiscParams::default()
    };
    let p = vec![0.0; 2 * scenario.n];
    let mut v = DVector::from_element(scenario.n, Complex64::default());
    v[0] = Complex64::new(1.0, 0.0);
    let map = solve_disc(&structure, &p, &v, &params)?;
    let cr = map.cr_residual(&structure)?;
    let report = DiscReport {
        scenario: scenario.name.clone(),
        criterion: "disc_cr_residual".into(),
        pass: cr <= params.tol,
        tolerance: params.tol,
        iterations: map.iterations,
        final_increment: map.final_increment,
        cr_residual: cr,
        seed: scenario.seed,
    };
    emit(
        args,
        &serde_json::to_string_pretty(&report)?,
        Some(map.to_csv()),
    )?;
    Ok(report.pass)
}

fn smooth_estimate(args: &ScenarioArgs) -> Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let fields = scenario.build_fields()?;
    if fields.len() < 2 {
        return Err(Error::Scenario(
            "the estimate sweep needs two fields".into(),
        ));
    }
    let epsilon = scenario.epsilon.ok_or_else(|| {
        Error::Scenario("the estimate sweep needs `epsilon` in the scenario".into())
    })?;
    let grid = scenario.build_grid();
    let report = verify_estimate(
        &fields[0],
        &fields[1],
        epsilon,
        &grid,
        scenario.tolerances.estimate,
        &scenario.name,
        scenario.seed,
    )?;
    emit(args, &report.to_json()?, Some(report.to_csv()))?;
    Ok(report.pass)
}

fn smooth_hessian(args: &ScenarioArgs) -> Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let report = verify_hessian_bound(&scenario)?;
    emit(args, &report.to_json()?, Some(report.to_csv()))?;
    Ok(report.pass)
}
