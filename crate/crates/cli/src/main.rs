//! `netheat`: read a network document, run the transform solver and/or the Crank–Nicolson oracle,
//! and write per-rod CSVs, diagnostics.json, comparison.csv and plot.gp.

mod config;
mod output;

use clap::{Parser, ValueEnum};
use log::{info, warn};
use netheat::contour::{ContourMode, EvalOptions, UtmSolver};
use netheat::dtn::{solve_spectral_system, Problem, RhsSpec, SpectralSystem};
use netheat::error::ContourError;
use netheat::fdm::{solve_fdm, FdmGrid};
use netheat::field::{SampleGrid, SolutionField};
use netheat::network::{check_compatibility, classify_configuration, default_compat_tol, validate_network, ValidatedNetwork};
use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Utm,
    Fdm,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Paper,
    Deformed,
}

#[derive(Debug, Parser)]
#[command(name = "netheat", version, about = "Heat flow on rod networks: transform solver and finite-difference oracle")]
struct Args {
    /// Network document (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.solver (default utm).
    #[arg(long, value_enum)]
    solver: Option<Solver>,
    /// Overrides run.mode (default deformed).
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Exit with status 4 when the two solvers differ by more than this.
    #[arg(long)]
    assert_tol: Option<f64>,
    /// Finite-difference nodes on the shortest finite rod (spacing is shared by all rods).
    #[arg(long, default_value_t = 201)]
    nodes: usize,
    /// Draw random λ for a ±λ consistency check of the spectral solve, recorded in the diagnostics.
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Validation(String),
    Solver(String),
    Tolerance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Tolerance(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Solver(m) | Failure::Tolerance(m) => m,
        }
    }
}

#[derive(Serialize)]
struct Comparison {
    max_abs: f64,
    mean_abs: f64,
}

#[derive(Serialize)]
struct SelfCheck {
    seed: u64,
    draws: usize,
    /// Largest relative gap between solves at λ and -λ; absent for networks with half-line rods.
    max_gap: Option<f64>,
}

#[derive(Serialize)]
struct Report<'a> {
    configuration: &'a str,
    compatibility: netheat::network::CompatibilityReport,
    utm: Option<&'a netheat::field::Diagnostics>,
    fdm: Option<&'a netheat::field::Diagnostics>,
    comparison: Option<Comparison>,
    self_check: Option<SelfCheck>,
}

fn sample_grid(doc: &config::Document, net: &ValidatedNetwork) -> SampleGrid {
    let mut grid = SampleGrid::uniform(net, doc.run.points, doc.run.reach, doc.run.t.clone());
    for (r, rod) in doc.rod.iter().enumerate() {
        if let Some(x) = &rod.x {
            grid.x[r] = x.clone();
        }
    }
    grid
}

fn fdm_grid(net: &ValidatedNetwork, nodes: usize, dt: f64) -> FdmGrid {
    let shortest = (0..net.rod_count()).filter_map(|r| net.rod(r).length.finite()).fold(f64::INFINITY, f64::min);
    let shortest = if shortest.is_finite() { shortest } else { 1.0 };
    FdmGrid::with_spacing(net, shortest / (nodes.max(5) - 1) as f64, dt)
}

fn self_check(net: &ValidatedNetwork, seed: u64) -> Result<SelfCheck, Failure> {
    const DRAWS: usize = 16;
    let solver_err = |e: netheat::error::DtnError| Failure::Solver(e.to_string());
    let finite = (0..net.rod_count()).all(|r| net.rod(r).length.finite().is_some());
    if !finite {
        return Ok(SelfCheck { seed, draws: 0, max_gap: None });
    }
    let problem = Problem::new(net).map_err(solver_err)?;
    let sys = SpectralSystem::new(&problem, RhsSpec::default()).map_err(solver_err)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let t = net.horizon();
    let mut gap = 0.0f64;
    for _ in 0..DRAWS {
        let lam = C64::from_polar(rng.random_range(0.3..5.0), rng.random_range(0.0..std::f64::consts::PI));
        let a = solve_spectral_system(&sys, lam, t).map_err(solver_err)?;
        let b = solve_spectral_system(&sys, -lam, t).map_err(solver_err)?;
        let va: Vec<C64> = a.g0.iter().chain(&a.g1).chain(&a.h0).chain(&a.h1).copied().collect();
        let vb: Vec<C64> = b.g0.iter().chain(&b.g1).chain(&b.h0).chain(&b.h1).copied().collect();
        let scale = va.iter().chain(&vb).map(|z| z.norm()).fold(0.0, f64::max);
        let d = va.iter().zip(&vb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        gap = gap.max(if scale > 0.0 { d / scale } else { d });
    }
    Ok(SelfCheck { seed, draws: DRAWS, max_gap: Some(gap) })
}

fn run(args: &Args) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", args.config.display())))?;
    let doc = config::parse(&text).map_err(|e| Failure::Validation(format!("{}: {e}", args.config.display())))?;
    let spec = doc.network().map_err(|e| Failure::Validation(e.to_string()))?;
    doc.check_times().map_err(|e| Failure::Validation(e.to_string()))?;
    let net = validate_network(spec).map_err(|e| Failure::Validation(e.to_string()))?;
    let class = classify_configuration(&net);
    info!("configuration: {}", class.name());

    let compat = check_compatibility(&net, doc.run.compat_tol.unwrap_or_else(|| default_compat_tol(&net)));
    for v in compat.violations() {
        warn!("vertex {}: {:?} residual {:.3e} at t = 0 exceeds {:.1e}", v.vertex, v.kind, v.residual, compat.tol);
    }

    let grid = sample_grid(&doc, &net);
    grid.check(&net).map_err(Failure::Validation)?;

    let solver = match (args.solver, doc.run.solver.as_deref()) {
        (Some(s), _) => s,
        (None, None) => Solver::Utm,
        (None, Some(s)) => Solver::from_str(s, true).map_err(|_| Failure::Validation(format!("run.solver: unknown solver {s:?}")))?,
    };
    let mode = match (args.mode, doc.run.mode.as_deref()) {
        (Some(m), _) => m,
        (None, None) => Mode::Deformed,
        (None, Some(m)) => Mode::from_str(m, true).map_err(|_| Failure::Validation(format!("run.mode: unknown mode {m:?}")))?,
    };

    let utm = if solver != Solver::Fdm {
        let mut opts = EvalOptions { mode: if mode == Mode::Paper { ContourMode::Paper } else { ContourMode::deformed() }, ..Default::default() };
        if let Some(tol) = doc.run.tail_tol {
            opts.tail_tol = tol;
        }
        // Paper rays get no help from e^{-λ²t}; near an end the integrals converge too slowly for
        // the extra samples the vertex residuals need.
        opts.vertex_diagnostics = mode == Mode::Deformed;
        let mut field = UtmSolver::new(&net, opts).and_then(|s| s.evaluate(&grid)).map_err(|e| match e {
            ContourError::Unsupported(_) => Failure::Validation(e.to_string()),
            e => Failure::Solver(e.to_string()),
        })?;
        if mode == Mode::Paper {
            field.diagnostics.notes.push("vertex residuals are not computed in paper mode".into());
        }
        info!("utm: R = {:?}, lambda max {:.1}, {} nodes", field.diagnostics.radius, field.diagnostics.lambda_max, field.diagnostics.nodes);
        for n in &field.diagnostics.notes {
            warn!("utm: {n}");
        }
        Some(field)
    } else {
        None
    };
    let fdm = if solver != Solver::Utm {
        let field = solve_fdm(&net, &fdm_grid(&net, args.nodes, doc.run.fdm_dt), &grid).map_err(|e| Failure::Solver(e.to_string()))?;
        Some(field)
    } else {
        None
    };

    let check = args.seed.map(|s| self_check(&net, s)).transpose()?;

    let io_err = |e: std::io::Error| Failure::Solver(format!("writing to {}: {e}", args.out.display()));
    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    let mut plotted: Vec<(&str, &SolutionField)> = Vec::new();
    if let Some(f) = &utm {
        output::write_fields(&args.out, "utm", f).map_err(io_err)?;
        plotted.push(("utm", f));
    }
    if let Some(f) = &fdm {
        output::write_fields(&args.out, "fdm", f).map_err(io_err)?;
        plotted.push(("fdm", f));
    }
    std::fs::write(args.out.join("plot.gp"), output::gnuplot(&plotted)).map_err(io_err)?;

    let mut comparison = None;
    let mut worst = None;
    if let (Some(a), Some(b)) = (&utm, &fdm) {
        let (csv, max) = output::comparison_csv(a, b).ok_or_else(|| Failure::Solver("solver outputs are not sampled alike".into()))?;
        std::fs::write(args.out.join("comparison.csv"), csv).map_err(io_err)?;
        let (max_abs, mean_abs) = a.compare(b).unwrap_or((max, max));
        info!("max |utm - fdm| = {max_abs:.3e}, mean {mean_abs:.3e}");
        comparison = Some(Comparison { max_abs, mean_abs });
        worst = Some(max_abs);
    }

    let report = Report {
        configuration: class.name(),
        compatibility: compat,
        utm: utm.as_ref().map(|f| &f.diagnostics),
        fdm: fdm.as_ref().map(|f| &f.diagnostics),
        comparison,
        self_check: check,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Solver(e.to_string()))?;
    std::fs::write(args.out.join("diagnostics.json"), json + "\n").map_err(io_err)?;

    match (args.assert_tol, worst) {
        (Some(tol), Some(d)) if !(d <= tol) => Err(Failure::Tolerance(format!("max |utm - fdm| = {d:.3e} exceeds {tol:.3e}"))),
        (Some(_), None) => {
            warn!("--assert-tol needs --solver both; nothing compared");
            Ok(())
        }
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NETHEAT_LOG", "warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("netheat: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
