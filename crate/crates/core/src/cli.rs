//! `diracvac` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::check::run_checks;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::family::make_density;
use crate::lattice::MomentumGrid;
use crate::manifest::RunManifest;
use crate::output::{
    asym_rows, curve_rows, renorm_rows, OutputDir, SeriesRecord, SolutionRecord, UehlingRow,
};
use crate::renorm::{
    b_lambda, renorm_table, verify_charge_relation, BSource, RenormalizationPoint,
};
use crate::scf::{
    mu_sweep, solve_charge_constrained, solve_fixed_point, InitMode, MeanFieldProblem, Solution,
    SolverConfig,
};
use crate::series::{
    asymptotic_check, extract_series, uehling_potential, AsymptoticPlan, RadialGaussian,
};

#[derive(Debug, Parser)]
#[command(
    name = "diracvac",
    version,
    about = "Polarized Dirac vacuum with an ultraviolet cutoff"
)]
pub struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides `run.seed` and the seed of a random-admissible start.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Accept densities narrower than the grid spacing.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Self-consistent solution at fixed μ.
    Solve {
        /// Start from the density stored in a previous solution file.
        #[arg(long)]
        warm: Option<PathBuf>,
    },
    /// μ-sweep written as the energy curve `sweep.csv`.
    Sweep,
    /// Solution with prescribed generalized charge.
    Charge {
        /// Overrides `charge.target`.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Table of B_Λ, α_ph and κ.
    Renorm,
    /// Uehling potential of the (centred, radial) external density.
    Uehling,
    /// Taylor coefficients of the renormalized density in α_ph.
    Series,
    /// Error scaling at fixed κ.
    Asymcheck,
    /// Invariant suite.
    Check,
}

/// Work finished but something asserted did not hold.
struct Unmet(String);

enum Failure {
    Error(Error),
    Unmet(Unmet),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            report_error("usage", &e.render().to_string(), None);
            return 2;
        }
    };
    match execute(&cli, args) {
        Ok(()) => 0,
        Err(Failure::Unmet(Unmet(msg))) => {
            report_error("unmet", &msg, None);
            1
        }
        Err(Failure::Error(e)) => {
            let details = match &e {
                Error::NotConverged(d) => serde_json::to_value(d.as_ref()).ok(),
                _ => None,
            };
            report_error(e.kind(), &e.to_string(), details);
            1
        }
    }
}

fn report_error(kind: &str, message: &str, details: Option<serde_json::Value>) {
    let mut v = json!({ "error": kind, "message": message.trim_end() });
    if let Some(d) = details {
        v["details"] = d;
    }
    let _ = writeln!(std::io::stderr(), "{v}");
}

fn execute(cli: &Cli, invocation: Vec<String>) -> std::result::Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
        if let InitMode::RandomAdmissible { seed: s, .. } = &mut cfg.solver.init {
            *s = seed;
        }
    }
    if let Some(t) = cli.threads.or(cfg.run.threads) {
        if t == 0 {
            return Err(Error::param("threads", "must be at least 1").into());
        }
        // A global pool can only be installed once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    cfg.validate()?;
    let name = subcommand_name(&cli.command);
    let needs_grid = !matches!(
        cli.command,
        Command::Renorm | Command::Uehling | Command::Asymcheck
    );
    let grid = if needs_grid {
        Some(Arc::new(cfg.grid.build()?))
    } else {
        None
    };
    let manifest = RunManifest::new(
        name,
        invocation,
        cfg.run.seed,
        cfg.clone(),
        grid.as_ref().map(|g| g.descriptor()),
    );
    let mut out = OutputDir::create(&cli.out_dir, manifest)?;

    let result = match &cli.command {
        Command::Solve { warm } => {
            cmd_solve(cli, &cfg, grid.expect("grid"), warm.as_deref(), &mut out)
        }
        Command::Sweep => cmd_sweep(cli, &cfg, grid.expect("grid"), &mut out),
        Command::Charge { target } => cmd_charge(
            cli,
            &cfg,
            grid.expect("grid"),
            target.unwrap_or(cfg.charge.target),
            &mut out,
        ),
        Command::Renorm => cmd_renorm(&cfg, &mut out),
        Command::Uehling => cmd_uehling(&cfg, &mut out),
        Command::Series => cmd_series(cli, &cfg, grid.expect("grid"), &mut out),
        Command::Asymcheck => cmd_asymcheck(&cfg, &mut out),
        Command::Check => cmd_check(cli, &cfg, &mut out),
    };
    // The manifest is written even when the work fell short.
    match result {
        Ok(()) => {
            out.finish()?;
            Ok(())
        }
        Err(Failure::Unmet(u)) => {
            out.finish()?;
            Err(Failure::Unmet(u))
        }
        Err(e) => Err(e),
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Solve { .. } => "solve",
        Command::Sweep => "sweep",
        Command::Charge { .. } => "charge",
        Command::Renorm => "renorm",
        Command::Uehling => "uehling",
        Command::Series => "series",
        Command::Asymcheck => "asymcheck",
        Command::Check => "check",
    }
}

fn problem(cli: &Cli, cfg: &Config, grid: Arc<MomentumGrid>) -> Result<MeanFieldProblem> {
    let (nu, report) = make_density(&cfg.density, &grid, cli.force)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    MeanFieldProblem::new(grid, nu, cfg.solver.flavor)
}

fn radial_profile(cfg: &Config) -> Result<RadialGaussian> {
    let (charge, width) = cfg.density.radial_profile().ok_or_else(|| {
        Error::param(
            "density",
            "the Uehling routines need a single Gaussian centred at the origin",
        )
    })?;
    RadialGaussian::new(charge, width)
}

fn solution_record(
    sol: &Solution,
    grid: &MomentumGrid,
    solver: &SolverConfig,
) -> Result<SolutionRecord> {
    let relation = if sol.alpha > 0.0 && sol.external.total_charge() != 0.0 {
        let point = RenormalizationPoint::from_bare(sol.alpha, grid.cutoff())?;
        Some(verify_charge_relation(
            sol,
            &point,
            b_lambda(grid.cutoff())?,
            BSource::Continuum,
        )?)
    } else {
        None
    };
    Ok(SolutionRecord::new(sol, grid, solver, "", relation))
}

fn summary(sol: &Solution) {
    println!(
        "converged in {} iterations: q = {:.12}, E = {:.12e}, μ = {}",
        sol.iterations, sol.charge, sol.energy.total, sol.mu
    );
}

fn cmd_solve(
    cli: &Cli,
    cfg: &Config,
    grid: Arc<MomentumGrid>,
    warm: Option<&Path>,
    out: &mut OutputDir,
) -> std::result::Result<(), Failure> {
    let problem = problem(cli, cfg, Arc::clone(&grid))?;
    let initial = match warm {
        Some(p) => Some(SolutionRecord::read(p)?.density(grid.density_lattice())?),
        None => None,
    };
    let sol = solve_fixed_point(&problem, &cfg.solver, initial.as_ref())?;
    summary(&sol);
    out.write_json("solution.json", &solution_record(&sol, &grid, &cfg.solver)?)?;
    Ok(())
}

fn cmd_sweep(
    cli: &Cli,
    cfg: &Config,
    grid: Arc<MomentumGrid>,
    out: &mut OutputDir,
) -> std::result::Result<(), Failure> {
    let problem = problem(cli, cfg, grid)?;
    let curve = mu_sweep(&problem, &cfg.sweep.values(), &cfg.solver)?;
    out.write_csv("sweep.csv", curve_rows(&curve))?;
    let failed = curve.points.iter().filter(|p| !p.converged).count();
    println!("{} points, {failed} not converged", curve.points.len());
    if failed > 0 {
        return Err(Failure::Unmet(Unmet(format!(
            "{failed} sweep points did not converge"
        ))));
    }
    if !curve.charge_nondecreasing() {
        return Err(Failure::Unmet(Unmet(
            "charge is not nondecreasing in μ".into(),
        )));
    }
    Ok(())
}

fn cmd_charge(
    cli: &Cli,
    cfg: &Config,
    grid: Arc<MomentumGrid>,
    target: f64,
    out: &mut OutputDir,
) -> std::result::Result<(), Failure> {
    let problem = problem(cli, cfg, Arc::clone(&grid))?;
    let (sol, mu) = solve_charge_constrained(&problem, &cfg.solver, target, &cfg.charge.search())?;
    summary(&sol);
    println!("μ* = {mu}");
    let solver = SolverConfig {
        mu,
        ..cfg.solver.clone()
    };
    out.write_json("solution.json", &solution_record(&sol, &grid, &solver)?)?;
    Ok(())
}

fn cmd_renorm(cfg: &Config, out: &mut OutputDir) -> std::result::Result<(), Failure> {
    let rows = renorm_table(&cfg.renorm.cutoffs, cfg.renorm.alpha)?;
    out.write_csv("renorm.csv", renorm_rows(&rows))?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for r in &rows {
        w.serialize(r).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn cmd_uehling(cfg: &Config, out: &mut OutputDir) -> std::result::Result<(), Failure> {
    let profile = radial_profile(cfg)?;
    let rows = cfg
        .uehling
        .radii
        .iter()
        .map(|&x| {
            Ok(UehlingRow {
                x,
                v1: uehling_potential(&profile, x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.write_csv("uehling.csv", rows)?;
    Ok(())
}

fn cmd_series(
    cli: &Cli,
    cfg: &Config,
    grid: Arc<MomentumGrid>,
    out: &mut OutputDir,
) -> std::result::Result<(), Failure> {
    let problem = problem(cli, cfg, Arc::clone(&grid))?;
    let series = extract_series(&problem, &cfg.solver, cfg.series.n_max, cfg.series.step)?;
    out.write_json("series.json", &SeriesRecord::new(&series, &grid, ""))?;
    println!(
        "extracted {} coefficients at Λ = {}",
        series.coefficients.len(),
        grid.cutoff()
    );
    Ok(())
}

fn cmd_asymcheck(cfg: &Config, out: &mut OutputDir) -> std::result::Result<(), Failure> {
    let profile = radial_profile(cfg)?;
    let a = &cfg.asymcheck;
    let plan = AsymptoticPlan {
        order: a.order,
        kappas: a.kappas.clone(),
        alphas: a.alphas.clone(),
        policy: a.policy(),
    };
    let report = asymptotic_check(&profile, &plan, &cfg.solver)?;
    out.write_csv("asymcheck.csv", asym_rows(&report))?;
    out.write_json(
        "asymcheck.json",
        &json!({ "manifest_hash": "", "report": report }),
    )?;
    let min_exponent = if a.order == 0 { 0.9 } else { 1.7 };
    let computed = report.cells.iter().filter(|c| c.error.is_some()).count();
    println!(
        "{computed} of {} cells computed; exponents {:?}",
        report.cells.len(),
        report.exponents
    );
    if !report.passes(min_exponent) {
        return Err(Failure::Unmet(Unmet(format!(
            "scaling check incomplete or failed ({computed} of {} cells computed)",
            report.cells.len()
        ))));
    }
    Ok(())
}

fn cmd_check(cli: &Cli, cfg: &Config, out: &mut OutputDir) -> std::result::Result<(), Failure> {
    let results = run_checks(cfg, cli.force)?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{:<width$}  {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    out.write_json(
        "check.json",
        &json!({ "manifest_hash": "", "results": results }),
    )?;
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Unmet(Unmet(format!("{failed} checks failed"))));
    }
    Ok(())
}
