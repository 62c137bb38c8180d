//! Command-line front end: mesh generation, Tresca and Coulomb runs,
//! verification and the eps/dt studies. All heavy lifting lives in the
//! `slipflow` library; this binary parses scenarios, wires the pieces
//! together and persists results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slipflow::coulomb::{solve_coulomb, BoundaryFn, CoulombProgress};
use slipflow::geometry::build_mesh;
use slipflow::outputs::{read_checkpoint, write_checkpoint, write_outputs};
use slipflow::scenario::{parse_scenario, ParsedScenario};
use slipflow::timestepping::{run_tresca, Discretization, RunConfig};
use slipflow::verification::{dt_order_study, eps_convergence_study, threshold_from_fn, verify_tresca, VerificationReport};
use slipflow::Error;

#[derive(Parser)]
#[command(name = "slipflow", version, about = "Unsteady Stokes flow with Tresca/Coulomb slip boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for study fan-out and trace evaluation.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the channel mesh and dump it in the ASCII MESH format.
    Mesh(CommonArgs),
    /// Run the solver with the scenario's Tresca threshold.
    RunTresca(CommonArgs),
    /// Run the windowed Coulomb fixed point.
    RunCoulomb {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint file updated after every converged window.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Resume from the checkpoint instead of starting fresh.
        #[arg(long)]
        resume: bool,
        /// Dump a threshold snapshot per inner iteration.
        #[arg(long)]
        dump_thresholds: bool,
    },
    /// Run the verification suite and print a pass/fail table.
    Verify(CommonArgs),
    /// Regularization study over a list of eps values.
    StudyEps(CommonArgs),
    /// Temporal-order study over a list of step sizes.
    StudyDt(CommonArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load(common: &CommonArgs) -> Result<ParsedScenario, Error> {
    init_threads(common.threads);
    parse_scenario(&common.scenario)
}

fn io_err(path: &std::path::Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io { path: path.display().to_string(), source: e }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Mesh(common) => {
            let parsed = load(&common)?;
            let mesh = build_mesh(&parsed.scenario.domain, &parsed.scenario.resolution)?;
            std::fs::create_dir_all(&common.out).map_err(io_err(&common.out))?;
            let path = common.out.join("mesh.txt");
            let mut buf = Vec::new();
            mesh.dump(&mut buf).map_err(io_err(&path))?;
            std::fs::write(&path, &buf).map_err(io_err(&path))?;
            println!(
                "mesh: {} vertices, {} cells, {} boundary facets -> {}",
                mesh.n_vertices(),
                mesh.n_cells(),
                mesh.boundary_facets.len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::RunTresca(common) => {
            let parsed = load(&common)?;
            let ell_fn = parsed
                .tresca_ell
                .as_ref()
                .ok_or_else(|| Error::Usage("run-tresca needs a [friction.tresca] section".into()))?;
            let disc = Discretization::build(&parsed.scenario)?;
            let ell = threshold_from_fn(&disc, &parsed.scenario, ell_fn)?;
            let traj = run_tresca(&disc, &parsed.scenario, &ell, &RunConfig::default())?;
            let manifest = write_outputs(&disc, &parsed.scenario, &traj, Some(&ell), None, &common.out)?;
            println!(
                "run complete: {} steps, {} output files in {}",
                traj.states.len() - 1,
                manifest.entries.len(),
                common.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::RunCoulomb { common, checkpoint, resume, dump_thresholds } => {
            let parsed = load(&common)?;
            let (spec, mut config) = parsed
                .coulomb
                .clone()
                .ok_or_else(|| Error::Usage("run-coulomb needs a [friction.coulomb] section".into()))?;
            config.keep_snapshots = dump_thresholds;
            config.trace_order = parsed.trace_order;
            config.run = RunConfig::default();
            let disc = Discretization::build(&parsed.scenario)?;
            let progress = if resume {
                let path = checkpoint
                    .as_ref()
                    .ok_or_else(|| Error::Usage("--resume needs --checkpoint <path>".into()))?;
                Some(read_checkpoint(path, &parsed.hash)?)
            } else {
                None
            };
            let grid = parsed.scenario.time_grid();
            let hash = parsed.hash.clone();
            let ckpt_path = checkpoint.clone();
            let mut observer = |p: &CoulombProgress| {
                if let Some(path) = &ckpt_path {
                    if let Err(e) = write_checkpoint(path, &hash, p, &grid, None) {
                        log::warn!("checkpoint write failed: {e}");
                    }
                }
            };
            let result = solve_coulomb(&disc, &parsed.scenario, &spec, &config, progress, Some(&mut observer))?;
            let mut traj = result.trajectory;
            traj.boundary_history = Some(result.history);
            std::fs::create_dir_all(&common.out).map_err(io_err(&common.out))?;
            let trace_path = common.out.join("iteration_trace.csv");
            let mut buf = Vec::new();
            result.trace.write_csv(&mut buf).map_err(io_err(&trace_path))?;
            std::fs::write(&trace_path, &buf).map_err(io_err(&trace_path))?;
            if dump_thresholds {
                for (window, iter, field) in &result.trace.snapshots {
                    let path = common.out.join(format!("threshold_w{window}_k{iter}.csv"));
                    let mut buf = Vec::new();
                    field.write_csv(&disc.ops.bquad, &mut buf).map_err(io_err(&path))?;
                    std::fs::write(&path, &buf).map_err(io_err(&path))?;
                }
            }
            let manifest = write_outputs(&disc, &parsed.scenario, &traj, Some(&result.threshold), None, &common.out)?;
            let (resid, bound) = result.self_consistency;
            println!(
                "coulomb run complete: {} windows, self-consistency {:.3e} (bound {:.3e}), {} output files in {}",
                result.trace.windows.len(),
                resid,
                bound,
                manifest.entries.len(),
                common.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(common) => {
            let parsed = load(&common)?;
            let disc = Discretization::build(&parsed.scenario)?;
            let report = match (&parsed.tresca_ell, &parsed.coulomb) {
                (Some(ell_fn), None) => {
                    let ell_const = constant_value(&parsed, ell_fn);
                    verify_tresca(&disc, &parsed.scenario, ell_fn, ell_const)?
                }
                (None, Some((spec, config))) => verify_coulomb(&disc, &parsed, spec, config)?,
                _ => return Err(Error::Usage("verify needs exactly one friction section".into())),
            };
            std::fs::create_dir_all(&common.out).map_err(io_err(&common.out))?;
            let path = common.out.join("report.txt");
            let mut buf = Vec::new();
            report.write(&mut buf).map_err(io_err(&path))?;
            std::fs::write(&path, &buf).map_err(io_err(&path))?;
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::StudyEps(common) => {
            let parsed = load(&common)?;
            let ell_fn = parsed
                .tresca_ell
                .as_ref()
                .ok_or_else(|| Error::Usage("study-eps needs a [friction.tresca] section".into()))?;
            let disc = Discretization::build(&parsed.scenario)?;
            let ell = threshold_from_fn(&disc, &parsed.scenario, ell_fn)?;
            let base = parsed.scenario.eps();
            let eps_list = parsed
                .verify
                .as_ref()
                .and_then(|v| v.eps_levels.clone())
                .unwrap_or_else(|| vec![base * 100.0, base * 10.0, base]);
            let rows = eps_convergence_study(&disc, &parsed.scenario, &ell, &eps_list)?;
            std::fs::create_dir_all(&common.out).map_err(io_err(&common.out))?;
            let path = common.out.join("eps_study.csv");
            let mut buf = String::from("eps,gap,gap_bound,slip_zone_measure,infeasibility,alignment\n");
            for r in &rows {
                buf.push_str(&format!(
                    "{:e},{:e},{:e},{:e},{:e},{:e}\n",
                    r.eps, r.gap, r.gap_bound, r.slip_zone_measure, r.complementarity.0, r.complementarity.1
                ));
                println!(
                    "eps = {:9.3e}: gap = {:11.5e} (bound {:11.5e}), slip zone = {:.4}",
                    r.eps, r.gap, r.gap_bound, r.slip_zone_measure
                );
            }
            std::fs::write(&path, buf).map_err(io_err(&path))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::StudyDt(common) => {
            let parsed = load(&common)?;
            let ell_fn = parsed
                .tresca_ell
                .as_ref()
                .ok_or_else(|| Error::Usage("study-dt needs a [friction.tresca] section".into()))?;
            let disc = Discretization::build(&parsed.scenario)?;
            let dts = parsed
                .verify
                .as_ref()
                .and_then(|v| v.dt_levels.clone())
                .unwrap_or_else(|| vec![parsed.scenario.dt, parsed.scenario.dt / 2.0, parsed.scenario.dt / 4.0]);
            let study = dt_order_study(&disc, &parsed.scenario, ell_fn, &dts)?;
            std::fs::create_dir_all(&common.out).map_err(io_err(&common.out))?;
            let path = common.out.join("dt_study.csv");
            let mut buf = String::from("dt,error,order\n");
            for (i, e) in study.errors.iter().enumerate() {
                let order = if i == 0 { String::new() } else { format!("{:.4}", study.orders[i - 1]) };
                buf.push_str(&format!("{:e},{:e},{}\n", study.dts[i], e, order));
                println!("dt = {:9.3e}: error = {:11.5e} {}", study.dts[i], e, order);
            }
            std::fs::write(&path, buf).map_err(io_err(&path))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Extracts the value of a constant threshold builtin, if that is what the
/// scenario uses.
fn constant_value(parsed: &ParsedScenario, ell_fn: &BoundaryFn) -> Option<f64> {
    let raw = parsed.raw.friction.tresca.as_ref()?;
    if raw.ell.name == "constant" {
        Some(ell_fn.eval(&[0.0, 0.0], 0.0))
    } else {
        None
    }
}

/// Coulomb-specific verification: contraction, termination, self-consistency
/// and threshold positivity.
fn verify_coulomb(
    disc: &Discretization,
    parsed: &ParsedScenario,
    spec: &slipflow::coulomb::CoulombSpec,
    config: &slipflow::coulomb::CoulombConfig,
) -> Result<VerificationReport, Error> {
    let mut config = config.clone();
    config.trace_order = parsed.trace_order;
    let result = solve_coulomb(disc, &parsed.scenario, spec, &config, None, None)?;
    let mut report = VerificationReport::default();
    let contracting = result
        .trace
        .windows
        .iter()
        .all(|w| w.converged && w.ratios.iter().all(|&r| r < 1.0));
    let iters: Vec<usize> = result.trace.windows.iter().map(|w| w.increments.len()).collect();
    report.push(
        "fixed-point contraction",
        Some(contracting),
        "observed increment ratios < 1 in every window; convergence within the iteration cap",
        vec![format!("iterations per window: {iters:?}")],
    );
    let (resid, bound) = result.self_consistency;
    report.push(
        "threshold self-consistency",
        Some(resid <= bound),
        "||ell - F(ell)|| <= 2 tol (1 + ||ell||)",
        vec![format!("residual = {resid:.3e}, bound = {bound:.3e}")],
    );
    let grid = parsed.scenario.time_grid();
    let bq = &disc.ops.bquad;
    let mut positive = true;
    for (n, row) in result.threshold.values.iter().enumerate() {
        for (q, &v) in row.iter().enumerate() {
            let xp = &bq.x_prime[q * bq.t_dim..(q + 1) * bq.t_dim];
            if v < spec.f0.eval(xp, grid[n]) - 1e-12 {
                positive = false;
            }
        }
    }
    report.push("threshold positivity", Some(positive), "ell >= F0 >= 0 pointwise", vec![]);
    let budget = slipflow::verification::energy_budget(disc, &parsed.scenario, &result.trajectory);
    report.push(
        "energy budget",
        Some(budget.global_ok && budget.per_step_ok),
        "max ||v||_M^2 <= 2 C1' exp(2T); per-step inequality at 1e-10 relative",
        vec![format!("alpha = {:.6e}, C1' = {:.6e}", budget.alpha, budget.c1_prime)],
    );
    Ok(report)
}
