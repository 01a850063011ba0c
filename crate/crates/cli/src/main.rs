//! `dualprice` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (spec, grid, solution file),
//! 2 optimizer non-convergence, 3 failed structural checks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use dualprice::config::bundled;
use dualprice::export::{
    fmt_inventory, fmt_num, load_solution, policy_curve_csv, solution_csv, solution_json,
};
use dualprice::simulator::{simulate_paths, trace_csv, SimOptions};
use dualprice::structure::thresholds::find_thresholds;
use dualprice::structure::unified::solve_unified;
use dualprice::verify::{any_failed, run_battery, BatteryOptions, Status};
use dualprice::{validate, Error, InventoryGrid, ProblemSpec, Solution, SolverOptions, SpecFile};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "dualprice",
    version,
    about = "Dual-market dynamic pricing solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the DP and write value/policy tables.
    Solve(Common),
    /// Run the structural check battery.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Check a saved solution JSON instead of solving.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Monte Carlo replay of the optimal policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Starting inventory.
        #[arg(long = "I0", default_value_t = 0.0, allow_hyphen_values = true)]
        i0: f64,
        /// Also write the per-path trace CSV.
        #[arg(long)]
        trace: bool,
        /// Replay a saved solution JSON instead of solving.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Report per-period opening thresholds.
    Thresholds(Common),
    /// Solve the single-price variant.
    Unified(Common),
    /// Plot data for the period-1 policy curves over [-4, 6].
    Figure2(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Spec file, or the name of a bundled spec.
    #[arg(long, default_value = "example1")]
    spec: String,
    #[arg(long, allow_hyphen_values = true)]
    grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    grid_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    grid_step: Option<f64>,
    /// Quadrature nodes per noise component.
    #[arg(long)]
    nodes: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(e) if e.is_non_convergence() => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

struct Run {
    spec: ProblemSpec,
    grid: InventoryGrid,
    opts: SolverOptions,
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<Run, Failure> {
        let path = Path::new(&self.spec);
        let file = if path.is_file() {
            SpecFile::load(path)?
        } else {
            bundled(&self.spec)
                .ok_or_else(|| anyhow!("no spec file or bundled spec named {:?}", self.spec))?
        };
        let spec = file.to_spec()?;
        validate(&spec).into_result()?;
        let base = file.inventory_grid()?;
        let grid = InventoryGrid::new(
            self.grid_min.unwrap_or(base.min()),
            self.grid_max.unwrap_or(base.max()),
            self.grid_step.unwrap_or(base.step),
        )?;
        let opts = SolverOptions::with_nodes(self.nodes.unwrap_or(file.quadrature_nodes));
        Ok(Run {
            spec,
            grid,
            opts,
            out: self.out.clone(),
        })
    }
}

impl Run {
    fn solve(&self) -> Result<Solution, Failure> {
        log::info!(
            "solving {} on {} grid points, {} nodes",
            self.spec.name,
            self.grid.len(),
            self.opts.nodes
        );
        Ok(dualprice::solve(&self.spec, &self.grid, &self.opts)?)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn saved_solution(path: &Path) -> Result<Solution, Failure> {
    load_solution(path).map_err(|e| Failure {
        code: 1,
        error: anyhow!("cannot read solution: {e}"),
    })
}

fn threshold_lines(sol: &Solution) -> String {
    let mut out = String::new();
    match find_thresholds(sol) {
        Ok(report) => {
            for p in &report.periods {
                let show = |m: &Option<dualprice::structure::MarketThreshold>| match m {
                    Some(th) => format!("{:.4}", th.estimate),
                    None => "closed".to_string(),
                };
                let _ = writeln!(
                    out,
                    "t={}: I*_s = {}, I*_l = {}, {:?}",
                    p.t,
                    show(&p.on_site),
                    show(&p.long_distance),
                    p.preference
                );
            }
        }
        Err(e) => {
            let _ = writeln!(out, "thresholds unavailable: {e}");
        }
    }
    out
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    spec: &'a str,
    spec_sha256: String,
    grid_min: f64,
    grid_max: f64,
    grid_step: f64,
    nodes: usize,
    v1_min: f64,
    v1_max: f64,
}

fn cmd_solve(common: &Common) -> Result<(), Failure> {
    let run = common.load()?;
    let sol = run.solve()?;
    run.write("solution.csv", &solution_csv(&sol))?;
    run.write("solution.json", &solution_json(&sol, run.opts.parallel)?)?;
    let v1 = &sol.values[0].values;
    let summary = SolveSummary {
        spec: &sol.spec.name,
        spec_sha256: dualprice::config::spec_hash(&sol.spec),
        grid_min: sol.grid.min(),
        grid_max: sol.grid.max(),
        grid_step: sol.grid.step,
        nodes: sol.nodes,
        v1_min: v1.iter().copied().fold(f64::INFINITY, f64::min),
        v1_max: v1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    run.write(
        "summary.json",
        &serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?,
    )?;
    print!("{}", threshold_lines(&sol));
    println!("wrote {}", run.out.display());
    Ok(())
}

fn cmd_verify(common: &Common, solution: Option<&Path>) -> Result<(), Failure> {
    let run = common.load()?;
    let (sol, solver) = match solution {
        Some(path) => {
            let sol = saved_solution(path)?;
            let opts = SolverOptions::with_nodes(sol.nodes);
            (sol, opts)
        }
        None => (run.solve()?, run.opts),
    };
    let results = run_battery(
        &sol,
        &BatteryOptions {
            solver,
            ..BatteryOptions::default()
        },
    );
    for r in &results {
        println!("{r}");
    }
    let count = |s: Status| results.iter().filter(|r| r.status == s).count();
    println!(
        "{} passed, {} failed, {} skipped, {} info",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Skipped),
        count(Status::Info)
    );
    run.write(
        "verify.json",
        &serde_json::to_string_pretty(&results).map_err(anyhow::Error::from)?,
    )?;
    if any_failed(&results) {
        return Err(Failure {
            code: 3,
            error: anyhow!("{} structural checks failed", count(Status::Fail)),
        });
    }
    Ok(())
}

fn cmd_simulate(
    common: &Common,
    paths: usize,
    seed: u64,
    i0: f64,
    trace: bool,
    solution: Option<&Path>,
) -> Result<(), Failure> {
    let run = common.load()?;
    let sol = match solution {
        Some(path) => saved_solution(path)?,
        None => run.solve()?,
    };
    if !sol.grid.contains(i0) {
        log::warn!(
            "I0={i0} lies outside the policy grid [{}, {}]",
            sol.grid.min(),
            sol.grid.max()
        );
    }
    let opts = SimOptions {
        n_paths: paths,
        seed,
        ..SimOptions::default()
    };
    let (stats, records) = simulate_paths(&sol, i0, &opts)?;
    let json = serde_json::to_string_pretty(&stats).map_err(anyhow::Error::from)?;
    run.write("simulate.json", &json)?;
    if trace {
        run.write("trace.csv", &trace_csv(&sol, &opts, &records))?;
    }
    println!("{json}");
    println!("V_1({i0}) = {}", sol.value_at(1, i0));
    Ok(())
}

fn cmd_thresholds(common: &Common) -> Result<(), Failure> {
    let run = common.load()?;
    let sol = run.solve()?;
    let report = find_thresholds(&sol)?;
    run.write(
        "thresholds.json",
        &serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?,
    )?;
    print!("{}", threshold_lines(&sol));
    Ok(())
}

fn cmd_unified(common: &Common) -> Result<(), Failure> {
    let run = common.load()?;
    let uni = solve_unified(&run.spec, &run.grid, &run.opts)?;
    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "# spec={} sha256={}",
        run.spec.name,
        dualprice::config::spec_hash(&run.spec)
    );
    let _ = writeln!(
        csv,
        "# grid_min={} grid_max={} grid_step={} nodes={}",
        fmt_num(run.grid.min()),
        fmt_num(run.grid.max()),
        fmt_num(run.grid.step),
        run.opts.nodes
    );
    csv.push_str("t,I,V_u,p_u\n");
    for t in 1..=uni.horizon() {
        for k in 0..run.grid.len() {
            let _ = writeln!(
                csv,
                "{t},{},{},{}",
                fmt_inventory(run.grid.point(k)),
                fmt_num(uni.values[t - 1].values[k]),
                fmt_num(uni.prices[t - 1][k])
            );
        }
    }
    run.write("unified.csv", &csv)?;
    for t in 1..=uni.horizon() {
        match uni.i_u_star[t - 1] {
            Some(x) => println!("t={t}: I^u* = {x:.4}"),
            None => println!("t={t}: I^u* below the grid"),
        }
    }
    Ok(())
}

fn cmd_figure2(common: &Common) -> Result<(), Failure> {
    let run = common.load()?;
    let sol = run.solve()?;
    let csv = policy_curve_csv(&sol, 1, -4.0, 6.0, 0.05);
    let path = run.write("figure2.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DUALPRICE_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("DUALPRICE_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors share exit code 1 with other invalid input
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Solve(c) => cmd_solve(c),
        Command::Verify { common, solution } => cmd_verify(common, solution.as_deref()),
        Command::Simulate {
            common,
            paths,
            seed,
            i0,
            trace,
            solution,
        } => cmd_simulate(common, *paths, *seed, *i0, *trace, solution.as_deref()),
        Command::Thresholds(c) => cmd_thresholds(c),
        Command::Unified(c) => cmd_unified(c),
        Command::Figure2(c) => cmd_figure2(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
