mod args;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use corridor_core::bilevel::{compare_policies, grid_search, policy_grid, system_totals, Quadrants};
use corridor_core::io::{self, Table};
use corridor_core::{load_scenario, solve_equilibrium, PolicyParams, Scenario};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

/// Corridor mode-choice equilibrium with tradable driving credits and
/// demand-responsive shuttles.
#[derive(Parser, Debug)]
#[command(name = "corridor", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one equilibrium and write shares, speeds, waits, market and trace.
    ///
    /// Exits 0 when converged, 2 when not (the best iterate is still written), 1 on bad input.
    RunEquilibrium {
        #[command(flatten)]
        common: Common,
        /// Policy overrides, e.g. `k=50,tau=63,xi=6`.
        #[arg(long)]
        policy: Option<String>,
        /// Print the convergence trace to stderr as well.
        #[arg(long)]
        trace: bool,
    },
    /// Evaluate the planner objective over a policy grid.
    ///
    /// Every point is written; exits 2 if any of them did not converge.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Ranges such as `k=50:58:2,tau=64:72:2,xi=4:10:1`; missing keys fall
        /// back to the scenario's grid, then to its policy.
        #[arg(long)]
        grid: Option<String>,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Compare no policy, credits only, shuttles only and both.
    ComparePolicies {
        #[command(flatten)]
        common: Common,
        /// Levers shared by the quadrants, e.g. `k=50,tau=63,xi=6`.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, value_name = "POLICY")]
        no_policy: Option<String>,
        #[arg(long, value_name = "POLICY")]
        tcs_only: Option<String>,
        #[arg(long, value_name = "POLICY")]
        dras_only: Option<String>,
        #[arg(long, value_name = "POLICY")]
        combined: Option<String>,
    },
    /// Load and check a scenario file without solving.
    ValidateScenario {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        policy: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to `$CORRIDOR_OUT/<command>-<scenario>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "CORRIDOR_OUT", default_value = "corridor-out", hide_env_values = true)]
    out_root: PathBuf,
    /// Iteration limit per equilibrium solve.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence tolerance on the residual norm.
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Objective weights; unset weights keep the scenario values.
    #[arg(long)]
    weight_travel_time: Option<f64>,
    #[arg(long)]
    weight_emission: Option<f64>,
    #[arg(long)]
    weight_fleet: Option<f64>,
    #[arg(long)]
    weight_price: Option<f64>,
    /// Add perceived waiting to the travel-time term of the objective.
    #[arg(long)]
    include_waiting: bool,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    scenario: String,
    overrides: BTreeMap<String, String>,
    output_dir: String,
    tool_version: &'static str,
    outputs: Vec<String>,
    timings: Timings,
}

#[derive(Serialize)]
struct Timings {
    wall_seconds: f64,
}

/// Files produced by one command, written into a single directory.
struct Run {
    command: &'static str,
    scenario_path: PathBuf,
    overrides: BTreeMap<String, String>,
    dir: PathBuf,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        table.save(&self.dir.join(name))?;
        self.outputs.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.dir.join(name), value)?;
        self.outputs.push(name.into());
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let manifest = Manifest {
            command: self.command,
            scenario: self.scenario_path.display().to_string(),
            overrides: self.overrides,
            output_dir: self.dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            outputs: self.outputs,
            timings: Timings {
                wall_seconds: self.started.elapsed().as_secs_f64(),
            },
        };
        io::write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(())
    }
}

fn prepare(command: &'static str, common: &Common) -> Result<(Scenario, Run)> {
    let started = Instant::now();
    let mut scenario = load_scenario(&common.scenario)?;
    let mut overrides = BTreeMap::new();
    if let Some(v) = common.max_iter {
        scenario.solver.max_iter = v;
        overrides.insert("solver.max_iter".into(), v.to_string());
    }
    if let Some(v) = common.residual_tol {
        scenario.solver.residual_tol = v;
        overrides.insert("solver.residual_tol".into(), v.to_string());
    }
    let w = &mut scenario.bilevel.weights;
    for (name, flag, slot) in [
        ("travel_time", common.weight_travel_time, &mut w.travel_time),
        ("emission", common.weight_emission, &mut w.emission),
        ("fleet", common.weight_fleet, &mut w.fleet),
        ("price", common.weight_price, &mut w.price),
    ] {
        if let Some(v) = flag {
            *slot = v;
            overrides.insert(format!("bilevel.weights.{name}"), v.to_string());
        }
    }
    if common.include_waiting {
        scenario.bilevel.include_waiting = true;
        overrides.insert("bilevel.include_waiting".into(), "true".into());
    }
    scenario.solver.validate()?;
    let dir = match &common.out {
        Some(d) => d.clone(),
        None => common.out_root.join(format!("{command}-{}", scenario.name)),
    };
    Ok((
        scenario,
        Run {
            command,
            scenario_path: common.scenario.clone(),
            overrides,
            dir,
            outputs: Vec::new(),
            started,
        },
    ))
}

fn policy_flag(run: &mut Run, key: &str, text: Option<&str>, base: PolicyParams) -> Result<PolicyParams> {
    match text {
        Some(t) => {
            let p = args::parse_policy(t, base).with_context(|| format!("--{key}"))?;
            p.validate()?;
            run.overrides.insert(key.replace('-', "_"), t.into());
            Ok(p)
        }
        None => Ok(base),
    }
}

fn run_equilibrium(common: &Common, policy: Option<&str>, trace: bool) -> Result<u8> {
    let (scenario, mut run) = prepare("run-equilibrium", common)?;
    let policy = policy_flag(&mut run, "policy", policy, scenario.policy)?;
    let s = scenario.with_policy(policy)?;
    let eq = solve_equilibrium(&s, None, &s.solver)?;
    if trace {
        for r in &eq.trace {
            eprintln!(
                "iter {:>5}  merit {:.6e}  |F| {:.6e}  step {:.3e}  backtracks {}",
                r.iteration, r.merit, r.residual_norm, r.step, r.backtracks
            );
        }
    }
    let totals = system_totals(&s, &eq);
    run.json("equilibrium.json", &io::equilibrium_summary(&s, &eq, Some(totals)))?;
    run.table("shares.csv", &io::shares_table(&s, &eq))?;
    run.table("interval_shares.csv", &io::interval_shares_table(&s, &eq))?;
    run.table("speeds.csv", &io::speeds_table(&s, &eq))?;
    run.table("waits.csv", &io::waits_table(&s, &eq))?;
    run.table("market.csv", &io::market_table(&s, &eq))?;
    run.table("vehicles.csv", &io::vehicles_table(&s, &eq))?;
    run.table("trace.csv", &io::trace_table(&eq.trace))?;
    let dir = run.dir.clone();
    run.finish()?;

    let shares = eq.mode_shares(&s);
    println!(
        "{} k={} tau={} xi={}: {} after {} iterations, |F| = {:.3e}",
        s.name,
        policy.k,
        policy.tau,
        policy.fleet,
        if eq.converged { "converged" } else { "NOT converged" },
        eq.iterations,
        eq.residual_norm
    );
    println!(
        "shares car {:.4} bus {:.4} dras {:.4}, credit price {:.6}",
        shares[0],
        shares[1],
        shares[2],
        eq.decision.price()
    );
    println!("results in {}", dir.display());
    Ok(if eq.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn sweep(common: &Common, grid: Option<&str>, jobs: usize) -> Result<u8> {
    let (scenario, mut run) = prepare("sweep", common)?;
    let mut ranges = match grid {
        Some(g) => {
            run.overrides.insert("grid".into(), g.into());
            args::parse_grid(g).context("--grid")?
        }
        None => BTreeMap::new(),
    };
    let b = &scenario.bilevel;
    let p = scenario.policy;
    let mut pick = |key: &str, configured: &[u32], fallback: u32| {
        ranges.remove(key).unwrap_or_else(|| {
            if configured.is_empty() {
                vec![fallback]
            } else {
                configured.to_vec()
            }
        })
    };
    let k = pick("k", &b.k_values, p.k);
    let tau = pick("tau", &b.tau_values, p.tau);
    let xi = pick("xi", &b.fleet_values, p.fleet);
    let policies = policy_grid(&k, &tau, &xi)?;
    let result = grid_search(&scenario, &policies, &b.weights, jobs)?;
    run.table("sweep.csv", &io::sweep_table(&result))?;
    run.table("optimum.csv", &io::optimum_table(&result))?;
    let dir = run.dir.clone();
    run.finish()?;

    let failed = result.points.iter().filter(|p| !p.converged()).count();
    println!("{} points evaluated, {} not converged", result.points.len(), failed);
    match result.optimum {
        Some(i) => {
            let o = &result.points[i];
            println!(
                "optimum k={} tau={} xi={}: objective {:.2} (price {:.6})",
                o.policy.k,
                o.policy.tau,
                o.policy.fleet,
                o.objective.total,
                o.totals.price
            );
        }
        None => println!("no feasible converged point"),
    }
    println!("results in {}", dir.display());
    // every point is still evaluated and written; the code only flags the gaps
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

struct CompareFlags<'a> {
    policy: Option<&'a str>,
    no_policy: Option<&'a str>,
    tcs_only: Option<&'a str>,
    dras_only: Option<&'a str>,
    combined: Option<&'a str>,
}

fn compare(common: &Common, flags: CompareFlags) -> Result<u8> {
    let (scenario, mut run) = prepare("compare-policies", common)?;
    let levers = policy_flag(&mut run, "policy", flags.policy, scenario.policy)?;
    let q = Quadrants::from_levers(levers.k, levers.tau, levers.fleet);
    let q = Quadrants {
        none: policy_flag(&mut run, "no-policy", flags.no_policy, q.none)?,
        tcs_only: policy_flag(&mut run, "tcs-only", flags.tcs_only, q.tcs_only)?,
        dras_only: policy_flag(&mut run, "dras-only", flags.dras_only, q.dras_only)?,
        combined: policy_flag(&mut run, "combined", flags.combined, q.combined)?,
    };
    let rows = compare_policies(&scenario, &q, &scenario.bilevel.weights)?;
    run.table("comparison.csv", &io::comparison_table(&rows))?;
    let dir = run.dir.clone();
    run.finish()?;

    println!(
        "{:<10} {:>4} {:>4} {:>3} {:>12} {:>8} {:>10} {:>9} {:>7} {:>7} {:>7} {:>13} {:>8}",
        "scenario", "k", "tau", "xi", "veh-hours", "Δ%", "fleet €", "price", "car", "bus", "dras", "objective", "Δ%"
    );
    for r in &rows {
        let p = &r.point;
        println!(
            "{:<10} {:>4} {:>4} {:>3} {:>12.1} {:>8.2} {:>10.1} {:>9.5} {:>7.4} {:>7.4} {:>7.4} {:>13.2} {:>8.3}{}",
            r.label,
            p.policy.k,
            p.policy.tau,
            p.policy.fleet,
            p.totals.in_vehicle_hours,
            r.travel_time_delta_pct,
            p.totals.fleet_cost,
            p.totals.price,
            p.mode_shares[0],
            p.mode_shares[1],
            p.mode_shares[2],
            p.ranked_total(),
            r.objective_delta_pct,
            if p.converged() { "" } else { "  (not converged)" }
        );
    }
    println!("results in {}", dir.display());
    let all = rows.iter().all(|r| r.point.converged());
    Ok(if all { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn validate(path: &Path, policy: Option<&str>) -> Result<u8> {
    let scenario = load_scenario(path)?;
    if let Some(p) = policy {
        scenario.with_policy(args::parse_policy(p, scenario.policy)?)?;
    }
    println!(
        "{}: {} stations, {} demand streams, {} intervals of {} s, {:.1} travellers",
        scenario.name,
        scenario.stations.len(),
        scenario.stream_count(),
        scenario.interval_count(),
        scenario.grid.interval_length,
        scenario.total_demand()
    );
    for st in &scenario.streams {
        println!(
            "  {} {} -> {}: {:.1} km, {:.1} travellers",
            st.id,
            scenario.stations[st.origin].id,
            scenario.stations[st.destination].id,
            st.length / 1000.0,
            st.total()
        );
    }
    println!("ok");
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::RunEquilibrium { common, policy, trace } => run_equilibrium(common, policy.as_deref(), *trace),
        Command::Sweep { common, grid, jobs } => sweep(common, grid.as_deref(), *jobs),
        Command::ComparePolicies {
            common,
            policy,
            no_policy,
            tcs_only,
            dras_only,
            combined,
        } => compare(
            common,
            CompareFlags {
                policy: policy.as_deref(),
                no_policy: no_policy.as_deref(),
                tcs_only: tcs_only.as_deref(),
                dras_only: dras_only.as_deref(),
                combined: combined.as_deref(),
            },
        ),
        Command::ValidateScenario { scenario, policy } => validate(scenario, policy.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors share the input-error code; help and version succeed
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
