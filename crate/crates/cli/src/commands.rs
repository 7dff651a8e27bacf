//! Subcommand definitions and dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dnls_core::analysis::mi_scan;
use dnls_core::lattice::{critical_amplitude, solvability_gate};
use dnls_core::{Boundary, LatticeConfig};

use crate::emit::{emit_products, fmt_float, output_dir, write_csv, Csv};
use crate::error::{CliError, CliResult};
use crate::run::{run_scenario, RunOptions, ScenarioRun};
use crate::scenario::{load_scenario, Product, CATALOG, GATE_TOL};

#[derive(Debug, Parser)]
#[command(name = "dnls", version, about = "Gain/loss DNLS lattice simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a catalog scenario or a config file and write its products.
    Simulate(SimulateArgs),
    /// Tabulate sideband growth rates of plane-wave carriers.
    MiScan(MiScanArgs),
    /// Print the critical amplitude and solvability verdicts.
    Gate(GateArgs),
    /// Paired DNLS/AL run with distance curves and both estimates.
    CompareAl(RunArgs),
    /// Long-run convergence verdict onto the plane-wave attractor.
    AttractorCheck(RunArgs),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Catalog name or path to a `key = value` file.
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cap t_end at 10.
    #[arg(long)]
    pub smoke: bool,
    /// Output root (default `$DNLS_OUT`, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a config key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Plane-wave amplitude perturbation(s), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub ap: Option<String>,
    /// Take the dPS peak time from the first central-node maximum.
    #[arg(long)]
    pub auto_t0: bool,
}

#[derive(Debug, Args)]
pub struct MiScanArgs {
    #[arg(long, default_value_t = 50.0)]
    pub half_length: f64,
    #[arg(long, default_value_t = 100)]
    pub nodes: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: f64,
    /// Single carrier mode; all of `0..=N/2` when omitted.
    #[arg(long)]
    pub carrier: Option<i64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: f64,
    /// Background amplitude(s) to test, comma separated.
    #[arg(long)]
    pub amplitude: Option<String>,
    #[arg(long, default_value_t = GATE_TOL)]
    pub tol: f64,
}

fn parse_floats(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("{flag}: `{}` is not a number", s.trim())))
        })
        .collect()
}

fn scenario_source(args: &RunArgs, default: Option<&str>) -> CliResult<String> {
    match (&args.scenario, &args.config, default) {
        (Some(s), _, _) => Ok(s.clone()),
        (None, Some(p), _) => Ok(p.display().to_string()),
        (None, None, Some(d)) => Ok(d.to_string()),
        (None, None, None) => Err(CliError::Validation("one of --scenario or --config is required".into())),
    }
}

fn execute(args: &RunArgs, extra: &[String], default: Option<&str>, options: RunOptions) -> CliResult<(ScenarioRun, PathBuf)> {
    let source = scenario_source(args, default)?;
    let mut overrides = extra.to_vec();
    overrides.extend(args.set.iter().cloned());
    let mut spec = load_scenario(&source, &overrides)?;
    if args.smoke {
        spec = spec.smoke();
    }
    let run = run_scenario(&spec, options)?;
    let dir = output_dir(args.out.as_deref(), &spec.name);
    emit_products(&run, &dir, args.smoke)?;
    Ok((run, dir))
}

fn simulate(args: &SimulateArgs, out: &mut impl Write) -> CliResult<()> {
    let mut extra = Vec::new();
    if let Some(ap) = &args.ap {
        parse_floats("--ap", ap)?;
        extra.push(format!("perturbation={ap}"));
    }
    let (run, dir) = execute(&args.run, &extra, None, RunOptions { auto_t0: args.auto_t0 })?;
    let _ = writeln!(out, "{}: {} trajectories in {:.2} s -> {}", run.spec.name, run.variants.iter().map(|v| v.runs.len()).sum::<usize>(), run.wall_time, dir.display());
    for v in &run.variants {
        if let Some(t0) = v.auto_t0 {
            let _ = writeln!(out, "  {}: first central peak at t0 = {t0:.4}", v.variant.label);
        }
    }
    Ok(())
}

fn compare_al(args: &RunArgs, out: &mut impl Write) -> CliResult<()> {
    let source = scenario_source(args, Some("fig12"))?;
    let mut overrides = Vec::new();
    let spec = load_scenario(&source, &args.set)?;
    if !spec.wants(Product::Proximity) {
        let mut outputs: Vec<&str> = spec.outputs.iter().map(|p| p.key()).collect();
        outputs.push(Product::Proximity.key());
        overrides.push(format!("outputs={}", outputs.join(",")));
    }
    overrides.push("systems=dnls,al".into());
    let (run, dir) = execute(args, &overrides, Some("fig12"), RunOptions::default())?;
    for v in &run.variants {
        let p = v.proximity.as_ref().expect("proximity requested");
        let max = p.d_a.iter().cloned().fold(0.0, f64::max);
        let bound_i = match &p.bound_i {
            Some(_) => format!("{} violation(s)", p.estimate_i_violations().len()),
            None => "not applicable (P_a > A*^2)".into(),
        };
        let _ = writeln!(
            out,
            "{}: max D_a = {}, estimate II: {} violation(s), estimate I: {bound_i}",
            v.variant.label,
            fmt_float(max),
            p.estimate_ii_violations().len()
        );
    }
    let _ = writeln!(out, "written to {}", dir.display());
    Ok(())
}

fn attractor_check(args: &RunArgs, out: &mut impl Write) -> CliResult<()> {
    let source = scenario_source(args, Some("fig5"))?;
    let spec = load_scenario(&source, &args.set)?;
    let mut extra = Vec::new();
    if !spec.wants(Product::Attractor) {
        let mut outputs: Vec<&str> = spec.outputs.iter().map(|p| p.key()).collect();
        outputs.push(Product::Attractor.key());
        extra.push(format!("outputs={}", outputs.join(",")));
    }
    let (run, _) = execute(args, &extra, Some("fig5"), RunOptions::default())?;
    for v in &run.variants {
        for r in &v.runs {
            let a = r.attractor.expect("attractor requested");
            let _ = writeln!(
                out,
                "{} {}: converged = {}, final mode = {}, stable band = {}, |P_a - A*^2| = {:.3e}",
                v.variant.label,
                r.system.name(),
                a.converged,
                a.final_mode,
                a.in_stable_band,
                a.power_error
            );
        }
    }
    Ok(())
}

/// Compresses sorted integers into `a..=b` runs.
pub fn ranges(values: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[j] + 1 {
            j += 1;
        }
        parts.push(if i == j { values[i].to_string() } else { format!("{}..={}", values[i], values[j]) });
        i = j + 1;
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(", ")
    }
}

fn mi_scan_cmd(args: &MiScanArgs, out: &mut impl Write) -> CliResult<()> {
    let cfg = LatticeConfig::new(args.half_length, args.nodes, args.gamma, args.delta, Boundary::Periodic)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let a_star = critical_amplitude(args.gamma, args.delta).map_err(|e| CliError::Validation(e.to_string()))?;
    let carriers: Vec<i64> = match args.carrier {
        Some(k) => vec![k],
        None => (0..=(args.nodes / 2) as i64).collect(),
    };
    let mut csv = Csv::new(&["K", "M", "growth"]);
    let mut unstable = Vec::new();
    for k in carriers {
        let scan = mi_scan(k, &cfg, a_star, args.delta).map_err(|e| CliError::Validation(e.to_string()))?;
        for (&m, &g) in scan.modes.iter().zip(&scan.growth) {
            csv.row([scan.carrier_mode.into(), m.into(), g.into()]);
        }
        if !scan.unstable_band.is_empty() {
            unstable.push(scan.carrier_mode);
        }
        if args.carrier.is_some() {
            let _ = writeln!(out, "carrier K = {k}: unstable sidebands M in {}", ranges(&scan.unstable_band));
        }
    }
    let _ = writeln!(out, "A* = {a_star}");
    let _ = writeln!(out, "unstable carriers: {}", ranges(&unstable));
    let dir = output_dir(args.out.as_deref(), "mi_scan");
    write_csv(&dir, "mi_scan.csv", csv)?;
    let _ = writeln!(out, "written to {}", dir.join("mi_scan.csv").display());
    Ok(())
}

fn gate(args: &GateArgs, out: &mut impl Write) -> CliResult<()> {
    let a_star = critical_amplitude(args.gamma, args.delta).map_err(|e| CliError::Validation(e.to_string()))?;
    let _ = writeln!(out, "A* = {a_star}");
    if let Some(list) = &args.amplitude {
        for a in parse_floats("--amplitude", list)? {
            let ok = solvability_gate(a, args.gamma, args.delta, args.tol).map_err(|e| CliError::Validation(e.to_string()))?;
            let verdict = if ok { "solvable" } else { "not solvable on the infinite lattice" };
            let _ = writeln!(out, "A = {a}: {verdict}");
        }
    }
    Ok(())
}

fn list_scenarios(out: &mut impl Write) {
    for (name, about, _) in CATALOG {
        let _ = writeln!(out, "{name:<8} {about}");
    }
}

pub fn dispatch(cli: &Cli, out: &mut impl Write) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::MiScan(a) => mi_scan_cmd(a, out),
        Command::Gate(a) => gate(a, out),
        Command::CompareAl(a) => compare_al(a, out),
        Command::AttractorCheck(a) => attractor_check(a, out),
        Command::ListScenarios => {
            list_scenarios(out);
            Ok(())
        }
    }
}
