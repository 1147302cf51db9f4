use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use execrisk::export::{
    write_ensemble_csv, write_per_path_revenue, write_revenue_report, write_run_sidecar,
    write_verification_report, RunSidecar,
};
use execrisk::noise::NoisePlan;
use execrisk::numeric::{fmt_sig, mean, rms, sample_std};
use execrisk::objective::{estimate_revenue, RevenueReport};
use execrisk::scenario::{load_scenario, Scenario};
use execrisk::simulate::simulate_ensemble;
use execrisk::verify::run_verification;
use execrisk::{PathEnsemble, Policy, PolicyKind};
use std::path::PathBuf;
use std::process::ExitCode;

/// Optimal liquidation under execution risk: closed-form policies, path
/// simulation, revenue estimation, and numerical verification.
#[derive(Parser)]
#[command(name = "execrisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one policy and report path statistics.
    Simulate(SimulateArgs),
    /// Simulate every scenario policy on shared noise and tabulate them.
    Compare(RunArgs),
    /// Monte Carlo revenue report for one policy.
    Revenue(RevenueArgs),
    /// Verify the closed forms behind the scenario's parameter set.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (flat `key = value` format).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; overrides the scenario's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's `n_paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the scenario's `n_steps`.
    #[arg(long)]
    steps: Option<usize>,
    /// Override the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Policy to run; required when the scenario lists several.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Args)]
struct RevenueArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Policy to run; required when the scenario lists several.
    #[arg(long)]
    policy: Option<String>,
    /// Also write per-path revenue rows (needs an output directory).
    #[arg(long)]
    per_path: bool,
}

enum CliError {
    /// Scenario or flag problems: exit code 2.
    Config(String),
    /// A verification check failed: exit code 3.
    VerificationFailed,
    /// Everything else: exit code 1.
    Other(anyhow::Error),
}

fn other<E: std::error::Error + Send + Sync + 'static>(e: E) -> CliError {
    CliError::Other(anyhow::Error::new(e))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::VerificationFailed) => ExitCode::from(3),
        Err(CliError::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Revenue(args) => cmd_revenue(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}

struct Run {
    scenario: Scenario,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    out: Option<PathBuf>,
}

fn load(args: &RunArgs) -> Result<Run, CliError> {
    let scenario = load_scenario(&args.scenario)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.scenario.display())))?;
    Ok(Run {
        n_paths: args.paths.unwrap_or(scenario.n_paths),
        n_steps: args.steps.unwrap_or(scenario.n_steps),
        seed: args.seed.unwrap_or(scenario.seed),
        out: args.out.clone().or_else(|| scenario.out_dir.clone()),
        scenario,
    })
}

fn check_counts(run: &Run) -> Result<(), CliError> {
    if run.n_paths == 0 || run.n_steps == 0 {
        return Err(CliError::Config("paths and steps must be at least 1".into()));
    }
    Ok(())
}

fn choose_policy(run: &Run, flag: Option<&str>, cmd: &str) -> Result<PolicyKind, CliError> {
    let kind = match flag {
        Some(name) => PolicyKind::parse(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown policy `{name}`; valid names: {}",
                PolicyKind::ALL.map(PolicyKind::as_str).join(", ")
            ))
        })?,
        None => match run.scenario.policies.as_slice() {
            [kind] => *kind,
            list => {
                return Err(CliError::Config(format!(
                    "`{cmd}` runs one policy and the scenario lists {}; pick one with --policy",
                    list.len()
                )))
            }
        },
    };
    // Scenario parsing already pairs listed policies with the terminal
    // penalty; an override from --policy needs the same compatibility check.
    Policy::new(kind, &run.scenario.params).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(kind)
}

fn ensure_out_dir(dir: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .map_err(CliError::Other)
}

fn export_ensemble(ens: &PathEnsemble, dir: &PathBuf, suffix: &str) -> Result<(), CliError> {
    ensure_out_dir(dir)?;
    let csv = dir.join(format!("ensemble{suffix}.csv"));
    write_ensemble_csv(ens, &csv).map_err(other)?;
    println!("wrote {}", csv.display());
    let sidecar = dir.join(format!("run{suffix}.json"));
    write_run_sidecar(&RunSidecar::for_ensemble(ens), &sidecar).map_err(other)?;
    println!("wrote {}", sidecar.display());
    Ok(())
}

fn print_run_header(ens: &PathEnsemble) {
    println!("policy   = {}", ens.policy());
    println!("seed     = {}", ens.seed());
    println!("n_paths  = {}", ens.n_paths());
    println!("n_steps  = {}", ens.n_steps());
    println!("dt       = {}", fmt_sig(ens.dt()));
}

fn terminal_stats(ens: &PathEnsemble) -> (f64, f64, f64) {
    let term: Vec<f64> = ens.terminal_holdings().collect();
    (mean(&term), sample_std(&term), rms(&term))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let run = load(&args.run)?;
    check_counts(&run)?;
    let kind = choose_policy(&run, args.policy.as_deref(), "simulate")?;
    let plan = NoisePlan::new(run.seed, run.n_paths, run.n_steps, &run.scenario.params);
    let ens = simulate_ensemble(&run.scenario.params, kind, &plan).map_err(other)?;
    print_run_header(&ens);
    let (m, s, r) = terminal_stats(&ens);
    println!("terminal_holdings_mean = {}", fmt_sig(m));
    println!("terminal_holdings_std  = {}", fmt_sig(s));
    println!("terminal_holdings_rms  = {}", fmt_sig(r));
    if ens.params().terminal_penalty.is_infinite() {
        println!("note: hard-liquidation limit; revenue reports do not apply");
    }
    if let Some(dir) = &run.out {
        export_ensemble(&ens, dir, "")?;
    }
    Ok(())
}

fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let run = load(args)?;
    check_counts(&run)?;
    if run.scenario.policies.len() < 2 {
        return Err(CliError::Config(format!(
            "`compare` needs at least two policies in the scenario; got {}",
            run.scenario.policies.len()
        )));
    }
    let params = &run.scenario.params;
    let plan = NoisePlan::new(run.seed, run.n_paths, run.n_steps, params);
    let finite = !params.terminal_penalty.is_infinite();
    println!(
        "seed = {}, n_paths = {}, n_steps = {}, dt = {} (shared noise across policies)",
        run.seed,
        run.n_paths,
        run.n_steps,
        fmt_sig(params.horizon / run.n_steps as f64)
    );
    if finite {
        println!(
            "{:<22} {:>19} {:>19} {:>19} {:>19} {:>19}",
            "policy", "terminal_mean", "terminal_rms", "raw_mean", "raw_se", "rewritten_mean"
        );
    } else {
        println!(
            "{:<22} {:>19} {:>19} {:>19}",
            "policy", "terminal_mean", "terminal_rms", "terminal_std"
        );
    }
    for &kind in &run.scenario.policies {
        // One ensemble lives at a time; each is dropped before the next.
        let ens = simulate_ensemble(params, kind, &plan).map_err(other)?;
        let (m, s, r) = terminal_stats(&ens);
        if finite {
            let rep = estimate_revenue(&ens).map_err(other)?;
            println!(
                "{:<22} {:>19} {:>19} {:>19} {:>19} {:>19}",
                kind.as_str(),
                fmt_sig(m),
                fmt_sig(r),
                fmt_sig(rep.raw_mean),
                fmt_sig(rep.raw_se),
                fmt_sig(rep.rewritten_mean)
            );
        } else {
            println!(
                "{:<22} {:>19} {:>19} {:>19}",
                kind.as_str(),
                fmt_sig(m),
                fmt_sig(r),
                fmt_sig(s)
            );
        }
        if let Some(dir) = &run.out {
            export_ensemble(&ens, dir, &format!("_{}", kind.as_str()))?;
        }
    }
    Ok(())
}

fn print_revenue(rep: &RevenueReport) {
    println!("policy         = {}", rep.policy);
    println!("seed           = {}", rep.seed);
    println!("n_paths        = {}", rep.n_paths);
    println!("n_steps        = {}", rep.n_steps);
    println!("dt             = {}", fmt_sig(rep.dt));
    println!("raw_mean       = {}", fmt_sig(rep.raw_mean));
    println!("raw_se         = {}", fmt_sig(rep.raw_se));
    println!("rewritten_mean = {}", fmt_sig(rep.rewritten_mean));
    println!("rewritten_se   = {}", fmt_sig(rep.rewritten_se));
    println!("gap            = {}", fmt_sig(rep.gap));
    println!("combined_se    = {}", fmt_sig(rep.combined_se));
    println!("components (mean, se):");
    for (name, c) in [
        ("terminal_penalty", rep.terminal_penalty),
        ("permanent", rep.permanent),
        ("drift", rep.drift),
        ("risk_interaction", rep.risk_interaction),
        ("temporary", rep.temporary),
    ] {
        println!("  {:<18} {} {}", name, fmt_sig(c.mean), fmt_sig(c.se));
    }
}

fn cmd_revenue(args: &RevenueArgs) -> Result<(), CliError> {
    let run = load(&args.run)?;
    check_counts(&run)?;
    let kind = choose_policy(&run, args.policy.as_deref(), "revenue")?;
    if run.scenario.params.terminal_penalty.is_infinite() {
        return Err(CliError::Config(
            "revenue reports need a finite terminal penalty; the hard-liquidation limit has no \
             lambda y(T)^2 term (use `simulate` for terminal statistics)"
                .into(),
        ));
    }
    if args.per_path && run.out.is_none() {
        return Err(CliError::Config(
            "--per-path needs an output directory (--out or the scenario's out_dir)".into(),
        ));
    }
    let plan = NoisePlan::new(run.seed, run.n_paths, run.n_steps, &run.scenario.params);
    let ens = simulate_ensemble(&run.scenario.params, kind, &plan).map_err(other)?;
    let rep = estimate_revenue(&ens).map_err(other)?;
    print_revenue(&rep);
    if let Some(dir) = &run.out {
        ensure_out_dir(dir)?;
        let report_path = dir.join("revenue_report.json");
        write_revenue_report(&rep, &report_path).map_err(other)?;
        println!("wrote {}", report_path.display());
        if args.per_path {
            let rows_path = dir.join("revenue_paths.csv");
            write_per_path_revenue(&ens, &rows_path).map_err(other)?;
            println!("wrote {}", rows_path.display());
        }
    }
    Ok(())
}

fn cmd_verify(args: &RunArgs) -> Result<(), CliError> {
    let run = load(args)?;
    check_counts(&run)?;
    if run.scenario.params.terminal_penalty.is_infinite()
        && (run.n_steps < 2 || run.n_steps % 2 != 0)
    {
        return Err(CliError::Config(
            "hard-liquidation verification halves the step count; give an even n_steps >= 2"
                .into(),
        ));
    }
    let report = run_verification(&run.scenario.params, run.seed, run.n_paths, run.n_steps);
    print!("{}", report.render_table());
    if let Some(dir) = &run.out {
        ensure_out_dir(dir)?;
        let path = dir.join("verification.json");
        write_verification_report(&report, &path).map_err(other)?;
        println!("wrote {}", path.display());
    }
    if report.all_passed() {
        println!("verification passed");
        Ok(())
    } else {
        println!("verification FAILED");
        Err(CliError::VerificationFailed)
    }
}
