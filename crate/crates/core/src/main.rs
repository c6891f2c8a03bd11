use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dyncc::cc_elevation::{make_serving_plan, BudgetPolicy};
use dyncc::dof_analytics::{optimize_eta_hat, verify_with, VerifyOptions};
use dyncc::experiment::config::{EtaChoice, Scenario, ScenarioConfig};
use dyncc::experiment::{dynamics, num, sweeps, OutputFormat, Table};
use dyncc::export::build_schedule;
use dyncc::{selftest, Error, Result};

/// Delivery schedules and DoF analytics for dynamic shared-cache networks.
#[derive(Parser)]
#[command(name = "dyncc", version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv | text
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the CC and UC transmissions for the scenario's eta_hat.
    Schedule,
    /// DoF report for one eta_hat.
    Dof,
    /// DoF over eta_hat = 0..=max eta_p.
    SweepEta,
    /// Best DoF against the uniform benchmark across length distributions.
    SweepSigma,
    /// Apply a churn trace interval by interval.
    Dynamics,
    /// Golden checks on the built-in examples.
    Selftest,
}

fn scenario(cli: &Cli) -> Result<Scenario> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this subcommand needs --config <path>".into()))?;
    ScenarioConfig::load(path)?.resolve(cli.seed)
}

fn eta_for(s: &Scenario) -> Result<usize> {
    match s.eta {
        EtaChoice::Fixed(e) => Ok(e),
        EtaChoice::Optimize | EtaChoice::Sweep => Ok(optimize_eta_hat(s.snapshot.lengths(), &s.params)?.best_eta_hat),
    }
}

fn run(cli: &Cli) -> Result<(String, Option<PathBuf>, bool)> {
    if let Command::Selftest = cli.command {
        let checks = selftest::run();
        let mut out = String::new();
        for c in &checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{mark} {}: {}\n", c.name, c.detail));
        }
        return Ok((out, cli.out.clone(), checks.iter().all(|c| c.passed)));
    }

    let s = scenario(cli)?;
    let out_path = cli.out.clone().or_else(|| s.output.clone());
    let text = match cli.command {
        Command::Schedule => {
            let plan = make_serving_plan(&s.snapshot, eta_for(&s)?, s.exclusion);
            let schedule = build_schedule(&plan, &s.params, BudgetPolicy::Enforce)?;
            match cli.format.unwrap_or(OutputFormat::Text) {
                OutputFormat::Text => schedule.to_text(),
                OutputFormat::Csv => schedule.to_table().to_csv()?,
            }
        }
        Command::Dof => {
            let opts = VerifyOptions {
                exclusion: s.exclusion,
                ..Default::default()
            };
            let r = verify_with(&s.snapshot, eta_for(&s)?, &s.params, &opts)?;
            match cli.format.unwrap_or(OutputFormat::Text) {
                OutputFormat::Text => r.render(),
                OutputFormat::Csv => {
                    let c = r.counts;
                    let mut t = Table::new(vec![
                        "eta_hat",
                        "K_M",
                        "K_U",
                        "J_M",
                        "T_M",
                        "J_U",
                        "T_U",
                        "dof",
                        "dof_exact",
                        "verified",
                    ]);
                    t.rows.push(vec![
                        r.eta_hat.to_string(),
                        c.k_m.to_string(),
                        c.k_u.to_string(),
                        c.j_m.to_string(),
                        c.t_m.to_string(),
                        c.j_u.to_string(),
                        c.t_u.to_string(),
                        num(&r.dof()),
                        r.dof().to_string(),
                        r.verification.is_verified().to_string(),
                    ]);
                    t.to_csv()?
                }
            }
        }
        Command::SweepEta => sweeps::sweep_eta(&s)?.render(cli.format.unwrap_or_default())?,
        Command::SweepSigma => sweeps::sweep_sigma(&s)?.render(cli.format.unwrap_or_default())?,
        Command::Dynamics => dynamics::dynamics_table(&s)?.render(cli.format.unwrap_or_default())?,
        Command::Selftest => unreachable!(),
    };
    Ok((text, out_path, true))
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!(
                "dyncc: {}",
                msg.lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: ")
            );
            return ExitCode::from(2);
        }
    };
    let result = run(&cli).and_then(|(text, path, ok)| emit(&text, path.as_ref()).map(|_| ok));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("dyncc: selftest failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("dyncc: {e}");
            ExitCode::FAILURE
        }
    }
}
