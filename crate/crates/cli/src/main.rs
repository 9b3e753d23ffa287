use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgsim::acceptance::{run_acceptance, AcceptanceOptions, Profile};
use sgsim::scenario::{self, exit_code, RunSummary, ScenarioConfig};
use sgsim::SimError;

/// Stern-Gerlach deflection of an electron under four models.
#[derive(Parser, Debug)]
#[command(name = "sgsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured models for one spin preparation.
    Simulate(ScenarioArgs),
    /// Sweep the spin polar angle and classify the detector patterns.
    Sweep(ScenarioArgs),
    /// Reproduce the uniqueness/discreteness table.
    Table1(ScenarioArgs),
    /// Sample the magnet's B and A onto the grid and write them out.
    DumpField(ScenarioArgs),
    /// Run the acceptance criteria.
    Acceptance(AcceptanceArgs),
}

#[derive(Args, Debug, Default)]
struct ScenarioArgs {
    /// Scenario file (TOML). Falls back to $SGSIM_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model to run; repeat for several.
    #[arg(long = "model")]
    models: Vec<String>,
    #[arg(long)]
    spin_theta: Option<f64>,
    #[arg(long)]
    spin_phi: Option<f64>,
    /// x, y, z (optionally negated) or "[x, y, z]".
    #[arg(long)]
    spin_axis: Option<String>,
    /// Kick μηΔt in units of ħ/d.
    #[arg(long)]
    kick: Option<f64>,
    #[arg(long)]
    flight_time: Option<f64>,
    #[arg(long)]
    t_sep: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    check_force: bool,
    #[arg(long)]
    include_sigma_x: bool,
    /// Use the 1/c-weighted dipole force for the point particle.
    #[arg(long)]
    no_consistency_c_fix: bool,
    /// Polar angles for `sweep`, comma separated; empty for none.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    thetas: Option<Vec<f64>>,
    /// Any other key, as dotted.key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the JSON summary to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Fast,
    Full,
}

#[derive(Args, Debug)]
struct AcceptanceArgs {
    #[arg(long, value_enum, default_value = "fast")]
    profile: ProfileArg,
    /// Directory for the JSON report and the table artifact.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Test hook: run this criterion with zero tolerance.
    #[arg(long, hide = true)]
    break_tolerance: Option<u32>,
}

fn overrides(a: &ScenarioArgs) -> Result<Vec<(String, toml::Value)>, SimError> {
    use toml::Value;
    let mut out: Vec<(String, Value)> = Vec::new();
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        let mut t = toml::Table::new();
        scenario::set_override(&mut t, "v", v)?;
        out.push((
            k.trim().to_string(),
            t.remove("v").unwrap_or(Value::String(v.into())),
        ));
    }
    if !a.models.is_empty() {
        out.push((
            "models".into(),
            Value::Array(a.models.iter().map(|m| Value::String(m.clone())).collect()),
        ));
    }
    let floats = [
        ("spin.theta", a.spin_theta),
        ("spin.phi", a.spin_phi),
        ("params.kick", a.kick),
        ("flight_time", a.flight_time),
        ("t_sep", a.t_sep),
    ];
    out.extend(
        floats
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), Value::Float(v)))),
    );
    if let Some(axis) = &a.spin_axis {
        let mut t = toml::Table::new();
        scenario::set_override(&mut t, "v", axis)?;
        out.push((
            "spin.axis".into(),
            t.remove("v").unwrap_or(Value::String(axis.clone())),
        ));
    }
    if let Some(dir) = &a.output_dir {
        out.push((
            "output_dir".into(),
            Value::String(dir.display().to_string()),
        ));
    }
    for (k, on) in [
        ("check_force", a.check_force),
        ("include_sigma_x", a.include_sigma_x),
    ] {
        if on {
            out.push((k.into(), Value::Boolean(true)));
        }
    }
    if a.no_consistency_c_fix {
        out.push(("consistency_c_fix".into(), Value::Boolean(false)));
    }
    if let Some(th) = &a.thetas {
        out.push((
            "sweep.thetas".into(),
            Value::Array(th.iter().map(|&v| Value::Float(v)).collect()),
        ));
    }
    Ok(out)
}

fn load(a: &ScenarioArgs) -> Result<ScenarioConfig, SimError> {
    let path = a
        .config
        .clone()
        .or_else(|| std::env::var_os("SGSIM_CONFIG").map(PathBuf::from));
    let text = match &path {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| SimError::Config(format!("{}: {e}", p.display())))?
        }
        None => String::new(),
    };
    ScenarioConfig::load(&text, std::env::vars(), &overrides(a)?).map_err(|e| match (&path, e) {
        (Some(p), SimError::Config(m)) => SimError::Config(format!("{}: {m}", p.display())),
        (_, e) => e,
    })
}

fn report(sum: &RunSummary, json: bool) -> Result<bool, SimError> {
    if json {
        println!("{}", sum.to_json()?);
    } else {
        for (k, v) in &sum.results {
            println!("{k} = {v:.10e}");
        }
        for c in &sum.comparisons {
            println!("{}", c.line());
        }
        for r in &sum.records {
            let arr: Vec<String> = r
                .arrivals
                .iter()
                .map(|a| format!("z={:.4} w={:.4}", a.z, a.weight))
                .collect();
            println!(
                "{} theta={:.4}: {}",
                r.model.name(),
                r.spin_prep.0,
                arr.join(", ")
            );
        }
        if let Some(t) = &sum.table {
            print!("{t}");
        }
    }
    Ok(sum.all_pass())
}

fn run(cli: Cli) -> Result<bool, SimError> {
    match cli.command {
        Command::Simulate(a) => report(&scenario::simulate(&load(&a)?)?, a.json),
        Command::Sweep(a) => report(&scenario::sweep(&load(&a)?)?, a.json),
        Command::Table1(a) => report(&scenario::table1(&load(&a)?)?, a.json),
        Command::DumpField(a) => report(&scenario::dump_field(&load(&a)?)?, a.json),
        Command::Acceptance(a) => {
            let profile = match a.profile {
                ProfileArg::Fast => Profile::Fast,
                ProfileArg::Full => Profile::Full,
            };
            if let Some(dir) = &a.output_dir {
                fs::create_dir_all(dir)
                    .map_err(|e| SimError::Config(format!("{}: {e}", dir.display())))?;
            }
            let rep = run_acceptance(
                profile,
                &AcceptanceOptions {
                    break_tolerance: a.break_tolerance,
                },
            );
            for r in &rep.results {
                println!("{}", r.line());
            }
            if let Some(t) = &rep.table1 {
                print!("{t}");
            }
            if let Some(dir) = &a.output_dir {
                fs::write(
                    dir.join("acceptance.json"),
                    serde_json::to_string_pretty(&rep)? + "\n",
                )?;
                if let Some(t) = &rep.table1 {
                    fs::write(dir.join("table1.txt"), t)?;
                }
            }
            let failing: Vec<String> = rep
                .failing()
                .iter()
                .map(|r| format!("{} ({})", r.id, r.name))
                .collect();
            if !failing.is_empty() {
                eprintln!("failing criteria: {}", failing.join(", "));
            }
            Ok(failing.is_empty())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
