//! `bregvar`: experiment runner for the bregvar library.
//!
//! Exit status: 0 all checks pass, 1 a check failed, 2 usage or input
//! error, 3 numerical or resolution error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bregvar::Execution;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use args::*;
use commands::{Context, Failure, Outcome, Output, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "bregvar", version, about = "Bregman variation experiments")]
struct Cli {
    /// Worker threads for the data-parallel loops.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Print the report as JSON (17 significant digits).
    #[arg(long, global = true)]
    json: bool,
    /// Also write a run manifest (config echo, version, wall time, verdicts).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Young(YoungArgs),
    Orlicz(OrliczArgs),
    Simulate(SimulateArgs),
    Variation(VariationArgs),
    Isometry(IsometryArgs),
    Doob(DoobArgs),
    SumIndep(SumIndepArgs),
    Semigroup(SemigroupArgs),
    HardyStein(HardySteinArgs),
    Suite(SuiteArgs),
    /// Runs a TOML config; `key=value` words override its keys.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML file with a `command` key and the subcommand's keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `[COMMAND [MODE]] [key=value | --flag]...`
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    words: Vec<String>,
}

const COMMANDS: [&str; 10] = [
    "young",
    "orlicz",
    "simulate",
    "variation",
    "isometry",
    "doob",
    "sum-indep",
    "semigroup",
    "hardy-stein",
    "suite",
];

#[derive(Debug, Serialize)]
struct CheckVerdict {
    name: String,
    verdict: &'static str,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: String,
    config: Value,
    wall_seconds: f64,
    checks: Vec<CheckVerdict>,
    passed: bool,
    result: Value,
}

/// A parsed command with its seed resolved.
#[derive(Debug)]
struct Job {
    command: Command,
    json: bool,
    manifest: Option<PathBuf>,
    workers: Option<usize>,
    sequential: bool,
    /// `run` prints the manifest in place of the report.
    print_manifest: bool,
}

fn seeded(seed: &mut Option<u64>) -> Outcome<u64> {
    let s = commands::resolve_seed(*seed)?;
    *seed = Some(s);
    Ok(s)
}

/// Executes `command`; returns the subcommand name, the config echo and
/// the output.
fn dispatch(command: Command, ctx: Context) -> Outcome<(String, Value, Output)> {
    fn echo<T: Serialize>(a: &T) -> Value {
        serde_json::to_value(a).expect("serializable config")
    }
    Ok(match command {
        Command::Young(a) => ("young".into(), echo(&a), commands::young(&a)?),
        Command::Orlicz(a) => ("orlicz".into(), echo(&a), commands::orlicz(&a)?),
        Command::Simulate(mut a) => {
            let s = seeded(&mut a.seed)?;
            ("simulate".into(), echo(&a), commands::simulate_cmd(&a, s)?)
        }
        Command::Variation(a) => ("variation".into(), echo(&a), commands::variation(&a)?),
        Command::Isometry(mut a) => {
            let s = seeded(&mut a.seed)?;
            ("isometry".into(), echo(&a), commands::isometry(&a, s, ctx)?)
        }
        Command::Doob(mut a) => {
            let s = seeded(&mut a.seed)?;
            ("doob".into(), echo(&a), commands::doob(&a, s, ctx)?)
        }
        Command::SumIndep(mut a) => {
            let s = seeded(&mut a.seed)?;
            ("sum-indep".into(), echo(&a), commands::sum_indep(&a, s, ctx)?)
        }
        Command::Semigroup(a) => ("semigroup".into(), echo(&a), commands::semigroup(&a)?),
        Command::HardyStein(mut a) => {
            let s = seeded(&mut a.seed)?;
            ("hardy-stein".into(), echo(&a), commands::hardy_stein(&a, s, ctx)?)
        }
        Command::Suite(mut a) => {
            let s = seeded(&mut a.seed)?;
            a.level = a.effective_level();
            ("suite".into(), echo(&a), commands::suite(&a, s, ctx)?)
        }
        Command::Run(_) => unreachable!("run is expanded before dispatch"),
    })
}

/// Parses an override value as a TOML value, falling back to a string.
fn override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn from_table<T: serde::de::DeserializeOwned>(command: &str, table: toml::Table) -> Outcome<T> {
    let v = serde_json::to_value(table).expect("toml tables convert to json");
    serde_json::from_value(v).map_err(|e| Failure::Usage(format!("config for `{command}`: {e}")))
}

/// Builds a job from a config file plus override words.
fn expand_run(r: RunArgs) -> Outcome<Job> {
    let mut table = match &r.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    let mut bare = Vec::new();
    for word in &r.words {
        let (dashed, w) = match word.strip_prefix("--") {
            Some(rest) => (true, rest),
            None => (false, word.as_str()),
        };
        match w.split_once('=') {
            Some((k, v)) => {
                table.insert(k.to_string(), override_value(v));
            }
            None if dashed => {
                table.insert(w.to_string(), toml::Value::Boolean(true));
            }
            None => bare.push(w.to_string()),
        }
    }
    let mut bare = bare.into_iter();
    if let Some(c) = bare.next() {
        table.insert("command".into(), toml::Value::String(c));
    }
    if let Some(m) = bare.next() {
        table.insert("mode".into(), toml::Value::String(m));
    }
    if let Some(extra) = bare.next() {
        return Err(Failure::Usage(format!("unexpected word `{extra}`")));
    }
    let command = match table.remove("command") {
        Some(toml::Value::String(c)) => c,
        Some(other) => {
            return Err(Failure::Usage(format!("`command` must be a string, got {other}")))
        }
        None => {
            return Err(Failure::Usage(format!(
                "missing required key `command` (one of: {})",
                COMMANDS.join(", ")
            )))
        }
    };
    let flag = |table: &mut toml::Table, key: &str| -> Outcome<bool> {
        match table.remove(key) {
            None => Ok(false),
            Some(toml::Value::Boolean(b)) => Ok(b),
            Some(other) => Err(Failure::Usage(format!("`{key}` must be a boolean, got {other}"))),
        }
    };
    let json = flag(&mut table, "json")?;
    let sequential = flag(&mut table, "sequential")?;
    let manifest = match table.remove("manifest") {
        None => None,
        Some(toml::Value::String(p)) => Some(PathBuf::from(p)),
        Some(other) => return Err(Failure::Usage(format!("`manifest` must be a path, got {other}"))),
    };
    let workers = match table.remove("workers") {
        None => None,
        Some(toml::Value::Integer(n)) if n > 0 => Some(n as usize),
        Some(other) => {
            return Err(Failure::Usage(format!("`workers` must be a positive integer, got {other}")))
        }
    };
    let c = command.as_str();
    let parsed = match c {
        "young" => Command::Young(from_table(c, table)?),
        "orlicz" => Command::Orlicz(from_table(c, table)?),
        "simulate" => Command::Simulate(from_table(c, table)?),
        "variation" => Command::Variation(from_table(c, table)?),
        "isometry" => Command::Isometry(from_table(c, table)?),
        "doob" => Command::Doob(from_table(c, table)?),
        "sum-indep" => Command::SumIndep(from_table(c, table)?),
        "semigroup" => Command::Semigroup(from_table(c, table)?),
        "hardy-stein" => Command::HardyStein(from_table(c, table)?),
        "suite" => Command::Suite(from_table(c, table)?),
        other => {
            return Err(Failure::Usage(format!(
                "unknown command `{other}` (one of: {})",
                COMMANDS.join(", ")
            )))
        }
    };
    Ok(Job {
        command: parsed,
        json,
        manifest,
        workers,
        sequential,
        print_manifest: true,
    })
}

fn execute(job: Job) -> Outcome<bool> {
    if let Some(n) = job.workers {
        if n == 0 {
            return Err(Failure::Usage("`workers` must be positive".into()));
        }
        bregvar::exec::init_workers(n);
    }
    let ctx = Context {
        exec: if job.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    let start = Instant::now();
    let (command, config, out) = dispatch(job.command, ctx)?;
    let passed = out.checks.iter().all(|c| c.1);
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: "bregvar",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        wall_seconds: start.elapsed().as_secs_f64(),
        checks: out
            .checks
            .iter()
            .map(|(name, ok)| CheckVerdict {
                name: name.clone(),
                verdict: if *ok { "pass" } else { "fail" },
            })
            .collect(),
        passed,
        result: out.report.clone(),
    };
    if let Some(path) = &job.manifest {
        std::fs::write(path, output::to_json(&manifest) + "\n")
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if job.print_manifest {
        if job.json {
            println!("{}", output::to_json(&manifest));
        } else {
            print!("{}", output::table(&manifest));
        }
    } else if job.json {
        println!("{}", output::to_json(&out.report));
    } else if let Some(text) = &out.text {
        print!("{text}");
    } else {
        print!("{}", output::table(&out.report));
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let job = match cli.command {
        Command::Run(r) => expand_run(r).map(|mut j| {
            j.json |= cli.json;
            j.sequential |= cli.sequential;
            j.workers = j.workers.or(cli.workers);
            j.manifest = j.manifest.or(cli.manifest);
            j
        }),
        command => Ok(Job {
            command,
            json: cli.json,
            manifest: cli.manifest,
            workers: cli.workers,
            sequential: cli.sequential,
            print_manifest: false,
        }),
    };
    match job.and_then(execute) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("bregvar: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
