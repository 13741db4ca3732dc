use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use ebbflow::checkers::{all_checkers, attribution, Verdict};
use ebbflow::runner::{attack_scenario, recheck, run_and_check, select_checkers, RunError};
use ebbflow::scenario::Scenario;
use ebbflow::trace::{RunIndex, Trace};
use ebbflow::validator::Mode;

/// Simulate ebb-and-flow consensus scenarios and check their traces.
///
/// Log verbosity is read from EBBFLOW_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "ebbflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and check the resulting trace.
    Run {
        scenario: PathBuf,
        /// Write the JSON-lines trace here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated checker names, or `all`.
        #[arg(long, default_value = "all")]
        check: String,
    },
    /// Re-run every checker on a recorded trace.
    Check { trace: PathBuf },
    /// Run a canned attack scenario.
    Attack {
        name: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        colluders: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Io(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EBBFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn config(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

fn execute(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Run { scenario, out, seed, check } => {
            let mut s = Scenario::load(&scenario).map_err(config)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let selected = select_checkers(&check).map_err(config)?;
            run_scenario(&s, &selected, out)
        }
        Command::Check { trace } => {
            let file = File::open(&trace).map_err(|e| config(format!("{}: {e}", trace.display())))?;
            let t = Trace::read_jsonl(BufReader::new(file)).map_err(|e| config(format!("{}: {e}", trace.display())))?;
            let stored = t.verdicts().into_iter().cloned().collect::<Vec<_>>();
            let fresh = recheck(&t, &all_checkers());
            for v in &fresh {
                let same = stored.iter().find(|s| s.checker == v.checker && s.run == v.run);
                if same.is_some_and(|s| s.pass != v.pass) {
                    eprintln!("note: stored verdict for {} differs from the recomputed one", v.checker);
                }
            }
            Ok(report(&fresh))
        }
        Command::Attack { name, n, colluders, out } => {
            let s = attack_scenario(&name, n, colluders).map_err(|e| match e {
                RunError::Scenario(e) => config(e),
                other => config(other),
            })?;
            let trace = run_and_check(&s, &all_checkers()).map_err(config)?;
            write_trace(&trace, out)?;
            for mode in trace.runs() {
                let run = RunIndex::build(&trace, mode);
                match attribution(&run) {
                    Some((a, b, named)) => {
                        let list: Vec<String> = named.iter().map(|v| v.to_string()).collect();
                        println!("conflicting finality between {a} and {b}; implicated: {}", list.join(" "));
                    }
                    None if mode == Mode::B => println!("no conflicting finalization"),
                    None => {}
                }
            }
            Ok(report(&trace.verdicts().into_iter().cloned().collect::<Vec<_>>()))
        }
    }
}

fn run_scenario(s: &Scenario, selected: &[&str], out: Option<PathBuf>) -> Result<bool, Failure> {
    let trace = run_and_check(s, selected).map_err(config)?;
    write_trace(&trace, out)?;
    Ok(report(&trace.verdicts().into_iter().cloned().collect::<Vec<_>>()))
}

fn write_trace(trace: &Trace, out: Option<PathBuf>) -> Result<(), Failure> {
    let Some(path) = out else {
        return Ok(());
    };
    let file = File::create(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    trace.write_jsonl(BufWriter::new(file)).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    info!("trace written to {}", path.display());
    Ok(())
}

fn report(verdicts: &[Verdict]) -> bool {
    for v in verdicts {
        let status = match (v.pass, v.expected_fail) {
            (true, _) => "PASS",
            (false, true) => "XFAIL",
            (false, false) => "FAIL",
        };
        let run = v.run.map(|m| format!("[{m:?}]")).unwrap_or_else(|| "[A/B]".into());
        println!("{status:5} {:<17} {run:5} {}", v.checker, v.detail);
    }
    verdicts.iter().all(Verdict::ok)
}
