use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use kepler::frontend::{
    format_model, gen_bench, oracle_script, parse, solve_script, Answer, Backend, FrontendError, Model, OracleResult,
    Script, SolveConfig,
};

#[derive(Parser)]
#[command(name = "kepler", version, about = "Word equations with regular and length constraints")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Internal,
    ExportOnly,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide an SMT-LIB script.
    Solve {
        file: PathBuf,
        /// Depth limit of the reduction tree.
        #[arg(long, default_value_t = 512)]
        max_depth: usize,
        /// Largest unrolling bound for regular constraints.
        #[arg(long, default_value_t = 5040)]
        max_unroll: usize,
        /// Wall-clock limit in seconds.
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        #[arg(long, value_name = "P.dot")]
        dump_tree: Option<PathBuf>,
        #[arg(long, value_name = "P.txt")]
        dump_cfg: Option<PathBuf>,
        #[arg(long, value_name = "P.txt")]
        dump_chc: Option<PathBuf>,
        #[arg(long, value_name = "P.smt2")]
        dump_lia: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "internal")]
        backend: BackendArg,
        /// Print a model after `sat`.
        #[arg(long)]
        model: bool,
    },
    /// Write a quadratic benchmark family.
    GenBench {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        phases: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Bounded brute-force check.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
}

fn read_script(path: &Path) -> Result<Script, FrontendError> {
    let src = fs::read_to_string(path)?;
    parse(&src)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn run(cli: Cli) -> Result<ExitCode, FrontendError> {
    match cli.cmd {
        Cmd::Solve { file, max_depth, max_unroll, timeout, dump_tree, dump_cfg, dump_chc, dump_lia, backend, model } => {
            let script = read_script(&file)?;
            let mut cfg = SolveConfig::default();
            cfg.budget.max_depth = max_depth;
            cfg.budget.wall_time = Duration::from_secs_f64(timeout.max(0.0));
            cfg.widen.cap = max_unroll;
            cfg.backend = match backend {
                BackendArg::Internal => Backend::Internal,
                BackendArg::ExportOnly => Backend::ExportOnly,
            };
            cfg.dumps.tree = dump_tree.is_some();
            cfg.dumps.cfg = dump_cfg.is_some();
            cfg.dumps.chc = dump_chc.is_some();
            cfg.dumps.lia = dump_lia.is_some();
            let out = solve_script(&script, &cfg)?;
            let dumps = [
                (dump_tree, out.dump(|d| d.tree.as_ref(), "//")),
                (dump_cfg, out.dump(|d| d.cfg.as_ref(), "--")),
                (dump_chc, out.dump(|d| d.chc.as_ref(), ";")),
                (dump_lia, out.dump(|d| d.lia.as_ref(), ";")),
            ];
            for (path, text) in dumps {
                if let Some(p) = path {
                    fs::write(p, text.unwrap_or_default())?;
                }
            }
            let mut text = format!("{}\n", out.answer.label());
            let code = match &out.answer {
                Answer::Sat(m) => {
                    if model {
                        text.push_str(&format_model(&script, m, &script.vocab));
                    }
                    0
                }
                Answer::Unsat => 1,
                Answer::Unknown(reason) => {
                    text.push_str(&format!("; reason {reason}\n"));
                    2
                }
            };
            emit(&text);
            Ok(ExitCode::from(code))
        }
        Cmd::GenBench { out, phases, count } => {
            let files = gen_bench(&out, phases, count)?;
            emit(&files.iter().map(|f| format!("{}\n", f.display())).collect::<String>());
            Ok(ExitCode::from(0))
        }
        Cmd::Oracle { file, max_len } => {
            let script = read_script(&file)?;
            match oracle_script(&script, max_len, &Default::default())? {
                OracleResult::Sat(strings, ints) => {
                    emit(&format!("sat\n{}", format_model(&script, &Model { strings, ints }, &script.vocab)));
                    Ok(ExitCode::from(0))
                }
                OracleResult::UnsatWithinBound => {
                    emit("unsat-within-bound\n");
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    // usage errors share the error exit code instead of clap's 2
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
