use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use effsyn::lang::Precision;
use effsyn::search::Mode;
use effsyn_cli::{bench, check_program, config, eval_program, read_goal, read_program, synth, write_csv};

#[derive(Parser)]
#[command(name = "effsyn", version, about = "Type- and effect-guided program synthesis")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Largest candidate size tried
    #[arg(long, default_value_t = 64)]
    max_size: usize,
    /// Maximum number of candidate evaluations
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    /// Wall-clock limit in seconds
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the goal in FILE and print the program
    Synth {
        file: PathBuf,
        #[arg(long, default_value = "full")]
        mode: Mode,
        #[arg(long, default_value = "precise")]
        precision: Precision,
        #[command(flatten)]
        search: SearchArgs,
        /// Write a JSON run report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a program against the specs in FILE
    Eval {
        file: PathBuf,
        #[arg(long)]
        program: PathBuf,
    },
    /// Typecheck a program against the goal signature in FILE
    Check {
        file: PathBuf,
        #[arg(long)]
        program: PathBuf,
    },
    /// Synthesize every goal file in DIR under each configuration; CSV on stdout
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "full")]
        modes: Vec<Mode>,
        #[arg(long, value_delimiter = ',', default_value = "precise")]
        precisions: Vec<Precision>,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Synth {
            file,
            mode,
            precision,
            search,
            report,
        } => {
            let resolved = read_goal(&file)?;
            let cfg = config(mode, precision, search.max_size, search.budget, search.timeout);
            let out = synth(&resolved, &cfg);
            if let Some(path) = report {
                std::fs::write(&path, serde_json::to_string_pretty(&out.report)? + "\n")?;
            }
            match out.program {
                Ok(p) => {
                    println!("{p}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("synthesis failed: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Eval { file, program } => {
            let resolved = read_goal(&file)?;
            let program = read_program(&program)?;
            let results = eval_program(&resolved, &program)?;
            for r in &results {
                let status = if r.ok { "pass" } else { "FAIL" };
                print!("{status} \"{}\" ({}/{} asserts)", r.title, r.passed_asserts, r.total_asserts);
                match &r.detail {
                    Some(d) => println!(": {d}"),
                    None => println!(),
                }
            }
            Ok(if results.iter().all(|r| r.ok) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Check { file, program } => {
            let resolved = read_goal(&file)?;
            let program = read_program(&program)?;
            match check_program(&resolved, &program) {
                Ok(t) => {
                    println!("ok: {t}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("type error: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Bench {
            dir,
            modes,
            precisions,
            search,
            out,
        } => {
            let base = config(modes[0], precisions[0], search.max_size, search.budget, search.timeout);
            let rows = bench(&dir, &modes, &precisions, &base)?;
            match out {
                Some(path) => write_csv(&rows, std::fs::File::create(path)?)?,
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
