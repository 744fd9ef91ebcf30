use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use lattice_cli::{assemble_config, render_table, run, CliError, Command, Invocation};

#[derive(Parser, Debug)]
#[command(name = "lattice", version, about = "Discrete Fourier multiplier experiments on Z^d")]
struct Args {
    /// kernel, apply, verify-mikhlin, verify-weak, verify-hormander,
    /// verify-decay, norm, wave, strichartz or selftest. May instead be
    /// given as "command" in the config.
    command: Option<String>,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's "out", else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the library's parallel loops.
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress the summary table.
    #[arg(long)]
    quiet: bool,
    /// Override a config field, e.g. --set box=128 or --set 'times=[1,2]'.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn fail(e: &CliError, out: Option<&Path>) -> ExitCode {
    let doc = e.to_json();
    eprintln!("{doc}");
    if let Some(dir) = out {
        if dir.is_dir() {
            let _ = lattice_multipliers::io::write_atomic(&dir.join("error.json"), doc.to_string().as_bytes());
        }
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if n == 0 {
            return fail(&CliError::Config("--threads must be positive".into()), None);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::Config(format!("thread pool: {e}")), None);
        }
    }
    let inv = Invocation {
        command: args.command.clone(),
        config: args.config.clone(),
        out: args.out.clone(),
        seed: args.seed,
        set: args.set.clone(),
    };
    let cfg = match assemble_config(&inv) {
        Ok(c) => c,
        Err(e) => return fail(&e, args.out.as_deref()),
    };
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let out_dir = PathBuf::from(cfg.out.clone().unwrap_or_default());
    let command: Command = cfg.command;
    match run(cfg, &base) {
        Ok(done) => {
            if !args.quiet {
                print!("{command}\n{}", render_table(&done.outcome.summary));
                println!("report: {}", done.report_path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&out_dir)),
    }
}
