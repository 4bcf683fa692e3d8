use clap::{Parser, Subcommand};
use kgz::config::ExperimentConfig;
use kgz::experiments::{audit, run_experiment, AUDIT_SUITES};
use std::path::PathBuf;
use std::process::ExitCode;

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "kgz", about = "Klein-Gordon-Zakharov experiments and audits")]
struct Cli {
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an audit suite: identity, special, infrastructure or all.
    Audit { suite: String },
}

fn run(cli: Cli) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
        .map_err(|e| format!("thread pool: {e}"))?;
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let dir = out
                .or_else(|| cfg.output.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
            let summary = run_experiment(&cfg, &dir).map_err(|e| format!("{}: {e}", cfg.experiment.name()))?;
            for f in &summary.files {
                println!("{}", f.display());
            }
            println!("{}", summary.manifest.display());
            Ok(())
        }
        Command::Audit { suite } => {
            if !AUDIT_SUITES.contains(&suite.as_str()) {
                return Err(format!("unknown suite {suite}; expected one of {}", AUDIT_SUITES.join(", ")));
            }
            let lines = audit(&suite).map_err(|e| e.to_string())?;
            let mut failed = 0;
            for l in &lines {
                println!("{} {}: {:.3e} (bound {:.1e})", if l.pass { "PASS" } else { "FAIL" }, l.name, l.value, l.bound);
                failed += usize::from(!l.pass);
            }
            if failed > 0 {
                return Err(format!("{failed} audit checks failed"));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
