use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Pre-fractal (p,q)-obstacle solver driver.
///
/// Runs one configuration file: builds the Koch snowflake domain, meshes
/// it, solves the requested problem or sweep, and writes meshes, solution
/// files, CSV reports and SVG renders into the output directory.
#[derive(Parser, Debug)]
#[command(name = "kochfem", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand, Debug)]
enum Command {
    /// Execute a run configuration.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Output directory (overrides the config's `output.dir`).
        #[arg(long, env = "KOCHFEM_OUT")]
        out: Option<PathBuf>,
        /// Worker thread count (0 = all cores).
        #[arg(long, env = "KOCHFEM_THREADS", default_value_t = 0)]
        threads: usize,
        /// Seed for randomized audits; never affects solutions.
        #[arg(long, env = "KOCHFEM_SEED", default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            #[cfg(feature = "parallel")]
            if threads > 0 {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                {
                    eprintln!("kochfem: failed to size thread pool: {e}");
                    return ExitCode::from(1);
                }
            }
            #[cfg(not(feature = "parallel"))]
            let _ = threads;
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("kochfem: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            match kochfem_cli::run::run_config_text(&text, out.as_deref(), seed) {
                Ok(output) => {
                    print!("{}", output.summary);
                    println!("artifacts: {}", output.out_dir.display());
                    for f in &output.files {
                        println!("  {f}");
                    }
                    ExitCode::SUCCESS
                }
                Err(err) => {
                    let dir = out.unwrap_or_else(|| PathBuf::from("out"));
                    kochfem_cli::run::write_error_record(&dir, &err);
                    eprintln!("kochfem: {err}");
                    ExitCode::from(err.exit_code() as u8)
                }
            }
        }
    }
}
