use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cavmix::config::ExperimentConfig;
use cavmix::driver;
use cavmix::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "cavmix",
    version,
    about = "Mixed FEM solver for cavity growth in incompressible elasticity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, env = "CAVMIX_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for assembly (0 = rayon default).
    #[arg(long, global = true, env = "CAVMIX_THREADS", default_value_t = 0)]
    threads: usize,
    /// Seed for randomized utilities; the solver itself is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate meshes and the layer/validation report.
    Mesh,
    /// Solve one configuration.
    Solve,
    /// Mesh-convergence study over `run.h_list`.
    Converge,
    /// Load sweep over `run.lambdas` for each branch.
    Sweep,
    /// Discrete inf-sup constants over `run.h_list`.
    Infsup,
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let path = cli
        .config
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(&path)?;
    let out = driver::output_dir(cli.out, &cfg);
    match cli.command {
        Command::Mesh => {
            let rows = driver::cmd_mesh(&cfg, &out)?;
            print!("{}", driver::layers_csv(&rows));
        }
        Command::Solve => {
            let s = driver::cmd_solve(&cfg, &out)?;
            println!(
                "converged in {} iterations: E = {:.12}, det L2 = {:.3e}, min det = {:.3e}",
                s.iterations, s.energy, s.det_err_l2, s.min_det
            );
        }
        Command::Converge => {
            let o = driver::cmd_converge(&cfg, &out)?;
            for f in &o.fits {
                match f.order {
                    Some(p) => println!("{}: order {p:.3}", f.column),
                    None => println!("{}: no fit", f.column),
                }
            }
        }
        Command::Sweep => {
            let o = driver::cmd_sweep(&cfg, &out)?;
            match o.report.lambda_c {
                Some(l) => println!("lambda_c = {l}"),
                None => println!("lambda_c not bracketed"),
            }
        }
        Command::Infsup => {
            let rows = driver::cmd_infsup(&cfg, &out)?;
            print!("{}", driver::infsup_csv(&rows));
        }
    }
    eprintln!("output written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
