use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nlmc_cli::{cmd_dump_basis, cmd_run_fine, cmd_sweep, BasisSelector, ConfigError, Problem};

#[derive(Parser)]
#[command(name = "nlmc", version, about = "Nonlocal multicontinua upscaling of fractured dual-porosity flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` from the config, then `out`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads for basis construction (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Fine-grid reference simulation.
    RunFine(Common),
    /// Fine reference plus NLMC at one oversampling depth.
    RunNlmc {
        #[command(flatten)]
        common: Common,
        /// Oversampling layers; defaults to the largest in the config.
        #[arg(long, short = 's')]
        layers: Option<usize>,
    },
    /// Fine reference plus NLMC for every depth listed in the config.
    Sweep(Common),
    /// Write a single basis function as a field file.
    DumpBasis {
        #[command(flatten)]
        common: Common,
        /// Coarse grid as `MXxMY`; defaults to the first in the config.
        #[arg(long)]
        coarse: Option<String>,
        #[arg(long, short = 's', default_value_t = 2)]
        layers: usize,
        /// Coarse cell id (row-major).
        #[arg(long)]
        cell: usize,
        /// `1`, `2` or `f`.
        #[arg(long, default_value = "1")]
        continuum: String,
        /// Fracture network for `--continuum f`.
        #[arg(long)]
        network: Option<usize>,
    },
}

fn parse_dims(s: &str) -> Result<[usize; 2]> {
    let (a, b) = s.split_once(['x', 'X']).with_context(|| format!("coarse grid {s:?} is not MXxMY"))?;
    Ok([a.trim().parse()?, b.trim().parse()?])
}

fn setup(common: &Common) -> Result<(Problem, PathBuf)> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global()
        .context("configuring the thread pool")?;
    let problem = Problem::load(&common.config)?;
    let out = match (&common.out, &problem.config.output.dir) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => problem.config.resolve(d),
        (None, None) => PathBuf::from("out"),
    };
    Ok((problem, out))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::RunFine(common) => {
            let (problem, out) = setup(&common)?;
            let fine = cmd_run_fine(&problem, Some(common.config.clone()), &out)?;
            println!("fine: {} DOFs, {:.3?}, wrote {}", fine.ops.layout.num_dofs(), fine.solve_time, out.display());
        }
        Command::RunNlmc { common, layers } => {
            let (problem, out) = setup(&common)?;
            let s = layers.unwrap_or_else(|| *problem.config.nlmc.layers.iter().max().expect("validated"));
            report(&cmd_sweep(&problem, Some(common.config.clone()), &out, &[s], "run-nlmc")?, &out);
        }
        Command::Sweep(common) => {
            let (problem, out) = setup(&common)?;
            let layers = problem.config.nlmc.layers.clone();
            report(&cmd_sweep(&problem, Some(common.config.clone()), &out, &layers, "sweep")?, &out);
        }
        Command::DumpBasis { common, coarse, layers, cell, continuum, network } => {
            let (problem, out) = setup(&common)?;
            let dims = match coarse {
                Some(c) => parse_dims(&c)?,
                None => problem.config.grid.coarse[0],
            };
            let sel = BasisSelector { coarse: dims, layers, cell, continuum, network };
            println!("wrote {}", cmd_dump_basis(&problem, &out, &sel)?.display());
        }
    }
    Ok(())
}

fn report(runs: &[nlmc_cli::CoarseRun], out: &Path) {
    for r in runs {
        for l in &r.layers {
            println!(
                "{}x{} s={}: DOF_c {} / DOF_f {}, build {:.3?}, coarse solve {:.3?}",
                r.dims[0],
                r.dims[1],
                l.layers,
                r.report.dof_coarse,
                r.report.dof_fine,
                l.build_time,
                l.solve_time
            );
        }
    }
    println!("wrote {}", out.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
