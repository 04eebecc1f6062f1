//! Experiment runner: reads a TOML config, runs the fine reference and the
//! NLMC sweeps, and writes error tables, fields and a manifest.

pub mod config;
pub mod output;
pub mod problem;
pub mod run;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nlmc_core::geometry::{CoarseGrid, ContinuumIndex, OversampleRegion};
use nlmc_core::nlmc::{build_constraints, solve_basis};

pub use config::{ConfigError, ExperimentConfig};
pub use problem::Problem;
pub use run::{run_coarse, run_fine, CoarseRun, FineRun};

use output::{ensure_dir, errors_file_name, write_errors, write_fields, write_matrix_market, Manifest};

/// Fine reference only.
pub fn cmd_run_fine(problem: &Problem, config_path: Option<PathBuf>, out: &Path) -> Result<FineRun> {
    let fine = run_fine(problem)?;
    ensure_dir(out)?;
    if problem.config.output.fields {
        write_fields(problem, &fine.ops.layout, &fine.final_state.p, out, "fine")?;
    }
    let mut manifest = Manifest::new("run-fine", config_path, problem);
    manifest.record_fine(&fine);
    manifest.write(out)?;
    Ok(fine)
}

/// Fine reference plus NLMC on every coarse grid at each of `layers`.
pub fn cmd_sweep(
    problem: &Problem,
    config_path: Option<PathBuf>,
    out: &Path,
    layers: &[usize],
    command: &str,
) -> Result<Vec<CoarseRun>> {
    let fine = run_fine(problem)?;
    ensure_dir(out)?;
    let mut manifest = Manifest::new(command, config_path, problem);
    manifest.record_fine(&fine);
    let cfg = &problem.config;
    if cfg.output.fields {
        write_fields(problem, &fine.ops.layout, &fine.final_state.p, out, "fine")?;
    }
    let mut runs = Vec::new();
    for &dims in &cfg.grid.coarse {
        let run = run_coarse(problem, &fine, dims, layers)?;
        let name = errors_file_name(dims);
        write_errors(&run, &out.join(&name))?;
        for l in &run.layers {
            let tag = format!("{}x{}_s{}", dims[0], dims[1], l.layers);
            if cfg.output.fields {
                let p_bar = &l.snapshots[&cfg.time.steps];
                let down = nlmc_core::nlmc::downscale(&l.proj, p_bar);
                write_fields(problem, &fine.ops.layout, &down, out, &format!("nlmc_{tag}"))?;
            }
            if cfg.output.dump_projection {
                write_matrix_market(&l.proj.r, &out.join(format!("R_{tag}.mtx")))?;
            }
        }
        manifest.record_coarse(&run, Some(name));
        runs.push(run);
    }
    manifest.write(out)?;
    Ok(runs)
}

/// Which basis `dump-basis` writes.
#[derive(Debug, Clone)]
pub struct BasisSelector {
    pub coarse: [usize; 2],
    pub layers: usize,
    pub cell: usize,
    /// `"1"`, `"2"` or `"f"`; `network` picks the fracture continuum.
    pub continuum: String,
    pub network: Option<usize>,
}

pub fn cmd_dump_basis(problem: &Problem, out: &Path, sel: &BasisSelector) -> Result<PathBuf> {
    let ops = problem.operators()?;
    let coarse = CoarseGrid::new(&problem.fine, sel.coarse[0], sel.coarse[1])?;
    if sel.cell >= coarse.num_cells() {
        bail!("coarse cell {} out of range (grid has {})", sel.cell, coarse.num_cells());
    }
    let index = ContinuumIndex::new(&coarse, &problem.fmesh, ops.layout.n_matrix);
    let owner = match sel.continuum.as_str() {
        "1" => index.matrix_dof(0, sel.cell),
        "2" => index.matrix_dof(1, sel.cell),
        "f" => {
            let mut range = index.continua_in(sel.cell);
            let ci = match sel.network {
                None => range.next(),
                Some(n) => range.find(|&c| index.continua()[c].network == n),
            }
            .with_context(|| format!("coarse cell {} has no matching fracture continuum", sel.cell))?;
            index.fracture_dof(ci)
        }
        other => bail!("unknown continuum {other:?}; use 1, 2 or f"),
    };
    let region = OversampleRegion::new(&coarse, &problem.fmesh, &index, sel.cell, sel.layers);
    let constraints = build_constraints(&region, &coarse, &index);
    let basis = solve_basis(&region, &constraints, &ops.spatial, owner)?;
    ensure_dir(out)?;
    let stem = format!("basis_{}x{}_s{}_cell{}_{}", sel.coarse[0], sel.coarse[1], sel.layers, sel.cell, sel.continuum);
    write_fields(problem, &ops.layout, &basis.to_fine(ops.layout.num_dofs()), out, &stem)?;
    Ok(out.join(format!("{stem}.vtk")))
}
