//! Artifact writers: error tables, field dumps and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nlmc_core::fine_system::FineLayout;
use nlmc_core::geometry::{FineGrid, FractureMesh};
use nlmc_core::metrics::write_error_csv;
use serde::Serialize;

use crate::problem::Problem;
use crate::run::{CoarseRun, FineRun};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

pub fn write_errors(run: &CoarseRun, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_error_csv(&run.report.rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn errors_file_name(dims: [usize; 2]) -> String {
    format!("errors_{}x{}.csv", dims[0], dims[1])
}

/// Legacy VTK rectilinear grid with one cell array per matrix continuum.
pub fn write_vtk<W: Write>(grid: &FineGrid, layout: &FineLayout, p: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "matrix pressure")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET RECTILINEAR_GRID")?;
    writeln!(w, "DIMENSIONS {} {} 1", grid.nx() + 1, grid.ny() + 1)?;
    for (axis, n, line) in [("X", grid.nx(), 0), ("Y", grid.ny(), 1)] {
        writeln!(w, "{axis}_COORDINATES {} double", n + 1)?;
        let coords: Vec<String> = (0..=n)
            .map(|k| format!("{:e}", if line == 0 { grid.x_line(k) } else { grid.y_line(k) }))
            .collect();
        writeln!(w, "{}", coords.join(" "))?;
    }
    writeln!(w, "Z_COORDINATES 1 double")?;
    writeln!(w, "0")?;
    writeln!(w, "CELL_DATA {}", grid.num_cells())?;
    for alpha in 0..layout.n_matrix {
        writeln!(w, "SCALARS p{} double 1", alpha + 1)?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in &p[layout.matrix_range(alpha)] {
            writeln!(w, "{v:.10e}")?;
        }
    }
    Ok(())
}

/// One line per fracture cell: geometry and pressure.
pub fn write_fracture_csv<W: Write>(fmesh: &FractureMesh, layout: &FineLayout, p: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "cell,x,y,length,segment,network,host,p")?;
    for (l, (c, v)) in fmesh.cells().iter().zip(&p[layout.fracture_range()]).enumerate() {
        writeln!(
            w,
            "{l},{:.10e},{:.10e},{:.10e},{},{},{},{v:.10e}",
            c.midpoint.x, c.midpoint.y, c.length, c.segment, c.network, c.host
        )?;
    }
    Ok(())
}

pub fn write_fields(problem: &Problem, layout: &FineLayout, p: &[f64], dir: &Path, stem: &str) -> Result<()> {
    let mut w = create(&dir.join(format!("{stem}.vtk")))?;
    write_vtk(&problem.fine, layout, p, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(format!("{stem}_fractures.csv")))?;
    write_fracture_csv(&problem.fmesh, layout, p, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market(m: &nlmc_core::linalg::CsrMatrix, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    m.write_matrix_market(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SourceEntry {
    pub given: [f64; 4],
    /// `[x0, y0, x1, y1]` after corner normalization.
    pub normalized: [f64; 4],
    pub continuum: String,
    pub rate: f64,
    pub cells: usize,
}

#[derive(Debug, Serialize)]
pub struct LayerEntry {
    pub layers: usize,
    pub nnz_a_bar: usize,
    pub nnz_r: usize,
    pub max_row_sum: f64,
    pub max_mass_drift: f64,
    pub basis_build_s: f64,
    pub coarse_solve_s: f64,
}

#[derive(Debug, Serialize)]
pub struct CoarseEntry {
    pub coarse: [usize; 2],
    pub dof_coarse: usize,
    pub dof_ratio: f64,
    pub errors: Option<String>,
    pub runs: Vec<LayerEntry>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub threads: usize,
    pub fine: [usize; 2],
    pub domain: [f64; 4],
    pub fracture_segments: usize,
    pub fracture_cells: usize,
    pub fracture_networks: usize,
    pub dof_fine: usize,
    pub tau: f64,
    pub steps: usize,
    pub random_field_seed: Option<u64>,
    pub zero_row_sum: bool,
    pub exchange: String,
    pub sources: Vec<SourceEntry>,
    pub fine_solve_s: Option<f64>,
    pub max_fine_mass_drift: Option<f64>,
    pub coarse: Vec<CoarseEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<PathBuf>, problem: &Problem) -> Self {
        let cfg = &problem.config;
        let n_fracture = problem.fmesh.num_cells();
        let sources = cfg
            .sources
            .iter()
            .zip(&problem.sources)
            .zip(&problem.source_cells)
            .map(|((c, s), &cells)| SourceEntry {
                given: c.rect,
                normalized: [s.rect.x0, s.rect.y0, s.rect.x1, s.rect.y1],
                continuum: format!("{:?}", c.continuum).to_lowercase(),
                rate: c.rate,
                cells,
            })
            .collect();
        Self {
            command: command.to_string(),
            config,
            threads: rayon::current_num_threads(),
            fine: cfg.grid.fine,
            domain: cfg.grid.domain,
            fracture_segments: problem.geometry.segments().len(),
            fracture_cells: n_fracture,
            fracture_networks: problem.fmesh.num_networks(),
            dof_fine: 2 * problem.fine.num_cells() + n_fracture,
            tau: cfg.tau(),
            steps: cfg.time.steps,
            random_field_seed: cfg.properties.random_field.map(|r| r.seed),
            zero_row_sum: cfg.nlmc.zero_row_sum,
            exchange: format!("{:?}", cfg.nlmc.exchange).to_lowercase(),
            sources,
            fine_solve_s: None,
            max_fine_mass_drift: None,
            coarse: Vec::new(),
        }
    }

    pub fn record_fine(&mut self, fine: &FineRun) {
        self.fine_solve_s = Some(fine.solve_time.as_secs_f64());
        self.max_fine_mass_drift = Some(fine.max_mass_drift);
    }

    pub fn record_coarse(&mut self, run: &CoarseRun, errors: Option<String>) {
        self.coarse.push(CoarseEntry {
            coarse: run.dims,
            dof_coarse: run.report.dof_coarse,
            dof_ratio: run.report.dof_coarse as f64 / run.report.dof_fine as f64,
            errors,
            runs: run
                .layers
                .iter()
                .map(|l| LayerEntry {
                    layers: l.layers,
                    nnz_a_bar: l.model.a_bar.nnz(),
                    nnz_r: l.proj.r.nnz(),
                    max_row_sum: l.model.row_sums.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                    max_mass_drift: l.max_mass_drift,
                    basis_build_s: l.build_time.as_secs_f64(),
                    coarse_solve_s: l.solve_time.as_secs_f64(),
                })
                .collect(),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}
