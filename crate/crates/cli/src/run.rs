//! Fine reference runs, NLMC sweeps and their error tables.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use nlmc_core::fine_system::{FineOperators, FineState, FineStepper};
use nlmc_core::geometry::{CoarseGrid, ContinuumIndex};
use nlmc_core::metrics::{
    coarse_average, error_coarse, error_fine, fine_measure, ErrorReport, ErrorRow, Timings,
};
use nlmc_core::nlmc::{
    assemble_projection, assemble_upscaled, build_bases, downscale, CoarseState, CoarseStepper,
    ProjectionMatrix, UpscaledModel,
};

use crate::problem::Problem;

/// Fine trajectory sampled at the report steps and the final step.
#[derive(Debug, Clone)]
pub struct FineRun {
    pub ops: FineOperators,
    pub snapshots: BTreeMap<usize, Vec<f64>>,
    pub final_state: FineState,
    pub initial_mass: f64,
    /// Largest per-step change of `1ᵀMp`, relative to the initial mass.
    pub max_mass_drift: f64,
    pub solve_time: Duration,
}

fn snapshot_steps(problem: &Problem) -> Vec<usize> {
    let mut steps = problem.config.time.report_steps.clone();
    steps.push(problem.config.time.steps);
    steps.sort_unstable();
    steps.dedup();
    steps
}

pub fn run_fine(problem: &Problem) -> Result<FineRun> {
    let ops = problem.operators()?;
    let cfg = &problem.config;
    let keep = snapshot_steps(problem);
    let start = Instant::now();
    let stepper = FineStepper::new(&ops, cfg.tau()).context("factorizing the fine step matrix")?;
    let mut state = FineState::uniform(&ops.layout, cfg.time.p0);
    let initial_mass = ops.total_mass(&state.p);
    let net_rate: f64 = ops.source.iter().sum();
    let mut max_mass_drift = 0.0f64;
    let mut prev_mass = initial_mass;
    let mut snapshots = BTreeMap::new();
    for n in 1..=cfg.time.steps {
        state = stepper.step(&state).with_context(|| format!("fine step {n}"))?;
        let mass = ops.total_mass(&state.p);
        let drift = (mass - prev_mass - cfg.tau() * net_rate).abs() / initial_mass.abs().max(f64::MIN_POSITIVE);
        max_mass_drift = max_mass_drift.max(drift);
        prev_mass = mass;
        if keep.binary_search(&n).is_ok() {
            snapshots.insert(n, state.p.clone());
        }
    }
    let solve_time = start.elapsed();
    drop(stepper);
    Ok(FineRun { ops, snapshots, final_state: state, initial_mass, max_mass_drift, solve_time })
}

/// One coarse grid and one oversampling depth.
#[derive(Debug)]
pub struct LayerRun {
    pub layers: usize,
    pub proj: ProjectionMatrix,
    pub model: UpscaledModel,
    pub snapshots: BTreeMap<usize, Vec<f64>>,
    pub initial_mass: f64,
    pub max_mass_drift: f64,
    pub build_time: Duration,
    pub solve_time: Duration,
}

#[derive(Debug)]
pub struct CoarseRun {
    pub dims: [usize; 2],
    pub coarse: CoarseGrid,
    pub index: ContinuumIndex,
    pub layers: Vec<LayerRun>,
    pub report: ErrorReport,
}

impl CoarseRun {
    pub fn layer(&self, s: usize) -> Option<&LayerRun> {
        self.layers.iter().find(|l| l.layers == s)
    }
}

pub fn run_layer(problem: &Problem, fine: &FineRun, coarse: &CoarseGrid, index: &ContinuumIndex, s: usize) -> Result<LayerRun> {
    let cfg = &problem.config;
    let start = Instant::now();
    let bases = build_bases(&fine.ops, coarse, &problem.fmesh, index, s)
        .with_context(|| format!("building bases with {s} oversampling layers"))?;
    let proj = assemble_projection(&bases, index.num_dofs(), fine.ops.layout.num_dofs())?;
    drop(bases);
    let model = assemble_upscaled(&proj, &fine.ops, coarse, index, problem.upscale_options())?;
    let build_time = start.elapsed();

    let keep = snapshot_steps(problem);
    let start = Instant::now();
    let stepper = CoarseStepper::new(&model, cfg.tau()).context("factorizing the coarse step matrix")?;
    let mut state = CoarseState::uniform(model.num_dofs(), cfg.time.p0);
    let initial_mass = model.total_mass(&state.p);
    let net_rate: f64 = model.source.iter().sum();
    let (mut prev_mass, mut max_mass_drift) = (initial_mass, 0.0f64);
    let mut snapshots = BTreeMap::new();
    for n in 1..=cfg.time.steps {
        state = stepper.step(&state).with_context(|| format!("coarse step {n}"))?;
        let mass = model.total_mass(&state.p);
        max_mass_drift = max_mass_drift
            .max((mass - prev_mass - cfg.tau() * net_rate).abs() / initial_mass.abs().max(f64::MIN_POSITIVE));
        prev_mass = mass;
        if keep.binary_search(&n).is_ok() {
            snapshots.insert(n, state.p.clone());
        }
    }
    let solve_time = start.elapsed();
    drop(stepper);
    log::info!(
        "coarse {}x{} s={s}: DOF_c {} build {:.2?} solve {:.2?}",
        coarse.mx(),
        coarse.my(),
        model.num_dofs(),
        build_time,
        solve_time
    );
    Ok(LayerRun { layers: s, proj, model, snapshots, initial_mass, max_mass_drift, build_time, solve_time })
}

/// Upscales onto `dims` for every requested depth and tabulates errors.
pub fn run_coarse(problem: &Problem, fine: &FineRun, dims: [usize; 2], layers: &[usize]) -> Result<CoarseRun> {
    let coarse = CoarseGrid::new(&problem.fine, dims[0], dims[1])?;
    let index = ContinuumIndex::new(&coarse, &problem.fmesh, fine.ops.layout.n_matrix);
    let runs = layers
        .iter()
        .map(|&s| run_layer(problem, fine, &coarse, &index, s))
        .collect::<Result<Vec<_>>>()?;
    let report = error_report(problem, fine, &coarse, &index, &runs);
    Ok(CoarseRun { dims, coarse, index, layers: runs, report })
}

pub fn error_report(
    problem: &Problem,
    fine: &FineRun,
    coarse: &CoarseGrid,
    index: &ContinuumIndex,
    runs: &[LayerRun],
) -> ErrorReport {
    let measure = fine_measure(&problem.fine, &problem.fmesh, fine.ops.layout.n_matrix);
    let weighting = problem.weighting();
    let mut rows = Vec::new();
    for &m in &problem.config.time.report_steps {
        let p_fine = &fine.snapshots[&m];
        let p_c = coarse_average(p_fine, coarse, index);
        for run in runs {
            let p_bar = &run.snapshots[&m];
            let e_c = error_coarse(&p_c, p_bar, coarse, index, weighting);
            let e_f = error_fine(p_fine, &downscale(&run.proj, p_bar), &fine.ops.layout, &measure);
            for ((continuum, e_c), (_, e_f)) in e_c.into_iter().zip(e_f) {
                rows.push(ErrorRow { m, s: run.layers, continuum, e_c, e_f });
            }
        }
    }
    rows.sort_by(|a, b| (a.m, a.s, a.continuum).cmp(&(b.m, b.s, b.continuum)));
    let last = runs.last();
    ErrorReport {
        dof_fine: fine.ops.layout.num_dofs(),
        dof_coarse: index.num_dofs(),
        rows,
        timings: Timings {
            fine_solve: fine.solve_time,
            basis_build: last.map_or(Duration::ZERO, |r| r.build_time),
            coarse_solve: last.map_or(Duration::ZERO, |r| r.solve_time),
        },
    }
}
