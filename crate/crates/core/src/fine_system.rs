//! Fine-grid finite-volume operators for the multicontinuum system and the
//! implicit reference time stepper.
//!
//! Unknowns are laid out as `p = (p_1, ..., p_N, p_f)`: one block of
//! `nx * ny` cell pressures per matrix continuum followed by the fracture
//! cell pressures. The discrete system per step is
//! `(M/τ + A + Q) p = M p̌/τ + F`.

use thiserror::Error;

use crate::geometry::{FineGrid, FractureMesh, Rect};
use crate::linalg::{conservative_increment, CsrMatrix, DirectSolver, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropertyError {
    #[error("{name} must be strictly positive and finite (got {value})")]
    NonPositive { name: String, value: f64 },
    #[error("{name} has {got} values, expected {expected}")]
    WrongLength { name: String, got: usize, expected: usize },
    #[error("source {index} selects no cells of its continuum")]
    EmptySource { index: usize },
    #[error("source {index} targets matrix continuum {continuum}, but only {n_matrix} exist")]
    UnknownContinuum { index: usize, continuum: usize, n_matrix: usize },
    #[error("raster: {0}")]
    Raster(String),
}

fn check_positive(name: &str, v: f64) -> Result<(), PropertyError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PropertyError::NonPositive { name: name.to_string(), value: v })
    }
}

fn check_field(name: &str, f: &[f64], n: usize) -> Result<(), PropertyError> {
    if f.len() != n {
        return Err(PropertyError::WrongLength { name: name.to_string(), got: f.len(), expected: n });
    }
    f.iter().try_for_each(|&v| check_positive(name, v))
}

/// Properties of one background (matrix) continuum, per fine cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixContinuum {
    /// `k = κ/μ`
    pub k: Vec<f64>,
    pub c: f64,
    /// Exchange coefficient with the fracture continuum, evaluated at the
    /// host cell of each fracture cell.
    pub sigma_fracture: Vec<f64>,
}

/// Exchange between two matrix continua `a < b`, per fine cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExchange {
    pub a: usize,
    pub b: usize,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureProperties {
    pub kf: f64,
    pub bf: f64,
}

/// How the exchange coefficients of the three-continuum model are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExchangeRule {
    Constant { sigma12: f64, sigma1f: f64, sigma2f: f64 },
    /// `σ_12 = k_1`, `σ_1f = k_1`, `σ_2f = k_2`, cell by cell.
    Permeability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumProperties {
    pub matrix: Vec<MatrixContinuum>,
    pub matrix_exchange: Vec<MatrixExchange>,
    /// Per fracture network.
    pub fracture: Vec<FractureProperties>,
    pub cf: f64,
}

impl ContinuumProperties {
    /// Two matrix continua plus the fracture continuum.
    #[allow(clippy::too_many_arguments)]
    pub fn triple(
        k1: Vec<f64>,
        k2: Vec<f64>,
        c1: f64,
        c2: f64,
        fracture: Vec<FractureProperties>,
        cf: f64,
        exchange: ExchangeRule,
    ) -> Self {
        let (s12, s1f, s2f) = match exchange {
            ExchangeRule::Constant { sigma12, sigma1f, sigma2f } => (
                vec![sigma12; k1.len()],
                vec![sigma1f; k1.len()],
                vec![sigma2f; k2.len()],
            ),
            ExchangeRule::Permeability => (k1.clone(), k1.clone(), k2.clone()),
        };
        Self {
            matrix: vec![
                MatrixContinuum { k: k1, c: c1, sigma_fracture: s1f },
                MatrixContinuum { k: k2, c: c2, sigma_fracture: s2f },
            ],
            matrix_exchange: vec![MatrixExchange { a: 0, b: 1, sigma: s12 }],
            fracture,
            cf,
        }
    }

    pub fn n_matrix(&self) -> usize {
        self.matrix.len()
    }

    pub fn validate(&self, grid: &FineGrid, fmesh: &FractureMesh) -> Result<(), PropertyError> {
        let n = grid.num_cells();
        for (a, m) in self.matrix.iter().enumerate() {
            check_field(&format!("k_{}", a + 1), &m.k, n)?;
            check_positive(&format!("c_{}", a + 1), m.c)?;
            check_field(&format!("sigma_{}f", a + 1), &m.sigma_fracture, n)?;
        }
        for e in &self.matrix_exchange {
            check_field(&format!("sigma_{}{}", e.a + 1, e.b + 1), &e.sigma, n)?;
        }
        if self.fracture.len() < fmesh.num_networks() {
            return Err(PropertyError::WrongLength {
                name: "fracture network properties".into(),
                got: self.fracture.len(),
                expected: fmesh.num_networks(),
            });
        }
        for f in &self.fracture {
            check_positive("k_f", f.kf)?;
            check_positive("b_f", f.bf)?;
        }
        check_positive("c_f", self.cf)
    }
}

/// Positions of the continuum blocks inside a fine vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FineLayout {
    pub n_matrix: usize,
    pub n_cells: usize,
    pub n_fracture: usize,
}

impl FineLayout {
    /// `N_f`
    pub fn num_dofs(&self) -> usize {
        self.n_matrix * self.n_cells + self.n_fracture
    }

    pub fn matrix_range(&self, alpha: usize) -> std::ops::Range<usize> {
        alpha * self.n_cells..(alpha + 1) * self.n_cells
    }

    pub fn fracture_range(&self) -> std::ops::Range<usize> {
        let s = self.n_matrix * self.n_cells;
        s..s + self.n_fracture
    }

    pub fn matrix_dof(&self, alpha: usize, cell: usize) -> usize {
        alpha * self.n_cells + cell
    }

    pub fn fracture_dof(&self, l: usize) -> usize {
        self.n_matrix * self.n_cells + l
    }
}

/// Two-point-flux stiffness of one matrix continuum with harmonic facet
/// averaging: off-diagonal `−T_ij`, diagonal `Σ_j T_ij`.
pub fn transmissibility_matrix(grid: &FineGrid, k: &[f64]) -> CsrMatrix {
    let mut trip = Vec::with_capacity(4 * grid.facets().len() + grid.num_cells());
    let mut diag = vec![0.0; grid.num_cells()];
    for f in grid.facets() {
        let (ka, kb) = (k[f.a], k[f.b]);
        let t = 2.0 * ka * kb / (ka + kb) * f.length / f.distance;
        trip.push((f.a, f.b, -t));
        trip.push((f.b, f.a, -t));
        diag[f.a] += t;
        diag[f.b] += t;
    }
    trip.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    CsrMatrix::from_triplets(grid.num_cells(), grid.num_cells(), &trip).with_symmetric(true)
}

/// Graph Laplacian over fracture cells with weights `k_f b_f / d_ln`.
pub fn fracture_stiffness(fmesh: &FractureMesh, fracture: &[FractureProperties]) -> CsrMatrix {
    let n = fmesh.num_cells();
    let mut trip = Vec::with_capacity(4 * fmesh.links().len() + n);
    let mut diag = vec![0.0; n];
    for link in fmesh.links() {
        let p = fracture[fmesh.network_of(link.a)];
        let t = p.kf * p.bf / link.distance;
        trip.push((link.a, link.b, -t));
        trip.push((link.b, link.a, -t));
        diag[link.a] += t;
        diag[link.b] += t;
    }
    trip.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    CsrMatrix::from_triplets(n, n, &trip).with_symmetric(true)
}

/// Exchange blocks before assembly into the full `Q`.
#[derive(Debug, Clone)]
pub struct ExchangeBlocks {
    /// `Q_ab` diagonal entries `σ_ab |ς_i|` for each matrix pair.
    pub matrix_matrix: Vec<(usize, usize, Vec<f64>)>,
    /// `Q_αf`: `n_cells x n_fracture`, entry `σ_αf |ι_l|` at `(host(l), l)`.
    pub matrix_fracture: Vec<CsrMatrix>,
    /// Assembled symmetric `Q` on the full fine vector, zero row sums.
    pub assembled: CsrMatrix,
}

pub fn exchange_matrices(
    grid: &FineGrid,
    fmesh: &FractureMesh,
    props: &ContinuumProperties,
) -> ExchangeBlocks {
    let layout = FineLayout {
        n_matrix: props.n_matrix(),
        n_cells: grid.num_cells(),
        n_fracture: fmesh.num_cells(),
    };
    let area = grid.cell_area();
    let mut trip = Vec::new();
    let couple = |i: usize, j: usize, w: f64, trip: &mut Vec<(usize, usize, f64)>| {
        trip.push((i, i, w));
        trip.push((j, j, w));
        trip.push((i, j, -w));
        trip.push((j, i, -w));
    };

    let mut matrix_matrix = Vec::new();
    for e in &props.matrix_exchange {
        let q: Vec<f64> = e.sigma.iter().map(|s| s * area).collect();
        for (cell, &w) in q.iter().enumerate() {
            couple(layout.matrix_dof(e.a, cell), layout.matrix_dof(e.b, cell), w, &mut trip);
        }
        matrix_matrix.push((e.a, e.b, q));
    }

    let mut matrix_fracture = Vec::new();
    for (alpha, m) in props.matrix.iter().enumerate() {
        let mut qt = Vec::with_capacity(fmesh.num_cells());
        for (l, c) in fmesh.cells().iter().enumerate() {
            let w = m.sigma_fracture[c.host] * c.length;
            qt.push((c.host, l, w));
            couple(layout.matrix_dof(alpha, c.host), layout.fracture_dof(l), w, &mut trip);
        }
        matrix_fracture.push(CsrMatrix::from_triplets(grid.num_cells(), fmesh.num_cells(), &qt));
    }

    let n = layout.num_dofs();
    ExchangeBlocks {
        matrix_matrix,
        matrix_fracture,
        assembled: CsrMatrix::from_triplets(n, n, &trip).with_symmetric(true),
    }
}

/// Target continuum of a source term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuum {
    Matrix(usize),
    Fracture,
}

/// A rate `q` spread evenly over every cell of `continuum` whose center
/// (midpoint, for fracture cells) lies inside `rect`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub rect: Rect,
    pub continuum: Continuum,
    pub rate: f64,
}

pub fn assemble_source(
    grid: &FineGrid,
    fmesh: &FractureMesh,
    layout: &FineLayout,
    sources: &[Source],
) -> Result<Vec<f64>, PropertyError> {
    let mut f = vec![0.0; layout.num_dofs()];
    for (index, s) in sources.iter().enumerate() {
        let dofs: Vec<usize> = match s.continuum {
            Continuum::Matrix(alpha) => {
                if alpha >= layout.n_matrix {
                    return Err(PropertyError::UnknownContinuum {
                        index,
                        continuum: alpha,
                        n_matrix: layout.n_matrix,
                    });
                }
                (0..grid.num_cells())
                    .filter(|&c| s.rect.contains(grid.cell_center(c)))
                    .map(|c| layout.matrix_dof(alpha, c))
                    .collect()
            }
            Continuum::Fracture => fmesh
                .cells()
                .iter()
                .enumerate()
                .filter(|(_, c)| s.rect.contains(c.midpoint))
                .map(|(l, _)| layout.fracture_dof(l))
                .collect(),
        };
        if dofs.is_empty() {
            return Err(PropertyError::EmptySource { index });
        }
        let share = s.rate / dofs.len() as f64;
        for d in dofs {
            f[d] += share;
        }
    }
    Ok(f)
}

/// Assembled fine-grid operators.
#[derive(Debug, Clone)]
pub struct FineOperators {
    pub layout: FineLayout,
    /// Diagonal of `M`: `c_α |ς_i|` and `c_f |ι_l|`.
    pub mass: Vec<f64>,
    /// Block-diagonal `A = diag(A_1, ..., A_N, A_f)`.
    pub stiffness: CsrMatrix,
    pub exchange: ExchangeBlocks,
    pub source: Vec<f64>,
    /// `A + Q`
    pub spatial: CsrMatrix,
}

impl FineOperators {
    pub fn assemble(
        grid: &FineGrid,
        fmesh: &FractureMesh,
        props: &ContinuumProperties,
        sources: &[Source],
    ) -> Result<Self, PropertyError> {
        props.validate(grid, fmesh)?;
        let layout = FineLayout {
            n_matrix: props.n_matrix(),
            n_cells: grid.num_cells(),
            n_fracture: fmesh.num_cells(),
        };
        let n = layout.num_dofs();

        let mut mass = Vec::with_capacity(n);
        for m in &props.matrix {
            mass.extend(std::iter::repeat(m.c * grid.cell_area()).take(grid.num_cells()));
        }
        mass.extend(fmesh.cells().iter().map(|c| props.cf * c.length));

        let mut trip = Vec::new();
        for (alpha, m) in props.matrix.iter().enumerate() {
            let off = layout.matrix_range(alpha).start;
            trip.extend(transmissibility_matrix(grid, &m.k).triplets().map(|(r, c, v)| (r + off, c + off, v)));
        }
        let off = layout.fracture_range().start;
        trip.extend(fracture_stiffness(fmesh, &props.fracture).triplets().map(|(r, c, v)| (r + off, c + off, v)));
        let stiffness = CsrMatrix::from_triplets(n, n, &trip).with_symmetric(true);

        let exchange = exchange_matrices(grid, fmesh, props);
        let spatial = stiffness.add(&exchange.assembled).expect("conformal operators");
        let source = assemble_source(grid, fmesh, &layout, sources)?;
        Ok(Self { layout, mass, stiffness, exchange, source, spatial })
    }

    /// `M/τ + A + Q`
    pub fn step_matrix(&self, tau: f64) -> CsrMatrix {
        let m: Vec<f64> = self.mass.iter().map(|v| v / tau).collect();
        self.spatial.add(&CsrMatrix::diagonal(&m)).expect("square").with_symmetric(true)
    }

    /// `1ᵀ M p`
    pub fn total_mass(&self, p: &[f64]) -> f64 {
        self.mass.iter().zip(p).map(|(m, v)| m * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineState {
    pub p: Vec<f64>,
    pub t: f64,
}

impl FineState {
    pub fn uniform(layout: &FineLayout, p0: f64) -> Self {
        Self { p: vec![p0; layout.num_dofs()], t: 0.0 }
    }

    pub fn matrix<'a>(&'a self, layout: &FineLayout, alpha: usize) -> &'a [f64] {
        &self.p[layout.matrix_range(alpha)]
    }

    pub fn fracture<'a>(&'a self, layout: &FineLayout) -> &'a [f64] {
        &self.p[layout.fracture_range()]
    }
}

/// Implicit Euler stepper with the step matrix factorized once.
#[derive(Debug)]
pub struct FineStepper<'a> {
    ops: &'a FineOperators,
    tau: f64,
    solver: DirectSolver,
}

impl<'a> FineStepper<'a> {
    pub fn new(ops: &'a FineOperators, tau: f64) -> Result<Self, LinalgError> {
        assert!(tau > 0.0, "time step must be positive");
        let solver = DirectSolver::spd(&ops.step_matrix(tau))?;
        Ok(Self { ops, tau, solver })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Solves for the increment `δ = p − p̌` with `(A + Q) p̌` in flux form,
    /// so rounding scales with the per-step change instead of the pressure
    /// level.
    pub fn step(&self, prev: &FineState) -> Result<FineState, LinalgError> {
        let ops = self.ops;
        let delta = conservative_increment(&self.solver, &ops.spatial, &ops.mass, self.tau, &ops.source, &prev.p)?;
        let p = prev.p.iter().zip(&delta).map(|(p, d)| p + d).collect();
        Ok(FineState { p, t: prev.t + self.tau })
    }
}

/// One implicit step `M (p − p̌)/τ + (A + Q) p = F`.
pub fn step(ops: &FineOperators, prev: &FineState, tau: f64) -> Result<FineState, LinalgError> {
    FineStepper::new(ops, tau)?.step(prev)
}

/// Reads a row-major raster of `nx * ny` whitespace-separated values; the
/// first value belongs to the cell at the lower-left corner. `#` starts a
/// comment.
pub fn parse_raster(text: &str, nx: usize, ny: usize) -> Result<Vec<f64>, PropertyError> {
    let mut out = Vec::with_capacity(nx * ny);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| PropertyError::Raster(format!("line {}: not a number: {tok:?}", lineno + 1)))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(PropertyError::Raster(format!(
                    "line {}: values must be positive and finite, got {v}",
                    lineno + 1
                )));
            }
            out.push(v);
        }
    }
    if out.len() != nx * ny {
        return Err(PropertyError::Raster(format!(
            "expected {} values for a {nx}x{ny} grid, found {}",
            nx * ny,
            out.len()
        )));
    }
    Ok(out)
}
