use super::{BasisSet, NlmcError};
use crate::fine_system::FineOperators;
use crate::geometry::{CoarseGrid, ContinuumIndex};
use crate::linalg::{conservative_increment, triple_product, CsrMatrix, DirectSolver, LinalgError};

/// `DOF_c x N_f` map from fine DOFs to coarse DOFs.
///
/// Unweighted rows are indicators (sums over the coarse continuum); weighted
/// rows are the mean-value operator with `|ς|/|K|` and `|ι|/|γ|` weights.
pub fn aggregation_matrix(coarse: &CoarseGrid, index: &ContinuumIndex, weighted: bool) -> CsrMatrix {
    let n_fine = coarse.num_fine_cells();
    let n_matrix = index.n_matrix();
    let n_dofs_fine = n_matrix * n_fine + index.continua().iter().map(|c| c.cells.len()).sum::<usize>();
    let w = if weighted { coarse.fine_cell_area() / coarse.cell_area() } else { 1.0 };
    let mut trip = Vec::with_capacity(n_dofs_fine);
    for alpha in 0..n_matrix {
        for k in 0..coarse.num_cells() {
            let row = index.matrix_dof(alpha, k);
            trip.extend(coarse.fine_cells(k).map(|c| (row, alpha * n_fine + c, w)));
        }
    }
    for (ci, fc) in index.continua().iter().enumerate() {
        let row = index.fracture_dof(ci);
        for (&l, &len) in fc.cells.iter().zip(&fc.lengths) {
            let v = if weighted { len / fc.length } else { 1.0 };
            trip.push((row, n_matrix * n_fine + l, v));
        }
    }
    CsrMatrix::from_triplets(index.num_dofs(), n_dofs_fine, &trip)
}

/// `R`: one row per coarse DOF holding the basis on every fine continuum.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    pub layers: usize,
    pub r: CsrMatrix,
}

impl ProjectionMatrix {
    pub fn num_coarse(&self) -> usize {
        self.r.nrows()
    }

    pub fn num_fine(&self) -> usize {
        self.r.ncols()
    }
}

pub fn assemble_projection(
    bases: &BasisSet,
    num_coarse: usize,
    num_fine: usize,
) -> Result<ProjectionMatrix, NlmcError> {
    let mut seen = vec![false; num_coarse];
    for b in &bases.bases {
        if b.owner >= num_coarse {
            return Err(NlmcError::ForeignOwner { dof: b.owner });
        }
        if std::mem::replace(&mut seen[b.owner], true) {
            return Err(NlmcError::DuplicateBasis { dof: b.owner });
        }
    }
    if let Some(dof) = seen.iter().position(|s| !s) {
        return Err(NlmcError::IncompleteSpace { dof });
    }
    let mut order: Vec<&_> = bases.bases.iter().collect();
    order.sort_by_key(|b| b.owner);
    let mut indptr = Vec::with_capacity(num_coarse + 1);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    indptr.push(0);
    for b in order {
        for (&g, &v) in b.support.iter().zip(&b.values) {
            if v != 0.0 {
                indices.push(g);
                data.push(v);
            }
        }
        indptr.push(indices.len());
    }
    let r = CsrMatrix::from_raw(num_coarse, num_fine, indptr, indices, data)?;
    Ok(ProjectionMatrix { layers: bases.layers, r })
}

/// How the coarse exchange enters `Ā`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExchangeVariant {
    /// `Ā = R (A + Q) Rᵀ`
    #[default]
    Full,
    /// `Ā = R A Rᵀ + Q̄` with the cell-local `Q̄ = P Q Pᵀ`.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpscaleOptions {
    pub exchange: ExchangeVariant,
    /// Replace the diagonal of `Ā` by minus its off-diagonal row sums.
    ///
    /// Localized bases reproduce constants only up to the truncation error,
    /// so `Ā 1 ≠ 0`; the residual acts as a spurious source proportional to
    /// the pressure level and drains weakly coupled fracture networks. With
    /// the closure `Ā 1 = 0` and `1ᵀM̄p̄` is conserved for balanced sources.
    pub zero_row_sum: bool,
}

impl Default for UpscaleOptions {
    fn default() -> Self {
        Self { exchange: ExchangeVariant::Full, zero_row_sum: true }
    }
}

/// Coarse system `M̄ (p̄ − p̄̌)/τ + Ā p̄ = F̄`.
#[derive(Debug, Clone)]
pub struct UpscaledModel {
    pub a_bar: CsrMatrix,
    /// Diagonal of `M̄`: `c_α |K_i|` and `c_f |γ_i^(l)|`.
    pub mass: Vec<f64>,
    /// `Q̄ = P Q Pᵀ`
    pub q_bar: CsrMatrix,
    /// `F̄`: fine sources summed over each coarse continuum.
    pub source: Vec<f64>,
    pub options: UpscaleOptions,
    /// `Ā 1` before the zero-row-sum closure.
    pub row_sums: Vec<f64>,
}

impl UpscaledModel {
    pub fn num_dofs(&self) -> usize {
        self.mass.len()
    }

    pub fn total_mass(&self, p: &[f64]) -> f64 {
        self.mass.iter().zip(p).map(|(m, v)| m * v).sum()
    }

    pub fn step_matrix(&self, tau: f64) -> CsrMatrix {
        let m: Vec<f64> = self.mass.iter().map(|v| v / tau).collect();
        self.a_bar.add(&CsrMatrix::diagonal(&m)).expect("square").with_symmetric(true)
    }
}

pub fn assemble_upscaled(
    proj: &ProjectionMatrix,
    ops: &FineOperators,
    coarse: &CoarseGrid,
    index: &ContinuumIndex,
    options: UpscaleOptions,
) -> Result<UpscaledModel, NlmcError> {
    let p = aggregation_matrix(coarse, index, false);
    if p.ncols() != ops.layout.num_dofs() || proj.num_fine() != ops.layout.num_dofs() {
        return Err(LinalgError::DimensionMismatch {
            op: "assemble_upscaled",
            left: (proj.num_coarse(), proj.num_fine()),
            right: (ops.layout.num_dofs(), ops.layout.num_dofs()),
        }
        .into());
    }
    let q_bar = triple_product(&p, &ops.exchange.assembled)?;
    let mut a_bar = match options.exchange {
        ExchangeVariant::Full => triple_product(&proj.r, &ops.spatial)?,
        ExchangeVariant::Diagonal => triple_product(&proj.r, &ops.stiffness)?.add(&q_bar)?.with_symmetric(true),
    };
    let row_sums = a_bar.matvec(&vec![1.0; a_bar.nrows()]);
    if options.zero_row_sum {
        let shift: Vec<f64> = row_sums.iter().map(|r| -r).collect();
        a_bar = a_bar.add(&CsrMatrix::diagonal(&shift))?.with_symmetric(true);
    }
    Ok(UpscaledModel {
        a_bar,
        mass: p.matvec(&ops.mass),
        q_bar,
        source: p.matvec(&ops.source),
        options,
        row_sums,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseState {
    pub p: Vec<f64>,
    pub t: f64,
}

impl CoarseState {
    pub fn uniform(n: usize, p0: f64) -> Self {
        Self { p: vec![p0; n], t: 0.0 }
    }
}

#[derive(Debug)]
pub struct CoarseStepper<'a> {
    model: &'a UpscaledModel,
    tau: f64,
    solver: DirectSolver,
}

impl<'a> CoarseStepper<'a> {
    pub fn new(model: &'a UpscaledModel, tau: f64) -> Result<Self, LinalgError> {
        assert!(tau > 0.0, "time step must be positive");
        let solver = DirectSolver::spd(&model.step_matrix(tau))?;
        Ok(Self { model, tau, solver })
    }

    /// Increment form as in the fine stepper. Without the zero-row-sum
    /// closure the flux form does not apply and `Ā p̄̌` is a plain product.
    pub fn step(&self, prev: &CoarseState) -> Result<CoarseState, LinalgError> {
        let m = self.model;
        let delta = if m.options.zero_row_sum {
            conservative_increment(&self.solver, &m.a_bar, &m.mass, self.tau, &m.source, &prev.p)?
        } else {
            let a_p = m.a_bar.matvec(&prev.p);
            let rhs: Vec<f64> = m.source.iter().zip(&a_p).map(|(f, a)| f - a).collect();
            self.solver.solve(&rhs)?
        };
        let p = prev.p.iter().zip(&delta).map(|(p, d)| p + d).collect();
        Ok(CoarseState { p, t: prev.t + self.tau })
    }
}

pub fn coarse_step(model: &UpscaledModel, prev: &CoarseState, tau: f64) -> Result<CoarseState, LinalgError> {
    CoarseStepper::new(model, tau)?.step(prev)
}

/// `p̄_F = Rᵀ p̄`
pub fn downscale(proj: &ProjectionMatrix, p_bar: &[f64]) -> Vec<f64> {
    assert_eq!(p_bar.len(), proj.num_coarse(), "coarse vector length");
    proj.r.matvec_transpose(p_bar)
}
