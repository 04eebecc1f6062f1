use std::sync::Arc;

use rayon::prelude::*;

use super::NlmcError;
use crate::fine_system::FineOperators;
use crate::geometry::{CoarseGrid, ContinuumIndex, FractureMesh, OversampleRegion};
use crate::linalg::{CsrMatrix, SaddleSolver};

/// Mean-value rows of one oversampled region, in local fine numbering.
///
/// Row `r` averages continuum `coarse_dofs[r]` over its coarse cell: weights
/// `|ς|/|K_j|` for matrix continua and `|ι|/|γ_j^(m)|` for fracture continua.
#[derive(Debug, Clone)]
pub struct ConstraintOperator {
    pub coarse_dofs: Vec<usize>,
    pub matrix: CsrMatrix,
}

impl ConstraintOperator {
    pub fn num_rows(&self) -> usize {
        self.coarse_dofs.len()
    }

    /// Moments `B v` of a local fine vector.
    pub fn moments(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.matvec(v)
    }

    /// Rows belonging to matrix continuum `Some(alpha)` or to the fracture
    /// continua (`None`).
    pub fn rows_of(&self, index: &ContinuumIndex, continuum: Option<usize>) -> Vec<usize> {
        (0..self.num_rows())
            .filter(|&r| index.matrix_continuum_of_dof(self.coarse_dofs[r]) == continuum)
            .collect()
    }
}

pub fn build_constraints(
    region: &OversampleRegion,
    coarse: &CoarseGrid,
    index: &ContinuumIndex,
) -> ConstraintOperator {
    let n_fine = coarse.num_fine_cells();
    let w = coarse.fine_cell_area() / coarse.cell_area();
    let mut trip = Vec::new();
    for (row, &dof) in region.coarse_dofs.iter().enumerate() {
        match index.matrix_continuum_of_dof(dof) {
            Some(alpha) => {
                for c in coarse.fine_cells(index.cell_of_dof(dof)) {
                    let local = region.local_fine_dof(alpha * n_fine + c).expect("cell inside region");
                    trip.push((row, local, w));
                }
            }
            None => {
                let fc = &index.continua()[dof - index.n_matrix() * index.num_coarse_cells()];
                for (&l, &len) in fc.cells.iter().zip(&fc.lengths) {
                    let global = index.n_matrix() * n_fine + l;
                    let local = region.local_fine_dof(global).expect("fracture cell inside region");
                    trip.push((row, local, len / fc.length));
                }
            }
        }
    }
    ConstraintOperator {
        coarse_dofs: region.coarse_dofs.clone(),
        matrix: CsrMatrix::from_triplets(region.coarse_dofs.len(), region.num_fine_dofs(), &trip),
    }
}

/// Basis `ψ^{i,l}` stored on the fine DOFs of its oversampled region.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    /// Coarse DOF this basis belongs to.
    pub owner: usize,
    /// Root coarse cell of the region.
    pub root: usize,
    /// Global fine DOFs, ascending; shared by all bases of the region.
    pub support: Arc<[usize]>,
    pub values: Vec<f64>,
    /// Lagrange multipliers, one per constraint row.
    pub multipliers: Vec<f64>,
}

impl BasisFunction {
    pub fn to_fine(&self, n_fine_dofs: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_fine_dofs];
        for (&g, &v) in self.support.iter().zip(&self.values) {
            out[g] = v;
        }
        out
    }
}

/// Solves the region's saddle system once and returns one basis per owner.
///
/// The spatial operator is restricted to the region's fine DOFs, which is
/// zero Dirichlet data outside the region.
pub fn solve_region_bases(
    region: &OversampleRegion,
    constraints: &ConstraintOperator,
    spatial: &CsrMatrix,
    owners: &[usize],
) -> Result<Vec<BasisFunction>, NlmcError> {
    let err = |e| NlmcError::region(region.root, e);
    let a = spatial.principal_submatrix(&region.fine_dofs);
    let solver = SaddleSolver::new(&a, &constraints.matrix).map_err(err)?;
    let zeros = vec![0.0; a.nrows()];
    let mut rhs = Vec::with_capacity(owners.len());
    for &owner in owners {
        let row = constraints
            .coarse_dofs
            .iter()
            .position(|&d| d == owner)
            .ok_or(NlmcError::ForeignOwner { dof: owner })?;
        let mut g = vec![0.0; constraints.num_rows()];
        g[row] = 1.0;
        rhs.push((zeros.clone(), g));
    }
    let support: Arc<[usize]> = region.fine_dofs.clone().into();
    let solutions = solver.solve_many(&rhs).map_err(err)?;
    Ok(owners
        .iter()
        .zip(solutions)
        .map(|(&owner, (values, multipliers))| BasisFunction {
            owner,
            root: region.root,
            support: support.clone(),
            values,
            multipliers,
        })
        .collect())
}

pub fn solve_basis(
    region: &OversampleRegion,
    constraints: &ConstraintOperator,
    spatial: &CsrMatrix,
    owner: usize,
) -> Result<BasisFunction, NlmcError> {
    Ok(solve_region_bases(region, constraints, spatial, &[owner])?.remove(0))
}

/// All bases of a coarse model, sorted by owner.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub layers: usize,
    pub bases: Vec<BasisFunction>,
}

/// Builds every basis with oversampling `layers`. Regions are solved in
/// parallel on the current rayon pool; the result does not depend on the
/// schedule.
pub fn build_bases(
    ops: &FineOperators,
    coarse: &CoarseGrid,
    fmesh: &FractureMesh,
    index: &ContinuumIndex,
    layers: usize,
) -> Result<BasisSet, NlmcError> {
    if layers == 0 {
        return Err(NlmcError::NoLayers);
    }
    let per_region: Vec<Vec<BasisFunction>> = (0..coarse.num_cells())
        .into_par_iter()
        .map(|root| {
            let region = OversampleRegion::new(coarse, fmesh, index, root, layers);
            let constraints = build_constraints(&region, coarse, index);
            let owners = index.dofs_of_cell(root);
            let out = solve_region_bases(&region, &constraints, &ops.spatial, &owners);
            log::trace!("region {root}: {} fine dofs, {} constraints", region.num_fine_dofs(), constraints.num_rows());
            out
        })
        .collect::<Result<_, _>>()?;
    let mut bases: Vec<BasisFunction> = per_region.into_iter().flatten().collect();
    bases.sort_by_key(|b| b.owner);
    Ok(BasisSet { layers, bases })
}
