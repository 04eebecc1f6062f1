mod common;

use common::*;
use nlmc_core::fine_system::{ContinuumProperties, FineOperators, MatrixContinuum};
use nlmc_core::geometry::{
    CoarseGrid, ContinuumIndex, FineGrid, FractureMesh, OversampleRegion, Rect, Segment,
};
use nlmc_core::nlmc::{
    assemble_projection, assemble_upscaled, build_bases, BasisSet, ExchangeVariant, UpscaleOptions,
};

/// Dense KKT solve for the basis owned by `owner` on `region`, built from
/// the dense fine operator and mean-value weights computed from geometry.
fn dense_basis(
    spatial: &Dense,
    coarse: &CoarseGrid,
    index: &ContinuumIndex,
    region: &OversampleRegion,
    owner: usize,
) -> Vec<f64> {
    let n_fine = coarse.num_fine_cells();
    let dofs = &region.fine_dofs;
    let n = dofs.len();
    let rows = &region.coarse_dofs;
    let m = rows.len();
    let mut kkt = vec![vec![0.0; n + m]; n + m];
    for (i, &gi) in dofs.iter().enumerate() {
        for (j, &gj) in dofs.iter().enumerate() {
            kkt[i][j] = spatial[gi][gj];
        }
    }
    let area_ratio = 1.0 / coarse.fine_per_coarse().0 as f64 / coarse.fine_per_coarse().1 as f64;
    for (r, &dof) in rows.iter().enumerate() {
        let mut weights = vec![0.0; n];
        match index.matrix_continuum_of_dof(dof) {
            Some(alpha) => {
                let cell = index.cell_of_dof(dof);
                for (i, &g) in dofs.iter().enumerate() {
                    if g / n_fine == alpha && g < index.n_matrix() * n_fine && coarse.coarse_of(g % n_fine) == cell {
                        weights[i] = area_ratio;
                    }
                }
            }
            None => {
                let fc = &index.continua()[dof - index.n_matrix() * index.num_coarse_cells()];
                for (&l, &len) in fc.cells.iter().zip(&fc.lengths) {
                    let i = dofs.iter().position(|&g| g == index.n_matrix() * n_fine + l).unwrap();
                    weights[i] = len / fc.length;
                }
            }
        }
        for (i, w) in weights.into_iter().enumerate() {
            kkt[n + r][i] = w;
            kkt[i][n + r] = w;
        }
    }
    let mut rhs = vec![0.0; n + m];
    rhs[n + rows.iter().position(|&d| d == owner).unwrap()] = 1.0;
    let x = dense_solve(&kkt, &rhs);
    let mut out = vec![0.0; spatial.len()];
    for (i, &g) in dofs.iter().enumerate() {
        out[g] = x[i];
    }
    out
}

fn check_against_oracle(
    ops: &FineOperators,
    coarse: &CoarseGrid,
    fmesh: &FractureMesh,
    index: &ContinuumIndex,
    layers: usize,
) -> BasisSet {
    let spatial = ops.spatial.to_dense();
    let set = build_bases(ops, coarse, fmesh, index, layers).unwrap();
    assert_eq!(set.bases.len(), index.num_dofs());
    for b in &set.bases {
        let region = OversampleRegion::new(coarse, fmesh, index, b.root, layers);
        let oracle = dense_basis(&spatial, coarse, index, &region, b.owner);
        let got = b.to_fine(ops.layout.num_dofs());
        let err = max_abs_diff(&got, &oracle);
        assert!(err <= 1e-8, "basis {} (layers {layers}): max diff {err:e}", b.owner);
    }
    set
}

#[test]
fn bases_match_dense_kkt_on_eight_by_eight() {
    let c = case(8, 2, vec![Segment::new(0.1, 0.2, 0.85, 0.7)], &[]);
    assert!(c.fmesh.num_cells() > 4);
    check_against_oracle(&c.ops, &c.coarse, &c.fmesh, &c.index, 1);
}

#[test]
fn clipped_regions_match_dense_kkt() {
    // 4x4 coarse cells of 2x2 fine cells: one layer leaves most regions
    // strictly inside the domain, so the zero Dirichlet data is active.
    let c = case(8, 4, vec![Segment::new(0.1, 0.2, 0.85, 0.7), Segment::new(0.2, 0.9, 0.6, 0.1)], &[]);
    check_against_oracle(&c.ops, &c.coarse, &c.fmesh, &c.index, 1);
    check_against_oracle(&c.ops, &c.coarse, &c.fmesh, &c.index, 2);
}

#[test]
fn strip_single_continuum_matches_dense_kkt() {
    let fine = FineGrid::new(4, 2, Rect::unit()).unwrap();
    let coarse = CoarseGrid::new(&fine, 2, 1).unwrap();
    let fmesh = FractureMesh::empty();
    let index = ContinuumIndex::new(&coarse, &fmesh, 1);
    assert_eq!(index.num_dofs(), 2);
    let props = ContinuumProperties {
        matrix: vec![MatrixContinuum {
            k: vec![1.0, 2.0, 4.0, 1.0, 3.0, 1.0, 0.5, 2.0],
            c: 1.0,
            sigma_fracture: vec![1.0; 8],
        }],
        matrix_exchange: vec![],
        fracture: vec![],
        cf: 1.0,
    };
    let ops = FineOperators::assemble(&fine, &fmesh, &props, &[]).unwrap();
    let set = check_against_oracle(&ops, &coarse, &fmesh, &index, 1);
    // A region covering the whole strip reproduces constants.
    let sum: Vec<f64> = (0..8).map(|i| set.bases.iter().map(|b| b.values[i]).sum()).collect();
    assert!(sum.iter().all(|v| (v - 1.0).abs() < 1e-12), "{sum:?}");
}

#[test]
fn upscaled_operator_matches_dense_triple_product() {
    let c = case(8, 2, vec![Segment::new(0.1, 0.2, 0.85, 0.7)], &[]);
    let set = build_bases(&c.ops, &c.coarse, &c.fmesh, &c.index, 1).unwrap();
    let proj = assemble_projection(&set, c.index.num_dofs(), c.ops.layout.num_dofs()).unwrap();
    let r = proj.r.to_dense();
    let a = c.ops.spatial.to_dense();
    let oracle = dense_mul(&dense_mul(&r, &a), &transpose(&r));
    for exchange in [ExchangeVariant::Full] {
        let opts = UpscaleOptions { exchange, zero_row_sum: false };
        let model = assemble_upscaled(&proj, &c.ops, &c.coarse, &c.index, opts).unwrap();
        let got = model.a_bar.to_dense();
        let scale = oracle.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        for (gr, or) in got.iter().zip(&oracle) {
            assert!(max_abs_diff(gr, or) <= 1e-10 * scale);
        }
    }
}

#[test]
fn diagonal_variant_uses_cell_local_exchange() {
    let c = case(8, 2, vec![Segment::new(0.1, 0.2, 0.85, 0.7)], &[]);
    let set = build_bases(&c.ops, &c.coarse, &c.fmesh, &c.index, 1).unwrap();
    let proj = assemble_projection(&set, c.index.num_dofs(), c.ops.layout.num_dofs()).unwrap();
    let opts = UpscaleOptions { exchange: ExchangeVariant::Diagonal, zero_row_sum: false };
    let model = assemble_upscaled(&proj, &c.ops, &c.coarse, &c.index, opts).unwrap();
    let r = proj.r.to_dense();
    let stiff = c.ops.stiffness.to_dense();
    let rar = dense_mul(&dense_mul(&r, &stiff), &transpose(&r));
    let q = model.q_bar.to_dense();
    // Q̄ only couples continua of the same coarse cell and has zero row sums.
    for (i, row) in q.iter().enumerate() {
        assert!(row.iter().sum::<f64>().abs() < 1e-15);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                assert_eq!(c.index.cell_of_dof(i), c.index.cell_of_dof(j));
            }
        }
    }
    let got = model.a_bar.to_dense();
    let scale = rar.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..got.len() {
        for j in 0..got.len() {
            assert!((got[i][j] - rar[i][j] - q[i][j]).abs() <= 1e-10 * scale);
        }
    }
}
