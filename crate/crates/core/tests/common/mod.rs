#![allow(dead_code)]

use nlmc_core::fine_system::{
    Continuum, ContinuumProperties, ExchangeRule, FineOperators, FractureProperties, Source,
};
use nlmc_core::geometry::{
    mesh_fractures, CoarseGrid, ContinuumIndex, FineGrid, FractureGeometry, FractureMesh, Rect,
    Segment,
};

pub type Dense = Vec<Vec<f64>>;

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Dense = a.iter().zip(b).map(|(row, &bi)| row.iter().copied().chain([bi]).collect()).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, p);
        assert!(m[k][k] != 0.0, "dense oracle hit a singular pivot");
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (m[k][n] - s) / m[k][k];
    }
    x
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let v = a[i][l];
            if v != 0.0 {
                for j in 0..m {
                    out[i][j] += v * b[l][j];
                }
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub struct Case {
    pub fine: FineGrid,
    pub coarse: CoarseGrid,
    pub fmesh: FractureMesh,
    pub index: ContinuumIndex,
    pub ops: FineOperators,
}

pub fn reference_properties(n: usize, networks: usize) -> ContinuumProperties {
    ContinuumProperties::triple(
        vec![0.5e-6; n],
        vec![1e-5; n],
        1e-5,
        1e-5,
        vec![FractureProperties { kf: 1.0, bf: 1.0 }; networks],
        1e-6,
        ExchangeRule::Permeability,
    )
}

/// Triple-continuum case on the unit square with the reference coefficients.
pub fn case(n: usize, m: usize, segments: Vec<Segment>, sources: &[Source]) -> Case {
    let fine = FineGrid::new(n, n, Rect::unit()).unwrap();
    let coarse = CoarseGrid::new(&fine, m, m).unwrap();
    let fmesh = mesh_fractures(&fine, &FractureGeometry::new(segments).unwrap()).unwrap();
    let index = ContinuumIndex::new(&coarse, &fmesh, 2);
    let props = reference_properties(fine.num_cells(), fmesh.num_networks());
    let ops = FineOperators::assemble(&fine, &fmesh, &props, sources).unwrap();
    Case { fine, coarse, fmesh, index, ops }
}

pub fn balanced_fracture_sources(a: Rect, b: Rect, q: f64) -> Vec<Source> {
    vec![
        Source { rect: a, continuum: Continuum::Fracture, rate: q },
        Source { rect: b, continuum: Continuum::Fracture, rate: -q },
    ]
}
