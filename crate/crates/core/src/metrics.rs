//! Relative errors between fine reference and upscaled solutions, and the
//! CSV error table.

use std::io::{self, Write};
use std::time::Duration;

use crate::fine_system::FineLayout;
use crate::geometry::{CoarseGrid, ContinuumIndex, FineGrid, FractureMesh};
use crate::nlmc::aggregation_matrix;

/// Time indices at which errors are tabulated.
pub const REPORT_STEPS: [usize; 5] = [5, 15, 25, 35, 50];

/// Which continuum a row of the error table refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContinuumLabel {
    Matrix(usize),
    Fracture,
}

impl std::fmt::Display for ContinuumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContinuumLabel::Matrix(a) => write!(f, "{}", a + 1),
            ContinuumLabel::Fracture => f.write_str("f"),
        }
    }
}

/// `p_C`: mean of a fine vector over every coarse continuum (area-weighted
/// for matrix continua, length-weighted for fracture continua).
pub fn coarse_average(p_fine: &[f64], coarse: &CoarseGrid, index: &ContinuumIndex) -> Vec<f64> {
    aggregation_matrix(coarse, index, true).matvec(p_fine)
}

/// `‖a − b‖ / ‖a‖`, `None` when the reference norm vanishes.
fn relative(diff2: f64, ref2: f64) -> Option<f64> {
    (ref2 > 0.0).then(|| (diff2 / ref2).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoarseWeighting {
    /// `Σ_K (p_C^K − p̄^K)²`
    #[default]
    Unweighted,
    /// Each term weighted by `|K|` (or `|γ|` for fracture continua).
    Volume,
}

/// `e^C` per continuum, matrix continua first, fracture continua pooled last.
pub fn error_coarse(
    p_c: &[f64],
    p_bar: &[f64],
    coarse: &CoarseGrid,
    index: &ContinuumIndex,
    weighting: CoarseWeighting,
) -> Vec<(ContinuumLabel, Option<f64>)> {
    assert_eq!(p_c.len(), index.num_dofs());
    assert_eq!(p_bar.len(), index.num_dofs());
    let n = index.n_matrix() + 1;
    let mut diff = vec![0.0; n];
    let mut norm = vec![0.0; n];
    for dof in 0..index.num_dofs() {
        let (slot, w) = match index.matrix_continuum_of_dof(dof) {
            Some(a) => (a, coarse.cell_area()),
            None => (n - 1, index.continua()[dof - index.n_matrix() * index.num_coarse_cells()].length),
        };
        let w = if weighting == CoarseWeighting::Volume { w } else { 1.0 };
        diff[slot] += w * (p_c[dof] - p_bar[dof]).powi(2);
        norm[slot] += w * p_c[dof].powi(2);
    }
    labels(index.n_matrix()).zip(diff.iter().zip(&norm).map(|(&d, &r)| relative(d, r))).collect()
}

fn labels(n_matrix: usize) -> impl Iterator<Item = ContinuumLabel> {
    (0..n_matrix).map(ContinuumLabel::Matrix).chain(std::iter::once(ContinuumLabel::Fracture))
}

/// Cell measure of every fine DOF: `|ς_i|` for matrix cells, `|ι_l|` for
/// fracture cells.
pub fn fine_measure(grid: &FineGrid, fmesh: &FractureMesh, n_matrix: usize) -> Vec<f64> {
    let mut m = vec![grid.cell_area(); n_matrix * grid.num_cells()];
    m.extend(fmesh.cells().iter().map(|c| c.length));
    m
}

/// `e^F` per continuum with the volume-weighted discrete L² norm.
pub fn error_fine(
    p_ref: &[f64],
    p_approx: &[f64],
    layout: &FineLayout,
    measure: &[f64],
) -> Vec<(ContinuumLabel, Option<f64>)> {
    assert_eq!(p_ref.len(), layout.num_dofs());
    assert_eq!(p_approx.len(), layout.num_dofs());
    let ranges = (0..layout.n_matrix).map(|a| layout.matrix_range(a)).chain(std::iter::once(layout.fracture_range()));
    labels(layout.n_matrix)
        .zip(ranges)
        .map(|(label, r)| {
            let (mut d, mut n) = (0.0, 0.0);
            for i in r {
                d += measure[i] * (p_ref[i] - p_approx[i]).powi(2);
                n += measure[i] * p_ref[i].powi(2);
            }
            (label, relative(d, n))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub m: usize,
    pub s: usize,
    pub continuum: ContinuumLabel,
    pub e_c: Option<f64>,
    pub e_f: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub fine_solve: Duration,
    pub basis_build: Duration,
    pub coarse_solve: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub dof_fine: usize,
    pub dof_coarse: usize,
    pub rows: Vec<ErrorRow>,
    pub timings: Timings,
}

impl ErrorReport {
    pub fn get(&self, m: usize, s: usize, continuum: ContinuumLabel) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.m == m && r.s == s && r.continuum == continuum)
    }
}

fn fmt_err(e: Option<f64>) -> String {
    e.map_or_else(|| "undefined".to_string(), |v| format!("{v:.10e}"))
}

/// Writes `m,s,continuum,e_C,e_F` rows.
pub fn write_error_csv<W: Write>(rows: &[ErrorRow], mut w: W) -> io::Result<()> {
    writeln!(w, "m,s,continuum,e_C,e_F")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.m, r.s, r.continuum, fmt_err(r.e_c), fmt_err(r.e_f))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mesh_fractures, FractureGeometry, Rect, Segment};

    fn setup(n: usize, mx: usize, my: usize) -> (FineGrid, CoarseGrid, ContinuumIndex) {
        let f = FineGrid::new(n, n, Rect::unit()).unwrap();
        let c = CoarseGrid::new(&f, mx, my).unwrap();
        let idx = ContinuumIndex::new(&c, &FractureMesh::empty(), 1);
        (f, c, idx)
    }

    #[test]
    fn averages_of_simple_fields() {
        let (f, c, idx) = setup(8, 2, 1);
        let x: Vec<f64> = (0..f.num_cells()).map(|i| f.cell_center(i).x).collect();
        let avg = coarse_average(&x, &c, &idx);
        assert!((avg[0] - 0.25).abs() < 1e-14 && (avg[1] - 0.75).abs() < 1e-14);
        let avg = coarse_average(&vec![3.5; 64], &c, &idx);
        assert!(avg.iter().all(|v| (v - 3.5).abs() < 1e-14));
        let ind: Vec<f64> = (0..64).map(|i| if c.coarse_of(i) == 1 { 1.0 } else { 0.0 }).collect();
        assert_eq!(coarse_average(&ind, &c, &idx), vec![0.0, 1.0]);
    }

    #[test]
    fn fracture_average_is_length_weighted() {
        let f = FineGrid::new(4, 4, Rect::unit()).unwrap();
        let c = CoarseGrid::new(&f, 1, 1).unwrap();
        let fm = mesh_fractures(&f, &FractureGeometry::new(vec![Segment::new(0.1, 0.1, 0.4, 0.1)]).unwrap()).unwrap();
        assert_eq!(fm.num_cells(), 2);
        let idx = ContinuumIndex::new(&c, &fm, 1);
        let l0 = fm.cells()[0].length;
        let l1 = fm.cells()[1].length;
        let mut p = vec![0.0; 18];
        p[16] = 1.0;
        p[17] = 4.0;
        let avg = coarse_average(&p, &c, &idx);
        assert!((avg[1] - (l0 + 4.0 * l1) / (l0 + l1)).abs() < 1e-14);
    }

    #[test]
    fn coarse_error_values() {
        let (_, c, idx) = setup(2, 2, 1);
        let e = error_coarse(&[1.0, 3.0], &[1.0, 4.0], &c, &idx, CoarseWeighting::Unweighted);
        assert!((e[0].1.unwrap() - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(e[1], (ContinuumLabel::Fracture, None));
        let e = error_coarse(&[1.0, 3.0], &[2.0, 6.0], &c, &idx, CoarseWeighting::Unweighted);
        assert!((e[0].1.unwrap() - 1.0).abs() < 1e-15);
        let e = error_coarse(&[1.0, 3.0], &[1.0, 3.0], &c, &idx, CoarseWeighting::Volume);
        assert_eq!(e[0].1, Some(0.0));
        let e = error_coarse(&[0.0, 0.0], &[1.0, 3.0], &c, &idx, CoarseWeighting::Unweighted);
        assert_eq!(e[0].1, None);
    }

    #[test]
    fn fine_error_perturbation_ratio() {
        let layout = FineLayout { n_matrix: 1, n_cells: 4, n_fracture: 0 };
        let p = vec![1.0; 4];
        let q = vec![1.1, 0.9, 1.1, 0.9];
        let e = error_fine(&p, &q, &layout, &[0.25; 4]);
        assert!((e[0].1.unwrap() - 0.1).abs() < 1e-14);
        assert_eq!(e[1].1, None);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            ErrorRow { m: 5, s: 1, continuum: ContinuumLabel::Matrix(0), e_c: Some(0.5), e_f: None },
            ErrorRow { m: 5, s: 1, continuum: ContinuumLabel::Fracture, e_c: Some(0.0), e_f: Some(1e-3) },
        ];
        let mut out = Vec::new();
        write_error_csv(&rows, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "m,s,continuum,e_C,e_F\n5,1,1,5.0000000000e-1,undefined\n5,1,f,0.0000000000e0,1.0000000000e-3\n"
        );
    }
}
