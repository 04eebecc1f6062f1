use std::collections::BTreeMap;
use std::ops::Range;

use super::{FineGrid, FractureMesh, GeometryError};

/// Uniform coarse grid nested in a [`FineGrid`]; coarse cells are numbered
/// row-major like the fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    mx: usize,
    my: usize,
    /// Fine cells per coarse cell along x and y.
    rx: usize,
    ry: usize,
    fine_nx: usize,
    fine_ny: usize,
    cell_area: f64,
    fine_cell_area: f64,
}

impl CoarseGrid {
    pub fn new(fine: &FineGrid, mx: usize, my: usize) -> Result<Self, GeometryError> {
        if mx == 0 || my == 0 {
            return Err(GeometryError::InvalidConfig(format!(
                "coarse cell counts must be positive, got {mx} x {my}"
            )));
        }
        if fine.nx() % mx != 0 || fine.ny() % my != 0 {
            return Err(GeometryError::InvalidConfig(format!(
                "fine grid {}x{} is not nested in coarse grid {mx}x{my}",
                fine.nx(),
                fine.ny()
            )));
        }
        let rx = fine.nx() / mx;
        let ry = fine.ny() / my;
        Ok(Self {
            mx,
            my,
            rx,
            ry,
            fine_nx: fine.nx(),
            fine_ny: fine.ny(),
            cell_area: fine.cell_area() * (rx * ry) as f64,
            fine_cell_area: fine.cell_area(),
        })
    }

    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn num_cells(&self) -> usize {
        self.mx * self.my
    }

    pub fn fine_per_coarse(&self) -> (usize, usize) {
        (self.rx, self.ry)
    }

    pub fn num_fine_cells(&self) -> usize {
        self.fine_nx * self.fine_ny
    }

    /// `|K_i|`
    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn fine_cell_area(&self) -> f64 {
        self.fine_cell_area
    }

    pub fn cell_ij(&self, id: usize) -> (usize, usize) {
        (id % self.mx, id / self.mx)
    }

    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        j * self.mx + i
    }

    pub fn coarse_of(&self, fine_cell: usize) -> usize {
        let (i, j) = (fine_cell % self.fine_nx, fine_cell / self.fine_nx);
        self.cell_id(i / self.rx, j / self.ry)
    }

    /// Fine cells of coarse cell `id` in ascending order.
    pub fn fine_cells(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let (ci, cj) = self.cell_ij(id);
        let (rx, ry, nx) = (self.rx, self.ry, self.fine_nx);
        (cj * ry..(cj + 1) * ry)
            .flat_map(move |j| (ci * rx..(ci + 1) * rx).map(move |i| j * nx + i))
    }
}

/// The fracture `γ_j^(m)`: cells of network `m` hosted inside coarse cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractureContinuum {
    pub coarse_cell: usize,
    pub network: usize,
    /// Fracture cell ids in ascending order.
    pub cells: Vec<usize>,
    /// Lengths `|ι_l|` matching `cells`.
    pub lengths: Vec<f64>,
    /// `|γ_j^(m)|`
    pub length: f64,
}

/// Enumeration of the coarse degrees of freedom.
///
/// Layout: all coarse cells for matrix continuum 0, then for continuum 1, ...,
/// then every fracture continuum ordered by coarse cell (row-major) and
/// network id.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumIndex {
    n_matrix: usize,
    n_coarse: usize,
    continua: Vec<FractureContinuum>,
    /// Range into `continua` per coarse cell.
    per_cell: Vec<Range<usize>>,
    /// Fracture continuum of every fracture cell.
    continuum_of_cell: Vec<usize>,
}

impl ContinuumIndex {
    pub fn new(coarse: &CoarseGrid, fmesh: &FractureMesh, n_matrix: usize) -> Self {
        let mut grouped: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (l, c) in fmesh.cells().iter().enumerate() {
            grouped.entry((coarse.coarse_of(c.host), c.network)).or_default().push(l);
        }
        let mut continua = Vec::with_capacity(grouped.len());
        let mut per_cell = vec![0..0; coarse.num_cells()];
        let mut continuum_of_cell = vec![0; fmesh.num_cells()];
        for ((cell, network), cells) in grouped {
            let idx = continua.len();
            if per_cell[cell].is_empty() {
                per_cell[cell] = idx..idx;
            }
            per_cell[cell].end = idx + 1;
            for &l in &cells {
                continuum_of_cell[l] = idx;
            }
            let lengths: Vec<f64> = cells.iter().map(|&l| fmesh.cells()[l].length).collect();
            continua.push(FractureContinuum {
                coarse_cell: cell,
                network,
                length: lengths.iter().sum(),
                cells,
                lengths,
            });
        }
        Self { n_matrix, n_coarse: coarse.num_cells(), continua, per_cell, continuum_of_cell }
    }

    pub fn n_matrix(&self) -> usize {
        self.n_matrix
    }

    pub fn num_coarse_cells(&self) -> usize {
        self.n_coarse
    }

    /// `DOF_c = n_matrix * N_c + Σ_j L_j`
    pub fn num_dofs(&self) -> usize {
        self.n_matrix * self.n_coarse + self.continua.len()
    }

    pub fn num_fracture_continua(&self) -> usize {
        self.continua.len()
    }

    pub fn continua(&self) -> &[FractureContinuum] {
        &self.continua
    }

    /// `L_j`
    pub fn continua_in(&self, cell: usize) -> Range<usize> {
        self.per_cell[cell].clone()
    }

    pub fn matrix_dof(&self, alpha: usize, cell: usize) -> usize {
        debug_assert!(alpha < self.n_matrix);
        alpha * self.n_coarse + cell
    }

    pub fn fracture_dof(&self, continuum: usize) -> usize {
        self.n_matrix * self.n_coarse + continuum
    }

    pub fn continuum_of_fracture_cell(&self, l: usize) -> usize {
        self.continuum_of_cell[l]
    }

    /// Coarse DOFs owned by coarse cell `cell`: its matrix continua followed by
    /// its fracture continua.
    pub fn dofs_of_cell(&self, cell: usize) -> Vec<usize> {
        (0..self.n_matrix)
            .map(|a| self.matrix_dof(a, cell))
            .chain(self.continua_in(cell).map(|c| self.fracture_dof(c)))
            .collect()
    }

    /// Coarse cell that owns a coarse DOF.
    pub fn cell_of_dof(&self, dof: usize) -> usize {
        let split = self.n_matrix * self.n_coarse;
        if dof < split {
            dof % self.n_coarse
        } else {
            self.continua[dof - split].coarse_cell
        }
    }

    /// Matrix continuum `Some(alpha)` or `None` for a fracture DOF.
    pub fn matrix_continuum_of_dof(&self, dof: usize) -> Option<usize> {
        let split = self.n_matrix * self.n_coarse;
        (dof < split).then(|| dof / self.n_coarse)
    }
}

/// `K_i^s`: coarse cell `root` extended by `layers` coarse layers, clipped to
/// the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OversampleRegion {
    pub root: usize,
    pub layers: usize,
    /// Inclusive coarse index ranges `(i0, i1, j0, j1)`.
    pub bounds: (usize, usize, usize, usize),
    /// Member coarse cells, row-major.
    pub coarse_cells: Vec<usize>,
    /// Member fine cells, ascending.
    pub fine_cells: Vec<usize>,
    /// Member fracture cells, ascending.
    pub fracture_cells: Vec<usize>,
    /// Local-to-global fine DOF map, ascending: matrix continua blocks then
    /// the fracture block.
    pub fine_dofs: Vec<usize>,
    /// Coarse DOFs whose constraints live in the region: matrix continua
    /// blocks then fracture continua.
    pub coarse_dofs: Vec<usize>,
}

impl OversampleRegion {
    pub fn new(
        coarse: &CoarseGrid,
        fmesh: &FractureMesh,
        index: &ContinuumIndex,
        root: usize,
        layers: usize,
    ) -> Self {
        let (ci, cj) = coarse.cell_ij(root);
        let i0 = ci.saturating_sub(layers);
        let j0 = cj.saturating_sub(layers);
        let i1 = (ci + layers).min(coarse.mx() - 1);
        let j1 = (cj + layers).min(coarse.my() - 1);
        let coarse_cells: Vec<usize> = (j0..=j1)
            .flat_map(|j| (i0..=i1).map(move |i| (i, j)))
            .map(|(i, j)| coarse.cell_id(i, j))
            .collect();

        let mut fine_cells: Vec<usize> =
            coarse_cells.iter().flat_map(|&k| coarse.fine_cells(k)).collect();
        fine_cells.sort_unstable();

        let mut fracture_cells: Vec<usize> = coarse_cells
            .iter()
            .flat_map(|&k| index.continua_in(k))
            .flat_map(|c| index.continua()[c].cells.iter().copied())
            .collect();
        fracture_cells.sort_unstable();
        debug_assert!(fracture_cells
            .iter()
            .all(|&l| fine_cells.binary_search(&fmesh.host(l)).is_ok()));

        let n_fine = coarse.num_fine_cells();
        let n_matrix = index.n_matrix();
        let mut fine_dofs = Vec::with_capacity(n_matrix * fine_cells.len() + fracture_cells.len());
        for a in 0..n_matrix {
            fine_dofs.extend(fine_cells.iter().map(|&c| a * n_fine + c));
        }
        fine_dofs.extend(fracture_cells.iter().map(|&l| n_matrix * n_fine + l));

        let mut coarse_dofs = Vec::new();
        for a in 0..n_matrix {
            coarse_dofs.extend(coarse_cells.iter().map(|&k| index.matrix_dof(a, k)));
        }
        let mut frac: Vec<usize> = coarse_cells
            .iter()
            .flat_map(|&k| index.continua_in(k))
            .map(|c| index.fracture_dof(c))
            .collect();
        frac.sort_unstable();
        coarse_dofs.extend(frac);

        Self {
            root,
            layers,
            bounds: (i0, i1, j0, j1),
            coarse_cells,
            fine_cells,
            fracture_cells,
            fine_dofs,
            coarse_dofs,
        }
    }

    pub fn num_fine_dofs(&self) -> usize {
        self.fine_dofs.len()
    }

    pub fn local_fine_dof(&self, global: usize) -> Option<usize> {
        self.fine_dofs.binary_search(&global).ok()
    }

    pub fn local_coarse_dof(&self, global: usize) -> Option<usize> {
        self.coarse_dofs.iter().position(|&d| d == global)
    }

    pub fn contains_coarse(&self, cell: usize) -> bool {
        self.coarse_cells.binary_search(&cell).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mesh_fractures, FractureGeometry, Rect, Segment};

    fn grids(n: usize, m: usize) -> (FineGrid, CoarseGrid) {
        let f = FineGrid::new(n, n, Rect::unit()).unwrap();
        let c = CoarseGrid::new(&f, m, m).unwrap();
        (f, c)
    }

    #[test]
    fn coarse_requires_nesting() {
        let f = FineGrid::new(120, 120, Rect::unit()).unwrap();
        assert!(CoarseGrid::new(&f, 20, 20).is_ok());
        assert!(CoarseGrid::new(&f, 40, 40).is_ok());
        assert!(CoarseGrid::new(&f, 7, 20).is_err());
        assert!(CoarseGrid::new(&f, 0, 20).is_err());
    }

    #[test]
    fn coarse_cells_partition_fine_cells() {
        let (f, c) = grids(12, 3);
        let mut seen = vec![0usize; f.num_cells()];
        for k in 0..c.num_cells() {
            for fc in c.fine_cells(k) {
                seen[fc] += 1;
                assert_eq!(c.coarse_of(fc), k);
            }
        }
        assert!(seen.iter().all(|&n| n == 1));
        assert!((c.cell_area() * c.num_cells() as f64 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dof_count_without_fractures() {
        let (_, c) = grids(4, 2);
        let idx = ContinuumIndex::new(&c, &FractureMesh::empty(), 2);
        assert_eq!(idx.num_dofs(), 8);
    }

    #[test]
    fn dof_count_formula() {
        let (f, c) = grids(12, 4);
        let geom = FractureGeometry::new(vec![
            Segment::new(0.05, 0.3, 0.95, 0.3),
            Segment::new(0.4, 0.05, 0.4, 0.95),
            Segment::new(0.7, 0.7, 0.9, 0.9),
        ])
        .unwrap();
        let fm = mesh_fractures(&f, &geom).unwrap();
        let idx = ContinuumIndex::new(&c, &fm, 2);
        let total: usize = (0..c.num_cells()).map(|k| idx.continua_in(k).len()).sum();
        assert_eq!(idx.num_dofs(), 2 * c.num_cells() + total);
        // Every fracture cell appears in exactly one continuum.
        let mut count = vec![0; fm.num_cells()];
        for cont in idx.continua() {
            for &l in &cont.cells {
                count[l] += 1;
                assert_eq!(c.coarse_of(fm.host(l)), cont.coarse_cell);
            }
        }
        assert!(count.iter().all(|&n| n == 1));
        for (l, _) in fm.cells().iter().enumerate() {
            let cont = &idx.continua()[idx.continuum_of_fracture_cell(l)];
            assert!(cont.cells.contains(&l));
        }
    }

    #[test]
    fn reference_dof_formula_values() {
        assert_eq!(2 * 400 + 193, 993);
        assert_eq!(2 * 1600 + 365, 3565);
    }

    #[test]
    fn oversample_shapes() {
        let (f, c) = grids(40, 20);
        let fm = FractureMesh::empty();
        let idx = ContinuumIndex::new(&c, &fm, 2);
        let interior = OversampleRegion::new(&c, &fm, &idx, c.cell_id(10, 10), 2);
        assert_eq!(interior.coarse_cells.len(), 25);
        let corner = OversampleRegion::new(&c, &fm, &idx, 0, 2);
        assert_eq!(corner.coarse_cells.len(), 9);
        assert_eq!(corner.fine_cells.len(), 9 * 4);
        let all = OversampleRegion::new(&c, &fm, &idx, c.cell_id(3, 17), 25);
        assert_eq!(all.coarse_cells.len(), 400);
        assert_eq!(all.fine_cells.len(), f.num_cells());
        assert_eq!(all.coarse_dofs.len(), idx.num_dofs());
    }

    #[test]
    fn oversample_nesting_is_monotone() {
        let (f, c) = grids(24, 6);
        let geom = FractureGeometry::new(vec![Segment::new(0.1, 0.2, 0.8, 0.9)]).unwrap();
        let fm = mesh_fractures(&f, &geom).unwrap();
        let idx = ContinuumIndex::new(&c, &fm, 2);
        for root in [0, 7, 14, 35] {
            let mut prev = OversampleRegion::new(&c, &fm, &idx, root, 1);
            assert!(prev.contains_coarse(root));
            for s in 2..6 {
                let next = OversampleRegion::new(&c, &fm, &idx, root, s);
                assert!(prev.fine_dofs.iter().all(|d| next.local_fine_dof(*d).is_some()));
                assert!(prev.coarse_dofs.iter().all(|d| next.coarse_dofs.contains(d)));
                prev = next;
            }
        }
    }
}
