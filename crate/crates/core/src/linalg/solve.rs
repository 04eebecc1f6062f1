use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::linalg::{LltError, LuError};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};

use super::{CsrMatrix, LinalgError};

/// Relative residual bound accepted by [`DirectSolver::solve`]:
/// `‖Ax − b‖∞ ≤ RESIDUAL_TOL · (‖b‖∞ + ‖A‖∞ ‖x‖∞)`.
pub const RESIDUAL_TOL: f64 = 1e-10;

fn to_faer(m: &CsrMatrix) -> SparseColMat<usize, f64> {
    // The CSR arrays of Aᵀ are the CSC arrays of A.
    let t = m.transpose();
    let symbolic = SymbolicSparseColMat::new_checked(
        m.nrows(),
        m.ncols(),
        t.indptr().to_vec(),
        None,
        t.indices().to_vec(),
    );
    SparseColMat::new(symbolic, t.data().to_vec())
}

enum Factor {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A sparse factorization reusable for any number of right-hand sides.
///
/// Holds no interior mutability, so one solver can serve many threads.
pub struct DirectSolver {
    factor: Factor,
    matrix: CsrMatrix,
    norm: f64,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.factor {
            Factor::Cholesky(_) => "cholesky",
            Factor::Lu(_) => "lu",
        };
        f.debug_struct("DirectSolver").field("kind", &kind).field("n", &self.matrix.nrows()).finish()
    }
}

impl DirectSolver {
    /// Sparse Cholesky of a symmetric positive definite matrix. Falls back to
    /// pivoted LU if a non-positive pivot shows up.
    pub fn spd(m: &CsrMatrix) -> Result<Self, LinalgError> {
        check_square(m)?;
        match to_faer(m).sp_cholesky(Side::Lower) {
            Ok(llt) => Ok(Self::wrap(Factor::Cholesky(llt), m)),
            Err(LltError::Numeric(_)) => Self::lu(m),
            Err(LltError::Generic(e)) => Err(LinalgError::Backend(format!("{e:?}"))),
        }
    }

    /// Sparse LU with partial pivoting.
    pub fn lu(m: &CsrMatrix) -> Result<Self, LinalgError> {
        check_square(m)?;
        match to_faer(m).sp_lu() {
            Ok(lu) => Ok(Self::wrap(Factor::Lu(lu), m)),
            Err(LuError::SymbolicSingular { index }) => Err(LinalgError::Singular { pivot: index }),
            Err(LuError::Generic(e)) => Err(LinalgError::Backend(format!("{e:?}"))),
        }
    }

    fn wrap(factor: Factor, m: &CsrMatrix) -> Self {
        Self { factor, norm: m.norm_inf(), matrix: m.clone() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.factor, Factor::Cholesky(_))
    }

    fn raw_solve(&self, cols: &mut [f64], ncols: usize) {
        let n = self.dim();
        let mat = MatMut::from_column_major_slice_mut(cols, n, ncols);
        match &self.factor {
            Factor::Cholesky(f) => f.solve_in_place(mat),
            Factor::Lu(f) => f.solve_in_place(mat),
        }
    }

    /// Plain forward/back substitution, without the residual check and
    /// refinement of [`solve`](Self::solve).
    pub fn solve_unchecked(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim(), "right-hand side length");
        let mut x = b.to_vec();
        self.raw_solve(&mut x, 1);
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Ok(self.solve_many(&[b.to_vec()])?.pop().unwrap())
    }

    /// Solves for several right-hand sides with the one factorization. Each
    /// solution gets one step of iterative refinement if its residual misses
    /// [`RESIDUAL_TOL`].
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LinalgError> {
        let n = self.dim();
        if rhs.iter().any(|b| b.len() != n) {
            return Err(LinalgError::DimensionMismatch {
                op: "solve",
                left: (n, n),
                right: (rhs.iter().map(|b| b.len()).find(|&l| l != n).unwrap_or(0), 1),
            });
        }
        if rhs.is_empty() {
            return Ok(Vec::new());
        }
        let mut buf: Vec<f64> = rhs.iter().flatten().copied().collect();
        self.raw_solve(&mut buf, rhs.len());
        let mut out: Vec<Vec<f64>> = buf.chunks(n).map(|c| c.to_vec()).collect();
        for (x, b) in out.iter_mut().zip(rhs) {
            if let Some(p) = x.iter().position(|v| !v.is_finite()) {
                return Err(LinalgError::Singular { pivot: p });
            }
            let (mut res, mut ok) = self.residual(x, b);
            if !ok {
                let mut corr: Vec<f64> = res.iter().map(|r| -r).collect();
                self.raw_solve(&mut corr, 1);
                for (xi, ci) in x.iter_mut().zip(&corr) {
                    *xi += ci;
                }
                (res, ok) = self.residual(x, b);
            }
            if !ok {
                let r = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                return Err(LinalgError::Inaccurate { residual: r, bound: self.bound(x, b) });
            }
        }
        Ok(out)
    }

    fn bound(&self, x: &[f64], b: &[f64]) -> f64 {
        let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        RESIDUAL_TOL * (bn + self.norm * xn)
    }

    /// Returns `Ax − b` and whether it meets the residual bound.
    fn residual(&self, x: &[f64], b: &[f64]) -> (Vec<f64>, bool) {
        let mut r = self.matrix.matvec(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ok = rn.is_finite() && rn <= self.bound(x, b);
        (r, ok)
    }
}

/// Increment `δ = p − p̌` of the implicit step `M (p − p̌)/τ + A p = F`,
/// for `A` with zero row sums applied in flux form. `solver` must factor
/// `M/τ + A`. One refinement against the flux-form residual keeps `1ᵀMp`
/// balanced to rounding in the increment rather than in `p`.
pub fn conservative_increment(
    solver: &DirectSolver,
    a: &CsrMatrix,
    mass: &[f64],
    tau: f64,
    source: &[f64],
    prev: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    let a_p = a.flux_matvec(prev);
    let rhs: Vec<f64> = source.iter().zip(&a_p).map(|(f, v)| f - v).collect();
    let mut delta = solver.solve_unchecked(&rhs);
    let a_d = a.flux_matvec(&delta);
    let res: Vec<f64> = (0..delta.len()).map(|i| rhs[i] - mass[i] * delta[i] / tau - a_d[i]).collect();
    for (d, c) in delta.iter_mut().zip(solver.solve_unchecked(&res)) {
        *d += c;
    }
    if let Some(pivot) = delta.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::Singular { pivot });
    }
    Ok(delta)
}

fn check_square(m: &CsrMatrix) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::DimensionMismatch {
            op: "factorize",
            left: (m.nrows(), m.ncols()),
            right: (m.ncols(), m.nrows()),
        });
    }
    Ok(())
}

/// A linear system in one of the two layouts the solvers need.
#[derive(Debug, Clone)]
pub enum BlockSystem {
    /// Plain square system; `spd` selects Cholesky.
    Square { matrix: CsrMatrix, rhs: Vec<Vec<f64>>, spd: bool },
    /// `[[A, Bᵀ], [B, 0]] (x, μ) = (f, g)` with one `(f, g)` pair per
    /// right-hand side.
    Saddle { a: CsrMatrix, b: CsrMatrix, rhs: Vec<(Vec<f64>, Vec<f64>)> },
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        match self {
            BlockSystem::Square { matrix, .. } => matrix.nrows(),
            BlockSystem::Saddle { a, b, .. } => a.nrows() + b.nrows(),
        }
    }
}

/// Assembles `[[A, s·Bᵀ], [s·B, 0]]`.
pub fn saddle_matrix(a: &CsrMatrix, b: &CsrMatrix, s: f64) -> Result<CsrMatrix, LinalgError> {
    if a.nrows() != a.ncols() || b.ncols() != a.ncols() {
        return Err(LinalgError::DimensionMismatch {
            op: "saddle",
            left: (a.nrows(), a.ncols()),
            right: (b.nrows(), b.ncols()),
        });
    }
    let n = a.nrows();
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + 2 * b.nnz());
    trip.extend(a.triplets());
    for (r, c, v) in b.triplets() {
        trip.push((n + r, c, s * v));
        trip.push((c, n + r, s * v));
    }
    Ok(CsrMatrix::from_triplets(n + b.nrows(), n + b.nrows(), &trip).with_symmetric(a.is_flagged_symmetric()))
}

/// Factorization of `[[A, Bᵀ], [B, 0]]` after symmetric equilibration.
///
/// `A` is scaled to unit diagonal by `D = diag(|a_ii|^(-1/2))` and each
/// constraint row of `B D` to unit max norm, so continua whose coefficients
/// differ by many orders of magnitude are resolved to the same relative
/// accuracy.
#[derive(Debug)]
pub struct SaddleSolver {
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    solver: DirectSolver,
}

impl SaddleSolver {
    pub fn new(a: &CsrMatrix, b: &CsrMatrix) -> Result<Self, LinalgError> {
        let col_scale: Vec<f64> = a
            .diag()
            .iter()
            .map(|&d| if d != 0.0 && d.is_finite() { 1.0 / d.abs().sqrt() } else { 1.0 })
            .collect();
        if b.ncols() != col_scale.len() {
            return Err(LinalgError::DimensionMismatch {
                op: "saddle",
                left: (a.nrows(), a.ncols()),
                right: (b.nrows(), b.ncols()),
            });
        }
        let ones = vec![1.0; b.nrows()];
        let bd = b.scaled(&ones, &col_scale);
        let row_scale: Vec<f64> = (0..bd.nrows())
            .map(|r| {
                let m = bd.row(r).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m > 0.0 { 1.0 / m } else { 1.0 }
            })
            .collect();
        let a_hat = a.scaled(&col_scale, &col_scale).with_symmetric(a.is_flagged_symmetric());
        let b_hat = bd.scaled(&row_scale, &vec![1.0; bd.ncols()]);
        let solver = DirectSolver::lu(&saddle_matrix(&a_hat, &b_hat, 1.0)?)?;
        Ok(Self { col_scale, row_scale, solver })
    }

    pub fn num_primal(&self) -> usize {
        self.col_scale.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.row_scale.len()
    }

    /// Returns `(x, μ)` per right-hand side `(f, g)`.
    pub fn solve_many(&self, rhs: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, LinalgError> {
        let (n, m) = (self.num_primal(), self.num_constraints());
        if let Some((f, g)) = rhs.iter().find(|(f, g)| f.len() != n || g.len() != m) {
            return Err(LinalgError::DimensionMismatch { op: "saddle solve", left: (n, m), right: (f.len(), g.len()) });
        }
        let scaled: Vec<Vec<f64>> = rhs
            .iter()
            .map(|(f, g)| {
                f.iter()
                    .zip(&self.col_scale)
                    .map(|(v, d)| v * d)
                    .chain(g.iter().zip(&self.row_scale).map(|(v, e)| v * e))
                    .collect()
            })
            .collect();
        Ok(self
            .solver
            .solve_many(&scaled)?
            .into_iter()
            .map(|mut y| {
                let mu: Vec<f64> = y.split_off(n).iter().zip(&self.row_scale).map(|(v, e)| v * e).collect();
                let x: Vec<f64> = y.iter().zip(&self.col_scale).map(|(v, d)| v * d).collect();
                (x, mu)
            })
            .collect())
    }
}

/// Factorizes once and solves every right-hand side.
///
/// Saddle systems come back as `x` followed by `μ`.
pub fn solve_direct(sys: &BlockSystem) -> Result<Vec<Vec<f64>>, LinalgError> {
    match sys {
        BlockSystem::Square { matrix, rhs, spd } => {
            let solver = if *spd { DirectSolver::spd(matrix)? } else { DirectSolver::lu(matrix)? };
            solver.solve_many(rhs)
        }
        BlockSystem::Saddle { a, b, rhs } => Ok(SaddleSolver::new(a, b)?
            .solve_many(rhs)?
            .into_iter()
            .map(|(mut x, mu)| {
                x.extend(mu);
                x
            })
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).with_symmetric(true)
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        let sys = BlockSystem::Square { matrix: CsrMatrix::identity(3), rhs: vec![b.clone()], spd: true };
        assert_eq!(solve_direct(&sys).unwrap()[0], b);
    }

    #[test]
    fn two_by_two_saddle() {
        // [[1, 1], [1, 0]] (x, μ) = (0, 1)  →  x = 1, μ = -1
        let a = CsrMatrix::from_dense(&[vec![1.0]]);
        let b = CsrMatrix::from_dense(&[vec![1.0]]);
        let sys = BlockSystem::Saddle { a, b, rhs: vec![(vec![0.0], vec![1.0])] };
        let x = &solve_direct(&sys).unwrap()[0];
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_constructed_solution() {
        let a = laplacian_1d(50);
        let b = a.matvec(&vec![1.0; 50]);
        let x = DirectSolver::spd(&a).unwrap().solve(&b).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn many_rhs_share_factorization() {
        let a = laplacian_1d(20);
        let solver = DirectSolver::spd(&a).unwrap();
        assert!(solver.is_cholesky());
        let rhs: Vec<Vec<f64>> = (0..4).map(|k| a.matvec(&vec![k as f64; 20])).collect();
        let xs = solver.solve_many(&rhs).unwrap();
        for (k, x) in xs.iter().enumerate() {
            assert!(x.iter().all(|v| (v - k as f64).abs() < 1e-10));
        }
    }

    #[test]
    fn indefinite_falls_back_to_lu() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let solver = DirectSolver::spd(&a).unwrap();
        assert!(!solver.is_cholesky());
        let x = solver.solve(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let err = DirectSolver::lu(&a).and_then(|s| s.solve(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, LinalgError::Singular { .. } | LinalgError::Inaccurate { .. }), "{err:?}");
        let z = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]);
        let err = DirectSolver::lu(&z).and_then(|s| s.solve(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, LinalgError::Singular { pivot: 1 }), "{err:?}");
    }

    #[test]
    fn badly_scaled_saddle_keeps_relative_accuracy() {
        // Two decoupled unknowns with coefficients 1e-6 and 1e2, each pinned
        // to mean 1 by its own constraint.
        let a = CsrMatrix::from_dense(&[vec![1e-6, 0.0], vec![0.0, 1e2]]);
        let b = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let sol = SaddleSolver::new(&a, &b).unwrap();
        let (x, mu) = &sol.solve_many(&[(vec![0.0, 0.0], vec![1.0, 1.0])]).unwrap()[0];
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!((mu[0] + 1e-6).abs() < 1e-20 && (mu[1] + 1e2).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(DirectSolver::lu(&CsrMatrix::zeros(2, 3)).is_err());
    }
}
