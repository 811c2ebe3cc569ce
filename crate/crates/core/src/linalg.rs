//! Minimal dense complex linear algebra: orthonormalization, orthogonal
//! projection residuals, and numerical rank.
//!
//! Everything here targets tall-and-skinny matrices (a few hundred rows, a
//! handful of columns), which is all the subset scans ever need. Matrices are
//! stored row-major; orthonormal bases column-major so that projections walk
//! contiguous memory.

use num_complex::Complex64;
use thiserror::Error;

/// Default relative tolerance for rank decisions. Gaussian draws are full
/// rank with probability one, so this only guards degenerate hand-built
/// inputs.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("entry buffer holds {got} values, expected {rows}x{cols} = {expected}")]
    EntryCount {
        rows: usize,
        cols: usize,
        got: usize,
        expected: usize,
    },
    #[error("vector must have at least one entry")]
    EmptyVector,
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyMatrix { rows, cols });
        }
        let expected = rows * cols;
        if entries.len() != expected {
            return Err(LinalgError::EntryCount {
                rows,
                cols,
                got: entries.len(),
                expected,
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn<F>(rows: usize, cols: usize, mut f: F) -> Result<Self, LinalgError>
    where
        F: FnMut(usize, usize) -> Complex64,
    {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self, LinalgError> {
        Self::new(rows, cols, vec![Complex64::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self, LinalgError> {
        Self::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }

    /// Copy column `c` into `out` (length must equal `rows`).
    pub fn copy_column_into(&self, c: usize, out: &mut [Complex64]) {
        assert_eq!(out.len(), self.rows, "column buffer length");
        for (r, slot) in out.iter_mut().enumerate() {
            *slot = self.entries[r * self.cols + c];
        }
    }

    pub fn column(&self, c: usize) -> CVector {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.rows];
        self.copy_column_into(c, &mut buf);
        CVector::new(buf).expect("rows >= 1")
    }
}

/// Dense complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector {
    entries: Vec<Complex64>,
}

impl CVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::EmptyVector);
        }
        Ok(Self { entries })
    }

    pub fn from_fn<F>(len: usize, f: F) -> Result<Self, LinalgError>
    where
        F: FnMut(usize) -> Complex64,
    {
        Self::new((0..len).map(f).collect())
    }

    /// Convenience constructor from real parts.
    pub fn from_real(values: &[f64]) -> Result<Self, LinalgError> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Columns of an orthonormal set, stored column-major. `rank` may be zero
/// (e.g. the basis of an all-zero matrix).
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    rows: usize,
    rank: usize,
    data: Vec<Complex64>, // column-major rows x rank
}

impl OrthonormalBasis {
    /// Wrap raw column-major data without verifying orthonormality. The
    /// debug-mode checks in [`residual_energy`] will still catch misuse.
    pub fn from_raw_unchecked(rows: usize, rank: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * rank, "basis buffer length");
        Self { rows, rank, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Max deviation of Q*Q from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rank {
            for j in 0..self.rank {
                let mut g = Complex64::new(0.0, 0.0);
                for r in 0..self.rows {
                    g += self.column(i)[r].conj() * self.column(j)[r];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

#[inline]
fn col_norm_sqr(col: &[Complex64]) -> f64 {
    col.iter().map(|z| z.norm_sqr()).sum()
}

/// In-place modified Gram-Schmidt with one reorthogonalization pass over
/// column-major data. Retained columns are packed at the front; returns the
/// retained count. A column is kept when its residual norm after projection
/// on the previously retained columns exceeds `tol` times the largest
/// original column norm.
fn orthonormalize_in_place(data: &mut [Complex64], rows: usize, cols: usize, tol: f64) -> usize {
    let mut max_norm = 0.0f64;
    for c in 0..cols {
        max_norm = max_norm.max(col_norm_sqr(&data[c * rows..(c + 1) * rows]).sqrt());
    }
    let threshold = tol * max_norm;

    let mut rank = 0usize;
    for c in 0..cols {
        if c != rank {
            let (head, tail) = data.split_at_mut(c * rows);
            head[rank * rows..(rank + 1) * rows].copy_from_slice(&tail[..rows]);
        }
        for _pass in 0..2 {
            let (done, rest) = data.split_at_mut(rank * rows);
            let cur = &mut rest[..rows];
            for q in 0..rank {
                let qcol = &done[q * rows..(q + 1) * rows];
                let mut inner = Complex64::new(0.0, 0.0);
                for r in 0..rows {
                    inner += qcol[r].conj() * cur[r];
                }
                for r in 0..rows {
                    cur[r] -= inner * qcol[r];
                }
            }
        }
        let col = &mut data[rank * rows..(rank + 1) * rows];
        let norm = col_norm_sqr(col).sqrt();
        if norm > threshold {
            let inv = 1.0 / norm;
            for z in col.iter_mut() {
                *z *= inv;
            }
            rank += 1;
        }
    }
    rank
}

/// Orthonormal basis of the column space of `m`, together with the numerical
/// rank. Requires `rows >= cols`; use [`numeric_rank`] for wide matrices.
pub fn orthonormal_basis(
    m: &CMatrix,
    tol: f64,
) -> Result<(OrthonormalBasis, usize), LinalgError> {
    if m.rows() < m.cols() {
        return Err(LinalgError::DimensionMismatch {
            context: format!(
                "orthonormal_basis needs rows >= cols, got {}x{}",
                m.rows(),
                m.cols()
            ),
        });
    }
    let rows = m.rows();
    let cols = m.cols();
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    for c in 0..cols {
        m.copy_column_into(c, &mut data[c * rows..(c + 1) * rows]);
    }
    let rank = orthonormalize_in_place(&mut data, rows, cols, tol);
    data.truncate(rank * rows);
    Ok((OrthonormalBasis::from_raw_unchecked(rows, rank, data), rank))
}

/// Energy of `y` after projecting off the span of `basis`, i.e.
/// `||y||^2 - sum_j |q_j* y|^2`, clamped to be non-negative.
pub fn residual_energy(y: &CVector, basis: &OrthonormalBasis) -> Result<f64, LinalgError> {
    if y.len() != basis.rows() {
        return Err(LinalgError::DimensionMismatch {
            context: format!(
                "residual_energy: vector length {} vs basis rows {}",
                y.len(),
                basis.rows()
            ),
        });
    }
    debug_assert!(
        basis.orthonormality_defect() < 1e-8,
        "residual_energy called with a non-orthonormal basis"
    );
    let mut res = y.norm_sqr();
    for j in 0..basis.rank() {
        let q = basis.column(j);
        let mut inner = Complex64::new(0.0, 0.0);
        for (r, z) in y.entries().iter().enumerate() {
            inner += q[r].conj() * z;
        }
        res -= inner.norm_sqr();
    }
    debug_assert!(res > -1e-9 * y.norm_sqr().max(1.0));
    Ok(res.max(0.0))
}

/// The residual vector itself: `y` minus its projection onto the basis span.
pub fn project_residual(y: &CVector, basis: &OrthonormalBasis) -> Result<CVector, LinalgError> {
    if y.len() != basis.rows() {
        return Err(LinalgError::DimensionMismatch {
            context: format!(
                "project_residual: vector length {} vs basis rows {}",
                y.len(),
                basis.rows()
            ),
        });
    }
    let mut out: Vec<Complex64> = y.entries().to_vec();
    for j in 0..basis.rank() {
        let q = basis.column(j);
        let mut inner = Complex64::new(0.0, 0.0);
        for (r, z) in y.entries().iter().enumerate() {
            inner += q[r].conj() * z;
        }
        for (r, slot) in out.iter_mut().enumerate() {
            *slot -= inner * q[r];
        }
    }
    CVector::new(out)
}

/// Numerical rank at relative tolerance `tol`. Works for any shape.
pub fn numeric_rank(m: &CMatrix, tol: f64) -> usize {
    let rows = m.rows();
    let cols = m.cols();
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    for c in 0..cols {
        m.copy_column_into(c, &mut data[c * rows..(c + 1) * rows]);
    }
    orthonormalize_in_place(&mut data, rows, cols, tol)
}

/// Reusable scratch for the subset scans: gather a column subset, factor it,
/// and evaluate projection residuals without reallocating per subset.
pub struct ProjectionWorkspace {
    rows: usize,
    capacity: usize,
    data: Vec<Complex64>,
    rank: usize,
}

impl ProjectionWorkspace {
    pub fn new(rows: usize, max_cols: usize) -> Self {
        Self {
            rows,
            capacity: max_cols,
            data: vec![Complex64::new(0.0, 0.0); rows * max_cols],
            rank: 0,
        }
    }

    /// Gather `cols` of `a` and orthonormalize them. Returns the rank.
    pub fn factor_columns(&mut self, a: &CMatrix, cols: &[usize], tol: f64) -> usize {
        assert!(cols.len() <= self.capacity, "workspace capacity");
        assert_eq!(a.rows(), self.rows, "workspace row count");
        for (slot, &c) in cols.iter().enumerate() {
            a.copy_column_into(c, &mut self.data[slot * self.rows..(slot + 1) * self.rows]);
        }
        self.rank = orthonormalize_in_place(&mut self.data, self.rows, cols.len(), tol);
        self.rank
    }

    /// Residual energy of `y` against the most recently factored basis.
    pub fn residual_energy(&self, y: &[Complex64]) -> f64 {
        assert_eq!(y.len(), self.rows, "vector length");
        let mut res: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        for j in 0..self.rank {
            let q = &self.data[j * self.rows..(j + 1) * self.rows];
            let mut inner = Complex64::new(0.0, 0.0);
            for (r, z) in y.iter().enumerate() {
                inner += q[r].conj() * z;
            }
            res -= inner.norm_sqr();
        }
        res.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = StandardNormal;
        CMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = dist.sample(&mut rng);
            let im: f64 = dist.sample(&mut rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .unwrap()
    }

    fn gaussian_vector(len: usize, seed: u64) -> CVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = StandardNormal;
        CVector::from_fn(len, |_| {
            let re: f64 = dist.sample(&mut rng);
            let im: f64 = dist.sample(&mut rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .unwrap()
    }

    #[test]
    fn identity_columns_stay_put() {
        let m = CMatrix::from_fn(3, 2, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let (basis, rank) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rank, 2);
        for j in 0..2 {
            for r in 0..3 {
                let expect = if r == j { 1.0 } else { 0.0 };
                assert!((basis.column(j)[r] - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dependent_column_drops_rank() {
        // col2 = 2 * col1
        let c1 = [
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.3, 0.2),
            Complex64::new(0.8, -1.1),
        ];
        let m = CMatrix::from_fn(3, 2, |r, c| if c == 0 { c1[r] } else { c1[r] * 2.0 }).unwrap();
        let (_, rank) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rank, 1);
    }

    #[test]
    fn random_tall_matrix_is_full_rank_with_gram_check() {
        let m = gaussian_matrix(8, 3, 17);
        let (basis, rank) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rank, 3);
        // Oracle: Gram matrix of the basis equals the identity.
        assert!(basis.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn residual_of_basis_column_is_zero() {
        let m = gaussian_matrix(8, 3, 23);
        let (basis, _) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
        let y = CVector::new(basis.column(0).to_vec()).unwrap();
        let res = residual_energy(&y, &basis).unwrap();
        assert!(res < 1e-12, "res = {res}");
    }

    #[test]
    fn residual_of_orthogonal_vector_is_full_energy() {
        // basis = {e1, e2} in C^4, y lives on the last two coordinates
        let m = CMatrix::from_fn(4, 2, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let (basis, _) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
        let y = CVector::from_real(&[0.0, 0.0, 2.0, -1.0]).unwrap();
        let res = residual_energy(&y, &basis).unwrap();
        assert!((res - y.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn hand_projection_on_e1() {
        let m = CMatrix::from_fn(4, 1, |r, _| {
            Complex64::new(if r == 0 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let (basis, _) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
        let y = CVector::from_real(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        let res = residual_energy(&y, &basis).unwrap();
        assert!((res - 1.0).abs() < 1e-12, "res = {res}");
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn numeric_rank_examples() {
        assert_eq!(numeric_rank(&CMatrix::zeros(4, 2).unwrap(), DEFAULT_RANK_TOL), 0);
        assert_eq!(numeric_rank(&CMatrix::identity(4).unwrap(), DEFAULT_RANK_TOL), 4);
        let m = gaussian_matrix(6, 3, 99);
        assert_eq!(numeric_rank(&m, DEFAULT_RANK_TOL), 3);
        // Oracle for the Gaussian case: 3x3 Gram determinant is far from zero.
        let mut gram = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..6 {
                    acc += m.entry(r, i).conj() * m.entry(r, j);
                }
                gram[i][j] = acc;
            }
        }
        let det = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1])
            - gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0])
            + gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
        assert!(det.norm() > 1e-6);
    }

    #[test]
    fn rank_of_wide_matrix_is_bounded_by_rows() {
        let m = gaussian_matrix(3, 7, 5);
        assert_eq!(numeric_rank(&m, DEFAULT_RANK_TOL), 3);
    }

    #[test]
    fn constructor_errors() {
        assert!(matches!(
            CMatrix::new(0, 2, vec![]),
            Err(LinalgError::EmptyMatrix { .. })
        ));
        assert!(matches!(
            CMatrix::new(2, 2, vec![Complex64::new(1.0, 0.0); 3]),
            Err(LinalgError::EntryCount { .. })
        ));
        assert!(matches!(CVector::new(vec![]), Err(LinalgError::EmptyVector)));
        let wide = gaussian_matrix(2, 3, 1);
        assert!(orthonormal_basis(&wide, DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn residual_length_mismatch_is_an_error() {
        let m = gaussian_matrix(6, 2, 3);
        let (basis, _) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
        let y = gaussian_vector(5, 4);
        assert!(residual_energy(&y, &basis).is_err());
    }

    #[test]
    #[should_panic]
    #[cfg(debug_assertions)]
    fn non_orthonormal_basis_trips_debug_check() {
        let data = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let basis = OrthonormalBasis::from_raw_unchecked(3, 1, data);
        let y = gaussian_vector(3, 7);
        let _ = residual_energy(&y, &basis);
    }

    #[test]
    fn workspace_matches_two_step_path() {
        let a = gaussian_matrix(16, 6, 42);
        let y = gaussian_vector(16, 43);
        let cols = [0usize, 2, 5];
        let sub = CMatrix::from_fn(16, 3, |r, c| a.entry(r, cols[c])).unwrap();
        let (basis, rank) = orthonormal_basis(&sub, DEFAULT_RANK_TOL).unwrap();
        let expect = residual_energy(&y, &basis).unwrap();
        let mut ws = ProjectionWorkspace::new(16, 6);
        let ws_rank = ws.factor_columns(&a, &cols, DEFAULT_RANK_TOL);
        assert_eq!(rank, ws_rank);
        let got = ws.residual_energy(y.entries());
        assert!((got - expect).abs() <= 1e-12 * expect.max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pythagoras_and_idempotency(rows in 4usize..24, cols in 1usize..4, seed in 0u64..1000) {
            let cols = cols.min(rows);
            let m = gaussian_matrix(rows, cols, seed);
            let y = gaussian_vector(rows, seed.wrapping_add(1));
            let (basis, _) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
            let res = residual_energy(&y, &basis).unwrap();
            let perp = project_residual(&y, &basis).unwrap();
            // Pythagoras: projected + residual energies add to the total.
            let proj_energy = y.norm_sqr() - res;
            prop_assert!((proj_energy + res - y.norm_sqr()).abs() <= 1e-9 * y.norm_sqr());
            prop_assert!((perp.norm_sqr() - res).abs() <= 1e-9 * y.norm_sqr().max(1.0));
            // Idempotency: projecting the residual changes nothing.
            let res2 = residual_energy(&perp, &basis).unwrap();
            prop_assert!((res2 - res).abs() <= 1e-9 * res.max(1.0));
        }

        #[test]
        fn annihilation_of_input_columns(rows in 4usize..24, cols in 1usize..5, seed in 0u64..1000) {
            let cols = cols.min(rows);
            let m = gaussian_matrix(rows, cols, seed);
            let (basis, _) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
            for c in 0..cols {
                let col = m.column(c);
                let res = residual_energy(&col, &basis).unwrap();
                prop_assert!(res <= 1e-9 * col.norm_sqr());
            }
        }

        #[test]
        fn unitary_invariance(seed in 0u64..500) {
            let n = 10usize;
            let m = gaussian_matrix(n, 3, seed);
            let y = gaussian_vector(n, seed.wrapping_add(7));
            let (basis, _) = orthonormal_basis(&m, DEFAULT_RANK_TOL).unwrap();
            let res = residual_energy(&y, &basis).unwrap();

            // Random unitary from a square Gaussian draw.
            let (u, ur) = orthonormal_basis(&gaussian_matrix(n, n, seed.wrapping_add(13)), DEFAULT_RANK_TOL).unwrap();
            prop_assert_eq!(ur, n);
            let apply = |v: &[Complex64]| -> Vec<Complex64> {
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for (j, item) in v.iter().enumerate() {
                    let col = u.column(j);
                    for r in 0..n {
                        out[r] += col[r] * item;
                    }
                }
                out
            };
            let uy = CVector::new(apply(y.entries())).unwrap();
            let mut udata = Vec::with_capacity(n * basis.rank());
            for j in 0..basis.rank() {
                udata.extend(apply(basis.column(j)));
            }
            let ubasis = OrthonormalBasis::from_raw_unchecked(n, basis.rank(), udata);
            let res_u = residual_energy(&uy, &ubasis).unwrap();
            prop_assert!((res_u - res).abs() <= 1e-9 * res.max(1.0));
        }
    }
}
