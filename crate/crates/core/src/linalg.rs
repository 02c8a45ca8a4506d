//! Dense symmetric eigen and SVD kernels sized for the small problems this
//! crate produces (matrices of order at most a few hundred).
//!
//! Nothing here tries to compete with LAPACK. The tridiagonal solver is the
//! implicit QL iteration with Wilkinson shifts, the dense solver is cyclic
//! Jacobi, and the largest singular value is read off the eigen-decomposition
//! of `MᵀM`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const QL_MAX_SWEEPS: usize = 60;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::InvalidArgument(format!(
                "shape mismatch {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                if row[i] == 0.0 {
                    continue;
                }
                for j in i..self.cols {
                    g.entries[i * self.cols + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                g.entries[i * self.cols + j] = g.entries[j * self.cols + i];
            }
        }
        g
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Adds `scale · other` in place.
    pub fn add_scaled(&mut self, scale: f64, other: &DenseMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * scale).collect(),
        }
    }

    /// Leading `rows x cols` block.
    pub fn leading_block(&self, rows: usize, cols: usize) -> Self {
        assert!(rows <= self.rows && cols <= self.cols);
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            out.entries[i * cols..(i + 1) * cols].copy_from_slice(&self.row(i)[..cols]);
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.entries[i * self.cols + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Symmetric tridiagonal matrix: `diag` of length n, `offdiag` of length n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() && offdiag.is_empty() {
            return Ok(Self { diag, offdiag });
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(format!(
                "tridiagonal with {} diagonal and {} off-diagonal entries",
                diag.len(),
                offdiag.len()
            )));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::from_diag(&self.diag);
        for (i, &e) in self.offdiag.iter().enumerate() {
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        let _ = n;
        m
    }

    /// Infinity norm, used as the scale in residual checks.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 {
                    self.offdiag[i - 1].abs()
                } else {
                    0.0
                };
                let right = if i + 1 < n {
                    self.offdiag[i].abs()
                } else {
                    0.0
                };
                left + self.diag[i].abs() + right
            })
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix together with the first
/// component of each unit eigenvector (the Golub–Welsch inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub first_components: Vec<f64>,
}

pub fn tridiag_eigen(t: &SymTridiag) -> Result<TridiagEigen> {
    let n = t.len();
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    let (values, z) = implicit_ql(t, z, 1)?;
    Ok(TridiagEigen {
        values,
        first_components: z,
    })
}

/// Full eigen-decomposition of a symmetric tridiagonal matrix; eigenvectors
/// are the columns of the returned matrix.
pub fn tridiag_eigen_full(t: &SymTridiag) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = t.len();
    let (values, z) = implicit_ql(t, DenseMatrix::identity(n).entries, n)?;
    let mut vectors = DenseMatrix::from_row_major(n, n, z)?;
    for j in 0..n {
        let col = vectors.column(j);
        let sign = canonical_sign(&col);
        for i in 0..n {
            vectors[(i, j)] *= sign;
        }
    }
    Ok((values, vectors))
}

/// Implicit QL with Wilkinson shifts. `z` holds `rows` rows of length n whose
/// columns receive the accumulated rotations; eigenpairs come back sorted
/// ascending.
fn implicit_ql(t: &SymTridiag, mut z: Vec<f64>, rows: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = t.len();
    let mut d = t.diag.clone();
    let mut e = t.offdiag.clone();
    e.push(0.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::NoConvergence(format!(
                    "tridiagonal QL exceeded {QL_MAX_SWEEPS} sweeps at index {l}"
                )));
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..rows {
                    let row = &mut z[k * n..(k + 1) * n];
                    let zf = row[i + 1];
                    row[i + 1] = s * row[i] + c * zf;
                    row[i] = c * row[i] - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut sorted = vec![0.0; rows * n];
    for k in 0..rows {
        for (dst, &src) in order.iter().enumerate() {
            sorted[k * n + dst] = z[k * n + src];
        }
    }
    Ok((values, sorted))
}

/// Sign that makes the last clearly nonzero component positive. Components
/// below `1e-10` of the largest one count as zero.
pub(crate) fn canonical_sign(v: &[f64]) -> f64 {
    let big = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if big == 0.0 {
        return 1.0;
    }
    v.iter()
        .rev()
        .find(|x| x.abs() > 1e-10 * big)
        .map_or(1.0, |x| x.signum())
}

/// Eigen-decomposition of a dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DenseMatrix,
}

impl SymEigen {
    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j)
    }
}

/// Cyclic Jacobi eigen-decomposition.
pub fn sym_eigen(m: &DenseMatrix) -> Result<SymEigen> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "sym_eigen needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let scale = m.frobenius_norm();
    let asym = m.asymmetry();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.rows();
    let mut a = m.clone();
    // symmetrize exactly so the rotations see a consistent matrix
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut v = DenseMatrix::identity(n);

    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= f64::EPSILON * 1e-3 * scale || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()).min(scale) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "Jacobi eigen solver exceeded {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let sign = canonical_sign(&col);
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Largest singular value with its right singular vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LargestSingular {
    pub sigma: f64,
    pub right_vector: Vec<f64>,
    /// Set when the matrix is zero (or has no rows) and the vector is arbitrary.
    pub degenerate: bool,
}

/// Largest singular value via the top eigenpair of `MᵀM`.
pub fn svd_largest(m: &DenseMatrix) -> Result<LargestSingular> {
    let cols = m.cols();
    if cols == 0 {
        return Ok(LargestSingular {
            sigma: 0.0,
            right_vector: Vec::new(),
            degenerate: true,
        });
    }
    if m.rows() == 0 || m.max_abs() == 0.0 {
        let mut v = vec![0.0; cols];
        v[cols - 1] = 1.0;
        return Ok(LargestSingular {
            sigma: 0.0,
            right_vector: v,
            degenerate: true,
        });
    }
    let eig = sym_eigen(&m.gram())?;
    let v = eig.vector(cols - 1);
    // ‖Mv‖ is more accurate than the square root of a rounded eigenvalue
    let sigma = norm2(&m.matvec(&v));
    Ok(LargestSingular {
        sigma,
        right_vector: v,
        degenerate: false,
    })
}

/// Lower Cholesky factor `L` with `B = L Lᵀ`.
pub fn cholesky(b: &DenseMatrix) -> Result<DenseMatrix> {
    if !b.is_square() {
        return Err(Error::InvalidArgument(
            "Cholesky needs a square matrix".into(),
        ));
    }
    let n = b.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = b[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L x = rhs` for lower triangular `L`.
pub(crate) fn forward_substitute(l: &DenseMatrix, rhs: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = rhs` for lower triangular `L`.
pub(crate) fn backward_substitute_transposed(l: &DenseMatrix, rhs: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Top eigenpair of the symmetric-definite pencil `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenEigenMax {
    pub theta: f64,
    /// Normalized to `vᵀ B v = 1`.
    pub vector: Vec<f64>,
}

/// `max vᵀAv / vᵀBv` through `B = LLᵀ` and the standard problem `L⁻¹AL⁻ᵀ`.
pub fn gen_sym_eigen_max(a: &DenseMatrix, b: &DenseMatrix) -> Result<GenEigenMax> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(Error::InvalidArgument(
            "pencil matrices must be square and of equal order".into(),
        ));
    }
    for m in [a, b] {
        let asym = m.asymmetry();
        if asym > 1e-12 * m.frobenius_norm() {
            return Err(Error::NotSymmetric(asym));
        }
    }
    let n = a.rows();
    if n == 0 {
        return Ok(GenEigenMax {
            theta: 0.0,
            vector: Vec::new(),
        });
    }
    let l = cholesky(b)?;

    // C = L⁻¹ A L⁻ᵀ, built column by column: first W = L⁻¹ A, then C = L⁻¹ Wᵀ.
    let mut w = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = forward_substitute(&l, &a.column(j));
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = forward_substitute(&l, w.row(j));
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
    let eig = sym_eigen(&c)?;
    let theta = eig.values[n - 1];
    let y = eig.vector(n - 1);
    let mut v = backward_substitute_transposed(&l, &y);
    let sign = canonical_sign(&v);
    v.iter_mut().for_each(|x| *x *= sign);
    Ok(GenEigenMax { theta, vector: v })
}
