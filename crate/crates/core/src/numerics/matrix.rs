//! Small dense complex matrices.
//!
//! Everything here is sized for the estimator internals (a handful of taps,
//! tens of pilots), so the algorithms favour clarity over blocking or SIMD.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::{Error, Result};

/// Condition number above which a tall matrix is treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e6;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major storage.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} elements cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("columns have unequal lengths".into()));
        }
        Ok(Self::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by a vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (i..self.cols).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol)
            })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix dimensions must agree")
    }
}

/// Inverse of a small square matrix by Gauss-Jordan elimination with partial
/// pivoting.
pub fn invert(a: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::Dimension("only square matrices can be inverted".into()));
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(Error::Singular("zero matrix"));
    }
    let mut work = a.clone();
    let mut inv = CMatrix::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| work[(x, col)].norm().total_cmp(&work[(y, col)].norm()))
            .expect("non-empty pivot range");
        if work[(pivot, col)].norm() <= scale * 1e-14 * n as f64 {
            return Err(Error::Singular("pivot vanished during inversion"));
        }
        if pivot != col {
            for j in 0..n {
                let (a1, a2) = (work[(col, j)], work[(pivot, j)]);
                work[(col, j)] = a2;
                work[(pivot, j)] = a1;
                let (b1, b2) = (inv[(col, j)], inv[(pivot, j)]);
                inv[(col, j)] = b2;
                inv[(pivot, j)] = b1;
            }
        }
        let p = work[(col, col)].inv();
        for j in 0..n {
            work[(col, j)] *= p;
            inv[(col, j)] *= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = work[(i, col)];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let w = work[(col, j)];
                let v = inv[(col, j)];
                work[(i, j)] -= f * w;
                inv[(i, j)] -= f * v;
            }
        }
    }
    Ok(inv)
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// The n x n Hermitian matrix is embedded as the 2n x 2n real symmetric
/// matrix `[[Re, -Im], [Im, Re]]`, whose spectrum is that of the original with
/// every eigenvalue doubled; cyclic Jacobi sweeps then diagonalise it.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::Dimension("eigenvalues need a square matrix".into()));
    }
    let m = 2 * n;
    let mut s = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            s[i * m + j] = z.re;
            s[(i + n) * m + (j + n)] = z.re;
            s[i * m + (j + n)] = -z.im;
            s[(i + n) * m + j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i * m + j] * s[i * m + j])
            .sum();
        let diag: f64 = (0..m).map(|i| s[i * m + i] * s[i * m + i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = s[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (s[q * m + q] - s[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = s[k * m + p];
                    let akq = s[k * m + q];
                    s[k * m + p] = c * akp - sn * akq;
                    s[k * m + q] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = s[p * m + k];
                    let aqk = s[q * m + k];
                    s[p * m + k] = c * apk - sn * aqk;
                    s[q * m + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
    eig.sort_by(f64::total_cmp);
    // each eigenvalue appears twice in the real embedding
    Ok(eig.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect())
}

/// 2-norm condition number of a tall matrix, from the spectrum of its Gram
/// matrix. Returns infinity for rank-deficient input.
pub fn condition_number(a: &CMatrix) -> Result<f64> {
    let gram = &a.adjoint() * a;
    let eig = hermitian_eigenvalues(&gram)?;
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if hi <= 0.0 {
        return Ok(f64::INFINITY);
    }
    if lo <= hi * 1e-28 {
        return Ok(f64::INFINITY);
    }
    Ok((hi / lo).sqrt())
}

/// Moore-Penrose pseudo-inverse `(A^H A)^{-1} A^H` of a tall full-column-rank
/// matrix, through the normal equations and an explicit Q x Q inverse.
pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    pseudo_inverse_with_limit(a, MAX_CONDITION)
}

pub fn pseudo_inverse_with_limit(a: &CMatrix, limit: f64) -> Result<CMatrix> {
    if a.rows() < a.cols() || a.cols() == 0 {
        return Err(Error::Dimension(format!(
            "pseudo-inverse needs a tall matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let condition = condition_number(a)?;
    if !(condition <= limit) {
        return Err(Error::Identifiability { condition, limit });
    }
    let adj = a.adjoint();
    let gram_inv = invert(&(&adj * a))?;
    Ok(&gram_inv * &adj)
}

/// Solves `(R + load I) X = B` for Hermitian positive semi-definite `R` by a
/// Cholesky factorisation.
pub fn regularized_hermitian_solve(r: &CMatrix, load: f64, b: &CMatrix) -> Result<CMatrix> {
    let n = r.rows();
    if n != r.cols() || b.rows() != n {
        return Err(Error::Dimension(format!(
            "cannot solve a {}x{} system with a {}x{} right-hand side",
            r.rows(),
            r.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if !(load >= 0.0) || !load.is_finite() {
        return Err(Error::InvalidParameter(format!("diagonal load {load} must be finite and >= 0")));
    }
    let scale = r.max_abs().max(1.0);
    if !r.is_hermitian(1e-10 * scale) {
        return Err(Error::InvalidParameter("matrix is not Hermitian".into()));
    }
    let mut l = CMatrix::zeros(n, n);
    let max_diag = (0..n).map(|i| r[(i, i)].re + load).fold(0.0, f64::max);
    let tiny = max_diag * n as f64 * 1e-13;
    for j in 0..n {
        let mut d = r[(j, j)].re + load;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > tiny) {
            return Err(Error::Singular("regularised matrix is not positive definite"));
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut v = r[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / d;
        }
    }
    let mut x = CMatrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        // L y = b
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut v = b[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * y[k];
            }
            y[i] = v / l[(i, i)];
        }
        // L^H x = y
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn pinv_of_unitary_is_adjoint() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = CMatrix::from_vec(2, 2, vec![c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]).unwrap();
        let p = pseudo_inverse(&u).unwrap();
        assert!(p.max_abs_diff(&u.adjoint()) < 1e-14);
    }

    #[test]
    fn pinv_rejects_equal_columns() {
        let col: Vec<_> = (0..6).map(|k| Complex64::from_polar(1.0, 0.3 * k as f64)).collect();
        let a = CMatrix::from_columns(&[col.clone(), col]).unwrap();
        assert!(matches!(pseudo_inverse(&a), Err(Error::Identifiability { .. })));
    }

    #[test]
    fn pinv_matches_explicit_two_by_two_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 8, 2);
        // oracle: closed-form 2x2 inverse of the Gram matrix
        let g00: Complex64 = a.column(0).iter().map(|x| x.norm_sqr()).sum::<f64>().into();
        let g11: Complex64 = a.column(1).iter().map(|x| x.norm_sqr()).sum::<f64>().into();
        let g01: Complex64 = (0..8).map(|i| a[(i, 0)].conj() * a[(i, 1)]).sum();
        let det = g00 * g11 - g01 * g01.conj();
        let inv = [[g11 / det, -g01 / det], [-g01.conj() / det, g00 / det]];
        let expected = CMatrix::from_fn(2, 8, |q, i| inv[q][0] * a[(i, 0)].conj() + inv[q][1] * a[(i, 1)].conj());
        let p = pseudo_inverse(&a).unwrap();
        assert!(p.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn eigenvalues_of_diagonal_and_rotated() {
        let d = CMatrix::from_fn(3, 3, |i, j| if i == j { c(i as f64 + 1.0, 0.0) } else { c(0.0, 0.0) });
        let e = hermitian_eigenvalues(&d).unwrap();
        for (k, v) in e.iter().enumerate() {
            assert!((v - (k as f64 + 1.0)).abs() < 1e-12);
        }
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let h = CMatrix::from_vec(2, 2, vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]).unwrap();
        let e = hermitian_eigenvalues(&h).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_identity_and_zero() {
        let i3 = CMatrix::identity(3);
        let x = regularized_hermitian_solve(&i3, 0.0, &i3).unwrap();
        assert!(x.max_abs_diff(&i3) < 1e-15);

        let z = CMatrix::zeros(3, 3);
        let x = regularized_hermitian_solve(&z, 0.01, &z).unwrap();
        assert_eq!(x.max_abs(), 0.0);
    }

    #[test]
    fn singular_without_load_is_an_error() {
        let z = CMatrix::zeros(2, 2);
        assert!(matches!(regularized_hermitian_solve(&z, 0.0, &CMatrix::identity(2)), Err(Error::Singular(_))));
    }

    #[test]
    fn solve_residual_on_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 3, 6, 10] {
            let a = random_matrix(&mut rng, n, n + 2);
            let r = &a * &a.adjoint();
            let b = random_matrix(&mut rng, n, 3);
            let load = 0.05;
            let x = regularized_hermitian_solve(&r, load, &b).unwrap();
            let lhs = (&r.add(&CMatrix::identity(n).scale(load.into())).unwrap()) * &x;
            assert!(lhs.max_abs_diff(&b) < 1e-9, "n={n}");
        }
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let a = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(regularized_hermitian_solve(&a, 0.0, &CMatrix::identity(2)).is_err());
    }

    #[test]
    fn invert_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 5, 5);
        let inv = invert(&a).unwrap();
        assert!((&a * &inv).max_abs_diff(&CMatrix::identity(5)) < 1e-10);
    }
}
