//! Small dense complex linear-algebra helpers shared by the evaluation modules.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Relative eigenvalue threshold below which a direction is treated as null
/// when pseudo-inverting a conditioning covariance.
pub const PINV_REL_THRESHOLD: f64 = 1e-12;

/// Pivot threshold below which a covariance is declared singular.
pub const SINGULAR_PIVOT: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn submatrix(m: &DMatrix<C64>, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// In-place Cholesky of a row-major `n x n` Hermitian matrix. Only the lower
/// triangle is read. Returns the smallest pivot (squared diagonal of the
/// factor); a non-positive pivot stops the factorization early.
pub fn cholesky_in_place(a: &mut [C64], n: usize) -> f64 {
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        min_pivot = min_pivot.min(d);
        if d <= 0.0 {
            return d;
        }
        let l = d.sqrt();
        a[j * n + j] = c(l, 0.0);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / l;
        }
    }
    min_pivot
}

/// log2 det of a Hermitian positive definite matrix via Cholesky.
pub fn log2_det_pd(m: &DMatrix<C64>) -> Result<f64> {
    let n = m.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut buf: Vec<C64> = (0..n * n).map(|idx| m[(idx / n, idx % n)]).collect();
    let min_pivot = cholesky_in_place(&mut buf, n);
    if !(min_pivot > SINGULAR_PIVOT) {
        return Err(Error::SingularCovariance { min_pivot });
    }
    Ok((0..n).map(|i| 2.0 * buf[i * n + i].re.log2()).sum())
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix; eigen-directions
/// below `PINV_REL_THRESHOLD * lambda_max` are dropped.
pub fn hermitian_pinv(m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let cut = PINV_REL_THRESHOLD * lmax;
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cut {
            let v = eig.eigenvectors.column(idx);
            out += (v * v.adjoint()) * c(1.0 / lambda, 0.0);
        }
    }
    out
}

/// Conditional covariance Sigma_{A|C} = Sigma_A - Sigma_{AC} Sigma_C^+ Sigma_{CA}.
pub fn schur_complement(cov: &DMatrix<C64>, a: &[usize], cond: &[usize]) -> DMatrix<C64> {
    let saa = submatrix(cov, a, a);
    if cond.is_empty() {
        return saa;
    }
    let sac = submatrix(cov, a, cond);
    let scc = submatrix(cov, cond, cond);
    let pinv = hermitian_pinv(&scc);
    let mut out = &saa - &sac * pinv * sac.adjoint();
    hermitize(&mut out);
    out
}

pub fn hermitize(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = c(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}
