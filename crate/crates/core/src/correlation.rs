//! Angle parameterization of unit-diagonal Hermitian PSD matrices.
//!
//! A correlation matrix is written as `L L^H` where every row of the lower
//! triangular factor `L` has unit norm. Row `i > 0` is described by `2i`
//! reals: `i` magnitude angles followed by `i` phases. The first magnitude
//! angle splits the row between the diagonal (`cos`) and the off-diagonal
//! part (`sin`); the remaining ones distribute the off-diagonal radius
//! hyperspherically. All-zero parameters give the identity.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c, cholesky_in_place, C64};
use crate::model::NoiseCorrelation;

/// Number of real parameters for an `s x s` correlation matrix.
pub fn param_count(s: usize) -> usize {
    s * s.saturating_sub(1)
}

/// Offset of row `i`'s parameters in the flat parameter vector.
pub fn row_offset(i: usize) -> usize {
    i * i.saturating_sub(1)
}

/// Writes row `i` of the unit-row factor into `out[0..=i]`.
pub fn factor_row(i: usize, row_params: &[f64], out: &mut [C64]) {
    if i == 0 {
        out[0] = c(1.0, 0.0);
        return;
    }
    let (mags, phases) = row_params.split_at(i);
    let mut radius = mags[0].sin();
    out[i] = c(mags[0].cos(), 0.0);
    for j in 0..i {
        let m = if j + 1 < i {
            let v = radius * mags[j + 1].cos();
            radius *= mags[j + 1].sin();
            v
        } else {
            radius
        };
        out[j] = C64::from_polar(m, phases[j]);
    }
}

/// Row-major `s x s` lower-triangular factor with unit-norm rows.
pub fn factor_from_angles(s: usize, params: &[f64]) -> Vec<C64> {
    assert_eq!(params.len(), param_count(s), "parameter length");
    let mut l = vec![c(0.0, 0.0); s * s];
    for i in 0..s {
        let off = row_offset(i);
        factor_row(i, &params[off..off + 2 * i], &mut l[i * s..i * s + s]);
    }
    l
}

/// `L L^H` as a row-major buffer, exactly Hermitian with exactly unit diagonal.
pub fn correlation_buffer_from_angles(s: usize, params: &[f64]) -> Vec<C64> {
    let l = factor_from_angles(s, params);
    let mut out = vec![c(0.0, 0.0); s * s];
    for i in 0..s {
        out[i * s + i] = c(1.0, 0.0);
        for j in 0..i {
            let mut acc = c(0.0, 0.0);
            for k in 0..=j {
                acc += l[i * s + k] * l[j * s + k].conj();
            }
            out[i * s + j] = acc;
            out[j * s + i] = acc.conj();
        }
    }
    out
}

pub fn correlation_from_angles(s: usize, params: &[f64]) -> DMatrix<C64> {
    let buf = correlation_buffer_from_angles(s, params);
    DMatrix::from_row_slice(s, s, &buf)
}

/// Inverse of [`correlation_from_angles`] for positive definite input.
pub fn angles_from_correlation(sigma: &DMatrix<C64>) -> Result<Vec<f64>> {
    let s = sigma.nrows();
    let mut buf: Vec<C64> = (0..s * s).map(|idx| sigma[(idx / s, idx % s)]).collect();
    let min_pivot = cholesky_in_place(&mut buf, s);
    if !(min_pivot > 0.0) {
        return Err(Error::SingularCovariance { min_pivot });
    }
    let mut params = vec![0.0; param_count(s)];
    for i in 1..s {
        let row = &buf[i * s..i * s + i + 1];
        let norm: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let off = row_offset(i);
        let diag = (row[i].re / norm).clamp(-1.0, 1.0);
        params[off] = diag.acos();
        // hyperspherical angles of the off-diagonal magnitudes
        let mags: Vec<f64> = row[..i].iter().map(|z| z.norm() / norm).collect();
        for j in 0..i.saturating_sub(1) {
            let tail: f64 = mags[j..].iter().map(|m| m * m).sum::<f64>().sqrt();
            params[off + 1 + j] = if tail > 0.0 {
                (mags[j] / tail).clamp(-1.0, 1.0).acos()
            } else {
                0.0
            };
        }
        for j in 0..i {
            params[off + i + j] = row[j].arg();
        }
    }
    Ok(params)
}

/// Places an `s x s` correlation (indexed by `order`) into a `k x k` identity.
pub fn embed(local: &DMatrix<C64>, order: &[usize], k: usize) -> Result<NoiseCorrelation> {
    let mut full = DMatrix::<C64>::identity(k, k);
    for (a, &ia) in order.iter().enumerate() {
        for (b, &ib) in order.iter().enumerate() {
            full[(ia, ib)] = local[(a, b)];
        }
    }
    NoiseCorrelation::new(full)
}
