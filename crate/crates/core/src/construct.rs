//! Channel families with known sum-capacity.
//!
//! [`build_z_channel`] turns a noise correlation into an upper-triangular
//! channel for which, conditioned on the inputs of users `1..k-1`, outputs
//! `1..k-1` are degraded versions of output `k`. [`recover_sigma`] inverts
//! that map from the upper triangle of any channel.

use nalgebra::DMatrix;

use crate::certify::degradedness_witness;
use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::model::{ChannelMatrix, NoiseCorrelation};

fn check_gains(diag_gains: &[f64], k: usize) -> Result<()> {
    if diag_gains.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: diag_gains.len(),
        });
    }
    for (i, &g) in diag_gains.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::NonFinite { row: i, col: i });
        }
        if g <= 0.0 {
            return Err(Error::NonPositiveDiagonal { index: i, re: g, im: 0.0 });
        }
    }
    Ok(())
}

/// Fills the upper triangle column by column, from the last user down:
///
/// `H[0..k, k] = h_kk / (1 + |H[k, k+1..]|^2) * (rho_k + H[0..k, k+1..] H[k, k+1..]^H)`
///
/// where `rho_k` is column `k` of `sigma` above the diagonal.
pub fn build_z_channel(sigma: &NoiseCorrelation, diag_gains: &[f64]) -> Result<ChannelMatrix> {
    let k = sigma.k();
    check_gains(diag_gains, k)?;
    let mut h = DMatrix::<C64>::zeros(k, k);
    for i in 0..k {
        h[(i, i)] = c(diag_gains[i], 0.0);
    }
    for col in (1..k).rev() {
        let tail: f64 = ((col + 1)..k).map(|j| h[(col, j)].norm_sqr()).sum();
        let scale = diag_gains[col] / (1.0 + tail);
        for i in 0..col {
            let mut acc = sigma.get(i, col);
            for j in (col + 1)..k {
                acc += h[(i, j)] * h[(col, j)].conj();
            }
            h[(i, col)] = acc * scale;
        }
    }
    let h = ChannelMatrix::new(h)?;
    let witness = degradedness_witness(&h, sigma)?;
    if !witness.passed {
        return Err(Error::WitnessFailure {
            residual: witness.max_residual(),
        });
    }
    Ok(h)
}

/// Noise correlation whose Z-channel construction reproduces the upper
/// triangle of `h`. Entries below the diagonal of `h` are ignored. Fails
/// with `NotPsd` when no valid correlation exists.
pub fn recover_sigma(h: &ChannelMatrix) -> Result<NoiseCorrelation> {
    let k = h.k();
    let mut s = DMatrix::<C64>::identity(k, k);
    for col in 1..k {
        let tail: f64 = ((col + 1)..k).map(|j| h.gain(col, j).norm_sqr()).sum();
        let scale = (1.0 + tail) / h.direct_gain(col);
        for i in 0..col {
            let mut rho = h.gain(i, col) * scale;
            for j in (col + 1)..k {
                rho -= h.gain(i, j) * h.gain(col, j).conj();
            }
            s[(i, col)] = rho;
            s[(col, i)] = rho.conj();
        }
    }
    NoiseCorrelation::new(s)
}

/// Receiver 1 hears every other transmitter: `h[0,k] = v_k h_kk` for `k >= 1`.
///
/// With `strict`, the interference budget `sum |v_k|^2 <= 1` is enforced.
pub fn many_to_one(v: &[C64], diag_gains: &[f64], strict: bool) -> Result<ChannelMatrix> {
    let k = diag_gains.len();
    check_gains(diag_gains, k)?;
    if v.len() + 1 != k {
        return Err(Error::DimensionMismatch {
            expected: k.saturating_sub(1),
            found: v.len(),
        });
    }
    let budget: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if strict && budget > 1.0 {
        return Err(Error::ConditionViolated(format!(
            "sum |v_k|^2 = {budget} exceeds 1"
        )));
    }
    let mut h = DMatrix::<C64>::zeros(k, k);
    for i in 0..k {
        h[(i, i)] = c(diag_gains[i], 0.0);
    }
    for (idx, &vk) in v.iter().enumerate() {
        h[(0, idx + 1)] = vk * diag_gains[idx + 1];
    }
    ChannelMatrix::new(h)
}

/// The noise correlation that generates [`many_to_one`] through [`build_z_channel`].
pub fn many_to_one_sigma(v: &[C64]) -> Result<NoiseCorrelation> {
    let k = v.len() + 1;
    let mut s = DMatrix::<C64>::identity(k, k);
    for (idx, &vk) in v.iter().enumerate() {
        s[(0, idx + 1)] = vk;
        s[(idx + 1, 0)] = vk.conj();
    }
    NoiseCorrelation::new(s)
}

/// Rank-one channel `H = a b^H`, users ordered by nondecreasing `|a_k|`.
pub fn rank_one_channel(a: &[C64], b: &[C64]) -> Result<ChannelMatrix> {
    let k = a.len();
    if b.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: b.len(),
        });
    }
    if k == 0 {
        return Err(Error::Empty);
    }
    check_sorted(a)?;
    let mut h = DMatrix::<C64>::from_fn(k, k, |i, j| a[i] * b[j].conj());
    for i in 0..k {
        let d = h[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > 1e-12 * d.norm() {
            return Err(Error::NonStandardDiagonal { index: i });
        }
        h[(i, i)] = c(d.re, 0.0);
    }
    ChannelMatrix::new(h)
}

pub(crate) fn check_sorted(a: &[C64]) -> Result<()> {
    for i in 1..a.len() {
        if a[i].norm() < a[i - 1].norm() {
            return Err(Error::NotSorted { index: i });
        }
    }
    Ok(())
}
