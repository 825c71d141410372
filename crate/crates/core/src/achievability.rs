//! Achievable sum rates and the degraded broadcast outer bound.

use serde::Serialize;

use crate::construct::{check_sorted, rank_one_channel};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{ChannelMatrix, LowerBounds};

/// Numerical slack on rate comparisons.
pub const RATE_SLACK: f64 = 1e-12;

/// Largest K accepted by the subset enumeration in [`mac_feasibility`].
pub const MAC_MAX_USERS: usize = 20;

/// Successive-decoding rates `r_k = log2(1 + h_kk^2 / (1 + sum_{i>k} |h_ki|^2))`.
///
/// Receiver `k` removes users `< k` and treats users `> k` as noise.
pub fn succ_dec_rates(h: &ChannelMatrix) -> Vec<f64> {
    let k = h.k();
    (0..k)
        .map(|u| {
            let interference: f64 = ((u + 1)..k).map(|i| h.gain(u, i).norm_sqr()).sum();
            (1.0 + h.direct_gain(u).powi(2) / (1.0 + interference)).log2()
        })
        .collect()
}

/// Sum of [`succ_dec_rates`]; on Z channels this is exactly what treating
/// interference as noise at every receiver achieves.
pub fn tin_sum_rate(h: &ChannelMatrix) -> f64 {
    succ_dec_rates(h).iter().sum()
}

/// Sum rate when every receiver treats all other users as noise.
pub fn interference_as_noise_sum_rate(h: &ChannelMatrix) -> f64 {
    let k = h.k();
    (0..k)
        .map(|u| {
            let interference: f64 = (0..k).filter(|&i| i != u).map(|i| h.gain(u, i).norm_sqr()).sum();
            (1.0 + h.direct_gain(u).powi(2) / (1.0 + interference)).log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacViolation {
    /// 0-based receiver.
    pub receiver: usize,
    /// 0-based users decoded jointly with the receiver's own message.
    pub subset: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacCheckResult {
    pub feasible: bool,
    pub violations: Vec<MacViolation>,
}

/// Checks the successive-decoding rate vector against every per-receiver
/// MAC constraint that involves the receiver's own rate.
pub fn mac_feasibility(h: &ChannelMatrix) -> Result<MacCheckResult> {
    mac_feasibility_for_rates(h, &succ_dec_rates(h))
}

/// [`mac_feasibility`] for an arbitrary rate vector.
pub fn mac_feasibility_for_rates(h: &ChannelMatrix, rates: &[f64]) -> Result<MacCheckResult> {
    let k = h.k();
    if k > MAC_MAX_USERS {
        return Err(Error::TooLarge {
            what: "K for MAC subset enumeration",
            value: k,
            cap: MAC_MAX_USERS,
        });
    }
    if rates.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: rates.len(),
        });
    }
    let mut violations = Vec::new();
    for u in 0..k {
        let noise = 1.0 + ((u + 1)..k).map(|i| h.gain(u, i).norm_sqr()).sum::<f64>();
        for mask in 0u32..(1u32 << u) {
            let subset: Vec<usize> = (0..u).filter(|&j| mask & (1 << j) != 0).collect();
            let lhs = rates[u] + subset.iter().map(|&j| rates[j]).sum::<f64>();
            let power = h.direct_gain(u).powi(2) + subset.iter().map(|&j| h.gain(u, j).norm_sqr()).sum::<f64>();
            let rhs = (1.0 + power / noise).log2();
            if lhs > rhs + RATE_SLACK {
                violations.push(MacViolation {
                    receiver: u,
                    subset,
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(MacCheckResult {
        feasible: violations.is_empty(),
        violations,
    })
}

/// Per-user outer bound of the degraded broadcast channel obtained by letting
/// the transmitters of `H = a b^H` cooperate, for power split `beta`.
pub fn bc_bound(a: &[C64], b: &[C64], beta: &[f64]) -> Result<Vec<f64>> {
    let k = a.len();
    if b.len() != k || beta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: if b.len() != k { b.len() } else { beta.len() },
        });
    }
    check_sorted(a)?;
    if beta.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::BetaInvalid("weights must be finite and nonnegative".into()));
    }
    let total: f64 = beta.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::BetaInvalid(format!("weights sum to {total}, expected 1")));
    }
    let b2: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    Ok((0..k)
        .map(|u| {
            let gain = a[u].norm_sqr();
            let downstream: f64 = beta[(u + 1)..].iter().sum();
            (1.0 + beta[u] * b2 * gain / (1.0 + downstream * b2 * gain)).log2()
        })
        .collect())
}

/// Sum of [`bc_bound`] with `beta_k = |b_k|^2 / |b|^2`.
pub fn degraded_sum_capacity(a: &[C64], b: &[C64]) -> Result<f64> {
    rank_one_channel(a, b)?;
    let b2: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let beta: Vec<f64> = b.iter().map(|z| z.norm_sqr() / b2).collect();
    Ok(bc_bound(a, b, &beta)?.iter().sum())
}

/// Sum-capacity of a rank-one channel written through its direct gains,
/// with `conj(b_k) = h_kk / a_k`.
pub fn rank_one_sum_rate(a: &[C64], diag_gains: &[f64]) -> f64 {
    let k = a.len();
    (0..k)
        .map(|u| {
            let a2 = a[u].norm_sqr();
            let own = a2 * (diag_gains[u] / a[u].norm()).powi(2);
            let rest: f64 = ((u + 1)..k).map(|j| (diag_gains[j] / a[j].norm()).powi(2)).sum();
            (1.0 + own / (1.0 + a2 * rest)).log2()
        })
        .sum()
}

/// Achievable sum rates known for `h`.
pub fn lower_bounds(h: &ChannelMatrix) -> LowerBounds {
    let succ_dec_achievable = h.is_upper_triangular()
        || mac_feasibility(h).map(|r| r.feasible).unwrap_or(false);
    LowerBounds {
        tin: interference_as_noise_sum_rate(h),
        succ_dec: succ_dec_achievable.then(|| tin_sum_rate(h)),
    }
}
