//! Evaluation and minimization of the two outer-bound families over every
//! (subset, permutation) pair.
//!
//! For a subset `S` and an ordering `pi` of it, the KRA family bounds
//! `sum_{u in S} R_u` by
//!
//! ```text
//! sum_i I(Y_{pi_i}; X_{pi_i..pi_s} | X_{pi_1..pi_{i-1}}, Y_{pi_1..pi_{i-1}}, X_{S^c})
//! ```
//!
//! and may use a different noise correlation for every pair, since the
//! capacity region only depends on the per-receiver marginals. The ETW family
//! gives receiver `k` (the k-th element of `S`, ascending) a copy of output
//! `pi_k` stripped of its intended signal, with an optimizable noise
//! correlation.
//!
//! Inputs are fixed iid unit-power Gaussians, so no time sharing appears.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::achievability::lower_bounds;
use crate::construct::recover_sigma;
use crate::correlation::{angles_from_correlation, correlation_buffer_from_angles, embed, param_count};
use crate::error::{Error, Result};
use crate::gaussian_info::{build_joint, conditional_entropy, log2_pi_e, x_label, y_label, genie_label, GenieSpec, RHO_CAP};
use crate::linalg::{c, cholesky_in_place, C64, SINGULAR_PIVOT};
use crate::model::{BoundReport, ChannelMatrix, ConfigEcho, Family, NoiseCorrelation, RateInequality, Witness};
use crate::simplex::NelderMead;

/// Largest K for full (all subsets) enumeration.
pub const FULL_ENUMERATION_CAP: usize = 8;

/// Largest K for sum-rate-only enumeration (all orderings of `[1:K]`).
pub const SUM_RATE_CAP: usize = 10;

/// Restart values further apart than this raise a budget warning.
pub const RESTART_DISAGREEMENT: f64 = 1e-3;

/// Tolerance of the consistency guard `upper >= achievable`.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// Shrinkage toward the identity applied to optimizer iterates so that the
/// noise correlation stays nonsingular.
const SIGMA_SHRINK: f64 = 1e-12;

/// Shrinkage applied to a singular hinted correlation before it is used as a start.
const HINT_SHRINK: f64 = 1e-10;

/// One (subset, ordering) pair. Users are 0-based; `subset` is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundTerm {
    pub subset: Vec<usize>,
    pub perm: Vec<usize>,
}

impl BoundTerm {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut subset = perm.clone();
        subset.sort_unstable();
        if subset.is_empty() {
            return Err(Error::EmptyLabelSet);
        }
        if subset.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!("repeated user in ordering {perm:?}")));
        }
        Ok(Self { subset, perm })
    }

    /// `S = [1:K]` with the natural ordering.
    pub fn full_identity(k: usize) -> Self {
        Self {
            subset: (0..k).collect(),
            perm: (0..k).collect(),
        }
    }

    fn check_k(&self, k: usize) -> Result<()> {
        match self.subset.last() {
            Some(&last) if last >= k => Err(Error::IndexOutOfRange { index: last, k }),
            _ => Ok(()),
        }
    }

    /// Stable 64-bit key used to derive per-term random streams.
    pub fn key(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325_u64;
        for &u in self.subset.iter().chain([usize::MAX].iter()).chain(self.perm.iter()) {
            h ^= u as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Number of (subset, ordering) pairs: `sum_k C(K,k) k!`.
pub fn count_terms(k: usize) -> u128 {
    let mut total = 0u128;
    let mut falling = 1u128; // K (K-1) ... (K-j+1)
    for j in 1..=k as u128 {
        falling *= k as u128 - j + 1;
        total += falling;
    }
    total
}

/// All pairs, subsets by size then lexicographically, orderings lexicographically.
pub fn enumerate_terms(k: usize) -> Result<Vec<BoundTerm>> {
    if k == 0 {
        return Err(Error::Empty);
    }
    if k > FULL_ENUMERATION_CAP {
        return Err(Error::TooLarge {
            what: "K for full enumeration",
            value: k,
            cap: FULL_ENUMERATION_CAP,
        });
    }
    let mut out = Vec::with_capacity(count_terms(k) as usize);
    for size in 1..=k {
        for subset in (0..k).combinations(size) {
            for perm in subset.iter().copied().permutations(size) {
                out.push(BoundTerm {
                    subset: subset.clone(),
                    perm,
                });
            }
        }
    }
    Ok(out)
}

/// Orderings of the full user set only.
pub fn sum_rate_terms(k: usize) -> Result<Vec<BoundTerm>> {
    if k == 0 {
        return Err(Error::Empty);
    }
    if k > SUM_RATE_CAP {
        return Err(Error::TooLarge {
            what: "K for sum-rate enumeration",
            value: k,
            cap: SUM_RATE_CAP,
        });
    }
    Ok((0..k)
        .permutations(k)
        .map(|perm| BoundTerm {
            subset: (0..k).collect(),
            perm,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Function evaluations per restart.
    pub max_evals: usize,
    /// At or below this K, callers may cross-check with an exhaustive grid.
    pub grid_fallback_k: usize,
    /// Convergence threshold in bits.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 8,
            max_evals: 2000,
            grid_fallback_k: 2,
            tolerance: 1e-7,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_evals == 0 || self.grid_fallback_k == 0 {
            return Err(Error::InvalidConfig("counts must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Random stream for (master seed, term, restart).
pub fn stream_rng(seed: u64, term_key: u64, restart: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ term_key) ^ restart))
}

/// Precomputed evaluator of one KRA term.
///
/// Works in local coordinates: local user `i` is `perm[i]`. Step `i`
/// contributes `log2(Schur(G_i + Sigma) / Schur(Sigma))`, where both Schur
/// complements take local user `i` given local users `0..i`, and `G_i` is
/// the Gram matrix of the inputs not yet conditioned on.
#[derive(Debug, Clone)]
pub struct KraEvaluator {
    k: usize,
    term: BoundTerm,
    grams: Vec<Vec<C64>>,
}

impl KraEvaluator {
    pub fn new(h: &ChannelMatrix, term: &BoundTerm) -> Result<Self> {
        let k = h.k();
        term.check_k(k)?;
        let s = term.perm.len();
        let grams = (0..s)
            .map(|step| {
                let unknown = &term.perm[step..];
                let mut g = vec![c(0.0, 0.0); s * s];
                for a in 0..s {
                    for b in 0..s {
                        g[a * s + b] = unknown
                            .iter()
                            .map(|&j| h.gain(term.perm[a], j) * h.gain(term.perm[b], j).conj())
                            .sum();
                    }
                }
                g
            })
            .collect();
        Ok(Self {
            k,
            term: term.clone(),
            grams,
        })
    }

    pub fn local_dim(&self) -> usize {
        self.term.perm.len()
    }

    pub fn term(&self) -> &BoundTerm {
        &self.term
    }

    /// Term value for a row-major local correlation (`s x s`, perm order).
    pub fn value_local(&self, sigma_local: &[C64]) -> Result<f64> {
        let s = self.local_dim();
        let mut sig = sigma_local.to_vec();
        let min_pivot = cholesky_in_place(&mut sig, s);
        if !(min_pivot > SINGULAR_PIVOT) {
            return Err(Error::SingularCovariance { min_pivot });
        }
        let mut m = vec![c(0.0, 0.0); s * s];
        let mut total = 0.0;
        for step in 0..s {
            let n = step + 1;
            let g = &self.grams[step];
            for a in 0..n {
                for b in 0..=a {
                    m[a * n + b] = g[a * s + b] + sigma_local[a * s + b];
                }
            }
            let p = cholesky_in_place(&mut m[..n * n], n);
            if !(p > 0.0) {
                return Err(Error::SingularCovariance { min_pivot: p });
            }
            let given_partial = m[step * n + step].re.powi(2);
            let given_all = sig[step * s + step].re.powi(2);
            let term = (given_partial / given_all).log2();
            if term < -1e-12 {
                return Err(Error::InternalInconsistency(format!(
                    "negative KRA summand {term:e}"
                )));
            }
            total += term.max(0.0);
        }
        Ok(total)
    }

    pub fn value(&self, sigma: &NoiseCorrelation) -> Result<f64> {
        if sigma.k() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: sigma.k(),
            });
        }
        let p = &self.term.perm;
        let s = p.len();
        let local: Vec<C64> = (0..s * s).map(|idx| sigma.get(p[idx / s], p[idx % s])).collect();
        self.value_local(&local)
    }
}

/// KRA term value at a given noise correlation, in bits.
pub fn kra_term_value(h: &ChannelMatrix, sigma: &NoiseCorrelation, t: &BoundTerm) -> Result<f64> {
    KraEvaluator::new(h, t)?.value(sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KraMinimum {
    pub value: f64,
    pub sigma: NoiseCorrelation,
    /// Best value reached by each restart, seeded restarts first, then hints.
    pub restart_values: Vec<f64>,
    pub evals: usize,
    pub warning: Option<String>,
}

fn shrunk_correlation(s: usize, params: &[f64]) -> Vec<C64> {
    let mut buf = correlation_buffer_from_angles(s, params);
    for (idx, v) in buf.iter_mut().enumerate() {
        if idx % (s + 1) != 0 {
            *v *= 1.0 - SIGMA_SHRINK;
        }
    }
    buf
}

/// Seeded multi-start simplex minimization of a KRA term over noise correlations.
pub fn kra_term_min(h: &ChannelMatrix, t: &BoundTerm, cfg: &OptimizerConfig) -> Result<KraMinimum> {
    kra_term_min_with_hints(h, t, cfg, &[])
}

/// As [`kra_term_min`], additionally polishing from each hinted correlation.
pub fn kra_term_min_with_hints(
    h: &ChannelMatrix,
    t: &BoundTerm,
    cfg: &OptimizerConfig,
    hints: &[NoiseCorrelation],
) -> Result<KraMinimum> {
    cfg.validate()?;
    let eval = KraEvaluator::new(h, t)?;
    let s = eval.local_dim();
    let dim = param_count(s);
    let objective = |x: &[f64]| eval.value_local(&shrunk_correlation(s, x)).unwrap_or(f64::INFINITY);

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(cfg.restarts + hints.len());
    for r in 0..cfg.restarts {
        if r == 0 {
            starts.push(vec![0.0; dim]);
            continue;
        }
        let mut rng = stream_rng(cfg.seed, t.key(), r as u64);
        let mut x = vec![0.0; dim];
        for row in 1..s {
            let off = row * (row - 1);
            for j in 0..row {
                x[off + j] = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
                x[off + row + j] = rng.gen_range(0.0..std::f64::consts::TAU);
            }
        }
        starts.push(x);
    }
    let seeded = starts.len();
    for hint in hints {
        if hint.k() != h.k() {
            return Err(Error::DimensionMismatch {
                expected: h.k(),
                found: hint.k(),
            });
        }
        let p = &t.perm;
        let local = nalgebra::DMatrix::from_fn(s, s, |a, b| hint.get(p[a], p[b]));
        let shrunk = local.map(|z| z * (1.0 - HINT_SHRINK)) + nalgebra::DMatrix::identity(s, s) * c(HINT_SHRINK, 0.0);
        if let Ok(x) = angles_from_correlation(&local).or_else(|_| angles_from_correlation(&shrunk)) {
            starts.push(x);
        }
    }

    let mut best_x = vec![0.0; dim];
    let mut best = f64::INFINITY;
    let mut restart_values = Vec::with_capacity(starts.len());
    let mut evals = 0usize;
    for x0 in &starts {
        let (x, v, used) = polish(&objective, x0, cfg);
        evals += used;
        restart_values.push(v);
        if v < best {
            best = v;
            best_x = x;
        }
    }
    if !best.is_finite() {
        return Err(Error::InternalInconsistency(format!(
            "KRA minimization found no finite value for {t:?}"
        )));
    }

    let seeded_vals = &restart_values[..seeded];
    let spread = seeded_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - seeded_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let warning = (spread > RESTART_DISAGREEMENT).then(|| {
        format!(
            "BudgetExhausted: restarts for subset {:?} order {:?} disagree by {spread:.3e} bits",
            t.subset.iter().map(|u| u + 1).collect::<Vec<_>>(),
            t.perm.iter().map(|u| u + 1).collect::<Vec<_>>()
        )
    });

    let local = nalgebra::DMatrix::from_row_slice(s, s, &shrunk_correlation(s, &best_x));
    let sigma = embed(&local, &t.perm, h.k())?;
    Ok(KraMinimum {
        value: best,
        sigma,
        restart_values,
        evals,
        warning,
    })
}

/// Nelder-Mead from `x0`, re-started in place while it keeps improving.
fn polish<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], cfg: &OptimizerConfig) -> (Vec<f64>, f64, usize) {
    let mut x = x0.to_vec();
    let mut value = f(&x);
    let mut used = 1usize;
    if x.is_empty() {
        return (x, value, used);
    }
    let mut step = 0.4;
    while used < cfg.max_evals {
        let nm = NelderMead {
            max_evals: cfg.max_evals - used,
            f_tolerance: cfg.tolerance * 1e-3,
            x_tolerance: 1e-9,
            initial_step: step,
        };
        let r = nm.minimize(|p| f(p), &x);
        used += r.evals;
        let gain = value - r.value;
        if r.value < value {
            value = r.value;
            x = r.x;
        }
        if !(gain > cfg.tolerance) {
            break;
        }
        step = (step * 0.5).max(1e-3);
    }
    (x, value, used)
}

/// One ETW summand `h(Y_k | G_m) - h(G_m | Y_k, X_1..X_K)` in closed form,
/// with genie noise correlation `rho` against `Z_k` and independent channel noises.
pub fn etw_summand(h: &ChannelMatrix, k: usize, m: usize, rho: C64) -> f64 {
    let kk = h.k();
    let var_y = 1.0 + (0..kk).map(|j| h.gain(k, j).norm_sqr()).sum::<f64>();
    let var_g = 1.0 + (0..kk).filter(|&j| j != m).map(|j| h.gain(m, j).norm_sqr()).sum::<f64>();
    let cov: C64 = (0..kk)
        .filter(|&j| j != m)
        .map(|j| h.gain(k, j) * h.gain(m, j).conj())
        .sum::<C64>()
        + rho;
    ((var_y - cov.norm_sqr() / var_g) / (1.0 - rho.norm_sqr())).log2()
}

/// ETW term value through the joint Gaussian law, in bits.
///
/// `rhos[i]` couples the genie copying output `perm[i]` with receiver
/// `subset[i]`.
pub fn etw_term_value(h: &ChannelMatrix, t: &BoundTerm, rhos: &[C64]) -> Result<f64> {
    let k = h.k();
    t.check_k(k)?;
    if rhos.len() != t.subset.len() {
        return Err(Error::DimensionMismatch {
            expected: t.subset.len(),
            found: rhos.len(),
        });
    }
    let genies: Vec<GenieSpec> = t
        .subset
        .iter()
        .zip(&t.perm)
        .zip(rhos)
        .map(|((&receiver, &target), &rho)| GenieSpec {
            target,
            paired_with: receiver,
            rho,
        })
        .collect();
    let joint = build_joint(h, &NoiseCorrelation::identity(k), &genies)?;
    let all_x: Vec<String> = (0..k).map(x_label).collect();
    let mut total = 0.0;
    for g in &genies {
        let y = y_label(g.paired_with);
        let gl = genie_label(g.target);
        let first = conditional_entropy(&joint, &[y.as_str()], &[gl.as_str()])?;
        let mut cond = vec![y.clone()];
        cond.extend(all_x.iter().cloned());
        let second = conditional_entropy(&joint, &[gl.clone()], &cond)?;
        let one_minus = 1.0 - g.rho.norm_sqr();
        let analytic = log2_pi_e() + one_minus.log2();
        // rounding in the joint route grows with the squared output power over 1 - |rho|^2
        let power = 1.0 + joint.covariance(&y, &y)?.re + joint.covariance(&gl, &gl)?.re;
        let tol = 1e-10 + 8.0 * f64::EPSILON * power * power / one_minus;
        if (second - analytic).abs() > tol {
            return Err(Error::InternalInconsistency(format!(
                "genie conditional entropy {second} differs from closed form {analytic}"
            )));
        }
        total += first - analytic;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtwMinimum {
    pub value: f64,
    pub rhos: Vec<C64>,
}

const ETW_GRID_MAGNITUDES: usize = 24;
const ETW_GRID_PHASES: usize = 32;

fn rho_from(u: f64, phase: f64) -> C64 {
    C64::from_polar(RHO_CAP * u.sin().powi(2), phase)
}

/// Minimizes one ETW summand over the genie correlation: a magnitude/phase
/// grid followed by simplex refinement.
pub fn minimize_etw_summand(h: &ChannelMatrix, k: usize, m: usize, cfg: &OptimizerConfig) -> (f64, C64) {
    let f = |p: &[f64]| etw_summand(h, k, m, rho_from(p[0], p[1]));
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..ETW_GRID_MAGNITUDES {
        let u = std::f64::consts::FRAC_PI_2 * i as f64 / (ETW_GRID_MAGNITUDES - 1) as f64;
        for j in 0..ETW_GRID_PHASES {
            let phase = std::f64::consts::TAU * j as f64 / ETW_GRID_PHASES as f64;
            let v = f(&[u, phase]);
            if v < best.0 {
                best = (v, [u, phase]);
            }
        }
    }
    let (x, v, _) = polish(&f, &best.1, cfg);
    if v < best.0 {
        (v, rho_from(x[0], x[1]))
    } else {
        (best.0, rho_from(best.1[0], best.1[1]))
    }
}

/// ETW term minimized over the genie correlations. Summands are independent
/// so each is minimized on its own.
pub fn etw_term_min(h: &ChannelMatrix, t: &BoundTerm, cfg: &OptimizerConfig) -> Result<EtwMinimum> {
    cfg.validate()?;
    t.check_k(h.k())?;
    let rhos: Vec<C64> = t
        .subset
        .iter()
        .zip(&t.perm)
        .map(|(&k, &m)| minimize_etw_summand(h, k, m, cfg).1)
        .collect();
    finish_etw(h, t, rhos)
}

/// Re-evaluates through the joint law; never reports worse than all-zero rhos.
fn finish_etw(h: &ChannelMatrix, t: &BoundTerm, rhos: Vec<C64>) -> Result<EtwMinimum> {
    let value = etw_term_value(h, t, &rhos)?;
    let zeros = vec![c(0.0, 0.0); rhos.len()];
    let at_zero = etw_term_value(h, t, &zeros)?;
    Ok(if at_zero <= value {
        EtwMinimum {
            value: at_zero,
            rhos: zeros,
        }
    } else {
        EtwMinimum { value, rhos }
    })
}

/// Noise correlation that makes the natural-order term for `t` collapse to
/// the successive-decoding sum, when the sub-channel admits one.
pub fn degraded_hint(h: &ChannelMatrix, t: &BoundTerm) -> Option<NoiseCorrelation> {
    let sub = h.principal(&t.perm);
    let local = recover_sigma(&sub).ok()?;
    embed(local.matrix(), &t.perm, h.k()).ok()
}

/// Full region (all nonempty subsets) for the requested families.
pub fn region(h: &ChannelMatrix, cfg: &OptimizerConfig, families: &[Family]) -> Result<BoundReport> {
    region_with_mode(h, cfg, families, false)
}

pub fn region_with_mode(
    h: &ChannelMatrix,
    cfg: &OptimizerConfig,
    families: &[Family],
    sum_rate_only: bool,
) -> Result<BoundReport> {
    cfg.validate()?;
    let families: Vec<Family> = families.iter().copied().sorted().dedup().collect();
    if families.is_empty() {
        return Err(Error::InvalidConfig("no bound family requested".into()));
    }
    let k = h.k();
    let terms = if sum_rate_only {
        sum_rate_terms(k)?
    } else {
        enumerate_terms(k)?
    };

    let mut inequalities: Vec<RateInequality> = Vec::new();
    let mut warnings = Vec::new();
    let mut per_subset: BTreeMap<(usize, Vec<usize>), Vec<RateInequality>> = BTreeMap::new();

    if families.contains(&Family::Kra) {
        let mins: Vec<KraMinimum> = terms
            .par_iter()
            .map(|t| {
                let hints: Vec<NoiseCorrelation> = degraded_hint(h, t).into_iter().collect();
                kra_term_min_with_hints(h, t, cfg, &hints)
            })
            .collect::<Result<_>>()?;
        for (t, m) in terms.iter().zip(mins) {
            if let Some(w) = &m.warning {
                warnings.push(w.clone());
            }
            keep_min(
                &mut per_subset,
                RateInequality {
                    subset: t.subset.clone(),
                    value: m.value,
                    family: Family::Kra,
                    witness: Witness::Kra {
                        perm: t.perm.clone(),
                        sigma: m.sigma,
                    },
                },
            );
        }
    }

    if families.contains(&Family::Etw) {
        let pairs: Vec<(usize, usize)> = terms
            .iter()
            .flat_map(|t| t.subset.iter().copied().zip(t.perm.iter().copied()))
            .sorted()
            .dedup()
            .collect();
        let solved: BTreeMap<(usize, usize), (f64, C64)> = pairs
            .par_iter()
            .map(|&(kk, m)| ((kk, m), minimize_etw_summand(h, kk, m, cfg)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        // pick the best ordering per subset from cached summands, then
        // re-evaluate only that one through the joint law
        let mut best: BTreeMap<(usize, Vec<usize>), (f64, &BoundTerm)> = BTreeMap::new();
        for t in &terms {
            let v: f64 = t.subset.iter().zip(&t.perm).map(|(&kk, &m)| solved[&(kk, m)].0).sum();
            let key = (t.subset.len(), t.subset.clone());
            if best.get(&key).map_or(true, |(bv, _)| v < *bv) {
                best.insert(key, (v, t));
            }
        }
        for (_, (_, t)) in best {
            let rhos: Vec<C64> = t.subset.iter().zip(&t.perm).map(|(&kk, &m)| solved[&(kk, m)].1).collect();
            let e = finish_etw(h, t, rhos)?;
            keep_min(
                &mut per_subset,
                RateInequality {
                    subset: t.subset.clone(),
                    value: e.value,
                    family: Family::Etw,
                    witness: Witness::Etw {
                        perm: t.perm.clone(),
                        rhos: e.rhos,
                    },
                },
            );
        }
    }

    if families.contains(&Family::Bc) {
        if let Some(d) = crate::certify::rank_one_decomposition(h) {
            let b2: f64 = d.b.iter().map(|z| z.norm_sqr()).sum();
            let beta: Vec<f64> = d.b.iter().map(|z| z.norm_sqr() / b2).collect();
            let value = crate::achievability::degraded_sum_capacity(&d.a, &d.b)?;
            keep_min(
                &mut per_subset,
                RateInequality {
                    subset: (0..k).collect(),
                    value,
                    family: Family::Bc,
                    witness: Witness::Bc { order: d.order, beta },
                },
            );
        } else {
            warnings.push("BC family skipped: channel is not rank one".into());
        }
    }

    for (_, list) in per_subset {
        inequalities.extend(list);
    }
    let sum_rate_upper = inequalities
        .iter()
        .filter(|q| q.subset.len() == k)
        .map(|q| q.value)
        .fold(f64::INFINITY, f64::min);
    let lower = lower_bounds(h);
    let consistent = sum_rate_upper >= lower.best() - CONSISTENCY_TOLERANCE;
    if !consistent {
        warnings.push(format!(
            "inconsistent: sum-rate upper bound {sum_rate_upper} below achievable {}",
            lower.best()
        ));
    }
    Ok(BoundReport {
        channel: h.clone(),
        inequalities,
        sum_rate_upper,
        lower_bounds: lower,
        consistent,
        config: ConfigEcho {
            seed: cfg.seed,
            restarts: cfg.restarts,
            max_evals: cfg.max_evals,
            grid_fallback_k: cfg.grid_fallback_k,
            tolerance: cfg.tolerance,
            families,
            sum_rate_only,
        },
        warnings,
    })
}

fn keep_min(map: &mut BTreeMap<(usize, Vec<usize>), Vec<RateInequality>>, q: RateInequality) {
    let list = map.entry((q.subset.len(), q.subset.clone())).or_default();
    match list.iter_mut().find(|e| e.family == q.family) {
        Some(existing) if q.value < existing.value => *existing = q,
        Some(_) => {}
        None => {
            list.push(q);
            list.sort_by_key(|e| e.family);
        }
    }
}
