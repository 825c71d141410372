//! Independent validation paths: a Monte-Carlo mutual-information estimator
//! and an exhaustive grid search over noise correlations. Neither is used by
//! the bound computations themselves.

use std::f64::consts::{FRAC_PI_2, LN_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::correlation::{correlation_from_angles, embed};
use crate::error::{Error, Result};
use crate::gaussian_info::JointGaussian;
use crate::linalg::{c, submatrix, C64};
use crate::model::{ChannelMatrix, NoiseCorrelation};
use crate::outer_bound::BoundTerm;

pub const MC_MIN_SAMPLES: usize = 10_000;

/// Sample-index partitions; each draws from its own derived stream.
const MC_PARTITIONS: usize = 16;

/// Largest K accepted by [`grid_min_sigma`].
pub const GRID_MAX_K: usize = 3;

/// Best grid cells refined by pattern search.
const REFINE_STARTS: usize = 16;

const PATTERN_MAX_EVALS: usize = 200_000;

/// Smallest factor-row diagonal, as a power of ten, tried by the reduced search.
const ROW_LOG10_MIN: f64 = -4.0;

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Circularly-symmetric unit-variance complex normal by Box-Muller.
fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    C64::from_polar((-u1.ln()).sqrt(), TAU * u2)
}

/// Conditional law of the first `na` coordinates given the rest.
struct Conditional {
    /// Regression matrix, `na x nc`.
    w: DMatrix<C64>,
    /// Inverse conditional covariance.
    precision: DMatrix<C64>,
    log2_det: f64,
}

impl Conditional {
    fn new(cov: &DMatrix<C64>, na: usize, cond: &[usize]) -> Result<Self> {
        let a: Vec<usize> = (0..na).collect();
        let saa = submatrix(cov, &a, &a);
        let (w, schur) = if cond.is_empty() {
            (DMatrix::zeros(na, 0), saa)
        } else {
            let scc = submatrix(cov, cond, cond);
            let sca = submatrix(cov, cond, &a);
            let chol = scc.cholesky().ok_or(Error::SingularCovariance { min_pivot: 0.0 })?;
            let w = chol.solve(&sca).adjoint();
            let schur = &saa - &w * &sca;
            (w, schur)
        };
        let schur = (&schur + schur.adjoint()) * c(0.5, 0.0);
        let chol = schur
            .clone()
            .cholesky()
            .ok_or(Error::SingularCovariance { min_pivot: 0.0 })?;
        let log2_det = chol.l().diagonal().iter().map(|d| 2.0 * d.re.log2()).sum();
        Ok(Self {
            w,
            precision: chol.inverse(),
            log2_det,
        })
    }

    /// log2 density of `a` given the conditioning values.
    fn log2_density(&self, a: &DVector<C64>, given: &DVector<C64>) -> f64 {
        let r = if given.is_empty() { a.clone() } else { a - &self.w * given };
        let quad = (r.adjoint() * &self.precision * &r)[(0, 0)].re;
        -(a.len() as f64) * PI.log2() - self.log2_det - quad / LN_2
    }
}

/// Monte-Carlo estimate of `I(A; B | C)` in bits with its standard error.
///
/// Samples are drawn through a Cholesky factor of the joint covariance of
/// `A, B, C`; each contributes `log2 p(a | b, c) - log2 p(a | c)` with exact
/// Gaussian conditional densities.
pub fn mc_mutual_information<S: AsRef<str> + Sync>(
    j: &JointGaussian,
    a: &[S],
    b: &[S],
    cond: &[S],
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "at least {MC_MIN_SAMPLES} samples required, got {n_samples}"
        )));
    }
    let ai = j.indices(a)?;
    let bi = j.indices(b)?;
    let ci = j.indices(cond)?;
    let mut all = ai.clone();
    all.extend(&bi);
    all.extend(&ci);
    let mut seen = all.clone();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::LabelOverlap(j.labels()[w[0]].clone()));
    }

    let cov = submatrix(j.cov(), &all, &all);
    let n = all.len();
    let (na, nb) = (ai.len(), bi.len());
    let factor = cov
        .clone()
        .cholesky()
        .ok_or(Error::SingularCovariance { min_pivot: 0.0 })?
        .l();
    let c_only: Vec<usize> = (na + nb..n).collect();
    let b_and_c: Vec<usize> = (na..n).collect();
    let given_c = Conditional::new(&cov, na, &c_only)?;
    let given_bc = Conditional::new(&cov, na, &b_and_c)?;

    let sums: Vec<(f64, f64)> = (0..MC_PARTITIONS)
        .into_par_iter()
        .map(|p| {
            let count = n_samples / MC_PARTITIONS + usize::from(p < n_samples % MC_PARTITIONS);
            let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed) ^ p as u64));
            let mut s = 0.0;
            let mut s2 = 0.0;
            let mut w = DVector::<C64>::zeros(n);
            for _ in 0..count {
                for v in w.iter_mut() {
                    *v = complex_normal(&mut rng);
                }
                let x = &factor * &w;
                let av = x.rows(0, na).into_owned();
                let cv = x.rows(na + nb, n - na - nb).into_owned();
                let bcv = x.rows(na, n - na).into_owned();
                let d = given_bc.log2_density(&av, &bcv) - given_c.log2_density(&av, &cv);
                s += d;
                s2 += d * d;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let nf = n_samples as f64;
    let mean = s / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Term value computed from determinants; independent of the Cholesky-based
/// evaluator used by the optimizer. Returns `+inf` on singular input.
struct DirectTerm {
    s: usize,
    /// One Gram matrix of the still-unknown inputs per step, perm order.
    grams: Vec<DMatrix<C64>>,
}

impl DirectTerm {
    fn new(h: &ChannelMatrix, t: &BoundTerm) -> Self {
        let s = t.perm.len();
        let rows = DMatrix::from_fn(s, h.k(), |i, j| h.gain(t.perm[i], j));
        let grams = (0..s)
            .map(|step| {
                let mut m = DMatrix::<C64>::zeros(s, h.k());
                for &u in &t.perm[step..] {
                    m.set_column(u, &rows.column(u));
                }
                &m * m.adjoint()
            })
            .collect();
        Self { s, grams }
    }

    fn value(&self, sigma: &DMatrix<C64>) -> f64 {
        let mut total = 0.0;
        let det = |m: DMatrix<C64>, n: usize| -> f64 {
            if n == 0 {
                1.0
            } else {
                m.view((0, 0), (n, n)).determinant().re
            }
        };
        for step in 0..self.s {
            let full = &self.grams[step] + sigma;
            let num = det(full.clone(), step + 1) * det(sigma.clone(), step);
            let den = det(full, step) * det(sigma.clone(), step + 1);
            if !(num > 0.0 && den > 0.0) {
                return f64::INFINITY;
            }
            total += (num / den).log2();
        }
        total
    }

    fn value_at(&self, params: &[f64]) -> f64 {
        self.value(&correlation_from_angles(self.s, params))
    }
}

fn magnitude_grid(resolution: usize, inclusive: bool) -> Vec<f64> {
    if resolution == 1 {
        return vec![0.0];
    }
    let denom = if inclusive { resolution - 1 } else { resolution } as f64;
    (0..resolution).map(|j| FRAC_PI_2 * j as f64 / denom).collect()
}

fn phase_grid(resolution: usize) -> Vec<f64> {
    (0..resolution).map(|j| TAU * j as f64 / resolution as f64).collect()
}

/// Exhaustive grid over the angle parameterization of the term's noise
/// correlation, followed by compass refinement from the best cell.
pub fn grid_min_sigma(h: &ChannelMatrix, t: &BoundTerm, resolution: usize) -> Result<(f64, NoiseCorrelation)> {
    let k = h.k();
    if k > GRID_MAX_K {
        return Err(Error::TooLarge {
            what: "K for grid search",
            value: k,
            cap: GRID_MAX_K,
        });
    }
    if resolution == 0 {
        return Err(Error::InvalidConfig("grid resolution must be positive".into()));
    }
    if let Some(&u) = t.perm.iter().find(|&&u| u >= k) {
        return Err(Error::IndexOutOfRange { index: u, k });
    }
    let direct = DirectTerm::new(h, t);
    let s = t.perm.len();
    let first = magnitude_grid(resolution, false);
    let other = magnitude_grid(resolution, true);
    let phases = phase_grid(resolution);

    let mut cells: Vec<(f64, Vec<f64>)> = match s {
        1 => vec![(direct.value_at(&[]), Vec::new())],
        2 => first
            .iter()
            .flat_map(|&th| phases.iter().map(move |&ph| vec![th, ph]))
            .map(|x| (direct.value_at(&x), x))
            .collect(),
        3 => grid_three(&direct, &first, &other, &phases),
        _ => unreachable!("subset larger than K"),
    };
    cells.retain(|c| c.0.is_finite());
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = cells
        .first()
        .cloned()
        .ok_or_else(|| Error::InternalInconsistency("grid search found no finite value".into()))?;
    if resolution > 1 && s > 1 {
        let cell_mag = FRAC_PI_2 / resolution as f64;
        let cell_phase = TAU / resolution as f64;
        let unit = angle_steps(s, cell_mag, cell_phase);
        for start in cells.into_iter().take(REFINE_STARTS) {
            let refined = hooke_jeeves(&|y: &[f64]| direct.value_at(y), start, &unit);
            if refined.0 < best.0 {
                best = refined;
            }
        }
    }
    let mut value = best.0;
    let mut local = correlation_from_angles(s, &best.1);
    if s == 3 && resolution > 1 {
        let cell_mag = FRAC_PI_2 / resolution as f64;
        let cell_phase = TAU / resolution as f64;
        if let Some((v, sigma)) = reduced_three(&direct, &first, &phases, cell_mag, cell_phase) {
            if v < value {
                value = v;
                local = sigma;
            }
        }
    }
    Ok((value, embed(&local, &t.perm, k)?))
}

/// Grid for three users with the innermost row handled in closed form:
/// the third step only needs the last Cholesky pivot of a 3x3 matrix whose
/// leading 2x2 block is fixed by the outer loops. Returns the best cell for
/// each setting of the first row.
fn grid_three(direct: &DirectTerm, first: &[f64], other: &[f64], phases: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let g = &direct.grams;
    let cis: Vec<C64> = phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
    let trig: Vec<(f64, f64)> = first.iter().map(|&a| (a.sin(), a.cos())).collect();
    let trig_other: Vec<(f64, f64)> = other.iter().map(|&a| (a.sin(), a.cos())).collect();
    let mut cells = Vec::with_capacity(first.len() * phases.len());

    for (i1, &(s1, c1)) in trig.iter().enumerate() {
        for (p1, &e1) in cis.iter().enumerate() {
            // row 1 of the factor: (s1 e1, c1)
            let l10 = e1 * s1;
            let l11 = c1;
            let rho10 = l10;
            let sigma2 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), rho10.conj(), rho10, c(1.0, 0.0)]);
            let t0 = (g[0][(0, 0)].re + 1.0).log2();
            let m1 = &g[1].view((0, 0), (2, 2)).into_owned() + &sigma2;
            let d1 = m1.determinant().re;
            if !(d1 > 0.0) || !(l11 > 0.0) {
                continue;
            }
            let t1 = (d1 / (m1[(0, 0)].re * l11 * l11)).log2();
            // Cholesky of the leading block of G_2 + Sigma
            let a00 = g[2][(0, 0)].re + 1.0;
            let a10 = g[2][(1, 0)] + rho10;
            let a11 = g[2][(1, 1)].re + 1.0;
            let q00 = a00.sqrt();
            let q10 = a10 / q00;
            let q11sq = a11 - q10.norm_sqr();
            if !(q11sq > 0.0) {
                continue;
            }
            let q11 = q11sq.sqrt();
            let g20 = g[2][(2, 0)];
            let g21 = g[2][(2, 1)];
            let d2 = g[2][(2, 2)].re + 1.0;

            let mut local_best = (f64::INFINITY, [0usize; 4]);
            for (i2, &(s2a, c2a)) in trig.iter().enumerate() {
                let diag2 = c2a * c2a;
                if !(diag2 > 0.0) {
                    continue;
                }
                for (i3, &(s3, c3)) in trig_other.iter().enumerate() {
                    let m0 = s2a * c3;
                    let m1v = s2a * s3;
                    for (p2, &e2) in cis.iter().enumerate() {
                        let r20 = e2 * m0;
                        let v0 = g20 + r20;
                        let z0 = v0 / q00;
                        let base1 = g21 + r20 * l10.conj();
                        for (p3, &e3) in cis.iter().enumerate() {
                            let r21 = base1 + e3 * (m1v * l11);
                            let z1 = (r21 - z0 * q10.conj()) / q11;
                            let pivot = d2 - z0.norm_sqr() - z1.norm_sqr();
                            let ratio = pivot / diag2;
                            if ratio < local_best.0 {
                                local_best = (ratio, [i2, i3, p2, p3]);
                            }
                        }
                    }
                }
            }
            if !(local_best.0 > 0.0) || !local_best.0.is_finite() {
                continue;
            }
            let [i2, i3, p2, p3] = local_best.1;
            let x = vec![first[i1], phases[p1], first[i2], other[i3], phases[p2], phases[p3]];
            cells.push((t0 + t1 + local_best.0.log2(), x));
        }
    }
    // re-evaluate on the determinant path
    for cell in &mut cells {
        cell.0 = direct.value_at(&cell.1);
    }
    cells
}

fn explore<F: Fn(&[f64]) -> f64>(f: &F, unit: &[f64], base: &[f64], base_val: f64, scale: f64, evals: &mut usize) -> (Vec<f64>, f64) {
    let mut x = base.to_vec();
    let mut v = base_val;
    for i in 0..x.len() {
        for dir in [1.0, -1.0] {
            let mut y = x.clone();
            y[i] += dir * scale * unit[i];
            let w = f(&y);
            *evals += 1;
            if w < v {
                x = y;
                v = w;
                break;
            }
        }
    }
    (x, v)
}

/// Hooke-Jeeves search: coordinate exploration followed by pattern moves
/// along the last successful displacement. Steps start at `unit` and halve
/// until the largest is below `1e-10`.
fn hooke_jeeves<F: Fn(&[f64]) -> f64>(f: &F, start: (f64, Vec<f64>), unit: &[f64]) -> (f64, Vec<f64>) {
    let widest = unit.iter().cloned().fold(0.0, f64::max);
    let mut evals = 0usize;
    let (mut best, mut x) = start;
    let mut scale = 1.0;
    while scale * widest > 1e-10 && evals < PATTERN_MAX_EVALS {
        let (mut y, mut v) = explore(f, unit, &x, best, scale, &mut evals);
        if v >= best {
            scale *= 0.5;
            continue;
        }
        loop {
            let prev = std::mem::replace(&mut x, y.clone());
            best = v;
            let jump: Vec<f64> = y.iter().zip(&prev).map(|(a, b)| 2.0 * a - b).collect();
            let jump_val = f(&jump);
            evals += 1;
            let (z, w) = explore(f, unit, &jump, jump_val, scale, &mut evals);
            if w < best {
                y = z;
                v = w;
            } else {
                break;
            }
        }
    }
    (best, x)
}

fn angle_steps(s: usize, mag_step: f64, phase_step: f64) -> Vec<f64> {
    (1..s)
        .flat_map(|row| (0..2 * row).map(move |j| j >= row))
        .map(|phase| if phase { phase_step } else { mag_step })
        .collect()
}

/// `max ||cv + D v||^2` over `||v|| = r`, with its maximizer.
fn sphere_max(cv: &DVector<C64>, d: &DMatrix<C64>, r: f64) -> (f64, DVector<C64>) {
    let n = d.ncols();
    let value = |v: &DVector<C64>| (cv + d * v).norm_squared();
    if r <= 0.0 {
        let v = DVector::zeros(n);
        return (value(&v), v);
    }
    let eig = nalgebra::SymmetricEigen::new(d.adjoint() * d);
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let b = eig.eigenvectors.adjoint() * (d.adjoint() * cv);
    let top = (0..n).max_by(|&x, &y| lam[x].total_cmp(&lam[y])).unwrap_or(0);
    let lmax = lam[top];
    let build = |coef: &dyn Fn(usize) -> C64| -> DVector<C64> {
        let mut v = DVector::zeros(n);
        for i in 0..n {
            v += eig.eigenvectors.column(i) * coef(i);
        }
        v
    };
    let bnorm = b.norm();
    let scale = 1.0 + bnorm + lmax.abs();
    if b[top].norm() <= 1e-13 * scale {
        // degenerate direction: fill the remaining radius along the top eigenvector
        let gap = |i: usize| lmax - lam[i];
        let rest: f64 = (0..n)
            .filter(|&i| i != top && gap(i) > 1e-13 * scale)
            .map(|i| b[i].norm_sqr() / gap(i).powi(2))
            .sum();
        if rest <= r * r {
            let fill = (r * r - rest).sqrt();
            let v = build(&|i| {
                if i == top {
                    c(fill, 0.0)
                } else if gap(i) > 1e-13 * scale {
                    b[i] / gap(i)
                } else {
                    c(0.0, 0.0)
                }
            });
            return (value(&v), v);
        }
    }
    let norm2 = |mu: f64| (0..n).map(|i| b[i].norm_sqr() / (mu - lam[i]).powi(2)).sum::<f64>();
    let (mut lo, mut hi) = (lmax, lmax + bnorm / r + 1e-300);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm2(mid) > r * r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = build(&|i| b[i] / (hi - lam[i]));
    let v = if v.norm() > 0.0 { &v * c(r / v.norm(), 0.0) } else { v };
    (value(&v), v)
}

/// Three-user term with the last factor row minimized almost exactly.
///
/// For a fixed first row `(s1 e^{i phi1}, c1, 0)` the last Cholesky pivot of
/// `G_2 + Sigma` is `M_22 - ||c + D v||^2`, where `(conj(v), l2)` is the last
/// factor row. For each `l2` the maximizing `v` solves a sphere-constrained
/// quadratic; `l2` itself is found by a log-spaced scan plus golden section.
struct ReducedThree<'a> {
    direct: &'a DirectTerm,
}

impl ReducedThree<'_> {
    fn factor(&self, th1: f64, ph1: f64) -> DMatrix<C64> {
        let mut l = DMatrix::<C64>::zeros(3, 3);
        l[(0, 0)] = c(1.0, 0.0);
        l[(1, 0)] = C64::from_polar(th1.sin(), ph1);
        l[(1, 1)] = c(th1.cos(), 0.0);
        l
    }

    /// Best last row for the given first row: `(log2 ratio of step 3, row)`.
    fn last_row(&self, l: &DMatrix<C64>) -> Option<(f64, Vec<C64>)> {
        let g = &self.direct.grams[2];
        let l01 = l.view((0, 0), (2, 2)).into_owned();
        let a = g.view((0, 0), (2, 2)).into_owned() + &l01 * l01.adjoint();
        let chol = a.cholesky()?;
        let lower = chol.l();
        let col = DVector::from_iterator(2, (0..2).map(|j| g[(j, 2)]));
        let cvec = lower.solve_lower_triangular(&col)?;
        let dmat = lower.solve_lower_triangular(&l01)?;
        let m22 = g[(2, 2)].re + 1.0;
        let ratio = |l2: f64| -> (f64, DVector<C64>) {
            let r = (1.0 - l2 * l2).max(0.0).sqrt();
            let (f, v) = sphere_max(&cvec, &dmat, r);
            let pivot = m22 - f;
            (if pivot > 0.0 { pivot / (l2 * l2) } else { f64::INFINITY }, v)
        };
        // scan log10(l2) over [-4, 0], then golden section on the best bracket;
        // below that both pivots drown in rounding
        let n = 161;
        let xs: Vec<f64> = (0..n).map(|i| ROW_LOG10_MIN * (1.0 - i as f64 / (n - 1) as f64)).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| ratio(10f64.powf(x)).0).collect();
        let ib = (0..n).min_by(|&x, &y| vals[x].total_cmp(&vals[y]))?;
        let (mut lo, mut hi) = (xs[ib.saturating_sub(1)], xs[(ib + 1).min(n - 1)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = ratio(10f64.powf(x1)).0;
        let mut f2 = ratio(10f64.powf(x2)).0;
        for _ in 0..80 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = ratio(10f64.powf(x1)).0;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = ratio(10f64.powf(x2)).0;
            }
        }
        let mut best_x = if f1 <= f2 { x1 } else { x2 };
        if vals[ib] < f1.min(f2) {
            best_x = xs[ib];
        }
        let l2 = 10f64.powf(best_x);
        let (q, v) = ratio(l2);
        if !q.is_finite() || q <= 0.0 {
            return None;
        }
        Some((q.log2(), vec![v[0].conj(), v[1].conj(), c(l2, 0.0)]))
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x).map_or(f64::INFINITY, |(v, _)| v)
    }

    fn evaluate(&self, x: &[f64]) -> Option<(f64, DMatrix<C64>)> {
        let mut l = self.factor(x[0], x[1]);
        let c1 = l[(1, 1)].re;
        if !(c1 >= 10f64.powf(ROW_LOG10_MIN)) {
            return None;
        }
        let g = &self.direct.grams;
        let t0 = (g[0][(0, 0)].re + 1.0).log2();
        let sigma2 = l.view((0, 0), (2, 2)).into_owned() * l.view((0, 0), (2, 2)).adjoint();
        let m1 = g[1].view((0, 0), (2, 2)).into_owned() + sigma2;
        let d1 = m1.determinant().re;
        if !(d1 > 0.0) {
            return None;
        }
        let t1 = (d1 / (m1[(0, 0)].re * c1 * c1)).log2();
        let (t2, row) = self.last_row(&l)?;
        for (j, z) in row.into_iter().enumerate() {
            l[(2, j)] = z;
        }
        Some((t0 + t1 + t2, &l * l.adjoint()))
    }
}

/// Grid over the first factor row with the last row minimized in closed form,
/// then Hooke-Jeeves refinement of the best cells. Returns the correlation
/// found and its value on the determinant path.
fn reduced_three(direct: &DirectTerm, first: &[f64], phases: &[f64], cell_mag: f64, cell_phase: f64) -> Option<(f64, DMatrix<C64>)> {
    let red = ReducedThree { direct };
    let mut cells: Vec<(f64, Vec<f64>)> = first
        .iter()
        .flat_map(|&th| phases.iter().map(move |&ph| vec![th, ph]))
        .map(|x| (red.value(&x), x))
        .filter(|c| c.0.is_finite())
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, DMatrix<C64>)> = None;
    for start in cells.into_iter().take(REFINE_STARTS) {
        let (_, x) = hooke_jeeves(&|y: &[f64]| red.value(y), start, &[cell_mag, cell_phase]);
        if let Some((_, sigma)) = red.evaluate(&x) {
            let v = direct.value(&sigma);
            if best.as_ref().map_or(true, |b| v < b.0) {
                best = Some((v, sigma));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_info::{build_joint, conditional_mi};
    use crate::outer_bound::kra_term_value;

    #[test]
    fn mc_single_link_one_bit() {
        let h = ChannelMatrix::from_real_rows(&[vec![1.0]]).unwrap();
        let j = build_joint(&h, &NoiseCorrelation::identity(1), &[]).unwrap();
        let (est, se) = mc_mutual_information(&j, &["Y1"], &["X1"], &[], 200_000, 3).unwrap();
        assert!((est - 1.0).abs() < 3.0 * se + 1e-12, "{est} {se}");
    }

    #[test]
    fn mc_independent_blocks() {
        let h = ChannelMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let j = build_joint(&h, &NoiseCorrelation::identity(2), &[]).unwrap();
        let (est, se) = mc_mutual_information(&j, &["Y1"], &["X2"], &[], 50_000, 9).unwrap();
        assert!(est.abs() <= 3.0 * se + 1e-12, "{est} {se}");
    }

    #[test]
    fn mc_is_deterministic_and_checks_inputs() {
        let h = ChannelMatrix::from_real_rows(&[vec![1.0, 0.4], vec![0.2, 1.5]]).unwrap();
        let j = build_joint(&h, &NoiseCorrelation::identity(2), &[]).unwrap();
        let a = mc_mutual_information(&j, &["Y1"], &["X1"], &["X2"], 20_000, 5).unwrap();
        let b = mc_mutual_information(&j, &["Y1"], &["X1"], &["X2"], 20_000, 5).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            mc_mutual_information(&j, &["Y1"], &["X1"], &[], 10, 0),
            Err(Error::InvalidConfig(_))
        ));
        let exact = conditional_mi(&j, &["Y1"], &["X1"], &["X2"]).unwrap();
        assert!((a.0 - exact).abs() < 4.0 * a.1);
    }

    #[test]
    fn direct_term_matches_evaluator() {
        let h = ChannelMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.3, 0.4), c(-0.5, 0.2)],
            vec![c(0.2, -0.6), c(1.4, 0.0), c(0.3, 0.3)],
            vec![c(0.7, 0.1), c(-0.2, -0.2), c(0.8, 0.0)],
        ])
        .unwrap();
        let params = [0.4, 1.0, 0.7, 0.3, -2.0, 0.5];
        for perm in [vec![0, 1, 2], vec![2, 0, 1], vec![1, 2]] {
            let t = BoundTerm::new(perm.clone()).unwrap();
            let local_params: Vec<f64> = if perm.len() == 3 { params.to_vec() } else { vec![0.4, 1.0] };
            let local = correlation_from_angles(perm.len(), &local_params);
            let full = embed(&local, &perm, 3).unwrap();
            let d = DirectTerm::new(&h, &t).value(&local);
            let e = kra_term_value(&h, &full, &t).unwrap();
            assert!((d - e).abs() < 1e-10, "{perm:?}: {d} vs {e}");
        }
    }

    #[test]
    fn grid_diagonal_brackets_identity() {
        let h = ChannelMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (v, _) = grid_min_sigma(&h, &BoundTerm::full_identity(2), 40).unwrap();
        assert!((v - 2.0).abs() < 1e-6);
    }

    #[test]
    fn grid_resolution_one_is_identity() {
        let h = ChannelMatrix::from_real_rows(&[vec![1.0, 0.5], vec![0.3, 1.0]]).unwrap();
        let t = BoundTerm::full_identity(2);
        let (v, sigma) = grid_min_sigma(&h, &t, 1).unwrap();
        assert_eq!(sigma, NoiseCorrelation::identity(2));
        assert!((v - kra_term_value(&h, &sigma, &t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn grid_three_matches_direct_evaluation() {
        let h = ChannelMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.3, 0.4), c(-0.5, 0.2)],
            vec![c(0.2, -0.6), c(1.4, 0.0), c(0.3, 0.3)],
            vec![c(0.7, 0.1), c(-0.2, -0.2), c(0.8, 0.0)],
        ])
        .unwrap();
        let t = BoundTerm::new(vec![1, 2, 0]).unwrap();
        let (v, sigma) = grid_min_sigma(&h, &t, 6).unwrap();
        assert!((v - kra_term_value(&h, &sigma, &t).unwrap()).abs() < 1e-9);
        assert!(v <= kra_term_value(&h, &NoiseCorrelation::identity(3), &t).unwrap() + 1e-12);
    }

    #[test]
    fn grid_rejects_large_k() {
        let h = ChannelMatrix::new(DMatrix::identity(4, 4)).unwrap();
        assert!(matches!(
            grid_min_sigma(&h, &BoundTerm::full_identity(4), 2),
            Err(Error::TooLarge { .. })
        ));
    }
}
