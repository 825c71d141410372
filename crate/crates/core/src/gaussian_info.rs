//! Entropies and mutual informations of jointly circularly-symmetric complex
//! Gaussian vectors.
//!
//! Every bound term reduces to log-determinants of conditional covariances;
//! conditioning uses Schur complements with a thresholded pseudo-inverse so
//! that nearly degenerate conditioning sets do not blow up.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c, log2_det_pd, min_eigenvalue, schur_complement, submatrix, C64};
use crate::model::{ChannelMatrix, NoiseCorrelation, PSD_TOLERANCE};

/// Largest admissible genie noise correlation magnitude.
pub const RHO_CAP: f64 = 1.0 - 1e-6;

/// Mutual informations in `(-MI_CLAMP, 0)` are rounded to zero.
pub const MI_CLAMP: f64 = 1e-12;

/// `log2(pi e)`: entropy in bits of a unit-variance circular complex Gaussian.
pub fn log2_pi_e() -> f64 {
    (PI * E).log2()
}

pub fn x_label(k: usize) -> String {
    format!("X{}", k + 1)
}

pub fn y_label(k: usize) -> String {
    format!("Y{}", k + 1)
}

pub fn genie_label(target: usize) -> String {
    format!("G{}", target + 1)
}

/// A side-information signal `G_m = sum_{j != m} h[m,j] X_j + Zt_m`, i.e. a copy
/// of output `m` with its intended signal removed, whose unit-variance noise
/// has correlation `rho = E[Z_k conj(Zt_m)]` with channel noise `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenieSpec {
    /// Receiver `m` whose interference-plus-noise the genie copies.
    pub target: usize,
    /// Receiver `k` whose noise is correlated with the genie noise.
    pub paired_with: usize,
    pub rho: C64,
}

/// Zero-mean complex Gaussian vector over named scalar variables.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    labels: Vec<String>,
    cov: DMatrix<C64>,
}

impl JointGaussian {
    pub fn new(labels: Vec<String>, cov: DMatrix<C64>) -> Result<Self> {
        let (rows, cols) = cov.shape();
        if rows != cols {
            return Err(Error::NonSquare { rows, cols });
        }
        if rows != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: rows,
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        for i in 0..rows {
            for j in i..rows {
                let tol = 1e-12 * (1.0 + cov[(i, j)].norm());
                if (cov[(i, j)] - cov[(j, i)].conj()).norm() > tol {
                    return Err(Error::NotHermitian { row: i, col: j });
                }
            }
        }
        let min_eigenvalue = min_eigenvalue(&cov);
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(Self { labels, cov })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn cov(&self) -> &DMatrix<C64> {
        &self.cov
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn indices<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l.as_ref())).collect()
    }

    /// Covariance between two labelled variables, `E[a conj(b)]`.
    pub fn covariance(&self, a: &str, b: &str) -> Result<C64> {
        Ok(self.cov[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn marginal(&self, labels: &[&str]) -> Result<DMatrix<C64>> {
        let idx = self.indices(labels)?;
        Ok(submatrix(&self.cov, &idx, &idx))
    }
}

/// Joint law of inputs `X1..XK`, outputs `Y1..YK` and one `G<m>` per genie.
///
/// Inputs are iid unit-power Gaussians. Genie noises are independent of the
/// inputs, of each other, and of every channel noise except `paired_with`.
pub fn build_joint(
    h: &ChannelMatrix,
    sigma: &NoiseCorrelation,
    genies: &[GenieSpec],
) -> Result<JointGaussian> {
    let k = h.k();
    if sigma.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: sigma.k(),
        });
    }
    for g in genies {
        for idx in [g.target, g.paired_with] {
            if idx >= k {
                return Err(Error::IndexOutOfRange { index: idx, k });
            }
        }
        if g.rho.norm() > RHO_CAP + 1e-15 {
            return Err(Error::RhoTooLarge {
                magnitude: g.rho.norm(),
            });
        }
    }

    // Each variable is a linear form in the inputs plus a noise term; the
    // noise cross-covariances are filled in separately.
    let n = 2 * k + genies.len();
    let mut signal = DMatrix::<C64>::zeros(n, k);
    for j in 0..k {
        signal[(j, j)] = c(1.0, 0.0);
    }
    for i in 0..k {
        for j in 0..k {
            signal[(k + i, j)] = h.gain(i, j);
        }
    }
    for (g_idx, g) in genies.iter().enumerate() {
        for j in 0..k {
            if j != g.target {
                signal[(2 * k + g_idx, j)] = h.gain(g.target, j);
            }
        }
    }
    let mut cov = &signal * signal.adjoint();
    for i in 0..k {
        for l in 0..k {
            cov[(k + i, k + l)] += sigma.get(i, l);
        }
    }
    for (g_idx, g) in genies.iter().enumerate() {
        let gi = 2 * k + g_idx;
        cov[(gi, gi)] += c(1.0, 0.0);
        cov[(k + g.paired_with, gi)] += g.rho;
        cov[(gi, k + g.paired_with)] += g.rho.conj();
    }

    let mut labels: Vec<String> = (0..k).map(x_label).collect();
    labels.extend((0..k).map(y_label));
    labels.extend(genies.iter().map(|g| genie_label(g.target)));
    JointGaussian::new(labels, cov)
}

/// Differential entropy `log2 det(pi e Sigma_A)` in bits.
pub fn diff_entropy<S: AsRef<str>>(j: &JointGaussian, a: &[S]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let idx = j.indices(a)?;
    let ld = log2_det_pd(&submatrix(j.cov(), &idx, &idx))?;
    Ok(idx.len() as f64 * log2_pi_e() + ld)
}

/// Conditional differential entropy `h(A | C)` in bits.
pub fn conditional_entropy<S: AsRef<str>>(j: &JointGaussian, a: &[S], cond: &[S]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let ai = j.indices(a)?;
    let ci = j.indices(cond)?;
    check_disjoint(j, &[&ai, &ci])?;
    let ld = log2_det_pd(&schur_complement(j.cov(), &ai, &ci))?;
    Ok(ai.len() as f64 * log2_pi_e() + ld)
}

/// `I(A; B | C)` in bits via Schur complements.
pub fn conditional_mi<S: AsRef<str>>(j: &JointGaussian, a: &[S], b: &[S], cond: &[S]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyLabelSet);
    }
    let ai = j.indices(a)?;
    let bi = j.indices(b)?;
    let ci = j.indices(cond)?;
    check_disjoint(j, &[&ai, &bi, &ci])?;

    let mut bc = ci.clone();
    bc.extend_from_slice(&bi);
    let given_c = log2_det_pd(&schur_complement(j.cov(), &ai, &ci))?;
    let given_bc = log2_det_pd(&schur_complement(j.cov(), &ai, &bc))?;
    let mi = given_c - given_bc;
    if mi >= 0.0 {
        Ok(mi)
    } else if mi > -MI_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::InternalInconsistency(format!(
            "negative mutual information {mi:e} bits"
        )))
    }
}

fn check_disjoint(j: &JointGaussian, sets: &[&Vec<usize>]) -> Result<()> {
    let mut seen: Vec<usize> = Vec::new();
    for set in sets {
        for &i in set.iter() {
            if seen.contains(&i) {
                return Err(Error::LabelOverlap(j.labels()[i].clone()));
            }
            seen.push(i);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(k: usize) -> ChannelMatrix {
        ChannelMatrix::new(DMatrix::identity(k, k)).unwrap()
    }

    #[test]
    fn single_user_covariance() {
        let j = build_joint(&diag(1), &NoiseCorrelation::identity(1), &[]).unwrap();
        let expected = [[1.0, 1.0], [1.0, 2.0]];
        for r in 0..2 {
            for col in 0..2 {
                assert_eq!(j.cov()[(r, col)], c(expected[r][col], 0.0));
            }
        }
    }

    #[test]
    fn diagonal_two_user_outputs_are_independent() {
        let j = build_joint(&diag(2), &NoiseCorrelation::identity(2), &[]).unwrap();
        assert_eq!(j.covariance("Y1", "Y1").unwrap(), c(2.0, 0.0));
        assert_eq!(j.covariance("Y2", "Y2").unwrap(), c(2.0, 0.0));
        assert_eq!(j.covariance("Y1", "Y2").unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn genie_cross_covariance_term_by_term() {
        let h = ChannelMatrix::from_rows(&[
            vec![c(1.3, 0.0), c(0.4, -0.2)],
            vec![c(0.7, 0.5), c(0.9, 0.0)],
        ])
        .unwrap();
        let g = GenieSpec {
            target: 1,
            paired_with: 0,
            rho: c(0.5, 0.0),
        };
        let j = build_joint(&h, &NoiseCorrelation::identity(2), &[g]).unwrap();
        // Y1 = h11 X1 + h12 X2 + Z1, G2 = h21 X1 + Zt, E[Z1 conj(Zt)] = rho
        let expected = h.gain(0, 0) * h.gain(1, 0).conj() + c(0.5, 0.0);
        assert!((j.covariance("Y1", "G2").unwrap() - expected).norm() < 1e-15);
        assert!((j.covariance("G2", "G2").unwrap() - c(1.0 + h.gain(1, 0).norm_sqr(), 0.0)).norm() < 1e-15);
        assert_eq!(j.covariance("G2", "X2").unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn genie_errors() {
        let too_big = GenieSpec {
            target: 0,
            paired_with: 1,
            rho: c(0.9999999, 0.0),
        };
        assert!(matches!(
            build_joint(&diag(2), &NoiseCorrelation::identity(2), &[too_big]),
            Err(Error::RhoTooLarge { .. })
        ));
        let oob = GenieSpec {
            target: 2,
            paired_with: 0,
            rho: c(0.0, 0.0),
        };
        assert!(matches!(
            build_joint(&diag(2), &NoiseCorrelation::identity(2), &[oob]),
            Err(Error::IndexOutOfRange { index: 2, k: 2 })
        ));
    }

    #[test]
    fn entropy_of_unit_scalar() {
        let j = JointGaussian::new(vec!["A".into()], DMatrix::identity(1, 1)).unwrap();
        let h = diff_entropy(&j, &["A"]).unwrap();
        assert!((h - (PI * E).log2()).abs() < 1e-15);
        assert!((h - 3.094_191_170_361_282).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_additive_for_independent_scalars() {
        let j = JointGaussian::new(vec!["A".into(), "B".into()], DMatrix::identity(2, 2)).unwrap();
        let h = diff_entropy(&j, &["A", "B"]).unwrap();
        assert!((h - 2.0 * log2_pi_e()).abs() < 1e-14);
    }

    #[test]
    fn point_to_point_snr_one_gives_one_bit() {
        let j = build_joint(&diag(1), &NoiseCorrelation::identity(1), &[]).unwrap();
        let mi = conditional_mi(&j, &["Y1"], &["X1"], &[] as &[&str]).unwrap();
        assert!((mi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn independent_blocks_have_zero_information() {
        let j = build_joint(&diag(2), &NoiseCorrelation::identity(2), &[]).unwrap();
        let mi = conditional_mi(&j, &["Y1", "X1"], &["Y2", "X2"], &[] as &[&str]).unwrap();
        assert_eq!(mi, 0.0);
    }

    #[test]
    fn overlap_and_singularity_errors() {
        let j = build_joint(&diag(1), &NoiseCorrelation::identity(1), &[]).unwrap();
        assert!(matches!(
            conditional_mi(&j, &["Y1"], &["Y1"], &[] as &[&str]),
            Err(Error::LabelOverlap(_))
        ));
        assert!(matches!(
            conditional_mi(&j, &["Y1"], &["X1"], &["X1"]),
            Err(Error::LabelOverlap(_))
        ));
        assert!(matches!(
            conditional_mi(&j, &[] as &[&str], &["X1"], &[]),
            Err(Error::EmptyLabelSet)
        ));
        // A deterministic function of B: Y = X exactly
        let det = JointGaussian::new(
            vec!["X".into(), "Y".into()],
            DMatrix::from_element(2, 2, c(1.0, 0.0)),
        )
        .unwrap();
        assert!(matches!(
            conditional_mi(&det, &["Y"], &["X"], &[] as &[&str]),
            Err(Error::SingularCovariance { .. })
        ));
        assert!(matches!(diff_entropy(&det, &["X", "Y"]), Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn singular_conditioning_set_uses_pseudo_inverse() {
        // C = (U, U) duplicates the same variable; conditioning must still work.
        let cov = DMatrix::from_row_slice(
            4,
            4,
            &[
                c(1.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0),
                c(1.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0),
                c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0), c(0.2, 0.0),
                c(0.5, 0.0), c(0.5, 0.0), c(0.2, 0.0), c(1.0, 0.0),
            ],
        );
        let j = JointGaussian::new(vec!["U1".into(), "U2".into(), "A".into(), "B".into()], cov).unwrap();
        let dup = conditional_mi(&j, &["A"], &["B"], &["U1", "U2"]).unwrap();
        let single = conditional_mi(&j, &["A"], &["B"], &["U1"]).unwrap();
        assert!((dup - single).abs() < 1e-10);
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(matches!(
            JointGaussian::new(vec!["A".into(), "A".into()], DMatrix::identity(2, 2)),
            Err(Error::DuplicateLabel(_))
        ));
    }
}
