//! Channel and noise-correlation types, their validation, and the JSON
//! formats used to exchange them.
//!
//! A K-user channel in standard form has outputs
//! `Y_i = sum_k h[i,k] X_k + Z_i` with unit-power inputs and unit-variance
//! noise. Users are 0-based in the API and 1-based in every serialized form.

use nalgebra::DMatrix;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{c, min_eigenvalue, C64};

/// Current version of every JSON document this crate reads or writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Eigenvalue tolerance for positive semidefiniteness.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Entrywise tolerance for the Hermitian and unit-diagonal checks.
pub const STRUCTURE_TOLERANCE: f64 = 1e-12;

/// Validated K x K complex gain matrix (row = receiver, column = transmitter).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    gains: DMatrix<C64>,
}

impl ChannelMatrix {
    pub fn new(raw: DMatrix<C64>) -> Result<Self> {
        let (rows, cols) = raw.shape();
        if rows != cols {
            return Err(Error::NonSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::Empty);
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = raw[(i, j)];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        for i in 0..rows {
            let d = raw[(i, i)];
            if d.im != 0.0 || d.re <= 0.0 {
                return Err(Error::NonPositiveDiagonal {
                    index: i,
                    re: d.re,
                    im: d.im,
                });
            }
        }
        Ok(Self { gains: raw })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::NonSquare { rows: n, cols: r.len() });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Real-valued convenience constructor.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn k(&self) -> usize {
        self.gains.nrows()
    }

    pub fn gain(&self, receiver: usize, transmitter: usize) -> C64 {
        self.gains[(receiver, transmitter)]
    }

    pub fn direct_gain(&self, k: usize) -> f64 {
        self.gains[(k, k)].re
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.gains
    }

    /// True when every entry below the main diagonal is exactly zero.
    pub fn is_upper_triangular(&self) -> bool {
        let k = self.k();
        (0..k).all(|i| (0..i).all(|j| self.gains[(i, j)] == c(0.0, 0.0)))
    }

    /// Relabels users: user `perm[i]` of `self` becomes user `i`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k();
        if perm.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: perm.len(),
            });
        }
        Self::new(DMatrix::from_fn(k, k, |i, j| self.gains[(perm[i], perm[j])]))
    }

    /// Principal submatrix on `order`: user `order[i]` of `self` becomes user `i`.
    pub fn principal(&self, order: &[usize]) -> ChannelMatrix {
        let n = order.len();
        Self {
            gains: DMatrix::from_fn(n, n, |i, j| self.gains[(order[i], order[j])]),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "K": self.k(),
            "H": complex_rows(&self.gains),
        })
    }
}

/// Validated K x K noise correlation: Hermitian, unit diagonal, PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCorrelation {
    sigma: DMatrix<C64>,
}

impl NoiseCorrelation {
    pub fn new(raw: DMatrix<C64>) -> Result<Self> {
        let (rows, cols) = raw.shape();
        if rows != cols {
            return Err(Error::NonSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::Empty);
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = raw[(i, j)];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        for i in 0..rows {
            for j in i..rows {
                if (raw[(i, j)] - raw[(j, i)].conj()).norm() > STRUCTURE_TOLERANCE {
                    return Err(Error::NotHermitian { row: i, col: j });
                }
            }
        }
        for i in 0..rows {
            if (raw[(i, i)] - c(1.0, 0.0)).norm() > STRUCTURE_TOLERANCE {
                return Err(Error::NotUnitDiagonal { index: i });
            }
        }
        // store the exactly Hermitian, exactly unit-diagonal representative
        let sigma = DMatrix::from_fn(rows, rows, |i, j| {
            if i == j {
                c(1.0, 0.0)
            } else if i < j {
                raw[(i, j)]
            } else {
                raw[(j, i)].conj()
            }
        });
        let min_eigenvalue = min_eigenvalue(&sigma);
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(Self { sigma })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            sigma: DMatrix::identity(k, k),
        }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::NonSquare { rows: n, cols: r.len() });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Real-valued convenience constructor.
    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn k(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.sigma[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.sigma
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "K": self.k(),
            "Sigma": complex_rows(&self.sigma),
        })
    }
}

pub fn validate_channel(raw: DMatrix<C64>) -> Result<ChannelMatrix> {
    ChannelMatrix::new(raw)
}

pub fn validate_noise_correlation(raw: DMatrix<C64>) -> Result<NoiseCorrelation> {
    NoiseCorrelation::new(raw)
}

/// Either document kind accepted by [`parse_channel_spec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Spec {
    Channel(ChannelMatrix),
    Noise(NoiseCorrelation),
}

/// Parses a channel (`"H"`) or noise (`"Sigma"`) JSON document.
pub fn parse_channel_spec(text: &str) -> Result<Spec> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Schema {
        pointer: String::new(),
        message: format!("invalid JSON: {e}"),
    })?;
    parse_spec_value(&doc)
}

pub fn parse_spec_value(doc: &Value) -> Result<Spec> {
    let obj = doc.as_object().ok_or_else(|| schema("", "expected a JSON object"))?;
    if let Some(v) = obj.get("schema_version") {
        match v.as_u64() {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            _ => {
                return Err(schema(
                    "/schema_version",
                    &format!("unsupported schema version (expected {SCHEMA_VERSION})"),
                ))
            }
        }
    }
    let k = match obj.get("K") {
        None => return Err(schema("/K", "missing required field")),
        Some(v) => match v.as_u64() {
            Some(k) if k >= 1 => k as usize,
            _ => return Err(schema("/K", "expected a positive integer")),
        },
    };
    match (obj.get("H"), obj.get("Sigma")) {
        (Some(h), None) => Ok(Spec::Channel(ChannelMatrix::new(parse_complex_matrix(
            h, k, "/H",
        )?)?)),
        (None, Some(s)) => Ok(Spec::Noise(NoiseCorrelation::new(parse_complex_matrix(
            s, k, "/Sigma",
        )?)?)),
        (Some(_), Some(_)) => Err(schema("", "document must contain exactly one of H, Sigma")),
        (None, None) => Err(schema("/H", "missing required field (H or Sigma)")),
    }
}

pub fn parse_channel(text: &str) -> Result<ChannelMatrix> {
    match parse_channel_spec(text)? {
        Spec::Channel(h) => Ok(h),
        Spec::Noise(_) => Err(schema("/H", "expected a channel document")),
    }
}

pub fn parse_noise(text: &str) -> Result<NoiseCorrelation> {
    match parse_channel_spec(text)? {
        Spec::Noise(s) => Ok(s),
        Spec::Channel(_) => Err(schema("/Sigma", "expected a noise-correlation document")),
    }
}

/// Parses a K x K array of `[re, im]` pairs located at `pointer`.
pub fn parse_complex_matrix(v: &Value, k: usize, pointer: &str) -> Result<DMatrix<C64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| schema(pointer, "expected an array of rows"))?;
    if rows.len() != k {
        return Err(schema(pointer, &format!("expected {k} rows, found {}", rows.len())));
    }
    let mut m = DMatrix::zeros(k, k);
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{pointer}/{i}");
        let row = row.as_array().ok_or_else(|| schema(&rp, "expected an array"))?;
        if row.len() != k {
            return Err(schema(&rp, &format!("expected {k} entries, found {}", row.len())));
        }
        for (j, entry) in row.iter().enumerate() {
            m[(i, j)] = parse_complex(entry, &format!("{rp}/{j}"))?;
        }
    }
    Ok(m)
}

pub fn parse_complex(v: &Value, pointer: &str) -> Result<C64> {
    let pair = v
        .as_array()
        .filter(|p| p.len() == 2)
        .ok_or_else(|| schema(pointer, "expected a [re, im] pair"))?;
    let re = pair[0]
        .as_f64()
        .ok_or_else(|| schema(&format!("{pointer}/0"), "expected a number"))?;
    let im = pair[1]
        .as_f64()
        .ok_or_else(|| schema(&format!("{pointer}/1"), "expected a number"))?;
    Ok(c(re, im))
}

pub fn parse_complex_vec(v: &Value, pointer: &str) -> Result<Vec<C64>> {
    let arr = v.as_array().ok_or_else(|| schema(pointer, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, e)| parse_complex(e, &format!("{pointer}/{i}")))
        .collect()
}

fn schema(pointer: &str, message: &str) -> Error {
    Error::Schema {
        pointer: pointer.to_string(),
        message: message.to_string(),
    }
}

pub fn complex_rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn complex_pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl Serialize for ChannelMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        complex_rows(&self.gains).serialize(s)
    }
}

impl Serialize for NoiseCorrelation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        complex_rows(&self.sigma).serialize(s)
    }
}

/// Which bound family produced an inequality: the two genie-free/genie-aided
/// outer bounds, or the cooperative broadcast bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    /// Side information of the successive-genie kind (chain of outputs).
    #[serde(rename = "KRA")]
    Kra,
    /// Side information given by interference-plus-noise copies with optimized noise correlation.
    #[serde(rename = "ETW")]
    Etw,
    /// Transmitter-cooperation (degraded broadcast) bound, rank-one channels only.
    #[serde(rename = "BC")]
    Bc,
}

impl Family {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kra" => Some(Self::Kra),
            "etw" => Some(Self::Etw),
            "bc" => Some(Self::Bc),
            _ => None,
        }
    }
}

/// What achieved a retained inequality value.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Kra { perm: Vec<usize>, sigma: NoiseCorrelation },
    Etw { perm: Vec<usize>, rhos: Vec<C64> },
    Bc { order: Vec<usize>, beta: Vec<f64> },
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let one_based = |v: &[usize]| v.iter().map(|x| x + 1).collect::<Vec<_>>();
        match self {
            Witness::Kra { perm, sigma } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("perm", &one_based(perm))?;
                m.serialize_entry("sigma", sigma)?;
                m.end()
            }
            Witness::Etw { perm, rhos } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("perm", &one_based(perm))?;
                m.serialize_entry("rhos", &complex_pairs(rhos))?;
                m.end()
            }
            Witness::Bc { order, beta } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("order", &one_based(order))?;
                m.serialize_entry("beta", beta)?;
                m.end()
            }
        }
    }
}

/// One retained bound `sum_{u in subset} R_u <= value`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateInequality {
    /// Sorted, 0-based user indices.
    pub subset: Vec<usize>,
    /// Bits per complex channel use.
    pub value: f64,
    pub family: Family,
    pub witness: Witness,
}

impl Serialize for RateInequality {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("RateInequality", 4)?;
        st.serialize_field("subset", &self.subset.iter().map(|x| x + 1).collect::<Vec<_>>())?;
        st.serialize_field("family", &self.family)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("witness", &self.witness)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBounds {
    /// Every receiver decodes its own message treating all interference as noise.
    #[serde(rename = "TIN")]
    pub tin: f64,
    /// Successive-decoding sum rate, present only when it is known to be achievable.
    #[serde(rename = "SUCC_DEC")]
    pub succ_dec: Option<f64>,
}

impl LowerBounds {
    pub fn best(&self) -> f64 {
        self.succ_dec.map_or(self.tin, |s| s.max(self.tin))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub restarts: usize,
    pub max_evals: usize,
    pub grid_fallback_k: usize,
    pub tolerance: f64,
    pub families: Vec<Family>,
    pub sum_rate_only: bool,
}

/// Result of a region evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub channel: ChannelMatrix,
    pub inequalities: Vec<RateInequality>,
    pub sum_rate_upper: f64,
    pub lower_bounds: LowerBounds,
    /// False when the sum-rate upper bound dips below an achievable rate.
    pub consistent: bool,
    pub config: ConfigEcho,
    pub warnings: Vec<String>,
}

impl Serialize for BoundReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BoundReport", 9)?;
        st.serialize_field("schema_version", &SCHEMA_VERSION)?;
        st.serialize_field("K", &self.channel.k())?;
        st.serialize_field("H", &self.channel)?;
        st.serialize_field("inequalities", &self.inequalities)?;
        st.serialize_field("sum_rate_upper", &self.sum_rate_upper)?;
        st.serialize_field("lower_bounds", &self.lower_bounds)?;
        st.serialize_field("consistent", &self.consistent)?;
        st.serialize_field("config", &self.config)?;
        st.serialize_field("warnings", &self.warnings)?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CertificateStatus {
    Certified,
    BoundOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificatePath {
    #[serde(rename = "Z_THEOREM2")]
    ZChannel,
    #[serde(rename = "DEGRADED")]
    Degraded,
    #[serde(rename = "MAC_THEOREM3")]
    MacIntersection,
    #[serde(rename = "NUMERIC_MATCH")]
    NumericMatch,
}

/// Outcome of sum-capacity certification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub status: CertificateStatus,
    pub path: Option<CertificatePath>,
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub details: Vec<String>,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.status == CertificateStatus::Certified
    }
}

impl Serialize for Spec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Spec::Channel(h) => h.to_json().serialize(s),
            Spec::Noise(n) => n.to_json().serialize(s),
        }
    }
}
