//! Entity identities, matrix identities, and the shared correlation-matrix
//! container with its file format.
//!
//! Every stage of the pipeline exchanges `n×n` real matrices indexed by a
//! fixed entity order. This module owns that vocabulary: the validated
//! [`Symbol`] type, the [`MatrixId`] taxonomy (mention-side factors,
//! market-side ground truths, learned outputs), the [`CorrelationMatrix`]
//! container with its per-kind validator, the [`GraphSet`] bundle consumed by
//! the consensus solver, and the comma-separated on-disk matrix format.

use std::fmt;
use std::io;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from matrix containers, validation, and file IO.
#[derive(Debug, Error)]
pub enum MatrixError {
    /// A symbol failed the `[A-Z]{1,6}` shape rule.
    #[error("invalid symbol {0:?}: expected 1-6 uppercase ASCII letters")]
    InvalidSymbol(String),
    /// The same symbol appeared twice in one entity order.
    #[error("duplicate symbol {0} in entity order")]
    DuplicateSymbol(String),
    /// An entity order was empty.
    #[error("entity order is empty")]
    EmptyOrder,
    /// Matrix shape disagreed with the entity order.
    #[error("matrix is {rows}x{cols} but entity order has {order} symbols")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        order: usize,
    },
    /// A matrix entry was NaN or infinite.
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
    /// Symmetry violated beyond tolerance.
    #[error("asymmetry {delta:e} at ({row}, {col}) exceeds tolerance {tol:e}")]
    Asymmetric {
        row: usize,
        col: usize,
        delta: f64,
        tol: f64,
    },
    /// An entry fell outside the admissible range for its matrix kind.
    #[error("entry {value} at ({row}, {col}) outside [{lo}, {hi}]")]
    OutOfRange {
        row: usize,
        col: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    /// A diagonal entry violated its matrix kind's rule.
    #[error("diagonal entry {value} at ({idx}, {idx}) violates rule: {rule}")]
    BadDiagonal {
        idx: usize,
        value: f64,
        rule: &'static str,
    },
    /// Two containers that must share an entity order did not.
    #[error("entity orders differ: {context}")]
    OrderMismatch { context: String },
    /// A matrix file was structurally malformed.
    #[error("malformed matrix file: {0}")]
    Malformed(String),
    /// Underlying IO failure.
    #[error("matrix io: {0}")]
    Io(#[from] io::Error),
    /// CSV-layer failure while reading a matrix file.
    #[error("matrix csv: {0}")]
    Csv(#[from] csv::Error),
}

/// A validated entity ticker symbol: 1–6 uppercase ASCII letters.
///
/// Symbols are the row/column identity of every matrix; their `Ord` is plain
/// byte order, which doubles as the deterministic tie-break everywhere a
/// ranking needs one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Symbol(String);

impl Symbol {
    /// Validates and wraps a ticker string.
    pub fn new(s: impl Into<String>) -> Result<Self, MatrixError> {
        let s = s.into();
        let ok = !s.is_empty() && s.len() <= 6 && s.bytes().all(|b| b.is_ascii_uppercase());
        if ok {
            Ok(Self(s))
        } else {
            Err(MatrixError::InvalidSymbol(s))
        }
    }

    /// The raw ticker text.
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for Symbol {
    type Err = MatrixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for Symbol {
    type Error = MatrixError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<Symbol> for String {
    fn from(s: Symbol) -> String {
        s.0
    }
}

/// Identity of one mention-side factor graph.
///
/// The lagged variants carry the signed day lag (never zero); zero-lag volume
/// correlation is the plain `Tweet`/`Retweet` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorId {
    /// Daily tweet-volume correlation (`t`).
    Tweet,
    /// Daily retweet-volume correlation (`r`).
    Retweet,
    /// Tweet-volume correlation at a signed day lag (`t(l)`).
    TweetLag(i64),
    /// Retweet-volume correlation at a signed day lag (`r(l)`).
    RetweetLag(i64),
    /// Tweet co-mention overlap (`ct`).
    CoTweet,
    /// Retweet co-mention overlap (`cr`).
    CoRetweet,
}

impl FactorId {
    /// Builds a lagged tweet-volume id; `lag` must be non-zero.
    pub fn tweet_lag(lag: i64) -> Option<Self> {
        (lag != 0).then_some(Self::TweetLag(lag))
    }

    /// Builds a lagged retweet-volume id; `lag` must be non-zero.
    pub fn retweet_lag(lag: i64) -> Option<Self> {
        (lag != 0).then_some(Self::RetweetLag(lag))
    }

    /// File stem used for this factor's matrix file (`t`, `r_m2`, `ct`, …).
    pub fn file_stem(&self) -> String {
        fn lag_part(l: i64) -> String {
            if l < 0 {
                format!("m{}", -l)
            } else {
                format!("p{l}")
            }
        }
        match self {
            Self::Tweet => "t".into(),
            Self::Retweet => "r".into(),
            Self::TweetLag(l) => format!("t_{}", lag_part(*l)),
            Self::RetweetLag(l) => format!("r_{}", lag_part(*l)),
            Self::CoTweet => "ct".into(),
            Self::CoRetweet => "cr".into(),
        }
    }

    /// Row label used in comparison tables (`SC_t`, `SC_t(-2)`, `SC_cr`, …).
    pub fn method_label(&self) -> String {
        match self {
            Self::Tweet => "SC_t".into(),
            Self::Retweet => "SC_r".into(),
            Self::TweetLag(l) => format!("SC_t({l:+})"),
            Self::RetweetLag(l) => format!("SC_r({l:+})"),
            Self::CoTweet => "SC_ct".into(),
            Self::CoRetweet => "SC_cr".into(),
        }
    }

    /// True for the two overlap (co-mention) factors, whose entries live in
    /// `[0, 1]` rather than `[−1, 1]`.
    pub fn is_overlap(&self) -> bool {
        matches!(self, Self::CoTweet | Self::CoRetweet)
    }
}

/// Identity of one market-side ground-truth indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TruthId {
    /// Daily trading-volume correlation (`tv`).
    TradingVolume,
    /// Closing-price log-return correlation (`cp`).
    ClosingPrice,
    /// Rolling-volatility-of-returns correlation (`hv`).
    HistoricalVolatility,
}

impl TruthId {
    /// All indicators, in canonical order.
    pub const ALL: [TruthId; 3] = [
        TruthId::TradingVolume,
        TruthId::ClosingPrice,
        TruthId::HistoricalVolatility,
    ];

    /// Short name used in file stems and reports.
    pub fn abbrev(&self) -> &'static str {
        match self {
            Self::TradingVolume => "tv",
            Self::ClosingPrice => "cp",
            Self::HistoricalVolatility => "hv",
        }
    }

    /// Default consensus-penalty weight α tuned per indicator.
    pub fn default_alpha(&self) -> f64 {
        match self {
            Self::TradingVolume => 0.25,
            Self::ClosingPrice => 0.15,
            Self::HistoricalVolatility => 0.4,
        }
    }

    /// Parses an indicator abbreviation.
    pub fn from_abbrev(s: &str) -> Option<Self> {
        match s {
            "tv" => Some(Self::TradingVolume),
            "cp" => Some(Self::ClosingPrice),
            "hv" => Some(Self::HistoricalVolatility),
            _ => None,
        }
    }
}

impl fmt::Display for TruthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

/// Identity of any matrix the pipeline produces or consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixId {
    /// One of the mention-side factor graphs.
    Factor(FactorId),
    /// One of the market-side ground-truth matrices.
    Truth(TruthId),
    /// Consensus matrix learned by the solver; tagged with the indicator
    /// whose penalty weight was used when there is one (synthetic runs have
    /// none).
    Consensus(Option<TruthId>),
    /// Simple-averaging baseline over the factor set.
    SimpleAverage,
    /// Planted ground truth of a synthetic scenario.
    SyntheticTruth,
    /// One synthetic noisy view, by index.
    SyntheticView(usize),
    /// Per-pair reliability of one synthetic view, by index.
    SyntheticReliability(usize),
}

/// Which validation rules apply to a matrix's entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueClass {
    /// Pearson-derived: entries in `[−1, 1]`, unit diagonal.
    SignedCorrelation,
    /// Overlap-derived: entries in `[0, 1]`, diagonal in `{0, 1}`.
    Overlap,
    /// Learned output: finite and symmetric, but no range or diagonal rule.
    Unconstrained,
}

impl MatrixId {
    /// File stem (without extension) for this matrix's on-disk file.
    pub fn file_stem(&self) -> String {
        match self {
            Self::Factor(f) => f.file_stem(),
            Self::Truth(t) => t.abbrev().into(),
            Self::Consensus(Some(t)) => format!("O_{}", t.abbrev()),
            Self::Consensus(None) => "O".into(),
            Self::SimpleAverage => "sa".into(),
            Self::SyntheticTruth => "truth".into(),
            Self::SyntheticView(i) => format!("view_{i}"),
            Self::SyntheticReliability(i) => format!("rel_{i}"),
        }
    }

    /// Row label used in comparison tables.
    pub fn method_label(&self) -> String {
        match self {
            Self::Factor(f) => f.method_label(),
            Self::Truth(t) => format!("truth_{}", t.abbrev()),
            Self::Consensus(_) => "multi-CG".into(),
            Self::SimpleAverage => "SA".into(),
            Self::SyntheticTruth => "truth".into(),
            Self::SyntheticView(i) => format!("view_{i}"),
            Self::SyntheticReliability(i) => format!("rel_{i}"),
        }
    }

    /// The validation rules this matrix must satisfy.
    pub fn value_class(&self) -> ValueClass {
        match self {
            Self::Factor(f) if f.is_overlap() => ValueClass::Overlap,
            Self::Factor(_) | Self::Truth(_) | Self::SyntheticTruth | Self::SyntheticView(_) => {
                ValueClass::SignedCorrelation
            }
            Self::SyntheticReliability(_) => ValueClass::Overlap,
            Self::Consensus(_) | Self::SimpleAverage => ValueClass::Unconstrained,
        }
    }
}

impl fmt::Display for MatrixId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.file_stem())
    }
}

/// Symmetry tolerance enforced by [`CorrelationMatrix::validate`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// An `n×n` real matrix over a fixed entity order, tagged with its identity
/// and the count of undefined-correlation entries that were zero-filled
/// during construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    id: MatrixId,
    order: Vec<Symbol>,
    values: DMatrix<f64>,
    undefined_fills: usize,
}

impl CorrelationMatrix {
    /// Wraps parts into a container, checking shape, symbol uniqueness, and
    /// entry finiteness. Kind-specific rules (symmetry, range, diagonal) are
    /// checked separately by [`validate`](Self::validate) so that learned
    /// matrices, which obey only some of them, can share the container.
    pub fn new(
        id: MatrixId,
        order: Vec<Symbol>,
        values: DMatrix<f64>,
        undefined_fills: usize,
    ) -> Result<Self, MatrixError> {
        if order.is_empty() {
            return Err(MatrixError::EmptyOrder);
        }
        let mut seen = order.to_vec();
        seen.sort();
        if let Some(dup) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(MatrixError::DuplicateSymbol(dup[0].as_str().to_owned()));
        }
        if values.nrows() != order.len() || values.ncols() != order.len() {
            return Err(MatrixError::ShapeMismatch {
                rows: values.nrows(),
                cols: values.ncols(),
                order: order.len(),
            });
        }
        for row in 0..values.nrows() {
            for col in 0..values.ncols() {
                let value = values[(row, col)];
                if !value.is_finite() {
                    return Err(MatrixError::NonFinite { row, col, value });
                }
            }
        }
        Ok(Self {
            id,
            order,
            values,
            undefined_fills,
        })
    }

    /// The matrix identity.
    pub fn id(&self) -> MatrixId {
        self.id
    }

    /// The entity order indexing rows and columns.
    pub fn order(&self) -> &[Symbol] {
        &self.order
    }

    /// Number of entities.
    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// The underlying values.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Count of undefined correlations that were filled with 0 during
    /// construction.
    pub fn undefined_fills(&self) -> usize {
        self.undefined_fills
    }

    /// Returns the same matrix under a different identity (used when a file
    /// is read back or a learned matrix is compared as a ranking method).
    pub fn with_id(mut self, id: MatrixId) -> Self {
        self.id = id;
        self
    }

    /// Checks the kind-specific invariants for this matrix's identity:
    /// symmetry within [`SYMMETRY_TOL`], entry range, and the diagonal rule.
    pub fn validate(&self) -> Result<(), MatrixError> {
        let n = self.n();
        let v = &self.values;
        for row in 0..n {
            for col in row + 1..n {
                let delta = (v[(row, col)] - v[(col, row)]).abs();
                if delta > SYMMETRY_TOL {
                    return Err(MatrixError::Asymmetric {
                        row,
                        col,
                        delta,
                        tol: SYMMETRY_TOL,
                    });
                }
            }
        }
        let class = self.id.value_class();
        let (lo, hi) = match class {
            ValueClass::SignedCorrelation => (-1.0, 1.0),
            ValueClass::Overlap => (0.0, 1.0),
            ValueClass::Unconstrained => return Ok(()),
        };
        for row in 0..n {
            for col in 0..n {
                let value = v[(row, col)];
                if !(lo..=hi).contains(&value) {
                    return Err(MatrixError::OutOfRange {
                        row,
                        col,
                        value,
                        lo,
                        hi,
                    });
                }
            }
        }
        for idx in 0..n {
            let value = v[(idx, idx)];
            let ok = match class {
                ValueClass::SignedCorrelation => value == 1.0,
                ValueClass::Overlap => value == 0.0 || value == 1.0,
                ValueClass::Unconstrained => unreachable!(),
            };
            if !ok {
                return Err(MatrixError::BadDiagonal {
                    idx,
                    value,
                    rule: match class {
                        ValueClass::SignedCorrelation => "must equal 1",
                        _ => "must be 0 or 1",
                    },
                });
            }
        }
        Ok(())
    }

    /// Applies an entity permutation: entry `(i, j)` of the result equals
    /// entry `(perm[i], perm[j])` of the original, and the order is permuted
    /// to match. `perm` must be a permutation of `0..n`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MatrixError> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || !perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true))
        {
            return Err(MatrixError::Malformed(format!(
                "not a permutation of 0..{n}: {perm:?}"
            )));
        }
        let order = perm.iter().map(|&p| self.order[p].clone()).collect();
        let values = DMatrix::from_fn(n, n, |i, j| self.values[(perm[i], perm[j])]);
        Self::new(self.id, order, values, self.undefined_fills)
    }
}

/// An ordered bundle of matrices sharing one entity order — the solver's
/// multi-view input.
#[derive(Debug, Clone)]
pub struct GraphSet {
    matrices: Vec<CorrelationMatrix>,
}

impl GraphSet {
    /// Bundles matrices, requiring at least one and a shared entity order.
    pub fn new(matrices: Vec<CorrelationMatrix>) -> Result<Self, MatrixError> {
        let first = matrices.first().ok_or(MatrixError::EmptyOrder)?;
        for m in &matrices[1..] {
            if m.order() != first.order() {
                return Err(MatrixError::OrderMismatch {
                    context: format!(
                        "graph set: {} does not share the order of {}",
                        m.id(),
                        first.id()
                    ),
                });
            }
        }
        Ok(Self { matrices })
    }

    /// The shared entity order.
    pub fn order(&self) -> &[Symbol] {
        self.matrices[0].order()
    }

    /// Number of entities.
    pub fn n(&self) -> usize {
        self.matrices[0].n()
    }

    /// Number of views.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    /// True when the set holds no matrices (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// The matrices in insertion order.
    pub fn matrices(&self) -> &[CorrelationMatrix] {
        &self.matrices
    }

    /// Looks a view up by identity.
    pub fn get(&self, id: MatrixId) -> Option<&CorrelationMatrix> {
        self.matrices.iter().find(|m| m.id() == id)
    }

    /// Iterates over the views.
    pub fn iter(&self) -> std::slice::Iter<'_, CorrelationMatrix> {
        self.matrices.iter()
    }
}

/// Formats a value with 10 significant decimal digits, the fixed cell format
/// of matrix files.
///
/// The number of fractional digits adapts to the magnitude so exactly ten
/// significant digits survive; zero (and negative zero, which is normalized)
/// prints as `0.000000000`.
pub fn format_cell(value: f64) -> String {
    let v = if value == 0.0 { 0.0 } else { value };
    if v == 0.0 {
        return "0.000000000".to_owned();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (9 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Writes a matrix in the pipeline's comma-separated format: an empty corner
/// cell plus the symbols as the first row, then one row per entity (symbol
/// followed by its cells, 10 significant digits each).
pub fn write_matrix_csv<W: io::Write>(
    matrix: &CorrelationMatrix,
    mut out: W,
) -> Result<(), MatrixError> {
    let order = matrix.order();
    let mut header = String::new();
    for s in order {
        header.push(',');
        header.push_str(s.as_str());
    }
    header.push('\n');
    out.write_all(header.as_bytes())?;
    for (i, s) in order.iter().enumerate() {
        let mut line = String::from(s.as_str());
        for j in 0..order.len() {
            let value = matrix.values()[(i, j)];
            if !value.is_finite() {
                return Err(MatrixError::NonFinite {
                    row: i,
                    col: j,
                    value,
                });
            }
            line.push(',');
            line.push_str(&format_cell(value));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Reads a matrix file produced by [`write_matrix_csv`], returning the entity
/// order and the values. The identity is not stored in the file; the caller
/// attaches it (it is conventionally the file stem).
pub fn read_matrix_csv<R: io::Read>(input: R) -> Result<(Vec<Symbol>, DMatrix<f64>), MatrixError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(MatrixError::Malformed("empty file".into())),
    };
    let mut fields = header.iter();
    match fields.next() {
        Some("") => {}
        other => {
            return Err(MatrixError::Malformed(format!(
                "corner cell must be empty, got {other:?}"
            )))
        }
    }
    let order = fields
        .map(Symbol::new)
        .collect::<Result<Vec<_>, _>>()?;
    if order.is_empty() {
        return Err(MatrixError::EmptyOrder);
    }
    let n = order.len();
    let mut values = DMatrix::zeros(n, n);
    let mut row = 0usize;
    for rec in records {
        let rec = rec?;
        if row >= n {
            return Err(MatrixError::Malformed(format!(
                "expected {n} data rows, found more"
            )));
        }
        if rec.len() != n + 1 {
            return Err(MatrixError::Malformed(format!(
                "row {} has {} fields, expected {}",
                row + 1,
                rec.len(),
                n + 1
            )));
        }
        let label = rec.get(0).unwrap_or_default();
        if label != order[row].as_str() {
            return Err(MatrixError::Malformed(format!(
                "row {} labeled {label:?}, expected {:?}",
                row + 1,
                order[row].as_str()
            )));
        }
        for col in 0..n {
            let raw = rec.get(col + 1).unwrap_or_default();
            let value: f64 = raw.parse().map_err(|_| {
                MatrixError::Malformed(format!("unparsable cell {raw:?} at row {}", row + 1))
            })?;
            if !value.is_finite() {
                return Err(MatrixError::NonFinite { row, col, value });
            }
            values[(row, col)] = value;
        }
        row += 1;
    }
    if row != n {
        return Err(MatrixError::Malformed(format!(
            "expected {n} data rows, found {row}"
        )));
    }
    Ok((order, values))
}

/// Builds symbols for a synthetic entity set: `A`, `B`, …, `Z`, `AA`, `AB`, …
/// in index order, always valid tickers for n within any desk-scale range.
pub fn synthetic_order(n: usize) -> Vec<Symbol> {
    (0..n)
        .map(|i| {
            let mut i = i;
            let mut name = String::new();
            loop {
                name.insert(0, (b'A' + (i % 26) as u8) as char);
                i /= 26;
                if i == 0 {
                    break;
                }
                i -= 1;
            }
            Symbol::new(name).expect("generated symbol is valid")
        })
        .collect()
}
