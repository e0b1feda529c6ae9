//! Ingest: entity catalog, mention corpus, and market data files.
//!
//! This module turns the three external inputs into validated in-memory
//! structures: a catalog CSV defining the entity universe (and the matrix
//! row/column order used everywhere downstream), a line-delimited mention
//! corpus from which cashtag mentions are extracted, and per-entity market
//! CSVs. It also aggregates mention records into per-entity daily count
//! series and per-entity document-id sets over a study window.
//!
//! Parsing of the mention corpus is deliberately tolerant — real mention
//! streams are noisy — so malformed lines are skipped and counted rather
//! than failing the run. The catalog and market files define the study
//! universe and the ground truth, so they are parsed strictly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{MatrixError, Symbol};

/// Errors from ingest parsing and aggregation.
#[derive(Debug, Error)]
pub enum CorpusError {
    /// Symbol validation failed (shape rule lives with [`Symbol`]).
    #[error(transparent)]
    Symbol(#[from] MatrixError),
    /// Underlying IO failure.
    #[error("ingest io: {0}")]
    Io(#[from] io::Error),
    /// CSV-layer failure.
    #[error("ingest csv: {0}")]
    Csv(#[from] csv::Error),
    /// A required header row did not match.
    #[error("bad header in {file}: expected {expected:?}, got {got:?}")]
    BadHeader {
        file: &'static str,
        expected: &'static str,
        got: String,
    },
    /// The catalog contained no entries.
    #[error("catalog is empty")]
    EmptyCatalog,
    /// The same symbol appeared twice in the catalog.
    #[error("duplicate catalog symbol {0}")]
    DuplicateCatalogSymbol(String),
    /// The corpus produced zero usable records.
    #[error("corpus contains no records mentioning catalog entities")]
    EmptyCorpus,
    /// A study window was degenerate.
    #[error("window must span at least 2 days: {start} to {end}")]
    BadWindow { start: NaiveDate, end: NaiveDate },
    /// A market row had a non-positive closing price.
    #[error("market data for {symbol}: non-positive close {value} on {date}")]
    NonPositiveClose {
        symbol: Symbol,
        date: NaiveDate,
        value: f64,
    },
    /// A market row had a negative volume.
    #[error("market data for {symbol}: negative volume {value} on {date}")]
    NegativeVolume {
        symbol: Symbol,
        date: NaiveDate,
        value: f64,
    },
    /// The same trading date appeared twice for one symbol.
    #[error("market data for {symbol}: duplicate date {date}")]
    DuplicateDate { symbol: Symbol, date: NaiveDate },
    /// A market row failed to parse.
    #[error("market data for {symbol}: malformed row {row}: {reason}")]
    MalformedMarketRow {
        symbol: Symbol,
        row: usize,
        reason: String,
    },
    /// A catalog symbol had no market file.
    #[error("missing market file for {symbol}: {path}")]
    MissingMarketFile { symbol: Symbol, path: PathBuf },
    /// Structurally malformed input outside the skip-and-count policy.
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// Whether a record, series, or mention-set table covers original tweets or
/// retweets. The two kinds are disjoint: a retweet never counts toward the
/// tweet side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionKind {
    Tweet,
    Retweet,
}

impl MentionKind {
    /// Short lowercase name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Tweet => "tweet",
            Self::Retweet => "retweet",
        }
    }

    /// True when a record's retweet flag matches this kind.
    pub fn matches(&self, is_retweet: bool) -> bool {
        match self {
            Self::Tweet => !is_retweet,
            Self::Retweet => is_retweet,
        }
    }
}

impl fmt::Display for MentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One catalog row: a tracked entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub symbol: Symbol,
    pub name: String,
    pub industry: String,
}

/// The ordered entity universe. Catalog order defines the row/column index
/// of every matrix in the pipeline.
#[derive(Debug, Clone)]
pub struct EntityCatalog {
    entries: Vec<CatalogEntry>,
    index: BTreeMap<String, usize>,
}

impl EntityCatalog {
    /// Builds a catalog from entries, enforcing non-emptiness and symbol
    /// uniqueness.
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::EmptyCatalog);
        }
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.symbol.as_str().to_owned(), i).is_some() {
                return Err(CorpusError::DuplicateCatalogSymbol(
                    e.symbol.as_str().to_owned(),
                ));
            }
        }
        Ok(Self { entries, index })
    }

    /// The entries in catalog order.
    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    /// Number of entities.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when the catalog holds no entries (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The symbols in catalog order — the canonical matrix order.
    pub fn order(&self) -> Vec<Symbol> {
        self.entries.iter().map(|e| e.symbol.clone()).collect()
    }

    /// Looks up a symbol by its raw text.
    pub fn get(&self, text: &str) -> Option<&Symbol> {
        self.index.get(text).map(|&i| &self.entries[i].symbol)
    }

    /// Position of a symbol in catalog order.
    pub fn position(&self, symbol: &Symbol) -> Option<usize> {
        self.index.get(symbol.as_str()).copied()
    }
}

/// Expected catalog header.
const CATALOG_HEADER: &str = "symbol,name,industry";

/// Parses the catalog CSV (`symbol,name,industry` with header).
///
/// Strict: any malformed row is an error, because the catalog defines the
/// entity universe and a silently dropped row would change every matrix.
pub fn parse_catalog<R: io::Read>(input: R) -> Result<EntityCatalog, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(CorpusError::EmptyCatalog),
    };
    let got = header.iter().collect::<Vec<_>>().join(",");
    if got != CATALOG_HEADER {
        return Err(CorpusError::BadHeader {
            file: "catalog",
            expected: CATALOG_HEADER,
            got,
        });
    }
    let mut entries = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(CorpusError::Malformed(format!(
                "catalog row {} has {} fields, expected 3",
                i + 2,
                rec.len()
            )));
        }
        entries.push(CatalogEntry {
            symbol: Symbol::new(rec.get(0).unwrap_or_default())?,
            name: rec.get(1).unwrap_or_default().to_owned(),
            industry: rec.get(2).unwrap_or_default().to_owned(),
        });
    }
    EntityCatalog::new(entries)
}

/// One parsed mention-corpus record that references at least one catalog
/// entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionRecord {
    pub doc_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub is_retweet: bool,
    /// Catalog symbols extracted from `text` — always non-empty and a subset
    /// of the catalog.
    pub mentions: BTreeSet<Symbol>,
}

impl MentionRecord {
    /// The UTC calendar day this record falls on.
    pub fn day(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

/// Wire form of one corpus line.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    created_at: String,
    text: String,
    retweeted: bool,
}

/// Counters reported by [`parse_mention_corpus`].
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    /// Non-empty lines seen.
    pub lines: usize,
    /// Records kept (valid, with at least one catalog mention).
    pub records: usize,
    /// Lines that failed to parse (bad JSON, missing field, bad timestamp).
    pub malformed: usize,
    /// Valid lines dropped because they mention no catalog entity.
    pub dropped_no_mentions: usize,
    /// Valid lines dropped because their id repeated an earlier record's.
    pub duplicate_ids: usize,
}

/// Extracts catalog mentions from one text using the cashtag rule.
///
/// A mention is `$` followed by a maximal run of 1–6 uppercase ASCII
/// letters, where the `$` sits at a token boundary (start of text,
/// whitespace, or punctuation before it), the run is followed by the end of
/// text or a non-alphanumeric character, and the run is a catalog symbol.
/// The run is taken greedily: `$AAPL5` matches nothing because the maximal
/// candidate `AAPL` is followed by an alphanumeric character.
pub fn extract_mentions(text: &str, catalog: &EntityCatalog) -> BTreeSet<Symbol> {
    let mut found = BTreeSet::new();
    let mut prev: Option<char> = None;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if c != '$' {
            prev = Some(c);
            continue;
        }
        let boundary_ok = match prev {
            None => true,
            Some(p) => p.is_whitespace() || p.is_ascii_punctuation(),
        };
        let mut run = String::new();
        while let Some(&(_, rc)) = chars.peek() {
            if rc.is_ascii_uppercase() {
                run.push(rc);
                chars.next();
            } else {
                break;
            }
        }
        let after_ok = match chars.peek() {
            None => true,
            Some(&(_, rc)) => !rc.is_alphanumeric(),
        };
        if boundary_ok && after_ok && (1..=6).contains(&run.len()) {
            if let Some(symbol) = catalog.get(&run) {
                found.insert(symbol.clone());
            }
        }
        prev = if run.is_empty() { Some('$') } else { run.chars().last() };
    }
    found
}

/// Parses a line-delimited mention corpus.
///
/// Each line must be an object with fields `id`, `created_at` (ISO-8601
/// UTC), `text`, and `retweeted`. Malformed lines and duplicate ids are
/// skipped and counted; records mentioning no catalog entity are dropped and
/// counted. An entirely unusable corpus (zero kept records) is an error.
pub fn parse_mention_corpus<R: BufRead>(
    input: R,
    catalog: &EntityCatalog,
) -> Result<(Vec<MentionRecord>, CorpusStats), CorpusError> {
    let mut stats = CorpusStats::default();
    let mut records = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(_) => {
                stats.malformed += 1;
                continue;
            }
        };
        let timestamp = match DateTime::parse_from_rfc3339(&raw.created_at) {
            Ok(ts) => ts.with_timezone(&Utc),
            Err(_) => {
                stats.malformed += 1;
                continue;
            }
        };
        let mentions = extract_mentions(&raw.text, catalog);
        if mentions.is_empty() {
            stats.dropped_no_mentions += 1;
            continue;
        }
        if !seen_ids.insert(raw.id.clone()) {
            stats.duplicate_ids += 1;
            continue;
        }
        stats.records += 1;
        records.push(MentionRecord {
            doc_id: raw.id,
            timestamp,
            text: raw.text,
            is_retweet: raw.retweeted,
            mentions,
        });
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok((records, stats))
}

/// Writes records back to the canonical line-delimited format. Re-parsing
/// the output with the same catalog yields the same records.
pub fn write_mention_corpus<W: Write>(
    records: &[MentionRecord],
    mut out: W,
) -> Result<(), CorpusError> {
    for r in records {
        let raw = RawRecord {
            id: r.doc_id.clone(),
            created_at: r
                .timestamp
                .to_rfc3339_opts(SecondsFormat::AutoSi, true),
            text: r.text.clone(),
            retweeted: r.is_retweet,
        };
        let line = serde_json::to_string(&raw)
            .map_err(|e| CorpusError::Malformed(format!("serialize record: {e}")))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// An inclusive calendar-day study window of length T ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeWindow {
    start: NaiveDate,
    end: NaiveDate,
}

impl TimeWindow {
    /// Builds a window; `end` must be strictly after `start` so T ≥ 2.
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, CorpusError> {
        if end <= start {
            return Err(CorpusError::BadWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// First day (inclusive).
    pub fn start(&self) -> NaiveDate {
        self.start
    }

    /// Last day (inclusive).
    pub fn end(&self) -> NaiveDate {
        self.end
    }

    /// Day count T.
    pub fn len(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    /// Always false: a window spans at least two days.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Zero-based index of `date` within the window, if inside.
    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        if date < self.start || date > self.end {
            None
        } else {
            Some((date - self.start).num_days() as usize)
        }
    }

    /// True when `date` lies inside the window.
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.day_index(date).is_some()
    }
}

/// One entity's daily mention-count series over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub entity: Symbol,
    pub kind: MentionKind,
    pub window: TimeWindow,
    /// Length-T counts; days with no mentions hold 0.
    pub values: Vec<f64>,
}

/// Per-entity document-id sets for one record kind over a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionSetTable {
    pub kind: MentionKind,
    pub window: TimeWindow,
    /// `S_i`: ids of kind-matching in-window records mentioning entity i.
    pub sets: BTreeMap<Symbol, BTreeSet<String>>,
}

/// Aggregates records into one daily count series per catalog entity.
///
/// `values[d]` counts in-window records of the given kind whose mentions
/// include the entity on calendar day `d`; a record mentioning several
/// entities increments each of their series.
pub fn build_daily_series(
    records: &[MentionRecord],
    catalog: &EntityCatalog,
    window: &TimeWindow,
    kind: MentionKind,
) -> BTreeMap<Symbol, DailySeries> {
    let mut series: BTreeMap<Symbol, DailySeries> = catalog
        .order()
        .into_iter()
        .map(|symbol| {
            (
                symbol.clone(),
                DailySeries {
                    entity: symbol,
                    kind,
                    window: *window,
                    values: vec![0.0; window.len()],
                },
            )
        })
        .collect();
    for r in records {
        if !kind.matches(r.is_retweet) {
            continue;
        }
        let Some(day) = window.day_index(r.day()) else {
            continue;
        };
        for symbol in &r.mentions {
            if let Some(s) = series.get_mut(symbol) {
                s.values[day] += 1.0;
            }
        }
    }
    series
}

/// Aggregates records into per-entity document-id sets.
pub fn build_mention_sets(
    records: &[MentionRecord],
    catalog: &EntityCatalog,
    window: &TimeWindow,
    kind: MentionKind,
) -> MentionSetTable {
    let mut sets: BTreeMap<Symbol, BTreeSet<String>> = catalog
        .order()
        .into_iter()
        .map(|symbol| (symbol, BTreeSet::new()))
        .collect();
    for r in records {
        if !kind.matches(r.is_retweet) || !window.contains(r.day()) {
            continue;
        }
        for symbol in &r.mentions {
            if let Some(set) = sets.get_mut(symbol) {
                set.insert(r.doc_id.clone());
            }
        }
    }
    MentionSetTable {
        kind,
        window: *window,
        sets,
    }
}

/// One entity's market history: aligned trading dates, closing prices, and
/// volumes, sorted ascending by date.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSeries {
    pub entity: Symbol,
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
}

impl MarketSeries {
    /// Number of trading days on record.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    /// True when no rows were loaded.
    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Expected market-file header.
const MARKET_HEADER: &str = "date,close,volume";

/// Parses one per-symbol market CSV (`date,close,volume` with header).
///
/// Rows may arrive out of order and are sorted ascending on load. Strict:
/// malformed rows, non-positive closes, negative volumes, and duplicate
/// dates are errors naming the symbol, because ground truth built from bad
/// market data would silently corrupt every evaluation.
pub fn load_market_csv<R: io::Read>(
    symbol: &Symbol,
    input: R,
) -> Result<MarketSeries, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(CorpusError::BadHeader {
                file: "market",
                expected: MARKET_HEADER,
                got: String::new(),
            })
        }
    };
    let got = header.iter().collect::<Vec<_>>().join(",");
    if got != MARKET_HEADER {
        return Err(CorpusError::BadHeader {
            file: "market",
            expected: MARKET_HEADER,
            got,
        });
    }
    let mut rows: Vec<(NaiveDate, f64, f64)> = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + 2;
        let malformed = |reason: String| CorpusError::MalformedMarketRow {
            symbol: symbol.clone(),
            row,
            reason,
        };
        if rec.len() != 3 {
            return Err(malformed(format!("{} fields, expected 3", rec.len())));
        }
        let date = NaiveDate::parse_from_str(rec.get(0).unwrap_or_default(), "%Y-%m-%d")
            .map_err(|e| malformed(format!("bad date: {e}")))?;
        let close: f64 = rec
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e| malformed(format!("bad close: {e}")))?;
        let volume: f64 = rec
            .get(2)
            .unwrap_or_default()
            .parse()
            .map_err(|e| malformed(format!("bad volume: {e}")))?;
        if !close.is_finite() || close <= 0.0 {
            return Err(CorpusError::NonPositiveClose {
                symbol: symbol.clone(),
                date,
                value: close,
            });
        }
        if !volume.is_finite() || volume < 0.0 {
            return Err(CorpusError::NegativeVolume {
                symbol: symbol.clone(),
                date,
                value: volume,
            });
        }
        rows.push((date, close, volume));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CorpusError::DuplicateDate {
            symbol: symbol.clone(),
            date: w[0].0,
        });
    }
    Ok(MarketSeries {
        entity: symbol.clone(),
        dates: rows.iter().map(|r| r.0).collect(),
        close: rows.iter().map(|r| r.1).collect(),
        volume: rows.iter().map(|r| r.2).collect(),
    })
}

/// Loads `<SYMBOL>.csv` for every catalog entity from a directory.
///
/// A missing file is an error naming the symbol.
pub fn load_market_dir(
    dir: &Path,
    catalog: &EntityCatalog,
) -> Result<BTreeMap<Symbol, MarketSeries>, CorpusError> {
    let mut out = BTreeMap::new();
    for symbol in catalog.order() {
        let path = dir.join(format!("{}.csv", symbol.as_str()));
        let file = std::fs::File::open(&path).map_err(|_| CorpusError::MissingMarketFile {
            symbol: symbol.clone(),
            path: path.clone(),
        })?;
        let series = load_market_csv(&symbol, io::BufReader::new(file))?;
        out.insert(symbol, series);
    }
    Ok(out)
}
