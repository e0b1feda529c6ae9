//! Builders for the mention-side factor graphs and the market-side ground
//! truths.
//!
//! Twelve factor graphs summarize the mention stream: plain tweet/retweet
//! volume correlation, the same at signed day lags, and tweet/retweet
//! co-mention overlap. Three ground-truth matrices summarize market
//! behaviour over the same study window: trading-volume correlation,
//! closing-price log-return correlation, and rolling-volatility correlation.
//! All builders emit [`CorrelationMatrix`] values over an explicit entity
//! order (conventionally the catalog order) and count every
//! undefined-correlation zero-fill in the matrix diagnostics.
//!
//! Mention-volume series are smoothed with the SMA before correlating;
//! co-mention overlap and market series are used raw.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use thiserror::Error;

use crate::corpus::{
    DailySeries, EntityCatalog, MarketSeries, MentionKind, MentionRecord, MentionSetTable,
    TimeWindow,
};
use crate::matrix::{
    CorrelationMatrix, FactorId, GraphSet, MatrixError, MatrixId, Symbol, TruthId,
};
use crate::series::{
    apply_lag, log_returns, pearson, rolling_volatility, sma_smooth, LagSpec, SeriesError,
    SmoothingConfig,
};

/// Errors from factor and ground-truth construction.
#[derive(Debug, Error)]
pub enum FactorError {
    /// A series kernel failed (length/lag/positivity preconditions).
    #[error(transparent)]
    Series(#[from] SeriesError),
    /// A matrix container constraint failed.
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    /// Correlation graphs need at least two entities.
    #[error("need at least 2 entities, got {0}")]
    TooFewEntities(usize),
    /// The series map was missing an entity from the requested order.
    #[error("no daily series for {0}")]
    MissingSeries(Symbol),
    /// One series covered a different window than the rest.
    #[error("series for {symbol} does not cover the requested window")]
    WindowMismatch { symbol: Symbol },
    /// One series was of the wrong mention kind.
    #[error("series for {symbol} has kind {got}, expected {expected}")]
    KindMismatch {
        symbol: Symbol,
        got: MentionKind,
        expected: MentionKind,
    },
    /// The mention-set table was missing an entity from the requested order.
    #[error("no mention set for {0}")]
    MissingSet(Symbol),
    /// Zero is not a valid entry in a lag set (it denotes the unlagged
    /// factor, which is always built).
    #[error("lag set must not contain 0")]
    ZeroLagInSet,
    /// No market series was provided for an entity.
    #[error("no market data for {0}")]
    MissingMarketData(Symbol),
    /// An entity had no trading days inside the window.
    #[error("{0}: no trading days inside the window")]
    NoInWindowTradingDays(Symbol),
    /// An entity lacked the leading trading days required for volatility.
    #[error(
        "insufficient market history for {symbol}: {got} leading trading days before the window, need {need}"
    )]
    InsufficientHistory {
        symbol: Symbol,
        got: usize,
        need: usize,
    },
    /// After intersecting all entities' calendars, too few leading days
    /// remained before the window.
    #[error("common trading calendar too short: {got} leading days before the window, need {need}")]
    InsufficientCommonHistory { got: usize, need: usize },
    /// Fewer than two common trading days fell inside the window.
    #[error("only {0} common trading days inside the window, need at least 2")]
    TooFewTradingDays(usize),
}

/// Round-off guard: a mathematically exact Pearson value can land a few ulps
/// outside [−1, 1] (e.g. perfectly proportional series); the matrix range
/// invariant is strict, so snap such values back.
fn clamp_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// Collects, validates, and smooths the per-entity series in `order`.
fn smoothed_in_order(
    order: &[Symbol],
    series: &BTreeMap<Symbol, DailySeries>,
    smoothing: &SmoothingConfig,
) -> Result<(MentionKind, Vec<Vec<f64>>), FactorError> {
    if order.len() < 2 {
        return Err(FactorError::TooFewEntities(order.len()));
    }
    let first = series
        .get(&order[0])
        .ok_or_else(|| FactorError::MissingSeries(order[0].clone()))?;
    let (kind, window) = (first.kind, first.window);
    let mut smoothed = Vec::with_capacity(order.len());
    for symbol in order {
        let s = series
            .get(symbol)
            .ok_or_else(|| FactorError::MissingSeries(symbol.clone()))?;
        if s.window != window {
            return Err(FactorError::WindowMismatch {
                symbol: symbol.clone(),
            });
        }
        if s.kind != kind {
            return Err(FactorError::KindMismatch {
                symbol: symbol.clone(),
                got: s.kind,
                expected: kind,
            });
        }
        smoothed.push(sma_smooth(&s.values, smoothing));
    }
    Ok((kind, smoothed))
}

/// Correlates pre-smoothed series pairwise at lag 0 into a symmetric matrix
/// with forced unit diagonal; undefined pairs fill 0 and are counted once
/// per unordered pair.
fn pairwise_pearson(
    id: MatrixId,
    order: &[Symbol],
    rows: &[Vec<f64>],
) -> Result<CorrelationMatrix, FactorError> {
    let n = order.len();
    let mut values = DMatrix::identity(n, n);
    let mut fills = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let cell = match pearson(&rows[i], &rows[j])? {
                Some(v) => clamp_unit(v),
                None => {
                    fills += 1;
                    0.0
                }
            };
            values[(i, j)] = cell;
            values[(j, i)] = cell;
        }
    }
    Ok(CorrelationMatrix::new(id, order.to_vec(), values, fills)?)
}

/// Builds the plain volume-correlation factor (`t` or `r`, by series kind):
/// SMA-smoothed daily counts correlated pairwise.
pub fn build_volume_graph(
    order: &[Symbol],
    series: &BTreeMap<Symbol, DailySeries>,
    smoothing: &SmoothingConfig,
) -> Result<CorrelationMatrix, FactorError> {
    let (kind, smoothed) = smoothed_in_order(order, series, smoothing)?;
    let id = MatrixId::Factor(match kind {
        MentionKind::Tweet => FactorId::Tweet,
        MentionKind::Retweet => FactorId::Retweet,
    });
    pairwise_pearson(id, order, &smoothed)
}

/// Builds a lagged volume-correlation factor (`t(l)` or `r(l)`).
///
/// The directed entry (i, j) correlates entity i's smoothed series against
/// entity j's shifted by the signed lag; the matrix is then symmetrized by
/// averaging with its transpose and the diagonal is forced to 1. A zero lag
/// is permitted and produces the plain volume factor (it is the lag-0
/// special case by construction). Undefined directed entries fill 0 and are
/// each counted.
pub fn build_lagged_graph(
    order: &[Symbol],
    series: &BTreeMap<Symbol, DailySeries>,
    smoothing: &SmoothingConfig,
    spec: LagSpec,
) -> Result<CorrelationMatrix, FactorError> {
    let (kind, smoothed) = smoothed_in_order(order, series, smoothing)?;
    let id = MatrixId::Factor(match (kind, spec.lag()) {
        (MentionKind::Tweet, 0) => FactorId::Tweet,
        (MentionKind::Retweet, 0) => FactorId::Retweet,
        (MentionKind::Tweet, l) => FactorId::TweetLag(l),
        (MentionKind::Retweet, l) => FactorId::RetweetLag(l),
    });
    let n = order.len();
    let mut directed = DMatrix::zeros(n, n);
    let mut fills = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (x, y) = apply_lag(&smoothed[i], &smoothed[j], spec)?;
            directed[(i, j)] = match pearson(x, y)? {
                Some(v) => clamp_unit(v),
                None => {
                    fills += 1;
                    0.0
                }
            };
        }
    }
    let mut values = DMatrix::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let cell = (directed[(i, j)] + directed[(j, i)]) / 2.0;
            values[(i, j)] = cell;
            values[(j, i)] = cell;
        }
    }
    Ok(CorrelationMatrix::new(id, order.to_vec(), values, fills)?)
}

/// Builds the co-mention overlap factor (`ct` or `cr`, by table kind).
///
/// Entry (i, j) is the overlap `|S_i ∩ S_j| / |S_i ∪ S_j|` of the two
/// entities' document-id sets; a pair with an empty union fills 0 and is
/// counted. The diagonal is 1 for entities with any mention and 0 otherwise.
pub fn build_cooccurrence_graph(
    order: &[Symbol],
    table: &MentionSetTable,
) -> Result<CorrelationMatrix, FactorError> {
    if order.len() < 2 {
        return Err(FactorError::TooFewEntities(order.len()));
    }
    let id = MatrixId::Factor(match table.kind {
        MentionKind::Tweet => FactorId::CoTweet,
        MentionKind::Retweet => FactorId::CoRetweet,
    });
    let n = order.len();
    let mut sets: Vec<&BTreeSet<String>> = Vec::with_capacity(n);
    for symbol in order {
        sets.push(
            table
                .sets
                .get(symbol)
                .ok_or_else(|| FactorError::MissingSet(symbol.clone()))?,
        );
    }
    let mut values = DMatrix::zeros(n, n);
    let mut fills = 0usize;
    for i in 0..n {
        values[(i, i)] = if sets[i].is_empty() { 0.0 } else { 1.0 };
        for j in i + 1..n {
            let union = sets[i].union(sets[j]).count();
            let cell = if union == 0 {
                fills += 1;
                0.0
            } else {
                let inter = sets[i].intersection(sets[j]).count();
                inter as f64 / union as f64
            };
            values[(i, j)] = cell;
            values[(j, i)] = cell;
        }
    }
    Ok(CorrelationMatrix::new(id, order.to_vec(), values, fills)?)
}

/// The canonical factor ordering for a sorted lag set: plain volume factors,
/// tweet lags ascending, retweet lags ascending, then the overlap factors.
pub fn factor_order(lags: &[i64]) -> Vec<FactorId> {
    let mut ids = vec![FactorId::Tweet, FactorId::Retweet];
    ids.extend(lags.iter().map(|&l| FactorId::TweetLag(l)));
    ids.extend(lags.iter().map(|&l| FactorId::RetweetLag(l)));
    ids.push(FactorId::CoTweet);
    ids.push(FactorId::CoRetweet);
    ids
}

/// Builds the complete factor set from parsed records, in the fixed order
/// given by [`factor_order`] over the deduplicated ascending lag set. With
/// the default lags {−2, −1, 1, 2} this is the canonical 12-factor family;
/// an empty lag set yields the 4 unlagged factors.
pub fn build_factor_set(
    records: &[MentionRecord],
    catalog: &EntityCatalog,
    window: &TimeWindow,
    lags: &[i64],
    smoothing: &SmoothingConfig,
) -> Result<GraphSet, FactorError> {
    if lags.contains(&0) {
        return Err(FactorError::ZeroLagInSet);
    }
    let mut lags: Vec<i64> = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();

    let order = catalog.order();
    let tweet_series = crate::corpus::build_daily_series(records, catalog, window, MentionKind::Tweet);
    let retweet_series =
        crate::corpus::build_daily_series(records, catalog, window, MentionKind::Retweet);
    let tweet_sets = crate::corpus::build_mention_sets(records, catalog, window, MentionKind::Tweet);
    let retweet_sets =
        crate::corpus::build_mention_sets(records, catalog, window, MentionKind::Retweet);

    let mut matrices = Vec::with_capacity(2 * lags.len() + 4);
    matrices.push(build_volume_graph(&order, &tweet_series, smoothing)?);
    matrices.push(build_volume_graph(&order, &retweet_series, smoothing)?);
    for &l in &lags {
        matrices.push(build_lagged_graph(
            &order,
            &tweet_series,
            smoothing,
            LagSpec::new(l),
        )?);
    }
    for &l in &lags {
        matrices.push(build_lagged_graph(
            &order,
            &retweet_series,
            smoothing,
            LagSpec::new(l),
        )?);
    }
    matrices.push(build_cooccurrence_graph(&order, &tweet_sets)?);
    matrices.push(build_cooccurrence_graph(&order, &retweet_sets)?);
    Ok(GraphSet::new(matrices)?)
}

/// The three market ground-truth matrices over one entity order.
#[derive(Debug, Clone)]
pub struct GroundTruthSet {
    tv: CorrelationMatrix,
    cp: CorrelationMatrix,
    hv: CorrelationMatrix,
}

impl GroundTruthSet {
    /// Looks up one indicator's matrix.
    pub fn get(&self, id: TruthId) -> &CorrelationMatrix {
        match id {
            TruthId::TradingVolume => &self.tv,
            TruthId::ClosingPrice => &self.cp,
            TruthId::HistoricalVolatility => &self.hv,
        }
    }

    /// All three matrices in canonical indicator order.
    pub fn iter(&self) -> impl Iterator<Item = (TruthId, &CorrelationMatrix)> {
        TruthId::ALL.iter().map(move |&t| (t, self.get(t)))
    }

    /// The shared entity order.
    pub fn order(&self) -> &[Symbol] {
        self.tv.order()
    }
}

/// Builds the ground-truth matrices from per-entity market series.
///
/// Correlations are taken over the trading days common to every entity that
/// fall inside the window: raw volumes for `tv`, log returns for `cp`, and
/// the rolling sample standard deviation of the last `vol_window` returns
/// for `hv`. Every entity therefore needs `vol_window` common trading days
/// of history immediately before the window (checked per entity first, so
/// the error can name the offending symbol).
pub fn build_ground_truth(
    market: &BTreeMap<Symbol, MarketSeries>,
    order: &[Symbol],
    window: &TimeWindow,
    vol_window: usize,
) -> Result<GroundTruthSet, FactorError> {
    if order.len() < 2 {
        return Err(FactorError::TooFewEntities(order.len()));
    }
    if vol_window < 2 {
        return Err(SeriesError::WindowTooSmall { got: vol_window }.into());
    }
    let mut per_symbol: Vec<&MarketSeries> = Vec::with_capacity(order.len());
    for symbol in order {
        let series = market
            .get(symbol)
            .ok_or_else(|| FactorError::MissingMarketData(symbol.clone()))?;
        let first_in_window = series
            .dates
            .iter()
            .position(|&d| window.contains(d))
            .ok_or_else(|| FactorError::NoInWindowTradingDays(symbol.clone()))?;
        if first_in_window < vol_window {
            return Err(FactorError::InsufficientHistory {
                symbol: symbol.clone(),
                got: first_in_window,
                need: vol_window,
            });
        }
        per_symbol.push(series);
    }

    // Common trading calendar: the dates every entity has on record.
    let mut common: BTreeSet<NaiveDate> = per_symbol[0].dates.iter().copied().collect();
    for series in &per_symbol[1..] {
        let dates: BTreeSet<NaiveDate> = series.dates.iter().copied().collect();
        common = common.intersection(&dates).copied().collect();
    }
    let calendar: Vec<NaiveDate> = common.into_iter().collect();
    let first_idx = calendar
        .iter()
        .position(|&d| window.contains(d))
        .ok_or(FactorError::TooFewTradingDays(0))?;
    let last_idx = calendar
        .iter()
        .rposition(|&d| window.contains(d))
        .expect("a first in-window day implies a last one");
    let in_window_days = last_idx - first_idx + 1;
    if in_window_days < 2 {
        return Err(FactorError::TooFewTradingDays(in_window_days));
    }
    if first_idx < vol_window {
        return Err(FactorError::InsufficientCommonHistory {
            got: first_idx,
            need: vol_window,
        });
    }

    // Per entity, align values onto calendar[first_idx - vol_window ..= last_idx]:
    // the window days plus the leading days that seed returns and volatility.
    let lead_start = first_idx - vol_window;
    let mut volumes: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    let mut returns_in_window: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    let mut volatility: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    for series in &per_symbol {
        let index: BTreeMap<NaiveDate, usize> = series
            .dates
            .iter()
            .copied()
            .enumerate()
            .map(|(i, d)| (d, i))
            .collect();
        let positions: Vec<usize> = calendar[lead_start..=last_idx]
            .iter()
            .map(|d| index[d])
            .collect();
        let close: Vec<f64> = positions.iter().map(|&p| series.close[p]).collect();
        let volume: Vec<f64> = positions.iter().map(|&p| series.volume[p]).collect();
        // Daily log returns over the extended span; the first `vol_window − 1`
        // belong to the leading days and only seed the volatility windows.
        let rets = log_returns(&close)?;
        let vols = rolling_volatility(&rets, vol_window)?;
        volumes.push(volume[vol_window..].to_vec());
        returns_in_window.push(rets[vol_window - 1..].to_vec());
        volatility.push(vols);
    }

    let tv = pairwise_pearson(MatrixId::Truth(TruthId::TradingVolume), order, &volumes)?;
    let cp = pairwise_pearson(
        MatrixId::Truth(TruthId::ClosingPrice),
        order,
        &returns_in_window,
    )?;
    let hv = pairwise_pearson(
        MatrixId::Truth(TruthId::HistoricalVolatility),
        order,
        &volatility,
    )?;
    Ok(GroundTruthSet { tv, cp, hv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_mention_corpus, CatalogEntry};

    fn sym(s: &str) -> Symbol {
        Symbol::new(s).unwrap()
    }

    fn window() -> TimeWindow {
        TimeWindow::new(
            "2012-10-01".parse().unwrap(),
            "2012-10-10".parse().unwrap(),
        )
        .unwrap()
    }

    fn series_map(kind: MentionKind, rows: &[(&str, Vec<f64>)]) -> BTreeMap<Symbol, DailySeries> {
        rows.iter()
            .map(|(name, values)| {
                (
                    sym(name),
                    DailySeries {
                        entity: sym(name),
                        kind,
                        window: window(),
                        values: values.clone(),
                    },
                )
            })
            .collect()
    }

    fn no_smoothing() -> SmoothingConfig {
        SmoothingConfig::new(1).unwrap()
    }

    #[test]
    fn volume_graph_identical_series_correlate_fully() {
        let base = vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 2.0, 7.0, 1.0, 8.0];
        let map = series_map(
            MentionKind::Tweet,
            &[("AAA", base.clone()), ("BBB", base.clone())],
        );
        let order = [sym("AAA"), sym("BBB")];
        let m = build_volume_graph(&order, &map, &no_smoothing()).unwrap();
        assert_eq!(m.id(), MatrixId::Factor(FactorId::Tweet));
        assert!((m.values()[(0, 1)] - 1.0).abs() < 1e-12);
        assert_eq!(m.undefined_fills(), 0);
        m.validate().unwrap();
    }

    #[test]
    fn volume_graph_zero_series_fills_and_counts() {
        let map = series_map(
            MentionKind::Tweet,
            &[
                ("AAA", vec![0.0; 10]),
                ("BBB", vec![1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0, 5.0, 1.0, 6.0]),
                ("CCC", vec![2.0, 1.0, 3.0, 1.0, 4.0, 1.0, 5.0, 1.0, 6.0, 1.0]),
            ],
        );
        let order = [sym("AAA"), sym("BBB"), sym("CCC")];
        let m = build_volume_graph(&order, &map, &no_smoothing()).unwrap();
        assert_eq!(m.values()[(0, 1)], 0.0);
        assert_eq!(m.values()[(0, 2)], 0.0);
        assert_eq!(m.values()[(0, 0)], 1.0);
        assert_eq!(m.undefined_fills(), 2);
        m.validate().unwrap();
    }

    #[test]
    fn volume_graph_matches_per_pair_kernel_oracle() {
        let rows = [
            ("AAA", vec![1.0, 4.0, 2.0, 8.0, 3.0, 0.0, 5.0, 1.0, 9.0, 2.0]),
            ("BBB", vec![2.0, 3.0, 1.0, 7.0, 4.0, 1.0, 6.0, 0.0, 8.0, 3.0]),
            ("CCC", vec![9.0, 1.0, 8.0, 2.0, 7.0, 3.0, 6.0, 4.0, 5.0, 0.0]),
        ];
        let map = series_map(MentionKind::Tweet, &rows);
        let order = [sym("AAA"), sym("BBB"), sym("CCC")];
        let smoothing = SmoothingConfig::new(3).unwrap();
        let m = build_volume_graph(&order, &map, &smoothing).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j {
                    1.0
                } else {
                    pearson(
                        &sma_smooth(&rows[i].1, &smoothing),
                        &sma_smooth(&rows[j].1, &smoothing),
                    )
                    .unwrap()
                    .unwrap()
                };
                assert!((m.values()[(i, j)] - expect).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn volume_graph_invariant_under_count_scaling() {
        let rows = [
            ("AAA", vec![1.0, 4.0, 2.0, 8.0, 3.0, 0.0, 5.0, 1.0, 9.0, 2.0]),
            ("BBB", vec![2.0, 3.0, 1.0, 7.0, 4.0, 1.0, 6.0, 0.0, 8.0, 3.0]),
        ];
        let scaled: Vec<(&str, Vec<f64>)> = rows
            .iter()
            .map(|(n, v)| (*n, v.iter().map(|x| 3.0 * x).collect()))
            .collect();
        let order = [sym("AAA"), sym("BBB")];
        let smoothing = SmoothingConfig::new(2).unwrap();
        let a = build_volume_graph(&order, &series_map(MentionKind::Tweet, &rows), &smoothing)
            .unwrap();
        let b = build_volume_graph(&order, &series_map(MentionKind::Tweet, &scaled), &smoothing)
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.values()[(i, j)] - b.values()[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lagged_graph_detects_exact_lag() {
        // BBB repeats AAA two days later, so the directed correlation at
        // l = +2 is exactly 1; the reverse direction is whatever it is, and
        // the symmetrized entry is their mean.
        let aaa = vec![1.0, 5.0, 2.0, 8.0, 3.0, 9.0, 4.0, 7.0, 0.0, 6.0];
        let mut bbb = vec![0.5, 0.5];
        bbb.extend_from_slice(&aaa[..8]);
        let map = series_map(MentionKind::Tweet, &[("AAA", aaa.clone()), ("BBB", bbb.clone())]);
        let order = [sym("AAA"), sym("BBB")];
        let m =
            build_lagged_graph(&order, &map, &no_smoothing(), LagSpec::new(2)).unwrap();
        let (x, y) = apply_lag(&aaa, &bbb, LagSpec::new(2)).unwrap();
        assert!((pearson(x, y).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let (rx, ry) = apply_lag(&bbb, &aaa, LagSpec::new(2)).unwrap();
        let reverse = pearson(rx, ry).unwrap().unwrap();
        let expect = (1.0 + reverse) / 2.0;
        assert!((m.values()[(0, 1)] - expect).abs() < 1e-12);
        assert_eq!(m.values()[(0, 0)], 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn lagged_graph_mirrors_under_lag_negation() {
        let rows = [
            ("AAA", vec![1.0, 4.0, 2.0, 8.0, 3.0, 0.0, 5.0, 1.0, 9.0, 2.0]),
            ("BBB", vec![2.0, 3.0, 1.0, 7.0, 4.0, 1.0, 6.0, 0.0, 8.0, 3.0]),
        ];
        let map = series_map(MentionKind::Retweet, &rows);
        let order = [sym("AAA"), sym("BBB")];
        let plus = build_lagged_graph(&order, &map, &no_smoothing(), LagSpec::new(1)).unwrap();
        let minus = build_lagged_graph(&order, &map, &no_smoothing(), LagSpec::new(-1)).unwrap();
        assert_eq!(plus.id(), MatrixId::Factor(FactorId::RetweetLag(1)));
        assert_eq!(minus.id(), MatrixId::Factor(FactorId::RetweetLag(-1)));
        assert!((plus.values()[(0, 1)] - minus.values()[(0, 1)]).abs() < 1e-12);
    }

    #[test]
    fn lagged_graph_matches_shift_then_correlate_oracle() {
        let rows = [
            ("AAA", vec![1.0, 4.0, 2.0, 8.0, 3.0, 0.0, 5.0, 1.0, 9.0, 2.0]),
            ("BBB", vec![2.0, 3.0, 1.0, 7.0, 4.0, 1.0, 6.0, 0.0, 8.0, 3.0]),
            ("CCC", vec![9.0, 1.0, 8.0, 2.0, 7.0, 3.0, 6.0, 4.0, 5.0, 0.0]),
            ("DDD", vec![3.0, 3.0, 4.0, 4.0, 5.0, 5.0, 2.0, 2.0, 1.0, 1.0]),
        ];
        let map = series_map(MentionKind::Tweet, &rows);
        let order: Vec<Symbol> = rows.iter().map(|(n, _)| sym(n)).collect();
        let smoothing = SmoothingConfig::new(2).unwrap();
        let spec = LagSpec::new(-2);
        let m = build_lagged_graph(&order, &map, &smoothing, spec).unwrap();
        let smoothed: Vec<Vec<f64>> = rows.iter().map(|(_, v)| sma_smooth(v, &smoothing)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                let (x, y) = apply_lag(&smoothed[i], &smoothed[j], spec).unwrap();
                let fwd = pearson(x, y).unwrap().unwrap();
                let (x, y) = apply_lag(&smoothed[j], &smoothed[i], spec).unwrap();
                let bwd = pearson(x, y).unwrap().unwrap();
                let expect = (fwd + bwd) / 2.0;
                assert!((m.values()[(i, j)] - expect).abs() < 1e-15, "({i},{j})");
                assert_eq!(m.values()[(i, j)], m.values()[(j, i)]);
            }
        }
    }

    #[test]
    fn lagged_graph_zero_lag_equals_volume_graph() {
        let rows = [
            ("AAA", vec![1.0, 4.0, 2.0, 8.0, 3.0, 0.0, 5.0, 1.0, 9.0, 2.0]),
            ("BBB", vec![2.0, 3.0, 1.0, 7.0, 4.0, 1.0, 6.0, 0.0, 8.0, 3.0]),
        ];
        let map = series_map(MentionKind::Tweet, &rows);
        let order = [sym("AAA"), sym("BBB")];
        let smoothing = SmoothingConfig::new(3).unwrap();
        let volume = build_volume_graph(&order, &map, &smoothing).unwrap();
        let lag0 = build_lagged_graph(&order, &map, &smoothing, LagSpec::new(0)).unwrap();
        assert_eq!(lag0.id(), volume.id());
        for i in 0..2 {
            for j in 0..2 {
                assert!((volume.values()[(i, j)] - lag0.values()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    fn set_table(kind: MentionKind, rows: &[(&str, &[&str])]) -> MentionSetTable {
        MentionSetTable {
            kind,
            window: window(),
            sets: rows
                .iter()
                .map(|(name, ids)| {
                    (
                        sym(name),
                        ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn cooccurrence_forced_arithmetic() {
        let table = set_table(
            MentionKind::Tweet,
            &[
                ("AAA", &["1", "2"]),
                ("BBB", &["1", "2"]),
                ("CCC", &["3"]),
                ("DDD", &["2", "3", "4"]),
                ("EEE", &[]),
            ],
        );
        let order: Vec<Symbol> = ["AAA", "BBB", "CCC", "DDD", "EEE"].map(sym).to_vec();
        let m = build_cooccurrence_graph(&order, &table).unwrap();
        assert_eq!(m.id(), MatrixId::Factor(FactorId::CoTweet));
        // Identical sets overlap fully; disjoint sets not at all.
        assert_eq!(m.values()[(0, 1)], 1.0);
        assert_eq!(m.values()[(0, 2)], 0.0);
        // |{2}| over |{1,2,3,4}|.
        assert_eq!(m.values()[(0, 3)], 0.25);
        // Empty set: zero row, zero diagonal, and one fill per empty-union pair.
        assert_eq!(m.values()[(4, 4)], 0.0);
        assert_eq!(m.values()[(0, 4)], 0.0);
        assert_eq!(m.undefined_fills(), 0);
        assert_eq!(m.values()[(0, 0)], 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn cooccurrence_empty_union_counts_fills() {
        let table = set_table(MentionKind::Retweet, &[("AAA", &[]), ("BBB", &[]), ("CCC", &["9"])]);
        let order: Vec<Symbol> = ["AAA", "BBB", "CCC"].map(sym).to_vec();
        let m = build_cooccurrence_graph(&order, &table).unwrap();
        assert_eq!(m.id(), MatrixId::Factor(FactorId::CoRetweet));
        assert_eq!(m.undefined_fills(), 1);
        assert_eq!(m.values()[(0, 1)], 0.0);
        m.validate().unwrap();
    }

    #[test]
    fn cooccurrence_invariant_under_doc_id_relabeling() {
        let a = set_table(
            MentionKind::Tweet,
            &[("AAA", &["1", "2", "3"]), ("BBB", &["2", "3", "4"])],
        );
        let b = set_table(
            MentionKind::Tweet,
            &[("AAA", &["x1", "x2", "x3"]), ("BBB", &["x2", "x3", "x4"])],
        );
        let order: Vec<Symbol> = ["AAA", "BBB"].map(sym).to_vec();
        let ma = build_cooccurrence_graph(&order, &a).unwrap();
        let mb = build_cooccurrence_graph(&order, &b).unwrap();
        assert_eq!(ma.values(), mb.values());
    }

    fn catalog(symbols: &[&str]) -> EntityCatalog {
        EntityCatalog::new(
            symbols
                .iter()
                .map(|s| CatalogEntry {
                    symbol: sym(s),
                    name: (*s).to_owned(),
                    industry: "Test".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn corpus_records(catalog: &EntityCatalog) -> Vec<MentionRecord> {
        let mut lines = Vec::new();
        for d in 1..=10 {
            for (i, tag) in ["$XOM", "$AAPL", "$XOM $AAPL"].iter().enumerate() {
                let n = (d * (i + 2)) % 3 + 1;
                for c in 0..n {
                    lines.push(format!(
                        "{{\"id\":\"{d}-{i}-{c}\",\"created_at\":\"2012-10-{d:02}T0{c}:00:00Z\",\"text\":\"note {tag}\",\"retweeted\":{}}}",
                        if (d + c) % 3 == 0 { "true" } else { "false" }
                    ));
                }
            }
        }
        parse_mention_corpus(lines.join("\n").as_bytes(), catalog)
            .unwrap()
            .0
    }

    #[test]
    fn factor_set_has_fixed_order() {
        let catalog = catalog(&["XOM", "AAPL"]);
        let records = corpus_records(&catalog);
        let smoothing = SmoothingConfig::new(2).unwrap();
        let set =
            build_factor_set(&records, &catalog, &window(), &[-2, -1, 1, 2], &smoothing).unwrap();
        let ids: Vec<MatrixId> = set.iter().map(|m| m.id()).collect();
        let expect: Vec<MatrixId> = [
            FactorId::Tweet,
            FactorId::Retweet,
            FactorId::TweetLag(-2),
            FactorId::TweetLag(-1),
            FactorId::TweetLag(1),
            FactorId::TweetLag(2),
            FactorId::RetweetLag(-2),
            FactorId::RetweetLag(-1),
            FactorId::RetweetLag(1),
            FactorId::RetweetLag(2),
            FactorId::CoTweet,
            FactorId::CoRetweet,
        ]
        .into_iter()
        .map(MatrixId::Factor)
        .collect();
        assert_eq!(ids, expect);
        // Catalog order is preserved even when it is not alphabetical.
        assert_eq!(set.order(), &[sym("XOM"), sym("AAPL")]);
        for m in set.iter() {
            m.validate().unwrap();
        }
    }

    #[test]
    fn factor_set_without_lags_has_four_factors() {
        let catalog = catalog(&["XOM", "AAPL"]);
        let records = corpus_records(&catalog);
        let set = build_factor_set(
            &records,
            &catalog,
            &window(),
            &[],
            &SmoothingConfig::new(2).unwrap(),
        )
        .unwrap();
        let ids: Vec<MatrixId> = set.iter().map(|m| m.id()).collect();
        assert_eq!(
            ids,
            [
                FactorId::Tweet,
                FactorId::Retweet,
                FactorId::CoTweet,
                FactorId::CoRetweet
            ]
            .into_iter()
            .map(MatrixId::Factor)
            .collect::<Vec<_>>()
        );
    }

    #[test]
    fn factor_set_rejects_zero_lag() {
        let catalog = catalog(&["XOM", "AAPL"]);
        let records = corpus_records(&catalog);
        assert!(matches!(
            build_factor_set(
                &records,
                &catalog,
                &window(),
                &[0, 1],
                &SmoothingConfig::default()
            ),
            Err(FactorError::ZeroLagInSet)
        ));
    }

    fn market_series(
        name: &str,
        start: NaiveDate,
        days: usize,
        close: impl Fn(usize) -> f64,
        volume: impl Fn(usize) -> f64,
    ) -> MarketSeries {
        let dates: Vec<NaiveDate> = (0..days)
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        MarketSeries {
            entity: sym(name),
            dates,
            close: (0..days).map(close).collect(),
            volume: (0..days).map(volume).collect(),
        }
    }

    fn truth_window() -> TimeWindow {
        TimeWindow::new(
            "2012-10-01".parse().unwrap(),
            "2012-10-20".parse().unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ground_truth_proportional_volumes_correlate_fully() {
        // 30 leading days before the window and 20 inside.
        let start: NaiveDate = "2012-09-01".parse().unwrap();
        let market: BTreeMap<Symbol, MarketSeries> = [
            market_series("AAA", start, 50, |i| 100.0 + (i % 7) as f64, |i| {
                1000.0 + 13.0 * ((i * i) % 11) as f64
            }),
            market_series("BBB", start, 50, |i| 50.0 + (i % 5) as f64, |i| {
                3.0 * (1000.0 + 13.0 * ((i * i) % 11) as f64)
            }),
        ]
        .into_iter()
        .map(|m| (m.entity.clone(), m))
        .collect();
        let order = [sym("AAA"), sym("BBB")];
        let truth = build_ground_truth(&market, &order, &truth_window(), 21).unwrap();
        let tv = truth.get(TruthId::TradingVolume);
        assert!((tv.values()[(0, 1)] - 1.0).abs() < 1e-12);
        for (_, m) in truth.iter() {
            m.validate().unwrap();
        }
    }

    #[test]
    fn ground_truth_constant_prices_fill_with_diagnostics() {
        let start: NaiveDate = "2012-09-01".parse().unwrap();
        let market: BTreeMap<Symbol, MarketSeries> = [
            market_series("AAA", start, 50, |_| 100.0, |i| 1000.0 + i as f64),
            market_series("BBB", start, 50, |i| 50.0 + (i % 5) as f64, |i| {
                2000.0 - 7.0 * ((i * 3) % 13) as f64
            }),
        ]
        .into_iter()
        .map(|m| (m.entity.clone(), m))
        .collect();
        let order = [sym("AAA"), sym("BBB")];
        let truth = build_ground_truth(&market, &order, &truth_window(), 21).unwrap();
        let cp = truth.get(TruthId::ClosingPrice);
        assert_eq!(cp.values()[(0, 1)], 0.0);
        assert_eq!(cp.undefined_fills(), 1);
        // Constant prices also mean zero rolling volatility.
        let hv = truth.get(TruthId::HistoricalVolatility);
        assert_eq!(hv.undefined_fills(), 1);
    }

    #[test]
    fn ground_truth_requires_leading_history() {
        let market: BTreeMap<Symbol, MarketSeries> = [
            market_series(
                "AAA",
                "2012-09-25".parse().unwrap(),
                30,
                |i| 100.0 + (i % 7) as f64,
                |i| 1000.0 + i as f64,
            ),
            market_series(
                "BBB",
                "2012-09-01".parse().unwrap(),
                50,
                |i| 50.0 + (i % 5) as f64,
                |i| 2000.0 + i as f64,
            ),
        ]
        .into_iter()
        .map(|m| (m.entity.clone(), m))
        .collect();
        let order = [sym("AAA"), sym("BBB")];
        let err = build_ground_truth(&market, &order, &truth_window(), 21).unwrap_err();
        match err {
            FactorError::InsufficientHistory { symbol, got, need } => {
                assert_eq!(symbol.as_str(), "AAA");
                assert_eq!(got, 6);
                assert_eq!(need, 21);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn ground_truth_matches_kernel_oracle() {
        let start: NaiveDate = "2012-09-01".parse().unwrap();
        let specs: Vec<(&str, Box<dyn Fn(usize) -> f64>, Box<dyn Fn(usize) -> f64>)> = vec![
            (
                "AAA",
                Box::new(|i| 100.0 * (1.0 + 0.01 * ((i % 9) as f64 - 4.0))),
                Box::new(|i| 1000.0 + 31.0 * ((i * 7) % 13) as f64),
            ),
            (
                "BBB",
                Box::new(|i| 80.0 * (1.0 + 0.02 * ((i % 6) as f64 - 2.5))),
                Box::new(|i| 500.0 + 17.0 * ((i * 5) % 11) as f64),
            ),
            (
                "CCC",
                Box::new(|i| 60.0 * (1.0 + 0.015 * (((i + 3) % 8) as f64 - 3.5))),
                Box::new(|i| 800.0 + 23.0 * ((i * 3) % 7) as f64),
            ),
        ];
        let market: BTreeMap<Symbol, MarketSeries> = specs
            .iter()
            .map(|(n, c, v)| {
                let m = market_series(n, start, 55, c, v);
                (m.entity.clone(), m)
            })
            .collect();
        let order: Vec<Symbol> = ["AAA", "BBB", "CCC"].map(sym).to_vec();
        let w = 21;
        let truth = build_ground_truth(&market, &order, &truth_window(), w).unwrap();

        // Oracle: recompute each indicator series directly from the raw
        // market rows, then correlate with the kernel.
        let win = truth_window();
        for (pi, pj) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let series_for = |idx: usize| {
                let s = &market[&order[idx]];
                let first = s.dates.iter().position(|&d| win.contains(d)).unwrap();
                let last = s.dates.iter().rposition(|&d| win.contains(d)).unwrap();
                let vol: Vec<f64> = s.volume[first..=last].to_vec();
                let close_ext: Vec<f64> = s.close[first - w..=last].to_vec();
                let rets = log_returns(&close_ext).unwrap();
                let cp: Vec<f64> = rets[w - 1..].to_vec();
                let hv = rolling_volatility(&rets, w).unwrap();
                (vol, cp, hv)
            };
            let (vol_i, cp_i, hv_i) = series_for(pi);
            let (vol_j, cp_j, hv_j) = series_for(pj);
            let tv_expect = pearson(&vol_i, &vol_j).unwrap().unwrap();
            let cp_expect = pearson(&cp_i, &cp_j).unwrap().unwrap();
            let hv_expect = pearson(&hv_i, &hv_j).unwrap().unwrap();
            assert!(
                (truth.get(TruthId::TradingVolume).values()[(pi, pj)] - tv_expect).abs() < 1e-12
            );
            assert!(
                (truth.get(TruthId::ClosingPrice).values()[(pi, pj)] - cp_expect).abs() < 1e-12
            );
            assert!(
                (truth.get(TruthId::HistoricalVolatility).values()[(pi, pj)] - hv_expect).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn ground_truth_errors_name_missing_data() {
        let market: BTreeMap<Symbol, MarketSeries> = BTreeMap::new();
        let order = [sym("AAA"), sym("BBB")];
        assert!(matches!(
            build_ground_truth(&market, &order, &truth_window(), 21),
            Err(FactorError::MissingMarketData(s)) if s.as_str() == "AAA"
        ));
    }
}
