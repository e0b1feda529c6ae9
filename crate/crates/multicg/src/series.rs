//! Numeric transforms on daily series.
//!
//! Everything in this module is a pure function over `&[f64]` slices: simple
//! moving-average smoothing, lag alignment, log returns, rolling volatility,
//! and the Pearson correlation kernel that all correlation graphs are built
//! from. Policy decisions (what to do with an undefined correlation, which
//! series get smoothed) live with the callers in [`crate::factors`]; the
//! kernels here stay honest and report degenerate cases explicitly.

use thiserror::Error;

/// Errors from series kernels.
#[derive(Debug, Error)]
pub enum SeriesError {
    /// Two paired series had different lengths.
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// An operation needed more points than were provided.
    #[error("series too short: got {got}, need at least {need}")]
    TooShort { got: usize, need: usize },
    /// A lag magnitude at or beyond the series length leaves no overlap.
    #[error("lag {lag} out of range for series of length {len}")]
    LagOutOfRange { lag: i64, len: usize },
    /// Log returns require strictly positive prices.
    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },
    /// Rolling volatility windows must span at least two points.
    #[error("volatility window must be at least 2, got {got}")]
    WindowTooSmall { got: usize },
}

/// Simple moving-average configuration.
///
/// `window` is the number of trailing days averaged (ℓ). A window of 1 leaves
/// the series unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingConfig {
    window: usize,
}

impl SmoothingConfig {
    /// Default smoothing window used by the pipeline.
    pub const DEFAULT_WINDOW: usize = 10;

    /// Creates a smoothing config; `window` must be ≥ 1.
    pub fn new(window: usize) -> Option<Self> {
        (window >= 1).then_some(Self { window })
    }

    /// The trailing window length ℓ.
    pub fn window(&self) -> usize {
        self.window
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            window: Self::DEFAULT_WINDOW,
        }
    }
}

/// A signed day lag between two aligned series.
///
/// Sign convention: for lag `l > 0` the peer series is read `l` days later,
/// for `l < 0` it starts `l` days earlier. Magnitudes must stay below the
/// series length so some overlap remains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagSpec {
    lag: i64,
}

impl LagSpec {
    /// Creates a lag spec. Any integer is representable; range against a
    /// concrete series length is checked by [`apply_lag`].
    pub fn new(lag: i64) -> Self {
        Self { lag }
    }

    /// The signed day offset.
    pub fn lag(&self) -> i64 {
        self.lag
    }
}

/// Smooths a series with a trailing simple moving average.
///
/// `out[d]` is the unweighted mean of the last ℓ values ending at `d`; for
/// the first `ℓ − 1` positions, where a full window does not exist yet, the
/// mean of the available prefix is used instead so the output keeps the input
/// length and downstream windows stay aligned.
///
/// ```
/// use multicg::series::{sma_smooth, SmoothingConfig};
/// let cfg = SmoothingConfig::new(2).unwrap();
/// assert_eq!(sma_smooth(&[1.0, 2.0, 3.0, 4.0], &cfg), vec![1.0, 1.5, 2.5, 3.5]);
/// ```
pub fn sma_smooth(values: &[f64], cfg: &SmoothingConfig) -> Vec<f64> {
    let window = cfg.window();
    let mut out = Vec::with_capacity(values.len());
    let mut running = 0.0;
    for d in 0..values.len() {
        running += values[d];
        if d >= window {
            // Re-sum the window instead of subtracting the departing value:
            // the incremental form accumulates rounding drift over long
            // series, which would break byte-stable reruns.
            running = values[d + 1 - window..=d].iter().sum();
        }
        let span = (d + 1).min(window);
        out.push(running / span as f64);
    }
    out
}

/// Aligns two equal-length series under a signed lag, returning borrowed
/// sub-slices of length `T − |l|`.
///
/// For `l > 0` the pair is `(x₁..x_{T−l}, y_{1+l}..y_T)`; for `l < 0` it is
/// `(x_{1−l}..x_T, y₁..y_{T+l})`; `l = 0` returns the inputs unchanged.
///
/// Errors if the lengths differ or `|l| ≥ T` (no overlap would remain).
pub fn apply_lag<'a>(
    x: &'a [f64],
    y: &'a [f64],
    spec: LagSpec,
) -> Result<(&'a [f64], &'a [f64]), SeriesError> {
    if x.len() != y.len() {
        return Err(SeriesError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let t = x.len();
    let l = spec.lag();
    let shift = l.unsigned_abs() as usize;
    if shift >= t {
        return Err(SeriesError::LagOutOfRange { lag: l, len: t });
    }
    let pair = if l >= 0 {
        (&x[..t - shift], &y[shift..])
    } else {
        (&x[shift..], &y[..t - shift])
    };
    Ok(pair)
}

/// Sample Pearson correlation of two equal-length series.
///
/// Uses the sample mean and the sample (n−1) standard deviation in the
/// textbook normalized-sum form. Returns `Ok(None)` when either standard
/// deviation is zero — a constant series has no defined correlation with
/// anything, and the caller decides what that means for its graph.
///
/// Errors on length mismatch or fewer than two points.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, SeriesError> {
    if x.len() != y.len() {
        return Err(SeriesError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(SeriesError::TooShort {
            got: x.len(),
            need: 2,
        });
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let var_x = x.iter().map(|v| (v - mean_x) * (v - mean_x)).sum::<f64>() / (n - 1.0);
    let var_y = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / (n - 1.0);
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(None);
    }
    let (sx, sy) = (var_x.sqrt(), var_y.sqrt());
    let mut acc = 0.0;
    for (&xv, &yv) in x.iter().zip(y) {
        acc += ((xv - mean_x) / sx) * ((yv - mean_y) / sy);
    }
    Ok(Some(acc / (n - 1.0)))
}

/// Daily log returns `ln(p_i / p_{i−1})` of a positive price series.
///
/// Output has length `n − 1`; errors if any price is non-positive or fewer
/// than two prices are given.
pub fn log_returns(close: &[f64]) -> Result<Vec<f64>, SeriesError> {
    if close.len() < 2 {
        return Err(SeriesError::TooShort {
            got: close.len(),
            need: 2,
        });
    }
    if let Some((index, &value)) = close.iter().enumerate().find(|(_, &p)| p <= 0.0) {
        return Err(SeriesError::NonPositivePrice { index, value });
    }
    Ok(close.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Default rolling-volatility window: one average trading month.
pub const DEFAULT_VOLATILITY_WINDOW: usize = 21;

/// Rolling sample standard deviation of a return series.
///
/// `out[d]` is the (n−1)-normalized standard deviation of the `w` returns
/// ending at `d`, emitted once a full window exists; the output has length
/// `len − w + 1`. Errors when the input is shorter than the window, or when
/// `w < 2` (a single sample has no sample deviation).
pub fn rolling_volatility(returns: &[f64], window: usize) -> Result<Vec<f64>, SeriesError> {
    if window < 2 {
        return Err(SeriesError::WindowTooSmall { got: window });
    }
    if returns.len() < window {
        return Err(SeriesError::TooShort {
            got: returns.len(),
            need: window,
        });
    }
    let out = returns
        .windows(window)
        .map(|w| {
            let mean = w.iter().sum::<f64>() / window as f64;
            let ss = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            (ss / (window as f64 - 1.0)).sqrt()
        })
        .collect();
    Ok(out)
}
