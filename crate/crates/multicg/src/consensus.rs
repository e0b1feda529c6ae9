//! Consensus learning over a multi-view graph set, plus the
//! simple-averaging baseline.
//!
//! Given views `E₁ … E_m` over one entity order, the solver factors every
//! view through a single consensus matrix `O`, minimizing
//!
//! ```text
//! f(O, M) = Σᵢ ‖Eᵢ − O·Mᵢ‖²_F + α‖O‖²_F
//! ```
//!
//! by coordinate descent: starting from `O = I`, it alternates an exact
//! M-step (each `Mᵢ` solves `(OᵀO)·Mᵢ = OᵀEᵢ`, the minimizer of its
//! subproblem) with an exact O-step (`O = (Σ EᵢMᵢᵀ)(Σ MᵢMᵢᵀ + αI)⁻¹`,
//! the concatenated-form minimizer over `O`). Because both half-steps solve
//! their subproblems exactly, the objective trace is non-increasing; the
//! iteration stops when the relative objective change falls below the
//! configured tolerance or the sweep budget runs out.
//!
//! Everything here is deterministic: sums over views run in view order and
//! the linear solves are sequential dense factorizations, so identical
//! inputs produce bitwise-identical traces on one platform.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{CorrelationMatrix, GraphSet, MatrixError, MatrixId, Symbol};

/// Errors from the consensus solver and the averaging baseline.
#[derive(Debug, Error)]
pub enum ConsensusError {
    /// A solver parameter violated its constraint.
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    /// Averaging weights violated their constraints.
    #[error("invalid averaging weights: {0}")]
    InvalidWeights(String),
    /// M and E lists disagreed in length.
    #[error("view count mismatch: {m} restoration matrices vs {e} views")]
    ViewCountMismatch { m: usize, e: usize },
    /// A matrix had the wrong shape.
    #[error("dimension mismatch at view {index}: {rows}x{cols}, expected {n}x{n}")]
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    /// The objective overflowed or became NaN.
    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    /// A linear solve failed outright (should not happen for α > 0).
    #[error("linear solve failed in the {stage}-step")]
    SolveFailed { stage: &'static str },
    /// Container-level failure while packaging results.
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Default relative-objective-change tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default sweep budget.
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    alpha: f64,
    tol: f64,
    max_iter: usize,
    ridge: f64,
}

impl SolverConfig {
    /// Full constructor: `alpha > 0`, `tol > 0`, `max_iter ≥ 1`,
    /// `ridge ≥ 0` (an optional stabilizer added to the M-step system;
    /// 0 keeps the exact stationarity condition).
    pub fn new(
        alpha: f64,
        tol: f64,
        max_iter: usize,
        ridge: f64,
    ) -> Result<Self, ConsensusError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "tol must be positive, got {tol}"
            )));
        }
        if max_iter == 0 {
            return Err(ConsensusError::InvalidConfig(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "ridge must be non-negative, got {ridge}"
            )));
        }
        Ok(Self {
            alpha,
            tol,
            max_iter,
            ridge,
        })
    }

    /// Config with the given penalty weight and default tolerance, sweep
    /// budget, and zero ridge.
    pub fn with_alpha(alpha: f64) -> Result<Self, ConsensusError> {
        Self::new(alpha, DEFAULT_TOL, DEFAULT_MAX_ITER, 0.0)
    }

    /// Penalty weight α on ‖O‖²_F.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Relative objective-change convergence tolerance.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Maximum number of full sweeps.
    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    /// M-step stabilizer ε (0 by default).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

/// Non-negative per-view weights for the averaging baseline; not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageWeights {
    w: Vec<f64>,
}

impl AverageWeights {
    /// Validates weights: finite, non-negative, at least one positive.
    pub fn new(w: Vec<f64>) -> Result<Self, ConsensusError> {
        if w.is_empty() {
            return Err(ConsensusError::InvalidWeights("no weights given".into()));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ConsensusError::InvalidWeights(format!(
                "weights must be non-negative, got {bad}"
            )));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(ConsensusError::InvalidWeights(
                "weights must not all be zero".into(),
            ));
        }
        Ok(Self { w })
    }

    /// Unit weight per view — the conventional baseline.
    pub fn uniform(m: usize) -> Result<Self, ConsensusError> {
        Self::new(vec![1.0; m])
    }

    /// The weights.
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// Number of weights.
    pub fn len(&self) -> usize {
        self.w.len()
    }

    /// Never true: construction requires at least one weight.
    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Solver output: the consensus matrix, the per-view restoration matrices,
/// and the audit trail of the iteration.
#[derive(Debug, Clone)]
pub struct ConsensusResult {
    order: Vec<Symbol>,
    o: DMatrix<f64>,
    m: Vec<DMatrix<f64>>,
    objective_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    m_step_fallbacks: usize,
    config: SolverConfig,
}

impl ConsensusResult {
    /// The entity order shared by all matrices.
    pub fn order(&self) -> &[Symbol] {
        &self.order
    }

    /// The learned consensus matrix.
    pub fn o(&self) -> &DMatrix<f64> {
        &self.o
    }

    /// The per-view restoration matrices, in view order.
    pub fn m(&self) -> &[DMatrix<f64>] {
        &self.m
    }

    /// Objective values: index 0 is the initial value (consensus at the
    /// identity, restorations at zero), then one entry per full sweep.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Number of full sweeps performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Whether the relative-change test fired within the sweep budget.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// How many M-step solves fell back to the minimum-norm least-squares
    /// path because the system was singular at zero ridge.
    pub fn m_step_fallbacks(&self) -> usize {
        self.m_step_fallbacks
    }

    /// The configuration the run used.
    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Packages the consensus matrix as a [`CorrelationMatrix`] under the
    /// given identity.
    pub fn consensus_matrix(&self, id: MatrixId) -> Result<CorrelationMatrix, MatrixError> {
        CorrelationMatrix::new(id, self.order.clone(), self.o.clone(), 0)
    }
}

fn check_square(m: &DMatrix<f64>, n: usize, index: usize) -> Result<(), ConsensusError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(ConsensusError::DimensionMismatch {
            index,
            rows: m.nrows(),
            cols: m.ncols(),
            n,
        });
    }
    Ok(())
}

/// Squared Frobenius norm, summed in storage order for determinism.
fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// The penalized objective `Σᵢ ‖Eᵢ − O·Mᵢ‖²_F + α‖O‖²_F`.
pub fn objective(
    o: &DMatrix<f64>,
    m: &[DMatrix<f64>],
    e: &[DMatrix<f64>],
    alpha: f64,
) -> Result<f64, ConsensusError> {
    if m.len() != e.len() {
        return Err(ConsensusError::ViewCountMismatch {
            m: m.len(),
            e: e.len(),
        });
    }
    let n = o.nrows();
    check_square(o, n, 0)?;
    let mut total = 0.0;
    for (i, (mi, ei)) in m.iter().zip(e).enumerate() {
        check_square(mi, n, i)?;
        check_square(ei, n, i)?;
        total += frob_sq(&(ei - o * mi));
    }
    Ok(total + alpha * frob_sq(o))
}

/// One M-step: for each view, solve `(OᵀO + ridge·I)·Mᵢ = OᵀEᵢ` — the exact
/// minimizer of the M-subproblem. With zero ridge and a singular `OᵀO` the
/// solve falls back to the minimum-norm least-squares solution (via SVD of
/// the system matrix); the returned counter says how many views took that
/// path so results can document it.
pub fn update_m(
    o: &DMatrix<f64>,
    e: &[DMatrix<f64>],
    ridge: f64,
) -> Result<(Vec<DMatrix<f64>>, usize), ConsensusError> {
    let n = o.nrows();
    check_square(o, n, 0)?;
    let mut system = o.transpose() * o;
    for d in 0..n {
        system[(d, d)] += ridge;
    }
    let chol = nalgebra::Cholesky::new(system.clone());
    let svd = if chol.is_none() {
        Some(nalgebra::SVD::new(system, true, true))
    } else {
        None
    };
    let mut out = Vec::with_capacity(e.len());
    let mut fallbacks = 0usize;
    for (i, ei) in e.iter().enumerate() {
        check_square(ei, n, i)?;
        let rhs = o.transpose() * ei;
        let mi = if let Some(chol) = &chol {
            chol.solve(&rhs)
        } else {
            fallbacks += 1;
            let svd = svd.as_ref().expect("svd computed when cholesky failed");
            // Singular values at or below this threshold are treated as
            // zero, which is what makes the solution minimum-norm.
            let eps = svd.singular_values.max() * n as f64 * f64::EPSILON;
            svd.solve(&rhs, eps)
                .map_err(|_| ConsensusError::SolveFailed { stage: "M" })?
        };
        out.push(mi);
    }
    Ok((out, fallbacks))
}

/// One O-step: `O = (Σᵢ EᵢMᵢᵀ)·(Σᵢ MᵢMᵢᵀ + αI)⁻¹`, the exact minimizer of
/// the O-subproblem in concatenated form. For `α > 0` the system matrix is
/// symmetric positive definite.
pub fn update_o(
    m: &[DMatrix<f64>],
    e: &[DMatrix<f64>],
    alpha: f64,
) -> Result<DMatrix<f64>, ConsensusError> {
    if m.len() != e.len() {
        return Err(ConsensusError::ViewCountMismatch {
            m: m.len(),
            e: e.len(),
        });
    }
    let first = m.first().ok_or(ConsensusError::ViewCountMismatch {
        m: 0,
        e: e.len(),
    })?;
    let n = first.nrows();
    let mut system = DMatrix::zeros(n, n);
    let mut rhs = DMatrix::zeros(n, n);
    for (i, (mi, ei)) in m.iter().zip(e).enumerate() {
        check_square(mi, n, i)?;
        check_square(ei, n, i)?;
        system += mi * mi.transpose();
        rhs += ei * mi.transpose();
    }
    for d in 0..n {
        system[(d, d)] += alpha;
    }
    // O·S = B with S symmetric positive definite: solve S·Oᵀ = Bᵀ.
    let chol =
        nalgebra::Cholesky::new(system).ok_or(ConsensusError::SolveFailed { stage: "O" })?;
    Ok(chol.solve(&rhs.transpose()).transpose())
}

/// Runs the coordinate-descent consensus solver on a graph set.
///
/// The consensus matrix starts at the identity; each sweep runs the M-step
/// then the O-step and records the objective. The run stops as converged
/// when the relative change `|f_k − f_{k−1}| / max(1, f_{k−1})` drops below
/// `cfg.tol()`, or unconverged when `cfg.max_iter()` sweeps have run.
pub fn solve_multicg(set: &GraphSet, cfg: &SolverConfig) -> Result<ConsensusResult, ConsensusError> {
    let n = set.n();
    let e: Vec<DMatrix<f64>> = set.iter().map(|m| m.values().clone()).collect();
    let mut o = DMatrix::<f64>::identity(n, n);
    let mut m: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); e.len()];

    let mut trace = Vec::with_capacity(cfg.max_iter() + 1);
    trace.push(objective(&o, &m, &e, cfg.alpha())?);
    let mut fallbacks = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    for sweep in 1..=cfg.max_iter() {
        let (m_new, fb) = update_m(&o, &e, cfg.ridge())?;
        m = m_new;
        fallbacks += fb;
        o = update_o(&m, &e, cfg.alpha())?;
        let f = objective(&o, &m, &e, cfg.alpha())?;
        if !f.is_finite() {
            return Err(ConsensusError::NonFiniteObjective { iteration: sweep });
        }
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(f);
        iterations = sweep;
        if (f - prev).abs() / prev.max(1.0) < cfg.tol() {
            converged = true;
            break;
        }
    }
    Ok(ConsensusResult {
        order: set.order().to_vec(),
        o,
        m,
        objective_trace: trace,
        iterations,
        converged,
        m_step_fallbacks: fallbacks,
        config: *cfg,
    })
}

/// The simple-averaging baseline: `O = (1/m)·Σᵢ wᵢ·Eᵢ` elementwise.
///
/// Note the fixed `1/m` scale — weights are not renormalized, so a zero
/// weight genuinely drops its view from the sum.
pub fn simple_average(
    set: &GraphSet,
    weights: &AverageWeights,
) -> Result<CorrelationMatrix, ConsensusError> {
    if weights.len() != set.len() {
        return Err(ConsensusError::ViewCountMismatch {
            m: weights.len(),
            e: set.len(),
        });
    }
    let n = set.n();
    let mut sum = DMatrix::zeros(n, n);
    for (w, view) in weights.as_slice().iter().zip(set.iter()) {
        sum += view.values() * *w;
    }
    sum /= set.len() as f64;
    Ok(CorrelationMatrix::new(
        MatrixId::SimpleAverage,
        set.order().to_vec(),
        sum,
        0,
    )?)
}
