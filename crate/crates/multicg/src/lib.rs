//! Multi-view consensus correlation graphs.
//!
//! This library turns a timestamped stream of public entity mentions plus
//! per-entity market history into a family of pairwise correlation graphs,
//! learns a single consensus graph that explains all of them at once, and
//! scores how well any graph ranks each entity's true peers.
//!
//! The pipeline has four stages, mirrored by the module layout:
//!
//! 1. **Ingest** ([`corpus`]): parse the entity catalog, the mention stream,
//!    and per-entity market CSVs; extract cashtag mentions; aggregate into
//!    daily series over a study window.
//! 2. **Factor construction** ([`factors`], on top of the kernels in
//!    [`series`] and the containers in [`matrix`]): build twelve mention-side
//!    correlation graphs (volume, lagged volume, co-mention) and three
//!    market-side ground-truth matrices (trading volume, closing-price
//!    returns, historical volatility).
//! 3. **Consensus learning** ([`consensus`]): factor every view `Eᵢ` as
//!    `O·Mᵢ` with a shared consensus matrix `O`, fitted by coordinate
//!    descent, plus a weighted simple-averaging baseline.
//! 4. **Evaluation** ([`eval`]): compare any candidate graph against a
//!    ground-truth graph with a discounted-cumulative-gain ranking score
//!    averaged over entities.
//!
//! [`synth`] generates planted-truth scenarios with controllable noise so the
//! solver's recovery behaviour can be measured without any real data.

pub mod consensus;
pub mod corpus;
pub mod eval;
pub mod factors;
pub mod matrix;
pub mod series;
pub mod synth;
