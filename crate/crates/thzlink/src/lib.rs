//! Link-level simulation library for THz-band ultra-massive MIMO with
//! power-domain superposition coding and NOMA.
//!
//! The crate is organized around the receive chain:
//!
//! * [`linalg`] — dense complex matrices and the two channel decompositions
//!   every detector is built on: QR and the punctured WR decomposition.
//! * [`constellation`] — scaled Gray-mapped QAM, slicing, bit (de)mapping.
//! * [`channel`] — THz LoS channels with molecular absorption, Saleh-Valenzuela
//!   multipath, i.i.d. Gaussian benchmarks, and spatial-tuning geometry.
//! * [`detect`] — the detector family (ML, NC, PNC, CD, PCD, LORD, SSD) plus
//!   successive interference cancellation across superposed streams.
//! * [`noma`] — multi-user scenarios: PPP user drops, distance-based
//!   clustering and power control, two-user NOMA detection.
//! * [`analysis`] — closed-form BER evaluators and the flop-count
//!   complexity model.
//! * [`flops`] — instrumented complex-arithmetic counters backing the
//!   complexity model.
//! * [`sim`] — the Monte Carlo BER engine with reproducible parallel RNG
//!   and CSV export.

pub mod analysis;
pub mod channel;
pub mod constellation;
pub mod detect;
pub mod flops;
pub mod linalg;
pub mod noma;
pub mod sim;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A decomposition pivot or nulling projection fell below the rank tolerance.
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    /// Requested submatrix or index outside the valid range.
    #[error("out of range: {0}")]
    OutOfRange(String),
    /// Constellation order not in the supported set {{2, 4, 16, 64}}.
    #[error("unsupported constellation order {0}")]
    UnsupportedOrder(usize),
    /// Bit-vector length not divisible by bits-per-symbol, or symbol count mismatch.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    /// Vector/matrix dimensions disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Exhaustive lattice search would exceed the configured candidate cap.
    #[error("search space too large: {candidates} candidates exceed cap {cap}")]
    SearchSpaceTooLarge { candidates: u128, cap: u128 },
    /// Scalar argument outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A Poisson user drop produced zero users.
    #[error("empty user drop (K = 0)")]
    EmptyDrop,
    /// Power budget exhausted while allocating a NOMA pair.
    #[error("power budget exhausted: {0}")]
    BudgetExhausted(String),
    /// Error-pattern recursion would enumerate more than 2^cap patterns.
    #[error("error-pattern set too large: N = {n} exceeds cap {cap}")]
    PatternExplosion { n: usize, cap: usize },
    /// Unknown SNR mapping mode.
    #[error("unknown SNR mode: {0}")]
    UnknownMode(String),
    /// A stream plan violated its invariants.
    #[error("invalid stream plan: {0}")]
    InvalidPlan(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
