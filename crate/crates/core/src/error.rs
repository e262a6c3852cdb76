use std::fmt;

use thiserror::Error;

/// Which end of a two-sided path (or environment) an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Backward,
    Forward,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Backward => Side::Forward,
            Side::Forward => Side::Backward,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Backward => f.write_str("backward"),
            Side::Forward => f.write_str("forward"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} outside generated window [{lo}, {hi}]")]
    IndexOutOfWindow { index: i64, lo: i64, hi: i64 },

    #[error("rng stream does not continue the stored {side} stream")]
    StreamMismatch { side: Side },

    #[error("path has no stored rng streams and cannot be extended")]
    NotExtendable,

    #[error("coordinate overflow while extending the {side} side")]
    CoordinateOverflow { side: Side },

    #[error("window too small: grow the {side} side by at least {steps} steps")]
    NeedsExtension { side: Side, steps: u64 },

    #[error("no accepted sample after {attempts} attempts")]
    SamplingFailed { attempts: u64 },

    #[error("loop-erased length {got} shorter than the requested {needed}; raise the horizon")]
    HorizonTooShort { got: usize, needed: usize },

    #[error("empty path")]
    EmptyPath,

    #[error("no certified cut-time on the {side} side of the core; enlarge the core on that side")]
    NoCutTimeInCore { side: Side },

    #[error("too few certified cut-times: {found} found, {needed} needed")]
    TooFewCutTimes { found: usize, needed: usize },

    #[error("cut index {index} outside certified range [{lo}, {hi}]")]
    CutIndexOutOfRange { index: i64, lo: i64, hi: i64 },

    #[error("support does not connect the source to the sinks")]
    Disconnected,

    #[error("singular linear system (smallest/largest pivot ratio {ratio:e})")]
    Singular { ratio: f64 },

    #[error("path is not self-avoiding (vertex revisited at index {index})")]
    NotSelfAvoiding { index: i64 },

    #[error("holding probability {value:e} at site {site} is negative beyond tolerance")]
    NegativeHolding { site: i64, value: f64 },

    #[error("extension budget exhausted on the {side} side (sup R = {sup_r})")]
    BudgetExhausted { side: Side, sup_r: f64 },

    #[error("valley is not refinable on that side")]
    NotRefinable,

    #[error("walk left the certified region on the {side} side at step {step}")]
    WindowExhausted { side: Side, step: u64 },

    #[error("trajectory visits vertex outside the certified cut region at step {step}")]
    Uncertified { step: u64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
