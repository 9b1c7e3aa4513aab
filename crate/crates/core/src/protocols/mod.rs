//! Consensus protocols as per-process state machines.
//!
//! A [`Protocol`] maps (local state, last response) to the next poised
//! instruction or a decision. Local state is a [`Value`], so configurations
//! stay uniform, canonically serializable, and hashable regardless of which
//! protocol is running; each protocol privately encodes and decodes its own
//! state record.

pub mod codec;
mod dc;

#[cfg(test)]
mod tests;

mod bitbybit;
mod broken;
mod intro;
mod maxreg;
mod racing;
mod sieve;
mod swap;
mod tracks;

pub use bitbybit::{BitByBit, IncrementBinaryFactory, SieveBinaryFactory};
pub use broken::BrokenSample;
pub use intro::{DecMul, FaaTas};
pub use maxreg::MaxRegConsensus;
pub use racing::{BufferConsensus, RacingConsensus, RacingRealization};
pub use sieve::DoorSieve;
pub use swap::SwapConsensus;
pub use tracks::{TrackRace, TrackVariant};

use std::sync::Arc;

use crate::memory::{Configuration, Memory, Response};
use crate::value::Value;

/// Result of one protocol transition: either the updated local state plus
/// the next poised (location, instruction), or a decision.
#[derive(Clone, Debug)]
pub enum Step {
    Poised { state: Value, location: u64, instruction: crate::memory::Instruction },
    Decide(Value),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LocationBound {
    Finite(u64),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("scan exceeded its collect cap of {cap}")]
    ScanTimeout { cap: u64 },
    #[error("malformed local state: {0}")]
    BadState(String),
    #[error("unexpected response: {0}")]
    UnexpectedResponse(String),
    #[error("input {input} outside value domain 0..{m}")]
    BadInput { input: String, m: usize },
    #[error("{0}")]
    Broken(String),
}

/// A consensus protocol instance for a fixed process count and value domain.
pub trait Protocol: Send + Sync {
    fn name(&self) -> String;

    /// Number of participating processes.
    fn num_processes(&self) -> usize;

    /// Inputs and decisions range over {0..m−1}.
    fn value_domain(&self) -> usize;

    /// Fresh memory: instruction set plus per-protocol initial value.
    fn initial_memory(&self) -> Memory;

    fn location_bound(&self) -> LocationBound;

    /// Steps a solo run is allowed before the harness flags it.
    fn solo_budget(&self) -> u64 {
        50 * self.num_processes() as u64 * self.value_domain() as u64
    }

    fn init_state(&self, pid: usize, input: &Value) -> Result<Value, ProtocolError>;

    /// Pure transition. `resp` is `None` only for the very first call after
    /// [`init_state`](Self::init_state).
    fn transition(
        &self,
        pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError>;

    /// Completed double-collect scans recorded in a process's local state,
    /// for protocols that count them.
    fn scan_count(&self, _state: &Value) -> Option<u64> {
        None
    }

    /// Checked by the harness after every step; protocols with global
    /// invariants (e.g. bounded counter digits) override this.
    fn check_step_invariant(&self, _config: &Configuration) -> Result<(), String> {
        Ok(())
    }
}

/// Common input validation used by every `init_state`.
pub(crate) fn input_index(input: &Value, m: usize) -> Result<usize, ProtocolError> {
    input
        .to_usize()
        .filter(|v| *v < m)
        .ok_or_else(|| ProtocolError::BadInput { input: input.to_string(), m })
}

/// Parameters accepted by the registry.
#[derive(Clone, Debug, Default)]
pub struct ProtocolParams {
    pub n: usize,
    /// Buffer capacity for the buffer protocol.
    pub ell: Option<usize>,
    /// Instruction-set variant for the track and bit protocols.
    pub variant: Option<String>,
    /// Optional cap on collects per double-collect scan; exceeding it
    /// surfaces a scan timeout instead of spinning.
    pub scan_cap: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("unknown protocol {0:?}; known: {}", PROTOCOL_NAMES.join(", "))]
    UnknownProtocol(String),
    #[error("protocol {name} needs at least {min} processes (got {n})")]
    TooFewProcesses { name: &'static str, min: usize, n: usize },
    #[error("protocol {name} does not accept parameter {param}")]
    UnexpectedParam { name: &'static str, param: &'static str },
    #[error("invalid {param} for {name}: {why}")]
    InvalidParam { name: &'static str, param: &'static str, why: String },
}

/// Names addressable from the CLI, in presentation order.
pub const PROTOCOL_NAMES: &[&str] = &[
    "faa-tas",
    "dec-mul",
    "racing-multiply",
    "racing-add-bounded",
    "racing-setbit",
    "maxreg",
    "increment-logn",
    "buffer",
    "swap",
    "tas-tracks",
    "tas-reset",
    "broken-sample",
];

fn no_ell(name: &'static str, params: &ProtocolParams) -> Result<(), BuildError> {
    if params.ell.is_some() {
        return Err(BuildError::UnexpectedParam { name, param: "ell" });
    }
    Ok(())
}

fn no_variant(name: &'static str, params: &ProtocolParams) -> Result<(), BuildError> {
    if params.variant.is_some() {
        return Err(BuildError::UnexpectedParam { name, param: "variant" });
    }
    Ok(())
}

fn min_n(name: &'static str, n: usize, min: usize) -> Result<(), BuildError> {
    if n < min {
        return Err(BuildError::TooFewProcesses { name, min, n });
    }
    Ok(())
}

/// Builds a registered protocol by name.
pub fn build(name: &str, params: &ProtocolParams) -> Result<Arc<dyn Protocol>, BuildError> {
    let n = params.n;
    match name {
        "faa-tas" => {
            no_ell("faa-tas", params)?;
            no_variant("faa-tas", params)?;
            min_n("faa-tas", n, 2)?;
            Ok(Arc::new(FaaTas::new(n)))
        }
        "dec-mul" => {
            no_ell("dec-mul", params)?;
            no_variant("dec-mul", params)?;
            min_n("dec-mul", n, 2)?;
            Ok(Arc::new(DecMul::new(n)))
        }
        "racing-multiply" => {
            no_ell("racing-multiply", params)?;
            no_variant("racing-multiply", params)?;
            min_n("racing-multiply", n, 2)?;
            Ok(Arc::new(RacingConsensus::new(RacingRealization::Multiply, n, n, params.scan_cap)))
        }
        "racing-add-bounded" => {
            no_ell("racing-add-bounded", params)?;
            no_variant("racing-add-bounded", params)?;
            min_n("racing-add-bounded", n, 2)?;
            Ok(Arc::new(RacingConsensus::new(
                RacingRealization::AddBounded,
                n,
                n,
                params.scan_cap,
            )))
        }
        "racing-setbit" => {
            no_ell("racing-setbit", params)?;
            no_variant("racing-setbit", params)?;
            min_n("racing-setbit", n, 2)?;
            Ok(Arc::new(RacingConsensus::new(RacingRealization::SetBit, n, n, params.scan_cap)))
        }
        "maxreg" => {
            no_ell("maxreg", params)?;
            no_variant("maxreg", params)?;
            min_n("maxreg", n, 2)?;
            Ok(Arc::new(MaxRegConsensus::new(n, params.scan_cap)))
        }
        "increment-logn" => {
            no_ell("increment-logn", params)?;
            no_variant("increment-logn", params)?;
            min_n("increment-logn", n, 2)?;
            Ok(Arc::new(BitByBit::new(
                Arc::new(IncrementBinaryFactory { scan_cap: params.scan_cap }),
                n,
            )))
        }
        "buffer" => {
            no_variant("buffer", params)?;
            min_n("buffer", n, 2)?;
            let ell = params.ell.unwrap_or(1);
            if ell == 0 {
                return Err(BuildError::InvalidParam {
                    name: "buffer",
                    param: "ell",
                    why: "capacity must be at least 1".into(),
                });
            }
            Ok(Arc::new(BufferConsensus::new(n, ell, params.scan_cap)))
        }
        "swap" => {
            no_ell("swap", params)?;
            no_variant("swap", params)?;
            min_n("swap", n, 2)?;
            Ok(Arc::new(SwapConsensus::new(n, params.scan_cap)))
        }
        "tas-tracks" => {
            no_ell("tas-tracks", params)?;
            min_n("tas-tracks", n, 2)?;
            let variant = match params.variant.as_deref() {
                None | Some("write1") => TrackVariant::Write1,
                Some("test-and-set") | Some("tas") => TrackVariant::TestAndSet,
                Some(other) => {
                    return Err(BuildError::InvalidParam {
                        name: "tas-tracks",
                        param: "variant",
                        why: format!("{other:?} (expected write1 or test-and-set)"),
                    })
                }
            };
            Ok(Arc::new(TrackRace::new(n, variant)))
        }
        "tas-reset" => {
            no_ell("tas-reset", params)?;
            min_n("tas-reset", n, 2)?;
            let tas = match params.variant.as_deref() {
                None | Some("write01") => false,
                Some("tas-reset") => true,
                Some(other) => {
                    return Err(BuildError::InvalidParam {
                        name: "tas-reset",
                        param: "variant",
                        why: format!("{other:?} (expected write01 or tas-reset)"),
                    })
                }
            };
            Ok(Arc::new(BitByBit::new(Arc::new(SieveBinaryFactory { tas }), n)))
        }
        "broken-sample" => {
            no_ell("broken-sample", params)?;
            no_variant("broken-sample", params)?;
            min_n("broken-sample", n, 2)?;
            Ok(Arc::new(BrokenSample::new(n)))
        }
        other => Err(BuildError::UnknownProtocol(other.to_string())),
    }
}
