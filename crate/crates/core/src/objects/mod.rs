//! Simulated higher-level objects built from single memory instructions:
//! history objects and single-writer register arrays over ℓ-buffers,
//! multi-component counters in one location, and the two-max-register
//! value encoding.
//!
//! These are the sequential object APIs used by oracles and tests; the
//! protocol state machines in [`crate::protocols`] emit the same instruction
//! sequences one scheduler step at a time.

mod collect;
mod counter;
mod history;
mod maxpair;

pub use collect::{scan_double_collect, Timeout};
pub use counter::{
    base_digits, bit_block_counts, nth_prime, prime_exponents, Counter, CounterError, CounterKind,
};
pub use history::{reconstruct_history, tag_entry, HistoryError, HistoryObject, SwRegisterArray};
pub use maxpair::{MaxPairError, MaxRegisterPair};
