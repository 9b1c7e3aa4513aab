//! n-valued consensus from binary consensus, one bit per asynchronous round.
//!
//! With R = ⌈log₂ n⌉ rounds, processes agree on their value's bits from most
//! to least significant. In round i a process records its current value in
//! the round's designated location for its i-th bit, runs a fresh binary
//! instance on that bit, and, if the agreed bit differs from its own, adopts
//! a value recorded under the winning bit (one must exist: the agreed bit
//! was some participant's input bit, and every participant records before
//! racing). The last round needs no designated locations: entrants already
//! agree on all earlier bits, so the agreed last bit pins the value.
//!
//! Memory layout: round i occupies a block of c inner locations followed by
//! its designated area (absent in the last round), at offset i·(c+d). With
//! plain-value designated locations d = 2 and values are stored shifted by
//! +1 so 0 means "unwritten"; with single-bit designated locations d = 2n
//! and recording value u sets bit u of the block for the written bit.

use std::sync::Arc;

use super::codec::{field_usize, tagged, untag};
use super::{
    input_index, DoorSieve, LocationBound, Protocol, ProtocolError, RacingConsensus,
    RacingRealization, Step,
};
use crate::memory::{Instruction, Memory, Response};
use crate::value::{Int, Value};

/// What a designated location is made of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignatedKind {
    /// One multi-valued location per bit; read retries while unwritten.
    PlainValue,
    /// n single-bit locations per bit; reading probes for a set bit.
    Bits { tas: bool },
}

/// Supplies the per-round binary instances. Inner protocols must be binary
/// (value domain 2), declare a finite location count, and initialize all
/// locations to integer 0.
pub trait BinaryFactory: Send + Sync {
    fn display_name(&self) -> String;
    fn make(&self, n: usize) -> Arc<dyn Protocol>;
    fn designated(&self) -> DesignatedKind;
}

/// Binary racing counters over two {read, write, increment} locations.
pub struct IncrementBinaryFactory {
    pub scan_cap: Option<u64>,
}

impl BinaryFactory for IncrementBinaryFactory {
    fn display_name(&self) -> String {
        "increment-logn".into()
    }

    fn make(&self, n: usize) -> Arc<dyn Protocol> {
        Arc::new(RacingConsensus::new(RacingRealization::IncrementPair, n, 2, self.scan_cap))
    }

    fn designated(&self) -> DesignatedKind {
        DesignatedKind::PlainValue
    }
}

/// The 2n-bit door sieve with single-bit designated locations.
pub struct SieveBinaryFactory {
    pub tas: bool,
}

impl BinaryFactory for SieveBinaryFactory {
    fn display_name(&self) -> String {
        "tas-reset".into()
    }

    fn make(&self, n: usize) -> Arc<dyn Protocol> {
        Arc::new(DoorSieve::new(n, self.tas))
    }

    fn designated(&self) -> DesignatedKind {
        DesignatedKind::Bits { tas: self.tas }
    }
}

pub struct BitByBit {
    factory: Arc<dyn BinaryFactory>,
    inner: Arc<dyn Protocol>,
    n: usize,
    rounds: usize,
    inner_locs: u64,
}

const PH_RECORD: i64 = 0;
const PH_INNER: i64 = 1;
const PH_ADOPT: i64 = 2;

// Common fields: [value, round, bit, extra...]
const F_VALUE: usize = 0;
const F_ROUND: usize = 1;
const F_BIT: usize = 2;
const F_INNER_STATE: usize = 3;
const F_PROBE: usize = 3;
const F_AGREED: usize = 4;

fn ceil_log2(n: usize) -> usize {
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

impl BitByBit {
    pub fn new(factory: Arc<dyn BinaryFactory>, n: usize) -> BitByBit {
        let inner = factory.make(n);
        assert_eq!(inner.value_domain(), 2, "inner protocol must be binary");
        let inner_locs = match inner.location_bound() {
            LocationBound::Finite(c) => c,
            LocationBound::Unbounded => panic!("inner protocol must be bounded"),
        };
        BitByBit { factory, inner, n, rounds: ceil_log2(n).max(1), inner_locs }
    }

    fn designated_width(&self) -> u64 {
        match self.factory.designated() {
            DesignatedKind::PlainValue => 2,
            DesignatedKind::Bits { .. } => 2 * self.n as u64,
        }
    }

    fn round_base(&self, round: usize) -> u64 {
        round as u64 * (self.inner_locs + self.designated_width())
    }

    /// Designated location(s) for `bit` in `round`; `offset` picks the
    /// value slot in the bits layout.
    fn designated_loc(&self, round: usize, bit: usize, offset: usize) -> u64 {
        let start = self.round_base(round) + self.inner_locs;
        match self.factory.designated() {
            DesignatedKind::PlainValue => start + bit as u64,
            DesignatedKind::Bits { .. } => start + (bit * self.n + offset) as u64,
        }
    }

    fn bit_of(&self, value: usize, round: usize) -> usize {
        (value >> (self.rounds - 1 - round)) & 1
    }

    fn enter_round(&self, pid: usize, value: usize, round: usize) -> Result<Step, ProtocolError> {
        let bit = self.bit_of(value, round);
        if round + 1 == self.rounds {
            // Last round records nothing.
            return self.start_inner(pid, value, round, bit);
        }
        let (location, instruction) = match self.factory.designated() {
            DesignatedKind::PlainValue => (
                self.designated_loc(round, bit, 0),
                Instruction::Write(Value::Int(Int::from(value as u64 + 1))),
            ),
            DesignatedKind::Bits { tas } => (
                self.designated_loc(round, bit, value),
                if tas { Instruction::TestAndSet } else { Instruction::Write1 },
            ),
        };
        Ok(Step::Poised {
            state: tagged(
                PH_RECORD,
                vec![
                    Value::int(value as i64),
                    Value::int(round as i64),
                    Value::int(bit as i64),
                ],
            ),
            location,
            instruction,
        })
    }

    fn start_inner(
        &self,
        pid: usize,
        value: usize,
        round: usize,
        bit: usize,
    ) -> Result<Step, ProtocolError> {
        let inner_state = self.inner.init_state(pid, &Value::int(bit as i64))?;
        let step = self.inner.transition(pid, &inner_state, None)?;
        self.map_inner_step(pid, value, round, bit, step)
    }

    fn map_inner_step(
        &self,
        pid: usize,
        value: usize,
        round: usize,
        bit: usize,
        step: Step,
    ) -> Result<Step, ProtocolError> {
        match step {
            Step::Poised { state, location, instruction } => Ok(Step::Poised {
                state: tagged(
                    PH_INNER,
                    vec![
                        Value::int(value as i64),
                        Value::int(round as i64),
                        Value::int(bit as i64),
                        state,
                    ],
                ),
                location: self.round_base(round) + location,
                instruction,
            }),
            Step::Decide(w) => {
                let agreed = w.to_usize().filter(|b| *b < 2).ok_or_else(|| {
                    ProtocolError::BadState(format!("inner decided non-bit {w}"))
                })?;
                self.after_inner(pid, value, round, bit, agreed)
            }
        }
    }

    fn after_inner(
        &self,
        pid: usize,
        value: usize,
        round: usize,
        bit: usize,
        agreed: usize,
    ) -> Result<Step, ProtocolError> {
        if agreed == bit {
            return self.conclude_round(pid, value, round);
        }
        if round + 1 == self.rounds {
            // Entrants agree on all earlier bits, so replacing the last bit
            // yields the winning entrant's value.
            let adopted = (value & !1) | agreed;
            return self.conclude_round(pid, adopted, round);
        }
        // Adopt a recorded value for the winning bit.
        let location = self.designated_loc(round, agreed, 0);
        Ok(Step::Poised {
            state: tagged(
                PH_ADOPT,
                vec![
                    Value::int(value as i64),
                    Value::int(round as i64),
                    Value::int(bit as i64),
                    Value::int(0),
                    Value::int(agreed as i64),
                ],
            ),
            location,
            instruction: Instruction::Read,
        })
    }

    fn conclude_round(
        &self,
        pid: usize,
        value: usize,
        round: usize,
    ) -> Result<Step, ProtocolError> {
        if value >= self.n {
            return Err(ProtocolError::BadState(format!(
                "composed value {value} outside domain 0..{}",
                self.n
            )));
        }
        if round + 1 == self.rounds {
            Ok(Step::Decide(Value::int(value as i64)))
        } else {
            self.enter_round(pid, value, round + 1)
        }
    }
}

impl Protocol for BitByBit {
    fn name(&self) -> String {
        self.factory.display_name()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        self.n
    }

    fn initial_memory(&self) -> Memory {
        Memory::new(self.inner.initial_memory().instruction_set().clone(), Value::int(0))
    }

    fn location_bound(&self) -> LocationBound {
        let per_round = self.inner_locs + self.designated_width();
        LocationBound::Finite(self.rounds as u64 * per_round - self.designated_width())
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, self.n)?;
        // The real first step is produced by the first transition call.
        Ok(tagged(
            PH_RECORD,
            vec![Value::int(x as i64), Value::int(-1), Value::int(0)],
        ))
    }

    fn transition(
        &self,
        pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        let (phase, fields) = untag(state)?;
        let value = field_usize(fields, F_VALUE)?;
        match (phase, resp) {
            (PH_RECORD, None) => self.enter_round(pid, value, 0),
            (PH_RECORD, Some(_)) => {
                let round = field_usize(fields, F_ROUND)?;
                let bit = field_usize(fields, F_BIT)?;
                self.start_inner(pid, value, round, bit)
            }
            (PH_INNER, Some(r)) => {
                let round = field_usize(fields, F_ROUND)?;
                let bit = field_usize(fields, F_BIT)?;
                let inner_state = fields.get(F_INNER_STATE).ok_or_else(|| {
                    ProtocolError::BadState("missing inner state".into())
                })?;
                let step = self.inner.transition(pid, inner_state, Some(r))?;
                self.map_inner_step(pid, value, round, bit, step)
            }
            (PH_ADOPT, Some(r)) => {
                let round = field_usize(fields, F_ROUND)?;
                let bit = field_usize(fields, F_BIT)?;
                let probe = field_usize(fields, F_PROBE)?;
                let agreed = field_usize(fields, F_AGREED)?;
                let read = match r {
                    Response::Value(v) => v.to_u64().ok_or_else(|| {
                        ProtocolError::UnexpectedResponse(format!("bad designated value {v}"))
                    })?,
                    Response::Ack => {
                        return Err(ProtocolError::UnexpectedResponse(
                            "ack during adopt read".into(),
                        ))
                    }
                };
                match self.factory.designated() {
                    DesignatedKind::PlainValue => {
                        if read == 0 {
                            // Not recorded yet; retry. Unreachable in honest
                            // executions (the winning bit was recorded
                            // before its binary instance could decide).
                            return Ok(Step::Poised {
                                state: state.clone(),
                                location: self.designated_loc(round, agreed, 0),
                                instruction: Instruction::Read,
                            });
                        }
                        self.conclude_round(pid, (read - 1) as usize, round)
                    }
                    DesignatedKind::Bits { .. } => {
                        if read != 0 {
                            return self.conclude_round(pid, probe, round);
                        }
                        let next = (probe + 1) % self.n;
                        Ok(Step::Poised {
                            state: tagged(
                                PH_ADOPT,
                                vec![
                                    Value::int(value as i64),
                                    Value::int(round as i64),
                                    Value::int(bit as i64),
                                    Value::int(next as i64),
                                    Value::int(agreed as i64),
                                ],
                            ),
                            location: self.designated_loc(round, agreed, next),
                            instruction: Instruction::Read,
                        })
                    }
                }
            }
            (other, _) => Err(ProtocolError::BadState(format!("phase {other} mismatch"))),
        }
    }
}
