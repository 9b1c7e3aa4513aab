//! Binary consensus over 2n single-bit locations: an n-level door sieve.
//!
//! Level i has one door per value (bit 2i+v). A process climbs the levels
//! carrying its preference v: at each level it first marks door v, then
//! reads door v̄. Reading 0 passes the level; passing all n levels in one
//! climb decides v. Reading 1 is a conflict: the process adopts v̄ and
//! restarts its climb from level 0. Doors are never cleared.
//!
//! Safety is unconditional: two clean climbs with opposite values would
//! have to interleave mark-then-read at some level in both orders at once,
//! which is impossible with sticky doors; and adopted values were marked by
//! a process that carried them, so decisions trace back to inputs. A solo
//! climb from fresh doors decides in 2n steps. What this construction gives
//! up is solo progress from heavily conflicted door states: once stale
//! marks of both values pile up at every level, climbs restart forever and
//! a run surfaces as budget exhaustion rather than a decision. The
//! instruction set declares the clearing instruction (write0 / reset) even
//! though the sieve never issues it.

use super::codec::{tagged, untag};
use super::{input_index, LocationBound, Protocol, ProtocolError, Step};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, Response};
use crate::value::Value;

pub struct DoorSieve {
    n: usize,
    /// Mark with test-and-set instead of write1.
    tas: bool,
}

const PH_MARK: i64 = 0;
const PH_CHECK: i64 = 1;

impl DoorSieve {
    pub fn new(n: usize, tas: bool) -> DoorSieve {
        DoorSieve { n, tas }
    }

    fn door(&self, level: usize, value: usize) -> u64 {
        (2 * level + value) as u64
    }

    fn mark_instruction(&self) -> Instruction {
        if self.tas {
            Instruction::TestAndSet
        } else {
            Instruction::Write1
        }
    }

    fn mark_step(&self, level: usize, pref: usize) -> Step {
        Step::Poised {
            state: tagged(PH_MARK, vec![Value::int(level as i64), Value::int(pref as i64)]),
            location: self.door(level, pref),
            instruction: self.mark_instruction(),
        }
    }
}

impl Protocol for DoorSieve {
    fn name(&self) -> String {
        "door-sieve".into()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        2
    }

    fn initial_memory(&self) -> Memory {
        let tags: &[InstructionTag] = if self.tas {
            &[InstructionTag::Read, InstructionTag::TestAndSet, InstructionTag::Reset]
        } else {
            &[InstructionTag::Read, InstructionTag::Write1, InstructionTag::Write0]
        };
        Memory::new(InstructionSet::new(tags), Value::int(0))
    }

    fn location_bound(&self) -> LocationBound {
        LocationBound::Finite(2 * self.n as u64)
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, 2)?;
        Ok(tagged(PH_MARK, vec![Value::int(0), Value::int(x as i64)]))
    }

    fn transition(
        &self,
        _pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        let (phase, fields) = untag(state)?;
        let level = fields[0]
            .to_usize()
            .ok_or_else(|| ProtocolError::BadState(format!("bad level in {state}")))?;
        let pref = fields[1]
            .to_usize()
            .filter(|p| *p < 2)
            .ok_or_else(|| ProtocolError::BadState(format!("bad preference in {state}")))?;
        match (phase, resp) {
            (PH_MARK, None) => Ok(self.mark_step(level, pref)),
            (PH_MARK, Some(_)) => {
                // Mark landed (test-and-set responses are ignored); check
                // the opposing door.
                Ok(Step::Poised {
                    state: tagged(
                        PH_CHECK,
                        vec![Value::int(level as i64), Value::int(pref as i64)],
                    ),
                    location: self.door(level, 1 - pref),
                    instruction: Instruction::Read,
                })
            }
            (PH_CHECK, Some(Response::Value(v))) => {
                let occupied = v.to_u64().map(|b| b != 0).ok_or_else(|| {
                    ProtocolError::UnexpectedResponse(format!("non-bit door value {v}"))
                })?;
                if occupied {
                    // Conflict: adopt the other value, restart the climb.
                    return Ok(self.mark_step(0, 1 - pref));
                }
                if level + 1 == self.n {
                    return Ok(Step::Decide(Value::int(pref as i64)));
                }
                Ok(self.mark_step(level + 1, pref))
            }
            (other, _) => Err(ProtocolError::BadState(format!("phase {other} mismatch"))),
        }
    }
}
