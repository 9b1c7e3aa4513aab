//! Wait-free binary consensus on a single location, two ways.
//!
//! [`FaaTas`]: processes with input 0 perform fetch-and-add(2), processes
//! with input 1 perform test-and-set(); an odd response or a 0 returned from
//! test-and-set decides 1, anything else decides 0. One memory step each.
//!
//! [`DecMul`]: the location starts at 1; input 0 decrements, input 1
//! multiplies by n, and a second step reads. A positive read decides 1 and a
//! nonpositive read decides 0. (A read of exactly 0 does occur, e.g. after a
//! lone decrement; grouping it with the negatives preserves agreement
//! because the stored value can cross from positive to nonpositive only
//! once and never comes back.)

use super::codec::{response_value, tagged, untag};
use super::{input_index, LocationBound, Protocol, ProtocolError, Step};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, Response};
use crate::value::{Int, Value};

pub struct FaaTas {
    n: usize,
}

impl FaaTas {
    pub fn new(n: usize) -> FaaTas {
        FaaTas { n }
    }
}

impl Protocol for FaaTas {
    fn name(&self) -> String {
        "faa-tas".into()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        2
    }

    fn initial_memory(&self) -> Memory {
        Memory::new(
            InstructionSet::new(&[InstructionTag::FetchAndAdd, InstructionTag::TestAndSet]),
            Value::int(0),
        )
    }

    fn location_bound(&self) -> LocationBound {
        LocationBound::Finite(1)
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, 2)?;
        Ok(tagged(x as i64, vec![]))
    }

    fn transition(
        &self,
        _pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        let (input, _) = untag(state)?;
        match resp {
            None => {
                let instruction = if input == 0 {
                    Instruction::FetchAndAdd(Int::from(2i64))
                } else {
                    Instruction::TestAndSet
                };
                Ok(Step::Poised { state: state.clone(), location: 0, instruction })
            }
            Some(resp) => {
                let old = response_value(Some(resp))?
                    .as_int()
                    .ok_or_else(|| ProtocolError::UnexpectedResponse(format!("{resp:?}")))?;
                let odd = old.bit(0);
                let tas_won = input == 1 && old.is_zero();
                Ok(Step::Decide(Value::int((odd || tas_won) as i64)))
            }
        }
    }
}

pub struct DecMul {
    n: usize,
}

impl DecMul {
    pub fn new(n: usize) -> DecMul {
        DecMul { n }
    }
}

const PHASE_START: i64 = 0;
const PHASE_WROTE: i64 = 1;

impl Protocol for DecMul {
    fn name(&self) -> String {
        "dec-mul".into()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        2
    }

    fn initial_memory(&self) -> Memory {
        Memory::new(
            InstructionSet::new(&[
                InstructionTag::Read,
                InstructionTag::Decrement,
                InstructionTag::Multiply,
            ]),
            Value::int(1),
        )
    }

    fn location_bound(&self) -> LocationBound {
        LocationBound::Finite(1)
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, 2)?;
        Ok(tagged(PHASE_START, vec![Value::int(x as i64)]))
    }

    fn transition(
        &self,
        _pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        let (phase, fields) = untag(state)?;
        match phase {
            PHASE_START => {
                let input = fields[0].to_usize().unwrap_or(0);
                let instruction = if input == 0 {
                    Instruction::Decrement
                } else {
                    Instruction::Multiply(Int::from(self.n as u64))
                };
                Ok(Step::Poised {
                    state: tagged(PHASE_WROTE, vec![]),
                    location: 0,
                    instruction: if resp.is_none() {
                        instruction
                    } else {
                        return Err(ProtocolError::UnexpectedResponse(
                            "start phase takes no response".into(),
                        ));
                    },
                })
            }
            PHASE_WROTE => match resp {
                Some(Response::Ack) => Ok(Step::Poised {
                    state: tagged(2, vec![]),
                    location: 0,
                    instruction: Instruction::Read,
                }),
                other => Err(ProtocolError::UnexpectedResponse(format!("{other:?}"))),
            },
            2 => {
                let read = response_value(resp)?
                    .as_int()
                    .ok_or_else(|| ProtocolError::UnexpectedResponse("non-integer read".into()))?;
                Ok(Step::Decide(Value::int(read.is_positive() as i64)))
            }
            other => Err(ProtocolError::BadState(format!("phase {other}"))),
        }
    }
}
