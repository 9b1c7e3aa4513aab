//! Deliberately broken protocol used as a negative control: each process
//! reads once and then decides its own input, so any mixed-input execution
//! violates agreement within two steps.

use super::codec::{tagged, untag};
use super::{input_index, LocationBound, Protocol, ProtocolError, Step};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, Response};
use crate::value::Value;

pub struct BrokenSample {
    n: usize,
}

impl BrokenSample {
    pub fn new(n: usize) -> BrokenSample {
        BrokenSample { n }
    }
}

impl Protocol for BrokenSample {
    fn name(&self) -> String {
        "broken-sample".into()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        self.n
    }

    fn initial_memory(&self) -> Memory {
        Memory::new(
            InstructionSet::new(&[InstructionTag::Read, InstructionTag::Write]),
            Value::int(0),
        )
    }

    fn location_bound(&self) -> LocationBound {
        LocationBound::Finite(1)
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, self.n)?;
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
            None => Ok(Step::Poised {
                state: state.clone(),
                location: 0,
                instruction: Instruction::Read,
            }),
            Some(_) => Ok(Step::Decide(Value::int(input))),
        }
    }
}
