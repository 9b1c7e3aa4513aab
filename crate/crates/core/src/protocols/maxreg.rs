//! n-valued consensus from two max registers.
//!
//! Values are pairs (round, value) encoded as integers so that the integer
//! order matches the lexicographic pair order (see
//! [`crate::objects::MaxRegisterPair`]). Both registers start at the
//! encoding of (0, 0). A process first write-maxes (0, input) into the first
//! register, then loops on double-collect scans of both registers:
//!
//! * first = (r+1, x) and second = (r, x): decide x;
//! * both equal (r, x): write-max (r+1, x) into the first;
//! * otherwise: copy the scanned first-register value into the second.

use super::codec::{expect_ack, field, field_u64, field_usize, response_value, tagged, untag};
use super::dc::{DcStep, DoubleCollect};
use super::{input_index, LocationBound, Protocol, ProtocolError, Step};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, Response};
use crate::objects::MaxRegisterPair;
use crate::value::{Int, Value};

pub struct MaxRegConsensus {
    n: usize,
    pair: MaxRegisterPair,
    scan_cap: Option<u64>,
}

const PH_START: i64 = 0;
const PH_WROTE: i64 = 1;
const PH_SCAN: i64 = 2;

// Fields: [input_or_zero, scans, (dc)]
const F_INPUT: usize = 0;
const F_SCANS: usize = 1;
const F_DC: usize = 2;

impl MaxRegConsensus {
    pub fn new(n: usize, scan_cap: Option<u64>) -> MaxRegConsensus {
        MaxRegConsensus { n, pair: MaxRegisterPair::new(n as u64), scan_cap }
    }

    fn begin_scan(&self, prior_scans: u64) -> Step {
        Step::Poised {
            state: tagged(
                PH_SCAN,
                vec![
                    Value::int(0),
                    Value::Int(Int::from(prior_scans + 1)),
                    DoubleCollect::start().encode(),
                ],
            ),
            location: 0,
            instruction: Instruction::ReadMax,
        }
    }

    fn encode(&self, r: u64, x: u64) -> Result<Int, ProtocolError> {
        self.pair.encode(r, x).map_err(|e| ProtocolError::BadState(e.to_string()))
    }

    fn after_scan(&self, snapshot: &[Value], scans: u64) -> Result<Step, ProtocolError> {
        let decode = |v: &Value| -> Result<(u64, u64), ProtocolError> {
            let i = v
                .as_int()
                .ok_or_else(|| ProtocolError::BadState(format!("non-integer register {v}")))?;
            self.pair.decode(i).map_err(|e| ProtocolError::BadState(e.to_string()))
        };
        let (r1, x1) = decode(&snapshot[0])?;
        let (r2, x2) = decode(&snapshot[1])?;
        if r1 == r2 + 1 && x1 == x2 {
            return Ok(Step::Decide(Value::Int(Int::from(x1))));
        }
        let instruction = if (r1, x1) == (r2, x2) {
            // Both registers agree: bump the round in the first register.
            Instruction::WriteMax(Value::Int(self.encode(r1 + 1, x1)?))
        } else {
            // Catch the second register up to the scanned first value.
            Instruction::WriteMax(snapshot[0].clone())
        };
        let location = if (r1, x1) == (r2, x2) { 0 } else { 1 };
        Ok(Step::Poised {
            state: tagged(PH_WROTE, vec![Value::int(0), Value::Int(Int::from(scans))]),
            location,
            instruction,
        })
    }
}

impl Protocol for MaxRegConsensus {
    fn name(&self) -> String {
        "maxreg".into()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        self.n
    }

    fn initial_memory(&self) -> Memory {
        // Both registers hold the encoding of (0, 0), which is 1.
        Memory::new(
            InstructionSet::new(&[InstructionTag::ReadMax, InstructionTag::WriteMax]),
            Value::int(1),
        )
    }

    fn location_bound(&self) -> LocationBound {
        LocationBound::Finite(2)
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, self.n)?;
        Ok(tagged(PH_START, vec![Value::int(x as i64), Value::int(0)]))
    }

    fn transition(
        &self,
        _pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        let (phase, fields) = untag(state)?;
        match phase {
            PH_START => {
                if resp.is_some() {
                    return Err(ProtocolError::UnexpectedResponse("start takes none".into()));
                }
                let x = field_usize(fields, F_INPUT)? as u64;
                Ok(Step::Poised {
                    state: tagged(PH_WROTE, vec![Value::int(0), Value::int(0)]),
                    location: 0,
                    instruction: Instruction::WriteMax(Value::Int(self.encode(0, x)?)),
                })
            }
            PH_WROTE => {
                expect_ack(resp)?;
                Ok(self.begin_scan(field_u64(fields, F_SCANS)?))
            }
            PH_SCAN => {
                let dc = DoubleCollect::decode(field(fields, F_DC)?)?;
                let scans = field_u64(fields, F_SCANS)?;
                match dc.feed(response_value(resp)?.clone(), 2, self.scan_cap)? {
                    DcStep::Read { index, dc } => Ok(Step::Poised {
                        state: tagged(
                            PH_SCAN,
                            vec![Value::int(0), Value::Int(Int::from(scans)), dc.encode()],
                        ),
                        location: index as u64,
                        instruction: Instruction::ReadMax,
                    }),
                    DcStep::Done { snapshot } => self.after_scan(&snapshot, scans),
                }
            }
            other => Err(ProtocolError::BadState(format!("phase {other}"))),
        }
    }

    fn scan_count(&self, state: &Value) -> Option<u64> {
        let (_, fields) = untag(state).ok()?;
        field_u64(fields, F_SCANS).ok()
    }
}
