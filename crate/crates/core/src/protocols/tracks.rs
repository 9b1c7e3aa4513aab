//! n-consensus by racing on n unbounded tracks of single-bit locations.
//!
//! Track v records value v's progress in unary: supporters set the next
//! zero bit. A process scans all tracks with the double-collect algorithm
//! (counts only grow, so two equal collects form a snapshot), reading each
//! track from the position where it last read 0 until it reads another 0.
//! It decides once its preferred track leads every other track by 2, and
//! otherwise adopts the best track (ties toward smaller values) and
//! advances it by one bit.
//!
//! Location layout: track t, position p lives at index p·n + t, so the
//! lazily grown index space stays dense without bounding track length.

use super::codec::{counts_from, counts_value, field, field_u64, field_usize, tagged, untag};
use super::{input_index, LocationBound, Protocol, ProtocolError, Step};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, Response};
use crate::value::{Int, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackVariant {
    Write1,
    /// test-and-set simulates write(1) with the return value ignored.
    TestAndSet,
}

pub struct TrackRace {
    n: usize,
    variant: TrackVariant,
}

const PH_COLLECT: i64 = 0;
const PH_ADVANCE: i64 = 1;

// Fields: [pref, known, scans, (track, pos, cur, prev)]
const F_PREF: usize = 0;
const F_KNOWN: usize = 1;
const F_SCANS: usize = 2;
const F_TRACK: usize = 3;
const F_POS: usize = 4;
const F_CUR: usize = 5;
const F_PREV: usize = 6;

struct Locals {
    pref: usize,
    /// Per track, the position from which this process last read 0: the
    /// next collect resumes there.
    known: Vec<u64>,
    scans: u64,
}

impl Locals {
    fn pack_advance(&self) -> Value {
        tagged(
            PH_ADVANCE,
            vec![
                Value::int(self.pref as i64),
                counts_value(&self.known),
                Value::Int(Int::from(self.scans)),
            ],
        )
    }

    fn pack_collect(&self, track: usize, pos: u64, cur: &[u64], prev: Option<&[u64]>) -> Value {
        tagged(
            PH_COLLECT,
            vec![
                Value::int(self.pref as i64),
                counts_value(&self.known),
                Value::Int(Int::from(self.scans)),
                Value::int(track as i64),
                Value::Int(Int::from(pos)),
                counts_value(cur),
                match prev {
                    None => Value::Bottom,
                    Some(counts) => counts_value(counts),
                },
            ],
        )
    }

    fn unpack(fields: &[Value]) -> Result<Locals, ProtocolError> {
        Ok(Locals {
            pref: field_usize(fields, F_PREF)?,
            known: counts_from(fields, F_KNOWN)?,
            scans: field_u64(fields, F_SCANS)?,
        })
    }
}

impl TrackRace {
    pub fn new(n: usize, variant: TrackVariant) -> TrackRace {
        TrackRace { n, variant }
    }

    fn index(&self, track: usize, pos: u64) -> u64 {
        pos * self.n as u64 + track as u64
    }

    fn write_instruction(&self) -> Instruction {
        match self.variant {
            TrackVariant::Write1 => Instruction::Write1,
            TrackVariant::TestAndSet => Instruction::TestAndSet,
        }
    }

    /// Begins a collect pass: read track `track` from its resume position.
    fn read_step(&self, locals: &Locals, track: usize, cur: &[u64], prev: Option<&[u64]>) -> Step {
        let pos = locals.known[track];
        Step::Poised {
            location: self.index(track, pos),
            instruction: Instruction::Read,
            state: locals.pack_collect(track, pos, cur, prev),
        }
    }

    fn after_snapshot(&self, mut locals: Locals, counts: &[u64]) -> Step {
        let pref = locals.pref;
        let two_ahead = (0..self.n).all(|t| t == pref || counts[pref] >= counts[t] + 2);
        if two_ahead {
            return Step::Decide(Value::int(pref as i64));
        }
        // Switch to a strictly better track (ties keep the current one to
        // preserve validity from fresh memory).
        let mut best = pref;
        for t in 0..self.n {
            if counts[t] > counts[best] {
                best = t;
            }
        }
        if counts[best] > counts[pref] {
            locals.pref = best;
        }
        let target = self.index(locals.pref, counts[locals.pref]);
        Step::Poised {
            location: target,
            instruction: self.write_instruction(),
            state: locals.pack_advance(),
        }
    }
}

impl Protocol for TrackRace {
    fn name(&self) -> String {
        "tas-tracks".into()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        self.n
    }

    fn initial_memory(&self) -> Memory {
        let tags: &[InstructionTag] = match self.variant {
            TrackVariant::Write1 => &[InstructionTag::Read, InstructionTag::Write1],
            TrackVariant::TestAndSet => &[InstructionTag::Read, InstructionTag::TestAndSet],
        };
        Memory::new(InstructionSet::new(tags), Value::int(0))
    }

    fn location_bound(&self) -> LocationBound {
        LocationBound::Unbounded
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, self.n)?;
        Ok(Locals { pref: x, known: vec![0; self.n], scans: 0 }.pack_advance())
    }

    fn transition(
        &self,
        _pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        let (phase, fields) = untag(state)?;
        let mut locals = Locals::unpack(fields)?;
        match (phase, resp) {
            // First activation (no write yet) or a completed advance: start
            // a fresh double collect.
            (PH_ADVANCE, _) => {
                locals.scans += 1;
                Ok(self.read_step(&locals, 0, &[], None))
            }
            (PH_COLLECT, Some(r)) => {
                let track = field_usize(fields, F_TRACK)?;
                let mut pos = field_u64(fields, F_POS)?;
                let mut cur = counts_from(fields, F_CUR)?;
                let prev = match field(fields, F_PREV)? {
                    Value::Bottom => None,
                    v => Some(
                        v.as_slice()
                            .ok_or_else(|| ProtocolError::BadState(format!("bad prev {v}")))?
                            .iter()
                            .map(|c| {
                                c.to_u64().ok_or_else(|| {
                                    ProtocolError::BadState(format!("bad prev count {c}"))
                                })
                            })
                            .collect::<Result<Vec<u64>, _>>()?,
                    ),
                };
                let bit = match r {
                    Response::Value(v) => !v
                        .as_int()
                        .map(|i| i.is_zero())
                        .ok_or_else(|| ProtocolError::UnexpectedResponse(format!("{v}")))?,
                    Response::Ack => {
                        return Err(ProtocolError::UnexpectedResponse("ack during read".into()))
                    }
                };
                if bit {
                    // Keep walking this track.
                    pos += 1;
                    return Ok(Step::Poised {
                        location: self.index(track, pos),
                        instruction: Instruction::Read,
                        state: locals.pack_collect(track, pos, &cur, prev.as_deref()),
                    });
                }
                // Read a 0: this track's count is `pos`; resume here next time.
                cur.push(pos);
                locals.known[track] = pos;
                if track + 1 < self.n {
                    return Ok(self.read_step(&locals, track + 1, &cur, prev.as_deref()));
                }
                // Collect finished; compare with the previous one.
                match prev {
                    Some(prev_counts) if prev_counts == cur => {
                        Ok(self.after_snapshot(locals, &cur))
                    }
                    _ => Ok(self.read_step(&locals, 0, &[], Some(&cur))),
                }
            }
            (other, _) => Err(ProtocolError::BadState(format!("phase {other} mismatch"))),
        }
    }

    fn scan_count(&self, state: &Value) -> Option<u64> {
        let (_, fields) = untag(state).ok()?;
        field_u64(fields, F_SCANS).ok()
    }
}
