//! Racing-counters consensus over an m-component counter.
//!
//! Every process alternates between promoting a value (incrementing that
//! value's counter component) and scanning all components. A process first
//! promotes its input; after a scan it decides v once component v leads
//! every other component by at least n, and otherwise promotes a component
//! with the largest count (ties toward the smallest value index).
//!
//! The counter realization decides what an increment and a scan cost:
//!
//! * `Multiply` — one {read, multiply} location; increments multiply by the
//!   component's prime, scans are a single read plus factorization.
//! * `AddBounded` — one {read, add} location read as a base-3n numeral, with
//!   the bounded modification: if some other component has count ≥ n, the
//!   process decrements that component instead of incrementing its own.
//! * `SetBit` — one {read, set-bit} location; each increment sets a fresh
//!   bit determined by the process's local tally, scans are a single read.
//! * `IncrementPair` — two {read, write, increment} locations (m = 2);
//!   scans double-collect both.
//! * `SwrBuffers` — per-process tally vectors in single-writer registers
//!   simulated over ⌈n/ℓ⌉ ℓ-buffers; increments append through the history
//!   object, scans double-collect the raw buffer windows.

use super::codec::{
    counts_from, counts_value, expect_ack, field, field_u64, field_usize, response_value,
    tagged, untag,
};
use super::dc::{DcStep, DoubleCollect};
use super::{input_index, LocationBound, Protocol, ProtocolError, Step};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, Response};
use crate::objects::{
    base_digits, bit_block_counts, nth_prime, prime_exponents, reconstruct_history, tag_entry,
};
use crate::value::{Int, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RacingRealization {
    Multiply,
    AddBounded,
    SetBit,
    IncrementPair,
    SwrBuffers { ell: usize },
}

pub struct RacingConsensus {
    realization: RacingRealization,
    n: usize,
    m: usize,
    scan_cap: Option<u64>,
}

// State record: [phase, pref, tallies, seq, scans, (dc)]
const F_PREF: usize = 0;
const F_TALLIES: usize = 1;
const F_SEQ: usize = 2;
const F_SCANS: usize = 3;
const F_DC: usize = 4;

const PH_AWAIT_INC: i64 = 0;
const PH_SCAN_SINGLE: i64 = 1;
const PH_SCAN_DC: i64 = 2;
const PH_INC_READ: i64 = 3;

struct Locals {
    pref: usize,
    tallies: Vec<u64>,
    seq: u64,
    scans: u64,
}

impl Locals {
    fn pack(&self, phase: i64, dc: Option<Value>) -> Value {
        let mut fields = vec![
            Value::int(self.pref as i64),
            counts_value(&self.tallies),
            Value::Int(Int::from(self.seq)),
            Value::Int(Int::from(self.scans)),
        ];
        if let Some(dc) = dc {
            fields.push(dc);
        }
        tagged(phase, fields)
    }

    fn unpack(fields: &[Value]) -> Result<Locals, ProtocolError> {
        Ok(Locals {
            pref: field_usize(fields, F_PREF)?,
            tallies: counts_from(fields, F_TALLIES)?,
            seq: field_u64(fields, F_SEQ)?,
            scans: field_u64(fields, F_SCANS)?,
        })
    }
}

impl RacingConsensus {
    pub fn new(
        realization: RacingRealization,
        n: usize,
        m: usize,
        scan_cap: Option<u64>,
    ) -> RacingConsensus {
        assert!(
            !matches!(realization, RacingRealization::IncrementPair) || m == 2,
            "the increment-pair counter has exactly two components"
        );
        RacingConsensus { realization, n, m, scan_cap }
    }

    fn num_buffers(&self) -> usize {
        match &self.realization {
            RacingRealization::SwrBuffers { ell } => self.n.div_ceil(*ell),
            _ => 0,
        }
    }

    fn scan_locations(&self) -> Vec<u64> {
        match &self.realization {
            RacingRealization::IncrementPair => vec![0, 1],
            RacingRealization::SwrBuffers { .. } => (0..self.num_buffers() as u64).collect(),
            _ => vec![0],
        }
    }

    fn base(&self) -> u64 {
        3 * self.n as u64
    }

    fn power(&self, base: u64, exp: usize) -> Int {
        let mut acc = Int::ONE;
        let b = Int::from(base);
        for _ in 0..exp {
            acc = acc.checked_mul_i(&b);
        }
        acc
    }

    /// Emits the first step of an increment of component `v` (or, for the
    /// bounded realization, the decrement chosen instead).
    fn begin_promote(&self, pid: usize, locals: Locals, counts: Option<&[u64]>) -> Step {
        let v = locals.pref;
        match &self.realization {
            RacingRealization::Multiply => Step::Poised {
                state: locals.pack(PH_AWAIT_INC, None),
                location: 0,
                instruction: Instruction::Multiply(Int::from(nth_prime(v))),
            },
            RacingRealization::AddBounded => {
                // With a previous scan in hand, decrement the largest other
                // component instead once it reaches n.
                if let Some(counts) = counts {
                    let mut u_best = None;
                    for (u, &c) in counts.iter().enumerate() {
                        if u == v {
                            continue;
                        }
                        match u_best {
                            Some((_, best)) if best >= c => {}
                            _ => u_best = Some((u, c)),
                        }
                    }
                    if let Some((u, c)) = u_best {
                        if c >= self.n as u64 {
                            return Step::Poised {
                                state: locals.pack(PH_AWAIT_INC, None),
                                location: 0,
                                instruction: Instruction::Add(
                                    Int::ZERO.checked_sub_i(&self.power(self.base(), u)),
                                ),
                            };
                        }
                    }
                }
                Step::Poised {
                    state: locals.pack(PH_AWAIT_INC, None),
                    location: 0,
                    instruction: Instruction::Add(self.power(self.base(), v)),
                }
            }
            RacingRealization::SetBit => {
                let mut locals = locals;
                let block = (self.n * self.n) as u64;
                let b = locals.tallies[v];
                locals.tallies[v] += 1;
                let bit = b * block + (v * self.n + pid) as u64;
                Step::Poised {
                    state: locals.pack(PH_AWAIT_INC, None),
                    location: 0,
                    instruction: Instruction::SetBit(bit),
                }
            }
            RacingRealization::IncrementPair => Step::Poised {
                state: locals.pack(PH_AWAIT_INC, None),
                location: v as u64,
                instruction: Instruction::Increment,
            },
            RacingRealization::SwrBuffers { ell } => Step::Poised {
                location: (pid / ell) as u64,
                instruction: Instruction::BufferRead,
                state: locals.pack(PH_INC_READ, None),
            },
        }
    }

    fn begin_scan(&self, mut locals: Locals) -> Step {
        locals.scans += 1;
        match &self.realization {
            RacingRealization::Multiply
            | RacingRealization::AddBounded
            | RacingRealization::SetBit => Step::Poised {
                state: locals.pack(PH_SCAN_SINGLE, None),
                location: 0,
                instruction: Instruction::Read,
            },
            RacingRealization::IncrementPair => Step::Poised {
                state: locals.pack(PH_SCAN_DC, Some(DoubleCollect::start().encode())),
                location: 0,
                instruction: Instruction::Read,
            },
            RacingRealization::SwrBuffers { .. } => Step::Poised {
                state: locals.pack(PH_SCAN_DC, Some(DoubleCollect::start().encode())),
                location: 0,
                instruction: Instruction::BufferRead,
            },
        }
    }

    fn read_instruction(&self) -> Instruction {
        match &self.realization {
            RacingRealization::SwrBuffers { .. } => Instruction::BufferRead,
            _ => Instruction::Read,
        }
    }

    fn decode_counts(&self, snapshot: &[Value]) -> Result<Vec<u64>, ProtocolError> {
        let corrupt =
            |what: &Value| ProtocolError::BadState(format!("undecodable counter state {what}"));
        match &self.realization {
            RacingRealization::Multiply => {
                let v = snapshot[0].as_int().ok_or_else(|| corrupt(&snapshot[0]))?;
                prime_exponents(v, self.m).map_err(|e| ProtocolError::BadState(e.to_string()))
            }
            RacingRealization::AddBounded => {
                let v = snapshot[0].as_int().ok_or_else(|| corrupt(&snapshot[0]))?;
                base_digits(v, self.base(), self.m)
                    .map_err(|e| ProtocolError::BadState(e.to_string()))
            }
            RacingRealization::SetBit => {
                let v = snapshot[0].as_int().ok_or_else(|| corrupt(&snapshot[0]))?;
                bit_block_counts(v, self.n, self.m)
                    .map_err(|e| ProtocolError::BadState(e.to_string()))
            }
            RacingRealization::IncrementPair => snapshot
                .iter()
                .map(|v| v.to_u64().ok_or_else(|| corrupt(v)))
                .collect(),
            RacingRealization::SwrBuffers { ell } => {
                let mut counts = vec![0u64; self.m];
                for (b, window) in snapshot.iter().enumerate() {
                    let slots = window.as_slice().ok_or_else(|| corrupt(window))?;
                    let entries = reconstruct_history(slots)
                        .map_err(|e| ProtocolError::BadState(e.to_string()))?;
                    let owners = (b * ell..((b + 1) * ell).min(self.n)).len();
                    let mut latest: Vec<Option<&Value>> = vec![None; owners];
                    for entry in &entries {
                        let payload = entry
                            .as_slice()
                            .filter(|f| f.len() == 3)
                            .map(|f| &f[2])
                            .ok_or_else(|| corrupt(entry))?;
                        let fields =
                            payload.as_slice().filter(|f| f.len() == 2).ok_or_else(|| corrupt(payload))?;
                        let slot = fields[0].to_usize().ok_or_else(|| corrupt(payload))?;
                        if slot < owners {
                            latest[slot] = Some(&fields[1]);
                        }
                    }
                    for vec in latest.into_iter().flatten() {
                        let items = vec.as_slice().ok_or_else(|| corrupt(vec))?;
                        for (v, c) in items.iter().enumerate().take(self.m) {
                            counts[v] += c.to_u64().ok_or_else(|| corrupt(vec))?;
                        }
                    }
                }
                Ok(counts)
            }
        }
    }

    /// The post-scan rule: decide on an n-lead, otherwise promote the
    /// largest component (ties toward the smallest index).
    fn after_scan(&self, pid: usize, mut locals: Locals, counts: Vec<u64>) -> Step {
        for v in 0..self.m {
            let lead = (0..self.m)
                .filter(|&u| u != v)
                .all(|u| counts[v] >= counts[u] + self.n as u64);
            if lead {
                return Step::Decide(Value::int(v as i64));
            }
        }
        let mut best = 0;
        for v in 1..self.m {
            if counts[v] > counts[best] {
                best = v;
            }
        }
        locals.pref = best;
        self.begin_promote(pid, locals, Some(&counts))
    }
}

impl Protocol for RacingConsensus {
    fn name(&self) -> String {
        match &self.realization {
            RacingRealization::Multiply => "racing-multiply".into(),
            RacingRealization::AddBounded => "racing-add-bounded".into(),
            RacingRealization::SetBit => "racing-setbit".into(),
            RacingRealization::IncrementPair => "racing-increment-pair".into(),
            RacingRealization::SwrBuffers { .. } => "buffer".into(),
        }
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        self.m
    }

    fn initial_memory(&self) -> Memory {
        match &self.realization {
            RacingRealization::Multiply => Memory::new(
                InstructionSet::new(&[InstructionTag::Read, InstructionTag::Multiply]),
                Value::int(1),
            ),
            RacingRealization::AddBounded => Memory::new(
                InstructionSet::new(&[InstructionTag::Read, InstructionTag::Add]),
                Value::int(0),
            ),
            RacingRealization::SetBit => Memory::new(
                InstructionSet::new(&[InstructionTag::Read, InstructionTag::SetBit]),
                Value::int(0),
            ),
            RacingRealization::IncrementPair => Memory::new(
                InstructionSet::new(&[
                    InstructionTag::Read,
                    InstructionTag::Write,
                    InstructionTag::Increment,
                ]),
                Value::int(0),
            ),
            RacingRealization::SwrBuffers { ell } => {
                Memory::new(InstructionSet::buffers(*ell), Value::Bottom)
            }
        }
    }

    fn location_bound(&self) -> LocationBound {
        match &self.realization {
            RacingRealization::IncrementPair => LocationBound::Finite(2),
            RacingRealization::SwrBuffers { .. } => {
                LocationBound::Finite(self.num_buffers() as u64)
            }
            _ => LocationBound::Finite(1),
        }
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, self.m)?;
        let tallies = match &self.realization {
            RacingRealization::SetBit | RacingRealization::SwrBuffers { .. } => vec![0; self.m],
            _ => Vec::new(),
        };
        Ok(Locals { pref: x, tallies, seq: 0, scans: 0 }.pack(PH_AWAIT_INC, None))
    }

    fn transition(
        &self,
        pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        let (phase, fields) = untag(state)?;
        let locals = Locals::unpack(fields)?;
        match (phase, resp) {
            // First activation: promote the input value.
            (PH_AWAIT_INC, None) => Ok(self.begin_promote(pid, locals, None)),
            // Increment (or decrement) landed: scan.
            (PH_AWAIT_INC, Some(r)) => {
                expect_ack(Some(r))?;
                Ok(self.begin_scan(locals))
            }
            // Single-read scan completed.
            (PH_SCAN_SINGLE, Some(r)) => {
                let value = response_value(Some(r))?.clone();
                let counts = self.decode_counts(&[value])?;
                Ok(self.after_scan(pid, locals, counts))
            }
            // Double-collect scan in progress.
            (PH_SCAN_DC, Some(r)) => {
                let dc = DoubleCollect::decode(field(fields, F_DC)?)?;
                let locations = self.scan_locations();
                match dc.feed(response_value(Some(r))?.clone(), locations.len(), self.scan_cap)? {
                    DcStep::Read { index, dc } => Ok(Step::Poised {
                        state: locals.pack(PH_SCAN_DC, Some(dc.encode())),
                        location: locations[index],
                        instruction: self.read_instruction(),
                    }),
                    DcStep::Done { snapshot } => {
                        let counts = self.decode_counts(&snapshot)?;
                        Ok(self.after_scan(pid, locals, counts))
                    }
                }
            }
            // Buffered-register increment: own window read, now append.
            (PH_INC_READ, Some(r)) => {
                let RacingRealization::SwrBuffers { ell } = &self.realization else {
                    return Err(ProtocolError::BadState("stray buffered-increment phase".into()));
                };
                let window = response_value(Some(r))?;
                let slots = window
                    .as_slice()
                    .ok_or_else(|| ProtocolError::BadState(format!("bad window {window}")))?;
                let h = reconstruct_history(slots)
                    .map_err(|e| ProtocolError::BadState(e.to_string()))?;
                let mut locals = locals;
                locals.tallies[locals.pref] += 1;
                locals.seq += 1;
                let payload = Value::rec(vec![
                    Value::int((pid % ell) as i64),
                    counts_value(&locals.tallies),
                ]);
                let entry = tag_entry(pid, locals.seq, payload);
                let write = Value::rec(vec![Value::Record(h), entry]);
                Ok(Step::Poised {
                    location: (pid / ell) as u64,
                    instruction: Instruction::BufferWrite(write),
                    state: locals.pack(PH_AWAIT_INC, None),
                })
            }
            (other, _) => Err(ProtocolError::BadState(format!("phase {other} mismatch"))),
        }
    }

    fn scan_count(&self, state: &Value) -> Option<u64> {
        let (_, fields) = untag(state).ok()?;
        field_u64(fields, F_SCANS).ok()
    }
}

/// The buffered-consensus front: racing counters over single-writer
/// registers packed ⌈n/ℓ⌉-to-a-buffer.
pub struct BufferConsensus {
    inner: RacingConsensus,
}

impl BufferConsensus {
    pub fn new(n: usize, ell: usize, scan_cap: Option<u64>) -> BufferConsensus {
        BufferConsensus {
            inner: RacingConsensus::new(RacingRealization::SwrBuffers { ell }, n, n, scan_cap),
        }
    }
}

impl Protocol for BufferConsensus {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn num_processes(&self) -> usize {
        self.inner.num_processes()
    }

    fn value_domain(&self) -> usize {
        self.inner.value_domain()
    }

    fn initial_memory(&self) -> Memory {
        self.inner.initial_memory()
    }

    fn location_bound(&self) -> LocationBound {
        self.inner.location_bound()
    }

    fn init_state(&self, pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        self.inner.init_state(pid, input)
    }

    fn transition(
        &self,
        pid: usize,
        state: &Value,
        resp: Option<&Response>,
    ) -> Result<Step, ProtocolError> {
        self.inner.transition(pid, state, resp)
    }

    fn scan_count(&self, state: &Value) -> Option<u64> {
        self.inner.scan_count(state)
    }
}
