//! Anonymous n-consensus on n−1 {read, swap} locations.
//!
//! Values race to complete laps. Each location stores an n-component lap
//! vector tagged with (process id, sequence number); the tags make values
//! unique so the double-collect scan is linearizable, and are otherwise
//! ignored. After a scan a process folds the scanned vectors and its last
//! swap result into its local lap view, then:
//!
//! * if every location holds exactly its lap vector and the leading value
//!   is two laps ahead of every other, it decides;
//! * if every location holds its lap vector but no value leads by two, the
//!   leading value (ties toward smaller values) starts its next lap;
//! * either way it swaps its vector into the first location that differs.
//!
//! The transition uses the process id only inside the swap tag, so the
//! protocol is anonymous: identical inputs and response histories produce
//! identical instructions modulo the tag.

use super::codec::{counts_from, counts_value, field, field_u64, response_value, tagged, untag};
use super::dc::{DcStep, DoubleCollect};
use super::{input_index, LocationBound, Protocol, ProtocolError, Step};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, Response};
use crate::value::{Int, Value};

pub struct SwapConsensus {
    n: usize,
    scan_cap: Option<u64>,
}

const PH_SCAN: i64 = 0;
const PH_SWAP: i64 = 1;

// Fields: [laps, s, seq, scans, (dc)]
const F_LAPS: usize = 0;
const F_S: usize = 1;
const F_SEQ: usize = 2;
const F_SCANS: usize = 3;
const F_DC: usize = 4;

struct Locals {
    laps: Vec<u64>,
    s: Vec<u64>,
    seq: u64,
    scans: u64,
}

impl Locals {
    fn pack(&self, phase: i64, dc: Option<Value>) -> Value {
        let mut fields = vec![
            counts_value(&self.laps),
            counts_value(&self.s),
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
            laps: counts_from(fields, F_LAPS)?,
            s: counts_from(fields, F_S)?,
            seq: field_u64(fields, F_SEQ)?,
            scans: field_u64(fields, F_SCANS)?,
        })
    }
}

/// Stored location values are (pid, seq, lap vector); pid −1 marks the
/// initial value.
fn location_value(pid: i64, seq: u64, laps: &[u64]) -> Value {
    Value::rec(vec![Value::int(pid), Value::Int(Int::from(seq)), counts_value(laps)])
}

fn location_laps(value: &Value) -> Result<Vec<u64>, ProtocolError> {
    let fields = value
        .as_slice()
        .filter(|f| f.len() == 3)
        .ok_or_else(|| ProtocolError::BadState(format!("bad location value {value}")))?;
    fields[2]
        .as_slice()
        .ok_or_else(|| ProtocolError::BadState(format!("bad lap vector in {value}")))?
        .iter()
        .map(|v| {
            v.to_u64()
                .ok_or_else(|| ProtocolError::BadState(format!("bad lap count in {value}")))
        })
        .collect()
}

impl SwapConsensus {
    pub fn new(n: usize, scan_cap: Option<u64>) -> SwapConsensus {
        SwapConsensus { n, scan_cap }
    }

    fn locations(&self) -> u64 {
        self.n as u64 - 1
    }

    fn begin_scan(&self, mut locals: Locals) -> Step {
        locals.scans += 1;
        Step::Poised {
            state: locals.pack(PH_SCAN, Some(DoubleCollect::start().encode())),
            location: 0,
            instruction: Instruction::Read,
        }
    }

    fn after_scan(
        &self,
        pid: usize,
        mut locals: Locals,
        snapshot: &[Value],
    ) -> Result<Step, ProtocolError> {
        let scanned: Vec<Vec<u64>> =
            snapshot.iter().map(location_laps).collect::<Result<_, _>>()?;
        for v in 0..self.n {
            let mut best = locals.laps[v].max(locals.s[v]);
            for vec in &scanned {
                best = best.max(vec[v]);
            }
            locals.laps[v] = best;
        }
        let leader = (0..self.n).max_by_key(|&v| (locals.laps[v], std::cmp::Reverse(v))).unwrap();
        if scanned.iter().all(|vec| *vec == locals.laps) {
            let two_ahead =
                (0..self.n).all(|v| v == leader || locals.laps[leader] >= locals.laps[v] + 2);
            if two_ahead {
                return Ok(Step::Decide(Value::int(leader as i64)));
            }
            // The leader has completed its lap; move it to the next one.
            locals.laps[leader] += 1;
        }
        let target = (0..snapshot.len())
            .find(|&j| scanned[j] != locals.laps)
            .unwrap_or(0) as u64;
        locals.seq += 1;
        let value = location_value(pid as i64, locals.seq, &locals.laps);
        Ok(Step::Poised {
            state: locals.pack(PH_SWAP, None),
            location: target,
            instruction: Instruction::Swap(value),
        })
    }
}

impl Protocol for SwapConsensus {
    fn name(&self) -> String {
        "swap".into()
    }

    fn num_processes(&self) -> usize {
        self.n
    }

    fn value_domain(&self) -> usize {
        self.n
    }

    fn initial_memory(&self) -> Memory {
        Memory::new(
            InstructionSet::new(&[InstructionTag::Read, InstructionTag::Swap]),
            location_value(-1, 0, &vec![0; self.n]),
        )
    }

    fn location_bound(&self) -> LocationBound {
        LocationBound::Finite(self.locations())
    }

    /// Solo runs decide within 3n−2 scans; each solo scan is two collects of
    /// n−1 reads with one swap in between. The budget adds slack on top.
    fn solo_budget(&self) -> u64 {
        let n = self.n as u64;
        (3 * n - 2) * 2 * (n - 1) + 3 * n
    }

    fn init_state(&self, _pid: usize, input: &Value) -> Result<Value, ProtocolError> {
        let x = input_index(input, self.n)?;
        let mut laps = vec![0; self.n];
        laps[x] = 1;
        Ok(Locals { laps, s: vec![0; self.n], seq: 0, scans: 0 }.pack(PH_SWAP, None))
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
            // First activation or a completed swap: start the next scan.
            (PH_SWAP, None) => Ok(self.begin_scan(locals)),
            (PH_SWAP, Some(r)) => {
                let old = response_value(Some(r))?;
                let mut locals = locals;
                locals.s = location_laps(old)?;
                Ok(self.begin_scan(locals))
            }
            (PH_SCAN, Some(r)) => {
                let dc = DoubleCollect::decode(field(fields, F_DC)?)?;
                let width = self.locations() as usize;
                match dc.feed(response_value(Some(r))?.clone(), width, self.scan_cap)? {
                    DcStep::Read { index, dc } => Ok(Step::Poised {
                        state: locals.pack(PH_SCAN, Some(dc.encode())),
                        location: index as u64,
                        instruction: Instruction::Read,
                    }),
                    DcStep::Done { snapshot } => self.after_scan(pid, locals, &snapshot),
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

/// Test access to a process's lap view (for monotonicity checks).
#[cfg(test)]
pub(crate) fn decode_laps(state: &Value) -> Option<Vec<u64>> {
    let (_, fields) = untag(state).ok()?;
    counts_from(fields, F_LAPS).ok()
}
