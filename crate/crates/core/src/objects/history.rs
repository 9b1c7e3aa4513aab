//! History objects and single-writer register arrays over a single ℓ-buffer.
//!
//! A history object supports `append(x)` and `get_history()`, which returns
//! every appended value in linearization order. Each buffer write stores
//! `(h, x)`: the history the appender reconstructed just before writing,
//! plus its own tagged entry. The reader reconstructs the full history from
//! the ℓ-slot window alone.

use std::collections::BTreeMap;

use crate::memory::{Instruction, Memory, MemoryError, Response};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("appender limit reached: {limit} appenders already registered")]
    TooManyAppenders { limit: usize },
    #[error("register {index} is owned by process {owner}, not {caller}")]
    NotOwner { index: usize, owner: usize, caller: usize },
    #[error("no register with index {0}")]
    NoSuchRegister(usize),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("buffer holds a non-history value: {0}")]
    Corrupt(String),
}

/// Tags a payload with (appender id, sequence number) so no value is ever
/// appended twice.
pub fn tag_entry(pid: usize, seq: u64, payload: Value) -> Value {
    Value::rec(vec![Value::int(pid as i64), Value::Int(seq.into()), payload])
}

fn entry_payload(entry: &Value) -> Result<&Value, HistoryError> {
    entry
        .as_slice()
        .filter(|items| items.len() == 3)
        .map(|items| &items[2])
        .ok_or_else(|| HistoryError::Corrupt(entry.to_string()))
}

fn split_write(value: &Value) -> Result<(&[Value], &Value), HistoryError> {
    // Each written value is (h, x): the embedded history and the new entry.
    let items = value
        .as_slice()
        .filter(|items| items.len() == 2)
        .ok_or_else(|| HistoryError::Corrupt(value.to_string()))?;
    let h = items[0]
        .as_slice()
        .ok_or_else(|| HistoryError::Corrupt(value.to_string()))?;
    Ok((h, &items[1]))
}

/// Reconstructs the linearized sequence of tagged entries from one ℓ-slot
/// buffer window (oldest first, ⊥-padded on the left).
///
/// With k < ℓ writes the window itself lists every entry. Otherwise the
/// longest embedded history h (ties broken toward the most recent slot) is
/// combined with the window: if h already contains the window's oldest entry
/// x₁, the result is h-up-to-x₁ followed by the window; if not, the ℓ
/// writers were concurrent and h followed by the window is complete.
pub fn reconstruct_history(slots: &[Value]) -> Result<Vec<Value>, HistoryError> {
    let first_real = slots.iter().position(|s| !s.is_bottom());
    let Some(first_real) = first_real else {
        return Ok(Vec::new());
    };
    let window: Vec<(&[Value], &Value)> =
        slots[first_real..].iter().map(split_write).collect::<Result<_, _>>()?;

    if first_real > 0 {
        // Fewer writes than slots: the window is the whole history.
        return Ok(window.iter().map(|(_, x)| (*x).clone()).collect());
    }

    // Longest embedded history, ties toward the rightmost (most recent) slot.
    let mut best: &[Value] = &[];
    for (h, _) in &window {
        if h.len() >= best.len() {
            best = h;
        }
    }
    let x1 = window[0].1;
    let mut result: Vec<Value> = match best.iter().position(|e| e == x1) {
        Some(cut) => best[..cut].to_vec(),
        None => best.to_vec(),
    };
    result.extend(window.iter().map(|(_, x)| (*x).clone()));
    Ok(result)
}

/// Sequential driver for a history object backed by one ℓ-buffer location.
/// At most ℓ distinct appender identities may ever call `append`.
#[derive(Clone, Debug)]
pub struct HistoryObject {
    location: u64,
    capacity: usize,
    seqs: BTreeMap<usize, u64>,
}

impl HistoryObject {
    pub fn new(location: u64, capacity: usize) -> HistoryObject {
        HistoryObject { location, capacity, seqs: BTreeMap::new() }
    }

    /// One append: a buffer read (reconstructing h) followed by a buffer
    /// write of (h, tagged payload). Linearizes at the write.
    pub fn append(
        &mut self,
        mem: &mut Memory,
        pid: usize,
        payload: Value,
    ) -> Result<(), HistoryError> {
        if !self.seqs.contains_key(&pid) && self.seqs.len() >= self.capacity {
            return Err(HistoryError::TooManyAppenders { limit: self.capacity });
        }
        let seq = self.seqs.entry(pid).or_insert(0);
        *seq += 1;
        let entry = tag_entry(pid, *seq, payload);
        let h = self.read_entries(mem)?;
        let write = Value::rec(vec![Value::Record(h), entry]);
        mem.apply(self.location, &Instruction::BufferWrite(write))?;
        Ok(())
    }

    fn read_entries(&self, mem: &mut Memory) -> Result<Vec<Value>, HistoryError> {
        let resp = mem.apply(self.location, &Instruction::BufferRead)?;
        let slots = match &resp {
            Response::Value(Value::Record(slots)) => slots.as_slice(),
            other => return Err(HistoryError::Corrupt(format!("{other:?}"))),
        };
        reconstruct_history(slots)
    }

    /// Payloads of every append linearized before this read, oldest first.
    pub fn get_history(&self, mem: &mut Memory) -> Result<Vec<Value>, HistoryError> {
        let entries = self.read_entries(mem)?;
        entries.iter().map(|e| entry_payload(e).cloned()).collect()
    }
}

/// ℓ single-writer registers simulated by one history object: writing
/// register i appends (i, x); reading finds the last (i, ·) pair.
#[derive(Clone, Debug)]
pub struct SwRegisterArray {
    history: HistoryObject,
    owners: Vec<usize>,
    initial: Value,
}

impl SwRegisterArray {
    /// `owners[i]` is the only process allowed to write register i.
    pub fn new(location: u64, owners: Vec<usize>, initial: Value) -> SwRegisterArray {
        let capacity = owners.len();
        SwRegisterArray { history: HistoryObject::new(location, capacity), owners, initial }
    }

    pub fn write(
        &mut self,
        mem: &mut Memory,
        caller: usize,
        index: usize,
        value: Value,
    ) -> Result<(), HistoryError> {
        let owner = *self.owners.get(index).ok_or(HistoryError::NoSuchRegister(index))?;
        if owner != caller {
            return Err(HistoryError::NotOwner { index, owner, caller });
        }
        let payload = Value::rec(vec![Value::int(index as i64), value]);
        self.history.append(mem, caller, payload)
    }

    pub fn read(&self, mem: &mut Memory, index: usize) -> Result<Value, HistoryError> {
        if index >= self.owners.len() {
            return Err(HistoryError::NoSuchRegister(index));
        }
        let history = self.history.get_history(mem)?;
        for payload in history.iter().rev() {
            let items = payload
                .as_slice()
                .filter(|items| items.len() == 2)
                .ok_or_else(|| HistoryError::Corrupt(payload.to_string()))?;
            if items[0] == Value::int(index as i64) {
                return Ok(items[1].clone());
            }
        }
        Ok(self.initial.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::InstructionSet;

    fn buffer_mem(ell: usize) -> Memory {
        Memory::new(InstructionSet::buffers(ell), Value::Bottom)
    }

    #[test]
    fn fresh_history_is_empty() {
        let mut mem = buffer_mem(2);
        let h = HistoryObject::new(0, 2);
        assert_eq!(h.get_history(&mut mem).unwrap(), Vec::<Value>::new());
    }

    #[test]
    fn sequential_appends_in_order() {
        let mut mem = buffer_mem(2);
        let mut h = HistoryObject::new(0, 2);
        for (pid, payload) in [(0, "a"), (1, "b"), (0, "c")] {
            let v = Value::int(payload.as_bytes()[0] as i64);
            h.append(&mut mem, pid, v).unwrap();
        }
        let got = h.get_history(&mut mem).unwrap();
        assert_eq!(
            got,
            vec![Value::int(97), Value::int(98), Value::int(99)],
            "three sequential appends come back in order even with ℓ=2"
        );
    }

    #[test]
    fn single_slot_buffer_embeds_prior_history() {
        let mut mem = buffer_mem(1);
        let mut h = HistoryObject::new(0, 1);
        h.append(&mut mem, 0, Value::int(5)).unwrap();
        // The buffer now holds ((), entry): an empty embedded history plus
        // the tagged entry.
        let stored = mem.peek_buffer_history(0).last().unwrap().clone();
        let items = stored.as_slice().unwrap();
        assert_eq!(items[0], Value::rec(vec![]));
        assert_eq!(items[1], tag_entry(0, 1, Value::int(5)));
    }

    #[test]
    fn appender_limit_enforced() {
        let mut mem = buffer_mem(2);
        let mut h = HistoryObject::new(0, 2);
        h.append(&mut mem, 0, Value::int(1)).unwrap();
        h.append(&mut mem, 1, Value::int(2)).unwrap();
        h.append(&mut mem, 0, Value::int(3)).unwrap(); // repeat identity is fine
        let err = h.append(&mut mem, 2, Value::int(4)).unwrap_err();
        assert_eq!(err, HistoryError::TooManyAppenders { limit: 2 });
    }

    #[test]
    fn interleaved_appends_resolve_to_write_order() {
        // Both appenders read (empty) before either writes; the final
        // history must list both values in write order. Drive the two-step
        // append manually to control the interleaving.
        let mut mem = buffer_mem(2);
        let ra = mem.apply(0, &Instruction::BufferRead).unwrap(); // appender 0 reads
        let rb = mem.apply(0, &Instruction::BufferRead).unwrap(); // appender 1 reads
        for (resp, pid, val) in [(ra, 0usize, 10i64), (rb, 1, 20)] {
            let slots = match resp {
                Response::Value(Value::Record(s)) => s,
                _ => unreachable!(),
            };
            let h = reconstruct_history(&slots).unwrap();
            let write = Value::rec(vec![Value::Record(h), tag_entry(pid, 1, Value::int(val))]);
            mem.apply(0, &Instruction::BufferWrite(write)).unwrap();
        }
        let reader = HistoryObject::new(0, 2);
        assert_eq!(
            reader.get_history(&mut mem).unwrap(),
            vec![Value::int(10), Value::int(20)]
        );
    }

    #[test]
    fn swr_reads_initial_before_any_write() {
        let mut mem = buffer_mem(2);
        let regs = SwRegisterArray::new(0, vec![0, 1], Value::int(0));
        assert_eq!(regs.read(&mut mem, 1).unwrap(), Value::int(0));
    }

    #[test]
    fn swr_last_write_wins() {
        let mut mem = buffer_mem(2);
        let mut regs = SwRegisterArray::new(0, vec![0, 1], Value::int(0));
        regs.write(&mut mem, 1, 1, Value::int(5)).unwrap();
        regs.write(&mut mem, 1, 1, Value::int(9)).unwrap();
        assert_eq!(regs.read(&mut mem, 1).unwrap(), Value::int(9));
        // The other register is untouched.
        assert_eq!(regs.read(&mut mem, 0).unwrap(), Value::int(0));
    }

    #[test]
    fn swr_rejects_foreign_writer() {
        let mut mem = buffer_mem(2);
        let mut regs = SwRegisterArray::new(0, vec![0, 1], Value::int(0));
        let err = regs.write(&mut mem, 0, 1, Value::int(5)).unwrap_err();
        assert_eq!(err, HistoryError::NotOwner { index: 1, owner: 1, caller: 0 });
    }
}
