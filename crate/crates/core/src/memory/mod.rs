//! Memory locations, instruction semantics, and whole-system configurations.
//!
//! A [`Memory`] is an indexable collection of locations that all support one
//! [`InstructionSet`] (the uniformity requirement). Locations are materialized
//! lazily on first access with the memory's initial value, which lets
//! protocols declare an unbounded location space. [`Memory::apply`] performs
//! one instruction as a single atomic step and returns its [`Response`].

mod config;

pub use config::{Configuration, ConfigurationImage, ImageError, ProcessEntry, ProcessStatus};

use std::collections::BTreeMap;
use std::fmt;

use crate::value::{put_u32, put_u64, put_u8, ByteReader, ByteSink, DecodeError, Int, Value};

/// One atomic memory operation together with its arguments.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Instruction {
    Read,
    Write(Value),
    Write1,
    Write0,
    FetchAndAdd(Int),
    FetchAndIncrement,
    Increment,
    Add(Int),
    Decrement,
    Multiply(Int),
    /// Sets the given bit (0 = least significant) to 1.
    SetBit(u64),
    /// Returns the old value; sets the location to 1 only if it held 0.
    TestAndSet,
    Reset,
    Swap(Value),
    ReadMax,
    WriteMax(Value),
    BufferRead,
    BufferWrite(Value),
    /// Atomically performs one buffer write per listed location.
    MultiAssign(Vec<(u64, Value)>),
}

/// Tag-only mirror of [`Instruction`], used for instruction-set membership.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum InstructionTag {
    Read = 0,
    Write = 1,
    Write1 = 2,
    Write0 = 3,
    FetchAndAdd = 4,
    FetchAndIncrement = 5,
    Increment = 6,
    Add = 7,
    Decrement = 8,
    Multiply = 9,
    SetBit = 10,
    TestAndSet = 11,
    Reset = 12,
    Swap = 13,
    ReadMax = 14,
    WriteMax = 15,
    BufferRead = 16,
    BufferWrite = 17,
    MultiAssign = 18,
}

impl Instruction {
    pub fn tag(&self) -> InstructionTag {
        use Instruction::*;
        match self {
            Read => InstructionTag::Read,
            Write(_) => InstructionTag::Write,
            Write1 => InstructionTag::Write1,
            Write0 => InstructionTag::Write0,
            FetchAndAdd(_) => InstructionTag::FetchAndAdd,
            FetchAndIncrement => InstructionTag::FetchAndIncrement,
            Increment => InstructionTag::Increment,
            Add(_) => InstructionTag::Add,
            Decrement => InstructionTag::Decrement,
            Multiply(_) => InstructionTag::Multiply,
            SetBit(_) => InstructionTag::SetBit,
            TestAndSet => InstructionTag::TestAndSet,
            Reset => InstructionTag::Reset,
            Swap(_) => InstructionTag::Swap,
            ReadMax => InstructionTag::ReadMax,
            WriteMax(_) => InstructionTag::WriteMax,
            BufferRead => InstructionTag::BufferRead,
            BufferWrite(_) => InstructionTag::BufferWrite,
            MultiAssign(_) => InstructionTag::MultiAssign,
        }
    }

    pub fn encode(&self, out: &mut impl ByteSink) {
        use Instruction::*;
        put_u8(out, self.tag() as u8);
        match self {
            Read | Write1 | Write0 | FetchAndIncrement | Increment | Decrement | TestAndSet
            | Reset | ReadMax | BufferRead => {}
            Write(v) | Swap(v) | WriteMax(v) | BufferWrite(v) => v.encode(out),
            FetchAndAdd(i) | Add(i) | Multiply(i) => i.encode(out),
            SetBit(bit) => put_u64(out, *bit),
            MultiAssign(pairs) => {
                put_u32(out, pairs.len() as u32);
                for (loc, v) in pairs {
                    put_u64(out, *loc);
                    v.encode(out);
                }
            }
        }
    }

    pub fn decode(rd: &mut ByteReader<'_>) -> Result<Instruction, DecodeError> {
        use Instruction::*;
        let at = rd.pos();
        let tag = rd.u8()?;
        Ok(match tag {
            0 => Read,
            1 => Write(rd.value()?),
            2 => Write1,
            3 => Write0,
            4 => FetchAndAdd(rd.int()?),
            5 => FetchAndIncrement,
            6 => Increment,
            7 => Add(rd.int()?),
            8 => Decrement,
            9 => Multiply(rd.int()?),
            10 => SetBit(rd.u64()?),
            11 => TestAndSet,
            12 => Reset,
            13 => Swap(rd.value()?),
            14 => ReadMax,
            15 => WriteMax(rd.value()?),
            16 => BufferRead,
            17 => BufferWrite(rd.value()?),
            18 => {
                let n = rd.u32()? as usize;
                let mut pairs = Vec::with_capacity(n.min(1 << 12));
                for _ in 0..n {
                    let loc = rd.u64()?;
                    pairs.push((loc, rd.value()?));
                }
                MultiAssign(pairs)
            }
            _ => return Err(DecodeError::BadTag { what: "instruction", tag, at }),
        })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Instruction::*;
        match self {
            Read => write!(f, "read()"),
            Write(v) => write!(f, "write({v})"),
            Write1 => write!(f, "write1()"),
            Write0 => write!(f, "write0()"),
            FetchAndAdd(x) => write!(f, "fetch-and-add({x})"),
            FetchAndIncrement => write!(f, "fetch-and-increment()"),
            Increment => write!(f, "increment()"),
            Add(x) => write!(f, "add({x})"),
            Decrement => write!(f, "decrement()"),
            Multiply(x) => write!(f, "multiply({x})"),
            SetBit(x) => write!(f, "set-bit({x})"),
            TestAndSet => write!(f, "test-and-set()"),
            Reset => write!(f, "reset()"),
            Swap(v) => write!(f, "swap({v})"),
            ReadMax => write!(f, "read-max()"),
            WriteMax(v) => write!(f, "write-max({v})"),
            BufferRead => write!(f, "buffer-read()"),
            BufferWrite(v) => write!(f, "buffer-write({v})"),
            MultiAssign(pairs) => {
                write!(f, "multi-assign(")?;
                for (k, (loc, v)) in pairs.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{loc}:{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// What an instruction hands back: a plain acknowledgement for void
/// instructions, or a value for the reading/fetching ones.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Response {
    Ack,
    Value(Value),
}

impl Response {
    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Response::Ack => None,
            Response::Value(v) => Some(v),
        }
    }

    pub fn encode(&self, out: &mut impl ByteSink) {
        match self {
            Response::Ack => put_u8(out, 0),
            Response::Value(v) => {
                put_u8(out, 1);
                v.encode(out);
            }
        }
    }

    pub fn decode(rd: &mut ByteReader<'_>) -> Result<Response, DecodeError> {
        let at = rd.pos();
        match rd.u8()? {
            0 => Ok(Response::Ack),
            1 => Ok(Response::Value(rd.value()?)),
            tag => Err(DecodeError::BadTag { what: "response", tag, at }),
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Ack => write!(f, "ack"),
            Response::Value(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Debug for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A named set of instruction tags; buffer sets also carry the capacity ℓ.
/// Every location of a [`Memory`] supports exactly this set.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct InstructionSet {
    mask: u32,
    buffer_capacity: Option<usize>,
}

impl InstructionSet {
    pub fn new(tags: &[InstructionTag]) -> InstructionSet {
        let mut mask = 0u32;
        for t in tags {
            mask |= 1 << (*t as u32);
        }
        InstructionSet { mask, buffer_capacity: None }
    }

    /// The buffered read/write set with capacity `ell` ≥ 1.
    pub fn buffers(ell: usize) -> InstructionSet {
        assert!(ell >= 1, "buffer capacity must be at least 1");
        let mut set = Self::new(&[InstructionTag::BufferRead, InstructionTag::BufferWrite]);
        set.buffer_capacity = Some(ell);
        set
    }

    /// Buffer set that additionally allows atomic multiple assignment.
    pub fn buffers_with_multi_assign(ell: usize) -> InstructionSet {
        let mut set = Self::buffers(ell);
        set.mask |= 1 << (InstructionTag::MultiAssign as u32);
        set
    }

    pub fn contains(&self, tag: InstructionTag) -> bool {
        self.mask & (1 << (tag as u32)) != 0
    }

    pub fn buffer_capacity(&self) -> Option<usize> {
        self.buffer_capacity
    }

    fn is_buffer(&self) -> bool {
        self.buffer_capacity.is_some()
    }

    fn is_max_register(&self) -> bool {
        self.contains(InstructionTag::ReadMax) || self.contains(InstructionTag::WriteMax)
    }

    pub fn encode(&self, out: &mut impl ByteSink) {
        put_u32(out, self.mask);
        put_u64(out, self.buffer_capacity.map(|c| c as u64).unwrap_or(0));
    }

    pub fn decode(rd: &mut ByteReader<'_>) -> Result<InstructionSet, DecodeError> {
        let mask = rd.u32()?;
        let cap = rd.u64()?;
        Ok(InstructionSet {
            mask,
            buffer_capacity: if cap == 0 { None } else { Some(cap as usize) },
        })
    }
}

/// State of one location. Most sets store a single value; buffer locations
/// retain the full ordered write history (reads derive the last-ℓ window);
/// max-register locations keep the running maximum.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum LocationState {
    Plain(Value),
    Buffer(Vec<Value>),
    Max(Value),
}

impl LocationState {
    fn encode(&self, out: &mut impl ByteSink) {
        match self {
            LocationState::Plain(v) => {
                put_u8(out, 0);
                v.encode(out);
            }
            LocationState::Buffer(history) => {
                put_u8(out, 1);
                put_u32(out, history.len() as u32);
                for v in history {
                    v.encode(out);
                }
            }
            LocationState::Max(v) => {
                put_u8(out, 2);
                v.encode(out);
            }
        }
    }

    fn decode(rd: &mut ByteReader<'_>) -> Result<LocationState, DecodeError> {
        let at = rd.pos();
        match rd.u8()? {
            0 => Ok(LocationState::Plain(rd.value()?)),
            1 => {
                let n = rd.u32()? as usize;
                let mut history = Vec::with_capacity(n.min(1 << 16));
                for _ in 0..n {
                    history.push(rd.value()?);
                }
                Ok(LocationState::Buffer(history))
            }
            2 => Ok(LocationState::Max(rd.value()?)),
            tag => Err(DecodeError::BadTag { what: "location state", tag, at }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemoryError {
    #[error("instruction {instruction} not in this memory's instruction set")]
    UnsupportedInstruction { instruction: String },
    #[error("malformed argument: {0}")]
    MalformedArgument(String),
}

/// The shared memory: one instruction set, lazily materialized locations,
/// a per-memory initial value, and the touched-location set.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Memory {
    set: InstructionSet,
    initial: Value,
    locations: BTreeMap<u64, LocationState>,
    touched: std::collections::BTreeSet<u64>,
}

impl Memory {
    pub fn new(set: InstructionSet, initial: Value) -> Memory {
        Memory { set, initial, locations: BTreeMap::new(), touched: std::collections::BTreeSet::new() }
    }

    pub fn instruction_set(&self) -> &InstructionSet {
        &self.set
    }

    /// Number of distinct location indices accessed so far. Monotone.
    pub fn touched_count(&self) -> usize {
        self.touched.len()
    }

    fn fresh_state(&self) -> LocationState {
        if self.set.is_buffer() {
            LocationState::Buffer(Vec::new())
        } else if self.set.is_max_register() {
            LocationState::Max(self.initial.clone())
        } else {
            LocationState::Plain(self.initial.clone())
        }
    }

    fn state_mut(&mut self, loc: u64) -> &mut LocationState {
        self.touched.insert(loc);
        let fresh = self.fresh_state();
        self.locations.entry(loc).or_insert(fresh)
    }

    /// Current value of a plain or max location without counting it as
    /// touched; diagnostic/checker use only.
    pub fn peek_plain(&self, loc: u64) -> Value {
        match self.locations.get(&loc) {
            Some(LocationState::Plain(v)) | Some(LocationState::Max(v)) => v.clone(),
            Some(LocationState::Buffer(_)) => Value::Bottom,
            None => self.initial.clone(),
        }
    }

    /// Full write history of a buffer location (empty if untouched).
    pub fn peek_buffer_history(&self, loc: u64) -> &[Value] {
        match self.locations.get(&loc) {
            Some(LocationState::Buffer(h)) => h,
            _ => &[],
        }
    }

    fn buffer_window(history: &[Value], ell: usize) -> Value {
        let mut slots = vec![Value::Bottom; ell];
        let take = history.len().min(ell);
        for (i, v) in history[history.len() - take..].iter().enumerate() {
            slots[ell - take + i] = v.clone();
        }
        Value::Record(slots)
    }

    fn expect_int(state: &LocationState, instr: &Instruction) -> Result<Int, MemoryError> {
        match state {
            LocationState::Plain(Value::Int(i)) => Ok(i.clone()),
            _ => Err(MemoryError::MalformedArgument(format!(
                "{instr} requires an integer-valued location"
            ))),
        }
    }

    /// Applies one instruction to one location as a single atomic step.
    ///
    /// For `multi-assign` the `loc` argument is only the step's reporting
    /// location; the instruction's own pairs name the written locations.
    pub fn apply(&mut self, loc: u64, instr: &Instruction) -> Result<Response, MemoryError> {
        use Instruction::*;
        if !self.set.contains(instr.tag()) {
            return Err(MemoryError::UnsupportedInstruction { instruction: instr.to_string() });
        }
        match instr {
            Read => {
                let state = self.state_mut(loc);
                match state {
                    LocationState::Plain(v) => Ok(Response::Value(v.clone())),
                    _ => Err(MemoryError::MalformedArgument("read() on non-plain location".into())),
                }
            }
            Write(v) => {
                *self.state_mut(loc) = LocationState::Plain(v.clone());
                Ok(Response::Ack)
            }
            Write1 => {
                *self.state_mut(loc) = LocationState::Plain(Value::int(1));
                Ok(Response::Ack)
            }
            Write0 | Reset => {
                *self.state_mut(loc) = LocationState::Plain(Value::int(0));
                Ok(Response::Ack)
            }
            FetchAndAdd(x) => {
                let state = self.state_mut(loc);
                let old = Self::expect_int(state, instr)?;
                *state = LocationState::Plain(Value::Int(old.checked_add_i(x)));
                Ok(Response::Value(Value::Int(old)))
            }
            FetchAndIncrement => {
                let state = self.state_mut(loc);
                let old = Self::expect_int(state, instr)?;
                *state = LocationState::Plain(Value::Int(old.checked_add_i(&Int::ONE)));
                Ok(Response::Value(Value::Int(old)))
            }
            Increment => {
                let state = self.state_mut(loc);
                let old = Self::expect_int(state, instr)?;
                *state = LocationState::Plain(Value::Int(old.checked_add_i(&Int::ONE)));
                Ok(Response::Ack)
            }
            Add(x) => {
                let state = self.state_mut(loc);
                let old = Self::expect_int(state, instr)?;
                *state = LocationState::Plain(Value::Int(old.checked_add_i(x)));
                Ok(Response::Ack)
            }
            Decrement => {
                let state = self.state_mut(loc);
                let old = Self::expect_int(state, instr)?;
                *state = LocationState::Plain(Value::Int(old.checked_sub_i(&Int::ONE)));
                Ok(Response::Ack)
            }
            Multiply(x) => {
                let state = self.state_mut(loc);
                let old = Self::expect_int(state, instr)?;
                *state = LocationState::Plain(Value::Int(old.checked_mul_i(x)));
                Ok(Response::Ack)
            }
            SetBit(bit) => {
                let state = self.state_mut(loc);
                let old = Self::expect_int(state, instr)?;
                if old.is_negative() {
                    return Err(MemoryError::MalformedArgument(
                        "set-bit() on negative value".into(),
                    ));
                }
                *state = LocationState::Plain(Value::Int(old.with_bit_set(*bit)));
                Ok(Response::Ack)
            }
            TestAndSet => {
                let state = self.state_mut(loc);
                let old = match state {
                    LocationState::Plain(v) => v.clone(),
                    _ => {
                        return Err(MemoryError::MalformedArgument(
                            "test-and-set() on non-plain location".into(),
                        ))
                    }
                };
                if old == Value::int(0) {
                    *state = LocationState::Plain(Value::int(1));
                }
                Ok(Response::Value(old))
            }
            Swap(v) => {
                let state = self.state_mut(loc);
                let old = match state {
                    LocationState::Plain(prev) => prev.clone(),
                    _ => {
                        return Err(MemoryError::MalformedArgument(
                            "swap() on non-plain location".into(),
                        ))
                    }
                };
                *state = LocationState::Plain(v.clone());
                Ok(Response::Value(old))
            }
            ReadMax => {
                let state = self.state_mut(loc);
                match state {
                    LocationState::Max(v) => Ok(Response::Value(v.clone())),
                    _ => Err(MemoryError::MalformedArgument(
                        "read-max() on non-max location".into(),
                    )),
                }
            }
            WriteMax(v) => {
                let state = self.state_mut(loc);
                match state {
                    LocationState::Max(cur) => {
                        if *v > *cur {
                            *cur = v.clone();
                        }
                        Ok(Response::Ack)
                    }
                    _ => Err(MemoryError::MalformedArgument(
                        "write-max() on non-max location".into(),
                    )),
                }
            }
            BufferRead => {
                let ell = self.set.buffer_capacity().expect("buffer set has capacity");
                let state = self.state_mut(loc);
                match state {
                    LocationState::Buffer(history) => {
                        Ok(Response::Value(Self::buffer_window(history, ell)))
                    }
                    _ => unreachable!("buffer memory materializes buffer locations"),
                }
            }
            BufferWrite(v) => {
                let state = self.state_mut(loc);
                match state {
                    LocationState::Buffer(history) => {
                        history.push(v.clone());
                        Ok(Response::Ack)
                    }
                    _ => unreachable!("buffer memory materializes buffer locations"),
                }
            }
            MultiAssign(pairs) => {
                let mut seen = std::collections::BTreeSet::new();
                for (target, _) in pairs {
                    if !seen.insert(*target) {
                        return Err(MemoryError::MalformedArgument(format!(
                            "multi-assign lists location {target} twice"
                        )));
                    }
                }
                for (target, v) in pairs {
                    match self.state_mut(*target) {
                        LocationState::Buffer(history) => history.push(v.clone()),
                        _ => unreachable!("buffer memory materializes buffer locations"),
                    }
                }
                Ok(Response::Ack)
            }
        }
    }

    pub fn encode(&self, out: &mut impl ByteSink) {
        self.set.encode(out);
        self.initial.encode(out);
        put_u32(out, self.locations.len() as u32);
        for (loc, state) in &self.locations {
            put_u64(out, *loc);
            state.encode(out);
        }
        put_u32(out, self.touched.len() as u32);
        for loc in &self.touched {
            put_u64(out, *loc);
        }
    }

    pub fn decode(rd: &mut ByteReader<'_>) -> Result<Memory, DecodeError> {
        let set = InstructionSet::decode(rd)?;
        let initial = rd.value()?;
        let n = rd.u32()? as usize;
        let mut locations = BTreeMap::new();
        for _ in 0..n {
            let loc = rd.u64()?;
            locations.insert(loc, LocationState::decode(rd)?);
        }
        let t = rd.u32()? as usize;
        let mut touched = std::collections::BTreeSet::new();
        for _ in 0..t {
            touched.insert(rd.u64()?);
        }
        Ok(Memory { set, initial, locations, touched })
    }
}

#[cfg(test)]
mod tests;
