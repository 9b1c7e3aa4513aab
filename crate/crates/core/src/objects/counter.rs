//! Multi-component counters realized over single locations or buffers.
//!
//! Four realizations of an m-component counter with `increment(v)` and
//! `scan()`:
//!
//! * `PrimeMultiply` — one {read, multiply} location initialized to 1;
//!   component v is the exponent of the (v+1)-st prime in the stored value.
//! * `BaseAddBounded` — one {read, add} location initialized to 0, read as a
//!   base-3n numeral whose i-th least significant digit is component i. Also
//!   supports `decrement`; a digit leaving {0..3n−1} breaks the counter.
//! * `BitBlocks` — one {read, set-bit} location; each increment sets one
//!   fresh bit, laid out in blocks of n² bits, and a scan sums set bits per
//!   component. Requires per-process local increment tallies.
//! * `SwrBuffers` — per-process tally vectors in n single-writer registers
//!   simulated over ⌈n/ℓ⌉ ℓ-buffers; scans double-collect all buffers.
//! * `IncrementPair` — two {read, increment} locations (m = 2); scans
//!   double-collect both.

use std::collections::BTreeMap;

use super::collect::{scan_double_collect, Timeout};
use super::history::{reconstruct_history, HistoryError, SwRegisterArray};
use crate::memory::{Instruction, InstructionSet, InstructionTag, Memory, MemoryError, Response};
use crate::value::{Int, Value};

/// The (k+1)-st prime for k = 0, 1, 2, … (2, 3, 5, …), by trial division.
pub fn nth_prime(k: usize) -> u64 {
    let mut found = 0usize;
    let mut candidate = 1u64;
    loop {
        candidate += 1;
        let mut is_prime = true;
        let mut d = 2;
        while d * d <= candidate {
            if candidate % d == 0 {
                is_prime = false;
                break;
            }
            d += 1;
        }
        if is_prime {
            if found == k {
                return candidate;
            }
            found += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CounterError {
    #[error("component {component} out of range (m = {m})")]
    NoSuchComponent { component: usize, m: usize },
    #[error("counter broke: component {component} would leave 0..={max}")]
    Broken { component: usize, max: u64 },
    #[error("operation not supported by this realization: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    ScanTimeout(#[from] Timeout),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("stored value does not decode: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CounterKind {
    PrimeMultiply,
    BaseAddBounded,
    BitBlocks,
    SwrBuffers { ell: usize },
    IncrementPair,
}

/// Decodes a prime-product value into m exponents.
pub fn prime_exponents(value: &Int, m: usize) -> Result<Vec<u64>, CounterError> {
    if !value.is_positive() {
        return Err(CounterError::Corrupt(value.to_string()));
    }
    let mut big = value.to_big();
    let mut counts = vec![0u64; m];
    for (v, count) in counts.iter_mut().enumerate() {
        let p = num_bigint::BigInt::from(nth_prime(v));
        while (&big % &p) == num_bigint::BigInt::from(0) {
            big /= &p;
            *count += 1;
        }
    }
    if big != num_bigint::BigInt::from(1) {
        return Err(CounterError::Corrupt(value.to_string()));
    }
    Ok(counts)
}

/// Decodes a base-`base` numeral into its m least significant digits.
pub fn base_digits(value: &Int, base: u64, m: usize) -> Result<Vec<u64>, CounterError> {
    if value.is_negative() {
        return Err(CounterError::Corrupt(value.to_string()));
    }
    let mut big = value.to_big();
    let b = num_bigint::BigInt::from(base);
    let mut digits = vec![0u64; m];
    for d in digits.iter_mut() {
        let rem = &big % &b;
        *d = Int::from_big(rem.clone()).to_u64().unwrap();
        big = (big - rem) / &b;
    }
    if big != num_bigint::BigInt::from(0) {
        return Err(CounterError::Corrupt(value.to_string()));
    }
    Ok(digits)
}

/// Counts set bits per component for the block layout: bit b·n² + v·n + i
/// records process i's (b+1)-st increment of component v.
pub fn bit_block_counts(value: &Int, n: usize, m: usize) -> Result<Vec<u64>, CounterError> {
    if value.is_negative() {
        return Err(CounterError::Corrupt(value.to_string()));
    }
    let block = (n * n) as u64;
    let mut counts = vec![0u64; m];
    for q in 0..value.bit_len() {
        if value.bit(q) {
            let v = ((q % block) / n as u64) as usize;
            if v >= m {
                return Err(CounterError::Corrupt(value.to_string()));
            }
            counts[v] += 1;
        }
    }
    Ok(counts)
}

/// Sequential driver for one counter realization. Protocol state machines
/// emit the same instruction sequences step by step; this API applies them
/// directly for oracles and object-level tests.
#[derive(Clone, Debug)]
pub struct Counter {
    kind: CounterKind,
    n: usize,
    m: usize,
    broken: bool,
    /// BitBlocks: per-process, per-component local increment tallies.
    tallies: BTreeMap<usize, Vec<u64>>,
    /// SwrBuffers: per-buffer register arrays and per-process tally vectors.
    swr: Vec<SwRegisterArray>,
    swr_vectors: BTreeMap<usize, Vec<u64>>,
}

impl Counter {
    pub fn new(kind: CounterKind, n: usize, m: usize) -> Counter {
        let swr = match &kind {
            CounterKind::SwrBuffers { ell } => {
                let bufs = n.div_ceil(*ell);
                (0..bufs)
                    .map(|b| {
                        let owners: Vec<usize> =
                            (b * ell..((b + 1) * ell).min(n)).collect();
                        SwRegisterArray::new(b as u64, owners, Value::zeros(m))
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Counter { kind, n, m, broken: false, tallies: BTreeMap::new(), swr, swr_vectors: BTreeMap::new() }
    }

    pub fn kind(&self) -> &CounterKind {
        &self.kind
    }

    pub fn components(&self) -> usize {
        self.m
    }

    /// Fresh memory with the realization's instruction set and initial value.
    pub fn fresh_memory(&self) -> Memory {
        match &self.kind {
            CounterKind::PrimeMultiply => Memory::new(
                InstructionSet::new(&[InstructionTag::Read, InstructionTag::Multiply]),
                Value::int(1),
            ),
            CounterKind::BaseAddBounded => Memory::new(
                InstructionSet::new(&[InstructionTag::Read, InstructionTag::Add]),
                Value::int(0),
            ),
            CounterKind::BitBlocks => Memory::new(
                InstructionSet::new(&[InstructionTag::Read, InstructionTag::SetBit]),
                Value::int(0),
            ),
            CounterKind::SwrBuffers { ell } => {
                Memory::new(InstructionSet::buffers(*ell), Value::Bottom)
            }
            CounterKind::IncrementPair => Memory::new(
                InstructionSet::new(&[
                    InstructionTag::Read,
                    InstructionTag::Write,
                    InstructionTag::Increment,
                ]),
                Value::int(0),
            ),
        }
    }

    fn digit_bound(&self) -> u64 {
        3 * self.n as u64 - 1
    }

    fn check_component(&self, v: usize) -> Result<(), CounterError> {
        if v >= self.m {
            return Err(CounterError::NoSuchComponent { component: v, m: self.m });
        }
        if self.broken {
            return Err(CounterError::Broken { component: v, max: self.digit_bound() });
        }
        Ok(())
    }

    fn read_int(mem: &mut Memory, loc: u64) -> Result<Int, CounterError> {
        match mem.apply(loc, &Instruction::Read)? {
            Response::Value(Value::Int(i)) => Ok(i),
            other => Err(CounterError::Corrupt(format!("{other:?}"))),
        }
    }

    pub fn increment(
        &mut self,
        mem: &mut Memory,
        pid: usize,
        v: usize,
    ) -> Result<(), CounterError> {
        self.check_component(v)?;
        match &self.kind {
            CounterKind::PrimeMultiply => {
                mem.apply(0, &Instruction::Multiply(Int::from(nth_prime(v))))?;
                Ok(())
            }
            CounterKind::BaseAddBounded => {
                let base = 3 * self.n as u64;
                let digits = base_digits(&Self::read_int(mem, 0)?, base, self.m)?;
                if digits[v] >= self.digit_bound() {
                    self.broken = true;
                    return Err(CounterError::Broken { component: v, max: self.digit_bound() });
                }
                let mut step = Int::ONE;
                for _ in 0..v {
                    step = step.checked_mul_i(&Int::from(base));
                }
                mem.apply(0, &Instruction::Add(step))?;
                Ok(())
            }
            CounterKind::BitBlocks => {
                let tally = self.tallies.entry(pid).or_insert_with(|| vec![0; self.m]);
                let b = tally[v];
                tally[v] += 1;
                let bit = b * (self.n as u64 * self.n as u64) + (v * self.n + pid) as u64;
                mem.apply(0, &Instruction::SetBit(bit))?;
                Ok(())
            }
            CounterKind::SwrBuffers { ell } => {
                let vec = self.swr_vectors.entry(pid).or_insert_with(|| vec![0; self.m]);
                vec[v] += 1;
                let val = Value::rec(vec.iter().map(|&c| Value::Int(Int::from(c))).collect());
                let buf = pid / ell;
                let slot = pid % ell;
                self.swr[buf].write(mem, pid, slot, val)?;
                Ok(())
            }
            CounterKind::IncrementPair => {
                mem.apply(v as u64, &Instruction::Increment)?;
                Ok(())
            }
        }
    }

    /// Only the bounded realization supports decrement.
    pub fn decrement(
        &mut self,
        mem: &mut Memory,
        _pid: usize,
        v: usize,
    ) -> Result<(), CounterError> {
        self.check_component(v)?;
        match &self.kind {
            CounterKind::BaseAddBounded => {
                let base = 3 * self.n as u64;
                let digits = base_digits(&Self::read_int(mem, 0)?, base, self.m)?;
                if digits[v] == 0 {
                    self.broken = true;
                    return Err(CounterError::Broken { component: v, max: self.digit_bound() });
                }
                let mut step = Int::ONE;
                for _ in 0..v {
                    step = step.checked_mul_i(&Int::from(base));
                }
                mem.apply(0, &Instruction::Add(Int::ZERO.checked_sub_i(&step)))?;
                Ok(())
            }
            _ => Err(CounterError::Unsupported("decrement")),
        }
    }

    /// Returns all m component counts. Single-location realizations scan
    /// with one read; the others double-collect within `budget` reads.
    pub fn scan(&self, mem: &mut Memory, budget: u64) -> Result<Vec<u64>, CounterError> {
        if self.broken {
            return Err(CounterError::Broken { component: 0, max: self.digit_bound() });
        }
        match &self.kind {
            CounterKind::PrimeMultiply => {
                prime_exponents(&Self::read_int(mem, 0)?, self.m)
            }
            CounterKind::BaseAddBounded => {
                base_digits(&Self::read_int(mem, 0)?, 3 * self.n as u64, self.m)
            }
            CounterKind::BitBlocks => bit_block_counts(&Self::read_int(mem, 0)?, self.n, self.m),
            CounterKind::SwrBuffers { ell } => {
                let bufs = self.n.div_ceil(*ell);
                let locations: Vec<u64> = (0..bufs as u64).collect();
                let windows = scan_double_collect(
                    |loc| match mem.apply(loc, &Instruction::BufferRead) {
                        Ok(Response::Value(v)) => v,
                        _ => Value::Bottom,
                    },
                    &locations,
                    budget,
                )?;
                let mut counts = vec![0u64; self.m];
                for (b, window) in windows.iter().enumerate() {
                    let slots = window
                        .as_slice()
                        .ok_or_else(|| CounterError::Corrupt(window.to_string()))?;
                    let entries = reconstruct_history(slots)?;
                    // Latest register value per owner of this buffer.
                    let owners = (b * ell..((b + 1) * ell).min(self.n)).len();
                    let mut latest: Vec<Option<&Value>> = vec![None; owners];
                    for entry in &entries {
                        let payload = &entry.as_slice().unwrap()[2];
                        let items = payload
                            .as_slice()
                            .ok_or_else(|| CounterError::Corrupt(payload.to_string()))?;
                        let slot = items[0].to_usize().unwrap_or(usize::MAX);
                        if slot < owners {
                            latest[slot] = Some(&items[1]);
                        }
                    }
                    for value in latest.into_iter().flatten() {
                        let vec = value
                            .as_slice()
                            .ok_or_else(|| CounterError::Corrupt(value.to_string()))?;
                        for (v, c) in vec.iter().enumerate() {
                            counts[v] += c.to_u64().unwrap_or(0);
                        }
                    }
                }
                Ok(counts)
            }
            CounterKind::IncrementPair => {
                let values = scan_double_collect(
                    |loc| match mem.apply(loc, &Instruction::Read) {
                        Ok(Response::Value(v)) => v,
                        _ => Value::Bottom,
                    },
                    &[0, 1],
                    budget,
                )?;
                values
                    .iter()
                    .map(|v| v.to_u64().ok_or_else(|| CounterError::Corrupt(v.to_string())))
                    .collect()
            }
        }
    }
}
