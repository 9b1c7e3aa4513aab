//! Stored values: arbitrary-precision integers, a bottom marker, and records.
//!
//! Everything a memory location can hold, a protocol can keep as local state,
//! or an instruction can carry as an argument is a [`Value`]. Integers are
//! unbounded (prime-product counters and lap vectors grow without limit) but
//! almost always small, so [`Int`] keeps an `i64` fast path and promotes to a
//! heap `BigInt` only on overflow.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

/// Arbitrary-precision signed integer, normalized so that any value fitting
/// in an `i64` is stored inline. The normalization makes `Eq`/`Hash`/`Ord`
/// canonical across construction paths.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Int {
    Small(i64),
    Big(Box<BigInt>),
}

impl Int {
    pub const ZERO: Int = Int::Small(0);
    pub const ONE: Int = Int::Small(1);

    pub fn from_big(b: BigInt) -> Int {
        match b.to_i64() {
            Some(v) => Int::Small(v),
            None => Int::Big(Box::new(b)),
        }
    }

    pub fn to_big(&self) -> BigInt {
        match self {
            Int::Small(v) => BigInt::from(*v),
            Int::Big(b) => (**b).clone(),
        }
    }

    pub fn to_i64(&self) -> Option<i64> {
        match self {
            Int::Small(v) => Some(*v),
            Int::Big(_) => None,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        match self {
            Int::Small(v) => u64::try_from(*v).ok(),
            Int::Big(b) => b.to_u64(),
        }
    }

    pub fn to_usize(&self) -> Option<usize> {
        self.to_u64().and_then(|v| usize::try_from(v).ok())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Int::Small(0))
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Int::Small(v) => *v > 0,
            Int::Big(b) => b.is_positive(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Int::Small(v) => *v < 0,
            Int::Big(b) => b.is_negative(),
        }
    }

    pub fn checked_add_i(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_add(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() + other.to_big())
    }

    pub fn checked_sub_i(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_sub(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() - other.to_big())
    }

    pub fn checked_mul_i(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_mul(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() * other.to_big())
    }

    /// Sets bit `index` (0 = least significant) to 1.
    pub fn with_bit_set(&self, index: u64) -> Int {
        if let Int::Small(v) = self {
            if index < 63 && *v >= 0 {
                return Int::Small(v | (1i64 << index));
            }
        }
        let mut b = self.to_big();
        b.set_bit(index, true);
        Int::from_big(b)
    }

    pub fn bit(&self, index: u64) -> bool {
        match self {
            Int::Small(v) => {
                if index >= 64 {
                    *v < 0
                } else {
                    (*v >> index.min(63)) & 1 == 1
                }
            }
            Int::Big(b) => b.bit(index),
        }
    }

    /// Number of bits in the magnitude (0 for zero). Only meaningful for
    /// nonnegative values, which is all the bit-block decoder needs.
    pub fn bit_len(&self) -> u64 {
        match self {
            Int::Small(v) => (64 - (*v).unsigned_abs().leading_zeros()) as u64,
            Int::Big(b) => b.bits(),
        }
    }
}

impl From<i64> for Int {
    fn from(v: i64) -> Int {
        Int::Small(v)
    }
}

impl From<u64> for Int {
    fn from(v: u64) -> Int {
        match i64::try_from(v) {
            Ok(s) => Int::Small(s),
            Err(_) => Int::Big(Box::new(BigInt::from(v))),
        }
    }
}

impl From<usize> for Int {
    fn from(v: usize) -> Int {
        Int::from(v as u64)
    }
}

impl PartialOrd for Int {
    fn partial_cmp(&self, other: &Int) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Int {
    fn cmp(&self, other: &Int) -> Ordering {
        match (self, other) {
            (Int::Small(a), Int::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Debug for Int {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Int {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Int::Small(v) => write!(f, "{v}"),
            Int::Big(b) => write!(f, "{b}"),
        }
    }
}

/// One stored value: an integer, the bottom marker `⊥`, or a record of values.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bottom,
    Int(Int),
    Record(Vec<Value>),
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Int(Int::Small(v))
    }

    pub fn rec(items: Vec<Value>) -> Value {
        Value::Record(items)
    }

    pub fn zeros(n: usize) -> Value {
        Value::Record(vec![Value::int(0); n])
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }

    pub fn as_int(&self) -> Option<&Int> {
        match self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_slice(&self) -> Option<&[Value]> {
        match self {
            Value::Record(items) => Some(items),
            _ => None,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.as_int().and_then(Int::to_u64)
    }

    pub fn to_usize(&self) -> Option<usize> {
        self.as_int().and_then(Int::to_usize)
    }
}

impl From<Int> for Value {
    fn from(i: Int) -> Value {
        Value::Int(i)
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Value) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total deterministic order: `⊥` < integers < records; integers numerically,
/// records lexicographically. Max-register semantics use this order.
impl Ord for Value {
    fn cmp(&self, other: &Value) -> Ordering {
        use Value::*;
        match (self, other) {
            (Bottom, Bottom) => Ordering::Equal,
            (Bottom, _) => Ordering::Less,
            (_, Bottom) => Ordering::Greater,
            (Int(a), Int(b)) => a.cmp(b),
            (Int(_), Record(_)) => Ordering::Less,
            (Record(_), Int(_)) => Ordering::Greater,
            (Record(a), Record(b)) => a.cmp(b),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bottom => write!(f, "_"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Record(items) => {
                write!(f, "[")?;
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Sink for the canonical byte encoding. Implemented by plain byte buffers
/// (snapshot images) and by streaming hashers (configuration memoization),
/// so hashing never materializes an image.
pub trait ByteSink {
    fn put(&mut self, bytes: &[u8]);
}

impl ByteSink for Vec<u8> {
    fn put(&mut self, bytes: &[u8]) {
        self.extend_from_slice(bytes);
    }
}

impl ByteSink for sha2::Sha256 {
    fn put(&mut self, bytes: &[u8]) {
        use sha2::Digest;
        self.update(bytes);
    }
}

pub fn put_u8(out: &mut impl ByteSink, v: u8) {
    out.put(&[v]);
}

pub fn put_u32(out: &mut impl ByteSink, v: u32) {
    out.put(&v.to_be_bytes());
}

pub fn put_u64(out: &mut impl ByteSink, v: u64) {
    out.put(&v.to_be_bytes());
}

impl Int {
    /// Canonical encoding: sign byte, magnitude length, big-endian magnitude
    /// with no leading zeros. Zero encodes as sign 0, length 0.
    pub fn encode(&self, out: &mut impl ByteSink) {
        let big = self.to_big();
        let (sign, mag) = (big.is_negative(), big.magnitude().to_bytes_be());
        let mag: &[u8] = if big.is_zero() { &[] } else { &mag };
        put_u8(out, sign as u8);
        put_u32(out, mag.len() as u32);
        out.put(mag);
    }
}

impl Value {
    pub fn encode(&self, out: &mut impl ByteSink) {
        match self {
            Value::Bottom => put_u8(out, 0),
            Value::Int(i) => {
                put_u8(out, 1);
                i.encode(out);
            }
            Value::Record(items) => {
                put_u8(out, 2);
                put_u32(out, items.len() as u32);
                for item in items {
                    item.encode(out);
                }
            }
        }
    }
}

/// Cursor over canonical bytes with truncation checking.
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("truncated input at offset {0}")]
    Truncated(usize),
    #[error("invalid tag {tag} for {what} at offset {at}")]
    BadTag { what: &'static str, tag: u8, at: usize },
    #[error("non-canonical integer encoding at offset {0}")]
    BadInt(usize),
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn int(&mut self) -> Result<Int, DecodeError> {
        let at = self.pos;
        let sign = self.u8()?;
        if sign > 1 {
            return Err(DecodeError::BadTag { what: "int sign", tag: sign, at });
        }
        let len = self.u32()? as usize;
        let mag = self.take(len)?;
        if len > 0 && mag[0] == 0 {
            return Err(DecodeError::BadInt(at));
        }
        if len == 0 && sign == 1 {
            return Err(DecodeError::BadInt(at));
        }
        let big = BigInt::from_bytes_be(
            if sign == 1 { num_bigint::Sign::Minus } else { num_bigint::Sign::Plus },
            mag,
        );
        Ok(Int::from_big(big))
    }

    pub fn value(&mut self) -> Result<Value, DecodeError> {
        let at = self.pos;
        match self.u8()? {
            0 => Ok(Value::Bottom),
            1 => Ok(Value::Int(self.int()?)),
            2 => {
                let n = self.u32()? as usize;
                let mut items = Vec::with_capacity(n.min(1 << 16));
                for _ in 0..n {
                    items.push(self.value()?);
                }
                Ok(Value::Record(items))
            }
            tag => Err(DecodeError::BadTag { what: "value", tag, at }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn int_promotes_and_normalizes() {
        let a = Int::Small(i64::MAX);
        let b = a.checked_add_i(&Int::ONE);
        assert!(matches!(b, Int::Big(_)));
        let back = b.checked_sub_i(&Int::ONE);
        assert_eq!(back, a);
        assert!(matches!(back, Int::Small(_)));
    }

    #[test]
    fn value_order_is_total() {
        assert!(Value::Bottom < Value::int(-5));
        assert!(Value::int(3) < Value::int(4));
        assert!(Value::int(100) < Value::rec(vec![]));
        assert!(Value::rec(vec![Value::int(1)]) < Value::rec(vec![Value::int(2)]));
    }

    #[test]
    fn display_forms() {
        let v = Value::rec(vec![Value::Bottom, Value::int(-3), Value::rec(vec![Value::int(7)])]);
        assert_eq!(v.to_string(), "[_,-3,[7]]");
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Bottom),
            any::<i64>().prop_map(Value::int),
            any::<i128>().prop_map(|v| Value::Int(Int::from_big(BigInt::from(v)))),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop::collection::vec(inner, 0..4).prop_map(Value::Record)
        })
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(v in arb_value()) {
            let mut bytes = Vec::new();
            v.encode(&mut bytes);
            let mut rd = ByteReader::new(&bytes);
            let back = rd.value().unwrap();
            prop_assert!(rd.is_empty());
            prop_assert_eq!(back, v);
        }

        #[test]
        fn int_order_matches_bigint(a in any::<i128>(), b in any::<i128>()) {
            let (x, y) = (Int::from_big(BigInt::from(a)), Int::from_big(BigInt::from(b)));
            prop_assert_eq!(x.cmp(&y), a.cmp(&b));
        }
    }
}
