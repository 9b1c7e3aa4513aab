//! Integer encoding for the two-max-register consensus protocol.
//!
//! Pairs (r, x) with r ≥ 0 and x ∈ {0..n−1} are ordered lexicographically.
//! Fixing a prime y > n and identifying (r, x) with (x+1)·yʳ makes the
//! integer order coincide with the lexicographic order, so a max register
//! over integers behaves as a max register over the pairs.

use crate::value::Int;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaxPairError {
    #[error("value {x} outside domain 0..{n}")]
    Domain { x: u64, n: u64 },
    #[error("integer {0} is not a valid pair encoding")]
    NotAnEncoding(String),
}

#[derive(Clone, Debug)]
pub struct MaxRegisterPair {
    n: u64,
    y: u64,
}

fn is_prime(v: u64) -> bool {
    if v < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= v {
        if v % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl MaxRegisterPair {
    /// Encoding parameters for value domain {0..n−1}; y is the smallest
    /// prime greater than n.
    pub fn new(n: u64) -> MaxRegisterPair {
        let mut y = n + 1;
        while !is_prime(y) {
            y += 1;
        }
        MaxRegisterPair { n, y }
    }

    pub fn prime(&self) -> u64 {
        self.y
    }

    /// encode(r, x) = (x+1)·yʳ; injective and order-preserving for the
    /// lexicographic order on (r, x).
    pub fn encode(&self, r: u64, x: u64) -> Result<Int, MaxPairError> {
        if x >= self.n {
            return Err(MaxPairError::Domain { x, n: self.n });
        }
        let mut acc = Int::from(x + 1);
        let y = Int::from(self.y);
        for _ in 0..r {
            acc = acc.checked_mul_i(&y);
        }
        Ok(acc)
    }

    /// Inverse of [`encode`](Self::encode): r is the multiplicity of y, and
    /// x+1 the remaining cofactor. Unique because x+1 ≤ n < y.
    pub fn decode(&self, value: &Int) -> Result<(u64, u64), MaxPairError> {
        if !value.is_positive() {
            return Err(MaxPairError::NotAnEncoding(value.to_string()));
        }
        let y = num_bigint::BigInt::from(self.y);
        let mut big = value.to_big();
        let mut r = 0u64;
        while (&big % &y) == num_bigint::BigInt::from(0) {
            big /= &y;
            r += 1;
        }
        let xp1 = Int::from_big(big);
        match xp1.to_u64() {
            Some(v) if (1..=self.n).contains(&v) => Ok((r, v - 1)),
            _ => Err(MaxPairError::NotAnEncoding(value.to_string())),
        }
    }
}
