//! Step-wise double-collect component for protocol state machines.
//!
//! The sequential form lives in [`crate::objects::scan_double_collect`]; this
//! one advances a single read per scheduler step and round-trips through the
//! protocol's `Value`-encoded local state.

use super::codec::{field, field_slice, field_u64};
use super::ProtocolError;
use crate::value::{Int, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DoubleCollect {
    /// Last completed collect, if any.
    pub prev: Option<Vec<Value>>,
    /// Values gathered so far in the current collect.
    pub cur: Vec<Value>,
    /// Completed collects.
    pub collects: u64,
}

pub enum DcStep {
    /// Issue a read of the location with this index in the scan's location
    /// list, then feed the response back.
    Read { index: usize, dc: DoubleCollect },
    /// Two consecutive collects agreed; here is the stable snapshot.
    Done { snapshot: Vec<Value> },
}

impl DoubleCollect {
    pub fn start() -> DoubleCollect {
        DoubleCollect { prev: None, cur: Vec::new(), collects: 0 }
    }

    /// Feeds the value read for position `cur.len()` and decides what's next.
    /// `width` is the number of locations per collect; `cap` bounds the
    /// number of collects when set.
    pub fn feed(
        mut self,
        value: Value,
        width: usize,
        cap: Option<u64>,
    ) -> Result<DcStep, ProtocolError> {
        self.cur.push(value);
        if self.cur.len() < width {
            let index = self.cur.len();
            return Ok(DcStep::Read { index, dc: self });
        }
        self.collects += 1;
        let finished = std::mem::take(&mut self.cur);
        if self.prev.as_ref() == Some(&finished) {
            return Ok(DcStep::Done { snapshot: finished });
        }
        if let Some(cap) = cap {
            if self.collects >= cap {
                return Err(ProtocolError::ScanTimeout { cap });
            }
        }
        self.prev = Some(finished);
        Ok(DcStep::Read { index: 0, dc: self })
    }

    pub fn encode(&self) -> Value {
        Value::rec(vec![
            match &self.prev {
                None => Value::Bottom,
                Some(values) => Value::Record(values.clone()),
            },
            Value::Record(self.cur.clone()),
            Value::Int(Int::from(self.collects)),
        ])
    }

    pub fn decode(value: &Value) -> Result<DoubleCollect, ProtocolError> {
        let fields = value
            .as_slice()
            .filter(|f| f.len() == 3)
            .ok_or_else(|| ProtocolError::BadState(format!("bad collect state {value}")))?;
        let prev = match field(fields, 0)? {
            Value::Bottom => None,
            Value::Record(values) => Some(values.clone()),
            other => return Err(ProtocolError::BadState(format!("bad prev collect {other}"))),
        };
        let cur = field_slice(fields, 1)?.to_vec();
        let collects = field_u64(fields, 2)?;
        Ok(DoubleCollect { prev, cur, collects })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stabilizes_after_two_equal_collects() {
        let width = 2;
        let mut dc = DoubleCollect::start();
        let mut reads = 0;
        let values = [Value::int(4), Value::int(7)];
        loop {
            let step = dc.feed(values[reads % width].clone(), width, None).unwrap();
            reads += 1;
            match step {
                DcStep::Read { index, dc: next } => {
                    assert_eq!(index, reads % width);
                    dc = next;
                }
                DcStep::Done { snapshot } => {
                    assert_eq!(snapshot, values.to_vec());
                    assert_eq!(reads, 4);
                    break;
                }
            }
        }
    }

    #[test]
    fn cap_surfaces_timeout() {
        let mut dc = DoubleCollect::start();
        let mut tick = 0i64;
        let err = loop {
            tick += 1;
            match dc.feed(Value::int(tick), 1, Some(3)) {
                Ok(DcStep::Read { dc: next, .. }) => dc = next,
                Ok(DcStep::Done { .. }) => panic!("values never repeat"),
                Err(e) => break e,
            }
        };
        assert_eq!(err, ProtocolError::ScanTimeout { cap: 3 });
    }

    #[test]
    fn encode_decode_roundtrip() {
        let dc = DoubleCollect {
            prev: Some(vec![Value::int(1), Value::Bottom]),
            cur: vec![Value::int(2)],
            collects: 5,
        };
        assert_eq!(DoubleCollect::decode(&dc.encode()).unwrap(), dc);
    }
}
