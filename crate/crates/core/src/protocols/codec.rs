//! Helpers for packing protocol-local state into [`Value`] records.
//!
//! Every protocol state is a record whose first field is an integer phase
//! tag; the remaining fields are phase-specific. These helpers keep the
//! pack/unpack code short and turn shape mismatches into
//! [`ProtocolError::BadState`] instead of panics.

use super::ProtocolError;
use crate::value::{Int, Value};

pub fn tagged(tag: i64, mut fields: Vec<Value>) -> Value {
    let mut items = Vec::with_capacity(fields.len() + 1);
    items.push(Value::int(tag));
    items.append(&mut fields);
    Value::Record(items)
}

pub fn untag(state: &Value) -> Result<(i64, &[Value]), ProtocolError> {
    let items = state
        .as_slice()
        .ok_or_else(|| ProtocolError::BadState(format!("expected record, got {state}")))?;
    let tag = items
        .first()
        .and_then(Value::as_int)
        .and_then(Int::to_i64)
        .ok_or_else(|| ProtocolError::BadState(format!("missing phase tag in {state}")))?;
    Ok((tag, &items[1..]))
}

pub fn field<'a>(fields: &'a [Value], idx: usize) -> Result<&'a Value, ProtocolError> {
    fields
        .get(idx)
        .ok_or_else(|| ProtocolError::BadState(format!("missing field {idx}")))
}

pub fn field_usize(fields: &[Value], idx: usize) -> Result<usize, ProtocolError> {
    field(fields, idx)?
        .to_usize()
        .ok_or_else(|| ProtocolError::BadState(format!("field {idx} is not a small integer")))
}

pub fn field_u64(fields: &[Value], idx: usize) -> Result<u64, ProtocolError> {
    field(fields, idx)?
        .to_u64()
        .ok_or_else(|| ProtocolError::BadState(format!("field {idx} is not a u64")))
}

pub fn field_slice<'a>(fields: &'a [Value], idx: usize) -> Result<&'a [Value], ProtocolError> {
    field(fields, idx)?
        .as_slice()
        .ok_or_else(|| ProtocolError::BadState(format!("field {idx} is not a record")))
}

pub fn counts_from(fields: &[Value], idx: usize) -> Result<Vec<u64>, ProtocolError> {
    field_slice(fields, idx)?
        .iter()
        .map(|v| {
            v.to_u64()
                .ok_or_else(|| ProtocolError::BadState(format!("count field holds {v}")))
        })
        .collect()
}

pub fn counts_value(counts: &[u64]) -> Value {
    Value::Record(counts.iter().map(|&c| Value::Int(Int::from(c))).collect())
}

pub fn response_value(resp: Option<&crate::memory::Response>) -> Result<&Value, ProtocolError> {
    match resp {
        Some(crate::memory::Response::Value(v)) => Ok(v),
        Some(crate::memory::Response::Ack) => {
            Err(ProtocolError::UnexpectedResponse("expected value, got ack".into()))
        }
        None => Err(ProtocolError::UnexpectedResponse("expected a response".into())),
    }
}

pub fn expect_ack(resp: Option<&crate::memory::Response>) -> Result<(), ProtocolError> {
    match resp {
        Some(crate::memory::Response::Ack) => Ok(()),
        Some(crate::memory::Response::Value(v)) => {
            Err(ProtocolError::UnexpectedResponse(format!("expected ack, got {v}")))
        }
        None => Err(ProtocolError::UnexpectedResponse("expected ack, got none".into())),
    }
}
