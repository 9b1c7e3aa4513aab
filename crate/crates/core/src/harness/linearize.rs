//! Linearizability checking by exhaustive search over linearization orders.
//!
//! Given a history of operation invocations with real-time intervals, the
//! checker searches for a total order that extends the real-time partial
//! order and replays correctly against a sequential model. Backtracking over
//! minimal pending operations keeps the search exact; histories are expected
//! to stay small (roughly a dozen operations).

use crate::value::Value;

/// A sequential reference object: applying an operation yields the return
/// value the concurrent implementation should have produced.
pub trait SequentialModel: Clone {
    type Op: Clone;
    /// Applies `op`, mutating the model; returns the sequential response.
    fn apply(&mut self, op: &Self::Op) -> Value;
}

/// One completed operation in a concurrent history. `start`/`end` are
/// positions on a common timeline: operation A precedes B in real time
/// iff `A.end < B.start`.
#[derive(Clone, Debug)]
pub struct OpRecord<Op> {
    pub process: usize,
    pub op: Op,
    pub returned: Value,
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinearizeError {
    #[error("history of {got} operations exceeds the search cap of {cap}")]
    SearchTooLarge { got: usize, cap: usize },
    #[error("operations of process {0} overlap each other")]
    OverlappingSameProcess(usize),
}

const SEARCH_CAP: usize = 14;

/// Sequential model of a history object: appends accumulate; a read returns
/// the record of all payloads appended so far.
#[derive(Clone, Debug, Default)]
pub struct HistoryModel {
    appended: Vec<Value>,
}

/// Operations on a history object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HistoryOp {
    Append(Value),
    GetHistory,
}

impl SequentialModel for HistoryModel {
    type Op = HistoryOp;

    fn apply(&mut self, op: &HistoryOp) -> Value {
        match op {
            HistoryOp::Append(v) => {
                self.appended.push(v.clone());
                Value::Bottom // appends return only an acknowledgement
            }
            HistoryOp::GetHistory => Value::Record(self.appended.clone()),
        }
    }
}

fn search<M: SequentialModel>(
    records: &[OpRecord<M::Op>],
    done: &mut [bool],
    remaining: usize,
    model: &M,
    order: &mut Vec<usize>,
) -> bool {
    if remaining == 0 {
        return true;
    }
    'candidates: for i in 0..records.len() {
        if done[i] {
            continue;
        }
        // Minimal = no other pending operation finished before this started.
        for j in 0..records.len() {
            if !done[j] && records[j].end < records[i].start {
                continue 'candidates;
            }
        }
        let mut next = model.clone();
        if next.apply(&records[i].op) == records[i].returned {
            done[i] = true;
            order.push(i);
            if search(records, done, remaining - 1, &next, order) {
                return true;
            }
            order.pop();
            done[i] = false;
        }
    }
    false
}

/// Checks linearizability of `records` against `model`. On success returns
/// `Ok(Some(order))` with one witnessing linearization (indices into
/// `records`); `Ok(None)` means no linearization exists, and the minimal
/// failing prefix is the history itself.
pub fn check_linearizable<M: SequentialModel>(
    records: &[OpRecord<M::Op>],
    model: &M,
) -> Result<Option<Vec<usize>>, LinearizeError> {
    if records.len() > SEARCH_CAP {
        return Err(LinearizeError::SearchTooLarge { got: records.len(), cap: SEARCH_CAP });
    }
    // Operations of one process must be sequential.
    for a in 0..records.len() {
        for b in 0..records.len() {
            if a != b
                && records[a].process == records[b].process
                && !(records[a].end < records[b].start || records[b].end < records[a].start)
            {
                return Err(LinearizeError::OverlappingSameProcess(records[a].process));
            }
        }
    }
    let mut done = vec![false; records.len()];
    let mut order = Vec::with_capacity(records.len());
    if search(records, &mut done, records.len(), model, &mut order) {
        Ok(Some(order))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(process: usize, op: HistoryOp, returned: Value, start: u64, end: u64) -> OpRecord<HistoryOp> {
        OpRecord { process, op, returned, start, end }
    }

    #[test]
    fn sequential_appends_then_get() {
        let a = Value::int(1);
        let b = Value::int(2);
        let records = vec![
            rec(0, HistoryOp::Append(a.clone()), Value::Bottom, 0, 1),
            rec(0, HistoryOp::Append(b.clone()), Value::Bottom, 2, 3),
            rec(1, HistoryOp::GetHistory, Value::Record(vec![a, b]), 4, 5),
        ];
        let order = check_linearizable(&records, &HistoryModel::default()).unwrap();
        assert_eq!(order, Some(vec![0, 1, 2]));
    }

    #[test]
    fn reordered_get_is_rejected() {
        // Appends are real-time ordered a then b, but the read claims (b, a).
        let a = Value::int(1);
        let b = Value::int(2);
        let records = vec![
            rec(0, HistoryOp::Append(a.clone()), Value::Bottom, 0, 1),
            rec(0, HistoryOp::Append(b.clone()), Value::Bottom, 2, 3),
            rec(1, HistoryOp::GetHistory, Value::Record(vec![b, a]), 4, 5),
        ];
        let order = check_linearizable(&records, &HistoryModel::default()).unwrap();
        assert_eq!(order, None);
    }

    #[test]
    fn concurrent_appends_allow_either_order() {
        let a = Value::int(1);
        let b = Value::int(2);
        for observed in [vec![a.clone(), b.clone()], vec![b.clone(), a.clone()]] {
            let records = vec![
                rec(0, HistoryOp::Append(a.clone()), Value::Bottom, 0, 5),
                rec(1, HistoryOp::Append(b.clone()), Value::Bottom, 1, 4),
                rec(2, HistoryOp::GetHistory, Value::Record(observed), 6, 7),
            ];
            let order = check_linearizable(&records, &HistoryModel::default()).unwrap();
            assert!(order.is_some());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let records: Vec<_> = (0..15)
            .map(|i| rec(i, HistoryOp::Append(Value::int(i as i64)), Value::Bottom, 2 * i as u64, 2 * i as u64 + 1))
            .collect();
        assert!(matches!(
            check_linearizable(&records, &HistoryModel::default()),
            Err(LinearizeError::SearchTooLarge { got: 15, cap: 14 })
        ));
    }
}
