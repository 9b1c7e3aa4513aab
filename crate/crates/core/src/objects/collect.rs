//! Double-collect scan: repeatedly collect all locations until two
//! consecutive collects agree. Sound when the underlying values change
//! monotonically or carry unique tags.

use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("double-collect scan exhausted its budget of {budget} reads")]
pub struct Timeout {
    pub budget: u64,
}

/// Runs the double-collect algorithm over `locations`, issuing reads through
/// `read`. Returns a vector of values that all held simultaneously at some
/// point during the scan, or [`Timeout`] once `step_budget` reads have been
/// spent without two equal consecutive collects.
pub fn scan_double_collect<F>(
    mut read: F,
    locations: &[u64],
    step_budget: u64,
) -> Result<Vec<Value>, Timeout>
where
    F: FnMut(u64) -> Value,
{
    let mut spent = 0u64;
    let mut collect_one = |spent: &mut u64| -> Result<Vec<Value>, Timeout> {
        let mut values = Vec::with_capacity(locations.len());
        for &loc in locations {
            if *spent >= step_budget {
                return Err(Timeout { budget: step_budget });
            }
            *spent += 1;
            values.push(read(loc));
        }
        Ok(values)
    };

    let mut prev = collect_one(&mut spent)?;
    loop {
        let cur = collect_one(&mut spent)?;
        if cur == prev {
            return Ok(cur);
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn solo_scan_takes_exactly_two_collects() {
        let reads = Cell::new(0u64);
        let result = scan_double_collect(
            |loc| {
                reads.set(reads.get() + 1);
                Value::int(loc as i64 * 10)
            },
            &[0, 1, 2],
            100,
        )
        .unwrap();
        assert_eq!(result, vec![Value::int(0), Value::int(10), Value::int(20)]);
        assert_eq!(reads.get(), 6); // two collects of three locations
    }

    #[test]
    fn one_interfering_write_forces_third_collect() {
        // Location 1 changes between the first and second collect, so the
        // scan needs a third collect to stabilize.
        let reads = Cell::new(0u64);
        let result = scan_double_collect(
            |loc| {
                let n = reads.get();
                reads.set(n + 1);
                if loc == 1 && n < 2 {
                    Value::int(0)
                } else {
                    Value::int(loc as i64)
                }
            },
            &[0, 1],
            100,
        )
        .unwrap();
        assert_eq!(result, vec![Value::int(0), Value::int(1)]);
        assert_eq!(reads.get(), 6); // three collects of two locations
    }

    #[test]
    fn adversarial_writes_exhaust_budget() {
        let reads = Cell::new(0i64);
        let err = scan_double_collect(
            |_| {
                let n = reads.get();
                reads.set(n + 1);
                Value::int(n) // never repeats: every collect differs
            },
            &[0],
            17,
        )
        .unwrap_err();
        assert_eq!(err, Timeout { budget: 17 });
    }
}
