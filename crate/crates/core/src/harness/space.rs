//! Space measurement: maximum touched-location count across a schedule set.

use super::{run, RunOptions, Schedule, SetupError};
use crate::protocols::Protocol;
use crate::value::Value;

/// The schedule set used for space tables: a solo run per process, a
/// round-robin run, and a few seeded random runs. Combined with mixed input
/// vectors this exercises every declared location of the bounded protocols.
pub fn standard_schedule_set(n: usize) -> Vec<Schedule> {
    let mut schedules: Vec<Schedule> = (0..n).map(Schedule::Solo).collect();
    schedules.push(Schedule::RoundRobin);
    for seed in 0..4u64 {
        schedules.push(Schedule::Random { seed: 0xD15C0 + seed });
    }
    schedules
}

/// Runs every (input vector, schedule) pair and reports the maximum
/// touched-location count observed.
pub fn measure_space(
    protocol: &dyn Protocol,
    input_vectors: &[Vec<Value>],
    schedules: &[Schedule],
    budget: u64,
) -> Result<usize, SetupError> {
    let mut max_touched = 0;
    let opts = RunOptions { budget, record_trace: false };
    for inputs in input_vectors {
        for schedule in schedules {
            let report = run(protocol, inputs, schedule, &opts)?;
            max_touched = max_touched.max(report.verdict.stats.touched_locations);
        }
    }
    Ok(max_touched)
}
