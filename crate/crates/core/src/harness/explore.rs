//! Bounded-exhaustive schedule exploration with memoization.
//!
//! Depth-first search over all interleavings up to a step depth, deduplicated
//! by the canonical configuration fingerprint. A configuration is re-expanded
//! only when reached with more remaining depth than any earlier visit, which
//! keeps the search complete within the bound. At every newly visited
//! configuration each undecided process is additionally run solo against the
//! protocol's solo budget (the obstruction-freedom check).

use std::collections::HashMap;

use super::{
    check_decision, collect_stats, initial_configuration, run, step_process, Outcome,
    RunOptions, Schedule, SetupError, Stats, StepFault, Verdict,
};
use crate::memory::Configuration;
use crate::protocols::Protocol;
use crate::value::Value;

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    /// Maximum number of steps along any explored path.
    pub depth: u32,
    /// Steps a solo run may take before the check fails; defaults to the
    /// protocol's own solo budget.
    pub solo_budget: Option<u64>,
    /// Distinct-configuration cap; exceeding it is reported as inconclusive.
    pub node_cap: u64,
    /// Run the solo-termination check at every configuration. Disable for
    /// safety-only sweeps of protocols that may livelock under contention.
    pub solo_checks: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { depth: 12, solo_budget: None, node_cap: 20_000_000, solo_checks: true }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExploreStats {
    pub configs_visited: u64,
    pub steps_applied: u64,
    pub max_depth_reached: u32,
    pub memo_hits: u64,
    pub max_touched: usize,
    pub solo_runs: u64,
}

struct ExploreCtx<'a> {
    protocol: &'a dyn Protocol,
    inputs: &'a [Value],
    depth: u32,
    solo_checks: bool,
    solo_budget: u64,
    node_cap: u64,
    memo: HashMap<[u8; 16], u32>,
    stats: ExploreStats,
    path: Vec<usize>,
    observer: &'a mut dyn FnMut(&Configuration, &ExploreStats),
}

enum Stop {
    /// For solo-budget violations the schedule is the path to the bad
    /// configuration; for the others it includes the violating steps.
    Violation { outcome: Outcome, schedule: Vec<usize> },
    NodeCap,
}

impl ExploreCtx<'_> {
    /// Solo-runs every undecided process from `config`; each must decide
    /// within the solo budget without violating agreement or validity.
    fn solo_check(&mut self, config: &Configuration) -> Result<(), Stop> {
        for pid in 0..config.processes.len() {
            if !config.processes[pid].is_running() {
                continue;
            }
            self.stats.solo_runs += 1;
            let mut solo = config.clone();
            let mut taken = 0u64;
            loop {
                if !solo.processes[pid].is_running() {
                    break; // decided within budget
                }
                if taken >= self.solo_budget {
                    return Err(Stop::Violation {
                        outcome: Outcome::SoloBudgetExceeded { pid, budget: self.solo_budget },
                        schedule: self.path.clone(),

                    });
                }
                match step_process(self.protocol, &mut solo, pid) {
                    Ok(info) => {
                        taken += 1;
                        self.stats.steps_applied += 1;
                        if let Some(value) = &info.decided {
                            if let Some(bad) = check_decision(&solo, self.inputs, value) {
                                let mut schedule = self.path.clone();
                                schedule.extend(std::iter::repeat(pid).take(taken as usize));
                                return Err(Stop::Violation {
                                    outcome: bad,
                                    schedule,

                                });
                            }
                        }
                    }
                    Err(fault) => {
                        let mut schedule = self.path.clone();
                        schedule.extend(std::iter::repeat(pid).take(taken as usize + 1));
                        return Err(Stop::Violation {
                            outcome: Outcome::ProtocolError { message: fault.to_string() },
                            schedule,

                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn dfs(&mut self, config: &Configuration, remaining: u32) -> Result<(), Stop> {
        let fp = config.fingerprint();
        match self.memo.get(&fp) {
            Some(&seen) if seen >= remaining => {
                self.stats.memo_hits += 1;
                return Ok(());
            }
            _ => {}
        }
        let first_visit = self.memo.insert(fp, remaining).is_none();

        if first_visit {
            self.stats.configs_visited += 1;
            self.stats.max_depth_reached =
                self.stats.max_depth_reached.max(self.depth - remaining);
            self.stats.max_touched = self.stats.max_touched.max(config.memory.touched_count());
            if self.stats.configs_visited > self.node_cap {
                return Err(Stop::NodeCap);
            }
            (self.observer)(config, &self.stats);
            if self.solo_checks {
                self.solo_check(config)?;
            }
        }

        if remaining == 0 {
            return Ok(());
        }
        for pid in 0..config.processes.len() {
            if !config.processes[pid].is_running() {
                continue;
            }
            let mut child = config.clone();
            self.path.push(pid);
            match step_process(self.protocol, &mut child, pid) {
                Ok(info) => {
                    self.stats.steps_applied += 1;
                    if let Some(value) = &info.decided {
                        if let Some(bad) = check_decision(&child, self.inputs, value) {
                            return Err(Stop::Violation {
                                outcome: bad,
                                schedule: self.path.clone(),

                            });
                        }
                    }
                    self.dfs(&child, remaining - 1)?;
                }
                Err(StepFault::NotRunning(_)) => unreachable!("filtered above"),
                Err(fault) => {
                    return Err(Stop::Violation {
                        outcome: Outcome::ProtocolError { message: fault.to_string() },
                        schedule: self.path.clone(),

                    });
                }
            }
            self.path.pop();
        }
        Ok(())
    }
}

/// Exhaustive exploration of one input vector. See the module docs.
pub fn explore(
    protocol: &dyn Protocol,
    inputs: &[Value],
    opts: &ExploreOptions,
) -> Result<Verdict, SetupError> {
    explore_with_observer(protocol, inputs, opts, &mut |_, _| {})
}

/// [`explore`] with a callback invoked once per distinct configuration
/// (progress reporting, test instrumentation).
pub fn explore_with_observer(
    protocol: &dyn Protocol,
    inputs: &[Value],
    opts: &ExploreOptions,
    observer: &mut dyn FnMut(&Configuration, &ExploreStats),
) -> Result<Verdict, SetupError> {
    let root = initial_configuration(protocol, inputs)?;
    let mut ctx = ExploreCtx {
        protocol,
        inputs,
        depth: opts.depth,
        solo_checks: opts.solo_checks,
        solo_budget: opts.solo_budget.unwrap_or_else(|| protocol.solo_budget()),
        node_cap: opts.node_cap,
        memo: HashMap::new(),
        stats: ExploreStats::default(),
        path: Vec::new(),
        observer,
    };

    // Zero-step decisions at the root still need validity checks.
    let mut root_violation = None;
    for value in root.decided_values() {
        if let Some(bad) = check_decision(&root, inputs, &value) {
            root_violation = Some(bad);
            break;
        }
    }

    let result = match root_violation {
        Some(outcome) => {
            Err(Stop::Violation { outcome, schedule: Vec::new() })
        }
        None => ctx.dfs(&root, opts.depth),
    };

    let mut stats = Stats {
        steps: ctx.stats.steps_applied,
        touched_locations: ctx.stats.max_touched,
        max_scans: None,
        decisions: Vec::new(),
        configs_visited: ctx.stats.configs_visited,
    };

    let verdict = match result {
        Ok(()) => Verdict { outcome: Outcome::Ok, stats, witness: None },
        Err(Stop::NodeCap) => Verdict {
            outcome: Outcome::Inconclusive {
                reason: format!("node cap {} exceeded", opts.node_cap),
            },
            stats,
            witness: None,
        },
        Err(Stop::Violation { outcome, schedule}) => {
            // Regenerate the replayable witness trace along the schedule.
            let report = run(
                protocol,
                inputs,
                &Schedule::Replay(schedule),
                &RunOptions { budget: u64::MAX, record_trace: true },
            )?;
            stats.decisions = collect_stats(protocol, &report.final_config).decisions;
            Verdict { outcome, stats, witness: Some(report.trace) }
        }
    };
    Ok(verdict)
}

/// Public exploration statistics accessor used by tests and the CLI: runs
/// [`explore_with_observer`] while tracking the detailed counters.
pub fn explore_counting(
    protocol: &dyn Protocol,
    inputs: &[Value],
    opts: &ExploreOptions,
) -> Result<(Verdict, ExploreStats), SetupError> {
    let mut last = ExploreStats::default();
    let verdict = explore_with_observer(protocol, inputs, opts, &mut |_, stats| {
        last = stats.clone();
    })?;
    Ok((verdict, last))
}
