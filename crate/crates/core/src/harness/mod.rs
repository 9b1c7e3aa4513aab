//! Schedulers, execution engine, and property checkers.
//!
//! [`run`] drives one protocol instance under one schedule and produces a
//! [`Verdict`] plus a replayable [`ExecutionTrace`]. [`explore`] walks every
//! schedule up to a depth with memoized snapshots and solo-termination
//! checks. [`check_linearizable`] validates operation histories against a
//! sequential model, and [`measure_space`] reports touched-location counts.

mod explore;
mod linearize;
mod schedule;
mod space;
mod trace;

pub use explore::{explore, explore_counting, explore_with_observer, ExploreOptions, ExploreStats};
pub use linearize::{
    check_linearizable, HistoryModel, LinearizeError, OpRecord, SequentialModel,
};
pub use schedule::{Schedule, SplitMix64};
pub use space::{measure_space, standard_schedule_set};
pub use trace::{ExecutionTrace, TraceParseError, TraceStep};

use crate::memory::{Configuration, MemoryError, ProcessEntry, ProcessStatus};
use crate::protocols::{Protocol, ProtocolError, Step};
use crate::value::Value;

/// Why an execution stopped, and whether it violated a property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    AgreementViolation { values: Vec<Value> },
    ValidityViolation { value: Value },
    SoloBudgetExceeded { pid: usize, budget: u64 },
    BudgetExhausted,
    ProtocolError { message: String },
    Inconclusive { reason: String },
}

impl Outcome {
    pub fn is_violation(&self) -> bool {
        matches!(
            self,
            Outcome::AgreementViolation { .. }
                | Outcome::ValidityViolation { .. }
                | Outcome::SoloBudgetExceeded { .. }
                | Outcome::ProtocolError { .. }
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Ok => "ok",
            Outcome::AgreementViolation { .. } => "agreement-violation",
            Outcome::ValidityViolation { .. } => "validity-violation",
            Outcome::SoloBudgetExceeded { .. } => "solo-budget-exceeded",
            Outcome::BudgetExhausted => "budget-exhausted",
            Outcome::ProtocolError { .. } => "protocol-error",
            Outcome::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Execution statistics carried by every verdict.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub steps: u64,
    pub touched_locations: usize,
    pub max_scans: Option<u64>,
    /// (pid, decided value) in pid order for decided processes.
    pub decisions: Vec<(usize, Value)>,
    /// Exploration-only: distinct configurations visited.
    pub configs_visited: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub stats: Stats,
    /// Replayable witness; present on every violation verdict.
    pub witness: Option<ExecutionTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetupError {
    #[error("expected {expected} inputs, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Builds the initial configuration: every process's local state plus its
/// first poised instruction. Protocols may decide with zero memory steps.
pub fn initial_configuration(
    protocol: &dyn Protocol,
    inputs: &[Value],
) -> Result<Configuration, SetupError> {
    let n = protocol.num_processes();
    if inputs.len() != n {
        return Err(SetupError::InputCount { expected: n, got: inputs.len() });
    }
    let mut processes = Vec::with_capacity(n);
    for (pid, input) in inputs.iter().enumerate() {
        let state = protocol.init_state(pid, input)?;
        match protocol.transition(pid, &state, None)? {
            Step::Poised { state, location, instruction } => processes.push(ProcessEntry {
                state,
                poised: Some((location, instruction)),
                status: ProcessStatus::Running,
            }),
            Step::Decide(v) => processes.push(ProcessEntry {
                state,
                poised: None,
                status: ProcessStatus::Decided(v),
            }),
        }
    }
    Ok(Configuration { memory: protocol.initial_memory(), processes, steps: 0 })
}

/// Everything a single step can report.
pub(crate) struct StepInfo {
    pub location: u64,
    pub instruction: crate::memory::Instruction,
    pub response: crate::memory::Response,
    pub decided: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub(crate) enum StepFault {
    #[error("process {0} is not running")]
    NotRunning(usize),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("step invariant violated: {0}")]
    Invariant(String),
}

/// Applies one step by `pid`: its poised instruction hits memory, and the
/// response drives the protocol transition.
pub(crate) fn step_process(
    protocol: &dyn Protocol,
    config: &mut Configuration,
    pid: usize,
) -> Result<StepInfo, StepFault> {
    let entry = &config.processes[pid];
    if !entry.is_running() {
        return Err(StepFault::NotRunning(pid));
    }
    let (location, instruction) =
        entry.poised.clone().ok_or(StepFault::NotRunning(pid))?;
    let response = config.memory.apply(location, &instruction)?;
    let state = config.processes[pid].state.clone();
    let step = protocol.transition(pid, &state, Some(&response))?;
    let decided = match step {
        Step::Poised { state, location, instruction } => {
            let entry = &mut config.processes[pid];
            entry.state = state;
            entry.poised = Some((location, instruction));
            None
        }
        Step::Decide(v) => {
            let entry = &mut config.processes[pid];
            entry.poised = None;
            entry.status = ProcessStatus::Decided(v.clone());
            Some(v)
        }
    };
    config.steps += 1;
    protocol.check_step_invariant(config).map_err(StepFault::Invariant)?;
    Ok(StepInfo { location, instruction, response, decided })
}

/// Checks a fresh decision against earlier ones and the inputs. Returns a
/// violation outcome if agreement or validity broke.
pub(crate) fn check_decision(
    config: &Configuration,
    inputs: &[Value],
    value: &Value,
) -> Option<Outcome> {
    if !inputs.contains(value) {
        return Some(Outcome::ValidityViolation { value: value.clone() });
    }
    let decided = config.decided_values();
    if decided.len() > 1 {
        return Some(Outcome::AgreementViolation { values: decided });
    }
    None
}

pub(crate) fn collect_stats(protocol: &dyn Protocol, config: &Configuration) -> Stats {
    let mut max_scans = None;
    for entry in &config.processes {
        if let Some(scans) = protocol.scan_count(&entry.state) {
            max_scans = Some(max_scans.unwrap_or(0).max(scans));
        }
    }
    Stats {
        steps: config.steps,
        touched_locations: config.memory.touched_count(),
        max_scans,
        decisions: config
            .processes
            .iter()
            .enumerate()
            .filter_map(|(pid, p)| p.decided_value().map(|v| (pid, v.clone())))
            .collect(),
        configs_visited: 0,
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Maximum number of steps before reporting budget exhaustion.
    pub budget: u64,
    /// Record the full step trace (turn off for bulk sweeps; violations can
    /// be re-run with recording on).
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { budget: 100_000, record_trace: true }
    }
}

pub struct RunReport {
    pub verdict: Verdict,
    pub trace: ExecutionTrace,
    pub final_config: Configuration,
}

/// Metadata stamped into traces so they are self-contained for replay.
#[derive(Clone, Debug, Default)]
pub struct TraceMeta {
    pub ell: Option<usize>,
    pub variant: Option<String>,
}

/// Runs one execution of `protocol` under `schedule`.
///
/// Deterministic in (protocol, inputs, schedule): identical arguments yield
/// byte-identical traces. Decided processes receive no steps.
pub fn run(
    protocol: &dyn Protocol,
    inputs: &[Value],
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<RunReport, SetupError> {
    run_with_meta(protocol, inputs, schedule, opts, &TraceMeta::default())
}

pub fn run_with_meta(
    protocol: &dyn Protocol,
    inputs: &[Value],
    schedule: &Schedule,
    opts: &RunOptions,
    meta: &TraceMeta,
) -> Result<RunReport, SetupError> {
    let mut config = initial_configuration(protocol, inputs)?;
    let mut trace = ExecutionTrace {
        protocol: protocol.name(),
        n: protocol.num_processes(),
        ell: meta.ell,
        variant: meta.variant.clone(),
        inputs: inputs.iter().map(|v| v.as_int().and_then(|i| i.to_i64()).unwrap_or(0)).collect(),
        steps: Vec::new(),
    };

    // Zero-step decisions (possible for init-deciding protocols) still need
    // validity/agreement checks.
    let mut outcome = Outcome::Ok;
    for value in config.decided_values() {
        if let Some(bad) = check_decision(&config, inputs, &value) {
            outcome = bad;
            break;
        }
    }

    let mut rng = match schedule {
        Schedule::Random { seed } => Some(SplitMix64::new(*seed)),
        _ => None,
    };
    let mut rr_cursor = 0usize;
    let mut replay_pos = 0usize;

    while outcome == Outcome::Ok {
        // Termination condition depends on the schedule.
        let n = config.processes.len();
        let pid = match schedule {
            Schedule::Solo(p) => {
                if *p >= n || !config.processes[*p].is_running() {
                    break;
                }
                *p
            }
            Schedule::RoundRobin => {
                if config.all_decided() {
                    break;
                }
                let mut pick = None;
                for off in 0..n {
                    let cand = (rr_cursor + off) % n;
                    if config.processes[cand].is_running() {
                        pick = Some(cand);
                        rr_cursor = (cand + 1) % n;
                        break;
                    }
                }
                match pick {
                    Some(p) => p,
                    None => break,
                }
            }
            Schedule::Random { .. } => {
                let running: Vec<usize> = (0..n)
                    .filter(|&p| config.processes[p].is_running())
                    .collect();
                if running.is_empty() {
                    break;
                }
                running[rng.as_mut().unwrap().below(running.len() as u64) as usize]
            }
            Schedule::Replay(pids) => {
                if replay_pos >= pids.len() {
                    break;
                }
                let p = pids[replay_pos];
                replay_pos += 1;
                if p >= n || !config.processes[p].is_running() {
                    outcome = Outcome::ProtocolError {
                        message: format!("replay diverged: process {p} cannot take a step"),
                    };
                    break;
                }
                p
            }
        };

        if config.steps >= opts.budget {
            outcome = Outcome::BudgetExhausted;
            break;
        }

        match step_process(protocol, &mut config, pid) {
            Ok(info) => {
                if opts.record_trace {
                    trace.steps.push(TraceStep {
                        index: config.steps - 1,
                        pid,
                        location: info.location,
                        instruction: info.instruction,
                        response: info.response,
                        decided: info.decided.clone(),
                    });
                }
                if let Some(value) = &info.decided {
                    if let Some(bad) = check_decision(&config, inputs, value) {
                        outcome = bad;
                        break;
                    }
                }
            }
            Err(fault) => {
                outcome = Outcome::ProtocolError { message: fault.to_string() };
                break;
            }
        }
    }

    let stats = collect_stats(protocol, &config);
    let witness = if outcome.is_violation() && opts.record_trace {
        Some(trace.clone())
    } else {
        None
    };
    Ok(RunReport { verdict: Verdict { outcome, stats, witness }, trace, final_config: config })
}
