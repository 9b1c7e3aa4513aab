//! A workbench for obstruction-free consensus over uniform shared-memory
//! instruction sets: a deterministic step-level simulator, a library of
//! consensus protocols and simulated objects built from single-instruction
//! steps, and a verification harness that checks agreement, validity,
//! termination bounds, linearizability, and space usage.

pub mod memory;
pub mod objects;
pub mod protocols;
pub mod harness;
pub mod value;
