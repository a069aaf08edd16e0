//! Scenario configuration, run orchestration and data export for the
//! multiagent control laboratory. The binary in this crate wires these
//! pipelines to the command line.

pub mod commands;
pub mod config;
pub mod output;

use swarm_lab::Error;

/// Process exit codes: 0 success (runtime events are findings, not
/// failures), 2 configuration errors, 3 internal numerical faults.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::DimensionMismatch { .. } => 2,
        Error::NumericalBlowup { .. }
        | Error::SingularConfiguration { .. }
        | Error::DegenerateDraw(_) => 3,
    }
}
