//! Simulated SVP chip: cores with finite thread slots and family entries,
//! bulk creation, dataflow channels and a seeded scheduler.

mod exec;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::ir::IrProgram;
use crate::placement::ResolvedPlacement;

pub use trace::TraceEvent;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    pub cores: u32,
    #[serde(alias = "hw-threads")]
    pub hw_threads: u32,
    #[serde(alias = "family-entries")]
    pub family_entries: u32,
    pub seed: u64,
    #[serde(alias = "max-steps")]
    pub max_steps: u64,
    /// Run every family sequentially inside its creator.
    #[serde(alias = "serialize")]
    pub serialize_all: bool,
    /// Pass the incoming shared value on when a thread never writes it.
    #[serde(alias = "forward-unwritten")]
    pub forward_unwritten: bool,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            cores: 4,
            hw_threads: 16,
            family_entries: 8,
            seed: 0,
            max_steps: 10_000_000,
            serialize_all: false,
            forward_unwritten: false,
        }
    }
}

impl MachineConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("cores", self.cores as u64),
            ("hw_threads", self.hw_threads as u64),
            ("family_entries", self.family_entries as u64),
            ("max_steps", self.max_steps),
        ] {
            if v == 0 {
                return Err(format!("{} must be positive", name));
            }
        }
        if self.cores as u64 > crate::placement::SIZE_RADIX - 1 {
            return Err("cores must be below 65536".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    RuntimeError { code: &'static str, message: String },
    Deadlock { report: Vec<String> },
    StepLimit,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::RuntimeError { .. } => 2,
            RunStatus::Deadlock { .. } => 3,
            RunStatus::StepLimit => 4,
        }
    }
}

/// Where one family's threads ran.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub id: usize,
    pub function: String,
    pub serialized: bool,
    pub placement: ResolvedPlacement,
    pub range: (i64, i64, i64),
    pub window: u64,
    /// Per core: the half-open logical index range assigned to it.
    pub distribution: Vec<(u32, i64, i64)>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub output: String,
    pub trace: Vec<TraceEvent>,
    pub steps: u64,
    pub families: Vec<FamilyReport>,
}

/// Run `program` from its entry function to completion, deadlock, error or
/// the step limit.
pub fn run(program: &IrProgram, config: &MachineConfig) -> RunResult {
    exec::Machine::new(program, config).run()
}
