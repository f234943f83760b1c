//! SL-mini: a C subset with SL concurrency constructs, lowered to an IR of
//! SVP control events and executed on a simulated many-core machine.

pub mod channels;
pub mod check;
pub mod frontend;
pub mod ir;
pub mod lower;
pub mod machine;
pub mod placement;
pub mod value;

pub use check::{analyze, compile, Diagnostic};
pub use ir::{ir_dump, IrProgram};
pub use machine::{run, MachineConfig, RunResult, RunStatus, TraceEvent};
