//! Scheduler-visible events.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One event. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub event: String,
    pub core: u32,
    pub family: usize,
    pub thread: Option<i64>,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let thread = match self.thread {
            Some(t) => t.to_string(),
            None => "-".into(),
        };
        write!(
            f,
            "{:>8} core={} fam={} thr={} {} {}",
            self.step,
            self.core,
            self.family,
            thread,
            self.event,
            self.detail.escape_debug()
        )
    }
}
