//! Per-operation trace records and their on-disk formats.
//!
//! Every malloc and free executed by the tasklet engine produces one record
//! capturing when it started (core-local virtual cycles), how long it took,
//! how much of that was mutex busywait, how many metadata DRAM bytes it
//! moved, and which tier serviced it. Records serialize to a fixed-column
//! CSV; ledger totals serialize to JSON.

use crate::frontend::ServiceTier;
use crate::mem::CoreMem;

/// Operation kind for a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Malloc,
    Free,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Malloc => "malloc",
            OpKind::Free => "free",
        }
    }
}

/// One traced allocator operation.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct AllocTraceRecord {
    pub core_id: u32,
    pub tasklet_id: u32,
    pub op: OpKind,
    /// Requested bytes for a malloc; rounded block size for a free.
    pub req_size: u64,
    /// Core-local virtual cycle at which the operation began.
    pub start_cycle: u64,
    /// Total cycles from start to completion, busywait included.
    pub latency_cycles: u64,
    /// Cycles spent spinning on the backend mutex.
    pub busywait_cycles: u64,
    /// Metadata bytes moved between DRAM and the metadata store.
    pub metadata_dram_bytes: u64,
    pub serviced_by: ServiceTier,
}

/// Column order for the trace CSV. Stable: downstream tooling and the
/// baseline-comparison tests rely on byte-identical output.
pub const CSV_HEADER: &str = "core_id,tasklet_id,op,req_size,start_cycle,latency_cycles,busywait_cycles,metadata_dram_bytes,serviced_by";

impl AllocTraceRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.core_id,
            self.tasklet_id,
            self.op.as_str(),
            self.req_size,
            self.start_cycle,
            self.latency_cycles,
            self.busywait_cycles,
            self.metadata_dram_bytes,
            self.serviced_by.as_str()
        )
    }
}

/// Full trace as CSV text (header + one row per record, trailing newline).
pub fn records_to_csv(records: &[AllocTraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

/// Cycle-ledger totals for one core as a JSON value.
pub fn ledger_summary(mem: &CoreMem) -> serde_json::Value {
    let counters = |c: &crate::mem::LedgerCounters| {
        serde_json::json!({
            "run_cycles": c.run_cycles,
            "busywait_cycles": c.busywait_cycles,
            "dram_transfer_cycles": c.dram_transfer_cycles,
            "dram_bytes_moved": c.dram_bytes_moved,
            "cycle_total": c.cycle_total(),
        })
    };
    serde_json::json!({
        "core_id": mem.core_id,
        "total": counters(&mem.ledger.total),
        "per_tasklet": mem
            .ledger
            .per_tasklet
            .iter()
            .map(counters)
            .collect::<Vec<_>>(),
    })
}
