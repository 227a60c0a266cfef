//! Per-core memory system: bank geometry, the heap byte store, and the
//! cycle ledger through which every other module charges simulated time.
//!
//! A PIM core sees a small on-chip scratchpad (single-cycle) and its DRAM
//! bank (fixed latency plus a per-byte cost). The heap occupies a region of
//! the bank; buddy metadata lives in the bank just above the heap. All cycle
//! and byte accounting is monotone and attributed to a tasklet, so any traced
//! operation can be costed as a before/after counter delta.

use serde::Serialize;

use crate::config::CostModel;
use crate::error::{Result, SimError};

pub type TaskletId = u32;

/// Hard cap on hardware threads per core.
pub const MAX_TASKLETS: u32 = 24;

/// Byte layout of one simulated core's memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemGeometry {
    /// Total DRAM bank capacity in bytes.
    pub bank_size: u64,
    /// Byte offset of the heap region within the bank.
    pub heap_base: u64,
    /// Heap region size in bytes (power of two).
    pub heap_size: u64,
    /// On-chip scratchpad capacity in bytes.
    pub scratchpad_size: u64,
}

impl Default for MemGeometry {
    fn default() -> Self {
        MemGeometry {
            bank_size: 64 << 20,
            heap_base: 0,
            heap_size: 32 << 20,
            scratchpad_size: 64 << 10,
        }
    }
}

impl MemGeometry {
    /// Default geometry with a different heap size.
    pub fn with_heap_size(heap_size: u64) -> Self {
        MemGeometry {
            heap_size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.heap_size.is_power_of_two() {
            return Err(SimError::NotPowerOfTwo {
                what: "heap_size",
                value: self.heap_size,
            });
        }
        if self.heap_base.checked_add(self.heap_size).is_none()
            || self.heap_base + self.heap_size > self.bank_size
        {
            return Err(SimError::Geometry(format!(
                "heap [{:#x}, {:#x}) exceeds bank of {} bytes",
                self.heap_base,
                self.heap_base + self.heap_size,
                self.bank_size
            )));
        }
        Ok(())
    }

    /// First bank address above the heap; buddy metadata is placed here.
    pub fn metadata_base(&self) -> u64 {
        self.heap_base + self.heap_size
    }
}

/// Monotone cycle/byte counters for one accounting bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LedgerCounters {
    /// Compute cycles: ALU ops and scratchpad accesses.
    pub run_cycles: u64,
    /// Cycles spent spinning on a contended mutex.
    pub busywait_cycles: u64,
    /// Cycles spent in DRAM transfers.
    pub dram_transfer_cycles: u64,
    /// Bytes moved to or from DRAM.
    pub dram_bytes_moved: u64,
}

impl LedgerCounters {
    /// All cycles attributed to this bucket (run + busywait + DRAM).
    pub fn cycle_total(&self) -> u64 {
        self.run_cycles + self.busywait_cycles + self.dram_transfer_cycles
    }
}

/// Per-core ledger with a per-tasklet breakdown. Counters only grow.
#[derive(Debug, Clone, Serialize)]
pub struct CycleLedger {
    pub total: LedgerCounters,
    pub per_tasklet: Vec<LedgerCounters>,
}

impl CycleLedger {
    pub fn new(tasklets: u32) -> Self {
        CycleLedger {
            total: LedgerCounters::default(),
            per_tasklet: vec![LedgerCounters::default(); tasklets as usize],
        }
    }

    pub fn tasklet(&self, t: TaskletId) -> &LedgerCounters {
        &self.per_tasklet[t as usize]
    }

    pub fn add_run(&mut self, t: TaskletId, cycles: u64) {
        self.total.run_cycles += cycles;
        self.per_tasklet[t as usize].run_cycles += cycles;
    }

    pub fn add_busywait(&mut self, t: TaskletId, cycles: u64) {
        self.total.busywait_cycles += cycles;
        self.per_tasklet[t as usize].busywait_cycles += cycles;
    }

    pub fn add_dram(&mut self, t: TaskletId, cycles: u64, bytes: u64) {
        self.total.dram_transfer_cycles += cycles;
        self.total.dram_bytes_moved += bytes;
        let pt = &mut self.per_tasklet[t as usize];
        pt.dram_transfer_cycles += cycles;
        pt.dram_bytes_moved += bytes;
    }
}

/// One core's memory system: geometry, cost model, heap bytes, and ledger.
///
/// The heap byte store is mutable only through [`CoreMem::heap_write`], so
/// every payload byte that lands in the heap was paid for in the ledger.
#[derive(Debug, Clone)]
pub struct CoreMem {
    pub core_id: u32,
    pub geometry: MemGeometry,
    pub cost: CostModel,
    pub ledger: CycleLedger,
    heap: Vec<u8>,
}

impl CoreMem {
    pub fn new(core_id: u32, geometry: MemGeometry, cost: CostModel) -> Result<Self> {
        geometry.validate()?;
        cost.validate()?;
        Ok(CoreMem {
            core_id,
            geometry,
            cost,
            ledger: CycleLedger::new(MAX_TASKLETS),
            heap: vec![0u8; geometry.heap_size as usize],
        })
    }

    /// Charges one DRAM transfer of `bytes` and returns its cycle cost.
    pub fn dram_transfer(&mut self, t: TaskletId, bytes: u64) -> Result<u64> {
        if bytes == 0 {
            return Err(SimError::ZeroByteTransfer);
        }
        let cycles = self.cost.dram_transfer_cycles(bytes);
        self.ledger.add_dram(t, cycles, bytes);
        Ok(cycles)
    }

    /// Charges one scratchpad access and returns its cycle cost.
    pub fn scratchpad_access(&mut self, t: TaskletId) -> u64 {
        let cycles = self.cost.scratchpad_access_cycles;
        self.ledger.add_run(t, cycles);
        cycles
    }

    /// Charges `n` ALU operations.
    pub fn alu_ops(&mut self, t: TaskletId, n: u64) -> u64 {
        let cycles = self.cost.alu_op_cycles * n;
        self.ledger.add_run(t, cycles);
        cycles
    }

    fn check_heap_range(&self, offset: u64, len: u64) -> Result<()> {
        if len == 0 {
            return Err(SimError::ZeroByteTransfer);
        }
        if offset.checked_add(len).is_none() || offset + len > self.geometry.heap_size {
            return Err(SimError::HeapOutOfRange {
                offset,
                len,
                heap_size: self.geometry.heap_size,
            });
        }
        Ok(())
    }

    /// Writes payload bytes into the heap, charging one DRAM transfer.
    /// `offset` is heap-relative.
    pub fn heap_write(&mut self, t: TaskletId, offset: u64, data: &[u8]) -> Result<u64> {
        self.check_heap_range(offset, data.len() as u64)?;
        let cycles = self.dram_transfer(t, data.len() as u64)?;
        self.heap[offset as usize..offset as usize + data.len()].copy_from_slice(data);
        Ok(cycles)
    }

    /// Reads payload bytes from the heap, charging one DRAM transfer.
    pub fn heap_read(&mut self, t: TaskletId, offset: u64, len: u64) -> Result<Vec<u8>> {
        self.check_heap_range(offset, len)?;
        self.dram_transfer(t, len)?;
        Ok(self.heap[offset as usize..(offset + len) as usize].to_vec())
    }

    /// Uncharged view of the heap for post-run verification; simulated code
    /// must use [`CoreMem::heap_read`].
    pub fn heap_snapshot(&self) -> &[u8] {
        &self.heap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem() -> CoreMem {
        CoreMem::new(0, MemGeometry::default(), CostModel::default()).unwrap()
    }

    #[test]
    fn dram_transfer_charges_frozen_costs() {
        let mut m = mem();
        assert_eq!(m.dram_transfer(0, 64).unwrap(), 132);
        assert_eq!(m.dram_transfer(1, 1).unwrap(), 101);
        assert_eq!(m.dram_transfer(0, 4096).unwrap(), 2148);
        assert_eq!(m.ledger.total.dram_transfer_cycles, 132 + 101 + 2148);
        assert_eq!(m.ledger.total.dram_bytes_moved, 64 + 1 + 4096);
        assert_eq!(m.ledger.tasklet(0).dram_bytes_moved, 64 + 4096);
        assert_eq!(m.ledger.tasklet(1).dram_bytes_moved, 1);
    }

    #[test]
    fn zero_byte_transfer_is_error() {
        let mut m = mem();
        assert_eq!(m.dram_transfer(0, 0).unwrap_err(), SimError::ZeroByteTransfer);
    }

    #[test]
    fn heap_rw_roundtrip_and_charges() {
        let mut m = mem();
        m.heap_write(2, 4096, &[1, 2, 3, 4]).unwrap();
        let back = m.heap_read(2, 4096, 4).unwrap();
        assert_eq!(back, vec![1, 2, 3, 4]);
        // two transfers of 4 bytes: 2 * (100 + 2)
        assert_eq!(m.ledger.tasklet(2).dram_transfer_cycles, 204);
        assert_eq!(m.ledger.tasklet(2).dram_bytes_moved, 8);
    }

    #[test]
    fn heap_bounds_checked() {
        let mut m = mem();
        let heap = m.geometry.heap_size;
        assert!(matches!(
            m.heap_read(0, heap, 1).unwrap_err(),
            SimError::HeapOutOfRange { .. }
        ));
        assert!(matches!(
            m.heap_write(0, heap - 2, &[0, 0, 0]).unwrap_err(),
            SimError::HeapOutOfRange { .. }
        ));
        assert_eq!(m.heap_write(0, 0, &[]).unwrap_err(), SimError::ZeroByteTransfer);
    }

    #[test]
    fn ledger_counters_are_monotone_and_split_by_tasklet() {
        let mut m = mem();
        m.scratchpad_access(3);
        m.alu_ops(3, 5);
        m.ledger.add_busywait(4, 7);
        assert_eq!(m.ledger.tasklet(3).run_cycles, 6);
        assert_eq!(m.ledger.tasklet(4).busywait_cycles, 7);
        assert_eq!(m.ledger.total.cycle_total(), 6 + 7);
    }

    #[test]
    fn geometry_validation() {
        assert!(MemGeometry::default().validate().is_ok());
        let bad = MemGeometry {
            heap_size: 3000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let too_big = MemGeometry {
            heap_base: 48 << 20,
            heap_size: 32 << 20,
            ..Default::default()
        };
        assert!(too_big.validate().is_err());
        assert_eq!(MemGeometry::default().metadata_base(), 32 << 20);
    }
}
