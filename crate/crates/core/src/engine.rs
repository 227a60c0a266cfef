//! Deterministic tasklet engine for one PIM core.
//!
//! Each core runs up to 24 tasklets, every one a scripted sequence of
//! actions. Scheduling is virtual-time discrete-event: each tasklet carries
//! a local cycle clock, and the engine always executes the next action of
//! the runnable tasklet with the smallest clock (ties broken by tasklet id,
//! which degenerates to round-robin when actions cost the same). Actions
//! execute atomically; their cost is the cycle-ledger delta they produce,
//! and the tasklet's clock advances by exactly that amount. Repeated runs
//! of the same script are bit-identical.
//!
//! The backend mutex is modeled in virtual time: a tasklet requesting the
//! lock at cycle `r` is granted it at `max(r, next_free)` and charged the
//! difference as busywait, which is what a spinning tasklet would accrue
//! quantum by quantum. Grants are therefore serialized in request order and
//! critical sections never overlap.

use crate::config::CostModel;
use crate::error::{Result, SimError};
use crate::frontend::{AllocatorConfig, CoreAllocator};
use crate::mem::{CoreMem, MemGeometry, TaskletId, MAX_TASKLETS};
use crate::trace::{AllocTraceRecord, OpKind};

/// Null pointer for in-heap singly linked lists.
pub const LIST_NIL: u32 = u32::MAX;

/// Backend mutex in virtual time. The engine executes one action at a
/// time, so at most one tasklet ever physically holds the lock; contention
/// shows up as busywait charged at acquire.
#[derive(Debug, Default)]
pub struct SimMutex {
    holder: Option<TaskletId>,
    /// Virtual cycle at which the lock is next available.
    next_free: u64,
    pub acquisitions: u64,
    pub contended_acquisitions: u64,
}

impl SimMutex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Grants the lock to `t` requesting at `now`; returns the busywait.
    fn acquire(&mut self, t: TaskletId, now: u64) -> Result<u64> {
        if let Some(h) = self.holder {
            return Err(SimError::MutexProtocol(format!(
                "tasklet {t} acquired the backend mutex while tasklet {h} holds it"
            )));
        }
        let grant = now.max(self.next_free);
        debug_assert!(grant >= self.next_free, "grants must be serialized");
        self.holder = Some(t);
        self.acquisitions += 1;
        let busywait = grant - now;
        if busywait > 0 {
            self.contended_acquisitions += 1;
        }
        Ok(busywait)
    }

    fn release(&mut self, t: TaskletId, now: u64) -> Result<()> {
        match self.holder {
            Some(h) if h == t => {
                self.holder = None;
                // The critical section ends at `now`; the lock can be
                // granted no earlier than that.
                self.next_free = self.next_free.max(now);
                Ok(())
            }
            Some(h) => Err(SimError::MutexProtocol(format!(
                "tasklet {t} released the backend mutex held by tasklet {h}"
            ))),
            None => Err(SimError::MutexProtocol(format!(
                "tasklet {t} released the backend mutex while it was free"
            ))),
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Execution context for one allocator operation: the core's memory, the
/// backend mutex, the calling tasklet, and enough state to reconstruct the
/// current virtual time from the cycle ledger.
pub struct OpCtx<'a> {
    pub mem: &'a mut CoreMem,
    pub mutex: &'a mut SimMutex,
    pub tasklet: TaskletId,
    op_start: u64,
    cycles_at_start: u64,
}

impl<'a> OpCtx<'a> {
    pub fn new(
        mem: &'a mut CoreMem,
        mutex: &'a mut SimMutex,
        tasklet: TaskletId,
        op_start: u64,
    ) -> Self {
        let cycles_at_start = mem.ledger.tasklet(tasklet).cycle_total();
        OpCtx {
            mem,
            mutex,
            tasklet,
            op_start,
            cycles_at_start,
        }
    }

    /// Cycles this tasklet has spent since the operation began.
    pub fn elapsed(&self) -> u64 {
        self.mem.ledger.tasklet(self.tasklet).cycle_total() - self.cycles_at_start
    }

    /// Current virtual time of the calling tasklet.
    pub fn now(&self) -> u64 {
        self.op_start + self.elapsed()
    }

    /// Takes the backend mutex, charging any busywait to the caller.
    pub fn acquire_backend(&mut self) -> Result<()> {
        let busywait = self.mutex.acquire(self.tasklet, self.now())?;
        if busywait > 0 {
            self.mem.ledger.add_busywait(self.tasklet, busywait);
        }
        Ok(())
    }

    pub fn release_backend(&mut self) -> Result<()> {
        let now = self.now();
        self.mutex.release(self.tasklet, now)
    }
}

/// One scripted tasklet action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Allocate `size` bytes; the result is referenced by later `Free`s.
    Malloc { size: u64 },
    /// Free the block produced by this tasklet's action at `target` index.
    Free { target: usize },
    /// Burn `cycles` of local compute.
    Compute { cycles: u64 },
    /// Wait until every tasklet in the run reaches its barrier.
    Barrier,
    /// Push `value` onto the in-heap singly linked list rooted at
    /// `head_addr`. Blocks hold up to `entries_per_block` values; a push
    /// into a full (or absent) head block allocates a fresh block via
    /// malloc and links it at the front.
    ListPush {
        head_addr: u64,
        value: u32,
        entries_per_block: u32,
    },
}

/// Script for one tasklet. Tasklet ids are positional: `programs[i]` runs
/// as tasklet `i`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskletProgram {
    pub actions: Vec<Action>,
}

impl TaskletProgram {
    pub fn new(actions: Vec<Action>) -> Self {
        TaskletProgram { actions }
    }
}

/// Result of one engine phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    /// Max tasklet clock at phase end (phase clocks start at zero).
    pub makespan: u64,
    /// Sum of final tasklet clocks: total busy time across the phase's
    /// streams (per-stream mean cost = clock_sum / actions).
    pub clock_sum: u64,
    /// Index of this phase's first trace record in `CoreSim::records`.
    pub first_record: usize,
    pub record_count: usize,
}

/// One simulated PIM core: memory, allocator, mutex, and the engine state.
#[derive(Debug)]
pub struct CoreSim {
    pub core_id: u32,
    mem: CoreMem,
    allocator: CoreAllocator,
    mutex: SimMutex,
    records: Vec<AllocTraceRecord>,
    init_done: bool,
}

/// List-block layout: `[next: u32][used: u32][slot: u32; entries_per_block]`.
const LIST_BLOCK_HEADER: u64 = 8;

/// Bytes requested from the allocator for one list block.
pub fn list_block_request_bytes(entries_per_block: u32) -> u64 {
    LIST_BLOCK_HEADER + 4 * u64::from(entries_per_block)
}

impl CoreSim {
    pub fn new(
        core_id: u32,
        geometry: MemGeometry,
        cost: CostModel,
        alloc_cfg: &AllocatorConfig,
    ) -> Result<Self> {
        let allocator = CoreAllocator::new(alloc_cfg, &geometry)?;
        let mem = CoreMem::new(core_id, geometry, cost)?;
        Ok(CoreSim {
            core_id,
            mem,
            allocator,
            mutex: SimMutex::new(),
            records: Vec::new(),
            init_done: false,
        })
    }

    pub fn mem(&self) -> &CoreMem {
        &self.mem
    }

    pub fn mem_mut(&mut self) -> &mut CoreMem {
        &mut self.mem
    }

    pub fn allocator(&self) -> &CoreAllocator {
        &self.allocator
    }

    pub fn allocator_mut(&mut self) -> &mut CoreAllocator {
        &mut self.allocator
    }

    pub fn records(&self) -> &[AllocTraceRecord] {
        &self.records
    }

    /// Runs allocator initialization as tasklet 0. This is a setup phase:
    /// its cost lands in the ledger but script clocks start from zero in
    /// each subsequent `run`.
    pub fn init(&mut self) -> Result<()> {
        if self.init_done {
            return Err(SimError::AlreadyInitialized);
        }
        let mut ctx = OpCtx::new(&mut self.mem, &mut self.mutex, 0, 0);
        self.allocator.init_allocator(&mut ctx)?;
        self.init_done = true;
        Ok(())
    }

    /// Executes a single untraced malloc as `t` outside any phase. Drivers
    /// use this for setup allocations (e.g. pinned index arrays) whose cost
    /// should land in the ledger but not in the measured phases.
    pub fn setup_malloc(&mut self, t: TaskletId, size: u64) -> Result<u64> {
        let mut ctx = OpCtx::new(&mut self.mem, &mut self.mutex, t, 0);
        let (offset, _) = self.allocator.malloc(size, &mut ctx)?;
        Ok(offset)
    }

    /// Executes one phase of tasklet scripts to completion.
    pub fn run(&mut self, programs: &[TaskletProgram]) -> Result<RunStats> {
        let n = programs.len();
        if n == 0 {
            return Err(SimError::Script("no tasklet programs".into()));
        }
        if n > MAX_TASKLETS as usize {
            return Err(SimError::Script(format!(
                "{n} tasklet programs exceed the per-core limit of {MAX_TASKLETS}"
            )));
        }
        if self.mutex.holder.is_some() {
            return Err(SimError::MutexProtocol(
                "backend mutex held across a phase boundary".into(),
            ));
        }
        // Phase clocks restart at zero, so the mutex's virtual-time state
        // from earlier phases must not leak in as phantom busywait.
        self.mutex.reset();
        let first_record = self.records.len();
        let mut clocks = vec![0u64; n];
        let mut pc = vec![0usize; n];
        let mut waiting = vec![false; n];
        let mut results: Vec<Vec<Option<u64>>> = programs
            .iter()
            .map(|p| vec![None; p.actions.len()])
            .collect();

        loop {
            let unfinished = (0..n).filter(|&i| pc[i] < programs[i].actions.len());
            let runnable: Vec<usize> = unfinished.clone().filter(|&i| !waiting[i]).collect();
            if runnable.is_empty() {
                let waiters: Vec<usize> = (0..n).filter(|&i| waiting[i]).collect();
                if waiters.is_empty() {
                    break; // all tasklets ran to completion
                }
                if waiters.len() != unfinished.count() {
                    return Err(SimError::Script(
                        "deadlock: tasklets blocked with no barrier release possible".into(),
                    ));
                }
                // Barrier release: everyone still running has arrived.
                let release_at = waiters.iter().map(|&i| clocks[i]).max().unwrap_or(0);
                for i in waiters {
                    clocks[i] = release_at;
                    waiting[i] = false;
                    pc[i] += 1;
                }
                continue;
            }
            let i = *runnable
                .iter()
                .min_by_key(|&&i| (clocks[i], i))
                .expect("runnable not empty");
            let t = i as TaskletId;
            match programs[i].actions[pc[i]].clone() {
                Action::Compute { cycles } => {
                    self.mem.ledger.add_run(t, cycles);
                    clocks[i] += cycles;
                    pc[i] += 1;
                }
                Action::Barrier => {
                    waiting[i] = true; // pc advances on release
                }
                Action::Malloc { size } => {
                    let start = clocks[i];
                    let (offset, latency) = self.traced_malloc(t, size, start)?;
                    results[i][pc[i]] = Some(offset);
                    clocks[i] = start + latency;
                    pc[i] += 1;
                }
                Action::Free { target } => {
                    let start = clocks[i];
                    let offset = match results[i].get(target).copied().flatten() {
                        Some(off) if target < pc[i] => off,
                        _ => {
                            return Err(SimError::Script(format!(
                                "tasklet {t} free target {target} is not an outstanding \
                                 allocation"
                            )))
                        }
                    };
                    results[i][target] = None;
                    let latency = self.traced_free(t, offset, start)?;
                    clocks[i] = start + latency;
                    pc[i] += 1;
                }
                Action::ListPush {
                    head_addr,
                    value,
                    entries_per_block,
                } => {
                    let start = clocks[i];
                    let (new_block, latency) =
                        self.list_push(t, head_addr, value, entries_per_block, start)?;
                    results[i][pc[i]] = new_block;
                    clocks[i] = start + latency;
                    pc[i] += 1;
                }
            }
        }
        let makespan = clocks.iter().copied().max().unwrap_or(0);
        Ok(RunStats {
            makespan,
            clock_sum: clocks.iter().sum(),
            first_record,
            record_count: self.records.len() - first_record,
        })
    }

    /// Runs a malloc at virtual time `start`, records it, and returns
    /// `(offset, total latency)`.
    fn traced_malloc(&mut self, t: TaskletId, size: u64, start: u64) -> Result<(u64, u64)> {
        let before = *self.mem.ledger.tasklet(t);
        let meta_before = self.allocator.store_counters().dram_bytes;
        let mut ctx = OpCtx::new(&mut self.mem, &mut self.mutex, t, start);
        let (offset, tier) = self.allocator.malloc(size, &mut ctx)?;
        let after = self.mem.ledger.tasklet(t);
        let latency = after.cycle_total() - before.cycle_total();
        self.push_record(AllocTraceRecord {
            core_id: self.core_id,
            tasklet_id: t,
            op: OpKind::Malloc,
            req_size: size,
            start_cycle: start,
            latency_cycles: latency,
            busywait_cycles: after.busywait_cycles - before.busywait_cycles,
            metadata_dram_bytes: self.allocator.store_counters().dram_bytes - meta_before,
            serviced_by: tier,
        });
        Ok((offset, latency))
    }

    /// Runs a free at virtual time `start`, records it, returns latency.
    fn traced_free(&mut self, t: TaskletId, offset: u64, start: u64) -> Result<u64> {
        let before = *self.mem.ledger.tasklet(t);
        let meta_before = self.allocator.store_counters().dram_bytes;
        let mut ctx = OpCtx::new(&mut self.mem, &mut self.mutex, t, start);
        let (freed_size, tier) = self.allocator.free(offset, &mut ctx)?;
        let after = self.mem.ledger.tasklet(t);
        let latency = after.cycle_total() - before.cycle_total();
        self.push_record(AllocTraceRecord {
            core_id: self.core_id,
            tasklet_id: t,
            op: OpKind::Free,
            req_size: freed_size,
            start_cycle: start,
            latency_cycles: latency,
            busywait_cycles: after.busywait_cycles - before.busywait_cycles,
            metadata_dram_bytes: self.allocator.store_counters().dram_bytes - meta_before,
            serviced_by: tier,
        });
        Ok(latency)
    }

    /// Pushes `value` onto the list at `head_addr`. Appends into the head
    /// block when it has a free slot; otherwise mallocs a new block (traced
    /// like any malloc) and links it at the front. Returns the new block's
    /// offset (if one was allocated) and the action's total latency.
    fn list_push(
        &mut self,
        t: TaskletId,
        head_addr: u64,
        value: u32,
        entries_per_block: u32,
        start: u64,
    ) -> Result<(Option<u64>, u64)> {
        if entries_per_block == 0 {
            return Err(SimError::Script("entries_per_block must be >= 1".into()));
        }
        let before_total = self.mem.ledger.tasklet(t).cycle_total();
        let head_bytes = self.mem.heap_read(t, head_addr, 4)?;
        let head = u32::from_le_bytes(head_bytes.try_into().expect("4 bytes"));
        if head != LIST_NIL {
            let used_bytes = self.mem.heap_read(t, u64::from(head) + 4, 4)?;
            let used = u32::from_le_bytes(used_bytes.try_into().expect("4 bytes"));
            if used < entries_per_block {
                // Room in the head block: append in place, no allocation.
                let slot = u64::from(head) + LIST_BLOCK_HEADER + 4 * u64::from(used);
                self.mem.heap_write(t, slot, &value.to_le_bytes())?;
                self.mem
                    .heap_write(t, u64::from(head) + 4, &(used + 1).to_le_bytes())?;
                let latency = self.mem.ledger.tasklet(t).cycle_total() - before_total;
                return Ok((None, latency));
            }
        }
        // Head absent or full: allocate and splice a fresh block.
        let req = list_block_request_bytes(entries_per_block);
        let elapsed = self.mem.ledger.tasklet(t).cycle_total() - before_total;
        let (offset, _) = self.traced_malloc(t, size_checked(req)?, start + elapsed)?;
        let mut block = Vec::with_capacity(req as usize);
        block.extend_from_slice(&head.to_le_bytes()); // next
        block.extend_from_slice(&1u32.to_le_bytes()); // used
        block.extend_from_slice(&value.to_le_bytes()); // slot 0
        block.resize(req as usize, 0);
        self.mem.heap_write(t, offset, &block)?;
        let offset32 = u32::try_from(offset).map_err(|_| {
            SimError::Script(format!("list block offset {offset:#x} exceeds u32"))
        })?;
        self.mem.heap_write(t, head_addr, &offset32.to_le_bytes())?;
        let latency = self.mem.ledger.tasklet(t).cycle_total() - before_total;
        Ok((Some(offset), latency))
    }

    fn push_record(&mut self, rec: AllocTraceRecord) {
        self.records.push(rec);
    }
}

fn size_checked(req: u64) -> Result<u64> {
    if req == 0 {
        Err(SimError::ZeroSizeAlloc)
    } else {
        Ok(req)
    }
}

/// Decodes the values of an in-heap list (verification helper; walks a raw
/// heap snapshot and charges nothing). Values are returned in walk order:
/// newest block first, slots within a block in insertion order.
pub fn list_values(heap: &[u8], head_addr: u64) -> Result<Vec<u32>> {
    let read_u32 = |addr: u64| -> Result<u32> {
        let a = addr as usize;
        heap.get(a..a + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| SimError::Script(format!("list pointer {addr:#x} out of heap")))
    };
    let mut values = Vec::new();
    let mut ptr = read_u32(head_addr)?;
    let mut hops = 0u64;
    while ptr != LIST_NIL {
        hops += 1;
        if hops > heap.len() as u64 / LIST_BLOCK_HEADER {
            return Err(SimError::Script("list walk exceeded heap capacity (cycle?)".into()));
        }
        let used = read_u32(u64::from(ptr) + 4)?;
        for k in 0..used {
            values.push(read_u32(u64::from(ptr) + LIST_BLOCK_HEADER + 4 * u64::from(k))?);
        }
        ptr = read_u32(u64::from(ptr))?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::AllocatorKind;

    fn small_geometry() -> MemGeometry {
        MemGeometry {
            bank_size: 1 << 20,
            heap_base: 0,
            heap_size: 32 * 1024,
            scratchpad_size: 64 * 1024,
        }
    }

    fn strawman_sim() -> CoreSim {
        let mut sim = CoreSim::new(
            0,
            small_geometry(),
            CostModel::default(),
            &AllocatorConfig::new(AllocatorKind::Strawman),
        )
        .unwrap();
        sim.init().unwrap();
        sim
    }

    #[test]
    fn compute_actions_advance_clocks_independently() {
        let mut sim = strawman_sim();
        let stats = sim
            .run(&[
                TaskletProgram::new(vec![Action::Compute { cycles: 10 }]),
                TaskletProgram::new(vec![Action::Compute { cycles: 5 }]),
            ])
            .unwrap();
        assert_eq!(stats.makespan, 10);
        assert_eq!(stats.record_count, 0);
    }

    #[test]
    fn second_contender_busywaits_for_the_full_critical_section() {
        // Two tasklets issue a malloc at virtual time zero. The engine runs
        // tasklet 0 first (id tie-break); tasklet 1 then requests the mutex
        // at its own time zero and must busywait until tasklet 0's release.
        // Because the straw-man malloc holds the mutex for its entire
        // duration, tasklet 1's busywait equals tasklet 0's whole latency.
        let mut sim = strawman_sim();
        sim.run(&[
            TaskletProgram::new(vec![Action::Malloc { size: 32 }]),
            TaskletProgram::new(vec![Action::Malloc { size: 32 }]),
        ])
        .unwrap();
        let recs = sim.records();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].tasklet_id, 0);
        assert_eq!(recs[0].busywait_cycles, 0);
        assert_eq!(recs[1].tasklet_id, 1);
        assert_eq!(recs[1].busywait_cycles, recs[0].latency_cycles);
        // Tasklet 1's critical section begins exactly when tasklet 0's op
        // completes: the sections are serialized back to back.
        assert_eq!(
            recs[1].start_cycle + recs[1].busywait_cycles,
            recs[0].start_cycle + recs[0].latency_cycles
        );
        assert!(recs[1].latency_cycles > recs[1].busywait_cycles);
        assert_eq!(sim.mutex.contended_acquisitions, 1);
    }

    #[test]
    fn min_clock_scheduling_lets_the_idle_tasklet_go_first() {
        let mut sim = strawman_sim();
        sim.run(&[
            TaskletProgram::new(vec![
                Action::Compute { cycles: 10_000 },
                Action::Malloc { size: 32 },
            ]),
            TaskletProgram::new(vec![
                Action::Compute { cycles: 10 },
                Action::Malloc { size: 32 },
            ]),
        ])
        .unwrap();
        let recs = sim.records();
        assert_eq!(recs[0].tasklet_id, 1, "tasklet 1 reaches its malloc first");
        assert_eq!(recs[0].start_cycle, 10);
        assert_eq!(recs[1].tasklet_id, 0);
        assert_eq!(recs[1].start_cycle, 10_000);
        // Tasklet 1 released the mutex long before cycle 10000: no busywait.
        assert!(recs[0].start_cycle + recs[0].latency_cycles < 10_000);
        assert_eq!(recs[1].busywait_cycles, 0);
    }

    #[test]
    fn barrier_joins_all_tasklets_at_the_max_arrival() {
        let mut sim = strawman_sim();
        let stats = sim
            .run(&[
                TaskletProgram::new(vec![
                    Action::Compute { cycles: 100 },
                    Action::Barrier,
                    Action::Compute { cycles: 1 },
                ]),
                TaskletProgram::new(vec![
                    Action::Compute { cycles: 5 },
                    Action::Barrier,
                    Action::Compute { cycles: 1 },
                ]),
            ])
            .unwrap();
        assert_eq!(stats.makespan, 101);
    }

    #[test]
    fn free_by_reference_restores_the_heap() {
        let mut sim = strawman_sim();
        sim.run(&[TaskletProgram::new(vec![
            Action::Malloc { size: 48 },
            Action::Malloc { size: 32 },
            Action::Free { target: 0 },
            Action::Free { target: 1 },
        ])])
        .unwrap();
        assert!(sim.allocator().backend().is_all_free());
        let recs = sim.records();
        assert_eq!(recs[2].op, OpKind::Free);
        assert_eq!(recs[2].req_size, 64, "freed size is the rounded size");
        assert_eq!(recs[3].req_size, 32);
    }

    #[test]
    fn freeing_an_unallocated_reference_is_a_script_error() {
        let mut sim = strawman_sim();
        let err = sim
            .run(&[TaskletProgram::new(vec![
                Action::Malloc { size: 32 },
                Action::Free { target: 0 },
                Action::Free { target: 0 },
            ])])
            .unwrap_err();
        assert!(matches!(err, SimError::Script(_)), "got {err:?}");
    }

    #[test]
    fn list_push_links_blocks_front_first() {
        let mut sim = strawman_sim();
        // Heap cell 0..4 acts as the list head; initialize it to nil with a
        // raw (charged) write before the measured phase.
        sim.mem_mut().heap_write(0, 0, &LIST_NIL.to_le_bytes()).unwrap();
        // Reserve the head cell so the allocator never hands it out.
        let head_block = {
            let mut ctx = OpCtx::new(&mut sim.mem, &mut sim.mutex, 0, 0);
            sim.allocator.malloc(4, &mut ctx).unwrap().0
        };
        assert_eq!(head_block, 0);
        sim.mem_mut().heap_write(0, 0, &LIST_NIL.to_le_bytes()).unwrap();
        sim.run(&[TaskletProgram::new(vec![
            Action::ListPush {
                head_addr: 0,
                value: 11,
                entries_per_block: 1,
            },
            Action::ListPush {
                head_addr: 0,
                value: 22,
                entries_per_block: 1,
            },
            Action::ListPush {
                head_addr: 0,
                value: 33,
                entries_per_block: 1,
            },
        ])])
        .unwrap();
        assert_eq!(sim.records().len(), 3, "every push allocated a block");
        let values = list_values(sim.mem().heap_snapshot(), 0).unwrap();
        assert_eq!(values, vec![33, 22, 11]);
    }

    #[test]
    fn list_push_fills_multi_entry_blocks_before_allocating() {
        let mut sim = strawman_sim();
        sim.mem_mut().heap_write(0, 0, &LIST_NIL.to_le_bytes()).unwrap();
        let head_block = {
            let mut ctx = OpCtx::new(&mut sim.mem, &mut sim.mutex, 0, 0);
            sim.allocator.malloc(4, &mut ctx).unwrap().0
        };
        assert_eq!(head_block, 0);
        sim.mem_mut().heap_write(0, 0, &LIST_NIL.to_le_bytes()).unwrap();
        let push = |v: u32| Action::ListPush {
            head_addr: 0,
            value: v,
            entries_per_block: 2,
        };
        sim.run(&[TaskletProgram::new(vec![push(1), push(2), push(3)])])
            .unwrap();
        assert_eq!(
            sim.records().len(),
            2,
            "three pushes into two-entry blocks allocate twice"
        );
        let values = list_values(sim.mem().heap_snapshot(), 0).unwrap();
        assert_eq!(values.len(), 3);
        let mut sorted = values.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![1, 2, 3]);
        assert_eq!(values[0], 3, "newest block walks first");
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let script = vec![
            TaskletProgram::new(vec![
                Action::Malloc { size: 100 },
                Action::Compute { cycles: 7 },
                Action::Free { target: 0 },
                Action::Malloc { size: 32 },
            ]),
            TaskletProgram::new(vec![
                Action::Malloc { size: 64 },
                Action::Free { target: 0 },
                Action::Malloc { size: 2048 },
            ]),
        ];
        let run = || {
            let mut sim = strawman_sim();
            let stats = sim.run(&script).unwrap();
            (
                stats.makespan,
                sim.records().to_vec(),
                sim.mem().ledger.total,
            )
        };
        let (m1, r1, l1) = run();
        let (m2, r2, l2) = run();
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn mutex_rejects_release_by_non_holder() {
        let mut m = SimMutex::new();
        assert_eq!(m.acquire(0, 10).unwrap(), 0);
        assert!(m.release(1, 20).is_err());
        m.release(0, 20).unwrap();
        // Next acquire at an earlier request time still waits for the
        // release point.
        assert_eq!(m.acquire(1, 5).unwrap(), 15);
    }

    #[test]
    fn too_many_programs_is_a_script_error() {
        let mut sim = strawman_sim();
        let programs = vec![TaskletProgram::default(); MAX_TASKLETS as usize + 1];
        assert!(matches!(
            sim.run(&programs).unwrap_err(),
            SimError::Script(_)
        ));
    }
}
