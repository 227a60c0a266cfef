//! Design-space exploration: where should allocation metadata live, and
//! who should execute the allocator?
//!
//! Four strategies are priced, the cross product of metadata placement
//! (host DRAM vs. PIM bank) and executor (host CPU vs. PIM core), for a
//! straw-man buddy workload of `allocs_per_core` small allocations on each
//! of `num_cores` banks:
//!
//! * `pim_meta_pim_exec` — metadata on-bank, PIM cores execute. Every core
//!   works in parallel on private state, so the wall time is one core's
//!   makespan plus a single kernel launch, independent of core count.
//! * `host_meta_host_exec` — the host allocates on behalf of all cores from
//!   host-resident metadata. Per-core streams are independent but share
//!   `host_threads` CPU threads, so time grows once cores exceed threads.
//!   Host metadata accesses are priced at DRAM latency: with hundreds of
//!   per-core metadata images in flight the tree walk has no cache locality.
//! * `host_meta_pim_exec` — PIM cores execute, but each core's metadata
//!   image must cross the shared bus to the bank before the kernel and back
//!   after it (the host owns it). Transfers serialize on the bus.
//! * `pim_meta_host_exec` — the host executes, but every tree-node access
//!   is a word-sized round trip over the shared bus. Accesses from all
//!   streams serialize on the bus.
//!
//! Measurement happens in the simulator (one PIM engine run, one
//! host-profile buddy run); per-strategy numbers are closed-form over those
//! measurements, so a whole sweep is two simulations plus arithmetic.

use crate::buddy::BuddyTree;
use crate::config::CostModel;
use crate::engine::{Action, CoreSim, TaskletProgram};
use crate::error::Result;
use crate::frontend::{AllocatorConfig, AllocatorKind};
use crate::mem::{CoreMem, MemGeometry};
use crate::metadata::StoreKind;

/// Metadata placement axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataLoc {
    Host,
    Pim,
}

/// Executor axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecLoc {
    Host,
    Pim,
}

/// One corner of the design space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Strategy {
    pub metadata: MetadataLoc,
    pub executor: ExecLoc,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy {
            metadata: MetadataLoc::Pim,
            executor: ExecLoc::Pim,
        },
        Strategy {
            metadata: MetadataLoc::Host,
            executor: ExecLoc::Host,
        },
        Strategy {
            metadata: MetadataLoc::Host,
            executor: ExecLoc::Pim,
        },
        Strategy {
            metadata: MetadataLoc::Pim,
            executor: ExecLoc::Host,
        },
    ];

    pub fn label(&self) -> &'static str {
        match (self.metadata, self.executor) {
            (MetadataLoc::Pim, ExecLoc::Pim) => "pim_meta_pim_exec",
            (MetadataLoc::Host, ExecLoc::Host) => "host_meta_host_exec",
            (MetadataLoc::Host, ExecLoc::Pim) => "host_meta_pim_exec",
            (MetadataLoc::Pim, ExecLoc::Host) => "pim_meta_host_exec",
        }
    }
}

/// Sweep parameters.
#[derive(Debug, Clone)]
pub struct DseConfig {
    pub core_counts: Vec<u32>,
    pub allocs_per_core: u32,
    pub alloc_size: u64,
    pub heap_size: u64,
    pub cost: CostModel,
}

impl Default for DseConfig {
    fn default() -> Self {
        DseConfig {
            core_counts: vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512],
            allocs_per_core: 128,
            alloc_size: 32,
            heap_size: 32 << 20,
            cost: CostModel::default(),
        }
    }
}

/// Raw simulator measurements the strategy arithmetic builds on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DseMeasurements {
    /// Makespan (PIM cycles) of one core running the allocation stream
    /// through the straw-man allocator with on-bank metadata.
    pub pim_makespan_cycles: u64,
    /// Host cycles for the same stream executed host-side with metadata
    /// accesses priced at DRAM latency.
    pub host_run_cycles: u64,
    /// Metadata-store accesses issued by the host-side stream.
    pub host_metadata_accesses: u64,
    /// Host cycles of the stream that are pure local work (everything
    /// except the metadata-access latency itself).
    pub host_local_cycles: u64,
    /// Bytes of one core's packed buddy metadata image.
    pub metadata_footprint_bytes: u64,
}

/// One priced point: a strategy at a core count. Times are seconds.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StrategyPoint {
    pub strategy: &'static str,
    pub num_cores: u32,
    /// Wall time divided by the per-core allocation count: mean time per
    /// allocation slot as the application experiences it.
    pub avg_latency_s: f64,
    pub compute_s: f64,
    pub transfer_s: f64,
    pub launch_s: f64,
    pub total_s: f64,
}

/// Runs the two reference simulations.
pub fn measure(cfg: &DseConfig) -> Result<DseMeasurements> {
    let geometry = MemGeometry::with_heap_size(cfg.heap_size);

    // PIM side: straw-man allocator under the tasklet engine, one tasklet.
    let alloc_cfg = AllocatorConfig::new(AllocatorKind::Strawman);
    let mut sim = CoreSim::new(0, geometry, cfg.cost, &alloc_cfg)?;
    sim.init()?;
    let program = TaskletProgram::new(vec![
        Action::Malloc {
            size: cfg.alloc_size,
        };
        cfg.allocs_per_core as usize
    ]);
    let stats = sim.run(&[program])?;
    let footprint = sim.allocator().backend().metadata_footprint();

    // Host side: the same buddy walk, metadata accesses at DRAM latency.
    let host_cost = CostModel {
        scratchpad_access_cycles: cfg.cost.dram_fixed_cycles,
        ..cfg.cost
    };
    let mut mem = CoreMem::new(0, geometry, host_cost)?;
    let mut tree = BuddyTree::new(
        cfg.heap_size,
        crate::frontend::STRAWMAN_MIN_BLOCK,
        geometry.metadata_base(),
        StoreKind::Direct,
    )?;
    tree.init(&mut mem, 0)?;
    let cycles_base = mem.ledger.total.cycle_total();
    let accesses_base = tree.store_counters().accesses();
    for _ in 0..cfg.allocs_per_core {
        tree.alloc(cfg.alloc_size, &mut mem, 0)?;
    }
    let host_run_cycles = mem.ledger.total.cycle_total() - cycles_base;
    let host_metadata_accesses = tree.store_counters().accesses() - accesses_base;

    Ok(DseMeasurements {
        pim_makespan_cycles: stats.makespan,
        host_run_cycles,
        host_metadata_accesses,
        host_local_cycles: host_run_cycles
            - host_metadata_accesses * cfg.cost.dram_fixed_cycles,
        metadata_footprint_bytes: footprint,
    })
}

/// Prices one strategy at one core count from the measurements.
pub fn evaluate(
    cfg: &DseConfig,
    m: &DseMeasurements,
    strategy: Strategy,
    num_cores: u32,
) -> StrategyPoint {
    let cost = &cfg.cost;
    let f_pim = cost.pim_clock_hz;
    let f_host = cost.host_clock_hz;
    let launch = cost.launch_fixed_cycles as f64 / f_host;
    let host_batches = num_cores.div_ceil(cost.host_threads) as f64;
    let cores = num_cores as f64;

    let (compute_s, transfer_s, launch_s) = match (strategy.metadata, strategy.executor) {
        (MetadataLoc::Pim, ExecLoc::Pim) => {
            // All cores run in parallel on private metadata.
            (m.pim_makespan_cycles as f64 / f_pim, 0.0, launch)
        }
        (MetadataLoc::Host, ExecLoc::Host) => {
            // Per-core streams round-robin over the host thread pool.
            (
                host_batches * m.host_run_cycles as f64 / f_host,
                0.0,
                0.0,
            )
        }
        (MetadataLoc::Host, ExecLoc::Pim) => {
            // Ship each core's metadata image to its bank, run the kernels
            // in parallel, ship the images back. Bus transfers serialize.
            let image = cost.bus_transfer_cycles(m.metadata_footprint_bytes) as f64;
            (
                m.pim_makespan_cycles as f64 / f_pim,
                2.0 * cores * image / f_host,
                launch,
            )
        }
        (MetadataLoc::Pim, ExecLoc::Host) => {
            // Host-side walk, but every tree-node access is a word-sized
            // bus round trip; all streams contend for the one bus.
            let per_access = cost.bus_transfer_cycles(4) as f64;
            (
                host_batches * m.host_local_cycles as f64 / f_host,
                cores * m.host_metadata_accesses as f64 * per_access / f_host,
                0.0,
            )
        }
    };
    let total_s = compute_s + transfer_s + launch_s;
    StrategyPoint {
        strategy: strategy.label(),
        num_cores,
        avg_latency_s: total_s / cfg.allocs_per_core as f64,
        compute_s,
        transfer_s,
        launch_s,
        total_s,
    }
}

/// Full sweep: every strategy at every core count, in declaration order.
pub fn run_dse(cfg: &DseConfig) -> Result<Vec<StrategyPoint>> {
    let m = measure(cfg)?;
    let mut points = Vec::with_capacity(Strategy::ALL.len() * cfg.core_counts.len());
    for strategy in Strategy::ALL {
        for &cores in &cfg.core_counts {
            points.push(evaluate(cfg, &m, strategy, cores));
        }
    }
    Ok(points)
}

pub const DSE_CSV_HEADER: &str =
    "strategy,num_cores,avg_latency_s,compute_s,transfer_s,launch_s,total_s";

/// Sweep results as CSV text (stable column order, scientific notation).
pub fn points_to_csv(points: &[StrategyPoint]) -> String {
    let mut out = String::new();
    out.push_str(DSE_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
            p.strategy, p.num_cores, p.avg_latency_s, p.compute_s, p.transfer_s, p.launch_s,
            p.total_s
        ));
    }
    out
}
