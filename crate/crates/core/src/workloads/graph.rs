//! Dynamic graph update case study: static CSR versus dynamic adjacency
//! lists backed by the allocator.
//!
//! A directed edge list is split into a pre-update graph and an insert
//! stream (`sample_edges`). Nodes are partitioned into contiguous ranges
//! across cores, balanced by pre-update out-degree; each core owns the
//! adjacency state for its range and receives the inserts whose source
//! node it owns.
//!
//! * CSR keeps per-core `node_ptr` and packed edge arrays. Inserting into
//!   the middle of the edge array means shifting the tail and rewriting the
//!   pointer tail, so each insert is charged DRAM traffic proportional to
//!   the bytes it moves — and that grows with the pre-update graph size.
//! * The dynamic layout keeps one head pointer per node (a pinned in-heap
//!   array) and allocates a block per edge (or per `entries_per_block`
//!   edges) through the allocator, splicing it at the list front. Insert
//!   cost is independent of graph size; the allocator is the hot path.
//!
//! After all insertions both layouts must contain the identical edge
//! multiset; `GraphReport::edge_multiset` exposes the canonical sorted form
//! for that check.

use std::collections::HashSet;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::CostModel;
use crate::engine::{list_values, Action, CoreSim, TaskletProgram};
use crate::error::{Result, SimError};
use crate::frontend::{AllocatorConfig, AllocatorKind, ServiceTier};
use crate::mem::{CoreMem, MemGeometry, MAX_TASKLETS};
use crate::trace::AllocTraceRecord;

/// A directed graph as a dense-id edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDataset {
    pub nodes: u32,
    pub edges: Vec<(u32, u32)>,
}

impl GraphDataset {
    /// Parses SNAP-style edge-list text: whitespace-separated "src dst"
    /// lines, `#` comments. Node ids are compacted to `0..nodes` in sorted
    /// order of the original ids. With `dedup`, repeated (src, dst) pairs
    /// keep only their first occurrence.
    pub fn from_snap_str(text: &str, dedup: bool) -> Result<Self> {
        let mut raw: Vec<(u64, u64)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(SimError::Dataset(format!(
                    "line {lineno}: expected 'src dst', got {} fields",
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<u64> {
                s.parse().map_err(|_| {
                    SimError::Dataset(format!("line {lineno}: '{s}' is not a node id"))
                })
            };
            raw.push((parse(fields[0])?, parse(fields[1])?));
        }
        // Compact ids densely, preserving numeric order.
        let ids: std::collections::BTreeSet<u64> =
            raw.iter().flat_map(|&(a, b)| [a, b]).collect();
        let map: std::collections::BTreeMap<u64, u32> = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i as u32))
            .collect();
        let mut edges: Vec<(u32, u32)> = raw.iter().map(|&(a, b)| (map[&a], map[&b])).collect();
        if dedup {
            let mut seen = HashSet::with_capacity(edges.len());
            edges.retain(|e| seen.insert(*e));
        }
        Ok(GraphDataset {
            nodes: map.len() as u32,
            edges,
        })
    }

    /// Loads a SNAP-style edge list from a file.
    pub fn load_snap(path: &std::path::Path, dedup: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Dataset(format!("{}: {e}", path.display())))?;
        Self::from_snap_str(&text, dedup)
    }

    /// Generates a random simple directed graph (no self-loops, no
    /// duplicate edges) with exactly `edge_count` edges, deterministically
    /// from `seed`.
    pub fn synthetic(nodes: u32, edge_count: usize, seed: u64) -> Result<Self> {
        if nodes < 2 {
            return Err(SimError::Dataset("synthetic graph needs >= 2 nodes".into()));
        }
        let possible = nodes as u64 * (nodes as u64 - 1);
        if edge_count as u64 > possible {
            return Err(SimError::Dataset(format!(
                "{edge_count} edges exceed the {possible} possible for {nodes} nodes"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(edge_count);
        let mut edges = Vec::with_capacity(edge_count);
        while edges.len() < edge_count {
            let u = rng.gen_range(0..nodes);
            let v = rng.gen_range(0..nodes);
            if u != v && seen.insert((u, v)) {
                edges.push((u, v));
            }
        }
        Ok(GraphDataset { nodes, edges })
    }
}

/// Splits a dataset's edges into (existing, added) with
/// `|added| : |existing| ≈ added:existing` (added count rounded down).
/// The added stream comes out in shuffled (insertion) order; the existing
/// edges keep dataset order. Deterministic under `seed`.
pub fn sample_edges(
    ds: &GraphDataset,
    ratio: (u32, u32),
    seed: u64,
) -> (Vec<(u32, u32)>, Vec<(u32, u32)>) {
    let (added_parts, existing_parts) = ratio;
    let m = ds.edges.len();
    let added_count = if added_parts + existing_parts == 0 {
        0
    } else {
        m * added_parts as usize / (added_parts + existing_parts) as usize
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let added_idx: HashSet<usize> = order[..added_count].iter().copied().collect();
    let existing = ds
        .edges
        .iter()
        .enumerate()
        .filter(|(i, _)| !added_idx.contains(i))
        .map(|(_, &e)| e)
        .collect();
    let added = order[..added_count].iter().map(|&i| ds.edges[i]).collect();
    (existing, added)
}

/// Contiguous node ranges, one per core, balanced by pre-update out-degree
/// (falling back to node count when there are no pre-update edges).
pub fn partition_nodes(nodes: u32, existing: &[(u32, u32)], cores: u32) -> Vec<Range<u32>> {
    assert!(cores >= 1, "at least one core");
    let mut weight = vec![0u64; nodes as usize];
    for &(u, _) in existing {
        weight[u as usize] += 1;
    }
    if existing.is_empty() {
        weight.iter_mut().for_each(|w| *w = 1);
    }
    let total: u64 = weight.iter().sum();
    let mut ranges = Vec::with_capacity(cores as usize);
    let mut node = 0u32;
    let mut cum = 0u64;
    for core in 0..cores {
        let start = node;
        if core == cores - 1 {
            node = nodes;
        } else {
            let target = (core as u64 + 1) * total / cores as u64;
            while node < nodes && cum < target {
                cum += weight[node as usize];
                node += 1;
            }
        }
        ranges.push(start..node);
    }
    ranges
}

/// Which adjacency layout a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphStructure {
    Csr,
    Dynamic,
}

impl GraphStructure {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphStructure::Csr => "csr",
            GraphStructure::Dynamic => "dynamic",
        }
    }
}

impl std::str::FromStr for GraphStructure {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csr" => Ok(GraphStructure::Csr),
            "dynamic" => Ok(GraphStructure::Dynamic),
            other => Err(SimError::Config(format!(
                "unknown graph structure '{other}' (expected csr or dynamic)"
            ))),
        }
    }
}

/// Parameters for one graph-update run.
#[derive(Debug, Clone, Copy)]
pub struct GraphRunConfig {
    pub structure: GraphStructure,
    pub allocator: AllocatorKind,
    pub cores: u32,
    /// Tasklets per core for the dynamic layout (CSR inserts are serial
    /// per core).
    pub tasklets: u32,
    /// Edge slots per allocated list block.
    pub entries_per_block: u32,
    pub heap_size: u64,
    pub cache_bytes: u64,
    pub sw_buffer_bytes: u64,
    pub cost: CostModel,
}

impl Default for GraphRunConfig {
    fn default() -> Self {
        GraphRunConfig {
            structure: GraphStructure::Dynamic,
            allocator: AllocatorKind::HwSw,
            cores: 4,
            tasklets: 16,
            entries_per_block: 1,
            heap_size: 32 << 20,
            cache_bytes: 64,
            sw_buffer_bytes: 64,
            cost: CostModel::default(),
        }
    }
}

impl GraphRunConfig {
    fn validate(&self) -> Result<()> {
        if self.cores == 0 {
            return Err(SimError::Config("cores must be >= 1".into()));
        }
        if self.tasklets == 0 || self.tasklets > MAX_TASKLETS {
            return Err(SimError::Config(format!(
                "tasklets must be in 1..={MAX_TASKLETS}, got {}",
                self.tasklets
            )));
        }
        if self.entries_per_block == 0 {
            return Err(SimError::Config("entries_per_block must be >= 1".into()));
        }
        if self.cache_bytes == 0 || self.cache_bytes % 4 != 0 {
            return Err(SimError::Config(
                "cache size must be a positive multiple of 4 bytes".into(),
            ));
        }
        Ok(())
    }

    fn allocator_config(&self) -> AllocatorConfig {
        let mut cfg = AllocatorConfig::new(self.allocator);
        cfg.cache_entries = (self.cache_bytes / 4) as usize;
        cfg.sw_buffer_bytes = self.sw_buffer_bytes;
        cfg
    }
}

/// Result of one graph-update run (insert phase unless noted).
#[derive(Debug, Clone, serde::Serialize)]
pub struct GraphReport {
    pub structure: GraphStructure,
    pub allocator: AllocatorKind,
    pub cores: u32,
    pub tasklets: u32,
    pub nodes: u32,
    pub pre_edges: u64,
    pub inserted_edges: u64,
    /// Slowest core's insert-phase makespan in PIM cycles.
    pub makespan_cycles: u64,
    /// Mean per-insert cost across all insert streams.
    pub mean_insert_latency_cycles: f64,
    pub throughput_edges_per_s: f64,
    /// Allocator-metadata bytes moved to/from DRAM over the build and
    /// insert phases, excluding one-time allocator bring-up (zero for CSR,
    /// which performs no allocation).
    pub metadata_dram_bytes: u64,
    /// All other DRAM bytes moved during the insert phase (edge payloads,
    /// pointer splices, CSR shifts).
    pub data_dram_bytes: u64,
    /// Mean latency of insert-phase mallocs serviced by the thread cache.
    pub frontend_mean_latency_cycles: Option<f64>,
    /// Mean latency of insert-phase mallocs that took the backend path
    /// (refills and direct backend allocations).
    pub backend_mean_latency_cycles: Option<f64>,
    /// Backend-path share of aggregate insert-phase malloc latency.
    pub backend_latency_share: Option<f64>,
    /// Canonical post-update content: sorted (src, dst) multiset.
    #[serde(skip)]
    pub edge_multiset: Vec<(u32, u32)>,
    /// Per-allocation trace of the insert phase (empty for the packed
    /// layout, which never allocates).
    #[serde(skip)]
    pub insert_records: Vec<AllocTraceRecord>,
}

/// Samples the dataset at `ratio`, then runs the update experiment.
pub fn run_graph_update(
    ds: &GraphDataset,
    cfg: &GraphRunConfig,
    ratio: (u32, u32),
    seed: u64,
) -> Result<GraphReport> {
    let (existing, added) = sample_edges(ds, ratio, seed);
    run_graph_update_with(ds.nodes, &existing, &added, cfg)
}

/// Runs the update experiment on an explicit (existing, added) split.
pub fn run_graph_update_with(
    nodes: u32,
    existing: &[(u32, u32)],
    added: &[(u32, u32)],
    cfg: &GraphRunConfig,
) -> Result<GraphReport> {
    cfg.validate()?;
    if nodes == 0 {
        return Err(SimError::Dataset("graph has no nodes".into()));
    }
    let ranges = partition_nodes(nodes, existing, cfg.cores);
    match cfg.structure {
        GraphStructure::Dynamic => run_dynamic(nodes, existing, added, &ranges, cfg),
        GraphStructure::Csr => run_csr(nodes, existing, added, &ranges, cfg),
    }
}

/// Routes edges to the core owning their source node.
fn edges_per_core<'a>(
    edges: &'a [(u32, u32)],
    ranges: &[Range<u32>],
) -> Vec<Vec<&'a (u32, u32)>> {
    let mut per_core: Vec<Vec<&(u32, u32)>> = vec![Vec::new(); ranges.len()];
    for e in edges {
        let core = ranges
            .iter()
            .position(|r| r.contains(&e.0))
            .expect("ranges cover all nodes");
        per_core[core].push(e);
    }
    per_core
}

fn mean(sum: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

fn run_dynamic(
    nodes: u32,
    existing: &[(u32, u32)],
    added: &[(u32, u32)],
    ranges: &[Range<u32>],
    cfg: &GraphRunConfig,
) -> Result<GraphReport> {
    let geometry = MemGeometry::with_heap_size(cfg.heap_size);
    let acfg = cfg.allocator_config();
    let existing_per_core = edges_per_core(existing, ranges);
    let added_per_core = edges_per_core(added, ranges);

    let mut makespan = 0u64;
    let mut clock_sum = 0u64;
    let mut metadata_bytes = 0u64;
    let mut data_bytes = 0u64;
    let mut insert_records: Vec<AllocTraceRecord> = Vec::new();
    let mut multiset: Vec<(u32, u32)> = Vec::new();

    for (core_idx, range) in ranges.iter().enumerate() {
        let mut sim = CoreSim::new(core_idx as u32, geometry, cfg.cost, &acfg)?;
        sim.init()?;
        let range_len = range.end.saturating_sub(range.start) as u64;
        if range_len == 0 {
            continue;
        }
        // Pinned head-pointer array, one u32 per owned node, all nil.
        let head_base = sim.setup_malloc(0, range_len * 4)?;
        sim.mem_mut()
            .heap_write(0, head_base, &vec![0xFF; (range_len * 4) as usize])?;
        let meta_after_setup = sim.allocator().store_counters().dram_bytes;

        let programs = |edges: &[&(u32, u32)]| -> Vec<TaskletProgram> {
            let mut progs = vec![TaskletProgram::default(); cfg.tasklets as usize];
            for (i, &&(u, v)) in edges.iter().enumerate() {
                progs[i % cfg.tasklets as usize].actions.push(Action::ListPush {
                    head_addr: head_base + 4 * u64::from(u - range.start),
                    value: v,
                    entries_per_block: cfg.entries_per_block,
                });
            }
            progs
        };

        // Build phase: pre-update graph (charged, not measured).
        if !existing_per_core[core_idx].is_empty() {
            sim.run(&programs(&existing_per_core[core_idx]))?;
        }

        // Insert phase: measured.
        let meta_before = sim.allocator().store_counters().dram_bytes;
        let dram_before = sim.mem().ledger.total.dram_bytes_moved;
        if !added_per_core[core_idx].is_empty() {
            let stats = sim.run(&programs(&added_per_core[core_idx]))?;
            makespan = makespan.max(stats.makespan);
            clock_sum += stats.clock_sum;
            insert_records.extend_from_slice(&sim.records()[stats.first_record..]);
        }
        let meta_delta = sim.allocator().store_counters().dram_bytes - meta_before;
        metadata_bytes += sim.allocator().store_counters().dram_bytes - meta_after_setup;
        data_bytes += (sim.mem().ledger.total.dram_bytes_moved - dram_before) - meta_delta;

        // Decode this core's adjacency lists from the heap.
        let heap = sim.mem().heap_snapshot();
        for node in range.clone() {
            let head_addr = head_base + 4 * u64::from(node - range.start);
            for dst in list_values(heap, head_addr)? {
                multiset.push((node, dst));
            }
        }
    }
    multiset.sort_unstable();

    let n_inserts = added.len() as u64;
    let (fe_sum, fe_n, be_sum, be_n) = insert_records.iter().fold(
        (0u64, 0u64, 0u64, 0u64),
        |(fs, fn_, bs, bn), r| match r.serviced_by {
            ServiceTier::Frontend => (fs + r.latency_cycles, fn_ + 1, bs, bn),
            _ => (fs, fn_, bs + r.latency_cycles, bn + 1),
        },
    );
    Ok(GraphReport {
        structure: GraphStructure::Dynamic,
        allocator: cfg.allocator,
        cores: cfg.cores,
        tasklets: cfg.tasklets,
        nodes,
        pre_edges: existing.len() as u64,
        inserted_edges: n_inserts,
        makespan_cycles: makespan,
        mean_insert_latency_cycles: mean(clock_sum, n_inserts),
        throughput_edges_per_s: if makespan == 0 {
            0.0
        } else {
            n_inserts as f64 / (makespan as f64 / cfg.cost.pim_clock_hz)
        },
        metadata_dram_bytes: metadata_bytes,
        data_dram_bytes: data_bytes,
        frontend_mean_latency_cycles: (fe_n > 0).then(|| mean(fe_sum, fe_n)),
        backend_mean_latency_cycles: (be_n > 0).then(|| mean(be_sum, be_n)),
        backend_latency_share: (fe_sum + be_sum > 0)
            .then(|| be_sum as f64 / (fe_sum + be_sum) as f64),
        edge_multiset: multiset,
        insert_records,
    })
}

/// Per-core CSR state: `node_ptr[i]..node_ptr[i+1]` indexes `edges` for
/// local node `i`.
struct CsrCore {
    range: Range<u32>,
    node_ptr: Vec<u32>,
    edges: Vec<u32>,
}

impl CsrCore {
    /// Bulk-builds from the pre-update edges (grouped by source, dataset
    /// order within a source).
    fn build(range: Range<u32>, pre: &[&(u32, u32)]) -> Self {
        let n = (range.end - range.start) as usize;
        let mut counts = vec![0u32; n + 1];
        for &&(u, _) in pre {
            counts[(u - range.start) as usize + 1] += 1;
        }
        for i in 1..=n {
            counts[i] += counts[i - 1];
        }
        let node_ptr = counts;
        let mut edges = vec![0u32; pre.len()];
        let mut cursor = node_ptr.clone();
        for &&(u, v) in pre {
            let slot = cursor[(u - range.start) as usize];
            edges[slot as usize] = v;
            cursor[(u - range.start) as usize] += 1;
        }
        CsrCore {
            range,
            node_ptr,
            edges,
        }
    }

    /// Inserts (u, v) at the end of u's edge run, charging the tail shift
    /// and pointer-tail rewrite as DRAM traffic.
    fn insert(&mut self, u: u32, v: u32, mem: &mut CoreMem) -> Result<()> {
        let u_local = (u - self.range.start) as usize;
        let pos = self.node_ptr[u_local + 1] as usize;
        mem.alu_ops(0, 2); // locate the run and its end
        let tail_bytes = ((self.edges.len() - pos) * 4) as u64;
        if tail_bytes > 0 {
            mem.dram_transfer(0, tail_bytes)?; // move the displaced tail
        }
        mem.dram_transfer(0, 4)?; // write the new edge
        self.edges.insert(pos, v);
        let ptr_bytes = ((self.node_ptr.len() - (u_local + 1)) * 4) as u64;
        if ptr_bytes > 0 {
            mem.dram_transfer(0, ptr_bytes)?; // rewrite the pointer tail
        }
        for p in &mut self.node_ptr[u_local + 1..] {
            *p += 1;
        }
        Ok(())
    }

    fn multiset(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edges.len());
        for local in 0..self.node_ptr.len() - 1 {
            let node = self.range.start + local as u32;
            for k in self.node_ptr[local]..self.node_ptr[local + 1] {
                out.push((node, self.edges[k as usize]));
            }
        }
        out
    }
}

fn run_csr(
    nodes: u32,
    existing: &[(u32, u32)],
    added: &[(u32, u32)],
    ranges: &[Range<u32>],
    cfg: &GraphRunConfig,
) -> Result<GraphReport> {
    let geometry = MemGeometry::with_heap_size(cfg.heap_size);
    let existing_per_core = edges_per_core(existing, ranges);
    let added_per_core = edges_per_core(added, ranges);

    let mut makespan = 0u64;
    let mut clock_sum = 0u64;
    let mut data_bytes = 0u64;
    let mut multiset: Vec<(u32, u32)> = Vec::new();

    for (core_idx, range) in ranges.iter().enumerate() {
        if range.is_empty() {
            continue;
        }
        let mut mem = CoreMem::new(core_idx as u32, geometry, cfg.cost)?;
        let mut csr = CsrCore::build(range.clone(), &existing_per_core[core_idx]);
        // Build cost: one bulk write of both arrays (not measured).
        let build_bytes = ((csr.node_ptr.len() + csr.edges.len()) * 4) as u64;
        if build_bytes > 0 {
            mem.dram_transfer(0, build_bytes)?;
        }
        let cycles_before = mem.ledger.total.cycle_total();
        let bytes_before = mem.ledger.total.dram_bytes_moved;
        for &&(u, v) in &added_per_core[core_idx] {
            csr.insert(u, v, &mut mem)?;
        }
        let core_cycles = mem.ledger.total.cycle_total() - cycles_before;
        makespan = makespan.max(core_cycles);
        clock_sum += core_cycles;
        data_bytes += mem.ledger.total.dram_bytes_moved - bytes_before;
        multiset.extend(csr.multiset());
    }
    multiset.sort_unstable();

    let n_inserts = added.len() as u64;
    Ok(GraphReport {
        structure: GraphStructure::Csr,
        allocator: cfg.allocator,
        cores: cfg.cores,
        tasklets: 1,
        nodes,
        pre_edges: existing.len() as u64,
        inserted_edges: n_inserts,
        makespan_cycles: makespan,
        mean_insert_latency_cycles: mean(clock_sum, n_inserts),
        throughput_edges_per_s: if makespan == 0 {
            0.0
        } else {
            n_inserts as f64 / (makespan as f64 / cfg.cost.pim_clock_hz)
        },
        metadata_dram_bytes: 0,
        data_dram_bytes: data_bytes,
        frontend_mean_latency_cycles: None,
        backend_mean_latency_cycles: None,
        backend_latency_share: None,
        edge_multiset: multiset,
        insert_records: Vec::new(),
    })
}
