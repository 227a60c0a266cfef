//! Fixed-size allocation microbenchmark and the buddy-cache size sweep.
//!
//! The microbenchmark runs `tasklets` identical scripts, each calling
//! malloc `allocs_per_tasklet` times for the same size, and aggregates the
//! per-operation trace into latency, contention, and service-tier metrics.
//! Small sizes measure the thread-cache fast path; sizes above the largest
//! class (2 KiB) force every request through the buddy backend and its
//! metadata store, which is what the cache sweep exploits.
//!
//! The sweep reruns the backend-heavy benchmark at several hardware-cache
//! sizes and reports two hit-rate views per size: the live rate measured in
//! that run, and a replay rate obtained by replaying one reference run's
//! access log through an LRU stack-distance model. Replay rates come from
//! a single trace, so LRU inclusion makes them provably non-decreasing in
//! cache size; live rates can wobble slightly because latency changes
//! reorder the tasklet interleaving.

use crate::config::CostModel;
use crate::engine::{Action, CoreSim, RunStats, TaskletProgram};
use crate::error::{Result, SimError};
use crate::frontend::{AllocatorConfig, AllocatorKind, ServiceTier};
use crate::mem::{MemGeometry, MAX_TASKLETS};
use crate::metadata::{lru_stack_hit_rates, StoreCounters};
use crate::trace::AllocTraceRecord;

/// Parameters for one microbenchmark run.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MicrobenchSpec {
    pub allocator: AllocatorKind,
    /// Concurrent tasklets, 1..=24; all run the identical script.
    pub tasklets: u32,
    pub alloc_size: u64,
    pub allocs_per_tasklet: u32,
    pub heap_size: u64,
    /// Hardware buddy-cache size in bytes (4 bytes per entry); hwsw only.
    pub cache_bytes: u64,
    /// Software metadata buffer capacity in bytes; strawman and sw.
    pub sw_buffer_bytes: u64,
    #[serde(skip)]
    pub cost: CostModel,
}

impl MicrobenchSpec {
    pub fn new(allocator: AllocatorKind, tasklets: u32, alloc_size: u64) -> Self {
        MicrobenchSpec {
            allocator,
            tasklets,
            alloc_size,
            allocs_per_tasklet: 128,
            heap_size: 32 << 20,
            cache_bytes: 64,
            sw_buffer_bytes: 64,
            cost: CostModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasklets == 0 || self.tasklets > MAX_TASKLETS {
            return Err(SimError::Config(format!(
                "tasklets must be in 1..={MAX_TASKLETS}, got {}",
                self.tasklets
            )));
        }
        if self.allocs_per_tasklet == 0 {
            return Err(SimError::Config("allocs_per_tasklet must be >= 1".into()));
        }
        cache_entries(self.cache_bytes)?;
        Ok(())
    }

    fn allocator_config(&self) -> Result<AllocatorConfig> {
        let mut cfg = AllocatorConfig::new(self.allocator);
        cfg.cache_entries = cache_entries(self.cache_bytes)?;
        cfg.sw_buffer_bytes = self.sw_buffer_bytes;
        Ok(cfg)
    }
}

/// Converts a cache size in bytes to whole 4-byte entries.
fn cache_entries(cache_bytes: u64) -> Result<usize> {
    if cache_bytes == 0 || cache_bytes % 4 != 0 {
        return Err(SimError::Config(format!(
            "cache size must be a positive multiple of 4 bytes, got {cache_bytes}"
        )));
    }
    Ok((cache_bytes / 4) as usize)
}

/// Malloc counts by service tier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct TierCounts {
    pub frontend: u64,
    pub frontend_refill: u64,
    pub backend: u64,
}

/// Aggregated result of one microbenchmark run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchSummary {
    pub allocator: AllocatorKind,
    pub tasklets: u32,
    pub alloc_size: u64,
    pub allocs: u64,
    pub makespan_cycles: u64,
    pub mean_malloc_latency_cycles: f64,
    pub p99_malloc_latency_cycles: u64,
    pub max_malloc_latency_cycles: u64,
    /// Busywait cycles as a fraction of total traced latency.
    pub busywait_share: f64,
    pub tier_counts: TierCounts,
    /// Fraction of mallocs serviced entirely by the thread cache.
    pub frontend_share: f64,
    /// Metadata bytes moved between DRAM and the metadata store.
    pub metadata_dram_bytes: u64,
    pub store: StoreCounters,
    pub store_hit_rate: f64,
    pub throughput_allocs_per_s: f64,
}

/// Builds the simulator, runs the benchmark phase, and returns the core,
/// the phase stats, and the phase's metadata-store counter movement
/// (allocator bring-up excluded). When logging is requested it starts
/// before allocator bring-up, so the log and the store's whole-run
/// counters share one cold-start point.
fn run_bench_sim(
    spec: &MicrobenchSpec,
    log_accesses: bool,
) -> Result<(CoreSim, RunStats, StoreCounters)> {
    spec.validate()?;
    let geometry = MemGeometry::with_heap_size(spec.heap_size);
    let mut sim = CoreSim::new(0, geometry, spec.cost, &spec.allocator_config()?)?;
    if log_accesses {
        sim.allocator_mut()
            .backend_mut()
            .store_mut()
            .set_access_logging(true);
    }
    sim.init()?;
    let store_before = sim.allocator().store_counters();
    let program = TaskletProgram::new(vec![
        Action::Malloc {
            size: spec.alloc_size,
        };
        spec.allocs_per_tasklet as usize
    ]);
    let programs = vec![program; spec.tasklets as usize];
    let stats = sim.run(&programs)?;
    let store = sim.allocator().store_counters().since(store_before);
    Ok((sim, stats, store))
}

/// Summarizes a slice of malloc records plus run-level counters.
fn summarize(
    spec: &MicrobenchSpec,
    records: &[AllocTraceRecord],
    stats: RunStats,
    store: StoreCounters,
) -> BenchSummary {
    let n = records.len() as u64;
    let mut latencies: Vec<u64> = records.iter().map(|r| r.latency_cycles).collect();
    latencies.sort_unstable();
    let sum_latency: u64 = latencies.iter().sum();
    let sum_busywait: u64 = records.iter().map(|r| r.busywait_cycles).sum();
    let mut tiers = TierCounts::default();
    for r in records {
        match r.serviced_by {
            ServiceTier::Frontend => tiers.frontend += 1,
            ServiceTier::FrontendRefill => tiers.frontend_refill += 1,
            ServiceTier::Backend => tiers.backend += 1,
        }
    }
    let p99_idx = ((n as f64 * 0.99).ceil() as usize).clamp(1, latencies.len()) - 1;
    let makespan_s = stats.makespan as f64 / spec.cost.pim_clock_hz;
    BenchSummary {
        allocator: spec.allocator,
        tasklets: spec.tasklets,
        alloc_size: spec.alloc_size,
        allocs: n,
        makespan_cycles: stats.makespan,
        mean_malloc_latency_cycles: sum_latency as f64 / n as f64,
        p99_malloc_latency_cycles: latencies[p99_idx],
        max_malloc_latency_cycles: *latencies.last().expect("n >= 1"),
        busywait_share: if sum_latency == 0 {
            0.0
        } else {
            sum_busywait as f64 / sum_latency as f64
        },
        tier_counts: tiers,
        frontend_share: tiers.frontend as f64 / n as f64,
        metadata_dram_bytes: records.iter().map(|r| r.metadata_dram_bytes).sum(),
        store,
        store_hit_rate: store.hit_rate(),
        throughput_allocs_per_s: n as f64 / makespan_s,
    }
}

/// Runs the microbenchmark and aggregates its trace.
pub fn run_microbench(spec: &MicrobenchSpec) -> Result<BenchSummary> {
    let (sim, stats, store) = run_bench_sim(spec, false)?;
    let records = &sim.records()[stats.first_record..];
    Ok(summarize(spec, records, stats, store))
}

/// Runs the microbenchmark and also returns the trace records (the CLI
/// writes them out as CSV).
pub fn run_microbench_with_trace(
    spec: &MicrobenchSpec,
) -> Result<(BenchSummary, Vec<AllocTraceRecord>)> {
    let (sim, stats, store) = run_bench_sim(spec, false)?;
    let records = sim.records()[stats.first_record..].to_vec();
    let summary = summarize(spec, &records, stats, store);
    Ok((summary, records))
}

/// One cache size in the sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepPoint {
    pub cache_bytes: u64,
    pub entries: usize,
    /// Hit rate measured live in this size's own run, whole run from the
    /// cache's cold start (same coverage as the replay trace).
    pub live_hit_rate: f64,
    /// Hit rate from replaying the reference run's access log at this
    /// capacity (monotone in capacity by LRU inclusion).
    pub replay_hit_rate: f64,
    pub mean_malloc_latency_cycles: f64,
    /// Software-allocator mean latency divided by this point's mean.
    pub speedup_vs_sw: f64,
}

/// Sweep output: the software-allocator baseline plus one point per size.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepReport {
    pub sw_mean_latency_cycles: f64,
    pub reference_cache_bytes: u64,
    pub points: Vec<SweepPoint>,
}

/// Runs the buddy-cache sensitivity sweep. `base` fixes the workload
/// (sizes above 2 KiB exercise the backend on every request); the
/// allocator field is overridden per run.
pub fn sweep_buddy_cache(base: &MicrobenchSpec, cache_sizes: &[u64]) -> Result<SweepReport> {
    if cache_sizes.is_empty() {
        return Err(SimError::Config("sweep needs at least one cache size".into()));
    }
    let entries_list: Vec<usize> = cache_sizes
        .iter()
        .map(|&b| cache_entries(b))
        .collect::<Result<_>>()?;

    // Software-allocator baseline on the identical workload.
    let sw_spec = MicrobenchSpec {
        allocator: AllocatorKind::Sw,
        ..*base
    };
    let sw_mean = run_microbench(&sw_spec)?.mean_malloc_latency_cycles;

    // Reference run at the base cache size records the access log once.
    let ref_spec = MicrobenchSpec {
        allocator: AllocatorKind::HwSw,
        ..*base
    };
    let (ref_sim, _, _) = run_bench_sim(&ref_spec, true)?;
    let log = ref_sim
        .allocator()
        .backend()
        .store()
        .access_log()
        .ok_or_else(|| SimError::CacheProtocol("reference run produced no access log".into()))?
        .to_vec();
    let replay_rates = lru_stack_hit_rates(&log, &entries_list);

    let mut points = Vec::with_capacity(cache_sizes.len());
    for (i, &cache_bytes) in cache_sizes.iter().enumerate() {
        let spec = MicrobenchSpec {
            allocator: AllocatorKind::HwSw,
            cache_bytes,
            ..*base
        };
        let (sim, stats, store) = run_bench_sim(&spec, false)?;
        let records = &sim.records()[stats.first_record..];
        let summary = summarize(&spec, records, stats, store);
        points.push(SweepPoint {
            cache_bytes,
            entries: entries_list[i],
            live_hit_rate: sim.allocator().store_counters().hit_rate(),
            replay_hit_rate: replay_rates[i],
            mean_malloc_latency_cycles: summary.mean_malloc_latency_cycles,
            speedup_vs_sw: sw_mean / summary.mean_malloc_latency_cycles,
        });
    }
    Ok(SweepReport {
        sw_mean_latency_cycles: sw_mean,
        reference_cache_bytes: base.cache_bytes,
        points,
    })
}

pub const SWEEP_CSV_HEADER: &str =
    "cache_bytes,entries,live_hit_rate,replay_hit_rate,mean_malloc_latency_cycles,speedup_vs_sw";

/// Sweep report as CSV text.
pub fn sweep_to_csv(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in &report.points {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.3},{:.4}\n",
            p.cache_bytes,
            p.entries,
            p.live_hit_rate,
            p.replay_hit_rate,
            p.mean_malloc_latency_cycles,
            p.speedup_vs_sw
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_thread_small_allocs_are_all_frontend_hits() {
        let spec = MicrobenchSpec::new(AllocatorKind::Sw, 1, 32);
        let s = run_microbench(&spec).unwrap();
        assert_eq!(s.allocs, 128);
        // 4096/32 = 128 sub-blocks pre-populated: every call hits.
        assert_eq!(s.tier_counts.frontend, 128);
        assert_eq!(s.frontend_share, 1.0);
        assert_eq!(s.mean_malloc_latency_cycles, 5.0);
        assert_eq!(s.p99_malloc_latency_cycles, 5);
        assert_eq!(s.busywait_share, 0.0);
        assert_eq!(s.metadata_dram_bytes, 0);
    }

    #[test]
    fn straw_man_is_far_slower_than_the_software_allocator() {
        let strawman = run_microbench(&MicrobenchSpec::new(AllocatorKind::Strawman, 1, 32))
            .unwrap();
        let sw = run_microbench(&MicrobenchSpec::new(AllocatorKind::Sw, 1, 32)).unwrap();
        assert!(
            strawman.mean_malloc_latency_cycles >= 8.0 * sw.mean_malloc_latency_cycles,
            "strawman {} vs sw {}",
            strawman.mean_malloc_latency_cycles,
            sw.mean_malloc_latency_cycles
        );
    }

    #[test]
    fn contention_shows_up_as_busywait_for_the_straw_man() {
        let one = run_microbench(&MicrobenchSpec::new(AllocatorKind::Strawman, 1, 32)).unwrap();
        let sixteen =
            run_microbench(&MicrobenchSpec::new(AllocatorKind::Strawman, 16, 32)).unwrap();
        assert_eq!(one.busywait_share, 0.0);
        assert!(
            sixteen.busywait_share > 0.5,
            "16 contending tasklets should spend most of their time spinning, share={}",
            sixteen.busywait_share
        );
        assert!(sixteen.mean_malloc_latency_cycles > 4.0 * one.mean_malloc_latency_cycles);
    }

    #[test]
    fn bypass_size_goes_backend_on_every_request() {
        let spec = MicrobenchSpec {
            allocs_per_tasklet: 32,
            ..MicrobenchSpec::new(AllocatorKind::HwSw, 4, 4096)
        };
        let s = run_microbench(&spec).unwrap();
        assert_eq!(s.tier_counts.backend, s.allocs);
        assert_eq!(s.frontend_share, 0.0);
        assert!(s.metadata_dram_bytes > 0);
        assert!(s.store.accesses() > 0);
    }

    #[test]
    fn hwsw_beats_sw_on_backend_heavy_work() {
        let base = MicrobenchSpec {
            allocs_per_tasklet: 64,
            ..MicrobenchSpec::new(AllocatorKind::Sw, 16, 4096)
        };
        let sw = run_microbench(&base).unwrap();
        let hwsw = run_microbench(&MicrobenchSpec {
            allocator: AllocatorKind::HwSw,
            ..base
        })
        .unwrap();
        assert!(
            hwsw.mean_malloc_latency_cycles <= 0.8 * sw.mean_malloc_latency_cycles,
            "hwsw {} vs sw {}",
            hwsw.mean_malloc_latency_cycles,
            sw.mean_malloc_latency_cycles
        );
    }

    #[test]
    fn summaries_are_deterministic() {
        let spec = MicrobenchSpec {
            allocs_per_tasklet: 16,
            ..MicrobenchSpec::new(AllocatorKind::HwSw, 8, 4096)
        };
        let a = run_microbench(&spec).unwrap();
        let b = run_microbench(&spec).unwrap();
        assert_eq!(a.makespan_cycles, b.makespan_cycles);
        assert_eq!(
            a.mean_malloc_latency_cycles.to_bits(),
            b.mean_malloc_latency_cycles.to_bits()
        );
        assert_eq!(a.store, b.store);
    }

    #[test]
    fn sweep_replay_rates_are_monotone_and_live_runs_agree_at_reference() {
        let base = MicrobenchSpec {
            allocs_per_tasklet: 32,
            ..MicrobenchSpec::new(AllocatorKind::HwSw, 16, 4096)
        };
        let sizes = [8u64, 16, 32, 64, 128];
        let report = sweep_buddy_cache(&base, &sizes).unwrap();
        for w in report.points.windows(2) {
            assert!(
                w[1].replay_hit_rate >= w[0].replay_hit_rate,
                "replay rates must be non-decreasing: {:?}",
                report.points
            );
        }
        // At the reference size the replayed trace is the live trace, so
        // the two rates coincide.
        let at_ref = report
            .points
            .iter()
            .find(|p| p.cache_bytes == base.cache_bytes)
            .unwrap();
        assert!(
            (at_ref.live_hit_rate - at_ref.replay_hit_rate).abs() < 1e-12,
            "live {} vs replay {}",
            at_ref.live_hit_rate,
            at_ref.replay_hit_rate
        );
        // Larger caches never slow the benchmark down.
        assert!(report.points.last().unwrap().speedup_vs_sw >= report.points[0].speedup_vs_sw);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = MicrobenchSpec::new(AllocatorKind::Sw, 0, 32);
        assert!(spec.validate().is_err());
        spec.tasklets = 25;
        assert!(spec.validate().is_err());
        spec.tasklets = 4;
        spec.cache_bytes = 6;
        assert!(spec.validate().is_err());
        spec.cache_bytes = 64;
        spec.allocs_per_tasklet = 0;
        assert!(spec.validate().is_err());
    }
}
