//! Command-line driver: binds run configurations to the simulator's
//! experiment drivers and writes machine-readable results.
//!
//! Every experiment subcommand writes three files with stable names under
//! `--output-dir`: `summary.json` (aggregate metrics), `trace.csv`
//! (per-operation or per-point rows), and `config.resolved` (the fully
//! resolved run configuration, cost model included). Identical arguments
//! and seed produce byte-identical files.
//!
//! Exit codes: 0 success, 2 for bad flags (usage error), 1 for any runtime
//! failure (missing dataset, invalid configuration, failed checks).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pimsim::config::CostModel;
use pimsim::dse::{points_to_csv, run_dse, DseConfig};
use pimsim::frontend::AllocatorKind;
use pimsim::trace::records_to_csv;
use pimsim::verify::run_standard_checks;
use pimsim::workloads::graph::{run_graph_update, GraphDataset, GraphRunConfig, GraphStructure};
use pimsim::workloads::microbench::{
    run_microbench_with_trace, sweep_buddy_cache, sweep_to_csv, MicrobenchSpec,
};

#[derive(Parser)]
#[command(
    name = "pimsim",
    version,
    about = "Deterministic cost simulator for dynamic memory allocation on PIM cores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-size allocation microbenchmark on one PIM core
    Bench(BenchArgs),
    /// Metadata-cache size sensitivity sweep for the hardware-cache allocator
    SweepCache(SweepArgs),
    /// Allocation-strategy comparison across PIM core counts
    Dse(DseArgs),
    /// Graph-update workload: packed adjacency arrays vs allocator-backed lists
    Graph(GraphArgs),
    /// Run the oracle-equivalence and property checks, printing pass/fail per check
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Directory for summary.json, trace.csv, and config.resolved
    #[arg(long, default_value = "runs")]
    output_dir: PathBuf,
    /// Cost-model overrides as TOML (unknown keys rejected)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for workload generation and sampling
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl CommonArgs {
    fn cost_model(&self) -> Result<CostModel> {
        match &self.config {
            None => Ok(CostModel::default()),
            Some(path) => CostModel::from_path(path)
                .with_context(|| format!("loading cost model from {}", path.display())),
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Allocator design: strawman, sw, or hwsw
    #[arg(long, default_value = "sw")]
    allocator: AllocatorKind,
    /// Concurrent tasklets (1..=24), all running the identical script
    #[arg(long, default_value_t = 16)]
    tasklets: u32,
    /// Bytes per allocation request
    #[arg(long, default_value_t = 32)]
    size: u64,
    /// Allocations per tasklet
    #[arg(long, default_value_t = 128)]
    allocs: u32,
    /// Hardware metadata-cache size in bytes (4 bytes per entry)
    #[arg(long, default_value_t = 64)]
    cache_bytes: u64,
    /// Heap size in bytes (power of two)
    #[arg(long, default_value_t = 32 << 20)]
    heap_bytes: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Concurrent tasklets (1..=24)
    #[arg(long, default_value_t = 16)]
    tasklets: u32,
    /// Bytes per allocation request (sizes above 2048 exercise the backend
    /// on every request)
    #[arg(long, default_value_t = 4096)]
    size: u64,
    /// Allocations per tasklet
    #[arg(long, default_value_t = 64)]
    allocs: u32,
    /// Cache sizes to sweep, in bytes, comma-separated
    #[arg(long, value_delimiter = ',', default_values_t = [16u64, 32, 64, 128, 256])]
    cache_bytes: Vec<u64>,
    /// Heap size in bytes (power of two)
    #[arg(long, default_value_t = 32 << 20)]
    heap_bytes: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DseArgs {
    /// PIM core counts to evaluate, comma-separated
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 4, 8, 16, 32, 64, 128, 256, 512])]
    cores: Vec<u32>,
    /// Bytes per allocation request
    #[arg(long, default_value_t = 32)]
    size: u64,
    /// Allocations per core
    #[arg(long, default_value_t = 128)]
    allocs: u32,
    /// Heap size in bytes (power of two)
    #[arg(long, default_value_t = 32 << 20)]
    heap_bytes: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GraphArgs {
    /// Adjacency layout: csr (packed arrays) or dynamic (allocator-backed lists)
    #[arg(long, default_value = "dynamic")]
    structure: GraphStructure,
    /// Allocator design for the dynamic layout: strawman, sw, or hwsw
    #[arg(long, default_value = "hwsw")]
    allocator: AllocatorKind,
    /// PIM cores; nodes are range-partitioned across them by pre-update degree
    #[arg(long, default_value_t = 4)]
    cores: u32,
    /// Tasklets per core applying inserts (dynamic layout)
    #[arg(long, default_value_t = 16)]
    tasklets: u32,
    /// Edge slots per allocated list block
    #[arg(long, default_value_t = 1)]
    entries_per_block: u32,
    /// Hardware metadata-cache size in bytes (4 bytes per entry)
    #[arg(long, default_value_t = 64)]
    cache_bytes: u64,
    /// Heap size in bytes per core (power of two)
    #[arg(long, default_value_t = 32 << 20)]
    heap_bytes: u64,
    /// Edge-list file (whitespace-separated "src dst" lines, # comments);
    /// omitted: a seeded synthetic graph is generated instead
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Keep repeated (src, dst) pairs when ingesting a dataset
    #[arg(long)]
    keep_duplicate_edges: bool,
    /// Synthetic graph node count (used when --dataset is omitted)
    #[arg(long, default_value_t = 300)]
    synthetic_nodes: u32,
    /// Synthetic graph edge count (used when --dataset is omitted)
    #[arg(long, default_value_t = 10_000)]
    synthetic_edges: usize,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => run_bench(args),
        Command::SweepCache(args) => run_sweep(args),
        Command::Dse(args) => run_dse_cmd(args),
        Command::Graph(args) => run_graph(args),
        Command::Verify(args) => run_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Writes the three stable-named output files for one run.
fn write_outputs(
    dir: &Path,
    summary: &impl serde::Serialize,
    trace_csv: Option<&str>,
    resolved: &serde_json::Value,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut summary_text =
        serde_json::to_string_pretty(summary).context("serializing summary")?;
    summary_text.push('\n');
    fs::write(dir.join("summary.json"), summary_text).context("writing summary.json")?;
    if let Some(csv) = trace_csv {
        fs::write(dir.join("trace.csv"), csv).context("writing trace.csv")?;
    }
    let mut resolved_text =
        serde_json::to_string_pretty(resolved).context("serializing resolved config")?;
    resolved_text.push('\n');
    fs::write(dir.join("config.resolved"), resolved_text).context("writing config.resolved")?;
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let cost = args.common.cost_model()?;
    let spec = MicrobenchSpec {
        allocator: args.allocator,
        tasklets: args.tasklets,
        alloc_size: args.size,
        allocs_per_tasklet: args.allocs,
        heap_size: args.heap_bytes,
        cache_bytes: args.cache_bytes,
        sw_buffer_bytes: 64,
        cost,
    };
    let (summary, records) = run_microbench_with_trace(&spec)?;
    let resolved = serde_json::json!({
        "subcommand": "bench",
        "allocator": args.allocator.as_str(),
        "tasklets": args.tasklets,
        "size": args.size,
        "allocs": args.allocs,
        "cache_bytes": args.cache_bytes,
        "heap_bytes": args.heap_bytes,
        "seed": args.common.seed,
        "cost": serde_json::to_value(cost)?,
    });
    write_outputs(
        &args.common.output_dir,
        &summary,
        Some(&records_to_csv(&records)),
        &resolved,
    )?;
    println!(
        "{} x {} B on {} tasklets ({}): mean {:.1} cycles, p99 {} cycles, \
         {:.1}% thread-cache; outputs in {}",
        summary.allocs,
        args.size,
        args.tasklets,
        args.allocator,
        summary.mean_malloc_latency_cycles,
        summary.p99_malloc_latency_cycles,
        summary.frontend_share * 100.0,
        args.common.output_dir.display()
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let cost = args.common.cost_model()?;
    let base = MicrobenchSpec {
        allocator: AllocatorKind::HwSw,
        tasklets: args.tasklets,
        alloc_size: args.size,
        allocs_per_tasklet: args.allocs,
        heap_size: args.heap_bytes,
        cache_bytes: 64,
        sw_buffer_bytes: 64,
        cost,
    };
    let report = sweep_buddy_cache(&base, &args.cache_bytes)?;
    let resolved = serde_json::json!({
        "subcommand": "sweep-cache",
        "tasklets": args.tasklets,
        "size": args.size,
        "allocs": args.allocs,
        "cache_bytes": args.cache_bytes,
        "heap_bytes": args.heap_bytes,
        "seed": args.common.seed,
        "cost": serde_json::to_value(cost)?,
    });
    write_outputs(
        &args.common.output_dir,
        &report,
        Some(&sweep_to_csv(&report)),
        &resolved,
    )?;
    let last = report.points.last().expect("at least one sweep point");
    println!(
        "swept {} cache sizes; at {} B: hit rate {:.3}, speedup {:.2}x over the \
         software buffer; outputs in {}",
        report.points.len(),
        last.cache_bytes,
        last.live_hit_rate,
        last.speedup_vs_sw,
        args.common.output_dir.display()
    );
    Ok(())
}

fn run_dse_cmd(args: DseArgs) -> Result<()> {
    let cost = args.common.cost_model()?;
    let cfg = DseConfig {
        core_counts: args.cores.clone(),
        allocs_per_core: args.allocs,
        alloc_size: args.size,
        heap_size: args.heap_bytes,
        cost,
    };
    let points = run_dse(&cfg)?;
    let resolved = serde_json::json!({
        "subcommand": "dse",
        "cores": args.cores,
        "size": args.size,
        "allocs": args.allocs,
        "heap_bytes": args.heap_bytes,
        "seed": args.common.seed,
        "cost": serde_json::to_value(cost)?,
    });
    let summary = serde_json::json!({ "points": points });
    write_outputs(
        &args.common.output_dir,
        &summary,
        Some(&points_to_csv(&points)),
        &resolved,
    )?;
    println!(
        "priced {} strategy/core-count points; outputs in {}",
        points.len(),
        args.common.output_dir.display()
    );
    Ok(())
}

fn run_graph(args: GraphArgs) -> Result<()> {
    let cost = args.common.cost_model()?;
    let ds = match &args.dataset {
        Some(path) => GraphDataset::load_snap(path, !args.keep_duplicate_edges)?,
        None => GraphDataset::synthetic(
            args.synthetic_nodes,
            args.synthetic_edges,
            args.common.seed,
        )?,
    };
    let cfg = GraphRunConfig {
        structure: args.structure,
        allocator: args.allocator,
        cores: args.cores,
        tasklets: args.tasklets,
        entries_per_block: args.entries_per_block,
        heap_size: args.heap_bytes,
        cache_bytes: args.cache_bytes,
        sw_buffer_bytes: 64,
        cost,
    };
    let report = run_graph_update(&ds, &cfg, (1, 2), args.common.seed)?;
    let resolved = serde_json::json!({
        "subcommand": "graph",
        "structure": args.structure.as_str(),
        "allocator": args.allocator.as_str(),
        "cores": args.cores,
        "tasklets": args.tasklets,
        "entries_per_block": args.entries_per_block,
        "cache_bytes": args.cache_bytes,
        "heap_bytes": args.heap_bytes,
        "dataset": args.dataset.as_ref().map(|p| p.display().to_string()),
        "dedup": !args.keep_duplicate_edges,
        "synthetic_nodes": args.synthetic_nodes,
        "synthetic_edges": args.synthetic_edges,
        "added_to_existing_ratio": "1:2",
        "seed": args.common.seed,
        "cost": serde_json::to_value(cost)?,
    });
    write_outputs(
        &args.common.output_dir,
        &report,
        Some(&records_to_csv(&report.insert_records)),
        &resolved,
    )?;
    println!(
        "{} layout, {} allocator: inserted {} edges into a {}-edge graph; mean \
         {:.1} cycles/insert, {:.3e} edges/s; outputs in {}",
        args.structure.as_str(),
        args.allocator,
        report.inserted_edges,
        report.pre_edges,
        report.mean_insert_latency_cycles,
        report.throughput_edges_per_s,
        args.common.output_dir.display()
    );
    Ok(())
}

fn run_verify(args: CommonArgs) -> Result<()> {
    let checks = run_standard_checks(args.seed);
    for c in &checks {
        println!(
            "{} {} — {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let summary = serde_json::json!({
        "checks": checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "passed": c.passed,
                    "detail": c.detail,
                })
            })
            .collect::<Vec<_>>(),
    });
    let resolved = serde_json::json!({
        "subcommand": "verify",
        "seed": args.seed,
    });
    write_outputs(&args.output_dir, &summary, None, &resolved)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", checks.len());
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
