//! Deterministic, cost-annotated simulator of dynamic memory allocation on
//! bank-level processing-in-memory (PIM) cores.
//!
//! The crate models a PIM core's memory system (scratchpad + DRAM bank with
//! a simple latency model), a buddy allocator backend whose 2-bit node
//! metadata is accessed through pluggable stores (software-managed buffer,
//! hardware LRU cache, or uncached), a size-class thread-cache frontend, and
//! a round-robin tasklet engine that produces per-operation latency traces.
//! On top of those sit experiment drivers: fixed-size allocation
//! microbenchmarks, a metadata-cache size sweep, an allocation-strategy
//! design-space comparison, and a dynamic graph-update workload.

pub mod buddy;
pub mod config;
pub mod dse;
pub mod engine;
mod error;
pub mod frontend;
pub mod mem;
pub mod metadata;
pub mod trace;
pub mod verify;
pub mod workloads;

pub use error::{Result, SimError};
