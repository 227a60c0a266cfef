//! Workload generators and experiment drivers.
//!
//! * [`microbench`] — the fixed-size allocation microbenchmark (every
//!   tasklet mallocs the same size a fixed number of times) and the buddy
//!   hardware-cache size sweep built on top of it.
//! * [`graph`] — the dynamic graph update case study: inserting sampled
//!   edges into a static CSR layout (array shifting) versus a dynamic
//!   adjacency-list layout (per-edge allocation through the allocator).

pub mod graph;
pub mod microbench;
