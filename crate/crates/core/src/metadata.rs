//! Metadata store gateway: the single path for buddy-tree state reads and
//! writes, with pluggable caching.
//!
//! The authoritative node-state array (2 bits per node, packed four per
//! byte) lives in simulated DRAM just above the heap. Three store variants
//! mediate access to it:
//!
//! * [`SwMetadataBuffer`] — software-managed scratchpad buffer holding one
//!   contiguous capacity-aligned region; a miss flushes the dirty buffer and
//!   refills the whole region (whole-capacity DRAM transfers).
//! * [`BuddyCache`] — small fully associative hardware cache with exact LRU
//!   replacement; entries are 4-byte DRAM words (16 node states), misses
//!   fetch exactly 4 bytes, writes go through to DRAM.
//! * [`DirectStore`] — uncharged-by-DRAM model used for host-side execution
//!   (each access costs one scratchpad-class cycle charge).
//!
//! All cycle and byte costs are charged through the provided [`CoreMem`].

use crate::error::{Result, SimError};
use crate::mem::{CoreMem, TaskletId};

/// Buddy-tree node occupancy state, stored as 2 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum NodeState {
    /// Entire region free (and every descendant free).
    Free = 0,
    /// Region split; allocations live somewhere below.
    Split = 1,
    /// Region entirely consumed (allocated here, or both children full).
    Full = 2,
}

impl NodeState {
    pub fn from_bits(bits: u8) -> NodeState {
        match bits {
            0 => NodeState::Free,
            1 => NodeState::Split,
            2 => NodeState::Full,
            other => panic!("corrupt node state bits {other:#b}"),
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }
}

/// The packed node-state array resident in simulated DRAM.
///
/// Raw accessors here are uncharged; all charged traffic goes through a
/// store variant. `base` is the absolute bank address of byte 0.
#[derive(Debug, Clone)]
pub struct MetadataDram {
    base: u64,
    bytes: Vec<u8>,
}

impl MetadataDram {
    /// Allocates an image of at least `min_bytes`, rounded up to a multiple
    /// of `round_to` so coarse-grained transfers stay in bounds.
    pub fn new(base: u64, min_bytes: u64, round_to: u64) -> Self {
        let len = min_bytes.div_ceil(round_to) * round_to;
        MetadataDram {
            base,
            bytes: vec![0u8; len as usize],
        }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn len(&self) -> u64 {
        self.bytes.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Absolute DRAM address of the byte holding `node`'s state.
    pub fn byte_addr(&self, node: u64) -> u64 {
        self.base + node / 4
    }

    /// Absolute, 4-byte-aligned DRAM address of the word holding `node`.
    pub fn word_addr(&self, node: u64) -> u64 {
        self.byte_addr(node) & !3
    }

    fn read_node_raw(&self, node: u64) -> NodeState {
        let byte = self.bytes[(node / 4) as usize];
        NodeState::from_bits((byte >> ((node % 4) * 2)) & 0b11)
    }

    fn write_node_raw(&mut self, node: u64, s: NodeState) {
        let slot = &mut self.bytes[(node / 4) as usize];
        let shift = (node % 4) * 2;
        *slot = (*slot & !(0b11 << shift)) | (s.bits() << shift);
    }

    fn read_range(&self, addr: u64, len: u64) -> &[u8] {
        let off = (addr - self.base) as usize;
        &self.bytes[off..off + len as usize]
    }

    fn write_range(&mut self, addr: u64, data: &[u8]) {
        let off = (addr - self.base) as usize;
        self.bytes[off..off + data.len()].copy_from_slice(data);
    }

    fn zero(&mut self) {
        self.bytes.fill(0);
    }
}

/// Per-run traffic counters for one store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct StoreCounters {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    /// Metadata bytes moved between the store and DRAM.
    pub dram_bytes: u64,
}

impl StoreCounters {
    pub fn accesses(&self) -> u64 {
        self.hits + self.misses
    }

    /// Counter movement since an `earlier` snapshot of the same store.
    pub fn since(&self, earlier: StoreCounters) -> StoreCounters {
        StoreCounters {
            hits: self.hits - earlier.hits,
            misses: self.misses - earlier.misses,
            evictions: self.evictions - earlier.evictions,
            dram_bytes: self.dram_bytes - earlier.dram_bytes,
        }
    }

    pub fn hit_rate(&self) -> f64 {
        if self.accesses() == 0 {
            0.0
        } else {
            self.hits as f64 / self.accesses() as f64
        }
    }
}

/// Gateway for buddy metadata. Every read/write of node state is charged
/// through `mem` according to the variant's caching behavior.
pub trait MetadataStore: std::fmt::Debug {
    fn get(&mut self, node: u64, mem: &mut CoreMem, t: TaskletId) -> NodeState;
    fn set(&mut self, node: u64, s: NodeState, mem: &mut CoreMem, t: TaskletId);
    /// Clears all node states to Free and invalidates any cached data.
    /// The caller charges the bulk-zeroing transfer.
    fn reset(&mut self);
    fn counters(&self) -> StoreCounters;
    fn node_count(&self) -> u64;
    /// Uncharged read of the current logical state (cache overlay included);
    /// for verification and diagnostics only.
    fn snapshot(&self, node: u64) -> NodeState;
    /// DRAM footprint of the packed state array in bytes.
    fn footprint_bytes(&self) -> u64;
    /// Word-address access log, if recording was enabled.
    fn access_log(&self) -> Option<&[u64]> {
        None
    }
    /// Turns tag-level access logging on or off. Stores without a tagged
    /// cache ignore this.
    fn set_access_logging(&mut self, _on: bool) {}
}

/// Packed footprint in bytes for a node id space of `node_count` slots.
pub fn packed_footprint_bytes(node_count: u64) -> u64 {
    node_count.div_ceil(4)
}

// ---------------------------------------------------------------------------
// Software-managed scratchpad buffer
// ---------------------------------------------------------------------------

/// Default capacity of the software-managed metadata buffer.
pub const SW_BUFFER_BYTES: u64 = 64;

/// One contiguous capacity-aligned window over the metadata array, kept in
/// scratchpad. Hits cost a scratchpad access; a miss writes back the whole
/// buffer if dirty and refills the whole target region.
#[derive(Debug)]
pub struct SwMetadataBuffer {
    dram: MetadataDram,
    node_count: u64,
    capacity: u64,
    /// Region-relative offset (from `dram.base()`) of the loaded window.
    region: Option<u64>,
    buf: Vec<u8>,
    dirty: bool,
    counters: StoreCounters,
}

impl SwMetadataBuffer {
    pub fn new(base: u64, node_count: u64, capacity: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(SimError::Config(
                "metadata buffer capacity must be positive".into(),
            ));
        }
        let dram = MetadataDram::new(base, packed_footprint_bytes(node_count), capacity);
        Ok(SwMetadataBuffer {
            dram,
            node_count,
            capacity,
            region: None,
            buf: vec![0u8; capacity as usize],
            dirty: false,
            counters: StoreCounters::default(),
        })
    }

    fn region_of(&self, node: u64) -> u64 {
        let rel = self.dram.byte_addr(node) - self.dram.base();
        rel - rel % self.capacity
    }

    /// Loads the region containing `node`, counting a hit or a miss.
    fn ensure_region(&mut self, node: u64, mem: &mut CoreMem, t: TaskletId) {
        let target = self.region_of(node);
        if self.region == Some(target) {
            self.counters.hits += 1;
            return;
        }
        self.counters.misses += 1;
        if let Some(cur) = self.region {
            self.counters.evictions += 1;
            if self.dirty {
                // Write back the whole buffer before refilling.
                mem.dram_transfer(t, self.capacity)
                    .expect("buffer flush transfer");
                self.counters.dram_bytes += self.capacity;
                self.dram.write_range(self.dram.base() + cur, &self.buf);
            }
        }
        mem.dram_transfer(t, self.capacity)
            .expect("buffer refill transfer");
        self.counters.dram_bytes += self.capacity;
        let addr = self.dram.base() + target;
        self.buf
            .copy_from_slice(self.dram.read_range(addr, self.capacity));
        self.region = Some(target);
        self.dirty = false;
    }

    fn buf_index(&self, node: u64) -> usize {
        let rel = self.dram.byte_addr(node) - self.dram.base();
        (rel % self.capacity) as usize
    }
}

impl MetadataStore for SwMetadataBuffer {
    fn get(&mut self, node: u64, mem: &mut CoreMem, t: TaskletId) -> NodeState {
        debug_assert!(node < self.node_count);
        let was_loaded = self.region == Some(self.region_of(node));
        self.ensure_region(node, mem, t);
        if was_loaded {
            mem.scratchpad_access(t);
        }
        let byte = self.buf[self.buf_index(node)];
        NodeState::from_bits((byte >> ((node % 4) * 2)) & 0b11)
    }

    fn set(&mut self, node: u64, s: NodeState, mem: &mut CoreMem, t: TaskletId) {
        debug_assert!(node < self.node_count);
        let was_loaded = self.region == Some(self.region_of(node));
        self.ensure_region(node, mem, t);
        if was_loaded {
            mem.scratchpad_access(t);
        }
        let idx = self.buf_index(node);
        let shift = (node % 4) * 2;
        self.buf[idx] = (self.buf[idx] & !(0b11 << shift)) | (s.bits() << shift);
        self.dirty = true;
    }

    fn reset(&mut self) {
        self.dram.zero();
        self.buf.fill(0);
        self.region = None;
        self.dirty = false;
    }

    fn counters(&self) -> StoreCounters {
        self.counters
    }

    fn node_count(&self) -> u64 {
        self.node_count
    }

    fn snapshot(&self, node: u64) -> NodeState {
        // Overlay the (possibly dirty) buffer on the DRAM image.
        if let Some(region) = self.region {
            let rel = self.dram.byte_addr(node) - self.dram.base();
            if rel >= region && rel < region + self.capacity {
                let byte = self.buf[(rel - region) as usize];
                return NodeState::from_bits((byte >> ((node % 4) * 2)) & 0b11);
            }
        }
        self.dram.read_node_raw(node)
    }

    fn footprint_bytes(&self) -> u64 {
        self.dram.len()
    }
}

// ---------------------------------------------------------------------------
// Hardware buddy cache
// ---------------------------------------------------------------------------

/// Default number of entries in the hardware buddy cache (64 B / 4 B words).
pub const BUDDY_CACHE_ENTRIES: usize = 16;

#[derive(Debug, Clone, Copy)]
struct CacheEntry {
    /// 4-byte-aligned absolute DRAM address of the cached word.
    tag: u64,
    /// The cached 4-byte metadata word (16 node states).
    value: [u8; 4],
}

/// Fully associative cache of 4-byte metadata words with exact LRU
/// replacement and write-through-with-allocate writes.
///
/// Per-access instruction costs (one cycle each): `lookup`, `read_entry`,
/// `write_entry`, `init`. A miss additionally fetches exactly the 4-byte
/// word from DRAM and stages it through the scratchpad.
#[derive(Debug)]
pub struct BuddyCache {
    dram: MetadataDram,
    node_count: u64,
    entries: Vec<Option<CacheEntry>>,
    /// Entry indices, most recent first.
    recency: Vec<usize>,
    counters: StoreCounters,
    access_log: Option<Vec<u64>>,
    eviction_log: Option<Vec<u64>>,
}

impl BuddyCache {
    pub fn new(base: u64, node_count: u64, entries: usize) -> Result<Self> {
        if entries == 0 {
            return Err(SimError::Config("buddy cache needs at least one entry".into()));
        }
        let dram = MetadataDram::new(base, packed_footprint_bytes(node_count), 4);
        Ok(BuddyCache {
            dram,
            node_count,
            entries: vec![None; entries],
            recency: Vec::with_capacity(entries),
            counters: StoreCounters::default(),
            access_log: None,
            eviction_log: None,
        })
    }

    /// Enables word-address access recording (for replay analysis).
    pub fn record_accesses(&mut self, on: bool) {
        self.access_log = if on { Some(Vec::new()) } else { None };
    }

    /// Enables eviction-tag recording (for replacement-policy checks).
    pub fn record_evictions(&mut self, on: bool) {
        self.eviction_log = if on { Some(Vec::new()) } else { None };
    }

    pub fn eviction_log(&self) -> Option<&[u64]> {
        self.eviction_log.as_deref()
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    fn log_access(&mut self, word: u64) {
        if let Some(log) = self.access_log.as_mut() {
            log.push(word);
        }
    }

    fn touch(&mut self, idx: usize) {
        if let Some(pos) = self.recency.iter().position(|&i| i == idx) {
            self.recency.remove(pos);
        }
        self.recency.insert(0, idx);
    }

    /// One-cycle associative tag search.
    fn lookup(&mut self, word: u64, mem: &mut CoreMem, t: TaskletId) -> Option<usize> {
        mem.scratchpad_access(t); // lookup instruction
        self.entries
            .iter()
            .position(|e| e.map_or(false, |e| e.tag == word))
    }

    /// Chooses a victim slot: first invalid slot, else the true LRU entry.
    fn victim_slot(&mut self) -> usize {
        if let Some(idx) = self.entries.iter().position(|e| e.is_none()) {
            return idx;
        }
        let idx = *self.recency.last().expect("full cache has recency info");
        let evicted = self.entries[idx].expect("victim entry valid");
        self.counters.evictions += 1;
        if let Some(log) = self.eviction_log.as_mut() {
            log.push(evicted.tag);
        }
        idx
    }

    /// Fills `word` into the cache after a miss; returns the slot index.
    /// Charges: 4-byte DRAM fetch, scratchpad staging, entry write.
    fn fill(&mut self, word: u64, mem: &mut CoreMem, t: TaskletId) -> usize {
        mem.dram_transfer(t, 4).expect("cache fill transfer");
        self.counters.dram_bytes += 4;
        mem.scratchpad_access(t); // stage fetched word in scratchpad
        let mut value = [0u8; 4];
        value.copy_from_slice(self.dram.read_range(word, 4));
        let idx = self.victim_slot();
        self.entries[idx] = Some(CacheEntry { tag: word, value });
        mem.scratchpad_access(t); // write_entry instruction
        self.touch(idx);
        idx
    }
}

impl MetadataStore for BuddyCache {
    fn get(&mut self, node: u64, mem: &mut CoreMem, t: TaskletId) -> NodeState {
        debug_assert!(node < self.node_count);
        let word = self.dram.word_addr(node);
        self.log_access(word);
        let idx = match self.lookup(word, mem, t) {
            Some(idx) => {
                self.counters.hits += 1;
                self.touch(idx);
                mem.scratchpad_access(t); // read_entry instruction
                idx
            }
            None => {
                self.counters.misses += 1;
                self.fill(word, mem, t)
            }
        };
        let entry = self.entries[idx].expect("entry just ensured");
        let byte = entry.value[(self.dram.byte_addr(node) - word) as usize];
        NodeState::from_bits((byte >> ((node % 4) * 2)) & 0b11)
    }

    fn set(&mut self, node: u64, s: NodeState, mem: &mut CoreMem, t: TaskletId) {
        debug_assert!(node < self.node_count);
        let word = self.dram.word_addr(node);
        self.log_access(word);
        let idx = match self.lookup(word, mem, t) {
            Some(idx) => {
                self.counters.hits += 1;
                self.touch(idx);
                idx
            }
            None => {
                self.counters.misses += 1;
                self.fill(word, mem, t) // write-allocate
            }
        };
        let entry = self.entries[idx].as_mut().expect("entry just ensured");
        let byte_idx = (self.dram.byte_addr(node) - word) as usize;
        let shift = (node % 4) * 2;
        entry.value[byte_idx] =
            (entry.value[byte_idx] & !(0b11 << shift)) | (s.bits() << shift);
        let value = entry.value;
        mem.scratchpad_access(t); // write_entry instruction
        // Write through to DRAM so the image is always current.
        mem.dram_transfer(t, 4).expect("write-through transfer");
        self.counters.dram_bytes += 4;
        self.dram.write_range(word, &value);
    }

    fn reset(&mut self) {
        self.dram.zero();
        self.entries.iter_mut().for_each(|e| *e = None);
        self.recency.clear();
    }

    fn counters(&self) -> StoreCounters {
        self.counters
    }

    fn node_count(&self) -> u64 {
        self.node_count
    }

    fn snapshot(&self, node: u64) -> NodeState {
        // Write-through keeps DRAM current, so the image is the truth.
        self.dram.read_node_raw(node)
    }

    fn footprint_bytes(&self) -> u64 {
        self.dram.len()
    }

    fn access_log(&self) -> Option<&[u64]> {
        self.access_log.as_deref()
    }

    fn set_access_logging(&mut self, on: bool) {
        self.record_accesses(on);
    }
}

// ---------------------------------------------------------------------------
// Direct (uncached) store
// ---------------------------------------------------------------------------

/// Uncached metadata access at scratchpad-class cost per operation. Used for
/// host-side execution modeling, where the host's own memory hierarchy is
/// abstracted into a flat per-access cost set by the active cost model.
#[derive(Debug)]
pub struct DirectStore {
    dram: MetadataDram,
    node_count: u64,
    counters: StoreCounters,
}

impl DirectStore {
    pub fn new(base: u64, node_count: u64) -> Self {
        DirectStore {
            dram: MetadataDram::new(base, packed_footprint_bytes(node_count), 4),
            node_count,
            counters: StoreCounters::default(),
        }
    }
}

impl MetadataStore for DirectStore {
    fn get(&mut self, node: u64, mem: &mut CoreMem, t: TaskletId) -> NodeState {
        debug_assert!(node < self.node_count);
        mem.scratchpad_access(t);
        self.counters.hits += 1;
        self.dram.read_node_raw(node)
    }

    fn set(&mut self, node: u64, s: NodeState, mem: &mut CoreMem, t: TaskletId) {
        debug_assert!(node < self.node_count);
        mem.scratchpad_access(t);
        self.counters.hits += 1;
        self.dram.write_node_raw(node, s);
    }

    fn reset(&mut self) {
        self.dram.zero();
    }

    fn counters(&self) -> StoreCounters {
        self.counters
    }

    fn node_count(&self) -> u64 {
        self.node_count
    }

    fn snapshot(&self, node: u64) -> NodeState {
        self.dram.read_node_raw(node)
    }

    fn footprint_bytes(&self) -> u64 {
        self.dram.len()
    }
}

// ---------------------------------------------------------------------------
// Store construction and replay analysis
// ---------------------------------------------------------------------------

/// Which metadata store variant to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreKind {
    /// Software-managed buffer with the given capacity in bytes.
    Sw { capacity_bytes: u64 },
    /// Hardware buddy cache with the given entry count (4 bytes per entry).
    Hw { entries: usize },
    /// Uncached direct access (host-side modeling).
    Direct,
}

impl StoreKind {
    pub fn sw_default() -> Self {
        StoreKind::Sw {
            capacity_bytes: SW_BUFFER_BYTES,
        }
    }

    pub fn hw_default() -> Self {
        StoreKind::Hw {
            entries: BUDDY_CACHE_ENTRIES,
        }
    }

    pub fn build(self, base: u64, node_count: u64) -> Result<Box<dyn MetadataStore>> {
        Ok(match self {
            StoreKind::Sw { capacity_bytes } => {
                Box::new(SwMetadataBuffer::new(base, node_count, capacity_bytes)?)
            }
            StoreKind::Hw { entries } => Box::new(BuddyCache::new(base, node_count, entries)?),
            StoreKind::Direct => Box::new(DirectStore::new(base, node_count)),
        })
    }
}

/// Hit rates of LRU caches of several capacities over one recorded access
/// trace, computed in a single pass from LRU stack distances. Because every
/// capacity is evaluated on the same trace, the result is non-decreasing in
/// capacity by construction (LRU inclusion).
pub fn lru_stack_hit_rates(trace: &[u64], capacities: &[usize]) -> Vec<f64> {
    let mut stack: Vec<u64> = Vec::new();
    let mut hits = vec![0u64; capacities.len()];
    for &addr in trace {
        match stack.iter().position(|&a| a == addr) {
            Some(pos) => {
                let distance = pos + 1;
                for (i, &cap) in capacities.iter().enumerate() {
                    if distance <= cap {
                        hits[i] += 1;
                    }
                }
                stack.remove(pos);
            }
            None => {}
        }
        stack.insert(0, addr);
    }
    let n = trace.len().max(1) as f64;
    hits.iter().map(|&h| h as f64 / n).collect()
}
