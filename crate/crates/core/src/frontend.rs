//! Size-class frontend: per-tasklet thread caches over buddy-backed blocks.
//!
//! Small requests (≤ 2 KiB) are rounded to one of eight size classes and
//! served from the calling tasklet's thread cache — a per-class list of
//! 4 KiB cache blocks, each subdivided into equal sub-blocks tracked by a
//! one-bit-per-sub-block occupancy bitmap. A hit touches only scratchpad
//! state and never takes the backend mutex. When a class has no free
//! sub-block the cache refills with one 4 KiB block from the buddy backend
//! (under the mutex); larger requests bypass the cache entirely.
//!
//! A per-core page map records, for every heap page holding live data,
//! whether the page is a thread-cache block (and whose) or a direct buddy
//! block, so `free(ptr)` needs no object headers. Frees of cache sub-blocks
//! must come from the owning tasklet. A fully freed cache block is returned
//! to the buddy unless it is the list's last block (hysteresis), which keeps
//! a steady malloc/free workload from ping-ponging through the backend.

use std::collections::HashMap;
use std::collections::VecDeque;

use crate::buddy::BuddyTree;
use crate::engine::OpCtx;
use crate::error::{Result, SimError};
use crate::mem::{MemGeometry, TaskletId, MAX_TASKLETS};
use crate::metadata::{StoreCounters, StoreKind, BUDDY_CACHE_ENTRIES, SW_BUFFER_BYTES};

/// The eight allocation size classes, in bytes.
pub const SIZE_CLASSES: [u64; 8] = [16, 32, 64, 128, 256, 512, 1024, 2048];

/// Cache blocks fetched from the backend are always this large.
pub const CACHE_BLOCK_BYTES: u64 = 4096;

/// Smallest block the straw-man allocator serves directly.
pub const STRAWMAN_MIN_BLOCK: u64 = 32;

/// Which of the three allocator designs a core runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocatorKind {
    /// Single-level buddy over the whole heap, every call under the mutex.
    Strawman,
    /// Thread-cache frontend + buddy backend, software metadata buffer.
    Sw,
    /// Thread-cache frontend + buddy backend, hardware metadata cache.
    HwSw,
}

impl AllocatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocatorKind::Strawman => "strawman",
            AllocatorKind::Sw => "sw",
            AllocatorKind::HwSw => "hwsw",
        }
    }
}

impl std::str::FromStr for AllocatorKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strawman" => Ok(AllocatorKind::Strawman),
            "sw" => Ok(AllocatorKind::Sw),
            "hwsw" => Ok(AllocatorKind::HwSw),
            other => Err(SimError::Config(format!(
                "unknown allocator '{other}' (expected strawman, sw, or hwsw)"
            ))),
        }
    }
}

impl std::fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Who completed a traced operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceTier {
    /// Thread-cache hit (or sub-block returned to the cache): no mutex, no
    /// metadata DRAM traffic.
    Frontend,
    /// Thread-cache path that also took a backend round trip (block refill
    /// or fully-free block return).
    FrontendRefill,
    /// Served directly by the buddy backend.
    Backend,
}

impl ServiceTier {
    pub fn as_str(self) -> &'static str {
        match self {
            ServiceTier::Frontend => "frontend",
            ServiceTier::FrontendRefill => "frontend_refill",
            ServiceTier::Backend => "backend",
        }
    }
}

/// Result of size-class lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeClassLookup {
    Class(usize),
    Bypass,
}

/// Smallest class that fits `size`, or `Bypass` for requests above the
/// largest class.
pub fn size_class_index(size: u64) -> Result<SizeClassLookup> {
    if size == 0 {
        return Err(SimError::ZeroSizeAlloc);
    }
    match SIZE_CLASSES.iter().position(|&c| c >= size) {
        Some(idx) => Ok(SizeClassLookup::Class(idx)),
        None => Ok(SizeClassLookup::Bypass),
    }
}

/// One 4 KiB block subdivided into `capacity` sub-blocks of one class.
/// Bitmap bit = 1 means the sub-block is live.
#[derive(Debug, Clone)]
pub struct CacheBlock {
    pub base: u64,
    pub class: usize,
    bitmap: [u64; 4],
    live: u16,
    capacity: u16,
}

impl CacheBlock {
    fn new(base: u64, class: usize) -> Self {
        CacheBlock {
            base,
            class,
            bitmap: [0; 4],
            live: 0,
            capacity: (CACHE_BLOCK_BYTES / SIZE_CLASSES[class]) as u16,
        }
    }

    pub fn is_full(&self) -> bool {
        self.live == self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn live_count(&self) -> u16 {
        self.live
    }

    /// Claims the lowest free sub-block; returns its index.
    fn pop_lowest_free(&mut self) -> Option<u16> {
        if self.is_full() {
            return None;
        }
        for word in 0..=usize::from((self.capacity - 1) / 64) {
            let remaining = self.capacity as u32 - word as u32 * 64;
            let mask = if remaining >= 64 {
                u64::MAX
            } else {
                (1u64 << remaining) - 1
            };
            let free = !self.bitmap[word] & mask;
            if free != 0 {
                let bit = free.trailing_zeros() as u16;
                let idx = word as u16 * 64 + bit;
                self.bitmap[word] |= 1u64 << bit;
                self.live += 1;
                return Some(idx);
            }
        }
        None
    }

    /// Clears a live bit; errors on a sub-block that is not live.
    fn mark_free(&mut self, idx: u16) -> Result<()> {
        let word = usize::from(idx / 64);
        let bit = 1u64 << (idx % 64);
        if self.bitmap[word] & bit == 0 {
            return Err(SimError::InvalidFree {
                offset: self.base + u64::from(idx) * SIZE_CLASSES[self.class],
                reason: "sub-block is not live (double free?)".into(),
            });
        }
        self.bitmap[word] &= !bit;
        self.live -= 1;
        Ok(())
    }
}

/// Per-tasklet cache: one block list per size class. Blocks with free
/// sub-blocks are kept at the front so a hit never scans.
#[derive(Debug, Clone, Default)]
pub struct ThreadCache {
    lists: [VecDeque<CacheBlock>; 8],
}

impl ThreadCache {
    pub fn blocks(&self, class: usize) -> usize {
        self.lists[class].len()
    }

    /// Pops the lowest free sub-block from the front block, if any.
    /// Charges: bitmap read, bit scan, bitmap write.
    fn pop(&mut self, class: usize, ctx: &mut OpCtx) -> Option<u64> {
        let front = self.lists[class].front_mut()?;
        ctx.mem.scratchpad_access(ctx.tasklet); // occupancy bitmap read
        let idx = front.pop_lowest_free()?;
        ctx.mem.alu_ops(ctx.tasklet, 1); // lowest-free-bit scan
        ctx.mem.scratchpad_access(ctx.tasklet); // occupancy bitmap write
        let offset = front.base + u64::from(idx) * SIZE_CLASSES[class];
        if front.is_full() {
            // Keep blocks with space at the front.
            let b = self.lists[class].pop_front().expect("front exists");
            self.lists[class].push_back(b);
        }
        Some(offset)
    }

    /// Installs a fresh backend block at the front of a class list.
    fn install(&mut self, class: usize, base: u64, ctx: &mut OpCtx) {
        ctx.mem.scratchpad_access(ctx.tasklet); // bitmap init write
        self.lists[class].push_front(CacheBlock::new(base, class));
    }

    /// Returns a sub-block to its cache block. On success reports whether
    /// the block is now completely free.
    fn free_sub_block(
        &mut self,
        class: usize,
        base: u64,
        idx: u16,
        ctx: &mut OpCtx,
    ) -> Result<bool> {
        ctx.mem.scratchpad_access(ctx.tasklet); // block list lookup
        let pos = self.lists[class]
            .iter()
            .position(|b| b.base == base)
            .ok_or_else(|| SimError::InvalidFree {
                offset: base,
                reason: "cache block not found in owner's list".into(),
            })?;
        ctx.mem.scratchpad_access(ctx.tasklet); // bitmap read
        let was_full = self.lists[class][pos].is_full();
        self.lists[class][pos].mark_free(idx)?;
        ctx.mem.alu_ops(ctx.tasklet, 1); // bit clear
        ctx.mem.scratchpad_access(ctx.tasklet); // bitmap write
        if was_full {
            // Block regained space: move to front for O(1) pops.
            let b = self.lists[class].remove(pos).expect("pos valid");
            self.lists[class].push_front(b);
            return Ok(self.lists[class][0].is_empty());
        }
        Ok(self.lists[class][pos].is_empty())
    }

    /// Detaches the block with the given base (for return to the backend).
    fn detach(&mut self, class: usize, base: u64) -> Option<CacheBlock> {
        let pos = self.lists[class].iter().position(|b| b.base == base)?;
        self.lists[class].remove(pos)
    }
}

/// What a live heap page holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PageEntry {
    ThreadCacheBlock { owner: TaskletId, class: usize },
    BuddyDirect { size: u64 },
}

/// Page-granular allocation directory: page base -> entry. Lookups are
/// charged as scratchpad accesses by the callers.
#[derive(Debug, Clone, Default)]
pub struct PageMap {
    map: HashMap<u64, PageEntry>,
}

impl PageMap {
    pub fn page_base(offset: u64) -> u64 {
        offset & !(CACHE_BLOCK_BYTES - 1)
    }

    pub fn get(&self, page: u64) -> Option<PageEntry> {
        self.map.get(&page).copied()
    }

    fn insert(&mut self, page: u64, entry: PageEntry) {
        let prior = self.map.insert(page, entry);
        debug_assert!(prior.is_none(), "page {page:#x} double-mapped");
    }

    fn remove(&mut self, page: u64) -> Option<PageEntry> {
        self.map.remove(&page)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Allocator configuration for one core.
#[derive(Debug, Clone)]
pub struct AllocatorConfig {
    pub kind: AllocatorKind,
    /// Software metadata buffer capacity (strawman and sw variants).
    pub sw_buffer_bytes: u64,
    /// Hardware buddy cache entries (hwsw variant).
    pub cache_entries: usize,
    /// Return fully-free cache blocks to the backend (keeping the last one).
    pub return_free_blocks: bool,
}

impl AllocatorConfig {
    pub fn new(kind: AllocatorKind) -> Self {
        AllocatorConfig {
            kind,
            sw_buffer_bytes: SW_BUFFER_BYTES,
            cache_entries: BUDDY_CACHE_ENTRIES,
            return_free_blocks: true,
        }
    }

    fn store_kind(&self) -> StoreKind {
        match self.kind {
            AllocatorKind::Strawman | AllocatorKind::Sw => StoreKind::Sw {
                capacity_bytes: self.sw_buffer_bytes,
            },
            AllocatorKind::HwSw => StoreKind::Hw {
                entries: self.cache_entries,
            },
        }
    }

    fn backend_min_block(&self) -> u64 {
        match self.kind {
            AllocatorKind::Strawman => STRAWMAN_MIN_BLOCK,
            AllocatorKind::Sw | AllocatorKind::HwSw => CACHE_BLOCK_BYTES,
        }
    }
}

/// One core's allocator: buddy backend plus (for sw/hwsw) the thread-cache
/// frontend and page map.
#[derive(Debug)]
pub struct CoreAllocator {
    kind: AllocatorKind,
    backend: BuddyTree,
    caches: Vec<ThreadCache>,
    page_map: PageMap,
    return_free_blocks: bool,
    initialized: bool,
}

impl CoreAllocator {
    pub fn new(cfg: &AllocatorConfig, geometry: &MemGeometry) -> Result<Self> {
        let backend = BuddyTree::new(
            geometry.heap_size,
            cfg.backend_min_block(),
            geometry.metadata_base(),
            cfg.store_kind(),
        )?;
        let caches = match cfg.kind {
            AllocatorKind::Strawman => Vec::new(),
            _ => vec![ThreadCache::default(); MAX_TASKLETS as usize],
        };
        Ok(CoreAllocator {
            kind: cfg.kind,
            backend,
            caches,
            page_map: PageMap::default(),
            return_free_blocks: cfg.return_free_blocks,
            initialized: false,
        })
    }

    pub fn kind(&self) -> AllocatorKind {
        self.kind
    }

    pub fn backend(&self) -> &BuddyTree {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut BuddyTree {
        &mut self.backend
    }

    pub fn page_map(&self) -> &PageMap {
        &self.page_map
    }

    pub fn store_counters(&self) -> StoreCounters {
        self.backend.store_counters()
    }

    pub fn thread_cache(&self, t: TaskletId) -> Option<&ThreadCache> {
        self.caches.get(t as usize)
    }

    /// One-time per-core initialization by tasklet 0: resets the buddy tree
    /// and, for the thread-cache variants, pre-populates every class list of
    /// every tasklet with one backend block.
    pub fn init_allocator(&mut self, ctx: &mut OpCtx) -> Result<()> {
        if self.initialized {
            return Err(SimError::AlreadyInitialized);
        }
        self.backend.init(ctx.mem, ctx.tasklet)?;
        if self.kind != AllocatorKind::Strawman {
            for tasklet in 0..MAX_TASKLETS {
                for class in 0..SIZE_CLASSES.len() {
                    let block = self.backend.alloc(CACHE_BLOCK_BYTES, ctx.mem, ctx.tasklet)?;
                    ctx.mem.scratchpad_access(ctx.tasklet); // page map insert
                    self.page_map.insert(
                        PageMap::page_base(block.offset),
                        PageEntry::ThreadCacheBlock {
                            owner: tasklet,
                            class,
                        },
                    );
                    self.caches[tasklet as usize].install(class, block.offset, ctx);
                }
            }
        }
        self.initialized = true;
        Ok(())
    }

    /// Allocates `size` bytes for the calling tasklet. Returns the heap
    /// offset and which tier serviced the request.
    pub fn malloc(&mut self, size: u64, ctx: &mut OpCtx) -> Result<(u64, ServiceTier)> {
        if !self.initialized {
            return Err(SimError::NotInitialized);
        }
        if self.kind == AllocatorKind::Strawman {
            ctx.acquire_backend()?;
            let res = self.backend.alloc(size, ctx.mem, ctx.tasklet);
            ctx.release_backend()?;
            return res.map(|b| (b.offset, ServiceTier::Backend));
        }
        ctx.mem.alu_ops(ctx.tasklet, 1); // size-class rounding
        match size_class_index(size)? {
            SizeClassLookup::Bypass => {
                ctx.acquire_backend()?;
                let res = self.backend.alloc(size, ctx.mem, ctx.tasklet);
                let block = match res {
                    Ok(b) => b,
                    Err(e) => {
                        ctx.release_backend()?;
                        return Err(e);
                    }
                };
                ctx.mem.scratchpad_access(ctx.tasklet); // page map insert
                self.page_map.insert(
                    PageMap::page_base(block.offset),
                    PageEntry::BuddyDirect { size: block.size },
                );
                ctx.release_backend()?;
                Ok((block.offset, ServiceTier::Backend))
            }
            SizeClassLookup::Class(class) => {
                let t = ctx.tasklet as usize;
                ctx.mem.scratchpad_access(ctx.tasklet); // class list head check
                if let Some(offset) = self.caches[t].pop(class, ctx) {
                    return Ok((offset, ServiceTier::Frontend));
                }
                // Refill: one backend block, then serve from it.
                ctx.acquire_backend()?;
                let res = self.backend.alloc(CACHE_BLOCK_BYTES, ctx.mem, ctx.tasklet);
                let block = match res {
                    Ok(b) => b,
                    Err(e) => {
                        ctx.release_backend()?;
                        return Err(e);
                    }
                };
                ctx.mem.scratchpad_access(ctx.tasklet); // page map insert
                self.page_map.insert(
                    PageMap::page_base(block.offset),
                    PageEntry::ThreadCacheBlock {
                        owner: ctx.tasklet,
                        class,
                    },
                );
                ctx.release_backend()?;
                self.caches[t].install(class, block.offset, ctx);
                let offset = self.caches[t]
                    .pop(class, ctx)
                    .expect("fresh cache block has free sub-blocks");
                Ok((offset, ServiceTier::FrontendRefill))
            }
        }
    }

    /// Frees the allocation at `offset`. Returns the freed (rounded) size
    /// and the tier that completed the free.
    pub fn free(&mut self, offset: u64, ctx: &mut OpCtx) -> Result<(u64, ServiceTier)> {
        if !self.initialized {
            return Err(SimError::NotInitialized);
        }
        if self.kind == AllocatorKind::Strawman {
            ctx.acquire_backend()?;
            let res = self.backend.free(offset, ctx.mem, ctx.tasklet);
            ctx.release_backend()?;
            return res.map(|size| (size, ServiceTier::Backend));
        }
        ctx.mem.alu_ops(ctx.tasklet, 1); // page base computation
        ctx.mem.scratchpad_access(ctx.tasklet); // page map lookup
        let page = PageMap::page_base(offset);
        match self.page_map.get(page) {
            None => Err(SimError::InvalidFree {
                offset,
                reason: "no live allocation on page".into(),
            }),
            Some(PageEntry::BuddyDirect { .. }) => {
                if offset != page {
                    return Err(SimError::InvalidFree {
                        offset,
                        reason: "offset is interior to a direct buddy block".into(),
                    });
                }
                ctx.acquire_backend()?;
                let res = self.backend.free(offset, ctx.mem, ctx.tasklet);
                let size = match res {
                    Ok(s) => s,
                    Err(e) => {
                        ctx.release_backend()?;
                        return Err(e);
                    }
                };
                ctx.mem.scratchpad_access(ctx.tasklet); // page map remove
                self.page_map.remove(page);
                ctx.release_backend()?;
                Ok((size, ServiceTier::Backend))
            }
            Some(PageEntry::ThreadCacheBlock { owner, class }) => {
                if owner != ctx.tasklet {
                    return Err(SimError::RemoteFree {
                        tasklet: ctx.tasklet,
                        offset,
                        owner,
                    });
                }
                let class_size = SIZE_CLASSES[class];
                let rel = offset - page;
                if rel % class_size != 0 {
                    return Err(SimError::InvalidFree {
                        offset,
                        reason: "offset not aligned to its size class".into(),
                    });
                }
                let idx = (rel / class_size) as u16;
                let now_empty =
                    self.caches[owner as usize].free_sub_block(class, page, idx, ctx)?;
                let keep_last = self.caches[owner as usize].blocks(class) <= 1;
                if now_empty && !keep_last && self.return_free_blocks {
                    // Return the empty block to the backend (hysteresis keeps
                    // the last block of each list).
                    self.caches[owner as usize]
                        .detach(class, page)
                        .expect("empty block present");
                    ctx.acquire_backend()?;
                    let res = self.backend.free(page, ctx.mem, ctx.tasklet);
                    if let Err(e) = res {
                        ctx.release_backend()?;
                        return Err(e);
                    }
                    ctx.mem.scratchpad_access(ctx.tasklet); // page map remove
                    self.page_map.remove(page);
                    ctx.release_backend()?;
                    return Ok((class_size, ServiceTier::FrontendRefill));
                }
                Ok((class_size, ServiceTier::Frontend))
            }
        }
    }
}
