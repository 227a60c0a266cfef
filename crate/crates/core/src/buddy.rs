//! Buddy allocator backend over a power-of-two heap.
//!
//! The allocator tracks block occupancy in an implicit complete binary tree:
//! node 1 covers the whole heap, node `i` has children `2i` and `2i+1`, and
//! leaves cover `min_block` bytes. Each node holds a 2-bit [`NodeState`]
//! packed four-per-byte in DRAM and accessed exclusively through a
//! [`MetadataStore`], so every traversal pays the configured metadata cost.
//!
//! Allocation rounds the request up to a power of two, then walks the tree
//! leftmost-first for a free node of that size, splitting larger free nodes
//! on the way down. A node is the root of a live allocation iff it is `Full`
//! and is a leaf or has no `Full` child; freeing resolves an offset to its
//! allocation root, clears it, and re-merges buddies bottom-up. Failed
//! searches never write, so out-of-memory leaves the tree untouched.

use crate::error::{Result, SimError};
use crate::mem::{CoreMem, TaskletId};
use crate::metadata::{packed_footprint_bytes, MetadataStore, NodeState, StoreCounters, StoreKind};

/// A block handed out by the buddy allocator: heap-relative offset plus the
/// rounded power-of-two size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockAddr {
    pub offset: u64,
    pub size: u64,
}

/// Buddy tree over `[0, heap_size)` with `min_block` leaves.
#[derive(Debug)]
pub struct BuddyTree {
    heap_size: u64,
    min_block: u64,
    levels: u32,
    store: Box<dyn MetadataStore>,
}

impl BuddyTree {
    /// Builds the tree and its metadata store. Call [`BuddyTree::init`]
    /// before use; construction itself charges nothing.
    pub fn new(
        heap_size: u64,
        min_block: u64,
        metadata_base: u64,
        store_kind: StoreKind,
    ) -> Result<Self> {
        if !heap_size.is_power_of_two() {
            return Err(SimError::NotPowerOfTwo {
                what: "heap_size",
                value: heap_size,
            });
        }
        if !min_block.is_power_of_two() {
            return Err(SimError::NotPowerOfTwo {
                what: "min_block",
                value: min_block,
            });
        }
        if min_block > heap_size {
            return Err(SimError::Geometry(format!(
                "min_block {min_block} exceeds heap_size {heap_size}"
            )));
        }
        let levels = (heap_size / min_block).ilog2();
        let node_count = 1u64 << (levels + 1); // ids 1..2^(levels+1); slot 0 unused
        let store = store_kind.build(metadata_base, node_count)?;
        Ok(BuddyTree {
            heap_size,
            min_block,
            levels,
            store,
        })
    }

    /// Tree depth count below the root (`log2(heap_size / min_block)`).
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn heap_size(&self) -> u64 {
        self.heap_size
    }

    pub fn min_block(&self) -> u64 {
        self.min_block
    }

    /// Bytes of packed node states (before any store rounding).
    pub fn metadata_footprint(&self) -> u64 {
        packed_footprint_bytes(1u64 << (self.levels + 1))
    }

    pub fn store_counters(&self) -> StoreCounters {
        self.store.counters()
    }

    pub fn store(&self) -> &dyn MetadataStore {
        self.store.as_ref()
    }

    pub fn store_mut(&mut self) -> &mut Box<dyn MetadataStore> {
        &mut self.store
    }

    /// Clears the whole tree to free, charging one bulk DRAM transfer for
    /// zeroing the metadata footprint.
    pub fn init(&mut self, mem: &mut CoreMem, t: TaskletId) -> Result<()> {
        self.store.reset();
        mem.dram_transfer(t, self.metadata_footprint())?;
        Ok(())
    }

    /// Rounded allocation size for a request.
    pub fn rounded_size(&self, size: u64) -> u64 {
        size.max(self.min_block).next_power_of_two()
    }

    fn size_at(&self, depth: u32) -> u64 {
        self.heap_size >> depth
    }

    fn node_offset(&self, node: u64, depth: u32) -> u64 {
        (node - (1u64 << depth)) * self.size_at(depth)
    }

    /// Leftmost-first search for a free node at `target` depth. Splits free
    /// ancestors down the left spine; pure reads otherwise, so a failed
    /// search leaves no trace in the metadata.
    fn descend(
        &mut self,
        node: u64,
        depth: u32,
        target: u32,
        mem: &mut CoreMem,
        t: TaskletId,
    ) -> Option<u64> {
        let state = self.store.get(node, mem, t);
        if depth == target {
            return (state == NodeState::Free).then_some(node);
        }
        match state {
            NodeState::Full => None,
            NodeState::Free => {
                // A free node's descendants are all free: claim this subtree
                // by splitting down the left spine, no further reads needed.
                self.store.set(node, NodeState::Split, mem, t);
                let mut cur = node;
                for d in depth + 1..=target {
                    cur *= 2;
                    if d < target {
                        self.store.set(cur, NodeState::Split, mem, t);
                    }
                }
                Some(cur)
            }
            NodeState::Split => self
                .descend(node * 2, depth + 1, target, mem, t)
                .or_else(|| self.descend(node * 2 + 1, depth + 1, target, mem, t)),
        }
    }

    /// Recomputes ancestor states after `node` changed to `new_state`,
    /// stopping as soon as a parent's state is unchanged.
    fn update_ancestors(
        &mut self,
        mut node: u64,
        mut state: NodeState,
        mem: &mut CoreMem,
        t: TaskletId,
    ) {
        while node > 1 {
            let sibling = self.store.get(node ^ 1, mem, t);
            let parent_state = match (state, sibling) {
                (NodeState::Free, NodeState::Free) => NodeState::Free,
                (NodeState::Full, NodeState::Full) => NodeState::Full,
                _ => NodeState::Split,
            };
            let parent = node / 2;
            if self.store.get(parent, mem, t) == parent_state {
                break;
            }
            self.store.set(parent, parent_state, mem, t);
            node = parent;
            state = parent_state;
        }
    }

    /// Allocates `size` bytes (rounded up to a power of two, at least
    /// `min_block`). Returns the block or `OutOfMemory` with the tree
    /// unchanged.
    pub fn alloc(&mut self, size: u64, mem: &mut CoreMem, t: TaskletId) -> Result<BlockAddr> {
        if size == 0 {
            return Err(SimError::ZeroSizeAlloc);
        }
        mem.alu_ops(t, 1); // size rounding
        let rounded = self.rounded_size(size);
        if rounded > self.heap_size {
            return Err(SimError::OutOfMemory {
                requested: size,
                rounded,
            });
        }
        let target = self.levels - (rounded / self.min_block).ilog2();
        let node = self
            .descend(1, 0, target, mem, t)
            .ok_or(SimError::OutOfMemory {
                requested: size,
                rounded,
            })?;
        self.store.set(node, NodeState::Full, mem, t);
        self.update_ancestors(node, NodeState::Full, mem, t);
        Ok(BlockAddr {
            offset: self.node_offset(node, target),
            size: rounded,
        })
    }

    /// True iff `node` (known `Full`) is the root of a live allocation:
    /// a leaf, or a node with no `Full` child. Charges the child reads.
    fn is_allocation_root(
        &mut self,
        node: u64,
        depth: u32,
        mem: &mut CoreMem,
        t: TaskletId,
    ) -> bool {
        if depth == self.levels {
            return true;
        }
        let left = self.store.get(node * 2, mem, t);
        let right = self.store.get(node * 2 + 1, mem, t);
        left != NodeState::Full && right != NodeState::Full
    }

    /// Walks from the root to the allocation root whose block starts at
    /// `offset`. Read-only; errors if no live allocation starts there.
    fn find_allocation_root(
        &mut self,
        offset: u64,
        mem: &mut CoreMem,
        t: TaskletId,
    ) -> Result<(u64, u32)> {
        mem.alu_ops(t, 1); // offset validation
        if offset >= self.heap_size || offset % self.min_block != 0 {
            return Err(SimError::InvalidFree {
                offset,
                reason: "offset outside heap or unaligned".into(),
            });
        }
        let mut node = 1u64;
        let mut depth = 0u32;
        loop {
            match self.store.get(node, mem, t) {
                NodeState::Free => {
                    return Err(SimError::InvalidFree {
                        offset,
                        reason: "region is free".into(),
                    });
                }
                NodeState::Full => {
                    if self.is_allocation_root(node, depth, mem, t) {
                        if self.node_offset(node, depth) != offset {
                            return Err(SimError::InvalidFree {
                                offset,
                                reason: "offset is interior to an allocation".into(),
                            });
                        }
                        return Ok((node, depth));
                    }
                    // Both children full: the allocation root is below.
                }
                NodeState::Split => {}
            }
            if depth == self.levels {
                // A leaf that is Full is always an allocation root, and
                // Free/Split leaves were handled above.
                return Err(SimError::InvalidFree {
                    offset,
                    reason: "no allocation at offset".into(),
                });
            }
            let child_size = self.size_at(depth + 1);
            let base = self.node_offset(node, depth);
            node = node * 2 + u64::from(offset >= base + child_size);
            depth += 1;
        }
    }

    /// Frees the allocation starting at `offset`; returns its rounded size.
    /// Merges free buddies bottom-up.
    pub fn free(&mut self, offset: u64, mem: &mut CoreMem, t: TaskletId) -> Result<u64> {
        let (node, depth) = self.find_allocation_root(offset, mem, t)?;
        self.store.set(node, NodeState::Free, mem, t);
        self.update_ancestors(node, NodeState::Free, mem, t);
        Ok(self.size_at(depth))
    }

    /// Size of the live allocation starting at `offset` (read-only, charged).
    pub fn block_size(&mut self, offset: u64, mem: &mut CoreMem, t: TaskletId) -> Result<u64> {
        let (_, depth) = self.find_allocation_root(offset, mem, t)?;
        Ok(self.size_at(depth))
    }

    // -- Uncharged verification walks ------------------------------------

    /// All live allocations, by uncharged snapshot walk (diagnostics only).
    pub fn live_blocks(&self) -> Vec<BlockAddr> {
        let mut out = Vec::new();
        self.walk_live(1, 0, &mut out);
        out.sort_by_key(|b| b.offset);
        out
    }

    fn walk_live(&self, node: u64, depth: u32, out: &mut Vec<BlockAddr>) {
        match self.store.snapshot(node) {
            NodeState::Free => {}
            NodeState::Split => {
                self.walk_live(node * 2, depth + 1, out);
                self.walk_live(node * 2 + 1, depth + 1, out);
            }
            NodeState::Full => {
                let is_root = depth == self.levels || {
                    let l = self.store.snapshot(node * 2);
                    let r = self.store.snapshot(node * 2 + 1);
                    l != NodeState::Full && r != NodeState::Full
                };
                if is_root {
                    out.push(BlockAddr {
                        offset: self.node_offset(node, depth),
                        size: self.size_at(depth),
                    });
                } else {
                    self.walk_live(node * 2, depth + 1, out);
                    self.walk_live(node * 2 + 1, depth + 1, out);
                }
            }
        }
    }

    /// Free capacity from maximal free nodes, by uncharged snapshot walk.
    pub fn free_bytes(&self) -> u64 {
        let mut total = 0;
        let mut stack = vec![(1u64, 0u32)];
        while let Some((node, depth)) = stack.pop() {
            match self.store.snapshot(node) {
                NodeState::Free => total += self.size_at(depth),
                NodeState::Split => {
                    stack.push((node * 2, depth + 1));
                    stack.push((node * 2 + 1, depth + 1));
                }
                NodeState::Full => {}
            }
        }
        total
    }

    /// True when the whole heap is one free block again.
    pub fn is_all_free(&self) -> bool {
        self.store.snapshot(1) == NodeState::Free
    }
}
