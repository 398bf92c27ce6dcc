//! Block tree with longest-chain resolution and stale-rate accounting.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u64);

/// Root of every tree; height 0.
pub const GENESIS: BlockId = BlockId(0);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MinerId(pub u32);

impl fmt::Display for MinerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl MinerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An abstract block. Proof of work is not represented; a block exists
/// because its miner's success draw came up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    id: BlockId,
    parent: BlockId,
    miner: Option<MinerId>,
    timestamp: f64,
    created_at: f64,
    height: u64,
}

impl Block {
    /// A block ready for insertion; its height is assigned by the tree.
    pub fn new(id: BlockId, parent: BlockId, miner: MinerId, timestamp: f64, created_at: f64) -> Self {
        Self {
            id,
            parent,
            miner: Some(miner),
            timestamp,
            created_at,
            height: 0,
        }
    }

    fn genesis() -> Self {
        Self {
            id: GENESIS,
            parent: GENESIS,
            miner: None,
            timestamp: 0.0,
            created_at: 0.0,
            height: 0,
        }
    }

    pub fn id(&self) -> BlockId {
        self.id
    }

    pub fn parent(&self) -> BlockId {
        self.parent
    }

    /// `None` only for genesis.
    pub fn miner(&self) -> Option<MinerId> {
        self.miner
    }

    /// The committed timestamp, fixed before mining started.
    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn created_at(&self) -> f64 {
        self.created_at
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn is_genesis(&self) -> bool {
        self.id == GENESIS
    }
}

/// Directed tree of blocks rooted at [`GENESIS`].
#[derive(Debug, Clone)]
pub struct BlockTree {
    blocks: HashMap<BlockId, Block>,
    children: HashMap<BlockId, Vec<BlockId>>,
    by_height: Vec<Vec<BlockId>>,
    fork_heights: usize,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    pub fn new() -> Self {
        let mut blocks = HashMap::new();
        blocks.insert(GENESIS, Block::genesis());
        Self {
            blocks,
            children: HashMap::new(),
            by_height: vec![vec![GENESIS]],
            fork_heights: 0,
        }
    }

    pub fn insert_block(&mut self, mut block: Block) -> Result<&Block> {
        if self.blocks.contains_key(&block.id) {
            return Err(Error::DuplicateBlock(block.id));
        }
        let parent = self
            .blocks
            .get(&block.parent)
            .ok_or(Error::UnknownParent(block.id, block.parent))?;
        block.height = parent.height + 1;
        let h = block.height as usize;
        if self.by_height.len() <= h {
            self.by_height.push(Vec::new());
        }
        let level = &mut self.by_height[h];
        level.push(block.id);
        if level.len() == 2 {
            self.fork_heights += 1;
        }
        self.children.entry(block.parent).or_default().push(block.id);
        let id = block.id;
        self.blocks.insert(id, block);
        Ok(&self.blocks[&id])
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(&id)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    pub fn children(&self, id: BlockId) -> &[BlockId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_height(&self) -> u64 {
        (self.by_height.len() - 1) as u64
    }

    /// Blocks at `height`, in insertion order.
    pub fn at_height(&self, height: u64) -> &[BlockId] {
        self.by_height.get(height as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All blocks at the maximum height, sorted by id.
    pub fn longest_tips(&self) -> Vec<BlockId> {
        let mut tips = self.by_height.last().cloned().unwrap_or_default();
        tips.sort_unstable();
        tips
    }

    /// Number of blocks, excluding genesis.
    pub fn len(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Heights at which two or more blocks exist.
    pub fn fork_heights(&self) -> usize {
        self.fork_heights
    }

    /// Non-genesis blocks, ordered by id.
    pub fn blocks(&self) -> Vec<&Block> {
        let mut v: Vec<&Block> = self.blocks.values().filter(|b| !b.is_genesis()).collect();
        v.sort_unstable_by_key(|b| b.id);
        v
    }

    /// Ids on the path from `tip` back to (and excluding) genesis.
    pub fn ancestry(&self, tip: BlockId) -> HashSet<BlockId> {
        let mut out = HashSet::new();
        let mut cur = tip;
        while cur != GENESIS {
            out.insert(cur);
            cur = self.blocks[&cur].parent;
        }
        out
    }

    pub fn stale_stats(&self, canonical_tip: BlockId) -> Result<StaleStats> {
        let tip = self.get(canonical_tip).ok_or(Error::TipNotLongest(canonical_tip))?;
        if tip.height != self.max_height() {
            return Err(Error::TipNotLongest(canonical_tip));
        }
        Ok(StaleStats::new(self.len() as u64, tip.height))
    }
}

/// Fraction of blocks that ended up outside the canonical chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaleStats {
    pub total_blocks: u64,
    pub main_chain_blocks: u64,
    pub stale_rate: f64,
}

impl StaleStats {
    pub fn new(total_blocks: u64, main_chain_blocks: u64) -> Self {
        debug_assert!(main_chain_blocks <= total_blocks);
        let stale_rate = if total_blocks == 0 {
            0.0
        } else {
            (total_blocks - main_chain_blocks) as f64 / total_blocks as f64
        };
        Self {
            total_blocks,
            main_chain_blocks,
            stale_rate,
        }
    }

    /// Binomial standard error of the stale-rate estimate.
    pub fn binomial_stderr(&self) -> f64 {
        if self.total_blocks == 0 {
            return 0.0;
        }
        (self.stale_rate * (1.0 - self.stale_rate) / self.total_blocks as f64).sqrt()
    }
}

/// Per-node first-arrival times of blocks.
///
/// Entries are write-once. The simulator drops entries below a node's
/// current frontier height with [`ReceptionLog::forget_below`], since tie
/// breaking only ever compares tips at the node's longest height.
#[derive(Debug, Clone, Default)]
pub struct ReceptionLog {
    nodes: Vec<HashMap<BlockId, (f64, u64)>>,
}

impl ReceptionLog {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            nodes: vec![HashMap::new(); n_nodes],
        }
    }

    /// Records the first arrival of `block` at `node`. Returns `false` if the
    /// node had already received it.
    pub fn record(&mut self, node: MinerId, block: &Block, at: f64) -> Result<bool> {
        if at < block.created_at {
            return Err(Error::InvalidParameter {
                name: "first_arrival",
                reason: format!(
                    "block {} reached node {} at {} before it was created at {}",
                    block.id, node, at, block.created_at
                ),
            });
        }
        let entries = &mut self.nodes[node.index()];
        if entries.contains_key(&block.id) {
            return Ok(false);
        }
        entries.insert(block.id, (at, block.height));
        Ok(true)
    }

    pub fn first_arrival(&self, node: MinerId, block: BlockId) -> Option<f64> {
        self.nodes.get(node.index())?.get(&block).map(|&(t, _)| t)
    }

    pub fn forget_below(&mut self, node: MinerId, height: u64) {
        self.nodes[node.index()].retain(|_, &mut (_, h)| h >= height);
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}
