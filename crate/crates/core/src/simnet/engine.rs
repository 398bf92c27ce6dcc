use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::queue::{EventKind, EventQueue};
use super::{BlockRecord, Horizon, RaceStats, SimConfig, SimResult};
use crate::chain::{Block, BlockId, BlockTree, MinerId, ReceptionLog, GENESIS};
use crate::error::Result;
use crate::strategy::{Action, Miner, MinerState, Reception, StrategyKind};
use crate::tiebreak::{reconsider, TipView};

/// A fork-choice decision at a node that had more than one tip to pick from.
#[derive(Debug)]
pub struct TipChoice<'a> {
    pub node: MinerId,
    pub now: f64,
    /// The block whose arrival (or creation) prompted the decision.
    pub incoming: BlockId,
    pub tips: &'a [TipView],
    pub previous: BlockId,
    pub chosen: BlockId,
}

/// Hooks into a running replication.
pub trait Observer {
    fn on_block(&mut self, _block: &Block, _early: bool) {}
    /// A block reaching a node other than its creator.
    fn on_arrival(&mut self, _node: MinerId, _block: &Block, _at: f64) {}
    fn on_tip_choice(&mut self, _choice: &TipChoice<'_>) {}
}

pub struct NoopObserver;

impl Observer for NoopObserver {}

pub fn run_replication(cfg: &SimConfig) -> Result<SimResult> {
    run_replication_observed(cfg, &mut NoopObserver)
}

pub fn run_replication_observed<O: Observer>(cfg: &SimConfig, observer: &mut O) -> Result<SimResult> {
    cfg.validate()?;
    Engine::new(cfg, observer)?.run()
}

struct NodeView {
    height: u64,
    tips: Vec<TipView>,
    tip: BlockId,
    last_foreign_arrival: f64,
}

struct Slot {
    miner: Miner,
    state: Option<MinerState>,
    generation: u64,
    rng: ChaCha8Rng,
}

/// FxHash-style running digest of the processed events.
struct Digest(u64);

impl Digest {
    fn mix(&mut self, word: u64) {
        self.0 = (self.0.rotate_left(5) ^ word).wrapping_mul(0x517c_c1b7_2722_0a95);
    }
}

struct Engine<'a, O> {
    cfg: &'a SimConfig,
    observer: &'a mut O,
    tree: BlockTree,
    log: ReceptionLog,
    nodes: Vec<NodeView>,
    slots: Vec<Slot>,
    queue: EventQueue,
    digest: Digest,
    early: Vec<bool>,
    per_miner_total: Vec<u64>,
    correlated: u64,
    events: u64,
    now: f64,
    t_iteration: f64,
}

impl<'a, O: Observer> Engine<'a, O> {
    fn new(cfg: &'a SimConfig, observer: &'a mut O) -> Result<Self> {
        let n = cfg.network.n_miners;
        let run = cfg.calibration.quantum(n)?;
        let classical = cfg.calibration.classical(n)?;
        let slots = cfg
            .miners
            .iter()
            .map(|spec| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.network.seed);
                rng.set_stream(spec.miner_id.0 as u64);
                Ok(Slot {
                    miner: Miner::new(spec.clone(), run, classical, cfg.restart_delay, cfg.aggressive_on_tie)?,
                    state: None,
                    generation: 0,
                    rng,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let nodes = (0..n)
            .map(|_| NodeView {
                height: 0,
                tips: vec![TipView::new(GENESIS, 0.0, 0.0)],
                tip: GENESIS,
                last_foreign_arrival: f64::NEG_INFINITY,
            })
            .collect();
        Ok(Self {
            cfg,
            observer,
            tree: BlockTree::new(),
            log: ReceptionLog::new(n),
            nodes,
            slots,
            queue: EventQueue::new(cfg.queue_cap),
            digest: Digest(0xcbf2_9ce4_8422_2325),
            early: vec![false],
            per_miner_total: vec![0; n],
            correlated: 0,
            events: 0,
            now: 0.0,
            t_iteration: run.t_iteration,
        })
    }

    fn run(mut self) -> Result<SimResult> {
        for i in 0..self.slots.len() {
            self.begin_attempt(i, GENESIS, 0.0, None)?;
        }
        let horizon = self.cfg.network.horizon;
        let mut reached_at: Option<f64> = None;
        while let Some(ev) = self.queue.pop() {
            if let Horizon::Minutes { minutes } = horizon {
                if ev.time > minutes {
                    break;
                }
            }
            if reached_at.is_some_and(|t| ev.time > t) {
                break;
            }
            self.now = ev.time;
            self.events += 1;
            self.digest.mix(ev.time.to_bits());
            match ev.kind {
                EventKind::RunComplete { miner, generation } | EventKind::ClassicalFind { miner, generation } => {
                    self.digest.mix((miner.0 as u64) << 32 | 1);
                    self.on_attempt_end(miner.index(), generation)?;
                }
                EventKind::BlockArrival { node, block } => {
                    self.digest.mix((node.0 as u64) << 32 | 2);
                    self.digest.mix(block.0);
                    self.on_arrival(node.index(), block)?;
                }
            }
            if let Horizon::MainChainBlocks { blocks } = horizon {
                if reached_at.is_none() && self.tree.max_height() >= blocks {
                    reached_at = Some(self.now);
                }
            }
        }
        self.finish()
    }

    fn begin_attempt(&mut self, i: usize, parent: BlockId, start: f64, victim_ts: Option<f64>) -> Result<()> {
        let slot = &mut self.slots[i];
        slot.generation += 1;
        slot.state = slot.miner.start_run(parent, start, victim_ts, &mut slot.rng);
        if let Some(state) = &slot.state {
            if state.finish_at.is_finite() {
                let miner = MinerId(i as u32);
                let generation = slot.generation;
                let kind = if slot.miner.strategy().is_classical() {
                    EventKind::ClassicalFind { miner, generation }
                } else {
                    EventKind::RunComplete { miner, generation }
                };
                self.queue.push(state.finish_at, kind)?;
            }
        }
        Ok(())
    }

    fn on_attempt_end(&mut self, i: usize, generation: u64) -> Result<()> {
        let slot = &mut self.slots[i];
        if slot.generation != generation {
            return Ok(());
        }
        let Some(state) = &slot.state else {
            return Ok(());
        };
        let action = slot.miner.on_run_complete(state, &mut slot.rng);
        self.apply(i, action)
    }

    fn on_arrival(&mut self, x: usize, id: BlockId) -> Result<()> {
        self.nodes[x].last_foreign_arrival = self.now;
        let reception = self.receive(x, id, false)?;
        let block = self.tree.get(id).expect("delivered blocks exist");
        self.observer.on_arrival(MinerId(x as u32), block, self.now);
        let (block_miner, block_parent, block_ts) = (block.miner(), block.parent(), block.timestamp());

        let slot = &mut self.slots[x];
        if slot.miner.strategy() == StrategyKind::Mallory {
            if slot.state.is_none() && block_miner.is_some() && block_miner == slot.miner.spec().target_victim {
                self.begin_attempt(x, block_parent, self.now, Some(block_ts))?;
            }
            return Ok(());
        }
        let (Some(reception), Some(state)) = (reception, &slot.state) else {
            return Ok(());
        };
        let action = slot.miner.on_block_received(state, reception, self.now, &mut slot.rng);
        self.apply(x, action)
    }

    /// Updates node `x`'s view with block `id` and runs its fork choice.
    /// Returns `None` when the block is below the node's longest height.
    fn receive(&mut self, x: usize, id: BlockId, own: bool) -> Result<Option<Reception>> {
        let block = self.tree.get(id).expect("received blocks exist");
        let node_id = MinerId(x as u32);
        self.log.record(node_id, block, self.now)?;
        let view = TipView::new(id, block.timestamp(), self.now);
        let height = block.height();
        let nv = &mut self.nodes[x];
        let previous = nv.tip;
        if height > nv.height {
            nv.height = height;
            nv.tips.clear();
            nv.tips.push(view);
            nv.tip = id;
            self.log.forget_below(node_id, height);
            return Ok(Some(Reception {
                selected_tip: id,
                tip_changed: true,
                tie: false,
            }));
        }
        if height < nv.height {
            return Ok(None);
        }
        nv.tips.push(view);
        // A miner adopts its own new block first, then the rule may move it.
        let current = if own { id } else { previous };
        let chosen = reconsider(self.cfg.tie_break_rule, &nv.tips, current, &mut self.slots[x].rng)?;
        self.observer.on_tip_choice(&TipChoice {
            node: node_id,
            now: self.now,
            incoming: id,
            tips: &nv.tips,
            previous: current,
            chosen,
        });
        nv.tip = chosen;
        Ok(Some(Reception {
            selected_tip: chosen,
            tip_changed: chosen != previous,
            tie: chosen == previous,
        }))
    }

    fn apply(&mut self, i: usize, action: Action) -> Result<()> {
        match action {
            Action::Continue => Ok(()),
            Action::Idle => {
                let slot = &mut self.slots[i];
                slot.state = None;
                slot.generation += 1;
                Ok(())
            }
            Action::Restart { parent, after_failure } => {
                let delay = if after_failure { self.slots[i].miner.restart_delay() } else { 0.0 };
                self.begin_attempt(i, parent, self.now + delay, None)
            }
            Action::Emit {
                parent,
                timestamp,
                early,
            } => {
                let state = self.slots[i].state.take().expect("emitting miner has an attempt");
                assert_eq!(
                    timestamp.to_bits(),
                    state.committed_timestamp.to_bits(),
                    "emitted timestamp must be the one committed at run start"
                );
                self.emit(i, parent, timestamp, early)?;
                if self.slots[i].miner.strategy() == StrategyKind::Mallory {
                    return self.apply(i, Action::Idle);
                }
                let tip = self.nodes[i].tip;
                self.begin_attempt(i, tip, self.now, None)
            }
        }
    }

    fn emit(&mut self, i: usize, parent: BlockId, timestamp: f64, early: bool) -> Result<()> {
        let id = BlockId(self.early.len() as u64);
        let miner = MinerId(i as u32);
        let block = self
            .tree
            .insert_block(Block::new(id, parent, miner, timestamp, self.now))?
            .clone();
        self.early.push(early);
        self.per_miner_total[i] += 1;
        if self.now - self.nodes[i].last_foreign_arrival <= self.t_iteration * (1.0 + 1e-9) {
            self.correlated += 1;
        }
        self.digest.mix(id.0 ^ timestamp.to_bits());
        self.observer.on_block(&block, early);

        self.receive(i, id, true)?;
        let delays = &self.cfg.network.delay_model;
        let max_delay = delays.max_delay();
        for x in 0..self.nodes.len() {
            if x == i {
                continue;
            }
            let to = MinerId(x as u32);
            // Deliver no earlier than every ancestor reaches `to`, so a node
            // never sees a child before its parent.
            let mut at = block.created_at() + delays.delay(miner, to);
            let mut cur = block.parent();
            while cur != GENESIS {
                let anc = self.tree.get(cur).expect("ancestor exists");
                let anc_miner = anc.miner().expect("non-genesis");
                at = at.max(anc.created_at() + delays.delay(anc_miner, to));
                if anc.created_at() + max_delay <= at {
                    break;
                }
                cur = anc.parent();
            }
            self.queue.push(at, EventKind::BlockArrival { node: to, block: id })?;
        }
        Ok(())
    }

    fn finish(self) -> Result<SimResult> {
        let tips = self.tree.longest_tips();
        let canonical = *tips
            .iter()
            .max_by(|a, b| {
                let ca = self.nodes.iter().filter(|n| n.tip == **a).count();
                let cb = self.nodes.iter().filter(|n| n.tip == **b).count();
                // prefer more adopters, then the lower id
                ca.cmp(&cb).then_with(|| b.cmp(a))
            })
            .expect("tree has at least genesis");
        let stale_stats = self.tree.stale_stats(canonical)?;
        let main = self.tree.ancestry(canonical);
        let n = self.slots.len();
        let mut per_miner_main = vec![0u64; n];
        for id in &main {
            if let Some(m) = self.tree.get(*id).and_then(Block::miner) {
                per_miner_main[m.index()] += 1;
            }
        }

        let aggressive = |b: &BlockId| {
            self.tree
                .get(*b)
                .and_then(Block::miner)
                .is_some_and(|m| self.slots[m.index()].miner.strategy().is_aggressive())
        };
        let mut races = RaceStats::default();
        for h in 1..=self.tree.max_height() {
            let level = self.tree.at_height(h);
            if level.len() < 2 {
                continue;
            }
            races.races += 1;
            let winner = level.iter().find(|b| main.contains(b));
            if level.iter().any(|b| self.early[b.0 as usize]) {
                races.races_with_early += 1;
                if winner.is_some_and(|w| self.early[w.0 as usize]) {
                    races.early_wins += 1;
                }
            }
            if level.iter().any(aggressive) {
                races.races_with_aggressive += 1;
                if winner.is_some_and(aggressive) {
                    races.aggressive_wins += 1;
                }
            }
        }

        let trace = if self.cfg.emit_trace {
            self.tree
                .blocks()
                .into_iter()
                .map(|b| BlockRecord {
                    id: b.id().0,
                    parent: b.parent().0,
                    miner: b.miner().map_or(0, |m| m.0),
                    timestamp: b.timestamp(),
                    created_at: b.created_at(),
                    height: b.height(),
                    in_main_chain: main.contains(&b.id()),
                    early: self.early[b.id().0 as usize],
                })
                .collect()
        } else {
            Vec::new()
        };

        let total = stale_stats.total_blocks;
        Ok(SimResult {
            stale_stats,
            per_miner_main_chain_blocks: per_miner_main,
            per_miner_total_blocks: self.per_miner_total,
            fork_events: self.tree.fork_heights() as u64,
            measure_correlation: if total == 0 { 0.0 } else { self.correlated as f64 / total as f64 },
            early_blocks: self.early.iter().filter(|&&e| e).count() as u64,
            races,
            canonical_tip: canonical.0,
            end_time: self.now,
            events_processed: self.events,
            trace_digest: format!("{:016x}", self.digest.0),
            trace,
        })
    }
}
