use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::chain::{BlockId, MinerId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A quantum miner's run (or Mallory's attack) reached its scheduled end.
    /// `generation` must match the miner's current one; otherwise the run was
    /// abandoned and the event is dropped.
    RunComplete { miner: MinerId, generation: u64 },
    BlockArrival { node: MinerId, block: BlockId },
    ClassicalFind { miner: MinerId, generation: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue on `(time, sequence)`; sequence numbers are assigned on push.
#[derive(Debug)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_sequence: u64,
    cap: usize,
}

impl EventQueue {
    pub fn new(cap: usize) -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_sequence: 0,
            cap,
        }
    }

    pub fn push(&mut self, time: f64, kind: EventKind) -> Result<()> {
        if self.heap.len() >= self.cap {
            return Err(Error::QueueOverflow(self.cap));
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Event { time, sequence, kind });
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
