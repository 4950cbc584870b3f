//! Event records shared by the pruning chain and the coalescent chain.

use serde::Serialize;

use crate::partition::Partition;

/// One coalescence event. `cut_node` is the depth-first id of the cut node
/// for the pruning chain and `-1` for the coalescent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub step: usize,
    pub cut_node: i64,
    pub merged: Vec<Vec<u32>>,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainTrace {
    pub initial: Partition,
    pub events: Vec<TraceEvent>,
}

impl ChainTrace {
    /// Number of coalescence events.
    pub fn z(&self) -> usize {
        self.events.len()
    }

    /// Number of blocks merged in the final event.
    pub fn b(&self) -> Option<usize> {
        self.events.last().map(|e| e.merged.len())
    }

    pub fn first_event_size(&self) -> Option<usize> {
        self.events.first().map(|e| e.merged.len())
    }

    pub fn final_partition(&self) -> &Partition {
        self.events.last().map_or(&self.initial, |e| &e.partition)
    }

    pub fn is_terminal(&self) -> bool {
        self.final_partition().is_trivial()
    }

    pub fn stats(&self) -> ChainStats {
        let n = self.initial.ground_size();
        let largest = self.events.last().map_or(n, |e| e.merged.iter().map(Vec::len).max().unwrap_or(0));
        ChainStats {
            z: self.z(),
            b: self.b().unwrap_or(0),
            first_event_size: self.first_event_size().unwrap_or(0),
            largest_block_fraction: largest as f64 / n as f64,
        }
    }

    /// Successive partitions joined by ` > `, starting with the initial one.
    pub fn trajectory_key(&self) -> String {
        let mut key = self.initial.to_string();
        for e in &self.events {
            key.push_str(" > ");
            key.push_str(&e.partition.to_string());
        }
        key
    }

    /// One JSON object per event, newline terminated.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }
}

/// Summary statistics of one chain run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainStats {
    /// Number of events.
    pub z: usize,
    /// Blocks merged in the last event (0 when `n = 1`).
    pub b: usize,
    /// Blocks merged in the first event (0 when `n = 1`).
    pub first_event_size: usize,
    /// Largest block merged in the last event, as a fraction of `n`.
    pub largest_block_fraction: f64,
}

/// Merges `parts` into the largest of them (small-to-large).
pub(crate) fn merge_small_to_large(mut parts: Vec<Vec<u32>>) -> Vec<u32> {
    let big = parts.iter().enumerate().max_by_key(|(_, p)| p.len()).map(|(i, _)| i).unwrap_or(0);
    let mut out = parts.swap_remove(big);
    for p in parts {
        out.extend(p);
    }
    out
}
