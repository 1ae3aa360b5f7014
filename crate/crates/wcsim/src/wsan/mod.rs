//! Multi-channel TDMA mesh network: superframe construction, stochastic
//! per-slot link trials with channel hopping, piggybacked reconfiguration,
//! and delivery-ratio measurement.

pub mod link;
pub mod runtime;
pub mod schedule;

pub use link::{LinkModel, NoiseSchedule};
pub use runtime::{
    run_period, run_phase, FrameTiming, NetContext, NetworkState, PdrWindow, PeriodInputs,
};
pub use schedule::build_superframe;

use serde::{Deserialize, Serialize};

/// Radio channels available for hopping.
pub const NUM_CHANNELS: u8 = 16;
/// TDMA slot length.
pub const SLOT_MS: u64 = 10;

/// Direction of a periodic end-to-end stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// Sensor towards controller; single attempt per hop.
    Sensing,
    /// Controller towards actuator; up to eta attempts per hop.
    Actuation,
}

/// A source-routed periodic stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Flow {
    pub id: u32,
    pub kind: FlowKind,
    /// Node ids from source to destination, length >= 2, acyclic.
    pub route: Vec<u32>,
}

impl Flow {
    pub fn hops(&self) -> usize {
        self.route.len().saturating_sub(1)
    }

    pub fn is_valid(&self) -> bool {
        if self.route.len() < 2 {
            return false;
        }
        let mut seen = std::collections::BTreeSet::new();
        self.route.iter().all(|n| seen.insert(*n))
    }
}

/// One reserved transmission opportunity inside the superframe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// Slot index within the superframe.
    pub slot_offset: usize,
    /// Logical channel; the physical channel also rotates with absolute time.
    pub channel: u8,
    pub sender: u32,
    pub receiver: u32,
    pub flow_id: u32,
    /// Which attempt of the hop this slot serves, 1-based.
    pub tx_index: u32,
}

/// A repeating TDMA schedule. Entries are sorted by (slot_offset, channel).
#[derive(Clone, Debug)]
pub struct Superframe {
    pub entries: Vec<ScheduleEntry>,
    pub length_slots: usize,
}

impl Superframe {
    /// First-attempt slot of every hop, keyed (flow, hop index): the anchor
    /// slots that stay put no matter what transmission count is in force.
    pub fn first_attempt_slots(&self) -> Vec<((u32, usize), usize)> {
        let mut hop_of = std::collections::BTreeMap::new();
        for e in &self.entries {
            if e.tx_index == 1 {
                hop_of.insert((e.flow_id, e.sender, e.receiver), e.slot_offset);
            }
        }
        // Re-key by hop position within each flow in entry order.
        let mut out = Vec::new();
        let mut next_hop: std::collections::BTreeMap<u32, usize> = std::collections::BTreeMap::new();
        let mut sorted: Vec<_> = hop_of.into_iter().collect();
        sorted.sort_by_key(|((_, _, _), slot)| *slot);
        for ((flow, _, _), slot) in sorted {
            let h = next_hop.entry(flow).or_insert(0);
            out.push(((flow, *h), slot));
            *h += 1;
        }
        out
    }

    /// Entries of one hop in attempt order.
    pub fn hop_block(&self, flow_id: u32, sender: u32, receiver: u32) -> Vec<&ScheduleEntry> {
        let mut block: Vec<&ScheduleEntry> = self
            .entries
            .iter()
            .filter(|e| e.flow_id == flow_id && e.sender == sender && e.receiver == receiver)
            .collect();
        block.sort_by_key(|e| e.tx_index);
        block
    }

    /// True when no (slot, channel) pair is reused and no node is booked
    /// twice in the same slot.
    pub fn is_collision_free(&self) -> bool {
        let mut cells = std::collections::BTreeSet::new();
        let mut busy = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !cells.insert((e.slot_offset, e.channel)) {
                return false;
            }
            if !busy.insert((e.slot_offset, e.sender)) || !busy.insert((e.slot_offset, e.receiver))
            {
                return false;
            }
        }
        true
    }
}

/// Outcome of one period of network operation.
#[derive(Clone, Debug, Default)]
pub struct DeliveryReport {
    /// End-to-end delivery per flow, in flow-list order.
    pub flow_delivered: Vec<bool>,
    /// Attempts actually made per flow and hop.
    pub flow_hop_attempts: Vec<Vec<u32>>,
    /// Transmit-slot count per node id.
    pub node_tx: Vec<u64>,
    /// Listen-slot count per node id.
    pub node_rx: Vec<u64>,
}

impl DeliveryReport {
    pub fn new(num_flows: usize, num_nodes: usize) -> Self {
        DeliveryReport {
            flow_delivered: vec![false; num_flows],
            flow_hop_attempts: vec![Vec::new(); num_flows],
            node_tx: vec![0; num_nodes],
            node_rx: vec![0; num_nodes],
        }
    }

    /// Total attempts across the hops of one flow.
    pub fn total_attempts(&self, flow_idx: usize) -> u32 {
        self.flow_hop_attempts[flow_idx].iter().sum()
    }
}
