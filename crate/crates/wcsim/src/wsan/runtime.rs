//! Per-period execution of the superframe.
//!
//! Every node applies its own transmission count per flow; counts change
//! only at frame boundaries, carried to the nodes inside the actuation
//! packets themselves. A sender uses a slot when the hop is still open, the
//! slot's attempt index is within its own count, and it actually holds the
//! packet; a receiver listens when the hop is open and the index is within
//! its own count. Both must be active for the trial to happen at all.

use std::collections::{BTreeMap, VecDeque};

use super::{DeliveryReport, Flow, FlowKind, LinkModel, NoiseSchedule, Superframe, NUM_CHANNELS};
use crate::rng::CounterRng;

/// How frame slots map onto absolute time and channels.
#[derive(Clone, Debug)]
pub struct FrameTiming {
    /// Control period length in slots (period_ms / slot_ms).
    pub slots_per_period: u64,
    /// Frame offsets below this belong to the sensing window.
    pub sensing_slots: usize,
    /// Dead slots between the sensing window and the actuation window
    /// (estimator + solver compute time).
    pub actuation_gap_slots: u64,
    /// Hopping-sequence origin.
    pub channel_base: u8,
    /// Control period length in milliseconds (for noise-segment lookup).
    pub period_ms: u64,
}

impl FrameTiming {
    /// Case-study timing: 200 ms period, 6 sensing slots, 4 compute slots.
    pub fn case_study() -> Self {
        FrameTiming {
            slots_per_period: 20,
            sensing_slots: 6,
            actuation_gap_slots: 4,
            channel_base: 0,
            period_ms: 200,
        }
    }

    /// Bare frame for schedule-level tests: no windows, no gap.
    pub fn standalone(length_slots: usize) -> Self {
        FrameTiming {
            slots_per_period: length_slots as u64,
            sensing_slots: 0,
            actuation_gap_slots: 0,
            channel_base: 0,
            period_ms: length_slots as u64 * super::SLOT_MS,
        }
    }

    pub fn absolute_slot(&self, period: u64, slot_offset: usize) -> u64 {
        let gap = if slot_offset >= self.sensing_slots { self.actuation_gap_slots } else { 0 };
        period * self.slots_per_period + slot_offset as u64 + gap
    }

    pub fn physical_channel(&self, logical: u8, absolute_slot: u64) -> u8 {
        ((logical as u64 + self.channel_base as u64 + absolute_slot) % NUM_CHANNELS as u64) as u8
    }

    pub fn period_seconds(&self, period: u64) -> f64 {
        (period * self.period_ms) as f64 / 1e3
    }
}

/// Everything static the runtime needs for one scenario.
pub struct NetContext<'a> {
    pub flows: &'a [Flow],
    pub frame: &'a Superframe,
    pub timing: &'a FrameTiming,
    pub link: &'a LinkModel,
    pub noise: &'a NoiseSchedule,
}

/// Mutable per-node view of the transmission counts.
#[derive(Clone, Debug)]
pub struct NetworkState {
    pub num_nodes: usize,
    /// applied[flow_idx][node_id]: count the node uses right now.
    applied: Vec<Vec<u32>>,
    /// pending[flow_idx][node_id]: count to adopt at the next frame boundary.
    pending: Vec<Vec<Option<u32>>>,
}

impl NetworkState {
    /// Sensing flows always run single attempts; actuation flows start at
    /// `eta0` on every node.
    pub fn new(flows: &[Flow], num_nodes: usize, eta0: u32) -> Self {
        let applied = flows
            .iter()
            .map(|f| match f.kind {
                FlowKind::Sensing => vec![1; num_nodes],
                FlowKind::Actuation => vec![eta0; num_nodes],
            })
            .collect();
        let pending = flows.iter().map(|_| vec![None; num_nodes]).collect();
        NetworkState { num_nodes, applied, pending }
    }

    pub fn applied(&self, flow_idx: usize, node: u32) -> u32 {
        self.applied[flow_idx][node as usize]
    }

    /// Stage a new count for one node, effective at the next frame boundary.
    pub fn apply_piggyback(&mut self, flow_idx: usize, node: u32, eta_new: u32) {
        self.pending[flow_idx][node as usize] = Some(eta_new);
    }

    /// Adopt all staged counts.
    pub fn frame_boundary(&mut self) {
        for (flow_applied, flow_pending) in self.applied.iter_mut().zip(&mut self.pending) {
            for (a, p) in flow_applied.iter_mut().zip(flow_pending.iter_mut()) {
                if let Some(n) = p.take() {
                    *a = n;
                }
            }
        }
    }

    /// Counts currently applied along a flow's route.
    pub fn route_counts(&self, flows: &[Flow], flow_idx: usize) -> Vec<u32> {
        flows[flow_idx].route.iter().map(|n| self.applied(flow_idx, *n)).collect()
    }
}

/// What each flow carries this period.
#[derive(Clone, Debug)]
pub struct PeriodInputs {
    /// Whether the flow's source has a packet to send, per flow index.
    pub has_packet: Vec<bool>,
    /// Count-reconfiguration command riding in the flow's packet (actuation
    /// flows only), per flow index.
    pub piggyback: Vec<Option<u32>>,
}

impl PeriodInputs {
    pub fn all_packets(num_flows: usize) -> Self {
        PeriodInputs { has_packet: vec![true; num_flows], piggyback: vec![None; num_flows] }
    }
}

/// Execute all slots of one window kind for one period, accumulating into
/// `report`.
pub fn run_phase(
    ctx: &NetContext,
    net: &mut NetworkState,
    kind: FlowKind,
    inputs: &PeriodInputs,
    period: u64,
    rng: &CounterRng,
    report: &mut DeliveryReport,
) {
    let flow_idx_of: BTreeMap<u32, usize> =
        ctx.flows.iter().enumerate().map(|(i, f)| (f.id, i)).collect();
    // Hop index per (flow, sender, receiver).
    let mut hop_of: BTreeMap<(u32, u32, u32), usize> = BTreeMap::new();
    for f in ctx.flows {
        for h in 0..f.hops() {
            hop_of.insert((f.id, f.route[h], f.route[h + 1]), h);
        }
    }

    let shared_noise =
        ctx.noise.shared_level(rng, period, ctx.timing.period_seconds(period));

    // In-flight position and per-hop completion per flow.
    let mut packet_pos: Vec<usize> = vec![0; ctx.flows.len()];
    let mut hop_done: Vec<Vec<bool>> = ctx.flows.iter().map(|f| vec![false; f.hops()]).collect();
    let mut attempts: Vec<Vec<u32>> = ctx.flows.iter().map(|f| vec![0; f.hops()]).collect();

    // The source of an actuation flow is co-located with the manager: it
    // learns the new count directly whenever it has a packet carrying one.
    for (i, f) in ctx.flows.iter().enumerate() {
        if f.kind == kind && inputs.has_packet[i] {
            if let Some(cmd) = inputs.piggyback[i] {
                net.apply_piggyback(i, f.route[0], cmd);
            }
        }
    }

    for e in &ctx.frame.entries {
        let fi = flow_idx_of[&e.flow_id];
        let flow = &ctx.flows[fi];
        if flow.kind != kind || !inputs.has_packet[fi] {
            continue;
        }
        let h = hop_of[&(e.flow_id, e.sender, e.receiver)];
        if hop_done[fi][h] {
            continue;
        }
        let listens = e.tx_index <= net.applied(fi, e.receiver);
        let transmits = e.tx_index <= net.applied(fi, e.sender) && packet_pos[fi] == h;
        if listens {
            report.node_rx[e.receiver as usize] += 1;
        }
        if transmits {
            report.node_tx[e.sender as usize] += 1;
            attempts[fi][h] += 1;
        }
        if transmits && listens {
            let abs_slot = ctx.timing.absolute_slot(period, e.slot_offset);
            let phys = ctx.timing.physical_channel(e.channel, abs_slot);
            let noise = ctx.noise.link_level(rng, period, shared_noise, e.sender, e.receiver);
            if ctx.link.trial(rng, e.sender, e.receiver, phys, abs_slot, noise) {
                hop_done[fi][h] = true;
                packet_pos[fi] = h + 1;
                if let Some(cmd) = inputs.piggyback[fi] {
                    net.apply_piggyback(fi, e.receiver, cmd);
                }
            }
        }
    }

    for (fi, f) in ctx.flows.iter().enumerate() {
        if f.kind != kind || !inputs.has_packet[fi] {
            continue;
        }
        report.flow_delivered[fi] = packet_pos[fi] == f.hops();
        report.flow_hop_attempts[fi] = attempts[fi].clone();
    }
}

/// Run a whole period: sensing window, actuation window, frame boundary.
/// Scenario pipelines interleave compute between the windows and call the
/// pieces directly; this composition serves self-contained uses.
pub fn run_period(
    ctx: &NetContext,
    net: &mut NetworkState,
    inputs: &PeriodInputs,
    period: u64,
    rng: &CounterRng,
) -> DeliveryReport {
    let mut report = DeliveryReport::new(ctx.flows.len(), net.num_nodes);
    run_phase(ctx, net, FlowKind::Sensing, inputs, period, rng, &mut report);
    run_phase(ctx, net, FlowKind::Actuation, inputs, period, rng, &mut report);
    net.frame_boundary();
    report
}

/// Sliding end-to-end delivery ratio over the last `cap` periods.
#[derive(Clone, Debug)]
pub struct PdrWindow {
    buf: VecDeque<bool>,
    cap: usize,
}

impl PdrWindow {
    pub fn new(cap: usize) -> Self {
        PdrWindow { buf: VecDeque::with_capacity(cap.max(1)), cap: cap.max(1) }
    }

    pub fn push(&mut self, delivered: bool) {
        if self.buf.len() == self.cap {
            self.buf.pop_front();
        }
        self.buf.push_back(delivered);
    }

    /// Delivery fraction; an empty window reads as fully connected.
    pub fn ratio(&self) -> f64 {
        if self.buf.is_empty() {
            return 1.0;
        }
        self.buf.iter().filter(|d| **d).count() as f64 / self.buf.len() as f64
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}
