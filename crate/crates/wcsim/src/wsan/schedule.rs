//! Greedy superframe construction.
//!
//! Hops are placed in route order, flow by flow, each hop getting a block of
//! consecutive slots sized for the worst-case transmission count (capacity
//! build). At runtime a smaller count simply leaves the tail of the block
//! unused, so the first-attempt slot of every hop never moves when counts
//! are reconfigured; that anchor is what keeps mixed-count operation alive.

use std::collections::BTreeSet;

use super::{Flow, FlowKind, ScheduleEntry, Superframe, NUM_CHANNELS};
use crate::error::{Result, SimError};

/// Build the repeating schedule. Sensing flows (one attempt per hop) are
/// placed in slots [0, sensing_slots); actuation flows (blocks of `eta_max`
/// slots) in [sensing_slots, length_slots). Earliest slot wins, then lowest
/// channel; a node is reserved for the whole block of any hop it serves.
pub fn build_superframe(
    flows: &[Flow],
    eta_max: u32,
    length_slots: usize,
    sensing_slots: usize,
) -> Result<Superframe> {
    if eta_max < 1 {
        return Err(SimError::config("build_superframe: eta_max must be at least 1"));
    }
    if sensing_slots > length_slots {
        return Err(SimError::config(
            "build_superframe: sensing window exceeds the frame length",
        ));
    }
    let mut ids = BTreeSet::new();
    for f in flows {
        if !f.is_valid() {
            return Err(SimError::config(format!(
                "build_superframe: flow {} has an invalid route",
                f.id
            )));
        }
        if !ids.insert(f.id) {
            return Err(SimError::config(format!("build_superframe: duplicate flow id {}", f.id)));
        }
    }

    let mut occupied = vec![[false; NUM_CHANNELS as usize]; length_slots];
    let mut node_busy: BTreeSet<(usize, u32)> = BTreeSet::new();
    let mut entries: Vec<ScheduleEntry> = Vec::new();

    for f in flows {
        let (win_start, win_end, block_len) = match f.kind {
            FlowKind::Sensing => (0usize, sensing_slots, 1usize),
            FlowKind::Actuation => (sensing_slots, length_slots, eta_max as usize),
        };
        let mut earliest = win_start;
        for hop in 0..f.hops() {
            let (s, r) = (f.route[hop], f.route[hop + 1]);
            let placed = place_block(
                &occupied,
                &node_busy,
                earliest,
                win_end,
                block_len,
                s,
                r,
            );
            let (start, ch) = placed.ok_or_else(|| {
                SimError::scheduling(format!(
                    "flow {} hop {}->{} does not fit: needs {} consecutive slots in window \
                     [{}, {})",
                    f.id, s, r, block_len, earliest, win_end
                ))
            })?;
            for (i, slot) in (start..start + block_len).enumerate() {
                occupied[slot][ch as usize] = true;
                node_busy.insert((slot, s));
                node_busy.insert((slot, r));
                entries.push(ScheduleEntry {
                    slot_offset: slot,
                    channel: ch,
                    sender: s,
                    receiver: r,
                    flow_id: f.id,
                    tx_index: i as u32 + 1,
                });
            }
            // The next hop can start only after this block has ended.
            earliest = start + block_len;
        }
    }

    entries.sort_by_key(|e| (e.slot_offset, e.channel));
    let frame = Superframe { entries, length_slots };
    debug_assert!(frame.is_collision_free());
    Ok(frame)
}

fn place_block(
    occupied: &[[bool; NUM_CHANNELS as usize]],
    node_busy: &BTreeSet<(usize, u32)>,
    earliest: usize,
    win_end: usize,
    block_len: usize,
    s: u32,
    r: u32,
) -> Option<(usize, u8)> {
    if win_end < block_len {
        return None;
    }
    for start in earliest..=win_end - block_len {
        let nodes_free = (start..start + block_len)
            .all(|slot| !node_busy.contains(&(slot, s)) && !node_busy.contains(&(slot, r)));
        if !nodes_free {
            continue;
        }
        for ch in 0..NUM_CHANNELS {
            if (start..start + block_len).all(|slot| !occupied[slot][ch as usize]) {
                return Some((start, ch));
            }
        }
    }
    None
}
