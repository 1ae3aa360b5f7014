//! Actuator-side command buffer.
//!
//! The controller ships a whole input sequence each period; the actuator
//! stores the most recent sequence it actually received and plays it forward.
//! When deliveries stop, the buffer keeps indexing into the stale sequence,
//! and once the sequence is exhausted it holds the last entry.

use nalgebra::DVector;

use crate::error::{Result, SimError};

#[derive(Clone, Debug)]
pub struct ActuationBuffer {
    seq: Vec<DVector<f64>>,
    /// Period index at which `seq` was computed.
    issued_at: u64,
}

impl ActuationBuffer {
    /// A fresh buffer plays the holding input until the first delivery.
    pub fn new(horizon: usize, u_hold: DVector<f64>) -> Self {
        ActuationBuffer { seq: vec![u_hold; horizon.max(1)], issued_at: 0 }
    }

    /// Replace the stored sequence with a newly delivered one.
    pub fn push(&mut self, seq: Vec<DVector<f64>>, issued_at: u64) -> Result<()> {
        if seq.is_empty() {
            return Err(SimError::config("actuation push: empty sequence"));
        }
        if seq.len() != self.seq.len() {
            return Err(SimError::config(format!(
                "actuation push: sequence length {} does not match buffer length {}",
                seq.len(),
                self.seq.len()
            )));
        }
        self.seq = seq;
        self.issued_at = issued_at;
        Ok(())
    }

    /// Input to apply during period `now`: entry `now - issued_at` of the
    /// stored sequence, clamped to its last entry once the sequence runs out.
    pub fn pop(&self, now: u64) -> &DVector<f64> {
        let offset = (now.saturating_sub(self.issued_at) as usize).min(self.seq.len() - 1);
        &self.seq[offset]
    }

    /// How many periods the current sequence has been in service.
    pub fn age(&self, now: u64) -> u64 {
        now.saturating_sub(self.issued_at)
    }
}
