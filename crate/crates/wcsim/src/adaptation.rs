//! Transmission-count adaptation.
//!
//! The holistic controller steers the per-loop transmission count from two
//! signals: the Lyapunov value of the estimated state (control health) and
//! the measured packet-delivery ratio (network health). Redundancy rises
//! immediately when the certificate threshold is breached and falls only
//! after a long quiet stretch, so the loop sheds energy without giving up
//! the safety margin. A reactive baseline driven by PDR thresholds alone is
//! included for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::mpc::LyapunovConstants;

/// Tuning for the holistic adaptation law.
#[derive(Clone, Debug)]
pub struct AdaptConfig {
    /// Dead-band factor: decrease is considered only below lambda * alpha1 * gamma.
    pub lambda: f64,
    /// Hold window after any change, in control periods (schedule propagation).
    pub tau1: u64,
    /// Quiet time required before a decrease, in control periods.
    pub tau2: u64,
    /// Admissible squared deviation from the setpoint.
    pub gamma: f64,
    /// Minimum delivery ratio below which redundancy is never reduced.
    pub rho_min: f64,
    /// Transmission-count ceiling (schedule capacity).
    pub eta_max: u32,
    /// Transmission-count floor.
    pub eta_floor: u32,
    /// Certificate constants of the loop this instance manages.
    pub consts: LyapunovConstants,
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(SimError::config("adaptation: lambda must lie in (0,1)"));
        }
        if self.tau1 < 1 || self.tau2 < 1 {
            return Err(SimError::config("adaptation: tau1 and tau2 must be at least 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(SimError::config("adaptation: gamma must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rho_min) {
            return Err(SimError::config("adaptation: rho_min must lie in [0,1]"));
        }
        if self.eta_floor < 1 || self.eta_floor > self.eta_max {
            return Err(SimError::config("adaptation: need 1 <= eta_floor <= eta_max"));
        }
        Ok(())
    }

    /// Redundancy is raised when V exceeds this.
    pub fn upper_threshold(&self) -> f64 {
        self.consts.alpha1 * self.gamma
    }

    /// Redundancy may be lowered when V stays below this.
    pub fn lower_threshold(&self) -> f64 {
        self.lambda * self.consts.alpha1 * self.gamma
    }

    /// Per-period geometric factor of the expected-decay envelope.
    pub fn envelope_ratio(&self) -> f64 {
        1.0 - self.consts.alpha3 / self.consts.alpha2
    }
}

/// Per-loop adaptation state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptState {
    /// Current transmission count.
    pub eta: u32,
    /// Direction of the active mode: -1 none yet, 0 decreasing, 1 increasing.
    pub delta: i8,
    /// Period index of the last mode entry or decrease.
    pub t0: u64,
    /// Changes are suppressed while t < hold_until.
    pub hold_until: u64,
    /// Lyapunov value captured at increase-mode entry, for the decay test.
    pub v_ref: f64,
}

impl AdaptState {
    pub fn new(eta0: u32) -> Self {
        AdaptState { eta: eta0, delta: -1, t0: 0, hold_until: 0, v_ref: 0.0 }
    }
}

/// One step of the holistic law. Returns the successor state and, when the
/// transmission count changed, the value to disseminate.
pub fn hc_step(
    st: &AdaptState,
    cfg: &AdaptConfig,
    v: f64,
    rho: f64,
    t: u64,
) -> (AdaptState, Option<u32>) {
    let mut next = st.clone();
    if t < st.hold_until {
        // A change is still propagating; observe but do not act.
        return (next, None);
    }

    if v < cfg.lower_threshold() && st.eta > cfg.eta_floor && rho >= cfg.rho_min {
        if next.delta != 0 {
            next.delta = 0;
            next.t0 = t;
        }
        if t - next.t0 > cfg.tau2 {
            next.eta -= 1;
            next.t0 = t;
            next.hold_until = t + cfg.tau1;
            let cmd = next.eta;
            return (next, Some(cmd));
        }
        (next, None)
    } else if v > cfg.upper_threshold() && st.eta < cfg.eta_max {
        if next.delta != 1 {
            // Mode entry: act at once, and remember where the decay envelope
            // is anchored.
            next.delta = 1;
            next.t0 = t;
            next.v_ref = v;
            next.eta += 1;
            next.hold_until = t + cfg.tau1;
            let cmd = next.eta;
            return (next, Some(cmd));
        }
        let envelope = cfg.envelope_ratio().powf((t - next.t0) as f64) * next.v_ref;
        if v > envelope {
            // The value is not decaying as certified: add redundancy again,
            // keeping the original anchor.
            next.eta += 1;
            next.hold_until = t + cfg.tau1;
            let cmd = next.eta;
            return (next, Some(cmd));
        }
        (next, None)
    } else {
        (next, None)
    }
}

/// PDR band of the reactive baseline: raise below, lower above.
pub const PN_RAISE_BELOW: f64 = 0.8;
pub const PN_LOWER_ABOVE: f64 = 0.9;

/// One step of the reactive baseline: thresholds on delivery ratio only.
pub fn pn_step(eta: u32, rho: f64, eta_max: u32) -> u32 {
    if rho < PN_RAISE_BELOW {
        (eta + 1).min(eta_max)
    } else if rho > PN_LOWER_ABOVE {
        (eta - 1).max(1)
    } else {
        eta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn consts(alpha1: f64, alpha2: f64, alpha3: f64) -> LyapunovConstants {
        LyapunovConstants {
            alpha1,
            alpha2,
            alpha3,
            p: DMatrix::identity(1, 1),
            k: DMatrix::zeros(1, 1),
        }
    }

    fn cfg() -> AdaptConfig {
        // Thresholds: upper 32, lower 3.2; envelope shrinks 1% per period.
        let c = AdaptConfig {
            lambda: 0.1,
            tau1: 5,
            tau2: 3,
            gamma: 16.0,
            rho_min: 0.7,
            eta_max: 4,
            eta_floor: 1,
            consts: consts(2.0, 100.0, 1.0),
        };
        c.validate().unwrap();
        c
    }

    #[test]
    fn breach_raises_immediately_and_freezes() {
        let st = AdaptState::new(2);
        let (next, cmd) = hc_step(&st, &cfg(), 33.0, 1.0, 100);
        assert_eq!(cmd, Some(3));
        assert_eq!(next.eta, 3);
        assert_eq!(next.delta, 1);
        assert_eq!(next.t0, 100);
        assert_eq!(next.v_ref, 33.0);
        assert_eq!(next.hold_until, 105);
    }

    #[test]
    fn dead_band_holds_everything() {
        let st = AdaptState::new(2);
        for v in [3.2, 10.0, 32.0] {
            let (next, cmd) = hc_step(&st, &cfg(), v, 1.0, 50);
            assert_eq!(cmd, None);
            assert_eq!(next, st);
        }
    }

    #[test]
    fn poor_connectivity_blocks_the_decrease() {
        let st = AdaptState::new(2);
        let (next, cmd) = hc_step(&st, &cfg(), 0.5, 0.6, 50);
        assert_eq!(cmd, None);
        assert_eq!(next.eta, 2);
        assert_eq!(next.delta, -1);
    }

    #[test]
    fn decrease_waits_out_the_cooldown() {
        let c = cfg();
        let mut st = AdaptState::new(3);
        let mut changed_at = None;
        for t in 10..20 {
            let (next, cmd) = hc_step(&st, &c, 0.5, 0.95, t);
            if cmd.is_some() {
                changed_at = Some((t, cmd.unwrap()));
                st = next;
                break;
            }
            st = next;
        }
        // Entry at t=10 sets the anchor; tau2=3 means the first decrement
        // lands when t - t0 > 3, i.e. t = 14.
        assert_eq!(changed_at, Some((14, 2)));
        assert_eq!(st.hold_until, 19);
        assert_eq!(st.t0, 14);
        assert_eq!(st.delta, 0);
    }

    #[test]
    fn stalled_decay_raises_again_without_moving_the_anchor() {
        let c = cfg();
        let st = AdaptState { eta: 3, delta: 1, t0: 100, hold_until: 0, v_ref: 40.0 };
        // Envelope at t=103 is 40 * 0.99^3 = 38.812; a value above it means
        // the certified decay is not happening.
        let (next, cmd) = hc_step(&st, &c, 39.0, 1.0, 103);
        assert_eq!(cmd, Some(4));
        assert_eq!(next.eta, 4);
        assert_eq!(next.t0, 100);
        assert_eq!(next.v_ref, 40.0);
        assert_eq!(next.hold_until, 108);
        // A value below the envelope is on track: hold.
        let (next2, cmd2) = hc_step(&st, &c, 38.0, 1.0, 103);
        assert_eq!(cmd2, None);
        assert_eq!(next2.eta, 3);
    }

    #[test]
    fn hold_window_suppresses_all_changes() {
        let c = cfg();
        let st = AdaptState { eta: 2, delta: 1, t0: 10, hold_until: 20, v_ref: 33.0 };
        let (next, cmd) = hc_step(&st, &c, 1000.0, 1.0, 19);
        assert_eq!(cmd, None);
        assert_eq!(next, st);
        // The window reopens exactly at hold_until.
        let (next2, cmd2) = hc_step(&st, &c, 1000.0, 1.0, 20);
        assert_eq!(cmd2, Some(3));
        assert_eq!(next2.eta, 3);
    }

    #[test]
    fn ceiling_and_floor_are_respected() {
        let c = cfg();
        let top = AdaptState { eta: 4, delta: 1, t0: 0, hold_until: 0, v_ref: 50.0 };
        let (next, cmd) = hc_step(&top, &c, 1e6, 1.0, 30);
        assert_eq!(cmd, None);
        assert_eq!(next.eta, 4);
        let bottom = AdaptState { eta: 1, delta: 0, t0: 0, hold_until: 0, v_ref: 0.0 };
        let (next, cmd) = hc_step(&bottom, &c, 0.0, 1.0, 30);
        assert_eq!(cmd, None);
        assert_eq!(next.eta, 1);
    }

    #[test]
    fn identical_traces_yield_identical_decisions() {
        let c = cfg();
        let run = || {
            let mut st = AdaptState::new(2);
            let mut etas = Vec::new();
            for t in 0..200u64 {
                let v = if t % 37 == 0 { 40.0 } else { 1.0 };
                let rho = if t % 11 == 0 { 0.65 } else { 0.9 };
                let (next, _) = hc_step(&st, &c, v, rho, t);
                st = next;
                etas.push(st.eta);
            }
            etas
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn reactive_baseline_thresholds() {
        assert_eq!(pn_step(2, 0.75, 4), 3);
        assert_eq!(pn_step(2, 0.95, 4), 1);
        assert_eq!(pn_step(2, 0.85, 4), 2);
        assert_eq!(pn_step(4, 0.1, 4), 4);
        assert_eq!(pn_step(1, 0.99, 4), 1);
        assert_eq!(pn_step(1, 0.8, 4), 1);
        assert_eq!(pn_step(1, 0.9, 4), 1);
    }
}
