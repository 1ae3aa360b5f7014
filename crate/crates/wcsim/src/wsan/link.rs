//! Stochastic link layer: logistic success probability versus SNR, with a
//! piecewise-constant ambient noise level plus two jitter components — one
//! shared by every link in a period (wideband interference) and one drawn
//! per link (local fading) — so simultaneous deep fades on unrelated paths
//! stay rare.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::rng::{domain, CounterRng};

/// Success model of every directed link in the mesh.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkModel {
    /// Received signal strength per directed link, dBm. Lookups fall back to
    /// the reverse direction, then to `default_rssi`.
    pub rssi: BTreeMap<(u32, u32), f64>,
    pub default_rssi: f64,
    /// SNR at which a transmission succeeds half the time, dB.
    pub midpoint_db: f64,
    /// Steepness of the success curve, dB per logistic unit.
    pub steepness_db: f64,
}

impl LinkModel {
    /// Calibrated defaults: per-hop success of roughly 0.69 at a noise floor
    /// of -75 dBm and 0.85 at -78 dBm for the default signal strength.
    pub fn calibrated_default() -> Self {
        LinkModel {
            rssi: BTreeMap::new(),
            default_rssi: -55.0,
            midpoint_db: 17.44,
            steepness_db: 3.1615,
        }
    }

    pub fn link_rssi(&self, sender: u32, receiver: u32) -> f64 {
        self.rssi
            .get(&(sender, receiver))
            .or_else(|| self.rssi.get(&(receiver, sender)))
            .copied()
            .unwrap_or(self.default_rssi)
    }

    /// Probability that a slot succeeds at the given signal-to-noise ratio.
    pub fn success_probability(&self, snr_db: f64) -> f64 {
        1.0 / (1.0 + (-(snr_db - self.midpoint_db) / self.steepness_db).exp())
    }

    /// One Bernoulli slot trial, keyed so that every (time, link, channel)
    /// triple draws an independent, reproducible value.
    pub fn trial(
        &self,
        rng: &CounterRng,
        sender: u32,
        receiver: u32,
        physical_channel: u8,
        absolute_slot: u64,
        noise_dbm: f64,
    ) -> bool {
        let p = self.success_probability(self.link_rssi(sender, receiver) - noise_dbm);
        let draw = rng.uniform(&[
            domain::LINK_TRIAL,
            absolute_slot,
            sender as u64,
            receiver as u64,
            physical_channel as u64,
        ]);
        draw < p
    }
}

/// Ambient noise over time: step levels plus per-period jitter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseSchedule {
    /// (start_second, level_dbm) steps, sorted by start; the first segment
    /// should start at 0.
    pub segments: Vec<(f64, f64)>,
    /// Standard deviation of the period-wide jitter shared by all links, dB.
    pub jitter_shared_db: f64,
    /// Standard deviation of the per-link jitter, dB.
    pub jitter_link_db: f64,
}

impl NoiseSchedule {
    pub fn constant(level_dbm: f64) -> Self {
        NoiseSchedule {
            segments: vec![(0.0, level_dbm)],
            jitter_shared_db: 1.0,
            jitter_link_db: 0.0,
        }
    }

    /// Step level in force at a given time.
    pub fn base_level(&self, t_sec: f64) -> f64 {
        let mut level = self.segments.first().map(|s| s.1).unwrap_or(-100.0);
        for &(start, l) in &self.segments {
            if t_sec >= start {
                level = l;
            } else {
                break;
            }
        }
        level
    }

    /// Period-wide shared component: step level plus shared jitter.
    pub fn shared_level(&self, rng: &CounterRng, period: u64, t_sec: f64) -> f64 {
        self.base_level(t_sec) + self.jitter_shared_db * rng.normal(&[domain::NOISE_SHARED, period])
    }

    /// Noise seen by one link during one period.
    pub fn link_level(
        &self,
        rng: &CounterRng,
        period: u64,
        shared: f64,
        sender: u32,
        receiver: u32,
    ) -> f64 {
        shared
            + self.jitter_link_db
                * rng.normal(&[domain::NOISE_LINK, period, sender as u64, receiver as u64])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn success_probability_saturates_at_the_extremes() {
        let lm = LinkModel::calibrated_default();
        assert!(lm.success_probability(1e3) > 1.0 - 1e-9);
        assert!(lm.success_probability(-1e3) < 1e-9);
        assert_relative_eq!(lm.success_probability(lm.midpoint_db), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn success_probability_is_monotone_in_snr() {
        let lm = LinkModel::calibrated_default();
        let mut prev = 0.0;
        for i in 0..200 {
            let p = lm.success_probability(-20.0 + i as f64 * 0.5);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn calibrated_per_hop_targets() {
        let lm = LinkModel::calibrated_default();
        let p75 = lm.success_probability(-55.0 - (-75.0));
        let p78 = lm.success_probability(-55.0 - (-78.0));
        assert_relative_eq!(p75, 0.692, epsilon = 5e-3);
        assert_relative_eq!(p78, 0.853, epsilon = 5e-3);
    }

    #[test]
    fn monte_carlo_trial_rate_matches_probability() {
        // Default signal -55 dBm over noise -75 dBm gives snr 20 dB.
        let lm = LinkModel::calibrated_default();
        let rng = CounterRng::new(7);
        let p = lm.success_probability(20.0);
        let n = 100_000;
        let hits = (0..n).filter(|&i| lm.trial(&rng, 1, 2, 3, i, -75.0)).count();
        let rate = hits as f64 / n as f64;
        assert!((rate - p).abs() < 0.01, "rate {rate} vs p {p}");
    }

    #[test]
    fn rssi_lookup_falls_back_symmetric_then_default() {
        let mut lm = LinkModel::calibrated_default();
        lm.rssi.insert((1, 2), -60.0);
        assert_eq!(lm.link_rssi(1, 2), -60.0);
        assert_eq!(lm.link_rssi(2, 1), -60.0);
        assert_eq!(lm.link_rssi(5, 6), -55.0);
    }

    #[test]
    fn noise_steps_change_at_segment_starts() {
        let ns = NoiseSchedule {
            segments: vec![(0.0, -75.0), (70.0, -78.0)],
            jitter_shared_db: 0.0,
            jitter_link_db: 0.0,
        };
        assert_eq!(ns.base_level(0.0), -75.0);
        assert_eq!(ns.base_level(69.999), -75.0);
        assert_eq!(ns.base_level(70.0), -78.0);
        assert_eq!(ns.base_level(1e4), -78.0);
    }

    #[test]
    fn jitter_components_are_reproducible_and_distinct() {
        let ns = NoiseSchedule {
            segments: vec![(0.0, -76.0)],
            jitter_shared_db: 1.0,
            jitter_link_db: 1.0,
        };
        let rng = CounterRng::new(42);
        let s = ns.shared_level(&rng, 10, 2.0);
        assert_eq!(s, ns.shared_level(&rng, 10, 2.0));
        let a = ns.link_level(&rng, 10, s, 1, 2);
        let b = ns.link_level(&rng, 10, s, 3, 4);
        assert_ne!(a, b);
        assert_eq!(a, ns.link_level(&rng, 10, s, 1, 2));
    }
}
