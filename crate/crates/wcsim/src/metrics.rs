//! Run accounting: control error, transmission statistics, energy and
//! battery life, and the fixed CSV record layout.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// One control period of one loop, as logged.
#[derive(Clone, Debug)]
pub struct PeriodRecord {
    pub t_sec: f64,
    pub loop_id: u32,
    /// True plant state at the period start.
    pub x: DVector<f64>,
    /// Estimate the controller planned from.
    pub x_hat: DVector<f64>,
    /// Input applied during the period.
    pub u: f64,
    /// Lyapunov value at the estimate.
    pub v: f64,
    /// Measured delivery ratio fed to the adaptation.
    pub rho: f64,
    /// Transmission count the controller wants in force.
    pub eta_scheduled: u32,
    pub delivered_sense: bool,
    pub delivered_act: bool,
    /// Attempts actually spent on the loop's actuation flow this period.
    pub actual_tx: u32,
    /// Shared noise level of the period, dBm.
    pub noise_dbm: f64,
    /// Lyapunov value at the true state, kept in memory for safety audits
    /// (not part of the CSV contract).
    pub v_true: Option<f64>,
}

/// Append-only log of one run.
#[derive(Clone, Debug, Default)]
pub struct MetricsLog {
    pub records: Vec<PeriodRecord>,
    /// Transmit/listen slot totals per node id.
    pub node_tx: Vec<u64>,
    pub node_rx: Vec<u64>,
    pub duration_s: f64,
    pub unstable: bool,
}

impl MetricsLog {
    pub fn records_for(&self, loop_id: u32) -> impl Iterator<Item = &PeriodRecord> {
        self.records.iter().filter(move |r| r.loop_id == loop_id)
    }

    pub fn mean_eta(&self, loop_id: u32) -> f64 {
        let (sum, n) = self
            .records_for(loop_id)
            .fold((0u64, 0u64), |(s, n), r| (s + r.eta_scheduled as u64, n + 1));
        if n == 0 {
            return 0.0;
        }
        sum as f64 / n as f64
    }

    pub fn mean_actual_tx(&self, loop_id: u32) -> f64 {
        let (sum, n) =
            self.records_for(loop_id).fold((0u64, 0u64), |(s, n), r| (s + r.actual_tx as u64, n + 1));
        if n == 0 {
            return 0.0;
        }
        sum as f64 / n as f64
    }
}

/// Mean absolute deviation from the setpoint, averaged over time and state
/// components at the control rate.
pub fn mae(traj: &[DVector<f64>], x_bar: &DVector<f64>) -> Result<f64> {
    if traj.is_empty() {
        return Err(SimError::config("mae: empty trajectory"));
    }
    let n = x_bar.len();
    let mut acc = 0.0;
    for x in traj {
        for i in 0..n {
            acc += (x[i] - x_bar[i]).abs();
        }
    }
    Ok(acc / (traj.len() as f64 * n as f64))
}

/// Radio energy accounting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Joules per transmit slot.
    pub e_tx: f64,
    /// Joules per listen slot.
    pub e_rx: f64,
    /// Watts drawn with the radio off.
    pub idle_w: f64,
    /// Battery capacity, joules.
    pub battery_j: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { e_tx: 2.0e-4, e_rx: 1.9e-4, idle_w: 5.0e-5, battery_j: 8640.0 }
    }
}

/// Battery life per node plus the system value (the worst battery-powered
/// node; mains-powered nodes are excluded from the minimum).
#[derive(Clone, Debug)]
pub struct BatteryReport {
    pub per_node_days: Vec<f64>,
    pub system_days: f64,
}

pub fn battery_life(
    node_tx: &[u64],
    node_rx: &[u64],
    duration_s: f64,
    em: &EnergyModel,
    powered_nodes: &[u32],
) -> Result<BatteryReport> {
    if duration_s <= 0.0 {
        return Err(SimError::config("battery_life: duration must be positive"));
    }
    if node_tx.len() != node_rx.len() {
        return Err(SimError::config("battery_life: tx/rx tallies differ in length"));
    }
    let per_node_days: Vec<f64> = node_tx
        .iter()
        .zip(node_rx)
        .map(|(&tx, &rx)| {
            let power = (em.e_tx * tx as f64 + em.e_rx * rx as f64) / duration_s + em.idle_w;
            if power <= 0.0 {
                f64::INFINITY
            } else {
                em.battery_j / power / 86_400.0
            }
        })
        .collect();
    let system_days = per_node_days
        .iter()
        .enumerate()
        .filter(|(i, _)| !powered_nodes.contains(&(*i as u32)))
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);
    Ok(BatteryReport { per_node_days, system_days })
}

/// Distribution of attempts actually spent per packet.
#[derive(Clone, Debug)]
pub struct ActualTxStats {
    /// counts[k] = packets that took k attempts in total across hops.
    pub counts: Vec<u64>,
    pub mean: f64,
}

pub fn actual_tx_stats(per_packet_attempts: &[u32]) -> ActualTxStats {
    let max = per_packet_attempts.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 1];
    let mut sum = 0u64;
    for &a in per_packet_attempts {
        counts[a as usize] += 1;
        sum += a as u64;
    }
    let mean = if per_packet_attempts.is_empty() {
        0.0
    } else {
        sum as f64 / per_packet_attempts.len() as f64
    };
    ActualTxStats { counts, mean }
}

/// Fixed CSV layout shared by the writer and the report reader.
pub fn csv_header(n_states: usize) -> String {
    let mut cols = vec!["t_sec".to_string(), "loop_id".to_string()];
    for i in 0..n_states {
        cols.push(format!("x{i}"));
    }
    for i in 0..n_states {
        cols.push(format!("xhat{i}"));
    }
    for c in ["u", "V", "rho", "eta_scheduled", "delivered_sense", "delivered_act", "actual_tx", "noise_dbm"] {
        cols.push(c.to_string());
    }
    cols.join(",")
}

pub fn csv_row(r: &PeriodRecord) -> String {
    let mut cols = vec![format!("{:.9e}", r.t_sec), r.loop_id.to_string()];
    for v in r.x.iter() {
        cols.push(format!("{v:.9e}"));
    }
    for v in r.x_hat.iter() {
        cols.push(format!("{v:.9e}"));
    }
    cols.push(format!("{:.9e}", r.u));
    cols.push(format!("{:.9e}", r.v));
    cols.push(format!("{:.9e}", r.rho));
    cols.push(r.eta_scheduled.to_string());
    cols.push((r.delivered_sense as u8).to_string());
    cols.push((r.delivered_act as u8).to_string());
    cols.push(r.actual_tx.to_string());
    cols.push(format!("{:.9e}", r.noise_dbm));
    cols.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_of_a_setpoint_trajectory_is_zero() {
        let xb = DVector::from_vec(vec![1.0, -2.0]);
        let traj = vec![xb.clone(); 10];
        assert_eq!(mae(&traj, &xb).unwrap(), 0.0);
    }

    #[test]
    fn mae_counts_symmetric_offsets() {
        let xb = DVector::from_vec(vec![0.5]);
        let traj = vec![DVector::from_vec(vec![1.5]), DVector::from_vec(vec![-0.5])];
        assert_eq!(mae(&traj, &xb).unwrap(), 1.0);
    }

    #[test]
    fn mae_averages_across_components() {
        // One of five components off by 2 for the whole run: 2/5.
        let xb = DVector::zeros(5);
        let mut x = DVector::zeros(5);
        x[2] = 2.0;
        let traj = vec![x; 7];
        assert_eq!(mae(&traj, &xb).unwrap(), 0.4);
    }

    #[test]
    fn mae_rejects_empty_input() {
        assert!(mae(&[], &DVector::zeros(1)).is_err());
    }

    #[test]
    fn idle_only_node_lives_capacity_over_idle() {
        let em = EnergyModel::default();
        let rep = battery_life(&[0], &[0], 1000.0, &em, &[]).unwrap();
        let expected = em.battery_j / em.idle_w / 86_400.0;
        assert!((rep.per_node_days[0] - expected).abs() < 1e-9);
        assert_eq!(rep.system_days, rep.per_node_days[0]);
    }

    #[test]
    fn more_transmissions_drain_faster() {
        let em = EnergyModel::default();
        let light = battery_life(&[100, 0], &[0, 100], 1000.0, &em, &[]).unwrap();
        let heavy = battery_life(&[200, 0], &[0, 200], 1000.0, &em, &[]).unwrap();
        assert!(heavy.per_node_days[0] < light.per_node_days[0]);
        assert!(heavy.system_days < light.system_days);
    }

    #[test]
    fn powered_nodes_do_not_set_the_system_lifetime() {
        let em = EnergyModel::default();
        // Node 0 is by far the busiest but is mains-powered.
        let rep = battery_life(&[10_000, 10], &[10_000, 10], 1000.0, &em, &[0]).unwrap();
        assert_eq!(rep.system_days, rep.per_node_days[1]);
    }

    #[test]
    fn attempt_histogram_and_mean() {
        // Two-attempt geometric truncation at p = 0.5: mean 1*p + 2*(1-p).
        let per_packet = vec![1, 2, 1, 2, 1, 1, 2, 2];
        let stats = actual_tx_stats(&per_packet);
        assert_eq!(stats.counts, vec![0, 4, 4]);
        assert_eq!(stats.mean, 1.5);
        let empty = actual_tx_stats(&[]);
        assert_eq!(empty.mean, 0.0);
    }

    #[test]
    fn csv_layout_is_stable() {
        let header = csv_header(2);
        assert_eq!(
            header,
            "t_sec,loop_id,x0,x1,xhat0,xhat1,u,V,rho,eta_scheduled,delivered_sense,delivered_act,actual_tx,noise_dbm"
        );
        let rec = PeriodRecord {
            t_sec: 0.2,
            loop_id: 1,
            x: DVector::from_vec(vec![1.0, 2.0]),
            x_hat: DVector::from_vec(vec![1.5, 2.5]),
            u: 0.25,
            v: 3.0,
            rho: 0.9,
            eta_scheduled: 2,
            delivered_sense: true,
            delivered_act: false,
            actual_tx: 3,
            noise_dbm: -75.0,
            v_true: None,
        };
        let row = csv_row(&rec);
        assert_eq!(row.split(',').count(), header.split(',').count());
        assert!(row.starts_with("2.000000000e-1,1,"));
        assert!(row.contains(",2,1,0,3,"));
    }
}
