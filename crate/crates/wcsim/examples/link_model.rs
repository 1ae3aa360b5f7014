//! Link calibration: per-slot success curve and multi-hop delivery.
//!
//! Prints the calibrated logistic success curve, then the closed-form
//! end-to-end delivery ratio of a 4-hop flow for 1..=4 attempts per hop at
//! the two bundled noise floors, and cross-checks the eta = 1 column with a
//! seeded Monte-Carlo run of the slot-level simulator.

use wcsim::rng::CounterRng;
use wcsim::wsan::link::{LinkModel, NoiseSchedule};
use wcsim::wsan::runtime::{run_period, FrameTiming, NetContext, NetworkState, PeriodInputs};
use wcsim::wsan::schedule::build_superframe;
use wcsim::wsan::{Flow, FlowKind};

fn main() -> wcsim::Result<()> {
    let link = LinkModel::calibrated_default();

    println!("per-slot success vs noise floor (signal {} dBm):", link.default_rssi);
    for noise in [-72.0, -75.0, -78.0, -81.0] {
        let p = link.success_probability(link.default_rssi - noise);
        println!("  noise {noise:>6.1} dBm -> p = {p:.4}");
    }

    // Closed form: a hop with per-slot success p succeeds within eta slots
    // with probability 1 - (1-p)^eta; hops are independent.
    println!("\n4-hop end-to-end delivery, closed form:");
    println!("{:>10} {:>10} {:>10}", "attempts", "-75 dBm", "-78 dBm");
    for eta in 1..=4u32 {
        let e2e = |noise: f64| -> f64 {
            let p = link.success_probability(link.default_rssi - noise);
            (1.0 - (1.0 - p).powi(eta as i32)).powi(4)
        };
        println!("{eta:>10} {:>10.4} {:>10.4}", e2e(-75.0), e2e(-78.0));
    }

    // Monte-Carlo cross-check at eta = 1 with the actual slot machinery:
    // a single 4-hop flow, no jitter, fixed noise floor.
    let flows = vec![Flow { id: 1, kind: FlowKind::Actuation, route: vec![0, 1, 2, 3, 4] }];
    let frame = build_superframe(&flows, 4, 16, 0)?;
    let timing = FrameTiming::standalone(16);
    let periods = 10_000u64;
    println!("\nMonte-Carlo over {periods} periods (eta = 1):");
    for noise_dbm in [-75.0, -78.0] {
        let noise = NoiseSchedule::constant(noise_dbm);
        let ctx = NetContext { flows: &flows, frame: &frame, timing: &timing, link: &link, noise: &noise };
        let mut net = NetworkState::new(&flows, 5, 1);
        let rng = CounterRng::new(7);
        let inputs = PeriodInputs::all_packets(flows.len());
        let mut delivered = 0u64;
        for period in 0..periods {
            let report = run_period(&ctx, &mut net, &inputs, period, &rng);
            if report.flow_delivered[0] {
                delivered += 1;
            }
        }
        println!("  noise {noise_dbm:>6.1} dBm -> measured PDR = {:.4}", delivered as f64 / periods as f64);
    }
    Ok(())
}
