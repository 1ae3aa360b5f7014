//! The two transmission-count policies on scripted inputs.
//!
//! Feeds a hand-written Lyapunov-value trajectory to the holistic law and a
//! delivery-ratio trajectory to the reactive baseline, printing every count
//! change with the branch that caused it. No network, no plant: just the
//! decision logic.

use std::path::Path;

use wcsim::adaptation::{hc_step, pn_step, AdaptState, PN_LOWER_ABOVE, PN_RAISE_BELOW};
use wcsim::harness::Scenario;

fn main() -> wcsim::Result<()> {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/interference.cfg");
    let scenario = Scenario::from_path(&cfg)?;
    let adapt = &scenario.loops[0].adapt_cfg;

    println!(
        "holistic thresholds: raise above {:.3}, lower below {:.3}, floor {}, max {}",
        adapt.upper_threshold(),
        adapt.lower_threshold(),
        adapt.eta_floor,
        adapt.eta_max
    );

    // A large initial value decaying by 15% per period, with a disturbance
    // bump at period 60; the channel stays healthy throughout. Decreases are
    // deliberately slow: each one needs tau2 quiet periods.
    let mut v = 2.0e4;
    let mut st = AdaptState::new(2);
    println!("\nholistic law on a decaying value:");
    println!("  t=0     eta=2  V={v:.1}");
    for t in 0..1800u64 {
        if t == 60 {
            v = 80.0; // disturbance kicks the value back over the raise line
        }
        let (next, cmd) = hc_step(&st, adapt, v, 0.97, t);
        if let Some(new_eta) = cmd {
            let dir = if new_eta > st.eta { "raise" } else { "lower" };
            println!("  t={t:<5} eta={new_eta}  V={v:.3}  ({dir})");
        }
        st = next;
        v *= 0.85;
    }
    println!("  final: eta={} (parks at the floor once the value stays quiet)", st.eta);

    // The reactive baseline cares only about the delivery-ratio window.
    println!("\nreactive baseline (raise below {PN_RAISE_BELOW}, lower above {PN_LOWER_ABOVE}):");
    let rho_script = [0.95, 0.92, 0.85, 0.78, 0.72, 0.75, 0.83, 0.88, 0.93, 0.96, 0.97, 0.95];
    let mut eta = 2u32;
    for (t, rho) in rho_script.iter().enumerate() {
        let next = pn_step(eta, *rho, adapt.eta_max);
        if next != eta {
            println!("  t={t:<3} rho={rho:.2}  eta {eta} -> {next}");
        }
        eta = next;
    }
    println!("  final: eta={eta}");
    Ok(())
}
