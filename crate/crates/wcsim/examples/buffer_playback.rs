//! Riding out a burst of lost actuation packets.
//!
//! The controller ships its whole input plan every period, and the actuator
//! buffers the last delivered one. When packets stop arriving, the actuator
//! plays successive entries of the stale plan, which predicted exactly this
//! future; at the setpoint the plant does not drift at all.

use std::path::Path;

use wcsim::actuation::ActuationBuffer;
use wcsim::harness::Scenario;
use wcsim::plant::PlantState;

fn main() -> wcsim::Result<()> {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/interference.cfg");
    let scenario = Scenario::from_path(&cfg)?;
    let lp = &scenario.loops[0];
    let x_bar = &lp.setpoint.x_bar;

    // Start exactly at the operating point and deliver one plan.
    let mut state = PlantState::new(x_bar.clone());
    let plan = lp.mpc.solve(&(&state.x - x_bar))?;
    let absolute: Vec<_> = plan.u_seq.iter().map(|u| u + &lp.setpoint.u_bar).collect();
    let mut buffer = ActuationBuffer::new(lp.mpc.horizon(), lp.setpoint.u_bar.clone());
    buffer.push(absolute, 0)?;

    // Fifty consecutive periods with no delivery: the buffer serves entry
    // t of the plan issued at period 0.
    println!("{:>7} {:>12} {:>16}", "period", "buffer age", "|x - x_bar|_inf");
    let mut worst: f64 = 0.0;
    for t in 0..50u64 {
        let u = buffer.pop(t).clone();
        state = lp.model_ctrl.step(&state, &u)?;
        let dev = (&state.x - x_bar).amax();
        worst = worst.max(dev);
        if t % 10 == 9 {
            println!("{:>7} {:>12} {:>16.3e}", t + 1, buffer.age(t), dev);
        }
    }
    println!("\nworst deviation over the burst: {worst:.3e}");
    println!("the stored plan bridges a whole horizon of losses without drift.");
    Ok(())
}
