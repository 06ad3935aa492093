//! A robot behind a U-shaped obstacle: plain APF stalls in the pocket while
//! the rule-based switch follows the wall around it.

use apfwf::sim::{u_trap_scenario, Method, Simulation};

fn main() -> apfwf::Result<()> {
    for method in [Method::Apf, Method::ApfRs] {
        let mut sim = Simulation::new(u_trap_scenario(method))?;
        let metrics = sim.run()?;
        let r = &sim.robots()[0];
        println!(
            "{method:<7} success={} steps={} final distance {:.2} m",
            metrics.success,
            sim.t(),
            r.state.position().distance(r.goal)
        );
        for rec in sim.log().records.iter().filter(|r| r.event.is_some()).take(8) {
            println!("          t={:<4} {:<8} theta={:+.3}", rec.t, rec.event.as_deref().unwrap(), rec.theta_rot);
        }
    }
    Ok(())
}
