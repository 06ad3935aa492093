//! Two robots on either side of a wall, each heading for the other's start.

use apfwf::sim::{run_instance, wall_pair_scenario, Method};

fn main() -> apfwf::Result<()> {
    for method in [Method::Apf, Method::ApfRs] {
        let (m, log) = run_instance(wall_pair_scenario(method))?;
        println!(
            "{method:<7} success={} arrival rate={:.2} makespan={:?} collisions={}",
            m.success, m.arrival_rate, m.makespan, m.collision_count
        );
        let wf = log.records.iter().filter(|r| r.mode == apfwf::switch_rs::Mode::Wf).count();
        println!("          {wf} of {} logged robot-steps in wall-following", log.len());
    }
    Ok(())
}
