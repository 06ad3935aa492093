//! Casts a 16-ray scan from a robot next to a box and a neighbouring robot.

use apfwf::agent::RobotState;
use apfwf::geom::Vec2;
use apfwf::world::{raycast, Bounds, DiscBody, Polygon, ScanConfig, WorldModel};

fn main() -> apfwf::Result<()> {
    let world = WorldModel::new(
        Bounds::centered(10.0),
        vec![Polygon::rectangle(Vec2::new(2.0, -1.0), Vec2::new(3.0, 1.0))?],
    )?;
    let neighbour = DiscBody::new(Vec2::new(0.0, 2.0), 0.17);
    let pose = RobotState::new(0.0, 0.0, 0.0);
    let cfg = ScanConfig::new(16, 10.0)?;
    let scan = raycast(&world, &[neighbour], &pose, &cfg)?;

    println!("{:>4} {:>8} {:>7}  hit", "ray", "bearing", "range");
    for (k, (range, hit)) in scan.ranges().zip(scan.hit_mask()).enumerate() {
        println!("{k:>4} {:>8.3} {range:>7.3}  {}", cfg.bearing(k), if *hit { "yes" } else { "-" });
    }
    Ok(())
}
