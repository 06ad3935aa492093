//! Attractive, repulsive and blended forces near a wall, with the
//! attraction rotated by increasing wall-following angles.

use apfwf::geom::Vec2;
use apfwf::potential::{total_force, PotentialParams};
use apfwf::world::Scan;

fn main() {
    // a wall 1 m ahead spanning the front quarter of a 36-ray scan
    let m = 36;
    let ranges: Vec<f64> = (0..m)
        .map(|k| {
            let b = std::f64::consts::TAU * k as f64 / m as f64;
            if b.cos() > 0.7 { 1.0 / b.cos() } else { 10.0 }
        })
        .collect();
    let scan = Scan::from_ranges(&ranges, 10.0);
    let goal = Vec2::new(6.0, 0.0);
    let p = PotentialParams::default();
    println!("omega={} f_thr={}", p.omega, p.f_thr);
    for theta in [0.0, 0.5, 1.0, 1.5707963267948966] {
        let f = total_force(goal, theta, &scan, &p);
        println!(
            "theta={theta:.3}  F_att'=({:+.2},{:+.2})  F_rep=({:+.2},{:+.2})  F_tot=({:+.2},{:+.2}) |F|={:.3}  U_rep={:.3}",
            f.f_att_rot.x, f.f_att_rot.y, f.f_rep.x, f.f_rep.y, f.f_tot.x, f.f_tot.y, f.f_tot.norm(), f.u_rep
        );
    }
}
