//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use apfwf::geom::Vec2;
use apfwf::switch_rs::Direction;
use apfwf::world::{DiscBody, WorldModel};

/// Relative closeness with a small absolute floor for values near zero.
pub fn close(a: Vec2, b: Vec2, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(1e-12) + 1e-15
}

pub fn close_f(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-12) + 1e-15
}

/// Repulsion in polar form: each hit at bearing φ and range d pushes with
/// magnitude 1/d³ away from the hit.
pub fn repulsion_polar(bearings: &[f64], ranges: &[f64], d_max: f64) -> Vec2 {
    let (mut x, mut y) = (0.0, 0.0);
    for (&phi, &d) in bearings.iter().zip(ranges) {
        if d > 0.0 && d < d_max {
            let m = 1.0 / (d * d * d);
            x -= m * phi.cos();
            y -= m * phi.sin();
        }
    }
    Vec2::new(x, y)
}

/// Attraction of length d_max pointing θ counterclockwise from the goal.
pub fn rotated_attraction_polar(g: Vec2, theta: f64, d_max: f64) -> Vec2 {
    if g.x == 0.0 && g.y == 0.0 {
        return Vec2::ZERO;
    }
    let a = g.y.atan2(g.x) + theta;
    Vec2::new(d_max * a.cos(), d_max * a.sin())
}

/// Index of the ray endpoint nearest to the goal, lowest index on ties.
pub fn nearest_endpoint(rays: &[Vec2], g: Vec2) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, l) in rays.iter().enumerate() {
        let d = ((g.x - l.x).powi(2) + (g.y - l.y).powi(2)).sqrt();
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Least-rotation direction: turn counterclockwise when the free ray lies
/// less than half a turn counterclockwise of the goal; ties go
/// counterclockwise.
pub fn choose_dir_oracle(rays: &[Vec2], g: Vec2) -> Direction {
    let m = rays.len();
    let j = nearest_endpoint(rays, g);
    let phi_min = TAU * j as f64 / m as f64;
    let phi_goal = g.y.atan2(g.x);
    let ccw = (phi_min - phi_goal).rem_euclid(TAU);
    if ccw == 0.0 || ccw == PI || ccw < PI {
        Direction::Ccw
    } else {
        Direction::Cw
    }
}

/// Range along `dir` by solving each edge intersection with Cramer's rule
/// and each disc with the projected chord.
pub fn raycast_oracle(world: &WorldModel, others: &[DiscBody], origin: Vec2, dir: Vec2, d_max: f64) -> f64 {
    let mut best = d_max;
    for poly in world.obstacles() {
        let v = poly.vertices();
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            // origin + t·dir = a + u·(b − a)
            let (a11, a12, a21, a22) = (dir.x, a.x - b.x, dir.y, a.y - b.y);
            let det = a11 * a22 - a12 * a21;
            if det == 0.0 {
                continue;
            }
            let (r1, r2) = (a.x - origin.x, a.y - origin.y);
            let t = (r1 * a22 - a12 * r2) / det;
            let u = (a11 * r2 - r1 * a21) / det;
            if t > 0.0 && (0.0..=1.0).contains(&u) {
                best = best.min(t);
            }
        }
    }
    for d in others {
        let to_c = d.center - origin;
        let along = to_c.dot(dir);
        let perp2 = to_c.norm_sq() - along * along;
        let r2 = d.radius * d.radius;
        if perp2 > r2 {
            continue;
        }
        let half = (r2 - perp2).sqrt();
        for t in [along - half, along + half] {
            if t > 0.0 {
                best = best.min(t);
                break;
            }
        }
    }
    best
}
