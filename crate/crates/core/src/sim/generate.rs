//! Scenario generators for the benchmark layouts.
//!
//! Flat and cylind dimensions are fixed approximations: a 6 m × 0.3 m wall,
//! and five pillars of radius 0.8 m at 2.2 m pitch.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{Method, Params, RobotSpec, ScenarioSpec};
use crate::agent::RobotState;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::world::{Bounds, Polygon, WorldModel};

pub const SWAP_RADIUS: f64 = 5.0;
const SWAP_HALF_EXTENT: f64 = 12.0;
const FACING_HALF_EXTENT: f64 = 10.0;
const HEADING_JITTER: f64 = 0.3;
const LATERAL_JITTER: f64 = 0.15;
const GROUP_X: f64 = 3.0;
const GROUP_SPAN: f64 = 2.4;
const PLACEMENT_TRIES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layout {
    Flat,
    Cylind,
    Swap,
    /// Obstacles, bounds and parameters from a scenario file; robots sampled.
    File(PathBuf),
}

impl Layout {
    /// Name used in result tables.
    pub fn name(&self) -> String {
        match self {
            Layout::Flat => "flat".into(),
            Layout::Cylind => "cylind".into(),
            Layout::Swap => "swap".into(),
            Layout::File(p) => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into()),
        }
    }

    pub fn step_limit(&self) -> u64 {
        match self {
            Layout::Swap => 1000,
            _ => 1500,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "flat" => Layout::Flat,
            "cylind" => Layout::Cylind,
            "swap" => Layout::Swap,
            path => Layout::File(PathBuf::from(path)),
        })
    }
}

/// Deterministic in `(layout, n, seed)`. The method defaults to `apf-rs`.
pub fn generate_instance(layout: &Layout, n: usize, seed: u64) -> Result<ScenarioSpec> {
    if n == 0 {
        return Err(Error::Generation("need at least one robot".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Params { step_limit: layout.step_limit(), ..Params::default() };
    let spec = match layout {
        Layout::Swap => swap(n, &mut rng, params, seed)?,
        Layout::Flat => facing_groups(flat_world()?, n, &mut rng, params, seed)?,
        Layout::Cylind => facing_groups(cylind_world()?, n, &mut rng, params, seed)?,
        Layout::File(path) => from_file(path, n, &mut rng, seed)?,
    };
    spec.validate_layout().map_err(|e| Error::Generation(format!("{layout}, N={n}: {e}")))?;
    Ok(spec)
}

fn swap(n: usize, rng: &mut ChaCha8Rng, params: Params, seed: u64) -> Result<ScenarioSpec> {
    let spacing = 2.0 * SWAP_RADIUS * (PI / n as f64).sin();
    if n > 1 && spacing <= 2.0 * params.radius {
        return Err(Error::Generation(format!("{n} robots do not fit on the swap circle")));
    }
    let offset = rng.gen_range(0.0..TAU);
    let starts: Vec<Vec2> = (0..n).map(|i| Vec2::from_angle(offset + TAU * i as f64 / n as f64) * SWAP_RADIUS).collect();
    let robots = (0..n)
        .map(|i| {
            let s = starts[i];
            let goal = if n % 2 == 0 { starts[(i + n / 2) % n] } else { -s };
            let psi = (-s).angle() + rng.gen_range(-HEADING_JITTER..=HEADING_JITTER);
            RobotSpec { start: RobotState::new(s.x, s.y, psi), goal }
        })
        .collect();
    Ok(ScenarioSpec::new(WorldModel::empty(Bounds::centered(SWAP_HALF_EXTENT)), robots, params, seed))
}

pub fn flat_world() -> Result<WorldModel> {
    WorldModel::new(
        Bounds::centered(FACING_HALF_EXTENT),
        vec![Polygon::rectangle(Vec2::new(-0.15, -3.0), Vec2::new(0.15, 3.0))?],
    )
}

pub fn cylind_world() -> Result<WorldModel> {
    let pillars = (-2..=2)
        .map(|k| Polygon::regular(Vec2::new(0.0, 2.2 * k as f64), 0.8, 32))
        .collect::<Result<Vec<_>>>()?;
    WorldModel::new(Bounds::centered(FACING_HALF_EXTENT), pillars)
}

/// Two groups at x = ±3 facing each other; each goal mirrors its start.
fn facing_groups(world: WorldModel, n: usize, rng: &mut ChaCha8Rng, params: Params, seed: u64) -> Result<ScenarioSpec> {
    let left = n.div_ceil(2);
    let right = n / 2;
    let min_gap = 2.0 * params.radius + 2.0 * LATERAL_JITTER;
    if 2.0 * GROUP_SPAN / left as f64 <= min_gap {
        return Err(Error::Generation(format!("{n} robots exceed the group capacity")));
    }
    let mut robots = Vec::with_capacity(n);
    for (side, count) in [(-1.0, left), (1.0, right)] {
        for j in 0..count {
            let y = -GROUP_SPAN + 2.0 * GROUP_SPAN * (j as f64 + 0.5) / count as f64
                + rng.gen_range(-LATERAL_JITTER..=LATERAL_JITTER);
            let x = side * GROUP_X;
            let psi = if side < 0.0 { 0.0 } else { PI } + rng.gen_range(-HEADING_JITTER..=HEADING_JITTER);
            robots.push(RobotSpec { start: RobotState::new(x, y, psi), goal: Vec2::new(-x, y) });
        }
    }
    Ok(ScenarioSpec::new(world, robots, params, seed))
}

fn from_file(path: &PathBuf, n: usize, rng: &mut ChaCha8Rng, seed: u64) -> Result<ScenarioSpec> {
    let base = ScenarioSpec::load(path)?;
    let params = base.params.clone();
    let world = base.world;
    let clearance = 2.0 * params.radius;
    let b = world.bounds();
    let mut sample = |taken: &[Vec2]| -> Result<Vec2> {
        for _ in 0..PLACEMENT_TRIES {
            let p = Vec2::new(
                rng.gen_range(b.min.x + clearance..b.max.x - clearance),
                rng.gen_range(b.min.y + clearance..b.max.y - clearance),
            );
            if world.obstacle_distance(p) > clearance && taken.iter().all(|q| q.distance(p) > 2.0 * clearance) {
                return Ok(p);
            }
        }
        Err(Error::Generation(format!("could not place {n} robots in {}", path.display())))
    };
    let mut starts = Vec::with_capacity(n);
    let mut goals = Vec::with_capacity(n);
    for _ in 0..n {
        let s = sample(&starts)?;
        starts.push(s);
        let g = sample(&goals)?;
        goals.push(g);
    }
    let robots = starts
        .into_iter()
        .zip(goals)
        .map(|(s, g)| RobotSpec { start: RobotState::new(s.x, s.y, rng.gen_range(-PI..PI)), goal: g })
        .collect();
    Ok(ScenarioSpec::new(world, robots, params, seed))
}

/// A U-shaped obstacle opening towards the robot, with the goal behind it.
pub fn u_trap_scenario(method: Method) -> ScenarioSpec {
    let pts = [(-1.5, 1.5), (0.0, 1.5), (0.0, -1.5), (-1.5, -1.5), (-1.5, -1.8), (0.3, -1.8), (0.3, 1.8), (-1.5, 1.8)];
    let u = Polygon::new(pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).expect("fixture polygon is simple");
    let world = WorldModel::new(Bounds::centered(8.0), vec![u]).expect("fixture fits its bounds");
    let params = Params { method, step_limit: 1500, ..Params::default() };
    ScenarioSpec::new(
        world,
        vec![RobotSpec { start: RobotState::new(-5.0, 0.0, 0.0), goal: Vec2::new(4.0, 0.0) }],
        params,
        0,
    )
}

/// Two robots on the wall axis facing each other, each with its goal behind
/// the wall.
pub fn wall_pair_scenario(method: Method) -> ScenarioSpec {
    let world = flat_world().expect("fixture fits its bounds");
    let params = Params { method, step_limit: 1500, ..Params::default() };
    ScenarioSpec::new(
        world,
        vec![
            RobotSpec { start: RobotState::new(-GROUP_X, 0.0, 0.0), goal: Vec2::new(GROUP_X, 0.0) },
            RobotSpec { start: RobotState::new(GROUP_X, 0.0, PI), goal: Vec2::new(-GROUP_X, 0.0) },
        ],
        params,
        0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_pair_exchanges_positions() {
        for seed in [0, 1, 99] {
            let s = generate_instance(&Layout::Swap, 2, seed).unwrap();
            let (a, b) = (&s.robots[0], &s.robots[1]);
            assert!((a.start.position().distance(b.start.position()) - 10.0).abs() < 1e-9);
            assert!(a.goal.distance(b.start.position()) < 1e-12);
            assert!(b.goal.distance(a.start.position()) < 1e-12);
            assert_eq!(s.params.step_limit, 1000);
        }
    }

    #[test]
    fn swap_goals_are_antipodal() {
        for n in [3, 6, 7] {
            let s = generate_instance(&Layout::Swap, n, 5).unwrap();
            for r in &s.robots {
                assert!((r.goal + r.start.position()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for layout in [Layout::Swap, Layout::Flat, Layout::Cylind] {
            let a = generate_instance(&layout, 6, 42).unwrap().to_json().unwrap();
            let b = generate_instance(&layout, 6, 42).unwrap().to_json().unwrap();
            let c = generate_instance(&layout, 6, 43).unwrap().to_json().unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn flat_pair_must_cross_the_wall() {
        for seed in 0..10 {
            let s = generate_instance(&Layout::Flat, 2, seed).unwrap();
            let wall = &s.world.obstacles()[0];
            for r in &s.robots {
                assert!(wall.intersects_segment(r.start.position(), r.goal));
            }
        }
    }

    #[test]
    fn over_capacity_is_generation_error() {
        assert!(matches!(generate_instance(&Layout::Flat, 40, 0), Err(Error::Generation(_))));
        assert!(matches!(generate_instance(&Layout::Swap, 200, 0), Err(Error::Generation(_))));
        assert!(matches!(generate_instance(&Layout::Swap, 0, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn from_file_samples_free_placements() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("room.json");
        let base = ScenarioSpec::new(
            flat_world().unwrap(),
            vec![RobotSpec { start: RobotState::new(-3.0, 0.0, 0.0), goal: Vec2::new(3.0, 0.0) }],
            Params::default(),
            0,
        );
        base.save(&path).unwrap();
        let layout: Layout = path.to_str().unwrap().parse().unwrap();
        let s = generate_instance(&layout, 5, 3).unwrap();
        assert_eq!(s.robots.len(), 5);
        assert_eq!(layout.name(), "room");
        assert_eq!(s, generate_instance(&layout, 5, 3).unwrap());

        let tiny = ScenarioSpec::new(
            WorldModel::empty(Bounds::centered(1.0)),
            vec![RobotSpec { start: RobotState::new(0.0, 0.0, 0.0), goal: Vec2::new(0.5, 0.0) }],
            Params::default(),
            0,
        );
        tiny.save(&path).unwrap();
        assert!(matches!(generate_instance(&layout, 30, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn u_trap_fixture_is_valid() {
        let s = u_trap_scenario(Method::Apf);
        s.validate().unwrap();
        assert!(s.world.obstacles()[0].intersects_segment(s.robots[0].start.position(), s.robots[0].goal));
    }
}
