//! Lock-step multi-robot simulation.
//!
//! Every step, each active robot (in id order) scans the world with the
//! other robots frozen at their step-start poses, runs its controller and
//! integrates its command. Collisions are resolved afterwards in a single
//! pass: colliding robots freeze in place and remain obstacles for the rest.

pub mod generate;
pub mod log;
pub mod metrics;
pub mod scenario;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeSet;

pub use generate::{generate_instance, u_trap_scenario, wall_pair_scenario, Layout};
pub use log::{StepRecord, TrajectoryLog};
pub use metrics::{MetricsReport, RobotOutcome};
pub use scenario::{ApfForce, Method, Params, RobotSpec, ScenarioSpec};

use crate::agent::{force_to_command, integrate, relative_goal, InitialFrame, RobotState};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::potential::{total_force, total_force_vanilla, ForceSet, PotentialParams};
use crate::switch_ls::{build_observation, ls_override, EpisodeBuffer, LearnedSwitch, ObservationVector};
use crate::switch_rs::{commit, rs_decide, Direction, Mode, RSParams, SwitchEvent, SwitchInput, SwitchMemory};
use crate::world::{collisions, raycast, Collision, DiscBody, Scan, ScanConfig, WorldModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobotStatus {
    Active,
    Arrived,
    Collided,
}

/// One robot's simulation state. Read-only outside this module.
#[derive(Clone, Debug)]
pub struct Robot {
    pub id: usize,
    /// World pose.
    pub state: RobotState,
    pub goal: Vec2,
    pub status: RobotStatus,
    pub arrived_at: Option<u64>,
    pub in_collision: bool,
    pub memory: SwitchMemory,
    /// Scan taken during the last step, robot frame.
    pub last_scan: Option<Scan>,
    /// Magnitude of the force that drove the last step.
    pub last_force: f64,
    pub human_override: Option<Mode>,
    frame: InitialFrame,
    goal_if: Vec2,
    episode: EpisodeBuffer,
}

impl Robot {
    pub fn is_active(&self) -> bool {
        self.status == RobotStatus::Active
    }

    pub fn mode(&self) -> Mode {
        self.memory.mode()
    }

    pub fn body(&self, radius: f64) -> DiscBody {
        DiscBody::new(self.state.position(), radius)
    }

    pub fn episode(&self) -> &EpisodeBuffer {
        &self.episode
    }
}

/// An observation captured during a step together with the mode the robot
/// actually used.
#[derive(Clone, Debug, PartialEq)]
pub struct CapturedObservation {
    pub robot: usize,
    pub observation: ObservationVector,
    pub label: Mode,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub t: u64,
    pub observations: Vec<CapturedObservation>,
}

pub struct Simulation {
    spec: ScenarioSpec,
    scan_cfg: ScanConfig,
    potential: PotentialParams,
    rs: RSParams,
    robots: Vec<Robot>,
    t: u64,
    seen: BTreeSet<Collision>,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    learned: Option<LearnedSwitch>,
    capture: bool,
    log: TrajectoryLog,
}

struct Control {
    theta: f64,
    i_dir: Direction,
    drive: ForceSet,
    events: Vec<SwitchEvent>,
    memory: SwitchMemory,
    observation: Option<ObservationVector>,
}

impl Simulation {
    /// Validates the spec and loads the weights file for `apf-ls`.
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let learned = match (spec.params.method, &spec.params.weights) {
            (Method::ApfLs, Some(path)) => Some(LearnedSwitch::load(path)?),
            _ => None,
        };
        Self::build(spec, learned)
    }

    /// Uses an already loaded classifier; the spec's weights path is ignored.
    pub fn with_learned_switch(spec: ScenarioSpec, learned: LearnedSwitch) -> Result<Self> {
        spec.validate_layout()?;
        Self::build(spec, Some(learned))
    }

    fn build(spec: ScenarioSpec, learned: Option<LearnedSwitch>) -> Result<Self> {
        let p = &spec.params;
        if let Some(ls) = &learned {
            if ls.config().ray_count != p.ray_count {
                return Err(Error::config(format!(
                    "weights expect M = {}, scenario uses M = {}",
                    ls.config().ray_count,
                    p.ray_count
                )));
            }
        }
        let noise = (p.range_noise_std > 0.0)
            .then(|| Normal::new(0.0, p.range_noise_std).map_err(|e| Error::config(e.to_string())))
            .transpose()?;
        let robots = spec
            .robots
            .iter()
            .enumerate()
            .map(|(id, r)| {
                let frame = InitialFrame::new(r.start);
                Robot {
                    id,
                    state: r.start,
                    goal: r.goal,
                    status: RobotStatus::Active,
                    arrived_at: None,
                    in_collision: false,
                    memory: SwitchMemory::new(frame.state_from_world(&r.start)),
                    last_scan: None,
                    last_force: 0.0,
                    human_override: None,
                    frame,
                    goal_if: frame.point_from_world(r.goal),
                    episode: EpisodeBuffer::new(),
                }
            })
            .collect();
        let mut sim = Self {
            scan_cfg: p.scan_config(),
            potential: p.potential(),
            rs: p.rs(),
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
            robots,
            t: 0,
            seen: BTreeSet::new(),
            noise,
            learned,
            capture: false,
            log: TrajectoryLog::new(),
        };
        let tol = sim.spec.params.kinematics.arrival_tolerance;
        let mut arrived = Vec::new();
        for r in &mut sim.robots {
            if r.state.position().distance(r.goal) <= tol {
                r.status = RobotStatus::Arrived;
                r.arrived_at = Some(0);
                arrived.push(r.id);
            }
        }
        for id in 0..sim.robots.len() {
            let ev = arrived.contains(&id).then(|| "arrive".to_string());
            sim.log_robot(id, ev);
        }
        Ok(sim)
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn world(&self) -> &WorldModel {
        &self.spec.world
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    /// Steps completed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    /// True once every robot stopped or the step limit is reached.
    pub fn is_done(&self) -> bool {
        self.t >= self.spec.params.step_limit || self.robots.iter().all(|r| !r.is_active())
    }

    /// Whether each step returns the observations it built.
    pub fn set_capture_observations(&mut self, on: bool) {
        self.capture = on;
    }

    /// Sets or clears a sticky mode override for one robot.
    pub fn set_override(&mut self, id: usize, mode: Option<Mode>) -> Result<()> {
        let r = self.robots.get_mut(id).ok_or_else(|| Error::domain(format!("no robot {id}")))?;
        r.human_override = mode;
        Ok(())
    }

    pub fn metrics(&self) -> MetricsReport {
        let outcomes: Vec<RobotOutcome> = self
            .robots
            .iter()
            .map(|r| RobotOutcome { arrived_at: r.arrived_at, in_collision: r.in_collision })
            .collect();
        MetricsReport::from_outcomes(&outcomes)
    }

    fn log_robot(&mut self, id: usize, event: Option<String>) {
        let r = &self.robots[id];
        self.log.push(StepRecord {
            t: self.t,
            id,
            x: r.state.x,
            y: r.state.y,
            psi: r.state.psi,
            theta_rot: r.memory.theta_rot,
            i_dir: r.memory.i_dir,
            mode: r.memory.mode(),
            f_tot_mag: r.last_force,
            event,
        });
    }

    fn scan_for(&mut self, id: usize, others: &[DiscBody]) -> Result<Scan> {
        let scan = raycast(&self.spec.world, others, &self.robots[id].state, &self.scan_cfg)?;
        let Some(noise) = self.noise else {
            return Ok(scan);
        };
        let d_max = self.scan_cfg.max_range;
        let ranges: Vec<f64> =
            scan.ranges().map(|d| (d + noise.sample(&mut self.rng)).clamp(1e-6, d_max)).collect();
        Ok(Scan::from_ranges(&ranges, d_max))
    }

    fn control(&self, id: usize, scan: &Scan) -> Result<(Control, RobotState)> {
        let r = &self.robots[id];
        let p = &self.spec.params;
        let mut mem = r.memory.clone();
        let state_if = r.frame.state_from_world(&r.state);
        mem.observe(state_if, self.t);
        let g_rel = relative_goal(&state_if, r.goal_if);
        let pos = state_if.position();
        let weighted = p.method == Method::Apf && p.apf_force == ApfForce::Weighted;
        let force = if weighted {
            total_force_vanilla(g_rel, scan, &self.potential)
        } else {
            total_force(g_rel, mem.theta_rot, scan, &self.potential)
        };
        let observation = (self.capture || self.learned.is_some())
            .then(|| build_observation(scan, g_rel, &mem, &force, r.goal_if));
        let input = SwitchInput { scan, g_rel, force: &force, pos, goal: r.goal_if };

        let (mut theta, mut i_dir, mut extra) = match p.method {
            Method::Apf => (0.0, mem.i_dir, Vec::new()),
            Method::ApfRs | Method::ApfLs => {
                let d = rs_decide(&mem, &input, &self.rs);
                let mut ev = Vec::new();
                if d.loop_detected {
                    ev.push(SwitchEvent::LoopDetected);
                }
                if d.broke_wf {
                    ev.push(SwitchEvent::BreakWf);
                }
                (d.theta_rot, d.i_dir, ev)
            }
        };
        if let (Some(ls), Some(obs)) = (&self.learned, &observation) {
            let mut episode = r.episode.clone();
            episode.push(obs.clone());
            let prob = ls.predict(&episode)?;
            (theta, i_dir) = ls_override(theta, i_dir, prob, &mem, &input, &self.rs);
        }
        if let Some(m) = r.human_override {
            let prob = if m == Mode::Wf { 1.0 } else { 0.0 };
            (theta, i_dir) = ls_override(theta, i_dir, prob, &mem, &input, &self.rs);
        }
        let (memory, mut events) = commit(&mem, theta, i_dir, pos, r.goal_if, &self.rs);
        events.append(&mut extra);

        let drive = if weighted || theta == mem.theta_rot {
            force
        } else {
            total_force(g_rel, theta, scan, &self.potential)
        };
        let cmd = force_to_command(drive.f_tot, &p.kinematics);
        let next = integrate(&r.state, &cmd, p.kinematics.dt);
        Ok((Control { theta, i_dir, drive, events, memory, observation }, next))
    }

    /// Advances every active robot by one control period.
    pub fn step(&mut self) -> Result<StepReport> {
        if self.is_done() {
            return Ok(StepReport { t: self.t, observations: Vec::new() });
        }
        let radius = self.spec.params.radius;
        let bodies: Vec<DiscBody> = self.robots.iter().map(|r| r.body(radius)).collect();
        let mut report = StepReport { t: self.t + 1, observations: Vec::new() };
        let mut events: Vec<Vec<&'static str>> = vec![Vec::new(); self.robots.len()];
        let mut next_states = Vec::with_capacity(self.robots.len());

        for id in 0..self.robots.len() {
            if !self.robots[id].is_active() {
                next_states.push(None);
                continue;
            }
            let others: Vec<DiscBody> =
                bodies.iter().enumerate().filter(|&(j, _)| j != id).map(|(_, b)| *b).collect();
            let scan = self.scan_for(id, &others)?;
            let (c, next) = self.control(id, &scan)?;
            let r = &mut self.robots[id];
            if let Some(obs) = c.observation {
                if self.capture {
                    report.observations.push(CapturedObservation {
                        robot: id,
                        observation: obs.clone(),
                        label: Mode::from_theta(c.theta),
                    });
                }
                r.episode.push(obs);
            }
            debug_assert_eq!(c.memory.theta_rot, c.theta);
            debug_assert_eq!(c.memory.i_dir, c.i_dir);
            r.memory = c.memory;
            r.last_force = c.drive.f_tot.norm();
            r.last_scan = Some(scan);
            events[id].extend(c.events.iter().map(|e| e.as_str()));
            next_states.push(Some(next));
        }

        self.t += 1;
        let tol = self.spec.params.kinematics.arrival_tolerance;
        let bounds = self.spec.world.bounds();
        for (id, next) in next_states.into_iter().enumerate() {
            let Some(next) = next else { continue };
            let r = &mut self.robots[id];
            r.state = next;
            if !bounds.contains(next.position()) {
                r.status = RobotStatus::Collided;
                r.in_collision = true;
                events[id].push("collision");
            } else if next.position().distance(r.goal) <= tol {
                r.status = RobotStatus::Arrived;
                r.arrived_at = Some(self.t);
                events[id].push("arrive");
            }
        }

        let bodies: Vec<DiscBody> = self.robots.iter().map(|r| r.body(radius)).collect();
        for c in collisions(&bodies, &self.spec.world) {
            if !self.seen.insert(c) {
                continue;
            }
            let involved = match c {
                Collision::Robots { a, b } => vec![a, b],
                Collision::Obstacle { robot, .. } => vec![robot],
            };
            for id in involved {
                let r = &mut self.robots[id];
                if r.status == RobotStatus::Active {
                    r.status = RobotStatus::Collided;
                }
                if !r.in_collision {
                    r.in_collision = true;
                    events[id].push("collision");
                }
            }
        }

        for (id, ev) in events.into_iter().enumerate() {
            let ev = (!ev.is_empty()).then(|| ev.join(","));
            self.log_robot(id, ev);
        }
        Ok(report)
    }

    /// Steps until done.
    pub fn run(&mut self) -> Result<MetricsReport> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.metrics())
    }

    pub fn into_log(self) -> TrajectoryLog {
        self.log
    }
}

/// Runs a scenario to completion.
pub fn run_instance(spec: ScenarioSpec) -> Result<(MetricsReport, TrajectoryLog)> {
    let mut sim = Simulation::new(spec)?;
    let metrics = sim.run()?;
    Ok((metrics, sim.into_log()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Bounds, Polygon};

    fn single(goal: Vec2, method: Method) -> ScenarioSpec {
        let mut params = Params { method, step_limit: 400, ..Params::default() };
        params.kinematics.arrival_tolerance = 0.2;
        ScenarioSpec::new(
            WorldModel::empty(Bounds::centered(20.0)),
            vec![RobotSpec { start: RobotState::new(0.0, 0.0, 0.0), goal }],
            params,
            1,
        )
    }

    #[test]
    fn straight_run_matches_kinematic_closed_form() {
        let (m, log) = run_instance(single(Vec2::new(5.0, 0.0), Method::ApfRs)).unwrap();
        let expected = ((5.0f64 - 0.2) / (0.3 * 0.2)).ceil() as i64;
        let got = m.makespan.unwrap() as i64;
        assert!((got - expected).abs() <= 2, "arrived at {got}, expected {expected}");
        assert_eq!(log.len() as u64, m.makespan.unwrap() + 1);
        assert!(log.records.iter().all(|r| r.mode == Mode::Apf));
    }

    #[test]
    fn robots_at_goals_do_not_move() {
        let mut spec = single(Vec2::new(0.1, 0.0), Method::ApfRs);
        spec.robots.push(RobotSpec { start: RobotState::new(3.0, 0.0, 1.0), goal: Vec2::new(3.0, 0.05) });
        let mut sim = Simulation::new(spec).unwrap();
        let before: Vec<RobotState> = sim.robots().iter().map(|r| r.state).collect();
        assert!(sim.is_done());
        sim.step().unwrap();
        let after: Vec<RobotState> = sim.robots().iter().map(|r| r.state).collect();
        assert_eq!(before, after);
        assert!(sim.metrics().success);
        assert_eq!(sim.metrics().makespan, Some(0));
    }

    #[test]
    fn head_on_pair_collides_when_closer_than_two_radii() {
        let mut spec = single(Vec2::new(4.0, 0.0), Method::Apf);
        spec.robots[0].start = RobotState::new(-0.5, 0.0, 0.0);
        spec.robots.push(RobotSpec { start: RobotState::new(0.5, 0.0, std::f64::consts::PI), goal: Vec2::new(-4.0, 0.0) });
        // Nearly blind to each other.
        spec.params.apf_force = ApfForce::Weighted;
        spec.params.sigma = 1e-9;
        let mut sim = Simulation::new(spec).unwrap();
        loop {
            let d = sim.robots()[0].state.position().distance(sim.robots()[1].state.position());
            let prev_collided = sim.robots()[0].in_collision;
            assert!(!prev_collided || d < 0.34);
            sim.step().unwrap();
            let d = sim.robots()[0].state.position().distance(sim.robots()[1].state.position());
            if d < 0.34 {
                assert!(sim.robots().iter().all(|r| r.status == RobotStatus::Collided));
                break;
            }
            assert!(sim.robots().iter().all(|r| r.is_active()), "flagged before overlap");
            assert!(!sim.is_done());
        }
        let frozen: Vec<RobotState> = sim.robots().iter().map(|r| r.state).collect();
        sim.step().unwrap();
        assert_eq!(frozen, sim.robots().iter().map(|r| r.state).collect::<Vec<_>>());
        let m = sim.metrics();
        assert_eq!(m.collision_count, 2);
        assert_eq!(m.arrival_rate, 0.0);
    }

    #[test]
    fn determinism_and_log_metrics_agree() {
        let mut spec = single(Vec2::new(6.0, 1.0), Method::ApfRs);
        spec.world = spec.world.clone().with_obstacle(Polygon::rectangle(Vec2::new(2.5, -1.0), Vec2::new(3.0, 2.5)).unwrap()).unwrap();
        spec.params.range_noise_std = 0.01;
        let (m1, l1) = run_instance(spec.clone()).unwrap();
        let (m2, l2) = run_instance(spec).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(l1.to_jsonl().unwrap(), l2.to_jsonl().unwrap());
        assert_eq!(MetricsReport::from_log(&l1, 1), m1);
    }

    #[test]
    fn one_record_per_robot_per_step() {
        let mut spec = single(Vec2::new(3.0, 0.0), Method::ApfRs);
        spec.robots.push(RobotSpec { start: RobotState::new(0.0, 3.0, 0.0), goal: Vec2::new(0.0, 3.05) });
        let (_, log) = run_instance(spec).unwrap();
        let steps = log.last_step() + 1;
        assert_eq!(log.len() as u64, 2 * steps);
        for (k, pair) in log.records.chunks(2).enumerate() {
            assert_eq!(pair[0].t, k as u64);
            assert_eq!((pair[0].id, pair[1].id), (0, 1));
        }
    }
}
