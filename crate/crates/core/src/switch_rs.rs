//! Rule-based switching between potential-field motion and wall-following.
//!
//! Wall-following is realized by rotating the attractive force: the mode is
//! APF exactly when the rotation angle is zero. Each step the switch either
//! escalates the rotation (force too weak, likely a local minimum) or lets
//! it recover towards zero, with a fixed direction per wall-follow episode.
//! A constant-size memory of hit points (APF→WF) and leave points (WF→APF)
//! drives loop detection and the M-line exit test.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::agent::RobotState;
use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, Vec2};
use crate::potential::ForceSet;
use crate::world::Scan;

/// Navigation mode, derived from the rotation angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Apf,
    Wf,
}

impl Mode {
    pub fn from_theta(theta_rot: f64) -> Self {
        if theta_rot != 0.0 {
            Mode::Wf
        } else {
            Mode::Apf
        }
    }

    /// The 0/1 indicator used in observations and datasets.
    pub fn indicator(self) -> u8 {
        match self {
            Mode::Apf => 0,
            Mode::Wf => 1,
        }
    }
}

/// Wall-follow direction: counterclockwise (+1) or clockwise (−1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Direction {
    Ccw,
    Cw,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Ccw => 1.0,
            Direction::Cw => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Ccw => Direction::Cw,
            Direction::Cw => Direction::Ccw,
        }
    }
}

impl From<Direction> for i8 {
    fn from(d: Direction) -> i8 {
        d.sign() as i8
    }
}

impl TryFrom<i8> for Direction {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            1 => Ok(Direction::Ccw),
            -1 => Ok(Direction::Cw),
            other => Err(format!("direction must be ±1, got {other}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitPoint {
    /// State in the robot's initial frame.
    pub state: RobotState,
    pub goal_distance: f64,
    pub i_dir: Direction,
    pub theta_rot: f64,
    pub t: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeavePoint {
    pub state: RobotState,
    /// Last nonzero rotation before leaving wall-following.
    pub theta_rot: f64,
    pub t: u64,
}

/// Per-robot switch state. All poses are in the robot's initial frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchMemory {
    pub state_now: RobotState,
    pub state_prev: RobotState,
    pub theta_rot: f64,
    pub theta_prev: f64,
    pub i_dir: Direction,
    pub hp_now: Option<HitPoint>,
    pub hp_prev: Option<HitPoint>,
    pub lp_now: Option<LeavePoint>,
    pub lp_prev: Option<LeavePoint>,
    /// Re-entries into the current hit point's neighbourhood.
    pub revisit_count: u32,
    /// Whether the robot has left the hit-point disc since the last re-entry.
    pub hp_exited: bool,
    /// Whether the robot has been off the current M-line since it last
    /// started wall-following.
    #[serde(default)]
    pub mline_departed: bool,
    pub t: u64,
}

impl SwitchMemory {
    pub fn new(state: RobotState) -> Self {
        Self {
            state_now: state,
            state_prev: state,
            theta_rot: 0.0,
            theta_prev: 0.0,
            i_dir: Direction::Ccw,
            hp_now: None,
            hp_prev: None,
            lp_now: None,
            lp_prev: None,
            revisit_count: 0,
            hp_exited: false,
            mline_departed: false,
            t: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        Mode::from_theta(self.theta_rot)
    }

    /// Shifts in the state observed at the start of step `t`.
    pub fn observe(&mut self, state: RobotState, t: u64) {
        self.state_prev = self.state_now;
        self.state_now = state;
        self.t = t;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RSParams {
    pub theta_upd: f64,
    pub theta_rcv: f64,
    pub f_thr: f64,
    /// Hit-point revisit radius, meters.
    pub eps_hp: f64,
    /// Revisits needed to declare a loop.
    pub n_revisit: u32,
    /// M-line lateral tolerance, meters.
    pub eps_mline: f64,
}

impl RSParams {
    /// θ_upd = 2π/M, θ_rcv = θ_upd/2, f_thr = d_max/2, ε_hp = 2r, ε_mline = r.
    pub fn defaults(ray_count: usize, max_range: f64, radius: f64) -> Self {
        let theta_upd = TAU / ray_count as f64;
        Self {
            theta_upd,
            theta_rcv: 0.5 * theta_upd,
            f_thr: 0.5 * max_range,
            eps_hp: 2.0 * radius,
            n_revisit: 1,
            eps_mline: radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_upd > self.theta_rcv && self.theta_rcv > 0.0) {
            return Err(Error::config("need theta_upd > theta_rcv > 0"));
        }
        if !(self.eps_hp > 0.0) || !(self.eps_mline >= 0.0) {
            return Err(Error::config("eps_hp must be positive and eps_mline non-negative"));
        }
        if self.n_revisit < 1 {
            return Err(Error::config("n_revisit must be at least 1"));
        }
        if !(self.f_thr >= 0.0) {
            return Err(Error::config("f_thr must be non-negative"));
        }
        Ok(())
    }
}

/// Index of the ray whose endpoint is nearest to `g_rel`; ties go to the
/// lowest index.
pub fn nearest_ray_index(scan: &Scan, g_rel: Vec2) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &l) in scan.rays().iter().enumerate() {
        let d = (g_rel - l).norm();
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Picks the wall-follow direction that needs the least rotation from the
/// goal bearing to the ray that gets closest to the goal.
pub fn choose_dir(scan: &Scan, g_rel: Vec2) -> Result<Direction> {
    if g_rel == Vec2::ZERO {
        return Err(Error::domain("choose_dir needs a nonzero relative goal"));
    }
    if scan.is_empty() {
        return Err(Error::domain("choose_dir needs a non-empty scan"));
    }
    let m = scan.len();
    let j = nearest_ray_index(scan, g_rel);
    let phi_min = (TAU * j as f64 / m as f64).rem_euclid(TAU);
    let phi_goal = g_rel.angle();
    Ok(direction_from_offset(phi_min - phi_goal))
}

/// +1 when the offset is a counterclockwise turn of less than π, −1 for a
/// clockwise one; offsets of exactly 0 or π go counterclockwise.
fn direction_from_offset(phi_dir: f64) -> Direction {
    let r = phi_dir.rem_euclid(TAU);
    if r > PI && r < TAU {
        Direction::Cw
    } else {
        Direction::Ccw
    }
}

/// Loop test: has the robot, while wall-following, come back into the
/// current hit point's disc (after leaving it) at least `n_revisit` times,
/// counting a re-entry at `pos`?
pub fn check_loop(mem: &SwitchMemory, pos: Vec2, p: &RSParams) -> bool {
    let Some(hp) = mem.hp_now else {
        return false;
    };
    let pending = mem.mode() == Mode::Wf && mem.hp_exited && pos.distance(hp.state.position()) < p.eps_hp;
    mem.revisit_count + u32::from(pending) >= p.n_revisit
}

/// M-line exit test: having left the segment from the current hit point to
/// the goal since wall-following began, `pos` is back within `eps_mline` of
/// it and strictly closer to the goal than the hit point.
pub fn break_wf(mem: &SwitchMemory, pos: Vec2, goal: Vec2, p: &RSParams) -> bool {
    let Some(hp) = mem.hp_now else {
        return false;
    };
    if !mem.mline_departed {
        return false;
    }
    let hp_pos = hp.state.position();
    point_segment_distance(pos, hp_pos, goal) <= p.eps_mline && pos.distance(goal) < hp_pos.distance(goal)
}

/// Everything the switch reads at one step.
#[derive(Clone, Copy, Debug)]
pub struct SwitchInput<'a> {
    pub scan: &'a Scan,
    pub g_rel: Vec2,
    pub force: &'a ForceSet,
    /// Current position in the initial frame.
    pub pos: Vec2,
    /// Goal in the initial frame.
    pub goal: Vec2,
}

/// Output of the decision half of a step, before memory bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub theta_rot: f64,
    pub i_dir: Direction,
    pub loop_detected: bool,
    pub broke_wf: bool,
}

/// Something worth logging that happened during a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchEvent {
    /// APF→WF with a new hit point stored.
    HitPoint,
    /// APF→WF without replacing the stored hit point (not closer to goal).
    WfEntered,
    LeavePoint,
    LoopDetected,
    BreakWf,
}

impl SwitchEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            SwitchEvent::HitPoint => "hp",
            SwitchEvent::WfEntered => "wf",
            SwitchEvent::LeavePoint => "lp",
            SwitchEvent::LoopDetected => "loop",
            SwitchEvent::BreakWf => "break",
        }
    }
}

/// Relative slack on the force threshold. Under default parameters the
/// free-space force magnitude equals `f_thr` exactly, so rounding alone must
/// not count as a weak force.
pub const F_THR_REL_TOL: f64 = 1e-9;

/// `‖F_tot‖ < f_thr`, up to [`F_THR_REL_TOL`].
pub fn force_is_weak(magnitude: f64, f_thr: f64) -> bool {
    magnitude < f_thr * (1.0 - F_THR_REL_TOL)
}

/// Rotation-angle and direction update for one step.
pub fn rs_decide(mem: &SwitchMemory, input: &SwitchInput<'_>, p: &RSParams) -> Decision {
    let theta_prev = mem.theta_rot;
    let loop_detected = check_loop(mem, input.pos, p);
    let i_dir = if loop_detected {
        // hp_now exists whenever a loop is reported
        mem.hp_now.map(|hp| hp.i_dir.reversed()).unwrap_or(mem.i_dir)
    } else if theta_prev != 0.0 {
        mem.i_dir
    } else {
        choose_dir(input.scan, input.g_rel).unwrap_or(mem.i_dir)
    };

    let s = i_dir.sign();
    let mut theta = if force_is_weak(input.force.f_tot.norm(), p.f_thr) {
        theta_prev + s * p.theta_upd
    } else {
        theta_prev - s * p.theta_rcv
    };
    // Keeps i_dir·θ ≥ 0, including right after a loop reversal.
    if s * theta < 0.0 {
        theta = 0.0;
    }

    let broke_wf = theta_prev != 0.0 && theta != 0.0 && break_wf(mem, input.pos, input.goal, p);
    if broke_wf {
        theta = 0.0;
    }
    Decision { theta_rot: theta, i_dir, loop_detected, broke_wf }
}

/// Records the step's outcome: rotation history, hit/leave points and the
/// revisit counter. `theta_rot`/`i_dir` may differ from the rule-based
/// decision when an override was applied.
pub fn commit(
    mem: &SwitchMemory,
    theta_rot: f64,
    i_dir: Direction,
    pos: Vec2,
    goal: Vec2,
    p: &RSParams,
) -> (SwitchMemory, Vec<SwitchEvent>) {
    let mut next = mem.clone();
    let mut events = Vec::new();
    let was_wf = mem.mode() == Mode::Wf;
    let now_wf = theta_rot != 0.0;

    if let (Some(hp), true) = (mem.hp_now, was_wf) {
        let inside = pos.distance(hp.state.position()) < p.eps_hp;
        if inside && mem.hp_exited {
            next.revisit_count += 1;
            next.hp_exited = false;
        } else if !inside {
            next.hp_exited = true;
        }
    }

    next.theta_prev = mem.theta_rot;
    next.theta_rot = theta_rot;
    next.i_dir = i_dir;

    if !was_wf && now_wf {
        let dist = pos.distance(goal);
        let closer = mem.hp_now.map_or(true, |hp| dist < hp.goal_distance);
        if closer {
            next.hp_prev = mem.hp_now;
            next.hp_now =
                Some(HitPoint { state: mem.state_now, goal_distance: dist, i_dir, theta_rot, t: mem.t });
            next.revisit_count = 0;
            next.hp_exited = false;
            events.push(SwitchEvent::HitPoint);
        } else {
            events.push(SwitchEvent::WfEntered);
        }
    } else if was_wf && !now_wf {
        next.lp_prev = mem.lp_now;
        next.lp_now = Some(LeavePoint { state: mem.state_now, theta_rot: mem.theta_rot, t: mem.t });
        events.push(SwitchEvent::LeavePoint);
    }
    if !was_wf && now_wf {
        next.mline_departed = false;
    }
    if let (Some(hp), true) = (next.hp_now, now_wf) {
        if point_segment_distance(pos, hp.state.position(), goal) > p.eps_mline {
            next.mline_departed = true;
        }
    }
    (next, events)
}

/// Result of a full rule-based step.
#[derive(Clone, Debug, PartialEq)]
pub struct RsOutput {
    pub theta_rot: f64,
    pub i_dir: Direction,
    pub memory: SwitchMemory,
    pub events: Vec<SwitchEvent>,
}

/// Decision followed by bookkeeping.
pub fn rs_step(mem: &SwitchMemory, input: &SwitchInput<'_>, p: &RSParams) -> RsOutput {
    let d = rs_decide(mem, input, p);
    let (memory, mut events) = commit(mem, d.theta_rot, d.i_dir, input.pos, input.goal, p);
    if d.loop_detected {
        events.push(SwitchEvent::LoopDetected);
    }
    if d.broke_wf {
        events.push(SwitchEvent::BreakWf);
    }
    RsOutput { theta_rot: d.theta_rot, i_dir: d.i_dir, memory, events }
}
