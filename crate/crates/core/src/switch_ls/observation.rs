//! Observation vectors and the padded sliding window fed to the classifier.

use serde::{Deserialize, Serialize};

use crate::agent::{relative_goal, RobotState};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::potential::ForceSet;
use crate::switch_rs::{nearest_ray_index, Direction, SwitchMemory};
use crate::world::Scan;

/// Number of non-range features appended after the M ranges.
pub const EXTRA_FEATURES: usize = 17;

/// `[ranges(M) | goal now, prev, hp, lp (8) | ψ | θ now, prev, hp, lp (4) |
/// ‖l_z‖ | ‖F_tot‖ | i_dir at hp | mode]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationVector(Vec<f64>);

impl ObservationVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ray_count(&self) -> usize {
        self.0.len().saturating_sub(EXTRA_FEATURES)
    }

    fn extra(&self, i: usize) -> f64 {
        self.0[self.ray_count() + i]
    }

    pub fn ranges(&self) -> &[f64] {
        &self.0[..self.ray_count()]
    }

    pub fn rel_goal_now(&self) -> Vec2 {
        Vec2::new(self.extra(0), self.extra(1))
    }

    pub fn rel_goal_prev(&self) -> Vec2 {
        Vec2::new(self.extra(2), self.extra(3))
    }

    pub fn rel_goal_hp(&self) -> Vec2 {
        Vec2::new(self.extra(4), self.extra(5))
    }

    pub fn rel_goal_lp(&self) -> Vec2 {
        Vec2::new(self.extra(6), self.extra(7))
    }

    pub fn heading(&self) -> f64 {
        self.extra(8)
    }

    /// θ_rot now, previous, at hit point, at leave point.
    pub fn rotations(&self) -> [f64; 4] {
        [self.extra(9), self.extra(10), self.extra(11), self.extra(12)]
    }

    pub fn goal_ray_range(&self) -> f64 {
        self.extra(13)
    }

    pub fn force_magnitude(&self) -> f64 {
        self.extra(14)
    }

    pub fn i_dir_hp(&self) -> f64 {
        self.extra(15)
    }

    pub fn mode(&self) -> f64 {
        self.extra(16)
    }
}

fn goal_from(state: &RobotState, goal: Vec2) -> Vec2 {
    relative_goal(state, goal)
}

/// Builds the observation for the current step from the scan, the relative
/// goal, the switch memory as it stands before this step's decision, and
/// the force computed with the current rotation. `goal` is in the initial
/// frame.
///
/// Before the first hit (leave) point the corresponding slots repeat the
/// current relative goal with zero rotation and a counterclockwise
/// direction.
pub fn build_observation(scan: &Scan, g_rel: Vec2, mem: &SwitchMemory, force: &ForceSet, goal: Vec2) -> ObservationVector {
    let m = scan.len();
    let mut v = Vec::with_capacity(m + EXTRA_FEATURES);
    v.extend(scan.ranges());

    let prev = goal_from(&mem.state_prev, goal);
    let (hp_goal, hp_theta, hp_dir) = match mem.hp_now {
        Some(hp) => (goal_from(&hp.state, goal), hp.theta_rot, hp.i_dir),
        None => (g_rel, 0.0, Direction::Ccw),
    };
    let (lp_goal, lp_theta) = match mem.lp_now {
        Some(lp) => (goal_from(&lp.state, goal), lp.theta_rot),
        None => (g_rel, 0.0),
    };
    for g in [g_rel, prev, hp_goal, lp_goal] {
        v.push(g.x);
        v.push(g.y);
    }
    v.push(mem.state_now.psi);
    v.extend([mem.theta_rot, mem.theta_prev, hp_theta, lp_theta]);
    let z = if m > 0 { nearest_ray_index(scan, g_rel) } else { 0 };
    v.push(scan.rays().get(z).map_or(0.0, |l| l.norm()));
    v.push(force.f_tot.norm());
    v.push(hp_dir.sign());
    v.push(f64::from(mem.mode().indicator()));
    ObservationVector(v)
}

/// `T_seq` rows, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationMatrix {
    rows: Vec<ObservationVector>,
}

impl ObservationMatrix {
    pub fn from_rows(rows: Vec<ObservationVector>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::domain("observation matrix needs at least one row"));
        };
        let width = first.len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::domain("observation rows have differing widths"));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ObservationVector] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, ObservationVector::len)
    }
}

/// All observations of one robot's episode, in time order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeBuffer {
    observations: Vec<ObservationVector>,
}

impl EpisodeBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: ObservationVector) {
        self.observations.push(obs);
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[ObservationVector] {
        &self.observations
    }

    /// The last `t_seq` observations, left-padded with copies of the first
    /// one while the episode is shorter than the window.
    pub fn stack(&self, t_seq: usize) -> Result<ObservationMatrix> {
        stack(&self.observations, t_seq)
    }
}

/// Window ending at the last element of `history`; see
/// [`EpisodeBuffer::stack`].
pub fn stack(history: &[ObservationVector], t_seq: usize) -> Result<ObservationMatrix> {
    if history.is_empty() {
        return Err(Error::domain("cannot stack an empty episode"));
    }
    if t_seq == 0 {
        return Err(Error::domain("T_seq must be positive"));
    }
    let n = history.len();
    let pad = t_seq.saturating_sub(n);
    let mut rows = Vec::with_capacity(t_seq);
    rows.extend(std::iter::repeat_n(history[0].clone(), pad));
    rows.extend(history[n.saturating_sub(t_seq)..].iter().cloned());
    ObservationMatrix::from_rows(rows)
}
