//! Per-robot frames, force-to-velocity conversion and kinematic integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Vec2};

/// Planar pose `(x, y, ψ)` with ψ in (−π, π].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi) }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Expresses `self` (given in the world) in the frame anchored at `origin`.
    pub fn relative_to(&self, origin: &RobotState) -> RobotState {
        let p = (self.position() - origin.position()).rotate(-origin.psi);
        RobotState::new(p.x, p.y, self.psi - origin.psi)
    }
}

impl From<[f64; 3]> for RobotState {
    fn from(v: [f64; 3]) -> Self {
        RobotState::new(v[0], v[1], v[2])
    }
}

impl From<RobotState> for [f64; 3] {
    fn from(s: RobotState) -> Self {
        [s.x, s.y, s.psi]
    }
}

/// A robot's private odometry frame, anchored at its spawn pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialFrame {
    anchor: RobotState,
}

impl InitialFrame {
    pub fn new(anchor: RobotState) -> Self {
        Self { anchor }
    }

    pub fn state_from_world(&self, s: &RobotState) -> RobotState {
        s.relative_to(&self.anchor)
    }

    pub fn point_from_world(&self, p: Vec2) -> Vec2 {
        (p - self.anchor.position()).rotate(-self.anchor.psi)
    }

    pub fn point_to_world(&self, p: Vec2) -> Vec2 {
        p.rotate(self.anchor.psi) + self.anchor.position()
    }
}

/// Goal expressed in the robot frame: R(−ψ)·(goal − position).
pub fn relative_goal(state: &RobotState, goal: Vec2) -> Vec2 {
    (goal - state.position()).rotate(-state.psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveModel {
    Differential,
    Holonomic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicsConfig {
    pub model: DriveModel,
    pub v_max: f64,
    pub w_max: f64,
    /// Heading gain, 1/s.
    pub k_omega: f64,
    /// Control period, seconds.
    pub dt: f64,
    /// Arrival tolerance, meters.
    pub arrival_tolerance: f64,
    /// Force magnitude at and above which the robot drives at full speed.
    pub force_scale: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            model: DriveModel::Differential,
            v_max: 0.3,
            w_max: 1.9,
            k_omega: 2.0,
            dt: 0.2,
            arrival_tolerance: 0.2,
            force_scale: 5.0,
        }
    }
}

impl KinematicsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("k_omega", self.k_omega),
            ("dt", self.dt),
            ("arrival_tolerance", self.arrival_tolerance),
            ("force_scale", self.force_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Velocity command in the robot frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ControlCommand {
    Differential { v: f64, w: f64 },
    Holonomic { vx: f64, vy: f64 },
}

impl ControlCommand {
    pub fn stop(model: DriveModel) -> Self {
        match model {
            DriveModel::Differential => ControlCommand::Differential { v: 0.0, w: 0.0 },
            DriveModel::Holonomic => ControlCommand::Holonomic { vx: 0.0, vy: 0.0 },
        }
    }
}

/// Maps a robot-frame force to a bounded velocity command.
///
/// Differential drive turns towards the force with a saturated P-law and
/// only drives forward, scaled by `cos φ` and by the force magnitude up to
/// `force_scale`. Holonomic drive moves along the force.
pub fn force_to_command(f_tot: Vec2, cfg: &KinematicsConfig) -> ControlCommand {
    let mag = f_tot.norm();
    if mag == 0.0 {
        return ControlCommand::stop(cfg.model);
    }
    match cfg.model {
        DriveModel::Differential => {
            let phi = f_tot.angle();
            let w = (cfg.k_omega * phi).clamp(-cfg.w_max, cfg.w_max);
            let v = cfg.v_max * phi.cos().max(0.0) * (mag / cfg.force_scale).min(1.0);
            ControlCommand::Differential { v, w }
        }
        DriveModel::Holonomic => {
            let vel = f_tot * (cfg.v_max / mag.max(cfg.force_scale));
            ControlCommand::Holonomic { vx: vel.x, vy: vel.y }
        }
    }
}

/// Advances `state` by one period of `cmd`.
///
/// Differential commands follow the exact unicycle arc; holonomic commands
/// are robot-frame velocities integrated with one Euler step.
pub fn integrate(state: &RobotState, cmd: &ControlCommand, dt: f64) -> RobotState {
    match *cmd {
        ControlCommand::Differential { v, w } => {
            let psi = state.psi;
            if w == 0.0 {
                RobotState::new(state.x + v * dt * psi.cos(), state.y + v * dt * psi.sin(), psi)
            } else {
                let psi1 = psi + w * dt;
                let radius = v / w;
                RobotState::new(
                    state.x + radius * (psi1.sin() - psi.sin()),
                    state.y - radius * (psi1.cos() - psi.cos()),
                    psi1,
                )
            }
        }
        ControlCommand::Holonomic { vx, vy } => {
            let d = Vec2::new(vx, vy).rotate(state.psi) * dt;
            RobotState::new(state.x + d.x, state.y + d.y, state.psi)
        }
    }
}
