//! Attractive and repulsive fields.
//!
//! The proposed controller blends a rotated, fixed-magnitude attraction with
//! the scan-derived repulsion (`total_force`). The classic weighted sum
//! (`total_force_vanilla`) is kept for baseline runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::world::Scan;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    /// Blend weight between rotated attraction and repulsion, in (0, 1).
    pub omega: f64,
    /// Attraction weight of the weighted-sum baseline.
    pub gamma: f64,
    /// Repulsion weight of the weighted-sum baseline.
    pub sigma: f64,
    pub max_range: f64,
    /// Force magnitude under which the rule-based switch escalates.
    pub f_thr: f64,
}

/// Default blend weight. At 0.5 the free-space force equals the default
/// threshold exactly, so any distant echo would trigger wall following.
pub const DEFAULT_OMEGA: f64 = 0.7;

impl PotentialParams {
    pub fn with_max_range(max_range: f64) -> Self {
        Self { omega: DEFAULT_OMEGA, gamma: 1.0, sigma: 1.0, max_range, f_thr: 0.5 * max_range }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::config(format!("omega must lie in (0,1), got {}", self.omega)));
        }
        if !(self.gamma > 0.0 && self.sigma > 0.0) {
            return Err(Error::config("gamma and sigma must be positive"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::config("max_range must be positive"));
        }
        // f_thr = 0 is allowed: it disables escalation entirely.
        if !(self.f_thr >= 0.0) {
            return Err(Error::config("f_thr must be non-negative"));
        }
        Ok(())
    }
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self::with_max_range(10.0)
    }
}

/// Forces and potentials of one control step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForceSet {
    pub f_att: Vec2,
    pub f_att_rot: Vec2,
    pub f_rep: Vec2,
    pub f_tot: Vec2,
    pub u_att: f64,
    pub u_rep: f64,
}

/// Gradient of ‖g‖²/2 towards the goal: the relative goal itself.
pub fn attractive_force(g_rel: Vec2) -> Vec2 {
    g_rel
}

pub fn attractive_potential(g_rel: Vec2) -> f64 {
    0.5 * g_rel.norm_sq()
}

/// Attraction rotated by `theta_rot` and rescaled to magnitude `max_range`.
/// Zero at the goal.
pub fn normalized_attractive(g_rel: Vec2, theta_rot: f64, max_range: f64) -> Vec2 {
    let n = g_rel.norm();
    if n == 0.0 {
        return Vec2::ZERO;
    }
    (g_rel * (max_range / n)).rotate(theta_rot)
}

/// Σ over hit rays of −l/‖l‖⁴.
pub fn repulsive_force(scan: &Scan) -> Vec2 {
    scan.hits().fold(Vec2::ZERO, |acc, l| {
        let n = l.norm();
        acc + l * (-1.0 / (n * n * n * n))
    })
}

pub fn repulsive_potential(scan: &Scan) -> f64 {
    scan.hits().map(|l| 0.5 / l.norm_sq()).sum()
}

/// ω·F'_att + (1−ω)·F_rep.
pub fn total_force(g_rel: Vec2, theta_rot: f64, scan: &Scan, p: &PotentialParams) -> ForceSet {
    let f_att = attractive_force(g_rel);
    let f_att_rot = normalized_attractive(g_rel, theta_rot, p.max_range);
    let f_rep = repulsive_force(scan);
    ForceSet {
        f_att,
        f_att_rot,
        f_rep,
        f_tot: f_att_rot * p.omega + f_rep * (1.0 - p.omega),
        u_att: attractive_potential(g_rel),
        u_rep: repulsive_potential(scan),
    }
}

/// γ·F_att + σ·F_rep, the un-normalized weighted sum.
pub fn total_force_vanilla(g_rel: Vec2, scan: &Scan, p: &PotentialParams) -> ForceSet {
    let f_att = attractive_force(g_rel);
    let f_rep = repulsive_force(scan);
    ForceSet {
        f_att,
        f_att_rot: f_att,
        f_rep,
        f_tot: f_att * p.gamma + f_rep * p.sigma,
        u_att: attractive_potential(g_rel),
        u_rep: repulsive_potential(scan),
    }
}
