//! Per-instance outcome metrics.

use serde::{Deserialize, Serialize};

use super::log::TrajectoryLog;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub success: bool,
    pub arrival_rate: f64,
    /// Step of the last arrival; only for successful instances.
    pub makespan: Option<u64>,
    /// Mean arrival step over robots that arrived without a collision.
    pub mean_timestep: Option<f64>,
    /// Robots involved in at least one collision.
    pub collision_count: usize,
}

/// What happened to one robot over an instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RobotOutcome {
    pub arrived_at: Option<u64>,
    pub in_collision: bool,
}

impl MetricsReport {
    pub fn from_outcomes(outcomes: &[RobotOutcome]) -> Self {
        let n = outcomes.len();
        let collision_count = outcomes.iter().filter(|o| o.in_collision).count();
        let clean: Vec<u64> = outcomes.iter().filter(|o| !o.in_collision).filter_map(|o| o.arrived_at).collect();
        let all_arrived = outcomes.iter().all(|o| o.arrived_at.is_some());
        let success = n > 0 && all_arrived && collision_count == 0;
        let arrival_rate = if n == 0 { 0.0 } else { clean.len() as f64 / n as f64 };
        let makespan = if success { clean.iter().copied().max() } else { None };
        let mean_timestep =
            (!clean.is_empty()).then(|| clean.iter().map(|&t| t as f64).sum::<f64>() / clean.len() as f64);
        Self { success, arrival_rate, makespan, mean_timestep, collision_count }
    }

    /// Recomputes the metrics from `arrive` and `collision` events in a log.
    pub fn from_log(log: &TrajectoryLog, robot_count: usize) -> Self {
        let mut outcomes = vec![RobotOutcome::default(); robot_count];
        for r in &log.records {
            let o = &mut outcomes[r.id];
            if r.has_event("arrive") && o.arrived_at.is_none() {
                o.arrived_at = Some(r.t);
            }
            if r.has_event("collision") {
                o.in_collision = true;
            }
        }
        Self::from_outcomes(&outcomes)
    }
}
