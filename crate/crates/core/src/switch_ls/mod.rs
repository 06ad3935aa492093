//! Learned switch: a sequence classifier over recent observations whose
//! APF/WF prediction overrides the rule-based decision.

mod observation;
mod vit;
mod weights;

use std::path::Path;
use std::sync::Arc;

pub use observation::{build_observation, stack, EpisodeBuffer, ObservationMatrix, ObservationVector, EXTRA_FEATURES};
pub use vit::{sigmoid, vit_forward, vit_logit};
pub use weights::{Normalization, Tensor, ViTConfig, WeightsBundle, FORMAT_VERSION};

use crate::error::Result;
use crate::switch_rs::{choose_dir, Direction, Mode, RSParams, SwitchInput, SwitchMemory};

/// Probability at or above which the classifier's vote is WF.
pub const DECISION_THRESHOLD: f64 = 0.5;

pub fn predicted_mode(prob: f64) -> Mode {
    if prob >= DECISION_THRESHOLD {
        Mode::Wf
    } else {
        Mode::Apf
    }
}

/// Applies a mode vote on top of the rule-based output.
///
/// APF forces a zero rotation. WF keeps a nonzero rule-based rotation as is;
/// if the rules produced zero, it takes one escalation step, picking a fresh
/// direction when the robot was not already wall-following.
pub fn ls_override(
    rs_theta: f64,
    rs_dir: Direction,
    prob: f64,
    mem: &SwitchMemory,
    input: &SwitchInput<'_>,
    p: &RSParams,
) -> (f64, Direction) {
    match predicted_mode(prob) {
        Mode::Apf => (0.0, rs_dir),
        Mode::Wf if rs_theta != 0.0 => (rs_theta, rs_dir),
        Mode::Wf => {
            let dir = if mem.theta_rot == 0.0 {
                choose_dir(input.scan, input.g_rel).unwrap_or(rs_dir)
            } else {
                rs_dir
            };
            (dir.sign() * p.theta_upd, dir)
        }
    }
}

/// Loaded classifier, shareable across robots.
#[derive(Clone, Debug)]
pub struct LearnedSwitch {
    weights: Arc<WeightsBundle>,
}

impl LearnedSwitch {
    pub fn new(weights: WeightsBundle) -> Self {
        Self { weights: Arc::new(weights) }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(WeightsBundle::load(path)?))
    }

    pub fn config(&self) -> &ViTConfig {
        self.weights.config()
    }

    pub fn weights(&self) -> &WeightsBundle {
        &self.weights
    }

    /// WF probability for the episode so far.
    pub fn predict(&self, episode: &EpisodeBuffer) -> Result<f64> {
        let window = episode.stack(self.config().t_seq)?;
        vit_forward(&window, &self.weights)
    }
}
