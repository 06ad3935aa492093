//! Scenario files: world, robots, parameters and seed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{KinematicsConfig, RobotState};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::potential::PotentialParams;
use crate::switch_rs::RSParams;
use crate::world::{ScanConfig, WorldModel};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "apf")]
    Apf,
    #[serde(rename = "apf-rs")]
    ApfRs,
    #[serde(rename = "apf-ls")]
    ApfLs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Apf => "apf",
            Method::ApfRs => "apf-rs",
            Method::ApfLs => "apf-ls",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apf" => Ok(Method::Apf),
            "apf-rs" => Ok(Method::ApfRs),
            "apf-ls" => Ok(Method::ApfLs),
            other => Err(Error::config(format!("unknown method {other:?} (apf, apf-rs, apf-ls)"))),
        }
    }
}

/// Force law of the plain `apf` method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApfForce {
    /// Fixed-magnitude attraction blended by ω (the switch-free limit of the
    /// proposed controller).
    #[default]
    Normalized,
    /// γ·attraction + σ·repulsion.
    Weighted,
}

/// Every tunable of a run. Unset optional fields take defaults derived from
/// the sensor and body geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    #[serde(rename = "M")]
    pub ray_count: usize,
    pub max_range: f64,
    pub radius: f64,
    pub omega: f64,
    pub gamma: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_thr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_upd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_rcv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_hp: Option<f64>,
    pub n_revisit: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_mline: Option<f64>,
    pub kinematics: KinematicsConfig,
    /// Step limit T.
    pub step_limit: u64,
    pub method: Method,
    pub apf_force: ApfForce,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    /// Standard deviation of additive range noise, meters (0 = noiseless).
    pub range_noise_std: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            ray_count: 100,
            max_range: 10.0,
            radius: 0.17,
            omega: crate::potential::DEFAULT_OMEGA,
            gamma: 1.0,
            sigma: 1.0,
            f_thr: None,
            theta_upd: None,
            theta_rcv: None,
            eps_hp: None,
            n_revisit: 1,
            eps_mline: None,
            kinematics: KinematicsConfig::default(),
            step_limit: 1500,
            method: Method::ApfRs,
            apf_force: ApfForce::Normalized,
            weights: None,
            range_noise_std: 0.0,
        }
    }
}

impl Params {
    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig { ray_count: self.ray_count, max_range: self.max_range }
    }

    pub fn potential(&self) -> PotentialParams {
        PotentialParams {
            omega: self.omega,
            gamma: self.gamma,
            sigma: self.sigma,
            max_range: self.max_range,
            f_thr: self.f_thr.unwrap_or(0.5 * self.max_range),
        }
    }

    pub fn rs(&self) -> RSParams {
        let d = RSParams::defaults(self.ray_count, self.max_range, self.radius);
        let theta_upd = self.theta_upd.unwrap_or(d.theta_upd);
        RSParams {
            theta_upd,
            theta_rcv: self.theta_rcv.unwrap_or(0.5 * theta_upd),
            f_thr: self.potential().f_thr,
            eps_hp: self.eps_hp.unwrap_or(d.eps_hp),
            n_revisit: self.n_revisit,
            eps_mline: self.eps_mline.unwrap_or(d.eps_mline),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scan_config().validate()?;
        self.potential().validate()?;
        self.rs().validate()?;
        self.kinematics.validate()?;
        if !(self.radius > 0.0) {
            return Err(Error::config("radius must be positive"));
        }
        if self.step_limit < 1 {
            return Err(Error::config("step_limit must be at least 1"));
        }
        if self.kinematics.v_max * self.kinematics.dt >= self.radius {
            return Err(Error::config("v_max·dt must stay below the robot radius"));
        }
        if !(self.range_noise_std >= 0.0) {
            return Err(Error::config("range_noise_std must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub start: RobotState,
    pub goal: Vec2,
}

/// The unit of reproducibility: identical specs give identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub version: u32,
    pub world: WorldModel,
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub params: Params,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(world: WorldModel, robots: Vec<RobotSpec>, params: Params, seed: u64) -> Self {
        Self { version: SCENARIO_VERSION, world, robots, params, seed }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.params.method = method;
        self
    }

    /// Full validation, including the weights file requirement of `apf-ls`.
    pub fn validate(&self) -> Result<()> {
        self.validate_layout()?;
        if self.params.method == Method::ApfLs && self.params.weights.is_none() {
            return Err(Error::config("method apf-ls needs a weights file"));
        }
        Ok(())
    }

    /// Parameters and placement only.
    pub fn validate_layout(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::config(format!("unsupported scenario version {}", self.version)));
        }
        self.params.validate()?;
        if self.robots.is_empty() {
            return Err(Error::config("scenario has no robots"));
        }
        let r = self.params.radius;
        let bounds = self.world.bounds();
        for (i, rb) in self.robots.iter().enumerate() {
            for (what, p) in [("start", rb.start.position()), ("goal", rb.goal)] {
                if !bounds.contains(p) {
                    return Err(Error::config(format!("robot {i} {what} outside bounds")));
                }
                if self.world.obstacle_distance(p) < r {
                    return Err(Error::config(format!("robot {i} {what} overlaps an obstacle")));
                }
            }
        }
        for i in 0..self.robots.len() {
            for j in (i + 1)..self.robots.len() {
                let (a, b) = (&self.robots[i], &self.robots[j]);
                if a.start.position().distance(b.start.position()) <= 2.0 * r {
                    return Err(Error::config(format!("robots {i} and {j} start overlapping")));
                }
                if a.goal.distance(b.goal) <= 2.0 * r {
                    return Err(Error::config(format!("robots {i} and {j} have overlapping goals")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// SHA-256 over the compact JSON encoding, hex.
    pub fn content_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(format!("{:x}", Sha256::digest(&bytes)))
    }
}
