//! Run configuration read from TOML. Keys mirror the usual parameter names
//! (`f_c`, `B_sys`, `Qbar_T`, ...); a named profile supplies defaults that
//! the file overrides key by key.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::ArrayConfig;
use crate::harness::{
    CalibrationPlan, OnlinePlan, OrientationMode, ScatterModel, ScattererMode, Scenario, TrainingParams,
    TrajectorySpec,
};
use crate::SPEED_OF_LIGHT;

pub const REQUIRED_KEYS: [&str; 20] = [
    "f_c", "B_sys", "K", "L", "Q_T", "Qbar_T", "Q_R", "Qbar_R", "delta", "Delta", "M_T", "M_R", "R_offline",
    "E_offline", "R_online", "E_online", "v", "d_boundary", "phase_bits", "seed",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Small arrays and trial counts; runs in minutes.
    Desk,
    /// Full parameter set of the reference simulation.
    Table1,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "table1" => Ok(Profile::Table1),
            _ => Err(Error::InvalidConfig(format!("unknown profile {s:?} (expected desk or table1)"))),
        }
    }
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Table1 => "table1",
        }
    }

    /// The profile as a TOML document.
    pub fn toml(self) -> String {
        let common = format!(
            "f_c = 0.3e12\nB_sys = 10e9\nL = 3\nQ_T = 4\nQ_R = 4\nQbar_R = 16\ndelta = {}\n\
             Delta = \"contiguous\"\nM_R = 16\nv = 1.0\nd_boundary = 10.0\nphase_bits = 2\nseed = 1\n",
            SPEED_OF_LIGHT / 0.3e12 / 2.0
        );
        let specific = match self {
            Profile::Desk => {
                "K = 4\nQbar_T = 64\nM_T = 16\nR_offline = 5\nE_offline = 20\nR_online = 5\nE_online = 10\n\
                 step_scale = 500.0\n"
            }
            Profile::Table1 => {
                "K = 16\nQbar_T = 256\nM_T = 64\nR_offline = 31\nE_offline = 100\nR_online = 31\nE_online = 30\n\
                 step_scale = 1.0\n"
            }
        };
        common + specific
    }
}

/// Subarray spacing: one value for both arrays, a `[Tx, Rx]` pair, or
/// `"contiguous"` for `Δ = Q̄ δ` on each side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SaSpacing {
    Both(f64),
    Pair([f64; 2]),
    Named(String),
}

impl SaSpacing {
    fn resolve(&self, qbar_t: usize, qbar_r: usize, delta: f64) -> Result<[f64; 2]> {
        match self {
            SaSpacing::Both(d) => Ok([*d, *d]),
            SaSpacing::Pair(p) => Ok(*p),
            SaSpacing::Named(s) if s == "contiguous" => Ok([qbar_t as f64 * delta, qbar_r as f64 * delta]),
            SaSpacing::Named(s) => Err(Error::InvalidConfig(format!("Delta = {s:?} is not understood"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationSampling {
    #[default]
    PerTrajectory,
    PerStep,
}

fn default_p_t() -> f64 {
    1.0
}
fn default_snr() -> Vec<f64> {
    vec![-10.0, 0.0, 10.0]
}
fn default_sweep_snr() -> Vec<f64> {
    vec![10.0, 20.0, 30.0]
}
fn default_distances() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]
}
fn default_d_start() -> f64 {
    2.0
}
fn default_d_end() -> f64 {
    50.0
}
fn default_step_scale() -> f64 {
    1.0
}
fn default_window() -> usize {
    4
}
fn default_smoothing() -> f64 {
    1.0
}
fn default_hmm_trajectories() -> usize {
    50
}
fn default_max_orientation() -> f64 {
    30.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub f_c: f64,
    #[serde(rename = "B_sys")]
    pub b_sys: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Q_T")]
    pub q_t: usize,
    #[serde(rename = "Qbar_T")]
    pub qbar_t: usize,
    #[serde(rename = "Q_R")]
    pub q_r: usize,
    #[serde(rename = "Qbar_R")]
    pub qbar_r: usize,
    pub delta: f64,
    #[serde(rename = "Delta")]
    pub sa_spacing: SaSpacing,
    #[serde(rename = "M_T")]
    pub m_t: usize,
    #[serde(rename = "M_R")]
    pub m_r: usize,
    #[serde(rename = "R_offline")]
    pub r_offline: usize,
    #[serde(rename = "E_offline")]
    pub e_offline: usize,
    #[serde(rename = "R_online")]
    pub r_online: usize,
    #[serde(rename = "E_online")]
    pub e_online: usize,
    pub v: f64,
    pub d_boundary: f64,
    pub phase_bits: u32,
    pub seed: u64,

    #[serde(default = "default_p_t")]
    pub p_t: f64,
    /// SNRs calibrated and run online, dB.
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_sweep_snr")]
    pub sweep_snr_db: Vec<f64>,
    #[serde(default = "default_distances")]
    pub offline_distances: Vec<f64>,
    #[serde(default = "default_distances")]
    pub sweep_distances: Vec<f64>,
    #[serde(default = "default_d_start")]
    pub d_start: f64,
    #[serde(default = "default_d_end")]
    pub d_end: f64,
    /// Decision interval in coherence times.
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    #[serde(rename = "U", default = "default_window")]
    pub window: usize,
    /// Defaults to `U − 1`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    #[serde(default = "default_hmm_trajectories")]
    pub hmm_trajectories: usize,
    #[serde(default = "default_max_orientation")]
    pub max_orientation_deg: f64,
    #[serde(default)]
    pub orientation_sampling: OrientationSampling,
    #[serde(default)]
    pub scatterer_mode: ScattererMode,
    #[serde(default)]
    pub scatter: ScatterModel,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn profile(profile: Profile) -> Self {
        Self::from_toml_str("", Some(profile)).expect("built-in profiles are complete")
    }

    /// Parses `text`, layered over `profile` when given.
    pub fn from_toml_str(text: &str, profile: Option<Profile>) -> Result<Self> {
        Self::parse(text, profile, Path::new("<inline>"))
    }

    pub fn load(path: &Path, profile: Option<Profile>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, profile, path)
    }

    fn parse(text: &str, profile: Option<Profile>, path: &Path) -> Result<Self> {
        let file: toml::Table =
            toml::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
        let mut table = match profile {
            Some(p) => toml::from_str(&p.toml()).expect("profile TOML is valid"),
            None => toml::Table::new(),
        };
        merge(&mut table, file);
        if let Some(key) = REQUIRED_KEYS.iter().find(|k| !table.contains_key(**k)) {
            return Err(Error::InvalidConfig(format!("missing required key `{key}` in {}", path.display())));
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("{}: {}", path.display(), e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?.validate()?;
        let positive = [
            ("R_offline", self.r_offline),
            ("E_offline", self.e_offline),
            ("R_online", self.r_online),
            ("E_online", self.e_online),
            ("U", self.window),
            ("hmm_trajectories", self.hmm_trajectories),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("`{k}` must be positive")));
        }
        if !(self.d_boundary > 0.0) {
            return Err(Error::InvalidConfig("`d_boundary` must be positive".into()));
        }
        if !(self.smoothing >= 0.0) {
            return Err(Error::InvalidConfig("`smoothing` must be non-negative".into()));
        }
        if self.snr_db.iter().chain(&self.sweep_snr_db).any(|s| s.is_nan()) {
            return Err(Error::InvalidConfig("SNR values must not be NaN".into()));
        }
        self.trajectory()?.validate()
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig::new(self.f_c, self.b_sys, self.k, self.l)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let [dt, dr] = self.sa_spacing.resolve(self.qbar_t, self.qbar_r, self.delta)?;
        let mut tx = ArrayConfig::contiguous(self.q_t, self.qbar_t, self.delta);
        tx.sa_spacing = dt;
        let mut rx = ArrayConfig::contiguous(self.q_r, self.qbar_r, self.delta);
        rx.sa_spacing = dr;
        Ok(Scenario {
            system: self.system(),
            tx,
            rx,
            training: TrainingParams {
                tx_beams: self.m_t,
                rx_beams: self.m_r,
                phase_bits: self.phase_bits,
                p_t: self.p_t,
            },
            scatter: self.scatter,
            max_orientation_deg: self.max_orientation_deg,
        })
    }

    pub fn trajectory(&self) -> Result<TrajectorySpec> {
        let orientation = match self.orientation_sampling {
            OrientationSampling::PerTrajectory => OrientationMode::Fixed(0.0),
            OrientationSampling::PerStep => OrientationMode::PerStep,
        };
        Ok(TrajectorySpec::at_coherence(self.v, self.d_start, self.d_end, self.f_c, self.step_scale)?
            .with_orientation(orientation)
            .with_scatterers(self.scatterer_mode))
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.window.saturating_sub(1))
    }

    pub fn calibration_plan(&self) -> Result<CalibrationPlan> {
        Ok(CalibrationPlan {
            distances: self.offline_distances.clone(),
            orientations: self.r_offline,
            trials: self.e_offline,
            snr_list: self.snr_db.clone(),
            d_boundary: self.d_boundary,
            trajectory: self.trajectory()?,
            hmm_trajectories: self.hmm_trajectories,
            smoothing: self.smoothing,
        })
    }

    pub fn online_plan(&self) -> Result<OnlinePlan> {
        Ok(OnlinePlan {
            trajectory: self.trajectory()?,
            window: self.window,
            snr_list: self.snr_db.clone(),
            orientations: self.r_online,
            trials: self.e_online,
            burn_in: self.burn_in(),
        })
    }
}
