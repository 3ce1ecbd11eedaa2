//! Cross-field selection metric and threshold rule.
//!
//! For every Rx subarray the training observations of all subcarriers are
//! stacked, reduced to entrywise magnitudes and normalized to unit length.
//! The metric η is the largest squared Euclidean distance between any two
//! such profiles; near-field links show strongly subarray-dependent
//! profiles, far-field links nearly identical ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::MeasurementSet;

/// Per-snapshot decision of the threshold rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    Swm,
    Hspwm,
}

impl Observation {
    pub const ALL: [Observation; 2] = [Observation::Swm, Observation::Hspwm];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The region this observation votes for.
    pub fn region(self) -> Region {
        match self {
            Observation::Swm => Region::Near,
            Observation::Hspwm => Region::Far,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Observation::Swm => "swm",
            Observation::Hspwm => "hspwm",
        }
    }
}

/// Hidden propagation region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Near,
    Far,
}

impl Region {
    pub const ALL: [Region; 2] = [Region::Near, Region::Far];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Region {
        if i == 0 {
            Region::Near
        } else {
            Region::Far
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Near => "near",
            Region::Far => "far",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub eta: f64,
    pub omega: Observation,
    pub threshold_used: f64,
}

impl SelectionDecision {
    pub fn new(eta: f64, gamma: f64) -> Self {
        Self { eta, omega: decide(eta, gamma), threshold_used: gamma }
    }
}

/// Normalized magnitude profile of Rx subarray `q_r` over all subcarriers,
/// length `K · M_R · M_T`. Each block is vectorized column by column.
pub fn stack_and_normalize(ms: &MeasurementSet, q_r: usize) -> Result<Vec<f64>> {
    if q_r >= ms.num_rx_sas() {
        return Err(Error::InvalidInput(format!(
            "Rx subarray {q_r} out of range ({})",
            ms.num_rx_sas()
        )));
    }
    let mut v = Vec::with_capacity(ms.num_subcarriers() * ms.block_dim().0 * ms.block_dim().1);
    for k in 0..ms.num_subcarriers() {
        let b = ms.block(q_r, k);
        for col in b.columns() {
            v.extend(col.iter().map(|z| z.norm()));
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Degenerate(format!(
            "measurements of Rx subarray {q_r} have norm {norm}"
        )));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// η: maximum over Rx subarray pairs of the squared profile distance.
pub fn compute_eta(ms: &MeasurementSet) -> Result<f64> {
    let q = ms.num_rx_sas();
    if q < 2 {
        return Err(Error::InvalidConfig(
            "the selection metric needs at least two Rx subarrays".into(),
        ));
    }
    let profiles = (0..q).map(|r| stack_and_normalize(ms, r)).collect::<Result<Vec<_>>>()?;
    let mut eta: f64 = 0.0;
    for r in 0..q {
        for c in r + 1..q {
            eta = eta.max(squared_distance(&profiles[r], &profiles[c]));
        }
    }
    Ok(eta)
}

/// Threshold rule: `swm` iff `η ≥ γ`.
pub fn decide(eta: f64, gamma: f64) -> Observation {
    if eta >= gamma {
        Observation::Swm
    } else {
        Observation::Hspwm
    }
}
