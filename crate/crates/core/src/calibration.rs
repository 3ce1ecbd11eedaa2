//! Offline phase: η sweeps over distance and orientation, threshold fitting
//! by balanced accuracy, and HMM parameter estimation by counting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{quantile, Scenario};
use crate::hmm::HmmModel;
use crate::metric::{decide, Observation, Region};
use crate::rng::{derive_seed, stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineSample {
    #[serde(rename = "distance_m")]
    pub distance: f64,
    pub orientation_deg: f64,
    pub trial: u64,
    pub snr_db: f64,
    pub eta: f64,
}

/// η quantiles of the samples at one distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub distance_m: f64,
    pub count: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    /// Fraction of samples the fitted rule labels `swm`.
    pub swm_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    /// SNR the samples were taken at, when they all share one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub gamma: f64,
    pub d_boundary: f64,
    pub balanced_accuracy: f64,
    /// Set when the best rule is no better than chance, i.e. near-field
    /// samples do not sit above far-field ones.
    pub inverted: bool,
    #[serde(default)]
    pub summary: Vec<DistanceSummary>,
}

impl ThresholdModel {
    pub fn decide(&self, eta: f64) -> Observation {
        decide(eta, self.gamma)
    }

    /// Ground-truth region for a distance.
    pub fn region_of(&self, distance: f64) -> Region {
        region_of(distance, self.d_boundary)
    }

    /// Balanced accuracy of this threshold on another sample set.
    pub fn evaluate(&self, samples: &[OfflineSample]) -> Result<f64> {
        balanced_accuracy(samples, self.gamma, self.d_boundary)
    }
}

pub fn region_of(distance: f64, d_boundary: f64) -> Region {
    if distance < d_boundary {
        Region::Near
    } else {
        Region::Far
    }
}

/// Collects `|distances| · R · E` η samples. Orientation `r` at distance
/// `i` is `β ~ U[−β_max, β_max]` about Y; each trial draws fresh
/// scatterers, gains, codebooks and noise.
pub fn sweep_offline(
    scenario: &Scenario,
    distances: &[f64],
    orientations: usize,
    trials: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<OfflineSample>> {
    if distances.is_empty() {
        return Err(Error::InvalidConfig("offline distance grid is empty".into()));
    }
    if orientations == 0 || trials == 0 {
        return Err(Error::InvalidConfig(format!(
            "offline sweep needs R ≥ 1 and E ≥ 1 (got {orientations}, {trials})"
        )));
    }
    if let Some(d) = distances.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidConfig(format!("distance {d} is not positive")));
    }
    scenario.validate()?;
    let tx = scenario.tx_positions()?;

    let cells: Vec<(usize, usize, usize)> = (0..distances.len())
        .flat_map(|i| (0..orientations).flat_map(move |r| (0..trials).map(move |e| (i, r, e))))
        .collect();
    cells
        .into_par_iter()
        .map(|(i, r, e)| {
            let d = distances[i];
            let beta = scenario.draw_orientation(&mut stream(seed, Purpose::Orientation, &[i as u64, r as u64]));
            let coords = [i as u64, r as u64, e as u64];
            let mut rng = stream(seed, Purpose::Realization, &coords);
            let layout = scenario.scatter.draw_layout(scenario.system.num_paths, &mut rng);
            let paths = scenario.scatter.paths(&layout, d, &mut rng)?;
            let (z, c) = scenario.draw_codebooks(&mut rng)?;
            let eta = scenario.eta(
                &tx,
                d,
                beta,
                &paths,
                &z,
                &c,
                snr_db,
                derive_seed(seed, Purpose::Noise, &coords),
            )?;
            Ok(OfflineSample { distance: d, orientation_deg: beta, trial: e as u64, snr_db, eta })
        })
        .collect()
}

fn balanced_accuracy(samples: &[OfflineSample], gamma: f64, d_boundary: f64) -> Result<f64> {
    let (mut near, mut near_hit, mut far, mut far_hit) = (0usize, 0usize, 0usize, 0usize);
    for s in samples {
        let swm = decide(s.eta, gamma) == Observation::Swm;
        match region_of(s.distance, d_boundary) {
            Region::Near => {
                near += 1;
                near_hit += swm as usize;
            }
            Region::Far => {
                far += 1;
                far_hit += !swm as usize;
            }
        }
    }
    if near == 0 || far == 0 {
        return Err(Error::Calibration(format!(
            "samples hold {near} near and {far} far entries for boundary {d_boundary} m"
        )));
    }
    Ok(0.5 * (near_hit as f64 / near as f64 + far_hit as f64 / far as f64))
}

/// Chooses γ among midpoints of consecutive distinct sorted η values to
/// maximize balanced accuracy of the rule `swm iff η ≥ γ`; the smallest
/// maximizer wins.
pub fn fit_threshold(samples: &[OfflineSample], d_boundary: f64) -> Result<ThresholdModel> {
    if !(d_boundary > 0.0) {
        return Err(Error::InvalidConfig(format!("d_boundary {d_boundary} must be positive")));
    }
    if let Some(s) = samples.iter().find(|s| !(s.eta >= 0.0) || !s.eta.is_finite()) {
        return Err(Error::Calibration(format!("sample η {} is not a finite non-negative value", s.eta)));
    }
    let mut sorted: Vec<(f64, bool)> =
        samples.iter().map(|s| (s.eta, region_of(s.distance, d_boundary) == Region::Near)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let near_total = sorted.iter().filter(|s| s.1).count();
    let far_total = sorted.len() - near_total;
    if near_total == 0 || far_total == 0 {
        return Err(Error::Calibration(format!(
            "threshold fit needs samples on both sides of {d_boundary} m \
             ({near_total} near, {far_total} far)"
        )));
    }

    // Sweep γ upward: everything below the candidate is labeled hspwm.
    let (mut near_below, mut far_below) = (0usize, 0usize);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..sorted.len() - 1 {
        if sorted[i].1 {
            near_below += 1;
        } else {
            far_below += 1;
        }
        if sorted[i + 1].0 == sorted[i].0 {
            continue;
        }
        let gamma = 0.5 * (sorted[i].0 + sorted[i + 1].0);
        let tpr = (near_total - near_below) as f64 / near_total as f64;
        let tnr = far_below as f64 / far_total as f64;
        let ba = 0.5 * (tpr + tnr);
        if best.is_none_or(|(_, b)| ba > b) {
            best = Some((gamma, ba));
        }
    }
    let (gamma, ba) = best.unwrap_or((sorted[0].0, 0.5));

    let snr = samples[0].snr_db;
    let snr_db = samples.iter().all(|s| s.snr_db == snr).then_some(snr);
    Ok(ThresholdModel {
        snr_db,
        gamma,
        d_boundary,
        balanced_accuracy: ba,
        inverted: ba <= 0.5,
        summary: summarize(samples, gamma),
    })
}

/// Per-distance η quantiles, ascending in distance.
pub fn summarize(samples: &[OfflineSample], gamma: f64) -> Vec<DistanceSummary> {
    let mut distances: Vec<f64> = samples.iter().map(|s| s.distance).collect();
    distances.sort_by(f64::total_cmp);
    distances.dedup();
    distances
        .into_iter()
        .map(|d| {
            let mut etas: Vec<f64> = samples.iter().filter(|s| s.distance == d).map(|s| s.eta).collect();
            etas.sort_by(f64::total_cmp);
            let swm = etas.iter().filter(|&&e| e >= gamma).count();
            DistanceSummary {
                distance_m: d,
                count: etas.len(),
                q10: quantile(&etas, 0.1),
                q50: quantile(&etas, 0.5),
                q90: quantile(&etas, 0.9),
                swm_rate: swm as f64 / etas.len() as f64,
            }
        })
        .collect()
}

/// HMM estimated for one operating SNR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedHmm {
    pub snr_db: f64,
    #[serde(flatten)]
    pub model: HmmModel,
}

/// One trajectory's ground-truth regions paired with the observed decisions.
pub type LabeledSequence = Vec<(Region, Observation)>;

fn normalize(counts: [f64; 2], smoothing: f64) -> [f64; 2] {
    let c = counts.map(|x| x + smoothing);
    let total = c[0] + c[1];
    if total > 0.0 {
        [c[0] / total, c[1] / total]
    } else {
        [0.5, 0.5]
    }
}

/// Counting estimate of `(A, B, π)` with additive smoothing; a row without
/// any counts falls back to uniform.
pub fn estimate_hmm_params(sequences: &[LabeledSequence], smoothing: f64) -> Result<HmmModel> {
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(Error::InvalidInput(format!("smoothing {smoothing} must be non-negative")));
    }
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(Error::Calibration("no labeled sequences to estimate the HMM from".into()));
    }
    let mut a = [[0.0; 2]; 2];
    let mut b = [[0.0; 2]; 2];
    let mut pi = [0.0; 2];
    for seq in sequences.iter().filter(|s| !s.is_empty()) {
        pi[seq[0].0.index()] += 1.0;
        for &(state, obs) in seq {
            b[state.index()][obs.index()] += 1.0;
        }
        for w in seq.windows(2) {
            a[w[0].0.index()][w[1].0.index()] += 1.0;
        }
    }
    let model = HmmModel::new(
        a.map(|row| normalize(row, smoothing)),
        b.map(|row| normalize(row, smoothing)),
        normalize(pi, smoothing),
    )?;
    Ok(model.with_smoothing(smoothing))
}
