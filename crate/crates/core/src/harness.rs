//! Monte-Carlo experiments: η-vs-distance sweeps, moving-user trajectories
//! with per-interval decisions, success-rate aggregation, and the complete
//! offline calibration pipeline.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    estimate_hmm_params, fit_threshold, region_of, sweep_offline, CalibratedHmm, LabeledSequence,
    OfflineSample, ThresholdModel,
};
use crate::channel::{gen_reference_channel, ChannelModel, SystemConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_array, AePositions, ArrayConfig, PathSet, PathSpec, Vec3};
use crate::hmm::{decide_region, DecisionMethod, HmmModel, ObservationWindow};
use crate::metric::{compute_eta, Observation, Region};
use crate::rng::{derive_seed, stream, Purpose};
use crate::training::{noise_power_for_snr, run_beam_training, Codebook, MeasurementSet};
use crate::SPEED_OF_LIGHT;

/// `T_coh = sqrt(9 / (16π)) / f_dmax` with `f_dmax = v f_c / c0`.
pub fn coherence_time(v: f64, f_c: f64) -> Result<f64> {
    if !(v > 0.0) || !(f_c > 0.0) || !v.is_finite() || !f_c.is_finite() {
        return Err(Error::Domain(format!("coherence time needs v, f_c > 0 (got {v}, {f_c})")));
    }
    let f_dmax = v * f_c / SPEED_OF_LIGHT;
    Ok((9.0 / (16.0 * PI)).sqrt() / f_dmax)
}

/// Linear-interpolation quantile of an ascending slice; NaN when empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    /// `M_T`, beams swept on the reference Tx subarray.
    pub tx_beams: usize,
    /// `M_R`, combiners shared by all Rx subarrays.
    pub rx_beams: usize,
    pub phase_bits: u32,
    /// Training transmit power `p_t`.
    pub p_t: f64,
}

/// Placement and strength of the reflected paths.
///
/// Scatterers sit at `x ∈ x_range · d` along the link and within a lateral
/// half-width of `min(lateral_fraction · d, lateral_cap_m)` in y and z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterModel {
    pub x_range: [f64; 2],
    pub lateral_fraction: f64,
    #[serde(default)]
    pub lateral_cap_m: Option<f64>,
    /// Bounds of the uniform reflection magnitude `|Γ|`.
    pub reflection_range: [f64; 2],
}

impl Default for ScatterModel {
    fn default() -> Self {
        Self {
            x_range: [0.2, 0.8],
            lateral_fraction: 0.25,
            lateral_cap_m: Some(0.5),
            reflection_range: [0.02, 0.1],
        }
    }
}

/// Scatterer positions in link-normalized coordinates, reusable at any
/// distance.
#[derive(Clone, Debug, PartialEq)]
pub struct ScattererLayout(Vec<[f64; 3]>);

impl ScattererLayout {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl ScatterModel {
    pub fn validate(&self) -> Result<()> {
        let [x0, x1] = self.x_range;
        let [g0, g1] = self.reflection_range;
        let ok = x0 > 0.0
            && x0 <= x1
            && x1 < 1.0
            && self.lateral_fraction >= 0.0
            && self.lateral_cap_m.is_none_or(|c| c >= 0.0)
            && g0 >= 0.0
            && g0 <= g1
            && g1 <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid scatter model {self:?}")))
        }
    }

    /// Draws the `num_paths − 1` reflected-path scatterers.
    pub fn draw_layout<R: Rng + ?Sized>(&self, num_paths: usize, rng: &mut R) -> ScattererLayout {
        let [x0, x1] = self.x_range;
        ScattererLayout(
            (1..num_paths)
                .map(|_| [rng.random_range(x0..=x1), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
                .collect(),
        )
    }

    pub fn scatterer(&self, u: [f64; 3], d: f64) -> Vec3 {
        let half = self.lateral_cap_m.map_or(self.lateral_fraction * d, |c| (self.lateral_fraction * d).min(c));
        Vec3::new(u[0] * d, u[1] * half, u[2] * half)
    }

    /// LoS plus one reflection per layout entry, with fresh gains
    /// `|Γ| ~ U[reflection_range]`, `arg Γ ~ U[0, 2π)`.
    pub fn paths<R: Rng + ?Sized>(&self, layout: &ScattererLayout, d: f64, rng: &mut R) -> Result<PathSet> {
        let [g0, g1] = self.reflection_range;
        let mut paths = vec![PathSpec::LineOfSight];
        for &u in &layout.0 {
            let mag = rng.random_range(g0..=g1);
            let phase = rng.random_range(0.0..2.0 * PI);
            paths.push(PathSpec::Reflected {
                scatterer: self.scatterer(u, d),
                reflection: Complex64::from_polar(mag, phase),
            });
        }
        PathSet::new(paths)
    }
}

/// Everything fixed about a link apart from distance, orientation and the
/// random draws: system, arrays, training and scatterer statistics. The Tx
/// stays where its config puts it; the Rx is re-centered at `(d, 0, 0)` and
/// rotated about Y for every snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub tx: ArrayConfig,
    pub rx: ArrayConfig,
    pub training: TrainingParams,
    #[serde(default)]
    pub scatter: ScatterModel,
    /// Orientations are drawn from `U[−max, max]` degrees.
    pub max_orientation_deg: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.tx.validate()?;
        self.rx.validate()?;
        self.scatter.validate()?;
        if self.rx.num_sas < 2 {
            return Err(Error::InvalidConfig("the Rx needs at least two subarrays".into()));
        }
        let t = &self.training;
        if t.tx_beams == 0 || t.rx_beams == 0 {
            return Err(Error::InvalidConfig("M_T and M_R must be positive".into()));
        }
        if !(t.p_t > 0.0) {
            return Err(Error::InvalidConfig(format!("p_t {} must be positive", t.p_t)));
        }
        if !(self.max_orientation_deg >= 0.0) {
            return Err(Error::InvalidConfig("orientation range must be non-negative".into()));
        }
        Ok(())
    }

    pub fn tx_positions(&self) -> Result<AePositions> {
        build_array(&self.tx)
    }

    pub fn rx_config_at(&self, d: f64, orientation_deg: f64) -> ArrayConfig {
        self.rx.clone().with_center(Vec3::new(d, 0.0, 0.0)).with_euler_deg([0.0, orientation_deg, 0.0])
    }

    pub fn draw_orientation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = self.max_orientation_deg;
        if m == 0.0 {
            0.0
        } else {
            rng.random_range(-m..=m)
        }
    }

    /// Tx beams `Z` then Rx combiners `C`.
    pub fn draw_codebooks<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Codebook, Codebook)> {
        let t = &self.training;
        let z = Codebook::random(self.tx.aes_per_sa, t.tx_beams, t.phase_bits, rng)?;
        let c = Codebook::random(self.rx.aes_per_sa, t.rx_beams, t.phase_bits, rng)?;
        Ok((z, c))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn measure(
        &self,
        tx: &AePositions,
        d: f64,
        orientation_deg: f64,
        paths: &PathSet,
        z: &Codebook,
        c: &Codebook,
        snr_db: f64,
        noise_seed: u64,
    ) -> Result<MeasurementSet> {
        let rx = build_array(&self.rx_config_at(d, orientation_deg))?;
        let h = gen_reference_channel(&self.system, tx, &rx, paths, ChannelModel::Swm)?;
        let p_t = self.training.p_t;
        let sigma = noise_power_for_snr(&h, p_t, snr_db)?;
        run_beam_training(&h, z, c, p_t, sigma, noise_seed)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn eta(
        &self,
        tx: &AePositions,
        d: f64,
        orientation_deg: f64,
        paths: &PathSet,
        z: &Codebook,
        c: &Codebook,
        snr_db: f64,
        noise_seed: u64,
    ) -> Result<f64> {
        compute_eta(&self.measure(tx, d, orientation_deg, paths, z, c, snr_db, noise_seed)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSweepRow {
    pub distance_m: f64,
    pub snr_db: f64,
    pub q50_eta: f64,
    pub q10_eta: f64,
    pub q90_eta: f64,
}

/// η quantiles per `(snr, distance)` cell, SNR-major. Every SNR reuses the
/// same channel, codebook and noise draws.
pub fn run_metric_sweep(
    scenario: &Scenario,
    distances: &[f64],
    snr_list: &[f64],
    orientations: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<MetricSweepRow>> {
    if snr_list.is_empty() {
        return Err(Error::InvalidConfig("SNR list is empty".into()));
    }
    let mut rows = Vec::with_capacity(distances.len() * snr_list.len());
    for &snr in snr_list {
        let samples = sweep_offline(scenario, distances, orientations, trials, snr, seed)?;
        let per = orientations * trials;
        for (i, &d) in distances.iter().enumerate() {
            let mut etas: Vec<f64> = samples[i * per..(i + 1) * per].iter().map(|s| s.eta).collect();
            etas.sort_by(f64::total_cmp);
            rows.push(MetricSweepRow {
                distance_m: d,
                snr_db: snr,
                q50_eta: quantile(&etas, 0.5),
                q10_eta: quantile(&etas, 0.1),
                q90_eta: quantile(&etas, 0.9),
            });
        }
    }
    Ok(rows)
}

/// Array variations for η-vs-distance comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "panel", content = "value")]
pub enum PanelVariant {
    /// Split a fixed number of Rx elements into this many subarrays.
    RxSplit(usize),
    /// Use this many elements per Tx subarray at a fixed Tx element count.
    TxSubarraySize(usize),
    /// This many Rx subarrays of unchanged size.
    RxAperture(usize),
    /// This many Tx subarrays of unchanged size.
    TxAperture(usize),
}

fn resize(base: &ArrayConfig, num_sas: usize, aes_per_sa: usize) -> ArrayConfig {
    ArrayConfig::contiguous(num_sas, aes_per_sa, base.ae_spacing)
        .with_center(base.center)
        .with_euler_deg(base.euler_deg)
}

impl PanelVariant {
    pub fn letter(self) -> char {
        match self {
            PanelVariant::RxSplit(_) => 'a',
            PanelVariant::TxSubarraySize(_) => 'b',
            PanelVariant::RxAperture(_) => 'c',
            PanelVariant::TxAperture(_) => 'd',
        }
    }

    pub fn from_letter(letter: &str, value: usize) -> Result<Self> {
        Ok(match letter {
            "a" => PanelVariant::RxSplit(value),
            "b" => PanelVariant::TxSubarraySize(value),
            "c" => PanelVariant::RxAperture(value),
            "d" => PanelVariant::TxAperture(value),
            _ => return Err(Error::InvalidConfig(format!("unknown panel {letter:?}"))),
        })
    }

    /// Applies the variation to `base`, keeping training beams at
    /// `M_T = Q̄_T / 4` and `M_R = Q̄_R`.
    pub fn apply(self, base: &Scenario) -> Result<Scenario> {
        let mut s = base.clone();
        let split = |total: usize, parts: usize, what: &str| {
            if parts == 0 || !total.is_multiple_of(parts) {
                Err(Error::InvalidConfig(format!("{total} {what} elements do not split into {parts}")))
            } else {
                Ok(total / parts)
            }
        };
        match self {
            PanelVariant::RxSplit(q) => {
                let per = split(base.rx.num_elements(), q, "Rx")?;
                s.rx = resize(&base.rx, q, per);
            }
            PanelVariant::TxSubarraySize(per) => {
                let q = split(base.tx.num_elements(), per, "Tx")?;
                s.tx = resize(&base.tx, q, per);
            }
            PanelVariant::RxAperture(q) => s.rx = resize(&base.rx, q, base.rx.aes_per_sa),
            PanelVariant::TxAperture(q) => s.tx = resize(&base.tx, q, base.tx.aes_per_sa),
        }
        s.training.tx_beams = (s.tx.aes_per_sa / 4).max(1);
        s.training.rx_beams = s.rx.aes_per_sa;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationMode {
    /// One Y-axis rotation for the whole trajectory, degrees.
    Fixed(f64),
    /// A fresh rotation at every step.
    PerStep,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScattererMode {
    /// Scatterer layout fixed per trajectory; gains and noise redraw per step.
    #[default]
    Persist,
    /// Everything redraws per step.
    Redraw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub v: f64,
    pub d_start: f64,
    pub d_end: f64,
    /// Seconds between beam-training snapshots.
    pub decision_interval: f64,
    pub orientation: OrientationMode,
    pub scatterers: ScattererMode,
}

impl TrajectorySpec {
    pub fn new(v: f64, d_start: f64, d_end: f64, decision_interval: f64) -> Self {
        Self {
            v,
            d_start,
            d_end,
            decision_interval,
            orientation: OrientationMode::Fixed(0.0),
            scatterers: ScattererMode::Persist,
        }
    }

    /// Decisions every `step_scale` coherence times.
    pub fn at_coherence(v: f64, d_start: f64, d_end: f64, f_c: f64, step_scale: f64) -> Result<Self> {
        if !(step_scale > 0.0) {
            return Err(Error::InvalidConfig(format!("step scale {step_scale} must be positive")));
        }
        Ok(Self::new(v, d_start, d_end, coherence_time(v, f_c)? * step_scale))
    }

    pub fn with_orientation(mut self, orientation: OrientationMode) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn with_scatterers(mut self, scatterers: ScattererMode) -> Self {
        self.scatterers = scatterers;
        self
    }

    pub fn reversed(mut self) -> Self {
        std::mem::swap(&mut self.d_start, &mut self.d_end);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.v, self.d_start, self.d_end, self.decision_interval].iter().all(|x| x.is_finite());
        if !finite || !(self.v > 0.0) || !(self.decision_interval > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "trajectory needs finite v > 0 and interval > 0 (got {}, {})",
                self.v, self.decision_interval
            )));
        }
        if !(self.d_start > 0.0) || !(self.d_end > 0.0) || self.d_start == self.d_end {
            return Err(Error::InvalidConfig(format!(
                "trajectory endpoints must be distinct and positive (got {}, {})",
                self.d_start, self.d_end
            )));
        }
        Ok(())
    }

    pub fn step_length(&self) -> f64 {
        self.v * self.decision_interval
    }

    /// `floor(|d_end − d_start| / step) + 1`.
    pub fn num_steps(&self) -> usize {
        let ratio = (self.d_end - self.d_start).abs() / self.step_length();
        (ratio * (1.0 + 1e-12)).floor() as usize + 1
    }

    pub fn distance_at(&self, step: usize) -> f64 {
        let dir = (self.d_end - self.d_start).signum();
        self.d_start + dir * step as f64 * self.step_length()
    }
}

/// Per-step ground truth and threshold decisions along one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedTrajectory {
    pub distances: Vec<f64>,
    pub truth: Vec<Region>,
    pub etas: Vec<f64>,
    pub observations: Vec<Observation>,
}

impl ObservedTrajectory {
    pub fn labeled(&self) -> LabeledSequence {
        self.truth.iter().copied().zip(self.observations.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

/// An observed trajectory plus the region decided by each method per step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub observed: ObservedTrajectory,
    pub single: Vec<Region>,
    pub majority: Vec<Region>,
    pub hmm: Vec<Region>,
}

impl TrajectoryRecord {
    pub fn decisions(&self, method: DecisionMethod) -> &[Region] {
        match method {
            DecisionMethod::Single => &self.single,
            DecisionMethod::Majority => &self.majority,
            DecisionMethod::Hmm => &self.hmm,
        }
    }
}

/// Walks the user along `spec`, running beam training and the threshold
/// rule at every step. Codebooks and (in persist mode) the scatterer layout
/// are drawn once from the trajectory stream; gains, noise and per-step
/// orientations come from per-step streams.
pub fn observe_trajectory(
    scenario: &Scenario,
    spec: &TrajectorySpec,
    threshold: &ThresholdModel,
    snr_db: f64,
    seed: u64,
) -> Result<ObservedTrajectory> {
    spec.validate()?;
    scenario.validate()?;
    let tx = scenario.tx_positions()?;
    let mut rng = stream(seed, Purpose::Trajectory, &[]);
    let fixed_layout = scenario.scatter.draw_layout(scenario.system.num_paths, &mut rng);
    let (z, c) = scenario.draw_codebooks(&mut rng)?;

    let n = spec.num_steps();
    let mut out = ObservedTrajectory {
        distances: Vec::with_capacity(n),
        truth: Vec::with_capacity(n),
        etas: Vec::with_capacity(n),
        observations: Vec::with_capacity(n),
    };
    for i in 0..n {
        let d = spec.distance_at(i);
        let mut step_rng = stream(seed, Purpose::Step, &[i as u64]);
        let redrawn;
        let layout = match spec.scatterers {
            ScattererMode::Persist => &fixed_layout,
            ScattererMode::Redraw => {
                redrawn = scenario.scatter.draw_layout(scenario.system.num_paths, &mut step_rng);
                &redrawn
            }
        };
        let paths = scenario.scatter.paths(layout, d, &mut step_rng)?;
        let beta = match spec.orientation {
            OrientationMode::Fixed(b) => b,
            OrientationMode::PerStep => scenario.draw_orientation(&mut step_rng),
        };
        let noise_seed = derive_seed(seed, Purpose::Noise, &[i as u64]);
        let eta = scenario.eta(&tx, d, beta, &paths, &z, &c, snr_db, noise_seed)?;
        out.distances.push(d);
        out.truth.push(region_of(d, threshold.d_boundary));
        out.etas.push(eta);
        out.observations.push(threshold.decide(eta));
    }
    Ok(out)
}

/// Applies the three deciders step by step: `single` looks only at the
/// latest observation, the others at the last `window` observations.
pub fn decode(observed: ObservedTrajectory, window: usize, hmm: &HmmModel) -> Result<TrajectoryRecord> {
    let mut w = ObservationWindow::new(window)?;
    let n = observed.len();
    let (mut single, mut majority, mut hmm_path) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &o in &observed.observations {
        w.push(o);
        single.push(o.region());
        majority.push(decide_region(&w, DecisionMethod::Majority, None)?);
        hmm_path.push(decide_region(&w, DecisionMethod::Hmm, Some(hmm))?);
    }
    Ok(TrajectoryRecord { observed, single, majority, hmm: hmm_path })
}

pub fn run_trajectory(
    scenario: &Scenario,
    spec: &TrajectorySpec,
    threshold: &ThresholdModel,
    hmm: &HmmModel,
    window: usize,
    snr_db: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    decode(observe_trajectory(scenario, spec, threshold, snr_db, seed)?, window, hmm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub snr_db: f64,
    pub region: Region,
    pub method: DecisionMethod,
    pub success_rate: f64,
    /// Trajectories contributing at least one scored step.
    pub trials: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<SuccessRow>,
}

impl ExperimentResult {
    pub fn rate(&self, snr_db: f64, region: Region, method: DecisionMethod) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.region == region && r.method == method)
            .map(|r| r.success_rate)
    }
}

/// Fraction of correct decisions after the first `burn_in` steps of each
/// trajectory, per SNR (in first-seen order), region and method.
pub fn success_rates(records: &[(f64, TrajectoryRecord)], burn_in: usize) -> ExperimentResult {
    let mut snrs: Vec<f64> = Vec::new();
    for (s, _) in records {
        if !snrs.contains(s) {
            snrs.push(*s);
        }
    }
    let mut rows = Vec::new();
    for &snr in &snrs {
        for region in Region::ALL {
            for method in DecisionMethod::ALL {
                let (mut hits, mut total, mut trials) = (0usize, 0usize, 0usize);
                for (_, rec) in records.iter().filter(|(s, _)| *s == snr) {
                    let scored: Vec<bool> = rec
                        .observed
                        .truth
                        .iter()
                        .zip(rec.decisions(method))
                        .skip(burn_in)
                        .filter(|(t, _)| **t == region)
                        .map(|(t, d)| t == d)
                        .collect();
                    if !scored.is_empty() {
                        trials += 1;
                        total += scored.len();
                        hits += scored.iter().filter(|&&h| h).count();
                    }
                }
                if total > 0 {
                    rows.push(SuccessRow {
                        snr_db: snr,
                        region,
                        method,
                        success_rate: hits as f64 / total as f64,
                        trials,
                    });
                }
            }
        }
    }
    ExperimentResult { rows }
}

fn snr_matches(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

pub fn threshold_for(thresholds: &[ThresholdModel], snr_db: f64) -> Result<&ThresholdModel> {
    thresholds
        .iter()
        .find(|t| t.snr_db.is_some_and(|s| snr_matches(s, snr_db)))
        .or_else(|| match thresholds {
            [only] if only.snr_db.is_none() => Some(only),
            _ => None,
        })
        .ok_or_else(|| Error::InvalidConfig(format!("no threshold calibrated for {snr_db} dB")))
}

pub fn hmm_for(hmms: &[CalibratedHmm], snr_db: f64) -> Result<&HmmModel> {
    hmms.iter()
        .find(|h| snr_matches(h.snr_db, snr_db))
        .map(|h| &h.model)
        .ok_or_else(|| Error::InvalidConfig(format!("no HMM calibrated for {snr_db} dB")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlinePlan {
    pub trajectory: TrajectorySpec,
    /// `U`.
    pub window: usize,
    pub snr_list: Vec<f64>,
    pub orientations: usize,
    pub trials: usize,
    pub burn_in: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineOutput {
    pub result: ExperimentResult,
    pub records: Vec<(f64, TrajectoryRecord)>,
}

/// `|snr_list| · R · E` trajectories. Orientation `r` is shared by all
/// trials and SNRs, and trajectory `(r, e)` sees the same random draws at
/// every SNR.
pub fn run_online(
    scenario: &Scenario,
    plan: &OnlinePlan,
    thresholds: &[ThresholdModel],
    hmms: &[CalibratedHmm],
    seed: u64,
) -> Result<OnlineOutput> {
    if plan.orientations == 0 || plan.trials == 0 || plan.snr_list.is_empty() {
        return Err(Error::InvalidConfig("online run needs R, E ≥ 1 and at least one SNR".into()));
    }
    let models = plan
        .snr_list
        .iter()
        .map(|&s| Ok((threshold_for(thresholds, s)?, hmm_for(hmms, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..plan.snr_list.len())
        .flat_map(|s| (0..plan.orientations).flat_map(move |r| (0..plan.trials).map(move |e| (s, r, e))))
        .collect();
    let records = jobs
        .into_par_iter()
        .map(|(s, r, e)| {
            let snr = plan.snr_list[s];
            let (threshold, hmm) = models[s];
            let spec = match plan.trajectory.orientation {
                OrientationMode::PerStep => plan.trajectory,
                OrientationMode::Fixed(_) => {
                    let beta = scenario.draw_orientation(&mut stream(seed, Purpose::Orientation, &[r as u64]));
                    plan.trajectory.with_orientation(OrientationMode::Fixed(beta))
                }
            };
            let traj_seed = derive_seed(seed, Purpose::Trajectory, &[r as u64, e as u64]);
            run_trajectory(scenario, &spec, threshold, hmm, plan.window, snr, traj_seed).map(|rec| (snr, rec))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OnlineOutput { result: success_rates(&records, plan.burn_in), records })
}

/// Estimates an HMM from `count` synthetic trajectories labeled by
/// `threshold`. Odd-numbered trajectories run in reverse so both regions
/// start equally often.
pub fn train_hmm(
    scenario: &Scenario,
    spec: &TrajectorySpec,
    threshold: &ThresholdModel,
    count: usize,
    snr_db: f64,
    smoothing: f64,
    seed: u64,
) -> Result<HmmModel> {
    if count == 0 {
        return Err(Error::InvalidConfig("HMM training needs at least one trajectory".into()));
    }
    let sequences = (0..count)
        .into_par_iter()
        .map(|j| {
            let mut s = if j % 2 == 1 { spec.reversed() } else { *spec };
            if let OrientationMode::Fixed(_) = s.orientation {
                let beta = scenario.draw_orientation(&mut stream(seed, Purpose::HmmTraining, &[j as u64, 0]));
                s = s.with_orientation(OrientationMode::Fixed(beta));
            }
            let traj_seed = derive_seed(seed, Purpose::HmmTraining, &[j as u64, 1]);
            observe_trajectory(scenario, &s, threshold, snr_db, traj_seed).map(|o| o.labeled())
        })
        .collect::<Result<Vec<_>>>()?;
    estimate_hmm_params(&sequences, smoothing)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationPlan {
    pub distances: Vec<f64>,
    pub orientations: usize,
    pub trials: usize,
    pub snr_list: Vec<f64>,
    pub d_boundary: f64,
    pub trajectory: TrajectorySpec,
    pub hmm_trajectories: usize,
    pub smoothing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationOutput {
    pub samples: Vec<OfflineSample>,
    pub thresholds: Vec<ThresholdModel>,
    pub hmms: Vec<CalibratedHmm>,
}

/// Offline sweep, threshold fit and HMM estimation for every SNR in the plan.
pub fn calibrate(scenario: &Scenario, plan: &CalibrationPlan, seed: u64) -> Result<CalibrationOutput> {
    if plan.snr_list.is_empty() {
        return Err(Error::InvalidConfig("calibration SNR list is empty".into()));
    }
    let mut out = CalibrationOutput { samples: Vec::new(), thresholds: Vec::new(), hmms: Vec::new() };
    for &snr in &plan.snr_list {
        let samples = sweep_offline(scenario, &plan.distances, plan.orientations, plan.trials, snr, seed)?;
        let threshold = fit_threshold(&samples, plan.d_boundary)?;
        let model =
            train_hmm(scenario, &plan.trajectory, &threshold, plan.hmm_trajectories, snr, plan.smoothing, seed)?;
        out.samples.extend(samples);
        out.thresholds.push(threshold);
        out.hmms.push(CalibratedHmm { snr_db: snr, model });
    }
    Ok(out)
}
