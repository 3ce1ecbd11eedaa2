//! Wideband sub-channel generation under the spherical wave model (SWM) and
//! the hybrid spherical-planar wave model (HSPWM).
//!
//! Array response vectors are unit norm, so every channel entry carries
//! magnitude `|α| / √L` before summation over paths. This is the
//! `√(Q̄_R Q̄_T / L)` prefactor applied to normalized response vectors.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_array, path_length, sa_pair_geometry, AePositions, ArrayConfig, PathSet, PathSpec, Vec3};
use crate::SPEED_OF_LIGHT;

/// Molecular absorption coefficient versus frequency, piecewise linear in
/// between the tabulated points and clamped outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionTable {
    /// `(frequency Hz, coefficient 1/m)`, strictly increasing in frequency.
    points: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("absorption table is empty".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidConfig(
                "absorption table frequencies must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|&(f, k)| !f.is_finite() || !(k >= 0.0) || !k.is_finite()) {
            return Err(Error::InvalidConfig(
                "absorption coefficients must be finite and non-negative".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn coefficient(&self, f: f64) -> f64 {
        let p = &self.points;
        if f <= p[0].0 {
            return p[0].1;
        }
        if f >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let i = p.partition_point(|&(x, _)| x <= f);
        let (f0, k0) = p[i - 1];
        let (f1, k1) = p[i];
        k0 + (k1 - k0) * (f - f0) / (f1 - f0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Center frequency `f_c`, Hz.
    pub carrier_hz: f64,
    /// System bandwidth `B_sys`, Hz.
    pub bandwidth_hz: f64,
    /// Subcarrier count `K`.
    pub num_subcarriers: usize,
    /// Path count `L` (one line-of-sight path plus `L − 1` reflections).
    pub num_paths: usize,
    #[serde(default)]
    pub absorption: Option<AbsorptionTable>,
}

impl SystemConfig {
    pub fn new(carrier_hz: f64, bandwidth_hz: f64, num_subcarriers: usize, num_paths: usize) -> Self {
        Self { carrier_hz, bandwidth_hz, num_subcarriers, num_paths, absorption: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 || self.num_paths == 0 {
            return Err(Error::InvalidConfig(format!(
                "K and L must be at least 1 (K={}, L={})",
                self.num_subcarriers, self.num_paths
            )));
        }
        if !(self.carrier_hz > 0.0) || !(self.bandwidth_hz >= 0.0) {
            return Err(Error::InvalidConfig("carrier must be positive and bandwidth non-negative".into()));
        }
        if self.bandwidth_hz >= 2.0 * self.carrier_hz {
            return Err(Error::InvalidConfig("bandwidth pushes subcarriers below 0 Hz".into()));
        }
        Ok(())
    }

    /// Frequency of subcarrier `k` (0-based): `f_c + (B/K)(k − (K−1)/2)`.
    pub fn subcarrier_hz(&self, k: usize) -> f64 {
        let kk = self.num_subcarriers as f64;
        self.carrier_hz + self.bandwidth_hz / kk * (k as f64 - (kk - 1.0) / 2.0)
    }

    pub fn subcarriers_hz(&self) -> Vec<f64> {
        (0..self.num_subcarriers).map(|k| self.subcarrier_hz(k)).collect()
    }

    pub fn carrier_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn absorption_at(&self, f: f64) -> f64 {
        self.absorption.as_ref().map_or(0.0, |t| t.coefficient(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelModel {
    Swm,
    Hspwm,
}

/// Complex path gain without the propagation phase: Friis magnitude with
/// exponential absorption, scaled by the reflection coefficient.
pub fn path_gain(f: f64, d: f64, path: &PathSpec, absorption: f64) -> Result<Complex64> {
    if !(d > 0.0) || !(f > 0.0) {
        return Err(Error::Domain(format!("path gain needs d > 0 and f > 0 (d={d}, f={f})")));
    }
    let friis = SPEED_OF_LIGHT / (4.0 * PI * f * d);
    Ok(path.reflection() * (friis * (-0.5 * absorption * d).exp()))
}

#[inline]
fn propagation(f: f64, d: f64) -> Complex64 {
    Complex64::cis(-2.0 * PI * f * d / SPEED_OF_LIGHT)
}

/// Near-field response of `positions` to a point source, referenced to the
/// distance from the subarray center (the centroid of `positions`).
pub fn nf_arv(positions: &[Vec3], source: Vec3, f: f64) -> Result<Array1<Complex64>> {
    if positions.is_empty() {
        return Err(Error::InvalidInput("empty element list".into()));
    }
    let n = positions.len() as f64;
    let center = positions.iter().fold(Vec3::ZERO, |acc, &p| acc + p) * (1.0 / n);
    let d_ref = center.distance(source);
    let scale = 1.0 / n.sqrt();
    positions
        .iter()
        .map(|&p| {
            let d = path_length(p, source, &PathSpec::LineOfSight)?;
            Ok(propagation(f, d - d_ref) * scale)
        })
        .collect::<Result<Vec<_>>>()
        .map(Array1::from)
}

/// Far-field ULA response referenced to element 0:
/// entry `n = exp(−j 2π/λ · n δ cos θ) / √Q̄`.
pub fn ff_arv(num: usize, spacing: f64, theta: f64, f: f64) -> Array1<Complex64> {
    let scale = 1.0 / (num as f64).sqrt();
    let step = spacing * theta.cos();
    Array1::from_shape_fn(num, |n| propagation(f, n as f64 * step) * scale)
}

/// Far-field response referenced to the subarray center, parameterized by
/// the direction cosine along the array axis.
fn centered_response(num: usize, spacing: f64, direction_cos: f64, f: f64) -> Array1<Complex64> {
    let scale = 1.0 / (num as f64).sqrt();
    let mid = (num as f64 - 1.0) / 2.0;
    Array1::from_shape_fn(num, |n| propagation(f, (n as f64 - mid) * spacing * direction_cos) * scale)
}

fn check_indices(tx: &AePositions, rx: &AePositions, q_t: usize, q_r: usize) -> Result<()> {
    if q_t >= tx.num_sas() || q_r >= rx.num_sas() {
        return Err(Error::InvalidInput(format!(
            "subarray index out of range (q_t={q_t}/{}, q_r={q_r}/{})",
            tx.num_sas(),
            rx.num_sas()
        )));
    }
    Ok(())
}

fn check_paths(paths: &PathSet) -> Result<()> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("empty path set".into()));
    }
    Ok(())
}

/// SWM blocks for Tx subarray `q_t`, Rx subarray `q_r`, one per requested
/// subcarrier. Every element pair uses its exact path length in both the
/// magnitude and the phase.
pub(crate) fn swm_blocks(
    sys: &SystemConfig,
    tx: &AePositions,
    rx: &AePositions,
    q_t: usize,
    q_r: usize,
    paths: &PathSet,
    subcarriers: &[usize],
) -> Result<Vec<Array2<Complex64>>> {
    check_indices(tx, rx, q_t, q_r)?;
    check_paths(paths)?;
    let tx_el = tx.subarray(q_t);
    let rx_el = rx.subarray(q_r);
    let (nr, nt) = (rx_el.len(), tx_el.len());
    let norm = 1.0 / (paths.len() as f64).sqrt();

    let freqs: Vec<f64> = subcarriers.iter().map(|&k| sys.subcarrier_hz(k)).collect();
    let absorption: Vec<f64> = freqs.iter().map(|&f| sys.absorption_at(f)).collect();
    let mut blocks = vec![Array2::<Complex64>::zeros((nr, nt)); freqs.len()];

    // Per-path distance tables are shared by all subcarriers.
    let mut dist = vec![0.0; nr * nt];
    for path in paths.paths() {
        match path {
            PathSpec::LineOfSight => {
                for (i, &r) in rx_el.iter().enumerate() {
                    for (j, &t) in tx_el.iter().enumerate() {
                        dist[i * nt + j] = path_length(t, r, path)?;
                    }
                }
            }
            PathSpec::Reflected { scatterer, .. } => {
                let to_tx = tx_el
                    .iter()
                    .map(|&t| path_length(t, *scatterer, &PathSpec::LineOfSight))
                    .collect::<Result<Vec<_>>>()?;
                for (i, &r) in rx_el.iter().enumerate() {
                    let to_rx = path_length(*scatterer, r, &PathSpec::LineOfSight)?;
                    for j in 0..nt {
                        dist[i * nt + j] = to_tx[j] + to_rx;
                    }
                }
            }
        }
        let refl = path.reflection();
        for (b, (&f, &kappa)) in blocks.iter_mut().zip(freqs.iter().zip(&absorption)) {
            let friis = SPEED_OF_LIGHT / (4.0 * PI * f);
            for ((i, j), h) in b.indexed_iter_mut() {
                let d = dist[i * nt + j];
                let mag = friis / d * (-0.5 * kappa * d).exp();
                *h += refl * propagation(f, d) * (mag * norm);
            }
        }
    }
    Ok(blocks)
}

pub fn gen_swm_subchannel(
    sys: &SystemConfig,
    tx: &AePositions,
    rx: &AePositions,
    q_t: usize,
    q_r: usize,
    paths: &PathSet,
    k: usize,
) -> Result<Array2<Complex64>> {
    check_subcarrier(sys, k)?;
    Ok(swm_blocks(sys, tx, rx, q_t, q_r, paths, &[k])?.remove(0))
}

fn check_subcarrier(sys: &SystemConfig, k: usize) -> Result<()> {
    if k >= sys.num_subcarriers {
        return Err(Error::InvalidInput(format!(
            "subcarrier {k} out of range (K={})",
            sys.num_subcarriers
        )));
    }
    Ok(())
}

pub(crate) fn hspwm_blocks(
    sys: &SystemConfig,
    tx: &AePositions,
    rx: &AePositions,
    q_t: usize,
    q_r: usize,
    paths: &PathSet,
    subcarriers: &[usize],
) -> Result<Vec<Array2<Complex64>>> {
    check_indices(tx, rx, q_t, q_r)?;
    check_paths(paths)?;
    let (nr, nt) = (rx.aes_per_sa(), tx.aes_per_sa());
    let pre = ((nr * nt) as f64 / paths.len() as f64).sqrt();
    let geoms = paths
        .paths()
        .iter()
        .map(|p| sa_pair_geometry(tx, rx, q_t, q_r, p).map(|g| (p, g)))
        .collect::<Result<Vec<_>>>()?;

    subcarriers
        .iter()
        .map(|&k| {
            let f = sys.subcarrier_hz(k);
            let kappa = sys.absorption_at(f);
            let mut block = Array2::<Complex64>::zeros((nr, nt));
            for (path, g) in &geoms {
                let alpha = path_gain(f, g.distance, path, kappa)? * propagation(f, g.distance) * pre;
                let a_r = centered_response(nr, rx.ae_spacing(), g.aoa.cos(), f);
                // θ is measured along the direction of travel, so the Tx
                // element phase advances with −cos θ.
                let a_t = centered_response(nt, tx.ae_spacing(), -g.aod.cos(), f);
                for ((i, j), h) in block.indexed_iter_mut() {
                    *h += alpha * a_r[i] * a_t[j];
                }
            }
            Ok(block)
        })
        .collect()
}

pub fn gen_hspwm_subchannel(
    sys: &SystemConfig,
    tx: &AePositions,
    rx: &AePositions,
    q_t: usize,
    q_r: usize,
    paths: &PathSet,
    k: usize,
) -> Result<Array2<Complex64>> {
    check_subcarrier(sys, k)?;
    Ok(hspwm_blocks(sys, tx, rx, q_t, q_r, paths, &[k])?.remove(0))
}

/// Per-subcarrier block channel between a set of Tx subarrays and every Rx
/// subarray.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTensor {
    model: ChannelModel,
    num_rx_sas: usize,
    tx_sas: Vec<usize>,
    num_subcarriers: usize,
    blocks: Vec<Array2<Complex64>>,
}

impl ChannelTensor {
    /// Assembles a tensor from blocks ordered by `(q_r, tx slot, k)`.
    pub fn from_blocks(
        model: ChannelModel,
        num_rx_sas: usize,
        tx_sas: Vec<usize>,
        num_subcarriers: usize,
        blocks: Vec<Array2<Complex64>>,
    ) -> Result<Self> {
        let expected = num_rx_sas * tx_sas.len() * num_subcarriers;
        if blocks.len() != expected || expected == 0 {
            return Err(Error::Shape(format!(
                "expected {expected} blocks, got {}",
                blocks.len()
            )));
        }
        let dim = blocks[0].dim();
        if blocks.iter().any(|b| b.dim() != dim) {
            return Err(Error::Shape("blocks have inconsistent shapes".into()));
        }
        Ok(Self { model, num_rx_sas, tx_sas, num_subcarriers, blocks })
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn num_rx_sas(&self) -> usize {
        self.num_rx_sas
    }

    /// Tx subarray indices present in this tensor.
    pub fn tx_sas(&self) -> &[usize] {
        &self.tx_sas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `(Q̄_R, Q̄_T)`.
    pub fn block_dim(&self) -> (usize, usize) {
        self.blocks[0].dim()
    }

    /// Block `H_{q_r, q_t}[k]`, if Tx subarray `q_t` was generated.
    pub fn block(&self, q_r: usize, q_t: usize, k: usize) -> Option<&Array2<Complex64>> {
        let slot = self.tx_sas.iter().position(|&q| q == q_t)?;
        if q_r >= self.num_rx_sas || k >= self.num_subcarriers {
            return None;
        }
        self.blocks.get((q_r * self.tx_sas.len() + slot) * self.num_subcarriers + k)
    }

    pub fn blocks(&self) -> &[Array2<Complex64>] {
        &self.blocks
    }

    /// Squared Frobenius norm summed over all blocks.
    pub fn energy(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.iter()).map(|h| h.norm_sqr()).sum()
    }
}

/// Generates every `(q_r, q_t, k)` block for the listed Tx subarrays.
pub fn gen_channel(
    sys: &SystemConfig,
    tx: &AePositions,
    rx: &AePositions,
    paths: &PathSet,
    model: ChannelModel,
    tx_sas: &[usize],
) -> Result<ChannelTensor> {
    sys.validate()?;
    let ks: Vec<usize> = (0..sys.num_subcarriers).collect();
    let mut blocks = Vec::with_capacity(rx.num_sas() * tx_sas.len() * ks.len());
    for q_r in 0..rx.num_sas() {
        for &q_t in tx_sas {
            let set = match model {
                ChannelModel::Swm => swm_blocks(sys, tx, rx, q_t, q_r, paths, &ks)?,
                ChannelModel::Hspwm => hspwm_blocks(sys, tx, rx, q_t, q_r, paths, &ks)?,
            };
            blocks.extend(set);
        }
    }
    ChannelTensor::from_blocks(model, rx.num_sas(), tx_sas.to_vec(), ks.len(), blocks)
}

/// Channel between the reference (first) Tx subarray and every Rx subarray,
/// which is all that beam training sounds.
pub fn gen_reference_channel(
    sys: &SystemConfig,
    tx: &AePositions,
    rx: &AePositions,
    paths: &PathSet,
    model: ChannelModel,
) -> Result<ChannelTensor> {
    gen_channel(sys, tx, rx, paths, model, &[0])
}

pub fn gen_full_channel(
    sys: &SystemConfig,
    tx_cfg: &ArrayConfig,
    rx_cfg: &ArrayConfig,
    paths: &PathSet,
    model: ChannelModel,
) -> Result<ChannelTensor> {
    let tx = build_array(tx_cfg)?;
    let rx = build_array(rx_cfg)?;
    let all: Vec<usize> = (0..tx.num_sas()).collect();
    gen_channel(sys, &tx, &rx, paths, model, &all)
}

/// `‖A − B‖_F / ‖A‖_F` over matching blocks of two tensors.
pub fn relative_frobenius_error(reference: &ChannelTensor, other: &ChannelTensor) -> Result<f64> {
    if reference.num_blocks() != other.num_blocks() || reference.block_dim() != other.block_dim() {
        return Err(Error::Shape("tensors have different shapes".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in reference.blocks().iter().zip(other.blocks()) {
        num += (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>();
        den += a.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    if den == 0.0 {
        return Err(Error::Degenerate("reference tensor is all zero".into()));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FC: f64 = 0.3e12;

    fn half_wave() -> f64 {
        SPEED_OF_LIGHT / FC / 2.0
    }

    #[test]
    fn subcarriers_are_centered_and_increasing() {
        let sys = SystemConfig::new(FC, 10e9, 16, 3);
        let f = sys.subcarriers_hz();
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert_relative_eq!((f[0] + f[15]) / 2.0, FC, max_relative = 1e-15);
        assert_relative_eq!(f[1] - f[0], 10e9 / 16.0, max_relative = 1e-9);
        assert_eq!(SystemConfig::new(FC, 10e9, 1, 1).subcarrier_hz(0), FC);
    }

    #[test]
    fn invalid_system() {
        assert!(SystemConfig::new(FC, 10e9, 0, 1).validate().is_err());
        assert!(SystemConfig::new(FC, 10e9, 4, 0).validate().is_err());
        assert!(SystemConfig::new(-1.0, 10e9, 4, 1).validate().is_err());
    }

    #[test]
    fn friis_magnitude() {
        // Independent Friis evaluation: λ / (4π d) at 0.3 THz, 10 m.
        let lambda = SPEED_OF_LIGHT / FC;
        let expected = lambda / (4.0 * PI * 10.0);
        let g = path_gain(FC, 10.0, &PathSpec::LineOfSight, 0.0).unwrap();
        assert_relative_eq!(g.norm(), expected, max_relative = 1e-14);
        // With c0 rounded to 3e8 m/s the same formula gives 7.9577e-6.
        assert_relative_eq!(g.norm(), 7.9577e-6, max_relative = 1e-3);
        assert_eq!(g.arg(), 0.0);
        let near = path_gain(FC, 5.0, &PathSpec::LineOfSight, 0.0).unwrap();
        assert_relative_eq!(near.norm(), 2.0 * g.norm(), max_relative = 1e-14);
    }

    #[test]
    fn gain_with_reflection_and_absorption() {
        let refl = Complex64::from_polar(0.4, 1.1);
        let p = PathSpec::Reflected { scatterer: Vec3::new(1.0, 1.0, 0.0), reflection: refl };
        let g = path_gain(FC, 2.0, &p, 0.3).unwrap();
        let friis = SPEED_OF_LIGHT / (4.0 * PI * FC * 2.0);
        assert_relative_eq!(g.norm(), friis * 0.4 * (-0.3f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(g.arg(), 1.1, max_relative = 1e-14);
        assert!(matches!(path_gain(FC, 0.0, &p, 0.0), Err(Error::Domain(_))));
        assert!(path_gain(0.0, 1.0, &p, 0.0).is_err());
    }

    #[test]
    fn absorption_table_interpolates() {
        let t = AbsorptionTable::new(vec![(1.0, 0.0), (3.0, 2.0)]).unwrap();
        assert_eq!(t.coefficient(0.0), 0.0);
        assert_eq!(t.coefficient(2.0), 1.0);
        assert_eq!(t.coefficient(5.0), 2.0);
        assert!(AbsorptionTable::new(vec![(2.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(AbsorptionTable::new(vec![(1.0, -1.0)]).is_err());
    }

    #[test]
    fn far_field_arv_cases() {
        let d = half_wave();
        let a = ff_arv(8, d, PI / 2.0, FC);
        for z in a.iter() {
            assert_relative_eq!(z.re, 1.0 / 8f64.sqrt(), max_relative = 1e-12);
            assert!(z.im.abs() < 1e-12);
        }
        let end = ff_arv(6, d, 0.0, FC);
        for (n, z) in end.iter().enumerate() {
            let expected = if n % 2 == 0 { 1.0 } else { -1.0 } / 6f64.sqrt();
            assert!((z.re - expected).abs() < 1e-9 && z.im.abs() < 1e-9, "{n}: {z}");
        }
        let any = ff_arv(5, d, 0.7, FC);
        for z in any.iter() {
            assert_relative_eq!(z.norm(), 1.0 / 5f64.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn near_field_arv_cases() {
        let d = half_wave();
        let pos = [Vec3::new(0.0, 0.0, -d / 2.0), Vec3::new(0.0, 0.0, d / 2.0)];
        let b = nf_arv(&pos, Vec3::new(0.3, 0.1, 0.0), FC).unwrap();
        assert!((b[0] - b[1]).norm() < 1e-12);
        assert_relative_eq!(b[0].norm(), 1.0 / 2f64.sqrt(), max_relative = 1e-12);

        let arr = build_array(&ArrayConfig::contiguous(1, 16, d)).unwrap();
        let b = nf_arv(arr.subarray(0), Vec3::new(0.05, 0.0, 0.02), FC).unwrap();
        let norm: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(norm, 1.0, max_relative = 1e-12);

        assert!(nf_arv(&pos, pos[0], FC).is_err());
    }

    #[test]
    fn near_field_arv_tends_to_far_field() {
        let d = half_wave();
        let arr = build_array(&ArrayConfig::contiguous(1, 8, d)).unwrap();
        let aperture = 8.0 * d;
        let b = nf_arv(arr.subarray(0), Vec3::new(1e4 * aperture, 0.0, 0.0), FC).unwrap();
        let a = ff_arv(8, d, PI / 2.0, FC);
        let dev = b.iter().zip(a.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-3, "deviation {dev}");
    }

    fn arrays(qt: usize, qbt: usize, qr: usize, qbr: usize, dist: f64) -> (AePositions, AePositions) {
        let d = half_wave();
        let tx = build_array(&ArrayConfig::contiguous(qt, qbt, d)).unwrap();
        let rx = build_array(&ArrayConfig::contiguous(qr, qbr, d).with_center(Vec3::new(dist, 0.0, 0.0)))
            .unwrap();
        (tx, rx)
    }

    #[test]
    fn single_element_swm_is_scalar_gain() {
        let sys = SystemConfig::new(FC, 10e9, 4, 1);
        let (tx, rx) = arrays(1, 1, 1, 1, 7.0);
        let paths = PathSet::line_of_sight();
        for k in 0..4 {
            let h = gen_swm_subchannel(&sys, &tx, &rx, 0, 0, &paths, k).unwrap();
            let f = sys.subcarrier_hz(k);
            let expected = path_gain(f, 7.0, &PathSpec::LineOfSight, 0.0).unwrap()
                * Complex64::cis(-2.0 * PI * f * 7.0 / SPEED_OF_LIGHT);
            assert_eq!(h.dim(), (1, 1));
            assert_relative_eq!(h[[0, 0]].re, expected.re, max_relative = 1e-9);
            assert_relative_eq!(h[[0, 0]].im, expected.im, max_relative = 1e-9);
            let hs = gen_hspwm_subchannel(&sys, &tx, &rx, 0, 0, &paths, k).unwrap();
            assert!((hs[[0, 0]] - h[[0, 0]]).norm() <= 1e-12 * h[[0, 0]].norm());
        }
    }

    #[test]
    fn swm_matches_loop_oracle() {
        let sys = SystemConfig::new(FC, 10e9, 2, 1);
        let (tx, rx) = arrays(1, 4, 1, 4, 0.4);
        let h = gen_swm_subchannel(&sys, &tx, &rx, 0, 0, &PathSet::line_of_sight(), 1).unwrap();
        let f = sys.subcarrier_hz(1);
        let lambda = SPEED_OF_LIGHT / f;
        for nr in 0..4 {
            for nt in 0..4 {
                let p = rx.element(0, nr);
                let q = tx.element(0, nt);
                let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
                let mag = lambda / (4.0 * PI * d);
                let ph = -2.0 * PI * d / lambda;
                let want = Complex64::new(mag * ph.cos(), mag * ph.sin());
                assert!((h[[nr, nt]] - want).norm() <= 1e-12 * want.norm(), "({nr},{nt})");
            }
        }
    }

    #[test]
    fn swapping_rx_elements_permutes_rows() {
        let sys = SystemConfig::new(FC, 10e9, 1, 1);
        let (tx, rx) = arrays(1, 3, 1, 3, 0.5);
        let h = gen_swm_subchannel(&sys, &tx, &rx, 0, 0, &PathSet::line_of_sight(), 0).unwrap();
        let mut el = rx.subarray(0).to_vec();
        el.swap(0, 2);
        let f = sys.subcarrier_hz(0);
        for (i, r) in el.iter().enumerate() {
            for j in 0..3 {
                let d = tx.element(0, j).distance(*r);
                let want = path_gain(f, d, &PathSpec::LineOfSight, 0.0).unwrap() * propagation(f, d);
                let row = [2, 1, 0][i];
                assert!((h[[row, j]] - want).norm() < 1e-12 * want.norm());
            }
        }
    }

    #[test]
    fn hspwm_single_path_is_rank_one() {
        let sys = SystemConfig::new(FC, 10e9, 1, 1);
        let (tx, rx) = arrays(2, 8, 2, 4, 3.0);
        let h = gen_hspwm_subchannel(&sys, &tx, &rx, 1, 0, &PathSet::line_of_sight(), 0).unwrap();
        // Every 2×2 minor of an outer product vanishes.
        let scale = h.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        for i in 1..4 {
            for j in 1..8 {
                let minor = h[[0, 0]] * h[[i, j]] - h[[0, j]] * h[[i, 0]];
                assert!(minor.norm() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn hspwm_close_to_swm_well_beyond_subarray_fraunhofer() {
        let sys = SystemConfig::new(FC, 10e9, 1, 1);
        let (tx, rx) = arrays(1, 64, 1, 16, 50.0);
        let paths = PathSet::line_of_sight();
        let s = gen_swm_subchannel(&sys, &tx, &rx, 0, 0, &paths, 0).unwrap();
        let h = gen_hspwm_subchannel(&sys, &tx, &rx, 0, 0, &paths, 0).unwrap();
        let num: f64 = (&s - &h).iter().map(|z| z.norm_sqr()).sum();
        let den: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-2, "{}", (num / den).sqrt());
    }

    #[test]
    fn full_channel_block_count_and_path_order() {
        let sys = SystemConfig::new(FC, 10e9, 3, 3);
        let d = half_wave();
        let tx = ArrayConfig::contiguous(2, 4, d);
        let rx = ArrayConfig::contiguous(3, 2, d).with_center(Vec3::new(2.0, 0.0, 0.0));
        let a = PathSpec::Reflected {
            scatterer: Vec3::new(1.0, 0.3, 0.1),
            reflection: Complex64::from_polar(0.3, 0.5),
        };
        let b = PathSpec::Reflected {
            scatterer: Vec3::new(0.7, -0.2, 0.4),
            reflection: Complex64::from_polar(0.2, 2.5),
        };
        let p1 = PathSet::new(vec![PathSpec::LineOfSight, a, b]).unwrap();
        let p2 = PathSet::new(vec![b, PathSpec::LineOfSight, a]).unwrap();
        let h1 = gen_full_channel(&sys, &tx, &rx, &p1, ChannelModel::Swm).unwrap();
        let h2 = gen_full_channel(&sys, &tx, &rx, &p2, ChannelModel::Swm).unwrap();
        assert_eq!(h1.num_blocks(), 3 * 2 * 3);
        assert!(relative_frobenius_error(&h1, &h2).unwrap() < 1e-12);
        assert!(h1.block(2, 1, 2).is_some());
        assert!(h1.block(3, 0, 0).is_none());
    }
}
