//! Phase-1 beam training: random quantized-phase analog beams on the
//! reference Tx subarray and one shared combiner bank on every Rx subarray.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelModel, ChannelTensor};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Constant-modulus analog weights, one beam per column.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    weights: Array2<Complex64>,
    phase_bits: u32,
}

impl Codebook {
    /// Draws every weight independently and uniformly from the
    /// `2^phase_bits`-point phase grid.
    pub fn random<R: Rng + ?Sized>(
        elements: usize,
        beams: usize,
        phase_bits: u32,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(elements, beams, phase_bits)?;
        let levels = 1u64 << phase_bits;
        let scale = 1.0 / (elements as f64).sqrt();
        let step = 2.0 * PI / levels as f64;
        // Column-major draw order: beam by beam.
        let mut weights = Array2::zeros((elements, beams));
        for b in 0..beams {
            for e in 0..elements {
                let m = rng.random_range(0..levels);
                weights[[e, b]] = Complex64::from_polar(scale, step * m as f64);
            }
        }
        Ok(Self { weights, phase_bits })
    }

    /// Wraps explicit weights after checking the magnitude and phase-grid
    /// constraints.
    pub fn from_weights(weights: Array2<Complex64>, phase_bits: u32) -> Result<Self> {
        let (elements, beams) = weights.dim();
        check_dims(elements, beams, phase_bits)?;
        let scale = 1.0 / (elements as f64).sqrt();
        let levels = (1u64 << phase_bits) as f64;
        for w in weights.iter() {
            if (w.norm() - scale).abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(format!(
                    "weight magnitude {} differs from 1/√{elements}",
                    w.norm()
                )));
            }
            let m = w.arg().rem_euclid(2.0 * PI) * levels / (2.0 * PI);
            if (m - m.round()).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "weight phase {} is off the {phase_bits}-bit grid",
                    w.arg()
                )));
            }
        }
        Ok(Self { weights, phase_bits })
    }

    /// Scaled DFT bank, unitary up to the `1/√n` factor; on the grid when
    /// `n` divides `2^phase_bits`.
    pub fn dft(n: usize, phase_bits: u32) -> Result<Self> {
        let scale = 1.0 / (n as f64).sqrt();
        let w = Array2::from_shape_fn((n, n), |(i, j)| {
            Complex64::from_polar(scale, -2.0 * PI * ((i * j) % n) as f64 / n as f64)
        });
        Self::from_weights(w, phase_bits)
    }

    pub fn weights(&self) -> &Array2<Complex64> {
        &self.weights
    }

    pub fn phase_bits(&self) -> u32 {
        self.phase_bits
    }

    pub fn elements(&self) -> usize {
        self.weights.nrows()
    }

    pub fn beams(&self) -> usize {
        self.weights.ncols()
    }
}

fn check_dims(elements: usize, beams: usize, phase_bits: u32) -> Result<()> {
    if elements == 0 || beams == 0 || phase_bits == 0 || phase_bits > 32 {
        return Err(Error::InvalidConfig(format!(
            "codebook needs elements, beams ≥ 1 and 1 ≤ phase bits ≤ 32 \
             (got {elements}, {beams}, {phase_bits})"
        )));
    }
    Ok(())
}

pub fn gen_codebook(elements: usize, beams: usize, phase_bits: u32, seed: u64) -> Result<Codebook> {
    let mut rng = stream(seed, Purpose::Codebook, &[elements as u64, beams as u64]);
    Codebook::random(elements, beams, phase_bits, &mut rng)
}

/// Training observations `Y^{q_r,1}[k]` for every Rx subarray and subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    num_rx_sas: usize,
    num_subcarriers: usize,
    y: Vec<Array2<Complex64>>,
    pub p_t: f64,
    pub sigma_n2: f64,
}

impl MeasurementSet {
    /// Blocks ordered by `(q_r, k)`, each `M_R × M_T`.
    pub fn from_blocks(
        num_rx_sas: usize,
        num_subcarriers: usize,
        y: Vec<Array2<Complex64>>,
        p_t: f64,
        sigma_n2: f64,
    ) -> Result<Self> {
        if num_rx_sas == 0 || num_subcarriers == 0 || y.len() != num_rx_sas * num_subcarriers {
            return Err(Error::Shape(format!(
                "expected {num_rx_sas}×{num_subcarriers} blocks, got {}",
                y.len()
            )));
        }
        let dim = y[0].dim();
        if y.iter().any(|b| b.dim() != dim) {
            return Err(Error::Shape("measurement blocks differ in shape".into()));
        }
        Ok(Self { num_rx_sas, num_subcarriers, y, p_t, sigma_n2 })
    }

    pub fn num_rx_sas(&self) -> usize {
        self.num_rx_sas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    /// `(M_R, M_T)`.
    pub fn block_dim(&self) -> (usize, usize) {
        self.y[0].dim()
    }

    pub fn block(&self, q_r: usize, k: usize) -> &Array2<Complex64> {
        &self.y[q_r * self.num_subcarriers + k]
    }

    pub fn blocks(&self) -> &[Array2<Complex64>] {
        &self.y
    }

    /// Applies `f` to every entry (test and analysis helper).
    pub fn map_entries(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { y: self.y.iter().map(|b| b.mapv(&f)).collect(), ..self.clone() }
    }
}

/// Noise power giving `snr_db` relative to the mean entry power of the
/// sounded (reference Tx subarray) blocks: `σ² = p_t · mean|h|² / 10^(snr/10)`.
pub fn noise_power_for_snr(h: &ChannelTensor, p_t: f64, snr_db: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for q_r in 0..h.num_rx_sas() {
        for k in 0..h.num_subcarriers() {
            let b = h
                .block(q_r, 0, k)
                .ok_or_else(|| Error::InvalidInput("channel lacks the reference Tx subarray".into()))?;
            sum += b.iter().map(|z| z.norm_sqr()).sum::<f64>();
            count += b.len();
        }
    }
    if count == 0 {
        return Err(Error::InvalidInput("empty channel".into()));
    }
    let mean = sum / count as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::Degenerate(format!("channel mean power is {mean}")));
    }
    Ok(p_t * mean / 10f64.powf(snr_db / 10.0))
}

/// `Y^{q_r,1}[k] = √p_t Cᴴ H_{q_r,1}[k] Z + Cᴴ N[k]` with
/// `N[k] ~ CN(0, σ² I)`. The noise for block `(q_r, k)` comes from its own
/// stream derived from `seed`.
pub fn run_beam_training(
    h: &ChannelTensor,
    z: &Codebook,
    c: &Codebook,
    p_t: f64,
    sigma_n2: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if h.model() != ChannelModel::Swm {
        return Err(Error::InvalidInput(
            "training observations are generated from the SWM ground truth".into(),
        ));
    }
    let (nr, nt) = h.block_dim();
    if z.elements() != nt || c.elements() != nr {
        return Err(Error::Shape(format!(
            "channel blocks are {nr}×{nt} but codebooks have {} Rx and {} Tx elements",
            c.elements(),
            z.elements()
        )));
    }
    if !(p_t >= 0.0) || !(sigma_n2 >= 0.0) {
        return Err(Error::Domain("transmit and noise power must be non-negative".into()));
    }
    let ch = c.weights().t().mapv(|w| w.conj());
    let zw = z.weights();
    let amp = p_t.sqrt();
    let noise_std = (sigma_n2 / 2.0).sqrt();
    let m_t = z.beams();

    let mut y = Vec::with_capacity(h.num_rx_sas() * h.num_subcarriers());
    for q_r in 0..h.num_rx_sas() {
        for k in 0..h.num_subcarriers() {
            let hb = h
                .block(q_r, 0, k)
                .ok_or_else(|| Error::InvalidInput("channel lacks the reference Tx subarray".into()))?;
            let mut rx = hb.dot(zw) * Complex64::new(amp, 0.0);
            if sigma_n2 > 0.0 {
                let mut rng = stream(seed, Purpose::Noise, &[q_r as u64, k as u64]);
                for i in 0..nr {
                    for j in 0..m_t {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        rx[[i, j]] += Complex64::new(re, im) * noise_std;
                    }
                }
            }
            y.push(ch.dot(&rx));
        }
    }
    MeasurementSet::from_blocks(h.num_rx_sas(), h.num_subcarriers(), y, p_t, sigma_n2)
}
