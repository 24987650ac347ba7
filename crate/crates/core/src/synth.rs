//! Synthetic frames following the rank-one FMCW model
//! `Y_q = alpha * b(u_q) (x) a(r_q) + W_q`, rows indexed by chirp and columns by sample.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{doppler_atom, range_atom, sense, SceneGeometry, Target, WaveformConfig};
use crate::rng::substream_seed;

/// One measurement per receiver, each `Mc x Ms` (slow time x fast time).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    channels: Vec<Array2<Complex64>>,
}

impl Frame {
    pub fn new(channels: Vec<Array2<Complex64>>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Shape("a frame needs at least one receiver".into()))?
            .dim();
        if let Some((q, c)) = channels.iter().enumerate().find(|(_, c)| c.dim() != first) {
            return Err(Error::Shape(format!(
                "receiver {q} is {:?}, receiver 0 is {first:?}",
                c.dim()
            )));
        }
        if channels
            .iter()
            .flatten()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Shape("frame holds non-finite samples".into()));
        }
        Ok(Self { channels })
    }

    pub fn zeros(receivers: usize, chirps: usize, samples: usize) -> Self {
        Self {
            channels: (0..receivers).map(|_| Array2::zeros((chirps, samples))).collect(),
        }
    }

    pub fn receivers(&self) -> usize {
        self.channels.len()
    }
    pub fn chirps(&self) -> usize {
        self.channels[0].nrows()
    }
    pub fn samples(&self) -> usize {
        self.channels[0].ncols()
    }
    pub fn channel(&self, q: usize) -> &Array2<Complex64> {
        &self.channels[q]
    }
    pub fn channels(&self) -> &[Array2<Complex64>] {
        &self.channels
    }
    pub fn channels_mut(&mut self) -> &mut [Array2<Complex64>] {
        &mut self.channels
    }
    pub fn into_channels(self) -> Vec<Array2<Complex64>> {
        self.channels
    }

    /// Checks the frame against a waveform and geometry.
    pub fn check_shape(&self, cfg: &WaveformConfig, geom: &SceneGeometry) -> Result<()> {
        if self.receivers() != geom.receivers() || self.chirps() != cfg.chirps() || self.samples() != cfg.samples() {
            return Err(Error::Shape(format!(
                "frame is {} x {} x {}, configuration expects {} x {} x {}",
                self.receivers(),
                self.chirps(),
                self.samples(),
                geom.receivers(),
                cfg.chirps(),
                cfg.samples()
            )));
        }
        Ok(())
    }

    /// Same frame with receivers reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            channels: order.iter().map(|&q| self.channels[q].clone()).collect(),
        }
    }

    /// Every sample multiplied by `k`.
    pub fn scaled(&self, k: Complex64) -> Self {
        Self {
            channels: self.channels.iter().map(|c| c.mapv(|z| z * k)).collect(),
        }
    }
}

/// Additive noise settings. `snr_db = None` means noiseless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Signal power `|alpha_ref|^2` the SNR refers to. `synthesize_frame` sets it
    /// from the first target.
    pub reference_power: f64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            snr_db: None,
            seed: 0,
            reference_power: 1.0,
        }
    }

    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db: Some(snr_db),
            seed,
            reference_power: 1.0,
        }
    }

    /// Per-entry complex noise variance, zero when noiseless.
    pub fn variance(&self) -> f64 {
        match self.snr_db {
            Some(db) => self.reference_power * 10f64.powf(-db / 10.0),
            None => 0.0,
        }
    }
}

/// Synthesizes a frame with one shared scattering coefficient per target.
pub fn synthesize_frame(
    cfg: &WaveformConfig,
    geom: &SceneGeometry,
    targets: &[Target],
    noise: NoiseSpec,
) -> Result<Frame> {
    let gains = vec![Complex64::new(1.0, 0.0); geom.receivers()];
    synthesize_frame_with_gains(cfg, geom, targets, &gains, noise)
}

/// Like [`synthesize_frame`], with each receiver's echoes multiplied by `gains[q]`.
pub fn synthesize_frame_with_gains(
    cfg: &WaveformConfig,
    geom: &SceneGeometry,
    targets: &[Target],
    gains: &[Complex64],
    noise: NoiseSpec,
) -> Result<Frame> {
    if gains.len() != geom.receivers() {
        return Err(Error::Shape(format!(
            "{} receiver gains for {} receivers",
            gains.len(),
            geom.receivers()
        )));
    }
    let (mc, ms) = (cfg.chirps(), cfg.samples());
    let mut frame = Frame::zeros(geom.receivers(), mc, ms);
    for (t, target) in targets.iter().enumerate() {
        let sensed = sense(geom, cfg, target)?;
        for (q, p) in sensed.iter().enumerate() {
            if !p.is_unambiguous(cfg) {
                return Err(Error::OutsideWindow(format!(
                    "target {t} at receiver {q}: range {:.3} bins (window [0, {ms})), doppler {:.3} bins (window [-{}, {}))",
                    p.range,
                    p.doppler,
                    mc as f64 / 2.0,
                    mc as f64 / 2.0
                )));
            }
        }
        for (q, p) in sensed.iter().enumerate() {
            let a = range_atom(p.range, ms);
            let b = doppler_atom(p.doppler, mc);
            let alpha = target.alpha * gains[q];
            let y = &mut frame.channels[q];
            for (mut row, &bm) in y.rows_mut().into_iter().zip(&b) {
                let s = alpha * bm;
                for (z, &am) in row.iter_mut().zip(&a) {
                    *z += s * am;
                }
            }
        }
    }
    let noise = NoiseSpec {
        reference_power: targets.first().map_or(1.0, |t| t.alpha.norm_sqr()),
        ..noise
    };
    Ok(add_noise(frame, noise))
}

/// Adds i.i.d. circular complex Gaussian noise of variance `noise.variance()` per
/// entry. Receiver `q` draws from its own substream of `noise.seed`.
pub fn add_noise(mut frame: Frame, noise: NoiseSpec) -> Frame {
    if noise.snr_db.is_none() {
        return frame;
    }
    let sigma = (noise.variance() / 2.0).sqrt();
    frame.channels.par_iter_mut().enumerate().for_each(|(q, y)| {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(noise.seed, &[q as u64]));
        for z in y.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(sigma * re, sigma * im);
        }
    });
    frame
}
