//! Grid hopping: the direct method's location decision rebuilt from
//! fast-time FFT outputs through the precomputed hop table, followed by a
//! velocity scan that reads a single Doppler FFT bin per receiver.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::direct::range_correlations;
use crate::error::{Error, Result};
use crate::estimate::{argmax, Estimate, GridFix, Timings};
use crate::interp::HopTable;
use crate::model::{doppler_weights, Grids, LocationGrid, SceneGeometry, Vec2, VelocityGrid, WaveformConfig};
use crate::spectral::{forward_plan, rows_forward};
use crate::synth::Frame;

const MIN_PAR_LEN: usize = 64;

/// `Z_q[mc][i] = <Y_q[mc], a(i / P_r)>` for every receiver, `Mc x (P_r Ms)`.
pub fn fast_time_spectra(frame: &Frame, range_oversample: usize) -> Result<Vec<Array2<Complex64>>> {
    if range_oversample == 0 {
        return Err(Error::InvalidConfig("range oversampling must be >= 1".into()));
    }
    let len = range_oversample * frame.samples();
    Ok(frame.channels().par_iter().map(|y| rows_forward(y, len)).collect())
}

fn check_spectra(spectra_q: usize, cols: usize, table: &HopTable) -> Result<()> {
    if spectra_q != table.receivers() || cols != table.oversample() * table.samples() {
        return Err(Error::Shape(format!(
            "spectra are Q={spectra_q} x {cols} bins, hop table expects Q={} x {} bins",
            table.receivers(),
            table.oversample() * table.samples()
        )));
    }
    Ok(())
}

/// `sum_q sum_mc |c(i,q)^T Z_q[mc]_{I(i,q)}|^2` for location bin `bin`.
pub fn hop_location_decision(spectra: &[Array2<Complex64>], table: &HopTable, bin: usize) -> Result<f64> {
    let cols = spectra.first().map_or(0, |z| z.ncols());
    check_spectra(spectra.len(), cols, table)?;
    if bin >= table.bins() {
        return Err(Error::Shape(format!(
            "bin {bin} outside a table of {} bins",
            table.bins()
        )));
    }
    let mut total = 0.0;
    for (q, z) in spectra.iter().enumerate() {
        let (idx, coeffs) = table.entry(bin, q);
        for row in z.rows() {
            let s: Complex64 = idx.iter().zip(coeffs).map(|(&i, c)| c * row[i as usize]).sum();
            total += s.norm_sqr();
        }
    }
    Ok(total)
}

/// Spectra laid out bin-major (`[q][i * Mc + mc]`) so each FFT bin's slow-time
/// samples are contiguous, split into real and imaginary planes.
struct BinMajorSpectra {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    chirps: usize,
}

impl BinMajorSpectra {
    fn new(frame: &Frame, range_oversample: usize) -> Self {
        let len = range_oversample * frame.samples();
        let chirps = frame.chirps();
        let (re, im) = frame
            .channels()
            .par_iter()
            .map(|y| {
                let z = rows_forward(y, len);
                let mut re = vec![0.0; len * chirps];
                let mut im = vec![0.0; len * chirps];
                for ((m, i), v) in z.indexed_iter() {
                    re[i * chirps + m] = v.re;
                    im[i * chirps + m] = v.im;
                }
                (re, im)
            })
            .unzip();
        Self { re, im, chirps }
    }

    fn bin(&self, q: usize, i: u32) -> (&[f64], &[f64]) {
        let span = i as usize * self.chirps..(i as usize + 1) * self.chirps;
        (&self.re[q][span.clone()], &self.im[q][span])
    }
}

fn hop_decision(
    spectra: &BinMajorSpectra,
    table: &HopTable,
    bin: usize,
    acc_re: &mut [f64],
    acc_im: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    for q in 0..table.receivers() {
        let (idx, coeffs) = table.entry(bin, q);
        acc_re.fill(0.0);
        acc_im.fill(0.0);
        for (&i, c) in idx.iter().zip(coeffs) {
            let (zr, zi) = spectra.bin(q, i);
            for (((ar, ai), &zr), &zi) in acc_re.iter_mut().zip(acc_im.iter_mut()).zip(zr).zip(zi) {
                *ar += c.re * zr - c.im * zi;
                *ai += c.re * zi + c.im * zr;
            }
        }
        total += acc_re
            .iter()
            .zip(acc_im.iter())
            .map(|(r, i)| r * r + i * i)
            .sum::<f64>();
    }
    total
}

/// Location scan result with every bin's approximate decision value.
#[derive(Debug, Clone, PartialEq)]
pub struct HopScan {
    pub fix: GridFix,
    pub decisions: Vec<f64>,
    pub timings: Timings,
}

/// Maximizes the hopped decision over the table's lattice. Stages: `fft`, `hop-scan`.
pub fn hop_locate(
    frame: &Frame,
    table: &HopTable,
    grid: &LocationGrid,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
) -> Result<HopScan> {
    table.verify(cfg, geom, grid)?;
    frame.check_shape(cfg, geom)?;
    let mut timings = Timings::new();
    let spectra = timings.time("fft", || BinMajorSpectra::new(frame, table.oversample()));
    let chirps = frame.chirps();
    let decisions: Vec<f64> = timings.time("hop-scan", || {
        (0..table.bins())
            .into_par_iter()
            .with_min_len(MIN_PAR_LEN)
            .map_init(
                || (vec![0.0; chirps], vec![0.0; chirps]),
                |(re, im), bin| hop_decision(&spectra, table, bin, re, im),
            )
            .collect()
    });
    let index = argmax(&decisions).ok_or(Error::EmptyGrid)?;
    Ok(HopScan {
        fix: GridFix {
            index,
            point: grid.points()[index],
            value: decisions[index],
        },
        decisions,
        timings,
    })
}

/// Velocity scan at `x` reading the nearest bin of each receiver's zero-padded
/// Doppler FFT of `g_q`.
pub fn hop_velocity(
    frame: &Frame,
    x: Vec2,
    vgrid: &VelocityGrid,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
    doppler_oversample: usize,
) -> Result<GridFix> {
    if doppler_oversample == 0 {
        return Err(Error::InvalidConfig("doppler oversampling must be >= 1".into()));
    }
    if vgrid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = doppler_oversample * frame.chirps();
    let plan = forward_plan(n);
    let power: Vec<Vec<f64>> = range_correlations(frame, x, geom, cfg)?
        .into_iter()
        .map(|mut g| {
            g.resize(n, Complex64::default());
            plan.process(&mut g);
            g.into_iter().map(|z| z.norm_sqr()).collect()
        })
        .collect();
    let weights = doppler_weights(geom, cfg, x)?;
    let p = doppler_oversample as f64;
    let decisions: Vec<f64> = vgrid
        .points()
        .par_iter()
        .with_min_len(1024)
        .map(|&v| {
            weights
                .iter()
                .zip(&power)
                .map(|(w, pw)| pw[((w.dot(v) * p).round() as i64).rem_euclid(n as i64) as usize])
                .sum()
        })
        .collect();
    let index = argmax(&decisions).ok_or(Error::EmptyGrid)?;
    Ok(GridFix {
        index,
        point: vgrid.points()[index],
        value: decisions[index],
    })
}

/// Full grid-hopping pipeline. Stages: `fft`, `hop-scan`, `velocity`. The hop
/// table is built offline and is not part of these timings.
pub fn hop_estimate(
    frame: &Frame,
    table: &HopTable,
    grids: &Grids,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
    doppler_oversample: usize,
) -> Result<Estimate> {
    let scan = hop_locate(frame, table, &grids.location, geom, cfg)?;
    let mut timings = scan.timings;
    let vel = timings.time("velocity", || {
        hop_velocity(frame, scan.fix.point, &grids.velocity, geom, cfg, doppler_oversample)
    })?;
    Ok(Estimate {
        position: scan.fix.point,
        velocity: vel.point,
        location_index: scan.fix.index,
        velocity_index: vel.index,
        score: scan.fix.value,
        timings,
    })
}
