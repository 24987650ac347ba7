//! Indirect estimation: a range-Doppler map and peak per receiver, then
//! least-squares multilateration over the location and velocity lattices.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{argmin, Estimate, GridFix, Timings};
use crate::model::{doppler_weights, Grids, LocationGrid, SceneGeometry, Vec2, VelocityGrid, WaveformConfig};
use crate::spectral::{cols_forward, rows_forward};
use crate::synth::Frame;

const MIN_PAR_LEN: usize = 512;
const COINCIDENCE_TOL: f64 = 1e-9;

/// Modulus of the zero-padded 2D DFT of one receiver's measurement.
///
/// Rows are Doppler bins in ascending order over `[-Mc/2, Mc/2)`, columns are
/// range bins over `[0, Ms)`, with `P_d` and `P_r` points per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    values: Array2<f64>,
    range_axis: Vec<f64>,
    doppler_axis: Vec<f64>,
}

impl RangeDopplerMap {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
    pub fn range_axis(&self) -> &[f64] {
        &self.range_axis
    }
    pub fn doppler_axis(&self) -> &[f64] {
        &self.doppler_axis
    }
}

fn check_oversample(name: &str, p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidConfig(format!("{name} oversampling must be >= 1")));
    }
    Ok(())
}

/// Entry `(i, k)` is `|b(u_i)^H Y a*(r_k)|`.
pub fn range_doppler_map(
    y: &Array2<Complex64>,
    range_oversample: usize,
    doppler_oversample: usize,
) -> Result<RangeDopplerMap> {
    check_oversample("range", range_oversample)?;
    check_oversample("doppler", doppler_oversample)?;
    let (mc, ms) = y.dim();
    let n_r = range_oversample * ms;
    let n_d = doppler_oversample * mc;
    let spectrum = cols_forward(&rows_forward(y, n_r), n_d);

    let half = n_d / 2;
    let mut values = Array2::zeros((n_d, n_r));
    for (j, mut row) in values.rows_mut().into_iter().enumerate() {
        let src = spectrum.row((j + n_d - half) % n_d);
        for (v, z) in row.iter_mut().zip(src.iter()) {
            *v = z.norm();
        }
    }
    let range_axis = (0..n_r).map(|k| k as f64 / range_oversample as f64).collect();
    let doppler_axis = (0..n_d)
        .map(|j| (j as f64 - half as f64) / doppler_oversample as f64)
        .collect();
    Ok(RangeDopplerMap {
        values,
        range_axis,
        doppler_axis,
    })
}

/// `(range, doppler)` coordinates of the global maximum; ties go to the first
/// entry in row-major order.
pub fn extract_peak(map: &RangeDopplerMap) -> Result<(f64, f64)> {
    let values = map
        .values
        .as_slice()
        .ok_or_else(|| Error::Shape("range-Doppler map is not contiguous".into()))?;
    let mut best = None::<(usize, f64)>;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (i, _) = best.ok_or(Error::EmptyGrid)?;
    let cols = map.values.ncols();
    Ok((map.range_axis[i % cols], map.doppler_axis[i / cols]))
}

/// `argmin_x sum_q (S^r_q(x) - ranges[q])^2` over the location lattice.
pub fn multilaterate_location(
    ranges: &[f64],
    grid: &LocationGrid,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
) -> Result<GridFix> {
    if ranges.len() != geom.receivers() {
        return Err(Error::Shape(format!(
            "{} ranges for {} receivers",
            ranges.len(),
            geom.receivers()
        )));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let scale = cfg.range_scale();
    let (tx, rx) = (geom.tx(), geom.rx());
    let residuals: Vec<f64> = grid
        .points()
        .par_iter()
        .with_min_len(MIN_PAR_LEN)
        .map(|&p| {
            let d_tx = p.distance(tx);
            let mut acc = 0.0;
            let mut degenerate = d_tx < COINCIDENCE_TOL;
            for (&r, &sensor) in ranges.iter().zip(rx) {
                let d_rx = p.distance(sensor);
                degenerate |= d_rx < COINCIDENCE_TOL;
                let e = scale * (d_tx + d_rx) - r;
                acc += e * e;
            }
            if degenerate {
                f64::NAN
            } else {
                acc
            }
        })
        .collect();
    if let Some(i) = residuals.iter().position(|r| r.is_nan()) {
        return Err(Error::DegenerateGeometry(format!(
            "grid bin {i} coincides with a sensor"
        )));
    }
    let index = argmin(&residuals).ok_or(Error::EmptyGrid)?;
    Ok(GridFix {
        index,
        point: grid.points()[index],
        value: residuals[index],
    })
}

/// `argmin_v sum_q (S^u_q(x, v) - dopplers[q])^2` over the velocity lattice.
pub fn multilaterate_velocity(
    dopplers: &[f64],
    location: Vec2,
    vgrid: &VelocityGrid,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
) -> Result<GridFix> {
    if dopplers.len() != geom.receivers() {
        return Err(Error::Shape(format!(
            "{} dopplers for {} receivers",
            dopplers.len(),
            geom.receivers()
        )));
    }
    if vgrid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let weights = doppler_weights(geom, cfg, location)?;
    let residuals: Vec<f64> = vgrid
        .points()
        .par_iter()
        .with_min_len(MIN_PAR_LEN)
        .map(|&v| {
            weights
                .iter()
                .zip(dopplers)
                .map(|(w, &u)| {
                    let e = w.dot(v) - u;
                    e * e
                })
                .sum()
        })
        .collect();
    let index = argmin(&residuals).ok_or(Error::EmptyGrid)?;
    Ok(GridFix {
        index,
        point: vgrid.points()[index],
        value: residuals[index],
    })
}

/// Per-receiver peaks from the range-Doppler maps, as `(ranges, dopplers)`.
pub fn receiver_peaks(
    frame: &Frame,
    range_oversample: usize,
    doppler_oversample: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let peaks = frame
        .channels()
        .par_iter()
        .map(|y| extract_peak(&range_doppler_map(y, range_oversample, doppler_oversample)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(peaks.into_iter().unzip())
}

/// Full indirect pipeline. Stages: `fft` (maps and peaks) and `multilateration`.
pub fn indirect_estimate(
    frame: &Frame,
    grids: &Grids,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
    range_oversample: usize,
    doppler_oversample: usize,
) -> Result<Estimate> {
    frame.check_shape(cfg, geom)?;
    let mut timings = Timings::new();
    let (ranges, dopplers) = timings.time("fft", || receiver_peaks(frame, range_oversample, doppler_oversample))?;
    let (loc, vel) = timings.time("multilateration", || -> Result<_> {
        let loc = multilaterate_location(&ranges, &grids.location, geom, cfg)?;
        let vel = multilaterate_velocity(&dopplers, loc.point, &grids.velocity, geom, cfg)?;
        Ok((loc, vel))
    })?;
    Ok(Estimate {
        position: loc.point,
        velocity: vel.point,
        location_index: loc.index,
        velocity_index: vel.index,
        score: loc.value,
        timings,
    })
}
