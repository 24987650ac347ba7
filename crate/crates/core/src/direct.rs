//! Direct estimation: every receiver's raw measurement is correlated against
//! the atoms each location bin would produce, and the fused energy is
//! maximized over the location lattice; velocity follows at the chosen bin.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{argmax, Estimate, GridFix, Timings};
use crate::model::{
    doppler_weights, fill_atom, range_sensing, ranges_into, Grids, LocationGrid, SceneGeometry, Vec2, VelocityGrid,
    WaveformConfig,
};
use crate::synth::Frame;

const MIN_PAR_LEN: usize = 16;
const MIN_PAR_BLOCKS: usize = 4;
/// Location bins sharing one pass over the frame rows.
const BLOCK: usize = 8;
const LANES: usize = 8;

/// Frame with real and imaginary parts in separate row-major planes.
pub(crate) struct SplitFrame {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    chirps: usize,
    samples: usize,
}

impl SplitFrame {
    pub(crate) fn new(frame: &Frame) -> Self {
        let (re, im) = frame
            .channels()
            .iter()
            .map(|y| {
                let re = y.iter().map(|z| z.re).collect();
                let im = y.iter().map(|z| z.im).collect();
                (re, im)
            })
            .unzip();
        Self {
            re,
            im,
            chirps: frame.chirps(),
            samples: frame.samples(),
        }
    }

    fn row(&self, q: usize, m: usize) -> (&[f64], &[f64]) {
        let span = m * self.samples..(m + 1) * self.samples;
        (&self.re[q][span.clone()], &self.im[q][span])
    }
}

fn pairwise(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// `sum_k (yr + j yi)_k * conj(ar + j ai)_k`, accumulated in fixed lane order.
#[inline]
fn correlate(yr: &[f64], yi: &[f64], ar: &[f64], ai: &[f64]) -> (f64, f64) {
    let mut acc_re = [0.0; LANES];
    let mut acc_im = [0.0; LANES];
    let chunks = yr.len() / LANES * LANES;
    for (((yr, yi), ar), ai) in yr[..chunks]
        .chunks_exact(LANES)
        .zip(yi[..chunks].chunks_exact(LANES))
        .zip(ar[..chunks].chunks_exact(LANES))
        .zip(ai[..chunks].chunks_exact(LANES))
    {
        let (yr, yi): (&[f64; LANES], &[f64; LANES]) = (yr.try_into().unwrap(), yi.try_into().unwrap());
        let (ar, ai): (&[f64; LANES], &[f64; LANES]) = (ar.try_into().unwrap(), ai.try_into().unwrap());
        for l in 0..LANES {
            acc_re[l] += yr[l] * ar[l] + yi[l] * ai[l];
            acc_im[l] += yi[l] * ar[l] - yr[l] * ai[l];
        }
    }
    let mut re = pairwise(&acc_re);
    let mut im = pairwise(&acc_im);
    for k in chunks..yr.len() {
        re += yr[k] * ar[k] + yi[k] * ai[k];
        im += yi[k] * ar[k] - yr[k] * ai[k];
    }
    (re, im)
}

/// Per-thread buffers for one range atom.
struct AtomScratch {
    atom: Vec<Complex64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl AtomScratch {
    fn new(n: usize) -> Self {
        Self {
            atom: vec![Complex64::default(); n],
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    fn load(&mut self, freq: f64) {
        fill_atom(&mut self.atom, freq);
        for ((z, re), im) in self.atom.iter().zip(&mut self.re).zip(&mut self.im) {
            *re = z.re;
            *im = z.im;
        }
    }
}

/// Fused decision for per-receiver ranges: receivers outer, chirps inner.
fn decision_for_ranges(split: &SplitFrame, ranges: &[f64], scratch: &mut AtomScratch) -> f64 {
    let mut total = 0.0;
    for (q, &r) in ranges.iter().enumerate() {
        scratch.load(r);
        for m in 0..split.chirps {
            let (yr, yi) = split.row(q, m);
            let (re, im) = correlate(yr, yi, &scratch.re, &scratch.im);
            total += re * re + im * im;
        }
    }
    total
}

/// [`decision_for_ranges`] for up to [`BLOCK`] bins at once, reusing each
/// frame row while it is in cache. Per-bin summation order is unchanged.
fn decision_block(
    split: &SplitFrame,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
    points: &[Vec2],
    scratch: &mut [AtomScratch],
    ranges: &mut [f64],
) -> Vec<f64> {
    let q_count = geom.receivers();
    for (p, r) in points.iter().zip(ranges.chunks_exact_mut(q_count)) {
        ranges_into(geom, cfg, *p, r);
    }
    let mut totals = vec![0.0; points.len()];
    for q in 0..q_count {
        for (b, s) in scratch.iter_mut().take(points.len()).enumerate() {
            s.load(ranges[b * q_count + q]);
        }
        for m in 0..split.chirps {
            let (yr, yi) = split.row(q, m);
            for (total, s) in totals.iter_mut().zip(scratch.iter()) {
                let (re, im) = correlate(yr, yi, &s.re, &s.im);
                *total += re * re + im * im;
            }
        }
    }
    totals
}

/// `sum_q sum_mc |<Y_q[mc], a(S^r_q(x))>|^2`.
pub fn location_decision(frame: &Frame, x: Vec2, geom: &SceneGeometry, cfg: &WaveformConfig) -> Result<f64> {
    frame.check_shape(cfg, geom)?;
    let ranges = (0..geom.receivers())
        .map(|q| range_sensing(geom, cfg, q, x))
        .collect::<Result<Vec<_>>>()?;
    let split = SplitFrame::new(frame);
    Ok(decision_for_ranges(
        &split,
        &ranges,
        &mut AtomScratch::new(frame.samples()),
    ))
}

/// Location scan result with the decision value of every bin.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationScan {
    pub fix: GridFix,
    pub decisions: Vec<f64>,
}

/// Maximizes [`location_decision`] over the lattice; ties go to the smallest index.
pub fn direct_locate(
    frame: &Frame,
    grid: &LocationGrid,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
) -> Result<LocationScan> {
    frame.check_shape(cfg, geom)?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    geom.check_clear(grid.points())?;
    let split = SplitFrame::new(frame);
    let q = geom.receivers();
    let blocks: Vec<Vec<f64>> = grid
        .points()
        .par_chunks(BLOCK)
        .with_min_len(MIN_PAR_BLOCKS)
        .map_init(
            || {
                let scratch: Vec<AtomScratch> = (0..BLOCK).map(|_| AtomScratch::new(split.samples)).collect();
                (scratch, vec![0.0; q * BLOCK])
            },
            |(scratch, ranges), points| decision_block(&split, geom, cfg, points, scratch, ranges),
        )
        .collect();
    let decisions: Vec<f64> = blocks.concat();
    let index = argmax(&decisions).ok_or(Error::EmptyGrid)?;
    Ok(LocationScan {
        fix: GridFix {
            index,
            point: grid.points()[index],
            value: decisions[index],
        },
        decisions,
    })
}

/// `g_q[mc] = <Y_q[mc], a(S^r_q(x))>` for every receiver: the slow-time
/// signal left after matching the fast-time atom of location `x`.
pub fn range_correlations(
    frame: &Frame,
    x: Vec2,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
) -> Result<Vec<Vec<Complex64>>> {
    frame.check_shape(cfg, geom)?;
    let split = SplitFrame::new(frame);
    let mut scratch = AtomScratch::new(frame.samples());
    (0..geom.receivers())
        .map(|q| {
            scratch.load(range_sensing(geom, cfg, q, x)?);
            Ok((0..split.chirps)
                .map(|m| {
                    let (yr, yi) = split.row(q, m);
                    let (re, im) = correlate(yr, yi, &scratch.re, &scratch.im);
                    Complex64::new(re, im)
                })
                .collect())
        })
        .collect()
}

/// Maximizes `sum_q |<g_q, b(S^u_q(x, v))>|^2` over the velocity lattice.
pub fn direct_velocity(
    frame: &Frame,
    x: Vec2,
    vgrid: &VelocityGrid,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
) -> Result<GridFix> {
    if vgrid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let g = range_correlations(frame, x, geom, cfg)?;
    let weights = doppler_weights(geom, cfg, x)?;
    let g_re: Vec<Vec<f64>> = g.iter().map(|g| g.iter().map(|z| z.re).collect()).collect();
    let g_im: Vec<Vec<f64>> = g.iter().map(|g| g.iter().map(|z| z.im).collect()).collect();
    let chirps = frame.chirps();
    let decisions: Vec<f64> = vgrid
        .points()
        .par_iter()
        .with_min_len(MIN_PAR_LEN)
        .map_init(
            || AtomScratch::new(chirps),
            |scratch, &v| {
                let mut total = 0.0;
                for (q, w) in weights.iter().enumerate() {
                    scratch.load(w.dot(v));
                    let (re, im) = correlate(&g_re[q], &g_im[q], &scratch.re, &scratch.im);
                    total += re * re + im * im;
                }
                total
            },
        )
        .collect();
    let index = argmax(&decisions).ok_or(Error::EmptyGrid)?;
    Ok(GridFix {
        index,
        point: vgrid.points()[index],
        value: decisions[index],
    })
}

/// Location scan then velocity scan. Stages: `location-scan`, `velocity-scan`.
pub fn direct_estimate(frame: &Frame, grids: &Grids, geom: &SceneGeometry, cfg: &WaveformConfig) -> Result<Estimate> {
    let mut timings = Timings::new();
    let loc = timings.time("location-scan", || direct_locate(frame, &grids.location, geom, cfg))?;
    let vel = timings.time("velocity-scan", || {
        direct_velocity(frame, loc.fix.point, &grids.velocity, geom, cfg)
    })?;
    Ok(Estimate {
        position: loc.fix.point,
        velocity: vel.point,
        location_index: loc.fix.index,
        velocity_index: vel.index,
        score: loc.fix.value,
        timings,
    })
}
