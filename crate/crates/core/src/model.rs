//! Waveform and scene description, the sensing functions that map a target's
//! location and velocity onto per-receiver range and Doppler, and the Fourier
//! atoms those sensed parameters imprint on a frame.
//!
//! Sensed parameters are expressed in FFT-bin units: one range bin is `c / B`
//! meters of summed TX-target-RX path and one Doppler bin is one cycle of
//! slow-time phase across the whole frame. With these units an integer range
//! lands exactly on a fast-time FFT bin.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances below this (meters) count as coincident positions.
const COINCIDENCE_TOL: f64 = 1e-9;

/// Atom phases generated by recurrence are re-anchored on the exact value this often.
const RENORM_PERIOD: usize = 1024;

/// A point or direction in the 2D ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

/// Chirp modulation and frame shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformConfig {
    carrier_hz: f64,
    bandwidth_hz: f64,
    chirp_duration_s: f64,
    chirps: usize,
    samples: usize,
    speed_of_light: f64,
}

impl WaveformConfig {
    pub fn new(
        carrier_hz: f64,
        bandwidth_hz: f64,
        chirp_duration_s: f64,
        chirps: usize,
        samples: usize,
    ) -> Result<Self> {
        Self::with_speed_of_light(
            carrier_hz,
            bandwidth_hz,
            chirp_duration_s,
            chirps,
            samples,
            SPEED_OF_LIGHT,
        )
    }

    pub fn with_speed_of_light(
        carrier_hz: f64,
        bandwidth_hz: f64,
        chirp_duration_s: f64,
        chirps: usize,
        samples: usize,
        speed_of_light: f64,
    ) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("carrier frequency", carrier_hz)?;
        positive("bandwidth", bandwidth_hz)?;
        positive("chirp duration", chirp_duration_s)?;
        positive("speed of light", speed_of_light)?;
        if chirps < 2 {
            return Err(Error::InvalidConfig(format!(
                "chirps per frame must be >= 2, got {chirps}"
            )));
        }
        if samples < 2 {
            return Err(Error::InvalidConfig(format!(
                "samples per chirp must be >= 2, got {samples}"
            )));
        }
        let cfg = Self {
            carrier_hz,
            bandwidth_hz,
            chirp_duration_s,
            chirps,
            samples,
            speed_of_light,
        };
        let res = cfg.range_resolution();
        if !(res.is_finite() && res > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "range resolution {res} is not finite and positive"
            )));
        }
        Ok(cfg)
    }

    /// K-band setup: 24 GHz carrier, 250 MHz sweep, 128 us chirps, 128 x 128 frames.
    pub fn k_band() -> Self {
        Self::new(24e9, 250e6, 128e-6, 128, 128).expect("constants are valid")
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }
    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }
    pub fn chirp_duration_s(&self) -> f64 {
        self.chirp_duration_s
    }
    /// Mc: chirps per frame (slow-time length).
    pub fn chirps(&self) -> usize {
        self.chirps
    }
    /// Ms: samples per chirp (fast-time length).
    pub fn samples(&self) -> usize {
        self.samples
    }
    pub fn speed_of_light(&self) -> f64 {
        self.speed_of_light
    }

    /// Monostatic-equivalent range resolution c / (2B), meters.
    pub fn range_resolution(&self) -> f64 {
        self.speed_of_light / (2.0 * self.bandwidth_hz)
    }

    /// Velocity spacing that moves a monostatic target by one Doppler bin, m/s.
    pub fn velocity_resolution(&self) -> f64 {
        self.speed_of_light / (2.0 * self.carrier_hz * self.chirp_duration_s * self.chirps as f64)
    }

    /// Range bins per meter of summed path, B / c.
    pub fn range_scale(&self) -> f64 {
        self.bandwidth_hz / self.speed_of_light
    }

    /// Doppler bins per m/s of path-rate, f0 Tc Mc / c.
    pub fn doppler_scale(&self) -> f64 {
        self.carrier_hz * self.chirp_duration_s * self.chirps as f64 / self.speed_of_light
    }
}

/// One transmitter and `Q >= 2` receivers in the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    tx: Vec2,
    rx: Vec<Vec2>,
}

impl SceneGeometry {
    pub fn new(tx: Vec2, rx: Vec<Vec2>) -> Result<Self> {
        if rx.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "at least 2 receivers are required, got {}",
                rx.len()
            )));
        }
        if !tx.is_finite() || rx.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("sensor positions must be finite".into()));
        }
        for (q, &p) in rx.iter().enumerate() {
            if p.distance(tx) < COINCIDENCE_TOL {
                return Err(Error::DegenerateGeometry(format!(
                    "receiver {q} coincides with the transmitter"
                )));
            }
            for (k, &other) in rx.iter().enumerate().skip(q + 1) {
                if p.distance(other) < COINCIDENCE_TOL {
                    return Err(Error::DegenerateGeometry(format!("receivers {q} and {k} coincide")));
                }
            }
        }
        Ok(Self { tx, rx })
    }

    pub fn tx(&self) -> Vec2 {
        self.tx
    }

    pub fn rx(&self) -> &[Vec2] {
        &self.rx
    }

    pub fn receivers(&self) -> usize {
        self.rx.len()
    }

    /// Same sensors with the receivers reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Self::new(self.tx, order.iter().map(|&q| self.rx[q]).collect())
    }

    fn check_location(&self, q: usize, x: Vec2) -> Result<()> {
        if q >= self.rx.len() {
            return Err(Error::InvalidConfig(format!(
                "receiver index {q} out of range (Q = {})",
                self.rx.len()
            )));
        }
        if !x.is_finite() {
            return Err(Error::InvalidConfig(format!("non-finite location {x:?}")));
        }
        if x.distance(self.tx) < COINCIDENCE_TOL {
            return Err(Error::DegenerateGeometry(format!(
                "location {x:?} coincides with the transmitter"
            )));
        }
        if x.distance(self.rx[q]) < COINCIDENCE_TOL {
            return Err(Error::DegenerateGeometry(format!(
                "location {x:?} coincides with receiver {q}"
            )));
        }
        Ok(())
    }

    /// Rejects any point that sits on a sensor.
    pub fn check_clear(&self, points: &[Vec2]) -> Result<()> {
        for (i, &p) in points.iter().enumerate() {
            let hit = p.distance(self.tx) < COINCIDENCE_TOL || self.rx.iter().any(|&r| p.distance(r) < COINCIDENCE_TOL);
            if hit {
                return Err(Error::DegenerateGeometry(format!(
                    "grid bin {i} at {p:?} coincides with a sensor"
                )));
            }
        }
        Ok(())
    }
}

/// A point scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub position: Vec2,
    pub velocity: Vec2,
    pub alpha: Complex64,
}

impl Target {
    pub fn new(position: Vec2, velocity: Vec2, alpha: Complex64) -> Self {
        Self {
            position,
            velocity,
            alpha,
        }
    }
}

/// Range and Doppler seen by one receiver, in FFT-bin units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensedParams {
    pub range: f64,
    pub doppler: f64,
}

impl SensedParams {
    /// True when the parameters fall inside `[0, Ms) x [-Mc/2, Mc/2)`.
    pub fn is_unambiguous(&self, cfg: &WaveformConfig) -> bool {
        let half = cfg.chirps() as f64 / 2.0;
        self.range >= 0.0 && self.range < cfg.samples() as f64 && self.doppler >= -half && self.doppler < half
    }
}

/// Sensed range of receiver `q` for a target at `x`: `(B/c) * (|x - tx| + |x - rx_q|)`.
pub fn range_sensing(geom: &SceneGeometry, cfg: &WaveformConfig, q: usize, x: Vec2) -> Result<f64> {
    geom.check_location(q, x)?;
    Ok(range_unchecked(geom, cfg, q, x))
}

pub(crate) fn range_unchecked(geom: &SceneGeometry, cfg: &WaveformConfig, q: usize, x: Vec2) -> f64 {
    cfg.range_scale() * (x.distance(geom.tx) + x.distance(geom.rx[q]))
}

/// Sensed ranges of every receiver for a location, written into `out`.
pub(crate) fn ranges_into(geom: &SceneGeometry, cfg: &WaveformConfig, x: Vec2, out: &mut [f64]) {
    let scale = cfg.range_scale();
    let d_tx = x.distance(geom.tx);
    for (o, &rx) in out.iter_mut().zip(&geom.rx) {
        *o = scale * (d_tx + x.distance(rx));
    }
}

/// Sensed Doppler of receiver `q`: `(f0 Tc Mc / c) * <u_tx + u_rx, v>`, with the
/// unit vectors pointing from each sensor toward `x`.
pub fn speed_sensing(geom: &SceneGeometry, cfg: &WaveformConfig, q: usize, x: Vec2, v: Vec2) -> Result<f64> {
    geom.check_location(q, x)?;
    if !v.is_finite() {
        return Err(Error::InvalidConfig(format!("non-finite velocity {v:?}")));
    }
    Ok(doppler_weight(geom, cfg, q, x).dot(v))
}

fn doppler_weight(geom: &SceneGeometry, cfg: &WaveformConfig, q: usize, x: Vec2) -> Vec2 {
    let to_tx = x - geom.tx;
    let to_rx = x - geom.rx[q];
    let dir = to_tx * (1.0 / to_tx.norm()) + to_rx * (1.0 / to_rx.norm());
    dir * cfg.doppler_scale()
}

/// Per-receiver vectors `w_q` such that the sensed Doppler at `x` is `<w_q, v>`.
pub fn doppler_weights(geom: &SceneGeometry, cfg: &WaveformConfig, x: Vec2) -> Result<Vec<Vec2>> {
    (0..geom.receivers())
        .map(|q| {
            geom.check_location(q, x)?;
            Ok(doppler_weight(geom, cfg, q, x))
        })
        .collect()
}

/// Sensed parameters of every receiver for one target.
pub fn sense(geom: &SceneGeometry, cfg: &WaveformConfig, target: &Target) -> Result<Vec<SensedParams>> {
    (0..geom.receivers())
        .map(|q| {
            Ok(SensedParams {
                range: range_sensing(geom, cfg, q, target.position)?,
                doppler: speed_sensing(geom, cfg, q, target.position, target.velocity)?,
            })
        })
        .collect()
}

/// `exp(j 2 pi freq m / n)` for `m = 0..n`.
pub fn fourier_atom(freq: f64, n: usize) -> Vec<Complex64> {
    let nf = n as f64;
    (0..n)
        .map(|m| {
            let cycles = (freq * m as f64 / nf).rem_euclid(1.0);
            Complex64::from_polar(1.0, TAU * cycles)
        })
        .collect()
}

/// Fast-time atom `a(r)`, `a_m = exp(j 2 pi r m / Ms)`.
pub fn range_atom(r: f64, samples: usize) -> Vec<Complex64> {
    fourier_atom(r, samples)
}

/// Slow-time atom `b(u)`, `b_m = exp(j 2 pi u m / Mc)`.
pub fn doppler_atom(u: f64, chirps: usize) -> Vec<Complex64> {
    fourier_atom(u, chirps)
}

/// Fills `buf` with the atom of frequency `freq` over `buf.len()` points using a
/// phasor recurrence, re-anchored on the exact phase every `RENORM_PERIOD` steps.
pub(crate) fn fill_atom(buf: &mut [Complex64], freq: f64) {
    let n = buf.len() as f64;
    let step = Complex64::from_polar(1.0, TAU * (freq / n).rem_euclid(1.0));
    let mut z = Complex64::new(1.0, 0.0);
    for (m, slot) in buf.iter_mut().enumerate() {
        if m % RENORM_PERIOD == 0 && m > 0 {
            z = Complex64::from_polar(1.0, TAU * (freq * m as f64 / n).rem_euclid(1.0));
        }
        *slot = z;
        z *= step;
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extents {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Shrinks every side by `margin`.
    pub fn shrink(&self, margin: f64) -> Self {
        Self::new(
            self.x_min + margin,
            self.x_max - margin,
            self.y_min + margin,
            self.y_max - margin,
        )
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("empty or non-finite extents {self:?}")))
        }
    }
}

/// Points per axis when stepping `spacing` from 0 across `span`.
fn axis_count(span: f64, spacing: f64) -> usize {
    (span / spacing + 1e-9).floor() as usize + 1
}

/// Uniform rectangular location lattice. Bin `i` sits at column `i % nx`, row `i / nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationGrid {
    points: Vec<Vec2>,
    nx: usize,
    ny: usize,
    spacing: f64,
    density: f64,
    extents: Extents,
}

/// Location lattice with spacing `c / (2B) / density` anchored at the lower-left corner of `extents`.
pub fn build_location_grid(extents: Extents, cfg: &WaveformConfig, density: f64) -> Result<LocationGrid> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::InvalidConfig(format!("grid density must be > 0, got {density}")));
    }
    extents.validate()?;
    let spacing = cfg.range_resolution() / density;
    let nx = axis_count(extents.x_max - extents.x_min, spacing);
    let ny = axis_count(extents.y_max - extents.y_min, spacing);
    let mut points = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            points.push(Vec2::new(
                extents.x_min + ix as f64 * spacing,
                extents.y_min + iy as f64 * spacing,
            ));
        }
    }
    Ok(LocationGrid {
        points,
        nx,
        ny,
        spacing,
        density,
        extents,
    })
}

impl LocationGrid {
    pub fn points(&self) -> &[Vec2] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn density(&self) -> f64 {
        self.density
    }
    pub fn extents(&self) -> Extents {
        self.extents
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    /// (column, row) of bin `i`.
    pub fn cell(&self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }
    /// Bin closest to `p`, clamped to the lattice.
    pub fn nearest(&self, p: Vec2) -> usize {
        let snap = |v: f64, lo: f64, n: usize| (((v - lo) / self.spacing).round().max(0.0) as usize).min(n - 1);
        let ix = snap(p.x, self.extents.x_min, self.nx);
        let iy = snap(p.y, self.extents.y_min, self.ny);
        iy * self.nx + ix
    }
}

/// Uniform square velocity lattice over `[-bound, bound]^2`, centered on zero velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    points: Vec<Vec2>,
    half_width: usize,
    spacing: f64,
    density: f64,
    bound: f64,
}

/// Velocity lattice with spacing `c / (2 f0 Tc Mc) / density`.
pub fn build_velocity_grid(bound: f64, cfg: &WaveformConfig, density: f64) -> Result<VelocityGrid> {
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::InvalidConfig(format!("speed bound must be > 0, got {bound}")));
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::InvalidConfig(format!("grid density must be > 0, got {density}")));
    }
    let spacing = cfg.velocity_resolution() / density;
    let half_width = (bound / spacing + 1e-9).floor() as usize;
    let side = 2 * half_width + 1;
    let mut points = Vec::with_capacity(side * side);
    for iy in 0..side {
        for ix in 0..side {
            points.push(Vec2::new(
                (ix as f64 - half_width as f64) * spacing,
                (iy as f64 - half_width as f64) * spacing,
            ));
        }
    }
    Ok(VelocityGrid {
        points,
        half_width,
        spacing,
        density,
        bound,
    })
}

impl VelocityGrid {
    pub fn points(&self) -> &[Vec2] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn density(&self) -> f64 {
        self.density
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }
    /// Bins per axis.
    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }
    /// Index of the zero-velocity bin.
    pub fn zero_index(&self) -> usize {
        self.half_width * self.side() + self.half_width
    }
    /// Index of the lattice point `(kx, ky) * spacing`, if inside the lattice.
    pub fn index_of(&self, kx: i64, ky: i64) -> Option<usize> {
        let h = self.half_width as i64;
        if kx.abs() > h || ky.abs() > h {
            return None;
        }
        Some(((ky + h) * (2 * h + 1) + (kx + h)) as usize)
    }
}

/// The location and velocity lattices an estimator scans.
#[derive(Debug, Clone)]
pub struct Grids {
    pub location: LocationGrid,
    pub velocity: VelocityGrid,
}

/// Stable 64-bit digest of everything a hop table depends on: waveform,
/// speed of light, sensor positions and the location lattice.
pub fn binding_hash(cfg: &WaveformConfig, geom: &SceneGeometry, grid: &LocationGrid) -> u64 {
    let mut h = Sha256::new();
    h.update(b"gridhop-binding-v1");
    for v in [
        cfg.carrier_hz,
        cfg.bandwidth_hz,
        cfg.chirp_duration_s,
        cfg.speed_of_light,
    ] {
        h.update(v.to_le_bytes());
    }
    h.update((cfg.chirps as u64).to_le_bytes());
    h.update((cfg.samples as u64).to_le_bytes());
    h.update((geom.rx.len() as u64).to_le_bytes());
    for p in std::iter::once(&geom.tx).chain(&geom.rx) {
        h.update(p.x.to_le_bytes());
        h.update(p.y.to_le_bytes());
    }
    h.update((grid.points.len() as u64).to_le_bytes());
    for p in &grid.points {
        h.update(p.x.to_le_bytes());
        h.update(p.y.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}
