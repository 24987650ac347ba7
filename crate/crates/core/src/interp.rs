//! Off-grid Fourier atom interpolation and the offline hop table.
//!
//! A fast-time FFT zero-padded to `P_r * Ms` points evaluates the correlation
//! with the atoms `a(i / P_r)`. An off-grid atom `a(r)` is approximated as a
//! combination of `K` of those on-grid atoms, so `<y, a(r)>` can be read off
//! the FFT output as `c^T z_I`. The hop table stores `(I, c)` for every
//! location bin and receiver.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{binding_hash, fourier_atom, ranges_into, LocationGrid, SceneGeometry, WaveformConfig};

pub const HOP_TABLE_MAGIC: &[u8; 4] = b"GHT1";
pub const HOP_TABLE_VERSION: u32 = 1;

/// Positions closer than this to an FFT grid point (in FFT-bin units) are treated as on-grid.
const ON_GRID_TOL: f64 = 1e-12;

/// How an off-grid atom is expressed through on-grid ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpScheme {
    /// The single closest FFT bin.
    Nearest,
    /// The two bracketing bins with barycentric weights.
    Linear,
    /// Least-squares projection onto the nearest bin and its two neighbours.
    Poly3,
}

impl InterpScheme {
    pub const ALL: [InterpScheme; 3] = [InterpScheme::Nearest, InterpScheme::Linear, InterpScheme::Poly3];

    /// Number of FFT bins combined per approximation.
    pub fn support(self) -> usize {
        match self {
            InterpScheme::Nearest => 1,
            InterpScheme::Linear => 2,
            InterpScheme::Poly3 => 3,
        }
    }

    pub fn from_support(k: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.support() == k)
    }

    pub fn name(self) -> &'static str {
        match self {
            InterpScheme::Nearest => "nearest",
            InterpScheme::Linear => "linear",
            InterpScheme::Poly3 => "poly3",
        }
    }
}

impl fmt::Display for InterpScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown interpolation scheme {s:?}; valid: nearest, linear, poly3"
            ))
        })
    }
}

/// Ranges `i / P_r` probed by a fast-time FFT of length `P_r * Ms`.
pub fn fft_range_grid(samples: usize, oversample: usize) -> Vec<f64> {
    (0..samples * oversample)
        .map(|i| i as f64 / oversample as f64)
        .collect()
}

/// Index set into the oversampled FFT output and the matching coefficients,
/// oriented so that `<y, a(r)> ~ sum_k coeffs[k] * z[indices[k]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    pub indices: Vec<u32>,
    pub coeffs: Vec<Complex64>,
}

/// `sum_{m < n} exp(j 2 pi delta m / n)`.
fn dirichlet(delta: f64, n: usize) -> Complex64 {
    fourier_atom(delta, n).into_iter().sum()
}

type Mat3 = [[Complex64; 3]; 3];

fn det3(m: &Mat3) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a Hermitian positive (semi)definite 3x3 matrix by the adjugate,
/// with diagonal loading `1e-12 * trace` when it is close to singular.
fn invert_gram(mut g: Mat3) -> Mat3 {
    let trace = (g[0][0] + g[1][1] + g[2][2]).re;
    let scale = (trace / 3.0).powi(3);
    if det3(&g).norm() <= 1e-10 * scale {
        for (i, row) in g.iter_mut().enumerate() {
            row[i] += 1e-12 * trace;
        }
    }
    let det = det3(&g);
    let mut inv = [[Complex64::default(); 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            // cofactor of (j, i)
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = g[r0][c0] * g[r1][c1] - g[r0][c1] * g[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *slot = minor * sign / det;
        }
    }
    inv
}

/// Coefficient generator for one `(Ms, P_r, scheme)`; the three-atom Gram
/// inverse is computed once and shared by every query.
#[derive(Debug, Clone)]
pub struct Interpolator {
    samples: usize,
    oversample: usize,
    scheme: InterpScheme,
    gram_inv: Option<Mat3>,
}

impl Interpolator {
    pub fn new(samples: usize, oversample: usize, scheme: InterpScheme) -> Result<Self> {
        if oversample == 0 {
            return Err(Error::InvalidConfig("range oversampling must be >= 1".into()));
        }
        if samples < 2 {
            return Err(Error::InvalidConfig(format!(
                "samples per chirp must be >= 2, got {samples}"
            )));
        }
        let gram_inv = (scheme == InterpScheme::Poly3).then(|| {
            let offsets = Self::poly3_offsets(oversample);
            let mut g = [[Complex64::default(); 3]; 3];
            for (k, row) in g.iter_mut().enumerate() {
                for (l, slot) in row.iter_mut().enumerate() {
                    // <a(o_l), a(o_k)> as a row of A^H A
                    *slot = dirichlet(offsets[l] - offsets[k], samples);
                }
            }
            invert_gram(g)
        });
        Ok(Self {
            samples,
            oversample,
            scheme,
            gram_inv,
        })
    }

    fn poly3_offsets(oversample: usize) -> [f64; 3] {
        let step = 1.0 / oversample as f64;
        [-step, 0.0, step]
    }

    pub fn scheme(&self) -> InterpScheme {
        self.scheme
    }

    fn grid_len(&self) -> usize {
        self.samples * self.oversample
    }

    fn wrap(&self, i: i64) -> u32 {
        i.rem_euclid(self.grid_len() as i64) as u32
    }

    /// Coefficients for range `r` (bins); `r` is taken modulo `Ms`.
    pub fn coeffs(&self, r: f64) -> Interpolant {
        let n = self.grid_len() as f64;
        let pos = (r.rem_euclid(self.samples as f64) * self.oversample as f64).rem_euclid(n);
        let nearest = pos.round();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::default();
        let on_grid = (pos - nearest).abs() <= ON_GRID_TOL;
        match self.scheme {
            InterpScheme::Nearest => Interpolant {
                indices: vec![self.wrap(nearest as i64)],
                coeffs: vec![one],
            },
            InterpScheme::Linear => {
                let (lo, t) = if on_grid {
                    (nearest, 0.0)
                } else {
                    (pos.floor(), pos - pos.floor())
                };
                Interpolant {
                    indices: vec![self.wrap(lo as i64), self.wrap(lo as i64 + 1)],
                    coeffs: vec![Complex64::new(1.0 - t, 0.0), Complex64::new(t, 0.0)],
                }
            }
            InterpScheme::Poly3 => {
                let centre = nearest as i64;
                let indices = vec![self.wrap(centre - 1), self.wrap(centre), self.wrap(centre + 1)];
                if on_grid {
                    return Interpolant {
                        indices,
                        coeffs: vec![zero, one, zero],
                    };
                }
                let delta = (pos - nearest) / self.oversample as f64;
                let offsets = Self::poly3_offsets(self.oversample);
                let rhs = offsets.map(|o| dirichlet(delta - o, self.samples));
                let inv = self
                    .gram_inv
                    .as_ref()
                    .expect("poly3 interpolator holds its Gram inverse");
                let coeffs = inv
                    .iter()
                    .map(|row| row.iter().zip(&rhs).map(|(g, h)| g * h).sum::<Complex64>().conj())
                    .collect();
                Interpolant { indices, coeffs }
            }
        }
    }

    /// Relative atom approximation error `||a(r) - A c|| / ||a(r)||`.
    pub fn atom_residual(&self, r: f64) -> f64 {
        let interp = self.coeffs(r);
        let target = fourier_atom(r, self.samples);
        let mut approx = vec![Complex64::default(); self.samples];
        for (&i, &c) in interp.indices.iter().zip(&interp.coeffs) {
            let atom = fourier_atom(i as f64 / self.oversample as f64, self.samples);
            for (acc, a) in approx.iter_mut().zip(&atom) {
                // stored coefficients act on correlations, i.e. on conjugated atoms
                *acc += c.conj() * a;
            }
        }
        let err: f64 = target.iter().zip(&approx).map(|(t, a)| (t - a).norm_sqr()).sum();
        (err / self.samples as f64).sqrt()
    }
}

/// Index set and coefficients approximating the correlation with `a(r)`.
pub fn coeffs_for(r: f64, samples: usize, oversample: usize, scheme: InterpScheme) -> Result<Interpolant> {
    Ok(Interpolator::new(samples, oversample, scheme)?.coeffs(r))
}

/// Worst relative atom residual over `points` evenly spaced ranges in `[0, Ms)`.
pub fn worst_atom_residual(samples: usize, oversample: usize, scheme: InterpScheme, points: usize) -> Result<f64> {
    let interp = Interpolator::new(samples, oversample, scheme)?;
    Ok((0..points)
        .into_par_iter()
        .map(|k| interp.atom_residual(k as f64 * samples as f64 / points as f64))
        .reduce(|| 0.0, f64::max))
}

/// Per-bin, per-receiver interpolation data for one location lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct HopTable {
    scheme: InterpScheme,
    oversample: usize,
    samples: usize,
    receivers: usize,
    bins: usize,
    hash: u64,
    indices: Vec<u32>,
    coeffs: Vec<Complex64>,
}

/// Builds the hop table of a location lattice. Fails with the list of bins
/// whose sensed range leaves `[0, Ms)` for some receiver.
pub fn precompute_hop_table(
    grid: &LocationGrid,
    geom: &SceneGeometry,
    cfg: &WaveformConfig,
    oversample: usize,
    scheme: InterpScheme,
) -> Result<HopTable> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    geom.check_clear(grid.points())?;
    let interp = Interpolator::new(cfg.samples(), oversample, scheme)?;
    let q = geom.receivers();
    let ms = cfg.samples() as f64;
    let ranges: Vec<Vec<f64>> = grid
        .points()
        .par_iter()
        .map(|&p| {
            let mut r = vec![0.0; q];
            ranges_into(geom, cfg, p, &mut r);
            r
        })
        .collect();
    let bad: Vec<usize> = ranges
        .iter()
        .enumerate()
        .filter(|(_, r)| r.iter().any(|&r| !(0.0..ms).contains(&r)))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::BinsOutOfWindow { bins: bad });
    }
    let entries: Vec<Interpolant> = ranges
        .par_iter()
        .flat_map_iter(|r| r.iter().map(|&r| interp.coeffs(r)).collect::<Vec<_>>())
        .collect();
    let k = scheme.support();
    let mut indices = Vec::with_capacity(entries.len() * k);
    let mut coeffs = Vec::with_capacity(entries.len() * k);
    for e in entries {
        indices.extend(e.indices);
        coeffs.extend(e.coeffs);
    }
    Ok(HopTable {
        scheme,
        oversample,
        samples: cfg.samples(),
        receivers: q,
        bins: grid.len(),
        hash: binding_hash(cfg, geom, grid),
        indices,
        coeffs,
    })
}

impl HopTable {
    pub fn scheme(&self) -> InterpScheme {
        self.scheme
    }
    pub fn oversample(&self) -> usize {
        self.oversample
    }
    pub fn samples(&self) -> usize {
        self.samples
    }
    pub fn receivers(&self) -> usize {
        self.receivers
    }
    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn hash(&self) -> u64 {
        self.hash
    }
    /// Number of (bin, receiver) entries.
    pub fn entries(&self) -> usize {
        self.bins * self.receivers
    }
    pub fn coefficient_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Index set and coefficients of location bin `bin` at receiver `q`.
    pub fn entry(&self, bin: usize, q: usize) -> (&[u32], &[Complex64]) {
        let k = self.scheme.support();
        let start = (bin * self.receivers + q) * k;
        (&self.indices[start..start + k], &self.coeffs[start..start + k])
    }

    /// Fails unless the table was built for exactly this waveform, geometry and lattice.
    pub fn verify(&self, cfg: &WaveformConfig, geom: &SceneGeometry, grid: &LocationGrid) -> Result<()> {
        if self.receivers != geom.receivers() || self.samples != cfg.samples() || self.bins != grid.len() {
            return Err(Error::StaleHopTable(format!(
                "table is Q={} Ms={} bins={}, scene is Q={} Ms={} bins={}",
                self.receivers,
                self.samples,
                self.bins,
                geom.receivers(),
                cfg.samples(),
                grid.len()
            )));
        }
        let expect = binding_hash(cfg, geom, grid);
        if self.hash != expect {
            return Err(Error::StaleHopTable(format!(
                "table hash {:016x} does not match scene hash {expect:016x}",
                self.hash
            )));
        }
        Ok(())
    }

    /// Serializes in the GHT1 layout.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(HOP_TABLE_MAGIC)?;
        for v in [
            HOP_TABLE_VERSION,
            self.receivers as u32,
            self.bins as u32,
            self.scheme.support() as u32,
            self.oversample as u32,
            self.samples as u32,
        ] {
            w.write_u32::<LittleEndian>(v)?;
        }
        w.write_u64::<LittleEndian>(self.hash)?;
        let k = self.scheme.support();
        for (idx, c) in self.indices.chunks_exact(k).zip(self.coeffs.chunks_exact(k)) {
            for &i in idx {
                w.write_u32::<LittleEndian>(i)?;
            }
            for z in c {
                w.write_f64::<LittleEndian>(z.re)?;
                w.write_f64::<LittleEndian>(z.im)?;
            }
        }
        w.flush()
    }

    /// Parses a GHT1 stream, rejecting bad magic, versions, shapes and lengths.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Format(format!("reading hop table: {e}")))?;
        Self::parse(&bytes)
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 6 * 4 + 8;
        if bytes.len() < HEADER {
            return Err(Error::Format(format!(
                "hop table truncated: header needs {HEADER} bytes, found {}",
                bytes.len()
            )));
        }
        if &bytes[..4] != HOP_TABLE_MAGIC {
            return Err(Error::Format(format!("bad hop table magic {:?}", &bytes[..4])));
        }
        let mut cur = &bytes[4..];
        let mut next = || cur.read_u32::<LittleEndian>().expect("header length checked");
        let (version, receivers, bins, k, oversample, samples) = (next(), next(), next(), next(), next(), next());
        let hash = cur.read_u64::<LittleEndian>().expect("header length checked");
        if version != HOP_TABLE_VERSION {
            return Err(Error::Format(format!("unsupported hop table version {version}")));
        }
        let scheme = InterpScheme::from_support(k as usize)
            .ok_or_else(|| Error::Format(format!("unsupported interpolation support K={k}")))?;
        if oversample == 0 || samples < 2 || receivers == 0 {
            return Err(Error::Format(format!(
                "invalid hop table shape: Q={receivers} P_r={oversample} Ms={samples}"
            )));
        }
        let (receivers, bins, k, oversample, samples) = (
            receivers as usize,
            bins as usize,
            k as usize,
            oversample as usize,
            samples as usize,
        );
        let records = bins
            .checked_mul(receivers)
            .ok_or_else(|| Error::Format("hop table size overflows".into()))?;
        let expected = HEADER as u128 + records as u128 * (k as u128 * 20);
        if bytes.len() as u128 != expected {
            return Err(Error::Format(format!(
                "hop table payload: expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let limit = (oversample * samples) as u32;
        let mut indices = Vec::with_capacity(records * k);
        let mut coeffs = Vec::with_capacity(records * k);
        for _ in 0..records {
            for _ in 0..k {
                let i = cur.read_u32::<LittleEndian>().expect("length checked");
                if i >= limit {
                    return Err(Error::Format(format!("hop table index {i} outside [0, {limit})")));
                }
                indices.push(i);
            }
            for _ in 0..k {
                let re = cur.read_f64::<LittleEndian>().expect("length checked");
                let im = cur.read_f64::<LittleEndian>().expect("length checked");
                coeffs.push(Complex64::new(re, im));
            }
        }
        Ok(Self {
            scheme,
            oversample,
            samples,
            receivers,
            bins,
            hash,
            indices,
            coeffs,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_location_grid, Extents, Vec2};

    fn assert_unit(interp: &Interpolant, hot: u32) {
        for (&i, c) in interp.indices.iter().zip(&interp.coeffs) {
            let expect = if i == hot { 1.0 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-12, "{interp:?}");
        }
    }

    #[test]
    fn fft_grid_examples() {
        assert_eq!(fft_range_grid(4, 1), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(fft_range_grid(4, 2), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]);
        let g = fft_range_grid(128, 4);
        assert!(g.windows(2).all(|w| w[1] - w[0] == 0.25));
    }

    #[test]
    fn on_grid_ranges_give_unit_coefficients() {
        for scheme in InterpScheme::ALL {
            for p in [1, 2, 4, 8] {
                let interp = Interpolator::new(128, p, scheme).unwrap();
                for &r in &[0.0, 3.0, 7.25, 100.5, 127.75] {
                    let pos = r * p as f64;
                    if pos.fract() != 0.0 {
                        continue;
                    }
                    let c = interp.coeffs(r);
                    assert_eq!(c.indices.len(), scheme.support());
                    assert_unit(&c, pos as u32);
                }
            }
        }
    }

    #[test]
    fn linear_midpoint_is_half_half() {
        let c = coeffs_for(5.5, 16, 1, InterpScheme::Linear).unwrap();
        assert_eq!(c.indices, vec![5, 6]);
        assert_eq!(c.coeffs, vec![Complex64::new(0.5, 0.0); 2]);
    }

    #[test]
    fn nearest_and_wraparound_indices() {
        let c = coeffs_for(15.8, 16, 1, InterpScheme::Nearest).unwrap();
        assert_eq!(c.indices, vec![0]);
        let c = coeffs_for(15.6, 16, 1, InterpScheme::Linear).unwrap();
        assert_eq!(c.indices, vec![15, 0]);
        let c = coeffs_for(0.1, 16, 2, InterpScheme::Poly3).unwrap();
        assert_eq!(c.indices, vec![31, 0, 1]);
    }

    #[test]
    fn three_atom_beats_linear_off_grid() {
        let p = 2;
        let r = 40.0 + 0.25 / p as f64;
        let lin = Interpolator::new(128, p, InterpScheme::Linear)
            .unwrap()
            .atom_residual(r);
        let poly = Interpolator::new(128, p, InterpScheme::Poly3).unwrap().atom_residual(r);
        assert!(poly < lin, "poly3 {poly} vs linear {lin}");
    }

    #[test]
    fn correlation_error_is_bounded_by_atom_residual() {
        let interp = Interpolator::new(128, 4, InterpScheme::Poly3).unwrap();
        // deterministic pseudo-random unit-norm y
        let mut y: Vec<Complex64> = (0..128)
            .map(|m| Complex64::new(((m * 37 + 11) % 17) as f64 - 8.0, ((m * 53 + 5) % 13) as f64 - 6.0))
            .collect();
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        y.iter_mut().for_each(|z| *z /= norm);
        let z: Vec<Complex64> = fft_range_grid(128, 4)
            .iter()
            .map(|&rb| y.iter().zip(fourier_atom(rb, 128)).map(|(y, a)| y * a.conj()).sum())
            .collect();
        for &r in &[3.1, 17.77, 64.01, 127.9] {
            let c = interp.coeffs(r);
            let approx: Complex64 = c.indices.iter().zip(&c.coeffs).map(|(&i, c)| c * z[i as usize]).sum();
            let exact: Complex64 = y.iter().zip(fourier_atom(r, 128)).map(|(y, a)| y * a.conj()).sum();
            // ||a(r)|| = sqrt(Ms) and the residual is relative to it
            let bound = interp.atom_residual(r) * (128f64).sqrt();
            assert!((approx - exact).norm() <= bound * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn table_counts_and_determinism() {
        let cfg = WaveformConfig::with_speed_of_light(24e9, 250e6, 128e-6, 128, 128, 3e8).unwrap();
        let geom = SceneGeometry::new(
            Vec2::ZERO,
            vec![Vec2::new(-8.0, 1.0), Vec2::new(9.0, 2.0), Vec2::new(0.0, 15.0)],
        )
        .unwrap();
        let grid = build_location_grid(Extents::new(0.0, 3.0, 5.0, 6.2), &cfg, 1.0).unwrap();
        assert_eq!(grid.len(), 18);
        let t = precompute_hop_table(&grid, &geom, &cfg, 4, InterpScheme::Poly3).unwrap();
        assert_eq!(t.entries(), 54);
        assert_eq!(t.coefficient_count(), 162);
        let again = precompute_hop_table(&grid, &geom, &cfg, 4, InterpScheme::Poly3).unwrap();
        assert_eq!(t, again);
        t.verify(&cfg, &geom, &grid).unwrap();
        let other = build_location_grid(Extents::new(0.0, 3.0, 5.1, 6.3), &cfg, 1.0).unwrap();
        assert!(matches!(t.verify(&cfg, &geom, &other), Err(Error::StaleHopTable(_))));
    }

    #[test]
    fn out_of_window_bins_are_listed() {
        let cfg = WaveformConfig::with_speed_of_light(24e9, 250e6, 128e-6, 16, 16, 3e8).unwrap();
        // Ms = 16 bins covers 19.2 m of summed path.
        let geom = SceneGeometry::new(Vec2::ZERO, vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let grid = build_location_grid(Extents::new(2.0, 12.0, 0.0, 0.6), &cfg, 1.0).unwrap();
        match precompute_hop_table(&grid, &geom, &cfg, 1, InterpScheme::Nearest) {
            Err(Error::BinsOutOfWindow { bins }) => {
                assert!(!bins.is_empty());
                for &b in &bins {
                    assert!(grid.points()[b].x > 8.0);
                }
            }
            other => panic!("expected out-of-window error, got {other:?}"),
        }
    }

    #[test]
    fn ght1_rejects_corruption() {
        let cfg = WaveformConfig::k_band();
        let geom = SceneGeometry::new(Vec2::ZERO, vec![Vec2::new(-8.0, 1.0), Vec2::new(9.0, 2.0)]).unwrap();
        let grid = build_location_grid(Extents::new(0.0, 1.0, 5.0, 6.0), &cfg, 1.0).unwrap();
        let t = precompute_hop_table(&grid, &geom, &cfg, 2, InterpScheme::Linear).unwrap();
        let mut bytes = Vec::new();
        t.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 36 + t.entries() * 2 * 20);
        assert_eq!(HopTable::read_from(&bytes[..]).unwrap(), t);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(HopTable::read_from(&bad[..]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 0;
        assert!(HopTable::read_from(&bad[..]).is_err());
        assert!(HopTable::read_from(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[36..40].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(HopTable::read_from(&bad[..]).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in InterpScheme::ALL {
            assert_eq!(s.name().parse::<InterpScheme>().unwrap(), s);
            assert_eq!(InterpScheme::from_support(s.support()), Some(s));
        }
        assert!("cubic".parse::<InterpScheme>().is_err());
    }
}
