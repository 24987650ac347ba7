//! Per-trial ground truth.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{Scenario, SceneMode};
use crate::error::{Error, Result};
use crate::model::{
    doppler_weights, sense, Extents, LocationGrid, SceneGeometry, Target, Vec2, VelocityGrid, WaveformConfig,
};
use crate::rng::substream_seed;

const SCENE_STREAM: u64 = 0x5CE4E;
const LATTICE_ATTEMPTS: usize = 10_000;

/// Sensor layout and target of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScene {
    pub geometry: SceneGeometry,
    pub target: Target,
}

/// Draws the scene for `trial`. The result depends only on the seed and the trial index.
/// `grid` is used by lattice mode, which places truths on its points.
pub fn trial_scene(sc: &Scenario, trial: usize, grid: &LocationGrid, vgrid: &VelocityGrid) -> Result<TrialScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(sc.seed, &[SCENE_STREAM, trial as u64]));
    let phase = if sc.scene.random_phase {
        rng.random::<f64>() * TAU
    } else {
        0.0
    };
    let alpha = Complex64::from_polar(sc.scene.amplitude, phase);
    let (geometry, position, velocity) = match &sc.scene.mode {
        SceneMode::Random => {
            let e = sc.scene.extents.shrink(sc.scene.margin);
            let x = Vec2::new(rng.random_range(e.x_min..e.x_max), rng.random_range(e.y_min..e.y_max));
            let speed = sc.scene.speed_bound * rng.random::<f64>().sqrt();
            let heading = rng.random::<f64>() * TAU;
            (
                sc.geometry.clone(),
                x,
                Vec2::new(speed * heading.cos(), speed * heading.sin()),
            )
        }
        SceneMode::Linear {
            start,
            velocity,
            frame_period_s,
        } => (
            sc.geometry.clone(),
            *start + *velocity * (trial as f64 * frame_period_s),
            *velocity,
        ),
        SceneMode::Track(track) => {
            let rec = track[trial];
            (sc.geometry.clone(), rec.position, rec.velocity)
        }
        SceneMode::Lattice { rx_distance, min_speed } => {
            let spec = LatticeSpec {
                cfg: &sc.waveform,
                tx: sc.geometry.tx(),
                receivers: sc.geometry.receivers(),
                extents: sc.scene.extents,
                rx_distance: *rx_distance,
                min_speed: *min_speed,
                doppler_oversample: sc.hop_doppler_oversample,
            };
            let (geom, x, v) = spec.draw(&mut rng, grid, vgrid)?;
            (geom, x, v)
        }
    };
    Ok(TrialScene {
        geometry,
        target: Target::new(position, velocity, alpha),
    })
}

/// Designs receiver placements around an on-grid truth so that every sensed
/// parameter falls exactly on an integer FFT bin.
pub struct LatticeSpec<'a> {
    pub cfg: &'a WaveformConfig,
    pub tx: Vec2,
    pub receivers: usize,
    pub extents: Extents,
    pub rx_distance: (f64, f64),
    pub min_speed: f64,
    /// Doppler oversampling of the single-bin velocity hop; scenes whose truth
    /// would tie with another velocity point at that resolution are redrawn.
    pub doppler_oversample: usize,
}

impl LatticeSpec<'_> {
    pub fn draw<R: Rng>(
        &self,
        rng: &mut R,
        grid: &LocationGrid,
        vgrid: &VelocityGrid,
    ) -> Result<(SceneGeometry, Vec2, Vec2)> {
        let moving: Vec<Vec2> = vgrid
            .points()
            .iter()
            .copied()
            .filter(|v| v.norm() >= self.min_speed)
            .collect();
        if grid.is_empty() || moving.is_empty() {
            return Err(Error::Scenario(
                "lattice mode needs a non-empty grid and velocities above min_speed".into(),
            ));
        }
        for _ in 0..LATTICE_ATTEMPTS {
            let x = grid.points()[rng.random_range(0..grid.len())];
            let v = moving[rng.random_range(0..moving.len())];
            if let Some(geom) = self.place(rng, x, v) {
                if self.accept(&geom, grid, vgrid, x, v) {
                    return Ok((geom, x, v));
                }
            }
        }
        Err(Error::Scenario(format!(
            "no lattice scene found in {LATTICE_ATTEMPTS} attempts; widen scene.rx_distance or the extents"
        )))
    }

    fn place<R: Rng>(&self, rng: &mut R, x: Vec2, v: Vec2) -> Option<SceneGeometry> {
        let cfg = self.cfg;
        let bin_m = cfg.range_resolution();
        let k_u = cfg.doppler_scale();
        let d_t = x.distance(self.tx);
        let u_t = (x - self.tx) * (1.0 / d_t);
        let speed = v.norm();
        let base = u_t.dot(v);
        let half = cfg.chirps() as f64 / 2.0;
        // Integer Doppler n needs <u_rx, v> = n / K - <u_tx, v> within [-|v|, |v|], strictly.
        let lo = ((k_u * (base - speed)).floor() as i64 + 1).max(-(half as i64));
        let hi = ((k_u * (base + speed)).ceil() as i64 - 1).min(half as i64 - 1);
        if hi < lo || ((hi - lo + 1) as usize) < self.receivers {
            return None;
        }
        let picks = sample(rng, (hi - lo + 1) as usize, self.receivers);
        let heading = v.y.atan2(v.x);
        let k_lo = ((d_t + self.rx_distance.0) / bin_m).ceil() as i64;
        let k_hi = (((d_t + self.rx_distance.1) / bin_m).floor() as i64).min(cfg.samples() as i64 - 1);
        if k_hi < k_lo {
            return None;
        }
        let mut rx = Vec::with_capacity(self.receivers);
        for n in picks.iter().map(|i| lo + i as i64) {
            let c = ((n as f64 / k_u - base) / speed).clamp(-1.0, 1.0);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let theta = heading + sign * c.acos();
            let k = rng.random_range(k_lo..=k_hi);
            let d_r = k as f64 * bin_m - d_t;
            rx.push(x - Vec2::new(theta.cos(), theta.sin()) * d_r);
        }
        SceneGeometry::new(self.tx, rx).ok()
    }

    fn accept(&self, geom: &SceneGeometry, grid: &LocationGrid, vgrid: &VelocityGrid, x: Vec2, v: Vec2) -> bool {
        let cfg = self.cfg;
        let e = self.extents;
        if geom.rx().iter().any(|&p| e.contains(p)) || geom.check_clear(grid.points()).is_err() {
            return false;
        }
        let corners = [
            Vec2::new(e.x_min, e.y_min),
            Vec2::new(e.x_min, e.y_max),
            Vec2::new(e.x_max, e.y_min),
            Vec2::new(e.x_max, e.y_max),
        ];
        // Bistatic range is convex in x, so the corners bound it over the extents.
        for c in corners {
            for q in 0..geom.receivers() {
                match crate::model::range_sensing(geom, cfg, q, c) {
                    Ok(r) if r < cfg.samples() as f64 - 1.0 => {}
                    _ => return false,
                }
            }
        }
        let Ok(sensed) = sense(geom, cfg, &Target::new(x, v, Complex64::new(1.0, 0.0))) else {
            return false;
        };
        let integral = |f: f64| (f - f.round()).abs() < 1e-9;
        if !sensed
            .iter()
            .all(|p| p.is_unambiguous(cfg) && integral(p.range) && integral(p.doppler))
        {
            return false;
        }
        let Ok(w) = doppler_weights(geom, cfg, x) else {
            return false;
        };
        if !well_spread(&w) {
            return false;
        }
        let p = self.doppler_oversample as f64;
        let n = (self.doppler_oversample * cfg.chirps()) as i64;
        let bins = |v: Vec2| -> Vec<i64> {
            w.iter()
                .map(|wq| ((wq.dot(v) * p).round() as i64).rem_euclid(n))
                .collect()
        };
        let truth = bins(v);
        vgrid.points().iter().filter(|&&o| o != v).all(|&o| bins(o) != truth)
    }
}

/// Smallest singular value of the stacked Doppler weights relative to the largest.
fn well_spread(w: &[Vec2]) -> bool {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in w {
        a += p.x * p.x;
        b += p.x * p.y;
        c += p.y * p.y;
    }
    let tr = a + c;
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let (big, small) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
    big > 0.0 && small / big > 0.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::scenario::parse_scenario;
    use crate::model::{build_location_grid, build_velocity_grid, range_sensing};
    use std::path::Path;

    fn scenario(extra: &str) -> Scenario {
        parse_scenario(&format!("seed = 11\ntrials = 8\n{extra}"), Path::new(".")).unwrap()
    }

    #[test]
    fn scenes_depend_only_on_seed_and_trial() {
        let sc = scenario("");
        let g = build_location_grid(sc.scene.extents, &sc.waveform, 1.0).unwrap();
        let vg = build_velocity_grid(sc.scene.speed_bound, &sc.waveform, 1.0).unwrap();
        let a = trial_scene(&sc, 3, &g, &vg).unwrap();
        assert_eq!(a, trial_scene(&sc, 3, &g, &vg).unwrap());
        assert_ne!(a, trial_scene(&sc, 4, &g, &vg).unwrap());
        assert!(sc.scene.extents.contains(a.target.position));
        assert!(a.target.velocity.norm() <= sc.scene.speed_bound);
    }

    #[test]
    fn lattice_scenes_hit_integer_bins() {
        let sc = scenario("[scene]\nmode = \"lattice\"\nx_range = [-3, 3]\ny_range = [10, 16]\n");
        let g = build_location_grid(sc.scene.extents, &sc.waveform, 2.0).unwrap();
        let vg = build_velocity_grid(sc.scene.speed_bound, &sc.waveform, 1.0).unwrap();
        for trial in 0..8 {
            let s = trial_scene(&sc, trial, &g, &vg).unwrap();
            assert!(g.points().contains(&s.target.position));
            assert!(vg.points().contains(&s.target.velocity));
            assert_eq!(s.geometry.tx(), sc.geometry.tx());
            for q in 0..3 {
                let r = range_sensing(&s.geometry, &sc.waveform, q, s.target.position).unwrap();
                assert!((r - r.round()).abs() < 1e-9);
                let d = s.geometry.rx()[q].distance(s.target.position);
                assert!((10.0..=25.0).contains(&d), "rx distance {d}");
            }
            for p in sense(&s.geometry, &sc.waveform, &s.target).unwrap() {
                assert!((p.doppler - p.doppler.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_track_advances_per_frame() {
        let sc = scenario("[scene]\nmode = \"linear\"\nstart = [0, 20]\nvelocity = [2, -1]\nframe_period_s = 0.5\n");
        let g = build_location_grid(sc.scene.extents, &sc.waveform, 1.0).unwrap();
        let vg = build_velocity_grid(sc.scene.speed_bound, &sc.waveform, 1.0).unwrap();
        let s = trial_scene(&sc, 2, &g, &vg).unwrap();
        assert_eq!(s.target.position, Vec2::new(2.0, 19.0));
        assert_eq!(s.target.velocity, Vec2::new(2.0, -1.0));
    }
}
