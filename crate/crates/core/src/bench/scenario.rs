//! Scenario files: TOML with a few top-level keys and optional sections.
//! Every key except `seed` and `trials` has a default.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::frame_io::{read_truth_track, TruthRecord};
use crate::interp::InterpScheme;
use crate::model::{Extents, SceneGeometry, Vec2, WaveformConfig, SPEED_OF_LIGHT};

pub const DEFAULT_DENSITIES: [f64; 3] = [1.0, 2.0, 4.0];
pub const DEFAULT_SNR_DB: [f64; 3] = [0.0, 5.0, 10.0];

/// 0.2 m to 3.0 m in 0.2 m steps.
pub fn default_thresholds() -> Vec<f64> {
    (1..=15).map(|i| i as f64 / 5.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Indirect,
    Direct,
    Hop { scheme: InterpScheme, oversample: usize },
}

/// A configured estimator and the label it is reported under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algorithm {
    pub label: String,
    pub kind: AlgorithmKind,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl Algorithm {
    /// Parses `indirect`, `direct`, `hop` (scheme and oversampling from
    /// `hop_default`) or `hop:<scheme>:<oversample>`.
    pub fn parse(name: &str, hop_default: (InterpScheme, usize)) -> Result<Self> {
        let unknown = || Error::UnknownAlgorithm { name: name.to_string() };
        let kind = match name {
            "indirect" => AlgorithmKind::Indirect,
            "direct" => AlgorithmKind::Direct,
            "hop" => AlgorithmKind::Hop {
                scheme: hop_default.0,
                oversample: hop_default.1,
            },
            _ => {
                let mut parts = name.split(':');
                if parts.next() != Some("hop") {
                    return Err(unknown());
                }
                let scheme = parts.next().ok_or_else(unknown)?.parse().map_err(|_| unknown())?;
                let oversample: usize = parts.next().ok_or_else(unknown)?.parse().map_err(|_| unknown())?;
                if parts.next().is_some() || oversample == 0 {
                    return Err(unknown());
                }
                return Ok(Self {
                    label: format!("hop:{scheme}:{oversample}"),
                    kind: AlgorithmKind::Hop { scheme, oversample },
                });
            }
        };
        Ok(Self {
            label: name.to_string(),
            kind,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneMode {
    /// Off-grid truths drawn uniformly inside the extents, speeds uniform in a disk.
    Random,
    /// On-grid truths with per-trial receiver placement so that every sensed
    /// range and Doppler is an integer bin.
    Lattice { rx_distance: (f64, f64), min_speed: f64 },
    /// Constant-velocity trajectory, one frame per period.
    Linear {
        start: Vec2,
        velocity: Vec2,
        frame_period_s: f64,
    },
    /// Ground truth replayed from a track file.
    Track(Vec<TruthRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub mode: SceneMode,
    pub extents: Extents,
    pub margin: f64,
    pub speed_bound: f64,
    pub velocity_density: f64,
    pub amplitude: f64,
    pub random_phase: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub trials: usize,
    /// `inf` means noiseless.
    pub snr_db: Vec<f64>,
    pub densities: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    /// When false, timing columns are written as zero so outputs are reproducible bytes.
    pub timing: bool,
    pub timing_repeats: usize,
    pub waveform: WaveformConfig,
    pub geometry: SceneGeometry,
    pub scene: SceneSpec,
    pub range_oversample: usize,
    pub doppler_oversample: usize,
    pub hop_scheme: InterpScheme,
    pub hop_oversample: usize,
    pub hop_doppler_oversample: usize,
}

fn invalid(key: &str, msg: impl fmt::Display) -> Error {
    Error::Scenario(format!("`{key}`: {msg}"))
}

impl Scenario {
    /// Checks every range constraint. Called on load and again before a run,
    /// since callers may edit fields in between.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(invalid(
                "snr_db",
                "must be a non-empty list of numbers (inf = noiseless)",
            ));
        }
        if self.densities.is_empty() || self.densities.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid("densities", "must be a non-empty list of positive numbers"));
        }
        if self.thresholds.is_empty()
            || self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0))
            || self.thresholds.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid("thresholds", "must be positive and strictly ascending"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "must name at least one algorithm"));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i]
                .iter()
                .any(|b| b.label == a.label || b.kind == a.kind)
            {
                return Err(invalid("algorithms", format!("{a} is listed twice")));
            }
        }
        if self.timing_repeats == 0 {
            return Err(invalid("timing_repeats", "must be >= 1"));
        }
        for (key, v) in [
            ("indirect.range_oversample", self.range_oversample),
            ("indirect.doppler_oversample", self.doppler_oversample),
            ("hopping.oversample", self.hop_oversample),
            ("hopping.doppler_oversample", self.hop_doppler_oversample),
        ] {
            if v == 0 {
                return Err(invalid(key, "must be >= 1"));
            }
        }
        let s = &self.scene;
        if !(s.margin.is_finite() && s.margin >= 0.0) {
            return Err(invalid("scene.margin", "must be >= 0"));
        }
        let inner = s.extents.shrink(s.margin);
        if !(inner.x_max > inner.x_min && inner.y_max > inner.y_min) {
            return Err(invalid(
                "scene.x_range/y_range",
                "extents empty after removing the margin",
            ));
        }
        if !(s.speed_bound.is_finite() && s.speed_bound > 0.0) {
            return Err(invalid("scene.speed_bound", "must be positive"));
        }
        if !(s.velocity_density.is_finite() && s.velocity_density > 0.0) {
            return Err(invalid("scene.velocity_density", "must be positive"));
        }
        if !(s.amplitude.is_finite() && s.amplitude > 0.0) {
            return Err(invalid("scene.amplitude", "must be positive"));
        }
        match &s.mode {
            SceneMode::Lattice { rx_distance, min_speed } => {
                if !(rx_distance.0 > 0.0 && rx_distance.1 > rx_distance.0) {
                    return Err(invalid("scene.rx_distance", "must be [min, max] with 0 < min < max"));
                }
                if !(*min_speed > 0.0 && *min_speed < s.speed_bound) {
                    return Err(invalid("scene.min_speed", "must lie in (0, speed_bound)"));
                }
            }
            SceneMode::Linear { frame_period_s, .. } => {
                if !(frame_period_s.is_finite() && *frame_period_s > 0.0) {
                    return Err(invalid("scene.frame_period_s", "must be positive"));
                }
            }
            SceneMode::Track(track) => {
                if track.len() < self.trials {
                    return Err(invalid(
                        "trials",
                        format!("track holds {} records, {} trials requested", track.len(), self.trials),
                    ));
                }
            }
            SceneMode::Random => {}
        }
        Ok(())
    }

    /// Index of the algorithm reported under `label`.
    pub fn algorithm(&self, label: &str) -> Option<&Algorithm> {
        self.algorithms.iter().find(|a| a.label == label)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: u64,
    trials: Option<usize>,
    snr_db: Option<Vec<f64>>,
    densities: Option<Vec<f64>>,
    thresholds: Option<Vec<f64>>,
    algorithms: Option<Vec<String>>,
    #[serde(default = "yes")]
    timing: bool,
    #[serde(default = "three")]
    timing_repeats: usize,
    #[serde(default)]
    waveform: RawWaveform,
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    scene: RawScene,
    #[serde(default)]
    indirect: RawIndirect,
    #[serde(default)]
    hopping: RawHopping,
}

fn yes() -> bool {
    true
}

fn three() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawWaveform {
    carrier_hz: f64,
    bandwidth_hz: f64,
    chirp_duration_s: f64,
    chirps: usize,
    samples: usize,
    speed_of_light: f64,
}

impl Default for RawWaveform {
    fn default() -> Self {
        let k = WaveformConfig::k_band();
        Self {
            carrier_hz: k.carrier_hz(),
            bandwidth_hz: k.bandwidth_hz(),
            chirp_duration_s: k.chirp_duration_s(),
            chirps: k.chirps(),
            samples: k.samples(),
            speed_of_light: SPEED_OF_LIGHT,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGeometry {
    tx: [f64; 2],
    rx: Vec<[f64; 2]>,
}

impl Default for RawGeometry {
    fn default() -> Self {
        Self {
            tx: [0.0, 0.0],
            rx: vec![[-20.0, 2.0], [20.0, 2.0], [0.0, 40.0]],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawScene {
    mode: String,
    x_range: [f64; 2],
    y_range: [f64; 2],
    margin: f64,
    speed_bound: f64,
    velocity_density: f64,
    amplitude: f64,
    random_phase: bool,
    rx_distance: [f64; 2],
    min_speed: f64,
    start: Option<[f64; 2]>,
    velocity: Option<[f64; 2]>,
    frame_period_s: f64,
    track: Option<PathBuf>,
}

impl Default for RawScene {
    fn default() -> Self {
        Self {
            mode: "random".into(),
            x_range: [-15.0, 15.0],
            y_range: [5.0, 35.0],
            margin: 0.0,
            speed_bound: 15.0,
            velocity_density: 1.0,
            amplitude: 1.0,
            random_phase: true,
            rx_distance: [10.0, 25.0],
            min_speed: 2.0,
            start: None,
            velocity: None,
            frame_period_s: 0.05,
            track: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawIndirect {
    range_oversample: usize,
    doppler_oversample: usize,
}

impl Default for RawIndirect {
    fn default() -> Self {
        Self {
            range_oversample: 1,
            doppler_oversample: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawHopping {
    scheme: String,
    oversample: usize,
    doppler_oversample: usize,
}

impl Default for RawHopping {
    fn default() -> Self {
        Self {
            scheme: "poly3".into(),
            oversample: 4,
            doppler_oversample: 1,
        }
    }
}

/// Parses and validates scenario text. Relative track paths resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string().trim_end().to_string()))?;

    let w = &raw.waveform;
    let waveform = WaveformConfig::with_speed_of_light(
        w.carrier_hz,
        w.bandwidth_hz,
        w.chirp_duration_s,
        w.chirps,
        w.samples,
        w.speed_of_light,
    )
    .map_err(|e| invalid("waveform", e))?;
    let geometry = SceneGeometry::new(
        raw.geometry.tx.into(),
        raw.geometry.rx.iter().map(|&p| p.into()).collect(),
    )
    .map_err(|e| invalid("geometry", e))?;

    let hop_scheme: InterpScheme = raw.hopping.scheme.parse().map_err(|_| {
        invalid(
            "hopping.scheme",
            format!("{:?}; valid: nearest, linear, poly3", raw.hopping.scheme),
        )
    })?;
    let hop_default = (hop_scheme, raw.hopping.oversample);
    let algorithms = raw
        .algorithms
        .unwrap_or_else(|| vec!["indirect".into(), "direct".into(), "hop".into()])
        .iter()
        .map(|n| Algorithm::parse(n, hop_default))
        .collect::<Result<Vec<_>>>()?;

    let s = &raw.scene;
    let mode = match s.mode.as_str() {
        "random" => SceneMode::Random,
        "lattice" => SceneMode::Lattice {
            rx_distance: (s.rx_distance[0], s.rx_distance[1]),
            min_speed: s.min_speed,
        },
        "linear" => SceneMode::Linear {
            start: s
                .start
                .ok_or_else(|| invalid("scene.start", "required for mode = \"linear\""))?
                .into(),
            velocity: s
                .velocity
                .ok_or_else(|| invalid("scene.velocity", "required for mode = \"linear\""))?
                .into(),
            frame_period_s: s.frame_period_s,
        },
        "track" => {
            let rel = s
                .track
                .as_ref()
                .ok_or_else(|| invalid("scene.track", "required for mode = \"track\""))?;
            SceneMode::Track(read_truth_track(base_dir.join(rel))?)
        }
        other => {
            return Err(invalid(
                "scene.mode",
                format!("{other:?}; valid: random, lattice, linear, track"),
            ))
        }
    };
    let trials = match (&mode, raw.trials) {
        (_, Some(t)) => t,
        (SceneMode::Track(track), None) => track.len(),
        (_, None) => return Err(Error::Scenario("missing required key `trials`".into())),
    };
    let extents = Extents::new(s.x_range[0], s.x_range[1], s.y_range[0], s.y_range[1]);
    if !(extents.x_max > extents.x_min && extents.y_max > extents.y_min) {
        return Err(invalid(
            "scene.x_range/y_range",
            "each range must be [min, max] with min < max",
        ));
    }

    let scenario = Scenario {
        seed: raw.seed,
        trials,
        snr_db: raw.snr_db.unwrap_or_else(|| DEFAULT_SNR_DB.to_vec()),
        densities: raw.densities.unwrap_or_else(|| DEFAULT_DENSITIES.to_vec()),
        thresholds: raw.thresholds.unwrap_or_else(default_thresholds),
        algorithms,
        timing: raw.timing,
        timing_repeats: raw.timing_repeats,
        waveform,
        geometry,
        scene: SceneSpec {
            mode,
            extents,
            margin: s.margin,
            speed_bound: s.speed_bound,
            velocity_density: s.velocity_density,
            amplitude: s.amplitude,
            random_phase: s.random_phase,
        },
        range_oversample: raw.indirect.range_oversample,
        doppler_oversample: raw.indirect.doppler_oversample,
        hop_scheme,
        hop_oversample: raw.hopping.oversample,
        hop_doppler_oversample: raw.hopping.doppler_oversample,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base).map_err(|e| match e {
        Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("."))
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let s = parse("seed = 1\ntrials = 4\n").unwrap();
        assert_eq!(s.densities, vec![1.0, 2.0, 4.0]);
        assert_eq!(s.snr_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(s.thresholds.len(), 15);
        assert_eq!(s.thresholds[0], 0.2);
        assert_eq!(s.thresholds[14], 3.0);
        let labels: Vec<_> = s.algorithms.iter().map(|a| a.label.as_str()).collect();
        assert_eq!(labels, ["indirect", "direct", "hop"]);
        assert_eq!(s.waveform, WaveformConfig::k_band());
        assert_eq!(s.geometry.receivers(), 3);
        assert_eq!((s.range_oversample, s.doppler_oversample), (1, 1));
        assert_eq!((s.hop_scheme, s.hop_oversample), (InterpScheme::Poly3, 4));
        assert!(s.timing);
        assert_eq!(s.timing_repeats, 3);
    }

    #[test]
    fn validation_errors_name_the_key() {
        let e = parse("seed = 1\ntrials = 0\n").unwrap_err().to_string();
        assert!(e.contains("`trials`"), "{e}");
        let e = parse("seed = 1\n").unwrap_err().to_string();
        assert!(e.contains("trials"), "{e}");
        let e = parse("seed = 1\ntrials = 2\nthresholds = [1.0, 0.5]\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("thresholds"), "{e}");
        let e = parse("seed = 1\ntrials = 2\ndensities = [0]\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("densities"), "{e}");
        let e = parse("seed = 1\ntrials = 2\n[scene]\nspeed_bnd = 3\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("speed_bnd"), "{e}");
        assert!(e.contains("line 4"), "{e}");
        let e = parse("seed = 1\ntrials = 2\n[hopping]\nscheme = \"cubic\"\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("hopping.scheme"), "{e}");
    }

    #[test]
    fn unknown_algorithm_lists_valid_names() {
        let e = parse("seed = 1\ntrials = 2\nalgorithms = [\"music\"]\n").unwrap_err();
        assert!(matches!(e, Error::UnknownAlgorithm { .. }));
        let msg = e.to_string();
        for name in ["indirect", "direct", "hop"] {
            assert!(msg.contains(name), "{msg}");
        }
        assert!(parse("seed = 1\ntrials = 2\nalgorithms = [\"hop:poly3:0\"]\n").is_err());
        assert!(parse("seed = 1\ntrials = 2\nalgorithms = [\"direct\", \"direct\"]\n").is_err());
    }

    #[test]
    fn explicit_hop_variants() {
        let s = parse("seed = 1\ntrials = 2\nalgorithms = [\"hop\", \"hop:nearest:1\"]\n[hopping]\nscheme = \"linear\"\noversample = 2\n")
            .unwrap();
        assert_eq!(
            s.algorithms[0].kind,
            AlgorithmKind::Hop {
                scheme: InterpScheme::Linear,
                oversample: 2
            }
        );
        assert_eq!(s.algorithms[1].label, "hop:nearest:1");
        assert_eq!(
            s.algorithms[1].kind,
            AlgorithmKind::Hop {
                scheme: InterpScheme::Nearest,
                oversample: 1
            }
        );
    }

    #[test]
    fn noiseless_and_modes() {
        let s = parse("seed = 1\ntrials = 2\nsnr_db = [inf]\n[scene]\nmode = \"lattice\"\n").unwrap();
        assert!(s.snr_db[0].is_infinite());
        assert!(matches!(s.scene.mode, SceneMode::Lattice { .. }));
        assert!(parse("seed = 1\ntrials = 2\n[scene]\nmode = \"linear\"\n").is_err());
        assert!(parse("seed = 1\ntrials = 2\n[scene]\nmode = \"orbit\"\n").is_err());
    }

    #[test]
    fn track_mode_reads_relative_path() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.csv"), "0,1,20,1,0\n0.1,1.1,20,1,0\n").unwrap();
        std::fs::write(
            dir.path().join("s.toml"),
            "seed = 3\n[scene]\nmode = \"track\"\ntrack = \"t.csv\"\n",
        )
        .unwrap();
        let s = load_scenario(dir.path().join("s.toml")).unwrap();
        assert_eq!(s.trials, 2);
        let e = load_scenario(dir.path().join("missing.toml")).unwrap_err();
        assert!(e.to_string().contains("missing.toml"));
    }
}
