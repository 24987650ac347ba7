//! Monte Carlo comparison of the estimators: scenario loading, seeded trial
//! generation, timing and CSV reports.

mod report;
mod scenario;
mod scene;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::direct::direct_estimate;
use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::hopping::hop_estimate;
use crate::indirect::indirect_estimate;
use crate::interp::{precompute_hop_table, HopTable};
use crate::model::{build_location_grid, build_velocity_grid, Grids, SceneGeometry, Target, Vec2, WaveformConfig};
use crate::rng::substream_seed;
use crate::synth::{synthesize_frame, Frame, NoiseSpec};

pub use report::{
    emit_csv, emit_estimates, emit_summary, emit_velocity_summary, hit_ratio, summarize, velocity_rmse, SummaryRow,
    RECORD_COLUMNS, SUMMARY_COLUMNS,
};
pub use scenario::{
    default_thresholds, load_scenario, parse_scenario, Algorithm, AlgorithmKind, Scenario, SceneMode, SceneSpec,
    DEFAULT_DENSITIES, DEFAULT_SNR_DB,
};
pub use scene::{trial_scene, LatticeSpec, TrialScene};

const NOISE_STREAM: u64 = 0x4015E;

/// One estimator's result for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmOutcome {
    pub algorithm: String,
    pub position: Vec2,
    pub velocity: Vec2,
    pub location_index: usize,
    pub score: f64,
    /// Hop table construction time; zero for the other estimators and for loaded tables.
    pub t_offline_ns: u64,
    /// Median estimation latency over the configured repeats; zero with timing disabled.
    pub t_online_ns: u64,
    pub stages: Vec<(&'static str, u64)>,
}

/// One Monte Carlo frame: truth and every configured estimator's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub snr_db: f64,
    pub density: f64,
    pub truth: Target,
    pub outcomes: Vec<AlgorithmOutcome>,
}

impl TrialRecord {
    pub fn outcome(&self, algorithm: &str) -> Option<&AlgorithmOutcome> {
        self.outcomes.iter().find(|o| o.algorithm == algorithm)
    }
}

/// Execution knobs that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default pool.
    pub threads: Option<usize>,
    /// Previously saved hop table to reuse when it matches a (density, scheme) cell.
    pub table: Option<PathBuf>,
}

fn ns(d: Duration) -> u64 {
    d.as_nanos().min(u64::MAX as u128) as u64
}

fn noise_for(seed: u64, trial: usize, snr_index: usize, snr_db: f64) -> NoiseSpec {
    if snr_db.is_infinite() {
        NoiseSpec::noiseless()
    } else {
        NoiseSpec::new(
            snr_db,
            substream_seed(seed, &[NOISE_STREAM, trial as u64, snr_index as u64]),
        )
    }
}

/// Hop tables for one (density, geometry), aligned with `Scenario::algorithms`.
struct TableSet {
    tables: Vec<Option<(HopTable, u64)>>,
}

impl TableSet {
    fn build(sc: &Scenario, grids: &Grids, geom: &SceneGeometry, preloaded: Option<&HopTable>) -> Result<Self> {
        let mut tables = Vec::with_capacity(sc.algorithms.len());
        for alg in &sc.algorithms {
            let AlgorithmKind::Hop { scheme, oversample } = alg.kind else {
                tables.push(None);
                continue;
            };
            if let Some(t) = preloaded {
                if t.scheme() == scheme
                    && t.oversample() == oversample
                    && t.verify(&sc.waveform, geom, &grids.location).is_ok()
                {
                    log::info!("{alg}: reusing loaded hop table ({} bins), skipping rebuild", t.bins());
                    tables.push(Some((t.clone(), 0)));
                    continue;
                }
            }
            let start = Instant::now();
            let table = precompute_hop_table(&grids.location, geom, &sc.waveform, oversample, scheme)?;
            let elapsed = ns(start.elapsed());
            log::debug!("{alg}: built hop table for {} bins in {elapsed} ns", table.bins());
            tables.push(Some((table, elapsed)));
        }
        Ok(Self { tables })
    }
}

/// Runs one estimator on `frame`.
pub fn run_algorithm(
    sc: &Scenario,
    alg: &Algorithm,
    frame: &Frame,
    grids: &Grids,
    geom: &SceneGeometry,
    table: Option<&HopTable>,
) -> Result<Estimate> {
    match alg.kind {
        AlgorithmKind::Indirect => indirect_estimate(
            frame,
            grids,
            geom,
            &sc.waveform,
            sc.range_oversample,
            sc.doppler_oversample,
        ),
        AlgorithmKind::Direct => direct_estimate(frame, grids, geom, &sc.waveform),
        AlgorithmKind::Hop { .. } => {
            let table = table.ok_or_else(|| Error::StaleHopTable(format!("{alg}: no hop table available")))?;
            hop_estimate(frame, table, grids, geom, &sc.waveform, sc.hop_doppler_oversample)
        }
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn timed_outcome(
    sc: &Scenario,
    alg: &Algorithm,
    frame: &Frame,
    grids: &Grids,
    geom: &SceneGeometry,
    table: Option<&(HopTable, u64)>,
) -> Result<AlgorithmOutcome> {
    let hop = table.map(|t| &t.0);
    let est = run_algorithm(sc, alg, frame, grids, geom, hop)?;
    let (online, stages) = if sc.timing {
        let mut totals = vec![est.timings.total()];
        for _ in 1..sc.timing_repeats {
            totals.push(run_algorithm(sc, alg, frame, grids, geom, hop)?.timings.total());
        }
        let stages = est.timings.stages().iter().map(|&(s, d)| (s, ns(d))).collect();
        (ns(median(totals)), stages)
    } else {
        (0, Vec::new())
    };
    Ok(AlgorithmOutcome {
        algorithm: alg.label.clone(),
        position: est.position,
        velocity: est.velocity,
        location_index: est.location_index,
        score: est.score,
        t_offline_ns: if sc.timing { table.map_or(0, |t| t.1) } else { 0 },
        t_online_ns: online,
        stages,
    })
}

/// Builds the location and velocity grids for each configured density.
pub fn scenario_grids(sc: &Scenario) -> Result<Vec<Grids>> {
    let velocity = build_velocity_grid(sc.scene.speed_bound, &sc.waveform, sc.scene.velocity_density)?;
    sc.densities
        .iter()
        .map(|&d| {
            Ok(Grids {
                location: build_location_grid(sc.scene.extents, &sc.waveform, d)?,
                velocity: velocity.clone(),
            })
        })
        .collect()
}

/// Synthesizes the frame of `trial` at the `snr_index`-th SNR.
pub fn trial_frame(
    sc: &Scenario,
    cfg: &WaveformConfig,
    scene: &TrialScene,
    trial: usize,
    snr_index: usize,
) -> Result<Frame> {
    let noise = noise_for(sc.seed, trial, snr_index, sc.snr_db[snr_index]);
    synthesize_frame(cfg, &scene.geometry, &[scene.target], noise)
}

/// Draws every trial's scene. Lattice truths lie on the first density's grid.
pub fn scenario_scenes(sc: &Scenario, grids: &[Grids]) -> Result<Vec<TrialScene>> {
    let g = &grids[0];
    (0..sc.trials)
        .into_par_iter()
        .map(|t| trial_scene(sc, t, &g.location, &g.velocity))
        .collect()
}

/// Runs the full density x SNR x trial sweep on the current rayon pool.
pub fn run_monte_carlo(sc: &Scenario) -> Result<Vec<TrialRecord>> {
    run_monte_carlo_with(sc, &RunOptions::default())
}

/// [`run_monte_carlo`] with an explicit worker count and optional saved hop table.
///
/// Records come out density-major, then SNR, then trial, whatever the
/// thread count. With timing enabled, trials run one after another so each
/// latency measures a single estimate using the whole pool; otherwise trials
/// themselves run in parallel.
pub fn run_monte_carlo_with(sc: &Scenario, opts: &RunOptions) -> Result<Vec<TrialRecord>> {
    sc.validate()?;
    let preloaded = opts.table.as_ref().map(HopTable::load).transpose()?;
    let body = || -> Result<Vec<TrialRecord>> {
        let grids = scenario_grids(sc)?;
        let scenes = scenario_scenes(sc, &grids)?;
        let shared = !matches!(sc.scene.mode, SceneMode::Lattice { .. });
        let mut records = Vec::with_capacity(sc.densities.len() * sc.snr_db.len() * sc.trials);
        for (di, &density) in sc.densities.iter().enumerate() {
            let g = &grids[di];
            let shared_tables = if shared {
                Some(TableSet::build(sc, g, &sc.geometry, preloaded.as_ref())?)
            } else {
                None
            };
            // Lattice scenes move the receivers every trial, so their tables are per trial.
            let own_tables: Vec<Option<TableSet>> = if shared {
                Vec::new()
            } else {
                scenes
                    .iter()
                    .map(|s| TableSet::build(sc, g, &s.geometry, preloaded.as_ref()).map(Some))
                    .collect::<Result<_>>()?
            };
            for (si, &snr_db) in sc.snr_db.iter().enumerate() {
                let run_trial = |trial: usize| -> Result<TrialRecord> {
                    let scene = &scenes[trial];
                    let tables = shared_tables
                        .as_ref()
                        .or_else(|| own_tables.get(trial).and_then(Option::as_ref))
                        .expect("tables built above");
                    let frame = trial_frame(sc, &sc.waveform, scene, trial, si)?;
                    let outcomes = sc
                        .algorithms
                        .iter()
                        .zip(&tables.tables)
                        .map(|(alg, t)| timed_outcome(sc, alg, &frame, g, &scene.geometry, t.as_ref()))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(TrialRecord {
                        trial,
                        snr_db,
                        density,
                        truth: scene.target,
                        outcomes,
                    })
                };
                let batch: Vec<TrialRecord> = if sc.timing {
                    (0..sc.trials).map(run_trial).collect::<Result<_>>()?
                } else {
                    (0..sc.trials).into_par_iter().map(run_trial).collect::<Result<_>>()?
                };
                records.extend(batch);
            }
        }
        Ok(records)
    };
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn scenario(text: &str) -> Scenario {
        parse_scenario(text, Path::new(".")).unwrap()
    }

    const SMALL: &str = "seed = 5\ntrials = 3\nsnr_db = [10]\ndensities = [1]\ntiming = false\n\
        [waveform]\nchirps = 16\nsamples = 32\n\
        [geometry]\ntx = [0, 0]\nrx = [[-8, 2], [8, 2], [0, 16]]\n\
        [scene]\nx_range = [-2, 2]\ny_range = [6, 10]\nspeed_bound = 6\n";

    #[test]
    fn records_are_ordered_and_complete() {
        let sc = scenario(&SMALL.replace("densities = [1]", "densities = [1, 2]"));
        let recs = run_monte_carlo(&sc).unwrap();
        assert_eq!(recs.len(), 6);
        assert_eq!(recs[0].density, 1.0);
        assert_eq!(recs[3].density, 2.0);
        assert_eq!(recs.iter().map(|r| r.trial).collect::<Vec<_>>(), vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(recs[0].truth, recs[3].truth);
        for r in &recs {
            assert_eq!(r.outcomes.len(), 3);
            assert!(r.outcomes.iter().all(|o| o.t_online_ns == 0 && o.t_offline_ns == 0));
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let sc = scenario(SMALL);
        let one = run_monte_carlo_with(
            &sc,
            &RunOptions {
                threads: Some(1),
                table: None,
            },
        )
        .unwrap();
        let three = run_monte_carlo_with(
            &sc,
            &RunOptions {
                threads: Some(3),
                table: None,
            },
        )
        .unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn timing_fills_online_and_offline() {
        let sc = scenario(&SMALL.replace("timing = false", "timing = true\ntiming_repeats = 1"));
        let recs = run_monte_carlo(&sc).unwrap();
        for r in &recs {
            for o in &r.outcomes {
                assert!(o.t_online_ns > 0);
                assert_eq!(o.t_offline_ns > 0, o.algorithm == "hop", "{}", o.algorithm);
                assert!(!o.stages.is_empty());
            }
        }
    }

    #[test]
    fn noiseless_lattice_scenes_are_recovered_by_all() {
        let text = "seed = 9\ntrials = 4\nsnr_db = [inf]\ndensities = [2]\ntiming = false\n\
            [waveform]\nchirps = 64\nsamples = 64\n\
            [scene]\nmode = \"lattice\"\nx_range = [-1.5, 1.5]\ny_range = [10, 13]\nrx_distance = [8, 20]\n";
        let sc = scenario(text);
        let recs = run_monte_carlo(&sc).unwrap();
        let half_spacing = sc.waveform.range_resolution() / 4.0;
        for name in ["indirect", "direct", "hop"] {
            assert_eq!(hit_ratio(&recs, name, half_spacing).unwrap(), 1.0, "{name}");
            for r in &recs {
                assert_eq!(r.outcome(name).unwrap().velocity, r.truth.velocity, "{name}");
            }
        }
    }

    #[test]
    fn saved_table_is_reused() {
        let sc = scenario(SMALL);
        let grids = scenario_grids(&sc).unwrap();
        let table = precompute_hop_table(
            &grids[0].location,
            &sc.geometry,
            &sc.waveform,
            4,
            crate::interp::InterpScheme::Poly3,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ght");
        table.save(&path).unwrap();
        let with = run_monte_carlo_with(
            &sc,
            &RunOptions {
                threads: None,
                table: Some(path),
            },
        )
        .unwrap();
        assert_eq!(with, run_monte_carlo(&sc).unwrap());
    }
}
