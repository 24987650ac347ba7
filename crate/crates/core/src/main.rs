use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gridhop::bench::{
    self, emit_csv, emit_estimates, emit_summary, emit_velocity_summary, load_scenario, Algorithm, AlgorithmKind,
    RunOptions, Scenario, SceneMode,
};
use gridhop::frame_io::{read_frames, write_frames, write_truth_track, FrameFileHeader, TruthRecord};
use gridhop::{build_location_grid, precompute_hop_table, Error, Grids, HopTable, InterpScheme, Result};

#[derive(Parser)]
#[command(
    name = "gridhop",
    version,
    about = "Multistatic FMCW localization: indirect, direct and grid-hopping estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the scenario's trials into an MRF1 frame file plus a truth track.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Truth track output (default: <out>.truth.csv).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run estimators on the frames of an MRF1 file and write an estimates CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: PathBuf,
    },
    /// Monte Carlo benchmark: writes records.csv, summary.csv and velocity_summary.csv into --out.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Precompute a GHT1 hop table for the scenario geometry and one grid density.
    Hoptable {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// indirect, direct, hop or hop:<scheme>:<oversample>; comma separated.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    #[arg(long)]
    scheme: Option<InterpScheme>,
    /// Range oversampling P_r of the hop table.
    #[arg(long)]
    oversample: Option<usize>,
    /// Location grid density; replaces the scenario's density list.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write zero timing columns so outputs are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Saved hop table to reuse when it matches.
    #[arg(long)]
    table: Option<PathBuf>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let mut sc = load_scenario(&self.scenario)?;
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(d) = self.density {
            sc.densities = vec![d];
        }
        if self.no_timing {
            sc.timing = false;
        }
        if let Some(s) = self.scheme {
            sc.hop_scheme = s;
        }
        if let Some(p) = self.oversample {
            sc.hop_oversample = p;
        }
        let default = (sc.hop_scheme, sc.hop_oversample);
        if !self.algo.is_empty() {
            sc.algorithms = self
                .algo
                .iter()
                .map(|n| Algorithm::parse(n, default))
                .collect::<Result<_>>()?;
        } else {
            for a in &mut sc.algorithms {
                if a.label == "hop" {
                    *a = Algorithm::parse("hop", default)?;
                }
            }
        }
        sc.validate()?;
        Ok(sc)
    }

    fn pool(&self) -> Result<Option<rayon::ThreadPool>> {
        self.threads
            .map(|n| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
            })
            .transpose()
    }
}

fn in_pool<T>(pool: Option<rayon::ThreadPool>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn simulate(common: &Common, truth: Option<PathBuf>) -> Result<()> {
    let sc = common.scenario()?;
    if matches!(sc.scene.mode, SceneMode::Lattice { .. }) {
        return Err(Error::Scenario(
            "lattice scenes move the receivers every trial and cannot share one frame file header".into(),
        ));
    }
    let frames_and_truth = in_pool(common.pool()?, || -> Result<_> {
        let grids = bench::scenario_grids(&sc)?;
        let scenes = bench::scenario_scenes(&sc, &grids)?;
        let mut frames = Vec::with_capacity(scenes.len());
        let mut track = Vec::with_capacity(scenes.len());
        for (t, scene) in scenes.iter().enumerate() {
            frames.push(bench::trial_frame(&sc, &sc.waveform, scene, t, 0)?);
            let time_s = match &sc.scene.mode {
                SceneMode::Linear { frame_period_s, .. } => t as f64 * frame_period_s,
                SceneMode::Track(rec) => rec[t].time_s,
                _ => t as f64,
            };
            track.push(TruthRecord {
                time_s,
                position: scene.target.position,
                velocity: scene.target.velocity,
            });
        }
        Ok((frames, track))
    })?;
    let (frames, track) = frames_and_truth;
    let header = FrameFileHeader::new(&sc.waveform, &sc.geometry, frames.len());
    write_frames(&common.out, &header, &frames)?;
    let truth = truth.unwrap_or_else(|| common.out.with_extension("truth.csv"));
    write_truth_track(&truth, &track)?;
    log::info!(
        "wrote {} frames at {} dB to {} and truth to {}",
        frames.len(),
        sc.snr_db[0],
        common.out.display(),
        truth.display()
    );
    Ok(())
}

fn load_or_build_table(
    path: Option<&Path>,
    grids: &Grids,
    geom: &gridhop::SceneGeometry,
    cfg: &gridhop::WaveformConfig,
    scheme: InterpScheme,
    oversample: usize,
) -> Result<HopTable> {
    if let Some(p) = path {
        let t = HopTable::load(p)?;
        if t.scheme() == scheme && t.oversample() == oversample {
            t.verify(cfg, geom, &grids.location)?;
            log::info!("reusing hop table {}, skipping rebuild", p.display());
            return Ok(t);
        }
        log::warn!(
            "{} is a {}:{} table; building {scheme}:{oversample}",
            p.display(),
            t.scheme(),
            t.oversample()
        );
    }
    precompute_hop_table(&grids.location, geom, cfg, oversample, scheme)
}

fn estimate(common: &Common, frames: &Path) -> Result<()> {
    let sc = common.scenario()?;
    let (header, frames) = read_frames(frames)?;
    let cfg = header.waveform(sc.waveform.speed_of_light())?;
    let geom = header.geometry()?;
    let sc = Scenario {
        waveform: cfg,
        geometry: geom.clone(),
        ..sc
    };
    let rows = in_pool(common.pool()?, || -> Result<_> {
        let grids = bench::scenario_grids(&sc)?.swap_remove(0);
        let mut tables = Vec::new();
        for alg in &sc.algorithms {
            tables.push(match alg.kind {
                AlgorithmKind::Hop { scheme, oversample } => Some(load_or_build_table(
                    common.table.as_deref(),
                    &grids,
                    &geom,
                    &cfg,
                    scheme,
                    oversample,
                )?),
                _ => None,
            });
        }
        let mut rows = Vec::new();
        for (i, frame) in frames.iter().enumerate() {
            for (alg, table) in sc.algorithms.iter().zip(&tables) {
                let est = bench::run_algorithm(&sc, alg, frame, &grids, &geom, table.as_ref())?;
                rows.push((i, alg.label.clone(), est));
            }
        }
        Ok(rows)
    })?;
    emit_estimates(&rows, sc.timing, &common.out)?;
    log::info!("wrote {} estimates to {}", rows.len(), common.out.display());
    Ok(())
}

fn run_bench(common: &Common) -> Result<()> {
    let sc = common.scenario()?;
    std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    let start = Instant::now();
    let records = bench::run_monte_carlo_with(
        &sc,
        &RunOptions {
            threads: common.threads,
            table: common.table.clone(),
        },
    )?;
    log::info!("{} records in {:.1} s", records.len(), start.elapsed().as_secs_f64());
    emit_csv(&records, common.out.join("records.csv"))?;
    emit_summary(&records, &sc.thresholds, common.out.join("summary.csv"))?;
    emit_velocity_summary(&records, &sc.thresholds, common.out.join("velocity_summary.csv"))?;
    log::info!(
        "wrote records.csv, summary.csv, velocity_summary.csv to {}",
        common.out.display()
    );
    Ok(())
}

fn hoptable(common: &Common) -> Result<()> {
    let sc = common.scenario()?;
    let density = sc.densities[0];
    let grid = build_location_grid(sc.scene.extents, &sc.waveform, density)?;
    let start = Instant::now();
    let table = in_pool(common.pool()?, || {
        precompute_hop_table(&grid, &sc.geometry, &sc.waveform, sc.hop_oversample, sc.hop_scheme)
    })?;
    table.save(&common.out)?;
    log::info!(
        "{}:{} table for {} bins at density {density} built in {:.3} s, written to {}",
        sc.hop_scheme,
        sc.hop_oversample,
        table.bins(),
        start.elapsed().as_secs_f64(),
        common.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, truth } => simulate(common, truth.clone()),
        Command::Estimate { common, frames } => estimate(common, frames),
        Command::Bench { common } => run_bench(common),
        Command::Hoptable { common } => hoptable(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            let scenario_missing = matches!(&e, Error::Io { path, .. } if cli_scenario(&cli.command) == path);
            if e.is_validation() || scenario_missing {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn cli_scenario(cmd: &Command) -> &Path {
    match cmd {
        Command::Simulate { common, .. }
        | Command::Estimate { common, .. }
        | Command::Bench { common }
        | Command::Hoptable { common } => &common.scenario,
    }
}
