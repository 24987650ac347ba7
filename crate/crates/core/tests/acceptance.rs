//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gridhop::bench::{hit_ratio, parse_scenario, run_monte_carlo, Scenario, TrialRecord};
use gridhop::interp::{worst_atom_residual, Interpolator};
use gridhop::model::{fourier_atom, range_atom};
use gridhop::{
    build_location_grid, fast_time_spectra, range_doppler_map, Extents, Frame, InterpScheme, WaveformConfig,
};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn scenario(text: &str) -> Scenario {
    parse_scenario(text, Path::new(".")).expect("acceptance scenario parses")
}

fn mean_online(records: &[TrialRecord], alg: &str) -> f64 {
    let total: f64 = records
        .iter()
        .map(|r| r.outcome(alg).expect("algorithm present").t_online_ns as f64)
        .sum();
    total / records.len() as f64
}

fn criterion_1() -> Check {
    let cfg = WaveformConfig::k_band();
    let ext = Extents::new(0.0, 12.0, 0.0, 12.0);
    let grid = build_location_grid(ext, &cfg, 1.0).map_err(|e| e.to_string())?;
    let expect = 299_792_458.0 / (2.0 * 250e6);
    let ulp = f64::EPSILON * expect;
    if (grid.spacing() - expect).abs() > ulp {
        return Err(format!("spacing {} != c/(2B) = {expect}", grid.spacing()));
    }
    if (grid.spacing() - 0.5996).abs() > 5e-5 {
        return Err(format!("spacing {} does not round to 0.5996 m", grid.spacing()));
    }
    let cfg3 = WaveformConfig::with_speed_of_light(24e9, 250e6, 128e-6, 128, 128, 3e8).map_err(|e| e.to_string())?;
    let g3 = build_location_grid(ext, &cfg3, 1.0).map_err(|e| e.to_string())?;
    if (g3.spacing() - 0.6).abs() > f64::EPSILON * 0.6 {
        return Err(format!("c = 3e8 spacing {} != 0.6", g3.spacing()));
    }
    let step = grid.points()[1].x - grid.points()[0].x;
    if (step - expect).abs() > 2.0 * ulp {
        return Err(format!("neighbouring grid points {step} m apart"));
    }
    Ok(format!(
        "d=1 spacing {:.10} m (c=3e8: {})",
        grid.spacing(),
        g3.spacing()
    ))
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mc, ms) = (16, 16);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let y = Array2::from_shape_simple_fn((mc, ms), || {
            Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        });
        for (pr, pd) in [(1, 1), (2, 2), (4, 1)] {
            let map = range_doppler_map(&y, pr, pd).map_err(|e| e.to_string())?;
            let vals = map.values();
            let mut oracle = Array2::<f64>::zeros(vals.dim());
            for (j, &u) in map.doppler_axis().iter().enumerate() {
                let b = fourier_atom(u, mc);
                for (k, &r) in map.range_axis().iter().enumerate() {
                    let a = range_atom(r, ms);
                    let mut s = Complex64::default();
                    for m in 0..mc {
                        for i in 0..ms {
                            s += y[[m, i]] * a[i].conj() * b[m].conj();
                        }
                    }
                    oracle[[j, k]] = s.norm();
                }
            }
            let scale = max_abs(oracle.iter().copied());
            let err = max_abs(oracle.iter().zip(vals.iter()).map(|(o, v)| (o - v).abs()));
            worst = worst.max(err / scale);

            let frame = Frame::new(vec![y.clone()]).map_err(|e| e.to_string())?;
            let z = &fast_time_spectra(&frame, pr).map_err(|e| e.to_string())?[0];
            let mut zerr: f64 = 0.0;
            let mut zscale: f64 = 0.0;
            for m in 0..mc {
                for i in 0..pr * ms {
                    let a = range_atom(i as f64 / pr as f64, ms);
                    let s: Complex64 = (0..ms).map(|k| y[[m, k]] * a[k].conj()).sum();
                    zerr = zerr.max((s - z[[m, i]]).norm());
                    zscale = zscale.max(s.norm());
                }
            }
            worst = worst.max(zerr / zscale);
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max relative error {worst:.2e} over 100 frames"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-9"))
    }
}

fn criterion_3() -> Check {
    let sc = scenario(
        "seed = 303\ntrials = 100\nsnr_db = [inf]\ndensities = [2]\ntiming = false\n\
         algorithms = [\"indirect\", \"direct\", \"hop:poly3:4\"]\n\
         [scene]\nmode = \"lattice\"\nx_range = [-3, 3]\ny_range = [10, 16]\n",
    );
    let records = run_monte_carlo(&sc).map_err(|e| e.to_string())?;
    let mut exact = [0usize; 3];
    for r in &records {
        for (n, alg) in ["indirect", "direct", "hop:poly3:4"].iter().enumerate() {
            let o = r.outcome(alg).expect("configured");
            if o.position == r.truth.position && o.velocity == r.truth.velocity {
                exact[n] += 1;
            }
        }
    }
    let line = format!(
        "exact (x, v): indirect {}/100, direct {}/100, hop {}/100",
        exact[0], exact[1], exact[2]
    );
    if records.len() == 100 && exact == [100; 3] {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Criteria 4 and 5 share one Monte Carlo run.
fn criteria_4_5() -> (Check, Check) {
    let sc = scenario(
        "seed = 404\ntrials = 500\nsnr_db = [0, 5, 10]\ndensities = [2]\nthresholds = [1.0]\n\
         timing = true\ntiming_repeats = 1\n\
         algorithms = [\"indirect\", \"direct\", \"hop:poly3:4\"]\n\
         [geometry]\ntx = [0, 0]\nrx = [[-14, 6], [15, 9], [2, 30]]\n\
         [scene]\nx_range = [-6.75, 6.75]\ny_range = [8, 21.5]\nspeed_bound = 15\n",
    );
    let bins = build_location_grid(sc.scene.extents, &sc.waveform, 2.0)
        .map(|g| g.len())
        .unwrap_or(0);
    let records = match run_monte_carlo(&sc) {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let mut c4 = Vec::new();
    let mut c5 = Vec::new();
    let (mut ok4, mut ok5) = (bins >= 2000, bins >= 2000);
    for &snr in &sc.snr_db {
        let cell: Vec<TrialRecord> = records.iter().filter(|r| r.snr_db == snr).cloned().collect();
        let h = |a: &str| hit_ratio(&cell, a, 1.0).expect("configured");
        let (hi, hd, hh) = (h("indirect"), h("direct"), h("hop:poly3:4"));
        let (ti, td, th) = (
            mean_online(&cell, "indirect"),
            mean_online(&cell, "direct"),
            mean_online(&cell, "hop:poly3:4"),
        );
        ok4 &= hd >= hi - 0.02 && td >= 5.0 * ti;
        ok5 &= (hh - hd).abs() <= 0.05 && th <= 0.3 * td;
        c4.push(format!(
            "{snr} dB: hit direct {hd:.3} vs indirect {hi:.3}, time ratio {:.1}x",
            td / ti
        ));
        c5.push(format!(
            "{snr} dB: hit hop {hh:.3} vs direct {hd:.3}, time ratio {:.3}",
            th / td
        ));
    }
    let wrap = |ok: bool, parts: Vec<String>| {
        let line = format!("|grid| = {bins}; {}", parts.join("; "));
        if ok {
            Ok(line)
        } else {
            Err(line)
        }
    };
    (wrap(ok4, c4), wrap(ok5, c5))
}

fn criterion_6() -> Check {
    let sc = scenario(
        "seed = 606\ntrials = 500\nsnr_db = [0]\ndensities = [1, 2, 4]\ntiming = false\n\
         algorithms = [\"direct\", \"hop:poly3:4\"]\n\
         [geometry]\ntx = [0, 0]\nrx = [[-14, 6], [15, 9], [2, 30]]\n\
         [scene]\nx_range = [-3.3, 3.3]\ny_range = [10, 16.6]\nspeed_bound = 15\n",
    );
    let records = run_monte_carlo(&sc).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut worst_drop: f64 = 0.0;
    let mut at_02 = Vec::new();
    for alg in ["direct", "hop:poly3:4"] {
        for &t in &sc.thresholds {
            let ratios: Vec<f64> = sc
                .densities
                .iter()
                .map(|&d| {
                    let cell: Vec<TrialRecord> = records.iter().filter(|r| r.density == d).cloned().collect();
                    hit_ratio(&cell, alg, t).expect("configured")
                })
                .collect();
            for w in ratios.windows(2) {
                worst_drop = worst_drop.max(w[0] - w[1]);
                ok &= w[1] >= w[0] - 0.02;
            }
            if t == sc.thresholds[0] {
                at_02.push(format!("{alg} @ {t} m: {ratios:.3?}"));
            }
        }
    }
    let line = format!(
        "d = 1, 2, 4 over {} thresholds; largest drop {worst_drop:.3}; {}",
        sc.thresholds.len(),
        at_02.join("; ")
    );
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_7() -> Check {
    let ms = 128;
    let mut residuals = Vec::new();
    let mut worst_coeff: f64 = 0.0;
    for p in [1, 2, 4, 8] {
        residuals.push(worst_atom_residual(ms, p, InterpScheme::Poly3, 1000).map_err(|e| e.to_string())?);
        let interp = Interpolator::new(ms, p, InterpScheme::Poly3).map_err(|e| e.to_string())?;
        for i in 0..p * ms {
            let c = interp.coeffs(i as f64 / p as f64);
            for (idx, z) in c.indices.iter().zip(&c.coeffs) {
                let want = if *idx as usize == i { 1.0 } else { 0.0 };
                worst_coeff = worst_coeff.max((z - Complex64::new(want, 0.0)).norm());
            }
            if !c.indices.contains(&(i as u32)) {
                return Err(format!("on-grid r = {i}/{p} does not use its own bin"));
            }
        }
    }
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let line = format!(
        "worst residual P=1,2,4,8: {:.3e}, {:.3e}, {:.3e}, {:.3e}; on-grid coefficient error {worst_coeff:.1e}",
        residuals[0], residuals[1], residuals[2], residuals[3]
    );
    if decreasing && worst_coeff <= 1e-12 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_8() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scen = dir.path().join("det.toml");
    std::fs::write(
        &scen,
        "seed = 808\ntrials = 24\nsnr_db = [-5, 5]\ndensities = [1, 2]\n\
         [waveform]\nchirps = 32\nsamples = 64\n\
         [geometry]\ntx = [0, 0]\nrx = [[-10, 2], [10, 2], [0, 20]]\n\
         [scene]\nx_range = [-3, 3]\ny_range = [8, 14]\nspeed_bound = 8\n",
    )
    .map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_gridhop");
    let mut outputs = Vec::new();
    for (run, threads) in [(0, 1), (1, 4), (2, 1)] {
        let out = dir.path().join(format!("run{run}"));
        let status = Command::new(exe)
            .args(["bench", "--scenario"])
            .arg(&scen)
            .arg("--out")
            .arg(&out)
            .args(["--threads", &threads.to_string(), "--no-timing"])
            .env("RUST_LOG", "warn")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("bench run {run} exited with {status}"));
        }
        let files: Vec<Vec<u8>> = ["records.csv", "summary.csv", "velocity_summary.csv"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap_or_default())
            .collect();
        outputs.push(files);
    }
    if outputs[0].iter().any(Vec::is_empty) {
        return Err("bench produced an empty CSV".into());
    }
    if outputs[0] == outputs[1] && outputs[0] == outputs[2] {
        Ok(format!(
            "records/summary/velocity_summary identical across 1, 4, 1 threads ({} bytes of records)",
            outputs[0][0].len()
        ))
    } else {
        Err("CSV bytes differ between runs".into())
    }
}

fn main() {
    let mut failures = 0;
    let mut report = |n: &str, name: &str, check: Check, secs: f64| match &check {
        Ok(msg) => println!("criterion {n} PASS [{name}] {msg} ({secs:.1} s)"),
        Err(msg) => {
            failures += 1;
            println!("criterion {n} FAIL [{name}] {msg} ({secs:.1} s)");
        }
    };
    let t = Instant::now();
    report("1", "resolution constant", criterion_1(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    report("2", "FFT oracle equivalence", criterion_2(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    report("3", "exact recovery", criterion_3(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let (c4, c5) = criteria_4_5();
    let secs = t.elapsed().as_secs_f64();
    report("4", "direct vs indirect ordering", c4, secs);
    report("5", "hopping trade-off", c5, secs);
    let t = Instant::now();
    report("6", "density sweep", criterion_6(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    report("7", "interpolation quality", criterion_7(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    report("8", "determinism", criterion_8(), t.elapsed().as_secs_f64());
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
