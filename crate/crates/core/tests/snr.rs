use std::path::Path;

use gridhop::bench::{hit_ratio, parse_scenario, run_monte_carlo, scenario_grids};

const BASE: &str = "timing = false\n\
    [waveform]\nchirps = 16\nsamples = 32\n\
    [geometry]\ntx = [0, 0]\nrx = [[-8, 2], [8, 2], [0, 16]]\n\
    [scene]\nx_range = [-2, 2]\ny_range = [6, 10]\nspeed_bound = 6\n";

#[test]
fn hit_ratio_grows_with_snr() {
    let sc = parse_scenario(
        &format!("seed = 77\ntrials = 200\nsnr_db = [-40, -30, -20, -10, 0]\ndensities = [1]\n{BASE}"),
        Path::new("."),
    )
    .unwrap();
    let records = run_monte_carlo(&sc).unwrap();
    for alg in ["indirect", "direct", "hop"] {
        let ratios: Vec<f64> = sc
            .snr_db
            .iter()
            .map(|s| {
                let r: Vec<_> = records.iter().filter(|r| r.snr_db == *s).cloned().collect();
                hit_ratio(&r, alg, 0.6).unwrap()
            })
            .collect();
        for w in ratios.windows(2) {
            assert!(w[1] >= w[0] - 0.05, "{alg}: {ratios:?}");
        }
        assert!(ratios[4] > 0.85 && ratios[0] < 0.5, "{alg}: {ratios:?}");
    }
}

// With the target buried, the grid estimators pick a bin at random, so hits
// happen at the rate of bins falling within the threshold of the truth.
#[test]
fn buried_target_hits_at_the_geometric_rate() {
    let trials = 400;
    let sc = parse_scenario(
        &format!(
            "seed = 78\ntrials = {trials}\nsnr_db = [-60]\ndensities = [1]\nalgorithms = [\"direct\", \"hop\"]\n{BASE}"
        ),
        Path::new("."),
    )
    .unwrap();
    let grid = &scenario_grids(&sc).unwrap()[0].location;
    let records = run_monte_carlo(&sc).unwrap();
    let threshold = 0.6;
    let p: f64 = records
        .iter()
        .map(|r| {
            let near = grid
                .points()
                .iter()
                .filter(|g| g.distance(r.truth.position) <= threshold)
                .count();
            near as f64 / grid.len() as f64
        })
        .sum::<f64>()
        / trials as f64;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    for alg in ["direct", "hop"] {
        let h = hit_ratio(&records, alg, threshold).unwrap();
        assert!(
            (h - p).abs() <= 4.0 * sigma,
            "{alg}: {h} vs geometric {p:.4} (sigma {sigma:.4})"
        );
    }
}
