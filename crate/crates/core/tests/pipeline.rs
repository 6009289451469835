//! Monte Carlo streams analysed from tags, compared with the analytic model.

mod common;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use afc_dlcz::analysis::{build_histogram, fit_fringe, g2_from_counts, scan_g2_vs_width, shuffle_antistokes, CoincidenceData, FringePoint};
use afc_dlcz::config::ExperimentConfig;
use afc_dlcz::model::predict::{predict_fringe, Predictor};
use afc_dlcz::model::ModelOptions;
use afc_dlcz::sim::{read_tags, run_experiment_with, write_tags, RunOptions, TagFormat, TrialSampler};
use afc_dlcz::{BinGrid, Channel, TrialKind};
use common::{bright, collect, exposure, fringe_coverage, grid_configs, mc_pulls};

const N_GRID: u64 = 1_000_000;

#[test]
fn mc_matches_model_on_config_grid() {
    for (name, cfg) in grid_configs() {
        let pulls = mc_pulls(&cfg, N_GRID);
        assert!(pulls.len() >= 8, "{name}: only {} observables", pulls.len());
        for (what, z) in pulls {
            assert!(z.abs() < 4.0, "{name}: {what} pull {z}");
        }
    }
}

#[test]
fn default_config_stokes_fraction_matches_singles() {
    let cfg = ExperimentConfig::paper_defaults();
    let s = Predictor::new(&cfg, &ModelOptions::default()).unwrap().singles();
    let d = collect(&cfg, N_GRID);
    let n = N_GRID as f64;
    let p = s.herald_probability;
    let z = (d.n_heralds as f64 - n * p) / (n * p * (1.0 - p)).sqrt();
    assert!(z.abs() < 4.0, "herald fraction {} vs {p}", d.n_heralds as f64 / n);
}

#[test]
fn output_is_independent_of_worker_count() {
    let cfg = bright(&ExperimentConfig::paper_with_analyzers());
    let run = |w| run_experiment_with(&cfg, 300_000, &RunOptions { workers: Some(w), chunk: 997 }).unwrap();
    let one = run(1);
    assert!(one.tags.len() > 1000);
    for w in [2, 8] {
        let other = run(w);
        assert_eq!(other.counts, one.counts, "workers = {w}");
        assert!(other.tags == one.tags, "workers = {w}: tag streams differ");
    }
    let default_chunks = run_experiment_with(&cfg, 300_000, &RunOptions::default()).unwrap();
    assert!(default_chunks.tags == one.tags);
}

#[test]
fn million_tag_stream_round_trips_and_repeats_byte_for_byte() {
    let mut cfg = ExperimentConfig::paper_defaults();
    cfg.p_s_per_us = 8.0;
    cfg.antistokes_noise_per_us = 0.3;
    let run = run_experiment_with(&cfg, 400_000, &RunOptions::default()).unwrap();
    assert!(run.tags.len() >= 1_000_000, "only {} tags", run.tags.len());
    let dir = tempfile::tempdir().unwrap();
    for (format, name) in [(TagFormat::Binary, "a.bin"), (TagFormat::Text, "a.txt")] {
        let path = dir.path().join(name);
        write_tags(&run.tags, &path, format, &cfg.hash()).unwrap();
        let back = read_tags(&path).unwrap();
        assert_eq!(back.format, format);
        assert_eq!(back.config_hash, cfg.hash());
        assert!(back.tags == run.tags, "{name}: round trip changed the stream");

        let again = run_experiment_with(&cfg, 400_000, &RunOptions::default()).unwrap();
        let path2 = dir.path().join(format!("b-{name}"));
        write_tags(&again.tags, &path2, format, &cfg.hash()).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap(), "{name}");
    }
}

#[test]
fn histogram_total_is_number_of_conditional_pairs() {
    let cfg = bright(&ExperimentConfig::paper_with_analyzers());
    let run = run_experiment_with(&cfg, 1_000_000, &RunOptions::default()).unwrap();
    let mut pairs = 0u64;
    let mut start = 0;
    while start < run.tags.len() {
        let id = run.tags[start].trial_id;
        let mut end = start;
        while end < run.tags.len() && run.tags[end].trial_id == id {
            end += 1;
        }
        let trial = &run.tags[start..end];
        if trial[0].kind == TrialKind::Conditional {
            let s = trial.iter().filter(|t| t.channel == Channel::Stokes).count() as u64;
            let a = trial.iter().filter(|t| t.channel == Channel::AntiStokes).count() as u64;
            pairs += s * a;
        }
        start = end;
    }
    assert!(pairs > 100);
    let grid = BinGrid::aligned(600, 9000, 40_000);
    let h = build_histogram(&run.tags, &grid, &exposure(&cfg, 1_000_000)).unwrap();
    assert_eq!(h.total_counts(), pairs);
}

#[test]
fn analyzer_stream_has_peaks_at_nine_eleven_thirteen() {
    let cfg = bright(&ExperimentConfig::paper_with_analyzers());
    let d = collect(&cfg, 500_000);
    let grid = BinGrid::aligned(200, 9000, 20_000);
    let h = d.histogram(&grid);
    let local_max = |target: u64| {
        let i = grid.bin_of(target).unwrap();
        let best = (i - 2..=i + 2).max_by_key(|&j| h.counts[j]).unwrap();
        assert!(best.abs_diff(i) <= 1, "peak near {target} ns found at {}", grid.center_ns(best));
        assert!(h.counts[best] > 4 * h.counts[grid.bin_of(target + 1000).unwrap()]);
    };
    local_max(9000);
    local_max(11000);
    local_max(13000);
}

#[test]
fn shuffled_stream_is_uncorrelated() {
    let cfg = bright(&ExperimentConfig::paper_defaults());
    let n = 300_000;
    let run = run_experiment_with(&cfg, n, &RunOptions::default()).unwrap();
    let k = cfg.n_unconditional;
    let shuffled = shuffle_antistokes(&run.tags, k, 7).unwrap();
    let d = CoincidenceData::from_tags(&shuffled, &exposure(&cfg, n)).unwrap();
    let (c, acc) = d.centered_window(9000.0, 600);
    let g = g2_from_counts(c, acc, k).unwrap();
    assert!((g.g2 - 1.0).abs() < 3.0 * g.sigma, "shuffled g2 = {} ± {}", g.g2, g.sigma);

    let original = CoincidenceData::from_tags(&run.tags, &exposure(&cfg, n)).unwrap();
    let (c0, acc0) = original.centered_window(9000.0, 600);
    assert!(g2_from_counts(c0, acc0, k).unwrap().g2 > 5.0);

    let widths = [100, 300, 600, 1000, 2000, 4000];
    for p in scan_g2_vs_width(&d, 9000.0, &widths, cfg.rep_rate).unwrap() {
        let g = p.g2.unwrap();
        assert!((g.g2 - 1.0).abs() < 3.0 * g.sigma, "{} ns: g2 = {} ± {}", p.width_ns, g.g2, g.sigma);
    }
}

#[test]
fn classical_baseline_respects_cauchy_schwarz() {
    let mut cfg = bright(&ExperimentConfig::paper_defaults());
    cfg.classical_baseline = true;
    cfg.p_s_per_us = 3.0;
    let d = collect(&cfg, 1_000_000);
    for width in [600, 2000] {
        let (c, acc) = d.centered_window(9000.0, width);
        let g = g2_from_counts(c, acc, cfg.n_unconditional).unwrap();
        assert!(g.g2 <= 2.0 + 3.0 * g.sigma, "{width} ns: g2 = {} ± {}", g.g2, g.sigma);
        assert!((g.g2 - 1.0).abs() < 4.0 * g.sigma, "{width} ns: g2 = {} ± {}", g.g2, g.sigma);
    }
}

fn noiseless_analyzers(theta: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::paper_with_analyzers().with_phases(Some(0.0), Some(theta));
    cfg.p_s_per_us = 0.0;
    cfg.p_s_background = 0.0;
    cfg.antistokes_noise_per_us = 0.0;
    cfg.leakage_peaks.clear();
    cfg.readout_efficiency = 1.0;
    cfg.mode_overlap = 1.0;
    cfg.basis_overlaps.clear();
    cfg.transmission_s = 1.0;
    cfg.transmission_as = 1.0;
    cfg.detector_efficiency_s = 1.0;
    cfg.detector_efficiency_as = 1.0;
    cfg
}

/// Coincidence sums of forced single-pair trials.
fn forced_pair_sums(cfg: &ExperimentConfig, trials: u64) -> Vec<u64> {
    let sampler = TrialSampler::new(cfg).unwrap();
    let mut sums = Vec::new();
    for id in 0..trials {
        let o = sampler.run_trial_with_pairs(id, TrialKind::Conditional, &[(2, 3000.0)]);
        for s in o.stokes_tags() {
            for a in o.antistokes_tags() {
                sums.push(s.time_ns + a.time_ns);
            }
        }
    }
    sums
}

#[test]
fn balanced_analyzers_at_pi_cancel_the_central_peak() {
    let cfg = noiseless_analyzers(PI);
    let sums = forced_pair_sums(&cfg, 100_000);
    let tau = cfg.tau_mc.as_ns();
    let ifc = cfg.analyzer_s.as_ref().unwrap().tau_ifc.as_ns();
    let central = sums.iter().filter(|&&x| x.abs_diff(tau + ifc) < 300).count();
    let side = sums.iter().filter(|&&x| x.abs_diff(tau) < 300).count();
    assert!(side > 1000, "{side} early-early coincidences");
    assert_eq!(central, 0, "central coincidences at θ = π");

    let constructive = forced_pair_sums(&noiseless_analyzers(0.0), 100_000);
    let central = constructive.iter().filter(|&&x| x.abs_diff(tau + ifc) < 300).count();
    let side = constructive.iter().filter(|&&x| x.abs_diff(tau) < 300).count();
    let ratio = central as f64 / side as f64;
    assert!((ratio - 4.0).abs() < 0.3, "central/side ratio {ratio} at θ = 0");
}

#[test]
fn noiseless_coincidences_obey_the_timing_law() {
    let cfg = noiseless_analyzers(FRAC_PI_2);
    let sigma = cfg.write_fwhm.as_ns_f64() / 2.35482;
    let tau = cfg.tau_mc.as_ns_f64();
    let ifc = cfg.analyzer_s.as_ref().unwrap().tau_ifc.as_ns_f64();
    let sums = forced_pair_sums(&cfg, 50_000);
    assert!(!sums.is_empty());
    for x in sums {
        let x = x as f64;
        let nearest = [tau, tau + ifc, tau + 2.0 * ifc].iter().map(|c| (x - c).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 7.0 * sigma, "coincidence at {x} ns off the timing law");
    }
}

#[test]
fn common_phase_shift_leaves_statistics_unchanged() {
    let base = bright(&ExperimentConfig::paper_with_analyzers());
    let mut base = base;
    base.basis_overlaps.clear();
    let a = collect(&base.with_phases(Some(0.3), Some(1.1)), 300_000);
    let b = collect(&base.with_phases(Some(0.3 + 2.0), Some(1.1 + 2.0)), 300_000);
    for center in [9000.0, 11000.0, 13000.0] {
        let (ca, _) = a.centered_window(center, 600);
        let (cb, _) = b.centered_window(center, 600);
        let z = (ca as f64 - cb as f64) / ((ca + cb) as f64).max(1.0).sqrt();
        assert!(z.abs() < 4.0, "window at {center}: {ca} vs {cb}");
    }
}

#[test]
fn mc_fringe_matches_predicted_visibility() {
    let cfg = bright(&ExperimentConfig::paper_fringe());
    let opts = ModelOptions::default();
    let center = cfg.tau_mc.as_ns_f64() + cfg.analyzer_s.as_ref().unwrap().tau_ifc.as_ns_f64();
    let phis: Vec<f64> = (0..8).map(|i| i as f64 * TAU / 8.0).collect();
    for phi_s in [0.0, FRAC_PI_2] {
        let pred = predict_fringe(&cfg, phi_s, &phis, &opts).unwrap();
        let points: Vec<FringePoint> = phis
            .iter()
            .map(|&phi_as| {
                let d = collect(&cfg.with_phases(Some(phi_s), Some(phi_as)), 200_000);
                let (c, _) = d.centered_window(center, 600);
                FringePoint { phi_as, counts: c as f64, sigma: (c as f64).max(1.0).sqrt() }
            })
            .collect();
        let fit = fit_fringe(&points, phi_s, Some(0.0)).unwrap();
        let z = (fit.visibility - pred.visibility) / fit.sigma_visibility;
        assert!(z.abs() < 4.0, "Φ_S = {phi_s}: V = {} ± {} vs {}", fit.visibility, fit.sigma_visibility, pred.visibility);
        assert!(fit.phase_offset.abs() < 4.0 * fit.sigma_phase, "φ0 = {} ± {}", fit.phase_offset, fit.sigma_phase);
    }
}

#[test]
fn fringe_fit_recovers_injected_cosines() {
    let c = fringe_coverage(30);
    // Nominal 2σ coverage is 95.4%.
    assert!(c.coverage() > 0.92, "2σ coverage {}", c.coverage());
    assert!(c.worst_cell <= 12, "{} of {} outside 2σ in one cell", c.worst_cell, c.per_cell);
}
