//! `afc-dlcz`: predict, simulate, analyze and calibrate AFC-DLCZ runs.

mod manifest;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use afc_dlcz::analysis::{
    build_histogram, fit_fringe, g2_estimate, find_peak_bin, scan_binsize, scan_g2_vs_width, scan_window,
    shuffle_antistokes, AnalysisError, ChshDataset, CoincidenceData, Exposure, FringePoint, ScanResult,
};
use afc_dlcz::calibrate::{calibrate, CalibrationError, CalibrationTargets};
use afc_dlcz::chsh::{chsh_from_visibility, ChshAngles, ChshResult};
use afc_dlcz::config::{ConfigError, ExperimentConfig};
use afc_dlcz::export::{num, write_csv};
use afc_dlcz::model::predict::{central_peak_ns, predict_chsh, predict_fringe, predict_histogram, Predictor};
use afc_dlcz::model::{ModelError, ModelOptions};
use afc_dlcz::sim::{derive_seed, read_tags, run_experiment_with, write_tags, RunOptions, TagFormat, TagIoError};
use afc_dlcz::BinGrid;
use afc_dlcz::Nanos;

use manifest::{unix_now, RunExposure, RunManifest};

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "afc-dlcz", version, about = "AFC-DLCZ time-bin entanglement: prediction, simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic histogram, fringe and CHSH tables.
    Predict(PredictArgs),
    /// Monte Carlo tag stream for one analyzer setting.
    Simulate(SimulateArgs),
    /// Statistics from one or more simulated runs.
    Analyze(AnalyzeArgs),
    /// Fit the noise density and mode overlap to target g² and visibility.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Histogram bin and coincidence window, ns.
    #[arg(long, default_value_t = 600)]
    bin_size: u64,
    /// Also tabulate the central-peak fringe versus Φ_AS.
    #[arg(long)]
    fringe: bool,
    /// Stokes analyzer phase for --fringe, degrees.
    #[arg(long, default_value_t = 0.0)]
    phi_s: f64,
    /// Fringe points over one period.
    #[arg(long, default_value_t = 36)]
    points: usize,
    /// Also compute CHSH at α=0°, α′=90°, β=45°, β′=135°.
    #[arg(long)]
    chsh: bool,
    /// With --chsh, use E = V·cos(α−β) at this visibility instead of the config.
    #[arg(long)]
    visibility: Option<f64>,
    /// Thermal cutoff for pair-number moments.
    #[arg(long, default_value_t = 8)]
    n_max: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Conditional trials.
    #[arg(long)]
    trials: u64,
    /// Master seed. Defaults to the config's rng_seed, mixed with the phases
    /// when --phi-s or --phi-as is given so each setting is an independent run.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Binary)]
    format: FormatArg,
    /// Stokes analyzer phase, degrees (sets the comb detuning).
    #[arg(long)]
    phi_s: Option<f64>,
    /// Anti-Stokes analyzer phase, degrees.
    #[arg(long)]
    phi_as: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    G2,
    Fringe,
    Chsh,
    ScanWindow,
    ScanBinsize,
    ScanWidth,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run directory written by `simulate`; repeat for fringe and CHSH modes.
    #[arg(long, required = true)]
    run: Vec<PathBuf>,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
    /// Coincidence window, ns.
    #[arg(long, default_value_t = 600)]
    bin_size: u64,
    /// Half-width of the g² peak search around τ_MC, ns; 0 takes the τ_MC bin.
    #[arg(long, default_value_t = 1000)]
    search: u64,
    /// Shuffle anti-Stokes tags across reads before analysis (g2 mode).
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Fix the fringe floor to the measured accidentals.
    #[arg(long)]
    fix_floor: bool,
    /// Scan axis values: window centres in µs (scan-window), sizes in ns
    /// (scan-binsize, scan-width). Comma separated.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target g² in the window centred on τ_MC (analyzers removed).
    #[arg(long)]
    g2: Option<f64>,
    /// Target raw central-peak visibility (global mode overlap).
    #[arg(long)]
    visibility: Option<f64>,
    /// Per-basis target `DEG:V`, e.g. `90:0.701`. Repeatable.
    #[arg(long)]
    basis: Vec<String>,
    #[arg(long, default_value_t = 600)]
    bin_size: u64,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

type Outcome<T> = Result<T, Failure>;

fn failure(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure { code, error: error.into() }
}

fn config_code(e: &ConfigError) -> u8 {
    match e {
        ConfigError::Io { .. } | ConfigError::Parse(_) => EXIT_IO,
        ConfigError::Invalid(_) | ConfigError::InvalidAnalyzer(_) => EXIT_VALIDATION,
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        failure(config_code(&e), e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let code = match &e {
            ModelError::Config(c) => config_code(c),
            ModelError::NoAnalyzers | ModelError::Domain(_) => EXIT_VALIDATION,
            ModelError::UndefinedG2(_) => EXIT_OTHER,
        };
        failure(code, e)
    }
}

impl From<CalibrationError> for Failure {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Infeasible(_) => failure(EXIT_INFEASIBLE, e),
            CalibrationError::Model(m) => m.into(),
        }
    }
}

impl From<TagIoError> for Failure {
    fn from(e: TagIoError) -> Self {
        failure(EXIT_IO, e)
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        let code = match e {
            AnalysisError::Ordering(_) | AnalysisError::Exposure(_) => EXIT_IO,
            _ => EXIT_OTHER,
        };
        failure(code, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        failure(EXIT_IO, e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> Outcome<ExperimentConfig> {
    Ok(ExperimentConfig::load(path)?.validated()?)
}

fn hash_header(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    vec![("config_hash", cfg.hash_hex())]
}

fn phase_deg(cfg: &ExperimentConfig) -> (Option<f64>, Option<f64>) {
    let deg = |a: &Option<afc_dlcz::AnalyzerSetting>| a.as_ref().and_then(|a| a.phase().ok()).map(f64::to_degrees);
    (deg(&cfg.analyzer_s), deg(&cfg.analyzer_as))
}

fn print_chsh(r: &ChshResult) {
    for t in &r.e_values {
        println!(
            "E({:.0}°,{:.0}°) = {:.4} ± {:.4}",
            t.alpha.to_degrees(),
            t.beta.to_degrees(),
            t.e,
            t.sigma
        );
    }
    if r.sigma_s > 0.0 {
        println!("S = {:.4} ± {:.4}  significance {:.2}σ", r.s, r.sigma_s, r.significance);
    } else {
        println!("S = {:.4}", r.s);
    }
    if r.unphysical {
        eprintln!("warning: S exceeds the Tsirelson bound 2√2");
    }
}

fn chsh_rows(r: &ChshResult) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = r
        .e_values
        .iter()
        .map(|t| vec![num(t.alpha.to_degrees()), num(t.beta.to_degrees()), num(t.e), num(t.sigma)])
        .collect();
    rows.push(vec!["S".into(), String::new(), num(r.s), num(r.sigma_s)]);
    rows
}

fn cmd_predict(a: PredictArgs) -> Outcome<()> {
    let started = unix_now();
    if a.bin_size == 0 {
        return Err(failure(EXIT_VALIDATION, anyhow!("--bin-size must be > 0")));
    }
    let cfg = load_config(&a.config)?;
    let opts = ModelOptions { n_max: a.n_max, window: Nanos(a.bin_size) };
    fs::create_dir_all(&a.out)?;
    let mut man = RunManifest::new(&a.config, cfg.hash_hex(), cfg.rng_seed, started);
    (man.phi_s_deg, man.phi_as_deg) = phase_deg(&cfg);

    let h = predict_histogram(&cfg, a.bin_size, &opts)?;
    let rows = (0..h.grid.n_bins).map(|i| {
        vec![
            num(h.grid.center_ns(i) / 1000.0),
            num(h.total[i]),
            num(h.accidental[i]),
            num(h.early_early[i]),
            num(h.interference[i]),
            num(h.late_late[i]),
            num(h.floor[i]),
        ]
    });
    write_csv(
        a.out.join("histogram.csv"),
        &hash_header(&cfg),
        &["center_us", "expected", "accidental", "early_early", "interference", "late_late", "floor"],
        rows,
    )?;
    man.outputs.push("histogram.csv".into());
    let pred = Predictor::new(&cfg, &opts)?;
    let peak = h.peak_bin_in(0.0, f64::INFINITY).unwrap_or(0);
    let tau = cfg.tau_mc.as_ns_f64();
    let t = pred.window_terms(tau, a.bin_size);
    println!("highest bin centre: {:.3} µs", h.grid.center_ns(peak) / 1000.0);
    match t.g2() {
        Ok(g) => println!("g2 at {:.3} µs ({} ns window): {:.4}", tau / 1000.0, a.bin_size, g),
        Err(e) => println!("g2 at {:.3} µs: {e}", tau / 1000.0),
    }
    let s = pred.singles();
    println!(
        "Stokes tags per trial {:.6e}, herald probability {:.6e}, anti-Stokes tags per read {:.6e}",
        s.stokes_per_trial, s.herald_probability, s.antistokes_per_read
    );

    if a.fringe {
        let n = a.points.max(4);
        let phis: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        let f = predict_fringe(&cfg, a.phi_s.to_radians(), &phis, &opts)?;
        let rows = phis
            .iter()
            .zip(&f.expected)
            .zip(&f.accidental)
            .map(|((p, e), acc)| vec![num(p.to_degrees()), num(*e), num(*acc)]);
        let mut header = hash_header(&cfg);
        header.push(("phi_s_deg", num(a.phi_s)));
        header.push(("visibility", num(f.visibility)));
        write_csv(a.out.join("fringe.csv"), &header, &["phi_as_deg", "expected", "accidental"], rows)?;
        man.outputs.push("fringe.csv".into());
        println!("fringe visibility (Φ_S = {}°): {:.4}", a.phi_s, f.visibility);
    }

    if a.chsh {
        let angles = ChshAngles::canonical();
        let r = match a.visibility {
            Some(v) => chsh_from_visibility(v, &angles),
            None => predict_chsh(&cfg, &angles, &opts)?,
        };
        write_csv(a.out.join("chsh.csv"), &hash_header(&cfg), &["alpha_deg", "beta_deg", "e", "sigma"], chsh_rows(&r))?;
        man.outputs.push("chsh.csv".into());
        print_chsh(&r);
    }
    man.write(&a.out)?;
    Ok(())
}

/// Setting label from phases in millidegrees.
fn phase_label(phi_s: Option<f64>, phi_as: Option<f64>) -> u64 {
    let milli = |p: Option<f64>| p.map_or(u32::MAX, |d| (d.rem_euclid(360.0) * 1000.0).round() as u32) as u64;
    milli(phi_s) << 32 | milli(phi_as)
}

fn cmd_simulate(a: SimulateArgs) -> Outcome<()> {
    let started = unix_now();
    let mut cfg = load_config(&a.config)?;
    cfg.rng_seed = match (a.seed, a.phi_s, a.phi_as) {
        (Some(s), _, _) => s,
        (None, None, None) => cfg.rng_seed,
        (None, s, a) => derive_seed(cfg.rng_seed, phase_label(s, a)),
    };
    if (a.phi_s.is_some() && cfg.analyzer_s.is_none()) || (a.phi_as.is_some() && cfg.analyzer_as.is_none()) {
        return Err(failure(EXIT_VALIDATION, anyhow!("phase given for an arm without analyzer")));
    }
    cfg = cfg.with_phases(a.phi_s.map(f64::to_radians), a.phi_as.map(f64::to_radians));
    fs::create_dir_all(&a.out)?;
    let opts = RunOptions { workers: a.workers, ..Default::default() };
    let run = run_experiment_with(&cfg, a.trials, &opts)?;
    let (fmt, name) = match a.format {
        FormatArg::Binary => (TagFormat::Binary, "tags.bin"),
        FormatArg::Text => (TagFormat::Text, "tags.txt"),
    };
    write_tags(&run.tags, a.out.join(name), fmt, &cfg.hash())?;
    fs::write(a.out.join("config.toml"), cfg.to_toml_string())?;
    let mut man = RunManifest::new(&a.config, cfg.hash_hex(), cfg.rng_seed, started);
    man.outputs = vec![name.into(), "config.toml".into()];
    man.tag_file = Some(name.into());
    (man.phi_s_deg, man.phi_as_deg) = phase_deg(&cfg);
    man.exposure = Some(RunExposure {
        n_conditional: run.counts.n_conditional,
        n_heralds: run.counts.n_heralds,
        n_unconditional: run.counts.n_unconditional,
        n_unconditional_per_herald: run.n_unconditional_per_herald,
        rep_rate_khz: run.rep_rate_khz,
        experiment_time_s: run.experiment_time_s(),
    });
    man.write(&a.out)?;
    println!(
        "{} conditional trials, {} heralds, {} unconditional trials, {} tags ({:.1} s at {} kHz)",
        run.counts.n_conditional,
        run.counts.n_heralds,
        run.counts.n_unconditional,
        run.tags.len(),
        run.experiment_time_s(),
        run.rep_rate_khz
    );
    Ok(())
}

/// One simulated run loaded back from disk.
struct LoadedRun {
    cfg: ExperimentConfig,
    manifest: RunManifest,
    data: CoincidenceData,
    tags: Vec<afc_dlcz::TimeTag>,
    exposure: Exposure,
}

fn load_run(dir: &Path) -> Outcome<LoadedRun> {
    let manifest = RunManifest::read(dir).map_err(|e| failure(EXIT_IO, e))?;
    let cfg = load_config(&dir.join("config.toml"))?;
    if cfg.hash_hex() != manifest.config_hash {
        return Err(failure(EXIT_IO, anyhow!("{}: config.toml does not match the manifest hash", dir.display())));
    }
    let tag_name = manifest
        .tag_file
        .clone()
        .ok_or_else(|| failure(EXIT_IO, anyhow!("{}: manifest names no tag file", dir.display())))?;
    let file = read_tags(dir.join(tag_name))?;
    if file.config_hash != cfg.hash() {
        return Err(failure(EXIT_IO, anyhow!("{}: tag file was produced by another config", dir.display())));
    }
    let ex = manifest
        .exposure
        .clone()
        .ok_or_else(|| failure(EXIT_IO, anyhow!("{}: manifest lacks exposure", dir.display())))?;
    let exposure = Exposure {
        n_conditional: ex.n_conditional,
        n_unconditional_per_herald: ex.n_unconditional_per_herald,
        rep_rate_khz: ex.rep_rate_khz,
    };
    let data = CoincidenceData::from_tags(&file.tags, &exposure)?;
    Ok(LoadedRun { cfg, manifest, data, tags: file.tags, exposure })
}

fn cmd_analyze(a: AnalyzeArgs) -> Outcome<()> {
    let started = unix_now();
    if a.bin_size == 0 {
        return Err(failure(EXIT_VALIDATION, anyhow!("--bin-size must be > 0")));
    }
    let runs = a.run.iter().map(|d| load_run(d)).collect::<Outcome<Vec<_>>>()?;
    let first = &runs[0];
    fs::create_dir_all(&a.out)?;
    let mut man = RunManifest::new(&a.run[0].join("config.toml"), first.manifest.config_hash.clone(), first.cfg.rng_seed, started);
    let header = vec![("config_hash", first.manifest.config_hash.clone())];
    let tau = first.cfg.tau_mc.as_ns_f64();
    let inputs: Vec<serde_json::Value> = runs
        .iter()
        .zip(&a.run)
        .map(|(r, dir)| {
            json!({
                "run": dir.display().to_string(),
                "config_hash": r.manifest.config_hash,
                "seed": r.manifest.seed,
                "phi_s_deg": r.manifest.phi_s_deg,
                "phi_as_deg": r.manifest.phi_as_deg,
                "n_conditional": r.data.n_conditional,
                "n_heralds": r.data.n_heralds,
                "n_unconditional": r.data.n_unconditional,
                "stokes_tags": r.data.stokes_tags,
                "coincidences": r.data.coincidence_sums.len(),
                "accidental_pairs": r.data.accidental_sums.len(),
            })
        })
        .collect();
    let stats: serde_json::Value = match a.mode {
        Mode::G2 => {
            let run = &runs[0];
            let tags = match a.shuffle_seed {
                Some(seed) => shuffle_antistokes(&run.tags, run.exposure.n_unconditional_per_herald, seed)?,
                None => run.tags.clone(),
            };
            let span = tags.iter().map(|t| t.time_ns).max().unwrap_or(0) * 2 + a.bin_size;
            let grid = BinGrid::aligned(a.bin_size, run.cfg.tau_mc.as_ns(), span);
            let h = build_histogram(&tags, &grid, &run.exposure)?;
            let rows = (0..grid.n_bins).map(|i| {
                vec![num(grid.center_ns(i) / 1000.0), h.counts[i].to_string(), num(h.accidental_counts[i])]
            });
            write_csv(a.out.join("histogram.csv"), &header, &["center_us", "coincidences", "accidentals"], rows)?;
            let lo = tau - a.search as f64;
            let hi = tau + a.search as f64 + 0.5;
            let peak = find_peak_bin(&h, lo, hi)
                .ok_or_else(|| failure(EXIT_OTHER, anyhow!("no bin centre within the search window")))?;
            let g = g2_estimate(&h, peak)?;
            write_csv(
                a.out.join("g2.csv"),
                &header,
                &["peak_center_us", "g2", "sigma", "lower", "upper", "small_counts", "coincidences", "accidentals"],
                [vec![
                    num(grid.center_ns(peak) / 1000.0),
                    num(g.g2),
                    num(g.sigma),
                    num(g.lower),
                    num(g.upper),
                    g.small_counts.to_string(),
                    g.coincidences.to_string(),
                    num(g.accidentals),
                ]],
            )?;
            man.outputs = vec!["histogram.csv".into(), "g2.csv".into()];
            println!(
                "peak bin at {:.3} µs (searched {:.3}–{:.3} µs): g2 = {:.3} ± {:.3} [{:.3}, {:.3}] from {} coincidences / {:.2} accidentals",
                grid.center_ns(peak) / 1000.0,
                lo / 1000.0,
                hi / 1000.0,
                g.g2,
                g.sigma,
                g.lower,
                g.upper,
                g.coincidences,
                g.accidentals
            );
            json!({
                "mode": "g2",
                "shuffle_seed": a.shuffle_seed,
                "peak_center_us": grid.center_ns(peak) / 1000.0,
                "bin_ns": a.bin_size,
                "g2": g.g2,
                "sigma": g.sigma,
                "lower": g.lower,
                "upper": g.upper,
                "coincidences": g.coincidences,
                "accidentals": g.accidentals,
            })
        }
        Mode::Fringe => {
            let center = central_peak_ns(&first.cfg)?;
            let phi_s = first.manifest.phi_s_deg.unwrap_or(0.0);
            let mut points = Vec::new();
            let mut acc_sum = 0.0;
            let mut rows = Vec::new();
            for r in &runs {
                if r.manifest.phi_s_deg.map(|p| (p - phi_s).abs() > 1e-6).unwrap_or(true) {
                    return Err(failure(EXIT_VALIDATION, anyhow!("fringe runs must share Φ_S")));
                }
                let phi_as = r.manifest.phi_as_deg.unwrap_or(0.0);
                let (c, acc) = r.data.centered_window(center, a.bin_size);
                let acc = acc as f64 / r.exposure.n_unconditional_per_herald.max(1) as f64;
                acc_sum += acc;
                points.push(FringePoint { phi_as: phi_as.to_radians(), counts: c as f64, sigma: (c as f64).max(1.0).sqrt() });
                rows.push(vec![num(phi_as), c.to_string(), num(acc)]);
            }
            let floor = a.fix_floor.then(|| acc_sum / runs.len() as f64);
            let fit = fit_fringe(&points, phi_s.to_radians(), floor)?;
            let mut h = header.clone();
            h.push(("phi_s_deg", num(phi_s)));
            h.push(("visibility", num(fit.visibility)));
            h.push(("sigma_visibility", num(fit.sigma_visibility)));
            h.push(("phase_offset_deg", num(fit.phase_offset.to_degrees())));
            h.push(("chi2_per_dof", num(fit.chi2_per_dof())));
            write_csv(a.out.join("fringe.csv"), &h, &["phi_as_deg", "coincidences", "accidentals"], rows)?;
            man.outputs = vec!["fringe.csv".into()];
            println!(
                "V = {:.4} ± {:.4}, φ0 = {:.1}° ± {:.1}°, χ²/dof = {:.2}",
                fit.visibility,
                fit.sigma_visibility,
                fit.phase_offset.to_degrees(),
                fit.sigma_phase.to_degrees(),
                fit.chi2_per_dof()
            );
            json!({
                "mode": "fringe",
                "phi_s_deg": phi_s,
                "window_ns": a.bin_size,
                "visibility": fit.visibility,
                "sigma_visibility": fit.sigma_visibility,
                "phase_offset_deg": fit.phase_offset.to_degrees(),
                "sigma_phase_deg": fit.sigma_phase.to_degrees(),
                "floor": fit.floor,
                "chi2_per_dof": fit.chi2_per_dof(),
            })
        }
        Mode::Chsh | Mode::ScanWindow | Mode::ScanBinsize => {
            let angles = ChshAngles::canonical();
            let settings = runs
                .iter()
                .map(|r| {
                    let s = r.manifest.phi_s_deg.unwrap_or(0.0).to_radians();
                    let b = r.manifest.phi_as_deg.unwrap_or(0.0).to_radians();
                    (s, b, r.data.clone())
                })
                .collect();
            let ds = ChshDataset { angles, settings };
            let center = central_peak_ns(&first.cfg)?;
            match a.mode {
                Mode::Chsh => {
                    let r = ds.s_centered(center, a.bin_size)?;
                    write_csv(a.out.join("chsh.csv"), &header, &["alpha_deg", "beta_deg", "e", "sigma"], chsh_rows(&r))?;
                    man.outputs = vec!["chsh.csv".into()];
                    print_chsh(&r);
                    json!({ "mode": "chsh", "window_ns": a.bin_size, "result": chsh_json(&r) })
                }
                Mode::ScanWindow => {
                    let centers: Vec<f64> = if a.values.is_empty() {
                        (0..=60).map(|k| 8000.0 + 100.0 * k as f64).collect()
                    } else {
                        a.values.iter().map(|v| v * 1000.0).collect()
                    };
                    let s = scan_window(&ds, a.bin_size, &centers)?;
                    write_scan(&a.out.join("scan_window.csv"), &header, "center_us", &s)?;
                    man.outputs = vec!["scan_window.csv".into()];
                    json!({ "mode": "scan-window", "bin_ns": a.bin_size, "best": scan_best_json(&s) })
                }
                _ => {
                    let sizes: Vec<u64> = if a.values.is_empty() {
                        (1..=40).map(|k| 100 * k).collect()
                    } else {
                        a.values.iter().map(|&v| v as u64).collect()
                    };
                    let s = scan_binsize(&ds, center, &sizes)?;
                    write_scan(&a.out.join("scan_binsize.csv"), &header, "bin_ns", &s)?;
                    man.outputs = vec!["scan_binsize.csv".into()];
                    json!({ "mode": "scan-binsize", "center_us": center / 1000.0, "best": scan_best_json(&s) })
                }
            }
        }
        Mode::ScanWidth => {
            let run = &runs[0];
            let widths: Vec<u64> = if a.values.is_empty() {
                vec![50, 100, 200, 300, 400, 600, 800, 1000, 1500, 2000, 3000, 4000]
            } else {
                a.values.iter().map(|&v| v as u64).collect()
            };
            let pts = scan_g2_vs_width(&run.data, tau, &widths, run.exposure.rep_rate_khz)?;
            let rows = pts.iter().map(|p| {
                vec![
                    p.width_ns.to_string(),
                    p.g2.map(|g| num(g.g2)).unwrap_or_default(),
                    p.g2.map(|g| num(g.sigma)).unwrap_or_default(),
                    num(p.coincidences_per_hour),
                    num(p.accidentals_per_hour),
                ]
            });
            write_csv(
                a.out.join("scan_width.csv"),
                &header,
                &["width_ns", "g2", "sigma", "coincidences_per_hour", "accidentals_per_hour"],
                rows,
            )?;
            man.outputs = vec!["scan_width.csv".into()];
            for p in &pts {
                match p.g2 {
                    Some(g) => println!("{:>6} ns: g2 = {:.3} ± {:.3}", p.width_ns, g.g2, g.sigma),
                    None => println!("{:>6} ns: g2 undefined", p.width_ns),
                }
            }
            let points: Vec<_> = pts
                .iter()
                .map(|p| json!({ "width_ns": p.width_ns, "g2": p.g2.map(|g| g.g2), "sigma": p.g2.map(|g| g.sigma) }))
                .collect();
            json!({ "mode": "scan-width", "points": points })
        }
    };
    man.statistics = Some(json!({ "inputs": inputs, "results": stats }));
    man.write(&a.out)?;
    Ok(())
}

fn chsh_json(r: &ChshResult) -> serde_json::Value {
    let e: Vec<_> = r
        .e_values
        .iter()
        .map(|t| json!({ "alpha_deg": t.alpha.to_degrees(), "beta_deg": t.beta.to_degrees(), "e": t.e, "sigma": t.sigma }))
        .collect();
    json!({ "s": r.s, "sigma_s": r.sigma_s, "significance": r.significance, "unphysical": r.unphysical, "e": e })
}

fn scan_best_json(s: &ScanResult) -> serde_json::Value {
    match s.best.and_then(|b| s.points[b].result.as_ref().map(|r| (s.points[b].x, r))) {
        Some((x, r)) => json!({ "x": x, "result": chsh_json(r) }),
        None => serde_json::Value::Null,
    }
}

fn write_scan(path: &Path, header: &[(&str, String)], x: &str, s: &ScanResult) -> Outcome<()> {
    let rows = s.points.iter().map(|p| match &p.result {
        Some(r) => vec![num(p.x), num(r.s), num(r.sigma_s), num(r.significance)],
        None => vec![num(p.x), String::new(), String::new(), String::new()],
    });
    write_csv(path, header, &[x, "s", "sigma_s", "significance"], rows)?;
    if let Some(b) = s.best {
        let p = &s.points[b];
        let r = p.result.as_ref().expect("best point is defined");
        println!("maximum S = {:.4} ± {:.4} at {} = {}", r.s, r.sigma_s, x, p.x);
    }
    Ok(())
}

fn parse_basis(s: &str) -> Outcome<(f64, f64)> {
    let bad = || failure(EXIT_VALIDATION, anyhow!("--basis expects DEG:V, got {s:?}"));
    let (d, v) = s.split_once(':').ok_or_else(bad)?;
    Ok((d.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?))
}

fn cmd_calibrate(a: CalibrateArgs) -> Outcome<()> {
    let started = unix_now();
    let cfg = load_config(&a.config)?;
    let targets = CalibrationTargets {
        g2: a.g2,
        visibility: a.visibility,
        basis_visibilities: a.basis.iter().map(|s| parse_basis(s)).collect::<Outcome<_>>()?,
    };
    let opts = ModelOptions { window: Nanos(a.bin_size), ..Default::default() };
    let rep = calibrate(&cfg, &targets, &opts)?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("calibrated.toml"), rep.config.to_toml_string())?;
    let mut rows = Vec::new();
    if let Some(n) = rep.antistokes_noise_per_us {
        rows.push(vec!["antistokes_noise_per_us".to_string(), String::new(), num(n)]);
        println!("antistokes_noise_per_us = {n}");
    }
    if let Some(m) = rep.mode_overlap {
        rows.push(vec!["mode_overlap".to_string(), String::new(), num(m)]);
        println!("mode_overlap = {m}");
    }
    for b in &rep.basis_overlaps {
        rows.push(vec!["basis_overlap".to_string(), num(b.phi_s_deg), num(b.mode_overlap)]);
        println!("mode_overlap (Φ_S = {}°) = {}", b.phi_s_deg, b.mode_overlap);
    }
    let mut header = hash_header(&cfg);
    header.push(("calibrated_hash", rep.config.hash_hex()));
    write_csv(a.out.join("calibration.csv"), &header, &["parameter", "phi_s_deg", "value"], rows)?;
    let mut man = RunManifest::new(&a.config, rep.config.hash_hex(), rep.config.rng_seed, started);
    man.outputs = vec!["calibrated.toml".into(), "calibration.csv".into()];
    man.write(&a.out)?;
    Ok(())
}
