use crate::manifest::{IndexManifest, INDEX_NAME};
use crate::plot::{Plot, Series};
use crate::{load_config, setup_hash, write_json, CliError, CliResult};
use clap::{Args, ValueEnum};
use homduet_core::analysis::{hom_report, lorentzian_fit, window_sweep, HomRuns, LorentzianFit};
use homduet_core::config::{hex_string, ExperimentConfig};
use homduet_core::detection::visibility_from_eta;
use homduet_core::photonics::windowed_indistinguishability;
use homduet_core::rng::{derive_seed, Domain};
use homduet_core::sequencer::{simulate_trials, Experiment};
use homduet_core::sources::excitation_for_g2;
use homduet_core::{AnalysisWindow, HomReport, RunMode};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// DLCZ heralded autocorrelation.
    G2n1,
    /// Node 2 detuning, MHz.
    Detuning,
    /// Analysis window length, ns.
    Window,
    /// Rydberg mean excitation number.
    Mu,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::G2n1 => "g2n1",
            Axis::Detuning => "detuning",
            Axis::Window => "window",
            Axis::Mu => "mu",
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Axis::G2n1 => "g2 of node 1",
            Axis::Detuning => "node 2 detuning (MHz)",
            Axis::Window => "window length (ns)",
            Axis::Mu => "mu",
        }
    }

    fn default_points(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        match self {
            Axis::G2n1 => vec![0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5],
            Axis::Detuning => (-8..=8).map(|k| 0.5 * k as f64).collect(),
            Axis::Window => cfg.analysis.sweep_lengths_ns.clone(),
            Axis::Mu => vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment configuration (TOML).
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated axis values; defaults depend on the axis.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Option<Vec<f64>>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Trials per run; defaults to analysis.trials_per_point.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    pub index: usize,
    pub value: f64,
    pub report: Option<HomReport>,
    pub model_eta: f64,
    pub model_visibility: f64,
    pub flag: Option<String>,
}

impl PointResult {
    /// `g2_i/g2_d`, the normalized indistinguishable coincidence rate.
    fn ratio(&self) -> Option<(f64, f64)> {
        self.report
            .as_ref()
            .map(|r| (1.0 - r.visibility.value, r.visibility.error))
    }
}

/// Base config with the axis value applied, and the node 2 detuning.
fn point_config(
    base: &ExperimentConfig,
    axis: Axis,
    value: f64,
) -> CliResult<(ExperimentConfig, f64)> {
    let mut cfg = base.clone();
    let mut detuning = 0.0;
    match axis {
        Axis::G2n1 => cfg.dlcz.excitation_param = excitation_for_g2(value)?,
        Axis::Mu => cfg.rydberg = cfg.rydberg.with_mu(value),
        Axis::Detuning => detuning = value,
        Axis::Window => cfg.analysis.window_length_ns = value,
    }
    cfg.validate()?;
    Ok((cfg, detuning))
}

/// Windowed model indistinguishability and the visibility it implies.
fn model(exp: &Experiment, window: AnalysisWindow, detuning: f64) -> CliResult<(f64, f64)> {
    let state2 = exp.node2_state_at(detuning);
    let eta = windowed_indistinguishability(
        &exp.state1,
        &state2,
        window.offset_ns,
        window.offset_ns + window.length_ns,
    )?;
    let (s1, s2) = (exp.stats1(), exp.stats2());
    let v = visibility_from_eta(s1.p1() / s2.p1(), s1.g2(), s2.g2(), eta)?;
    Ok((eta, v))
}

struct Runs {
    dist_exp: Experiment,
    dist: homduet_core::DetectionLog,
    indist: homduet_core::DetectionLog,
}

fn simulate_pair(
    cfg: &ExperimentConfig,
    detuning: f64,
    seed: u64,
    index: u64,
    trials: u64,
) -> CliResult<Runs> {
    let dist_exp = cfg.with_mode(RunMode::Dist).build_experiment()?;
    let indist_exp = cfg.with_mode(RunMode::Indist).build_experiment()?;
    let dist = simulate_trials(
        &dist_exp,
        derive_seed(seed, Domain::Sweep, 2 * index),
        0,
        trials,
        detuning,
    )?;
    let indist = simulate_trials(
        &indist_exp,
        derive_seed(seed, Domain::Sweep, 2 * index + 1),
        0,
        trials,
        detuning,
    )?;
    Ok(Runs {
        dist_exp,
        dist,
        indist,
    })
}

fn hom_runs<'a>(cfg: &ExperimentConfig, runs: &'a Runs) -> HomRuns<'a> {
    let exp = &runs.dist_exp;
    HomRuns {
        dist: &runs.dist,
        indist: &runs.indist,
        node1_start_ns: exp.node1_start_ns(),
        node2_start_dist_ns: exp.node2_start_ns(),
        g2n1: homduet_core::Measured::exact(exp.stats1().g2()),
        g2n2: homduet_core::Measured::exact(exp.stats2().g2()),
        full_length_ns: cfg.analysis.window_length_ns,
        max_lag: cfg.analysis.max_lag,
    }
}

fn evaluate(
    cfg: &ExperimentConfig,
    detuning: f64,
    seed: u64,
    index: usize,
    value: f64,
    trials: u64,
) -> PointResult {
    let mut result = PointResult {
        index,
        value,
        report: None,
        model_eta: f64::NAN,
        model_visibility: f64::NAN,
        flag: None,
    };
    let outcome = (|| -> CliResult<()> {
        let runs = simulate_pair(cfg, detuning, seed, index as u64, trials)?;
        let window = cfg.analysis.window()?;
        (result.model_eta, result.model_visibility) = model(&runs.dist_exp, window, detuning)?;
        result.report = Some(hom_report(&hom_runs(cfg, &runs), window)?);
        Ok(())
    })();
    if let Err(e) = outcome {
        result.flag = Some(e.to_string());
    }
    result
}

/// Window axis: one pair of runs analyzed at every length.
fn window_points(
    cfg: &ExperimentConfig,
    seed: u64,
    lengths: &[f64],
    trials: u64,
) -> CliResult<Vec<PointResult>> {
    let runs = simulate_pair(cfg, 0.0, seed, 0, trials)?;
    let full = cfg.analysis.window()?;
    let rows = window_sweep(&hom_runs(cfg, &runs), full.offset_ns, lengths);
    rows.into_iter()
        .enumerate()
        .map(|(index, row)| {
            let (model_eta, model_visibility) =
                model(&runs.dist_exp, full.with_length(row.length_ns)?, 0.0)?;
            Ok(PointResult {
                index,
                value: row.length_ns,
                report: row.report,
                model_eta,
                model_visibility,
                flag: row.flag,
            })
        })
        .collect()
}

pub fn run(args: SweepArgs) -> CliResult<()> {
    let start = Instant::now();
    let mut base = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let points = args
        .points
        .clone()
        .unwrap_or_else(|| args.axis.default_points(&base));
    if points.is_empty() {
        return Err(CliError::Usage("no sweep points".into()));
    }
    let trials = args.trials.unwrap_or(base.analysis.trials_per_point);
    let configs = points
        .iter()
        .map(|&v| point_config(&base, args.axis, v))
        .collect::<CliResult<Vec<_>>>()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&base.output.dir));
    let point_dir = out.join("points");
    std::fs::create_dir_all(&point_dir).map_err(crate::io_context(&point_dir))?;

    let results = if args.axis == Axis::Window {
        let r = window_points(&base, base.seed, &points, trials)?;
        for p in &r {
            write_point(&point_dir, p)?;
        }
        r
    } else {
        run_parallel(&configs, &points, base.seed, trials, args.jobs, &point_dir)?
    };
    if results.iter().all(|r| r.report.is_none()) {
        let why = results
            .iter()
            .find_map(|r| r.flag.clone())
            .unwrap_or_default();
        return Err(CliError::Statistics(format!(
            "every sweep point failed: {why}"
        )));
    }

    let axis = args.axis.name();
    let fit = if args.axis == Axis::Detuning {
        fit_dip(&results)
    } else {
        None
    };
    let mut index = IndexManifest::new("sweep", hex_string(&setup_hash(&base)), base.seed);
    let mut emit = |name: String, contents: &str| -> CliResult<()> {
        let p = out.join(&name);
        std::fs::write(&p, contents).map_err(crate::io_context(&p))?;
        index.outputs.push(name);
        Ok(())
    };
    let table = table_csv(&results);
    emit(format!("sweep_{axis}.csv"), &table)?;
    emit(
        format!("sweep_{axis}.svg"),
        &plot(args.axis, &results, fit.as_ref()).render(),
    )?;
    if let Some(f) = &fit {
        let text =
            serde_json::to_string_pretty(&FitReport::from(f)).expect("fit serialises") + "\n";
        emit(format!("fit_{axis}.json"), &text)?;
    }
    index.outputs.extend(
        results
            .iter()
            .map(|r| format!("points/{}", point_name(r.index))),
    );
    index.wall_time_s = start.elapsed().as_secs_f64();
    write_json(&out.join(INDEX_NAME), &index)?;
    print!("{table}");
    Ok(())
}

fn run_parallel(
    configs: &[(ExperimentConfig, f64)],
    points: &[f64],
    seed: u64,
    trials: u64,
    jobs: usize,
    point_dir: &Path,
) -> CliResult<Vec<PointResult>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<PointResult>>> = Mutex::new(vec![None; points.len()]);
    let failure: Mutex<Option<CliError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(points.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= points.len() {
                    break;
                }
                let (cfg, detuning) = &configs[k];
                let r = evaluate(cfg, *detuning, seed, k, points[k], trials);
                if let Err(e) = write_point(point_dir, &r) {
                    failure.lock().unwrap().get_or_insert(e);
                }
                results.lock().unwrap()[k] = Some(r);
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect())
}

fn point_name(index: usize) -> String {
    format!("point_{index:03}.json")
}

fn write_point(dir: &Path, p: &PointResult) -> CliResult<()> {
    write_json(&dir.join(point_name(p.index)), p)
}

#[derive(Debug, Serialize)]
struct FitReport {
    schema_version: u32,
    model: &'static str,
    center: homduet_core::Measured,
    fwhm: homduet_core::Measured,
    amplitude: homduet_core::Measured,
    offset: homduet_core::Measured,
    chi2: f64,
    dof: usize,
}

impl From<&LorentzianFit> for FitReport {
    fn from(f: &LorentzianFit) -> Self {
        FitReport {
            schema_version: 1,
            model: "lorentzian",
            center: f.center,
            fwhm: f.fwhm,
            amplitude: f.amplitude,
            offset: f.offset,
            chi2: f.quality.chi2,
            dof: f.quality.dof,
        }
    }
}

/// Lorentzian through `g2_i/g2_d` against detuning.
fn fit_dip(results: &[PointResult]) -> Option<LorentzianFit> {
    let data: Vec<(f64, f64, f64)> = results
        .iter()
        .filter_map(|r| r.ratio().map(|(y, e)| (r.value, y, e)))
        .filter(|p| p.2 > 0.0)
        .collect();
    let points: Vec<(f64, f64)> = data.iter().map(|p| (p.0, p.1)).collect();
    let sigmas: Vec<f64> = data.iter().map(|p| p.2).collect();
    match lorentzian_fit(&points, Some(&sigmas)) {
        Ok(f) => Some(f),
        Err(e) => {
            eprintln!("warning: dip fit failed: {e}");
            None
        }
    }
}

pub fn table_csv(results: &[PointResult]) -> String {
    let mut s = String::from(
        "index,value,visibility,visibility_err,eta,eta_err,g2_d,g2_d_err,g2_i,g2_i_err,x,x_err,count_share,model_visibility,model_eta,flag\n",
    );
    for r in results {
        let _ = write!(s, "{},{},", r.index, r.value);
        match &r.report {
            Some(rep) => {
                for m in [rep.visibility, rep.eta, rep.g2_d, rep.g2_i, rep.x] {
                    let _ = write!(s, "{:.6},{:.6},", m.value, m.error);
                }
                let _ = write!(s, "{:.6},", rep.count_share.value);
            }
            None => s.push_str(&",".repeat(11)),
        }
        let flag = r.flag.clone().unwrap_or_default().replace(',', ";");
        let _ = writeln!(s, "{:.6},{:.6},{flag}", r.model_visibility, r.model_eta);
    }
    s
}

fn measured_series(
    results: &[PointResult],
    f: fn(&HomReport) -> homduet_core::Measured,
) -> Vec<(f64, f64, f64)> {
    results
        .iter()
        .filter_map(|r| {
            r.report
                .as_ref()
                .map(|rep| (r.value, f(rep).value, f(rep).error))
        })
        .collect()
}

fn model_series(results: &[PointResult], f: fn(&PointResult) -> f64) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.value, f(r)))
        .filter(|p| p.1.is_finite())
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn plot(axis: Axis, results: &[PointResult], fit: Option<&LorentzianFit>) -> Plot {
    let mut series;
    let y_label;
    match axis {
        Axis::G2n1 => {
            y_label = "visibility";
            series = vec![
                Series::points("simulated", measured_series(results, |r| r.visibility)),
                Series::line("closed form", model_series(results, |r| r.model_visibility)),
            ];
        }
        Axis::Detuning => {
            y_label = "g2_i / g2_d";
            let data = results
                .iter()
                .filter_map(|r| r.ratio().map(|(y, e)| (r.value, y, e)))
                .collect();
            series = vec![
                Series::points("simulated", data),
                Series::line(
                    "overlap model",
                    model_series(results, |r| 1.0 - r.model_visibility),
                ),
            ];
            if let Some(f) = fit {
                let (lo, hi) = results
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
                        (a.min(r.value), b.max(r.value))
                    });
                let curve = (0..=200)
                    .map(|k| lo + (hi - lo) * k as f64 / 200.0)
                    .map(|x| (x, f.eval(x)))
                    .collect();
                series.push(Series::line("Lorentzian fit", curve));
            }
        }
        Axis::Window | Axis::Mu => {
            y_label = "indistinguishability";
            series = vec![
                Series::points("simulated", measured_series(results, |r| r.eta)),
                Series::line("overlap model", model_series(results, |r| r.model_eta)),
            ];
        }
    }
    Plot {
        title: format!("{} sweep", axis.name()),
        x_label: axis.label().into(),
        y_label: y_label.into(),
        series,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_configs_apply_axis_values() {
        let base = ExperimentConfig::default();
        let (c, d) = point_config(&base, Axis::G2n1, 0.2).unwrap();
        assert!(
            (homduet_core::sources::g2_from_excitation(c.dlcz.excitation_param) - 0.2).abs()
                < 1e-12
        );
        assert_eq!(d, 0.0);
        let (_, d) = point_config(&base, Axis::Detuning, 1.5).unwrap();
        assert_eq!(d, 1.5);
        assert!(matches!(
            point_config(&base, Axis::G2n1, 0.9),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn table_rows_match_header_width() {
        let rows = vec![PointResult {
            index: 0,
            value: 1.0,
            report: None,
            model_eta: 0.9,
            model_visibility: 0.8,
            flag: Some("failed, badly".into()),
        }];
        let t = table_csv(&rows);
        let mut lines = t.lines();
        let n = lines.next().unwrap().split(',').count();
        assert_eq!(lines.next().unwrap().split(',').count(), n);
    }
}
