use crate::manifest::{read_json, sidecar_path, IndexManifest, RunManifest, INDEX_NAME};
use crate::plot::{Plot, Series};
use crate::{write_json, CliError, CliResult, ReportFormat};
use clap::Args;
use homduet_core::analysis::{
    heralded_autocorrelation, hom_report, interpolate_at_share, parse_timestamps,
    time_resolved_hom, window_sweep, DeltaHistogram, HomRuns, InterpolatedRow, SweepRow,
    REPORT_SCHEMA_VERSION,
};
use homduet_core::config::{hex_string, ExperimentConfig};
use homduet_core::{DetectionLog, Gate, HomReport, Measured, RunMode};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Count shares reported as interpolated sweep rows.
pub const INTERPOLATED_SHARES: [f64; 2] = [0.75, 0.90];

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Timestamp files, or a simulate `manifest.json` standing for all of its runs.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// `full`, `sweep`, or comma-separated window lengths in ns.
    #[arg(long, default_value = "full")]
    pub window: String,
    #[arg(long, value_enum, default_value = "json")]
    pub report: ReportFormat,
    /// Analyze files whose config hashes differ.
    #[arg(long)]
    pub force: bool,
    /// Directory for report, histogram and plot files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct LoadedRun {
    pub path: PathBuf,
    pub manifest: RunManifest,
    pub header_hash: String,
    pub log: DetectionLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    Full,
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Windows {
    Spec(WindowSpec),
    Lengths(Vec<f64>),
}

pub fn parse_windows(s: &str) -> CliResult<Windows> {
    match s {
        "full" => Ok(Windows::Spec(WindowSpec::Full)),
        "sweep" => Ok(Windows::Spec(WindowSpec::Sweep)),
        _ => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| *v > 0.0 && v.is_finite())
                    .ok_or_else(|| CliError::Usage(format!("bad window length {t:?}")))
            })
            .collect::<CliResult<Vec<f64>>>()
            .map(Windows::Lengths),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct G2Estimate {
    pub value: f64,
    pub error: f64,
    /// `measured` from an autocorrelation run, else `configured`.
    pub source: &'static str,
}

impl G2Estimate {
    fn measured(&self) -> Measured {
        Measured::new(self.value, self.error)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub inputs: Vec<String>,
    pub g2n1: G2Estimate,
    pub g2n2: G2Estimate,
    pub reports: Vec<HomReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub interpolated: Vec<InterpolatedRow>,
}

/// Replaces index manifests by the timestamp files they list.
fn expand_inputs(files: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for f in files {
        if f.extension().is_some_and(|e| e == "json") {
            let index: IndexManifest = read_json(f)?;
            if index.runs.is_empty() {
                return Err(CliError::Usage(format!("{} lists no runs", f.display())));
            }
            let dir = f.parent().unwrap_or(Path::new("."));
            out.extend(index.runs.iter().map(|r| dir.join(&r.timestamp_file)));
        } else {
            out.push(f.clone());
        }
    }
    Ok(out)
}

pub fn load_run(path: &Path) -> CliResult<LoadedRun> {
    let manifest: RunManifest = read_json(&sidecar_path(path))?;
    let reader = parse_timestamps(path)?;
    let header_hash = hex_string(&reader.header().config_hash);
    let log = DetectionLog::from_records(reader)?;
    Ok(LoadedRun {
        path: path.to_path_buf(),
        manifest,
        header_hash,
        log,
    })
}

fn check_hashes(runs: &[LoadedRun], force: bool) -> CliResult<String> {
    let reference = runs[0].manifest.config_hash.clone();
    for r in runs {
        for h in [&r.header_hash, &r.manifest.config_hash] {
            if *h != reference {
                let msg = format!(
                    "config hash of {} ({}) differs from {} ({})",
                    r.path.display(),
                    &h[..12],
                    runs[0].path.display(),
                    &reference[..12]
                );
                if !force {
                    return Err(CliError::Config(format!(
                        "{msg}; pass --force to analyze anyway"
                    )));
                }
                eprintln!("warning: {msg}");
            }
        }
    }
    Ok(reference)
}

fn g2_estimate(
    run: Option<&LoadedRun>,
    anchor: impl Fn(&RunManifest) -> f64,
    configured: f64,
    cfg: &ExperimentConfig,
) -> CliResult<G2Estimate> {
    match run {
        Some(r) => {
            let gate = Gate::single(anchor(&r.manifest), cfg.analysis.window()?);
            let g = heralded_autocorrelation(&r.log, &gate, cfg.analysis.max_lag)?;
            Ok(G2Estimate {
                value: g.value,
                error: g.error,
                source: "measured",
            })
        }
        None => Ok(G2Estimate {
            value: configured,
            error: 0.0,
            source: "configured",
        }),
    }
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let start = Instant::now();
    let windows = parse_windows(&args.window)?;
    let files = expand_inputs(&args.files)?;
    let runs = files
        .iter()
        .map(|p| load_run(p))
        .collect::<CliResult<Vec<_>>>()?;
    let config_hash = check_hashes(&runs, args.force)?;

    let mut by_mode: BTreeMap<&'static str, &LoadedRun> = BTreeMap::new();
    for r in &runs {
        if by_mode.insert(r.manifest.mode.name(), r).is_some() {
            return Err(CliError::Usage(format!(
                "more than one {} run given",
                r.manifest.mode.name()
            )));
        }
    }
    let get = |m: RunMode| by_mode.get(m.name()).copied();
    let base = get(RunMode::Dist).unwrap_or(&runs[0]);
    let cfg = &base.manifest.config;

    let g2n1 = g2_estimate(
        get(RunMode::AutocorrN1),
        |m| m.node1_start_ns,
        base.manifest.configured_g2n1,
        cfg,
    )?;
    let g2n2 = g2_estimate(
        get(RunMode::AutocorrN2),
        |m| m.node2_start_ns,
        base.manifest.configured_g2n2,
        cfg,
    )?;

    let mut report = AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: crate::TOOL_VERSION.to_string(),
        config_hash: config_hash.clone(),
        inputs: files.iter().map(|p| p.display().to_string()).collect(),
        g2n1,
        g2n2,
        reports: Vec::new(),
        sweep: Vec::new(),
        interpolated: Vec::new(),
    };
    let mut histograms = Vec::new();

    match (get(RunMode::Dist), get(RunMode::Indist)) {
        (Some(d), Some(i)) => {
            let full = cfg.analysis.window()?;
            let hom = HomRuns {
                dist: &d.log,
                indist: &i.log,
                node1_start_ns: d.manifest.node1_start_ns,
                node2_start_dist_ns: d.manifest.node2_start_ns,
                g2n1: report.g2n1.measured(),
                g2n2: report.g2n2.measured(),
                full_length_ns: full.length_ns,
                max_lag: cfg.analysis.max_lag,
            };
            match &windows {
                Windows::Spec(WindowSpec::Full) => report.reports.push(hom_report(&hom, full)?),
                Windows::Lengths(ls) => {
                    for &l in ls {
                        report.reports.push(hom_report(&hom, full.with_length(l)?)?);
                    }
                }
                Windows::Spec(WindowSpec::Sweep) => {
                    report.sweep = window_sweep(&hom, full.offset_ns, &cfg.analysis.sweep_lengths_ns);
                    report.interpolated = INTERPOLATED_SHARES
                        .iter()
                        .filter_map(|&s| interpolate_at_share(&report.sweep, s))
                        .collect();
                    if report.sweep.iter().all(|r| r.report.is_none()) {
                        let why = report.sweep.iter().find_map(|r| r.flag.clone()).unwrap_or_default();
                        return Err(CliError::Statistics(format!("every sweep row failed: {why}")));
                    }
                }
            }
            histograms.push(("dist", time_resolved_hom(&d.log, &hom.dist_gate(full), cfg.analysis.histogram_bin_ns)?));
            histograms.push(("indist", time_resolved_hom(&i.log, &hom.indist_gate(full), cfg.analysis.histogram_bin_ns)?));
        }
        (None, None) if get(RunMode::AutocorrN1).is_some() || get(RunMode::AutocorrN2).is_some() => {}
        _ => {
            return Err(CliError::Usage(
                "visibility needs both a dist and an indist run; autocorrelation runs may be given alone".into(),
            ))
        }
    }

    let text = match args.report {
        ReportFormat::Json => {
            serde_json::to_string_pretty(&report).expect("report serialises") + "\n"
        }
        ReportFormat::Csv => report_csv(&report),
    };
    print!("{text}");

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(crate::io_context(out))?;
        let mut index = IndexManifest::new("analyze", config_hash, base.manifest.seed);
        let mut emit = |name: String, contents: &str| -> CliResult<()> {
            let p = out.join(&name);
            std::fs::write(&p, contents).map_err(crate::io_context(&p))?;
            index.outputs.push(name);
            Ok(())
        };
        let ext = match args.report {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        };
        emit(format!("report.{ext}"), &text)?;
        for (name, h) in &histograms {
            emit(format!("histogram_{name}.csv"), &histogram_csv(h))?;
        }
        if !report.sweep.is_empty() {
            emit("window_sweep.csv".into(), &sweep_csv(&report.sweep))?;
            emit(
                "window_sweep.svg".into(),
                &sweep_plot(&report.sweep).render(),
            )?;
        }
        index.wall_time_s = start.elapsed().as_secs_f64();
        write_json(&out.join(INDEX_NAME), &index)?;
    }
    Ok(())
}

pub fn report_csv(r: &AnalysisReport) -> String {
    if !r.sweep.is_empty() {
        return sweep_csv(&r.sweep);
    }
    let mut s = String::new();
    if r.reports.is_empty() {
        s.push_str("quantity,value,error,source\n");
        for (name, g) in [("g2n1", &r.g2n1), ("g2n2", &r.g2n2)] {
            let _ = writeln!(s, "{name},{},{},{}", g.value, g.error, g.source);
        }
        return s;
    }
    s.push_str(HomReport::CSV_HEADER);
    s.push('\n');
    for rep in &r.reports {
        s.push_str(&rep.csv_row());
        s.push('\n');
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{},flag\n", HomReport::CSV_HEADER);
    let empty_cols = HomReport::CSV_HEADER.split(',').count() - 2;
    for row in rows {
        match &row.report {
            Some(rep) => {
                let _ = writeln!(s, "{},", rep.csv_row());
            }
            None => {
                let flag = row.flag.clone().unwrap_or_default().replace(',', ";");
                let _ = writeln!(s, ",{}{},{flag}", row.length_ns, ",".repeat(empty_cols));
            }
        }
    }
    s
}

pub fn histogram_csv(h: &DeltaHistogram) -> String {
    let mut s = String::from("bin_lo_ns,bin_hi_ns,count,error\n");
    for (k, (&c, &e)) in h.counts.iter().zip(&h.errors).enumerate() {
        let _ = writeln!(s, "{},{},{c},{e}", h.edges[k], h.edges[k + 1]);
    }
    s
}

fn sweep_plot(rows: &[SweepRow]) -> Plot {
    let pick = |f: fn(&HomReport) -> Measured| {
        rows.iter()
            .filter_map(|r| r.report.as_ref().map(|rep| (r.length_ns, f(rep))))
            .map(|(l, m)| (l, m.value, m.error))
            .collect()
    };
    Plot {
        title: "Window sweep".into(),
        x_label: "window length (ns)".into(),
        y_label: "value".into(),
        series: vec![
            Series::points("indistinguishability", pick(|r| r.eta)),
            Series::points("visibility", pick(|r| r.visibility)),
            Series::points("count share", pick(|r| r.count_share)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_parsing() {
        assert_eq!(
            parse_windows("full").unwrap(),
            Windows::Spec(WindowSpec::Full)
        );
        assert_eq!(
            parse_windows("sweep").unwrap(),
            Windows::Spec(WindowSpec::Sweep)
        );
        assert_eq!(
            parse_windows("200, 800").unwrap(),
            Windows::Lengths(vec![200.0, 800.0])
        );
        assert!(matches!(parse_windows("-5"), Err(CliError::Usage(_))));
        assert!(matches!(parse_windows("abc"), Err(CliError::Usage(_))));
    }

    #[test]
    fn flagged_sweep_rows_keep_column_count() {
        let rows = vec![SweepRow {
            length_ns: 100.0,
            report: None,
            flag: Some("too few, counts".into()),
        }];
        let csv = sweep_csv(&rows);
        let mut lines = csv.lines();
        let header_cols = lines.next().unwrap().split(',').count();
        assert_eq!(lines.next().unwrap().split(',').count(), header_cols);
    }
}
