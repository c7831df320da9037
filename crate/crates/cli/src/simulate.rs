use crate::manifest::{
    sidecar_path, IndexEntry, IndexManifest, RunManifest, INDEX_NAME, MANIFEST_SCHEMA_VERSION,
};
use crate::{load_config, setup_hash, write_json, CliError, CliResult};
use clap::Args;
use homduet_core::analysis::TimestampWriter;
use homduet_core::config::{hex_string, ExperimentConfig};
use homduet_core::rng::{derive_seed, Domain};
use homduet_core::sequencer::run_experiment;
use homduet_core::RunMode;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment configuration (TOML).
    pub config: PathBuf,
    /// Overrides the config and environment seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated wall time in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// dist, indist, autocorr-n1, autocorr-n2 or all.
    #[arg(long)]
    pub mode: Option<String>,
    /// Output directory; defaults to the config's output.dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_modes(s: &str) -> CliResult<Vec<RunMode>> {
    if s == "all" {
        return Ok(RunMode::ALL.to_vec());
    }
    RunMode::parse(s)
        .map(|m| vec![m])
        .ok_or_else(|| CliError::Usage(format!("unknown mode {s:?}")))
}

/// Seed of one mode's run, independent of which other modes are simulated.
pub fn mode_seed(seed: u64, mode: RunMode) -> u64 {
    let idx = RunMode::ALL.iter().position(|&m| m == mode).unwrap_or(0) as u64;
    derive_seed(seed, Domain::Aux, idx)
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let modes = match &args.mode {
        Some(s) => parse_modes(s)?,
        None => Vec::new(),
    };
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(d) = args.duration {
        cfg.duration_s = d;
    }
    cfg.validate()?;
    let modes = if modes.is_empty() {
        vec![cfg.sequence.mode]
    } else {
        modes
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out).map_err(crate::io_context(&out))?;

    let start = Instant::now();
    let hash = setup_hash(&cfg);
    let mut index = IndexManifest::new("simulate", hex_string(&hash), cfg.seed);
    for mode in modes {
        let (entry, n_trials) = simulate_mode(&cfg, mode, hash, &out)?;
        eprintln!(
            "{}: {} ({n_trials} trials)",
            mode.name(),
            entry.timestamp_file
        );
        index.runs.push(entry);
    }
    index.wall_time_s = start.elapsed().as_secs_f64();
    write_json(&out.join(INDEX_NAME), &index)
}

fn simulate_mode(
    cfg: &ExperimentConfig,
    mode: RunMode,
    hash: [u8; 32],
    out: &Path,
) -> CliResult<(IndexEntry, u64)> {
    let start = Instant::now();
    let mode_cfg = cfg.with_mode(mode);
    let exp = mode_cfg.build_experiment()?;
    let file_name = format!("{}.homd", mode.name());
    let path = out.join(&file_name);
    let mut writer = TimestampWriter::create(&path, hash)?;
    let run = run_experiment(&exp, mode_seed(cfg.seed, mode), cfg.duration_s, &mut writer)?;
    let record_count = writer.count();
    writer.finish()?;

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool_version: crate::TOOL_VERSION.to_string(),
        config_hash: hex_string(&hash),
        seed: cfg.seed,
        mode,
        duration_s: cfg.duration_s,
        timestamp_file: file_name.clone(),
        record_count,
        wall_time_s: start.elapsed().as_secs_f64(),
        node1_start_ns: exp.node1_start_ns(),
        node2_start_ns: exp.node2_start_ns(),
        anchors_ns: exp.anchors_ns(),
        configured_g2n1: exp.stats1().g2(),
        configured_g2n2: exp.stats2().g2(),
        config: mode_cfg,
        run,
    };
    let n_trials = manifest.run.n_trials;
    let sidecar = sidecar_path(&path);
    write_json(&sidecar, &manifest)?;
    let entry = IndexEntry {
        mode,
        timestamp_file: file_name,
        manifest_file: sidecar.file_name().unwrap().to_string_lossy().into_owned(),
    };
    Ok((entry, n_trials))
}
