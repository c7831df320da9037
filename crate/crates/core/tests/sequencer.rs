use homduet_core::analysis::TimestampRecord;
use homduet_core::config::ExperimentConfig;
use homduet_core::rng::{substream, Domain};
use homduet_core::sequencer::{calibration_scan, drift_step, run_experiment, CalibrationConfig};
use homduet_core::{CalibrationState, Channel, DriftModel, RunMode};

#[test]
fn random_walk_spread_after_one_hour() {
    let drift = DriftModel {
        coupling_drift_rate_mhz_per_h: 0.0,
        resonance_walk_sigma_mhz_per_sqrt_h: 0.5,
        ..DriftModel::default()
    };
    let runs = 4000;
    let steps = 12;
    let finals: Vec<f64> = (0..runs)
        .map(|r| {
            let mut rng = substream(3, Domain::Drift, r);
            let mut s = CalibrationState::default();
            for _ in 0..steps {
                s = drift_step(&drift, &s, 3600.0 / steps as f64, &mut rng).unwrap();
            }
            s.current_detuning
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / runs as f64;
    let var = finals.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
    assert!((var.sqrt() / 0.5 - 1.0).abs() < 0.1, "std {}", var.sqrt());
}

#[test]
fn shot_noise_scan_recovers_center_within_fit_error() {
    let cfg = CalibrationConfig::default();
    let n = 400;
    let mut pulls = Vec::new();
    let mut sq = 0.0;
    for k in 0..n {
        let truth = -1.0 + 2.0 * k as f64 / n as f64;
        let state = CalibrationState {
            current_detuning: truth,
            ..Default::default()
        };
        let mut rng = substream(5, Domain::Calibration, k);
        let (center, next) = calibration_scan(&state, &cfg, 0.0, &mut rng).unwrap();
        let residual = next.current_detuning;
        assert!((center.value - truth - (-residual)).abs() < 1e-12);
        pulls.push(residual / center.error);
        sq += residual * residual;
    }
    let rms = (sq / n as f64).sqrt();
    assert!(
        rms < cfg.resonance_width_mhz / cfg.counts_per_point.sqrt(),
        "rms {rms}"
    );
    let pull_sd = (pulls.iter().map(|p| p * p).sum::<f64>() / n as f64).sqrt();
    assert!((0.8..1.25).contains(&pull_sd), "pull spread {pull_sd}");
    let inside = pulls.iter().filter(|p| p.abs() <= 1.0).count() as f64 / n as f64;
    assert!((0.6..0.76).contains(&inside), "{inside} within 1σ");
}

#[test]
fn duty_cycle_bookkeeping() {
    let mut cfg = ExperimentConfig::default();
    cfg.calibration.enabled = false;
    let exp = cfg.build_experiment().unwrap();
    let mut sink: Vec<TimestampRecord> = Vec::new();
    let duration = 10.0 * 1.25;
    let log = run_experiment(&exp, 1, duration, &mut sink).unwrap();
    let expected = (4.0 / 12.0) * (17.0 * 12.0 / 1250.0);
    let measured = log.interrogation_time_s / duration;
    assert!(
        (measured / expected - 1.0).abs() < 0.05,
        "{measured} vs {expected}"
    );
}

#[test]
fn every_click_belongs_to_a_heralded_trial() {
    let mut cfg = ExperimentConfig::default();
    cfg.dlcz.herald_prob = 0.2;
    cfg.dlcz.bs_arrival_prob = 0.3;
    cfg.rydberg.bs_arrival_prob = 0.3;
    let exp = cfg.build_experiment().unwrap();
    let span = cfg.photon.grid().unwrap().span();
    let mut recs: Vec<TimestampRecord> = Vec::new();
    let log = run_experiment(&exp, 8, 5.0, &mut recs).unwrap();
    let mut current = None;
    let mut clicks = 0;
    for r in &recs {
        match r.channel {
            Channel::Spad1 => {
                assert_eq!(r.time_ps, 0);
                current = Some(r.trial_index);
            }
            Channel::Spad2a | Channel::Spad2b => {
                clicks += 1;
                assert_eq!(Some(r.trial_index), current, "click without herald");
                let t = r.time_ns();
                let in_photon = exp
                    .anchors_ns()
                    .iter()
                    .any(|&a| t >= a - 1e-3 && t <= a + span + 1e-3);
                assert!(in_photon, "click at {t} ns");
            }
            Channel::Marker => {}
        }
    }
    assert!(clicks > 1000);
    // node 1 photons start exactly one memory delay after their herald
    assert_eq!(log.node1_start_ns, cfg.dlcz.memory_delay_ns);
    // the two pulses of a distinguishable trial cannot overlap
    let lead = log.node1_start_ns - log.node2_start_ns;
    assert!(lead >= 5.0 * cfg.photon.duration_ns() && lead >= span);
}

#[test]
fn perfect_single_photons_never_coincide() {
    let mut cfg = ExperimentConfig::default().with_mode(RunMode::Indist);
    cfg.drift = DriftModel::disabled();
    cfg.calibration.enabled = false;
    cfg.photon.node1_jitter_mhz = 0.0;
    cfg.photon.node2_jitter_mhz = 0.0;
    cfg.photon.jitter_nodes = 1;
    cfg.dlcz.herald_prob = 0.2;
    cfg.dlcz.excitation_param = 1e-12;
    cfg.dlcz.bs_arrival_prob = 0.5;
    cfg.rydberg.g2_baseline = 0.0;
    cfg.rydberg.purity_weight = 0.0;
    cfg.rydberg.bs_arrival_prob = 0.5;
    let exp = cfg.build_experiment().unwrap();
    assert!(exp.stats1().p2() < 1e-12 && exp.stats2().p2() == 0.0);
    let mut sink: Vec<TimestampRecord> = Vec::new();
    let log = run_experiment(&exp, 2, 12.5, &mut sink).unwrap();
    assert!(log.n_trials > 10_000);
    assert_eq!(log.coincidence_trials, 0);
}
