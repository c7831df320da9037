use homduet_core::analysis::{
    heralded_autocorrelation, hom_report, time_resolved_hom, trial_g2, HomRuns,
};
use homduet_core::config::ExperimentConfig;
use homduet_core::detection::closed_form_g2;
use homduet_core::photonics::state_overlap;
use homduet_core::sequencer::{simulate_trials, Experiment};
use homduet_core::{AnalysisWindow, DetectionLog, Gate, Measured, Port, RunMode};

const SHARE_200NS: f64 = 0.6148;

fn boosted() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dlcz.bs_arrival_prob = 0.2;
    cfg.rydberg.bs_arrival_prob = 0.15;
    cfg
}

fn run(exp: &Experiment, mode: RunMode, seed: u64, n: u64) -> (Experiment, DetectionLog) {
    let e = exp.with_mode(mode).unwrap();
    let log = simulate_trials(&e, seed, 0, n, 0.0).unwrap();
    (e, log)
}

fn full() -> AnalysisWindow {
    AnalysisWindow::new(0.0, 800.0).unwrap()
}

fn within(m: Measured, expected: f64, k: f64) -> bool {
    (m.value - expected).abs() < k * m.error
}

/// Heralded autocorrelation that detectors of efficiency `e` report for a
/// source emitting one photon with probability `p1` and two with `p2`.
fn detected_g2(p1: f64, p2: f64, e: f64) -> f64 {
    let click = p1 * e / 2.0 + p2 * (0.25 * (1.0 - (1.0 - e).powi(2)) + 0.5 * e);
    let both = p2 * 0.5 * e * e;
    both / (click * click)
}

#[test]
fn heralded_autocorrelation_recovers_source_g2() {
    let mut cfg = ExperimentConfig::default();
    cfg.dlcz.bs_arrival_prob = 0.4;
    cfg.rydberg.bs_arrival_prob = 0.4;
    let exp = cfg.build_experiment().unwrap();
    let e = cfg.detector.efficiency_a;
    for (mode, stats, source) in [
        (RunMode::AutocorrN1, exp.stats1(), 0.13),
        (RunMode::AutocorrN2, exp.stats2(), 0.09),
    ] {
        assert!((stats.g2() - source).abs() < 1e-12);
        let expected = detected_g2(stats.p1(), stats.p2(), e);
        // bright sources read low by O(p1·g2)
        assert!(expected < source && expected > source * (1.0 - 2.0 * stats.p1() * source));
        let (ex, log) = run(&exp, mode, 31, 1_500_000);
        let gate = Gate::single(ex.node1_start_ns(), full());
        let g2 = heralded_autocorrelation(&log, &gate, 10).unwrap();
        assert!(within(g2, expected, 3.0), "{mode:?}: {g2:?} vs {expected}");
    }
    assert!((detected_g2(1e-4, 0.13 * 1e-8 / 2.0, e) / 0.13 - 1.0).abs() < 1e-4);
}

#[test]
fn side_lags_normalise_to_one() {
    let exp = boosted().build_experiment().unwrap();
    let (e, log) = run(&exp, RunMode::Dist, 4, 400_000);
    let gate = Gate::new(e.anchors_ns(), full()).unwrap();
    let curve = trial_g2(&log, Port::A, Port::B, &gate, 10).unwrap();
    assert!((curve.side_mean() - 1.0).abs() < 1e-12);
    for (d, (v, err)) in curve
        .delays
        .iter()
        .zip(curve.values.iter().zip(&curve.errors))
    {
        if *d != 0 {
            assert!((v - 1.0).abs() < 3.0 * err, "lag {d}: {v} ± {err}");
        }
    }
}

#[test]
fn histogram_total_equals_zero_lag_coincidences() {
    let exp = boosted().build_experiment().unwrap();
    for mode in [RunMode::Dist, RunMode::Indist] {
        let (e, log) = run(&exp, mode, 12, 300_000);
        for length in [200.0, 450.0, 800.0] {
            let gate = Gate::new(e.anchors_ns(), full().with_length(length).unwrap()).unwrap();
            let curve = trial_g2(&log, Port::A, Port::B, &gate, 10).unwrap();
            let zero = curve.counts[curve.delays.iter().position(|&d| d == 0).unwrap()];
            let hist = time_resolved_hom(&log, &gate, 20.0).unwrap();
            assert_eq!(hist.total(), zero, "{mode:?} at {length} ns");
        }
    }
}

fn hom_runs<'a>(
    dist_exp: &Experiment,
    dist: &'a DetectionLog,
    indist: &'a DetectionLog,
) -> HomRuns<'a> {
    HomRuns {
        dist,
        indist,
        node1_start_ns: dist_exp.node1_start_ns(),
        node2_start_dist_ns: dist_exp.node2_start_ns(),
        g2n1: Measured::exact(dist_exp.stats1().g2()),
        g2n2: Measured::exact(dist_exp.stats2().g2()),
        full_length_ns: 800.0,
        max_lag: 10,
    }
}

#[test]
fn simulated_count_share_matches_waveform() {
    let exp = boosted().build_experiment().unwrap();
    let (de, dist) = run(&exp, RunMode::Dist, 2, 400_000);
    let (_, indist) = run(&exp, RunMode::Indist, 3, 1_000);
    let runs = hom_runs(&de, &dist, &indist);
    let share = runs
        .count_share(full().with_length(200.0).unwrap())
        .unwrap();
    assert!(within(share, SHARE_200NS, 3.0), "{share:?}");
    let all = runs.count_share(full()).unwrap();
    assert_eq!(all.value, 1.0);
}

#[test]
fn simulated_hom_matches_closed_form() {
    // dim enough that three-photon events stay below the statistical error
    let mut cfg = ExperimentConfig::default();
    cfg.dlcz.bs_arrival_prob = 0.08;
    cfg.rydberg.bs_arrival_prob = 0.06;
    let exp = cfg.build_experiment().unwrap();
    let (de, dist) = run(&exp, RunMode::Dist, 41, 4_000_000);
    let (_, indist) = run(&exp, RunMode::Indist, 42, 4_000_000);
    let runs = hom_runs(&de, &dist, &indist);
    let rep = hom_report(&runs, full()).unwrap();
    let x = de.stats1().p1() / de.stats2().p1();
    let eta = state_overlap(&de.state1, &de.state2).unwrap();
    let cf = closed_form_g2(x, de.stats1().g2(), de.stats2().g2(), eta).unwrap();
    assert!(within(rep.x, x, 3.0), "x {:?} vs {x}", rep.x);
    assert!(
        within(rep.g2_d, cf.g2_d, 3.0),
        "g2_d {:?} vs {}",
        rep.g2_d,
        cf.g2_d
    );
    assert!(
        within(rep.g2_i, cf.g2_i, 3.0),
        "g2_i {:?} vs {}",
        rep.g2_i,
        cf.g2_i
    );
    assert!(within(rep.visibility, cf.visibility, 3.0));
    assert!(within(rep.eta, eta, 3.0), "eta {:?} vs {eta}", rep.eta);
}
