use homduet_core::photonics::{
    joint_coincidence_density, make_waveform, mode_overlap, state_overlap,
    windowed_indistinguishability,
};
use homduet_core::{PhotonStateMixture, TemporalMode, TimeGrid};
use num_complex::Complex64;
use std::f64::consts::PI;

const RISE: f64 = 60.0;
const TAU: f64 = 180.0;

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

fn pulse(t: f64) -> f64 {
    if t < RISE {
        (PI * t / (2.0 * RISE)).sin().powi(2)
    } else {
        (-(t - RISE) / TAU).exp()
    }
}

fn long_grid() -> TimeGrid {
    TimeGrid::new(0.0, 1.0, 3000).unwrap()
}

#[test]
fn count_share_at_200_ns_matches_quadrature() {
    let grid = TimeGrid::default();
    let mode = make_waveform(RISE, TAU, grid).unwrap();
    let inside = simpson(pulse, 0.0, RISE, 600) + simpson(pulse, RISE, 200.0, 2000);
    let total = simpson(pulse, 0.0, RISE, 600) + simpson(pulse, RISE, 800.0, 8000);
    let oracle = inside / total;
    let grid_share = mode.mass_between(0.0, 200.0);
    assert!(
        (grid_share - oracle).abs() < 2e-3,
        "{grid_share} vs {oracle}"
    );
    // golden value frozen from the oracle above
    assert!((oracle - 0.6148).abs() < 5e-4, "{oracle}");
    assert!((mode.mass_between(0.0, 800.0) - 1.0).abs() < 1e-9);
}

#[test]
fn share_over_a_longer_window() {
    let mode = make_waveform(RISE, TAU, TimeGrid::default()).unwrap();
    let total = simpson(pulse, 0.0, RISE, 600) + simpson(pulse, RISE, 800.0, 8000);
    let oracle = (simpson(pulse, 0.0, RISE, 600) + simpson(pulse, RISE, 425.0, 4000)) / total;
    assert!((mode.mass_between(0.0, 425.0) - oracle).abs() < 2e-3);
    assert!((oracle - 0.8998).abs() < 5e-4, "{oracle}");
}

/// `|∫ e^{−t/τ} e^{i2πΔνt} dt / τ|²` evaluated by quadrature.
fn exponential_overlap_quadrature(dnu_mhz: f64) -> f64 {
    let w = 2.0 * PI * dnu_mhz * 1e-3;
    let end = 40.0 * TAU;
    let re = simpson(|t| (-t / TAU).exp() * (w * t).cos(), 0.0, end, 200_000) / TAU;
    let im = simpson(|t| (-t / TAU).exp() * (w * t).sin(), 0.0, end, 200_000) / TAU;
    re * re + im * im
}

#[test]
fn exponential_overlap_is_lorentzian() {
    let a = make_waveform(0.0, TAU, long_grid()).unwrap();
    for dnu in [0.0, 0.2, 0.5, 1.0 / (2.0 * PI * TAU * 1e-3), 1.5, 3.0] {
        let closed = 1.0 / (1.0 + (2.0 * PI * dnu * 1e-3 * TAU).powi(2));
        let quad = exponential_overlap_quadrature(dnu);
        assert!((closed - quad).abs() < 1e-6, "{dnu}: {closed} vs {quad}");
        let o = mode_overlap(&a, &a.with_detuning(dnu)).unwrap().norm_sqr();
        assert!((o - closed).abs() < 2e-3, "{dnu}: {o} vs {closed}");
    }
    let half = mode_overlap(&a, &a.with_detuning(0.884))
        .unwrap()
        .norm_sqr();
    assert!((half - 0.5).abs() < 0.01);
}

#[test]
fn overlap_is_bounded_and_conjugate_symmetric() {
    let g = TimeGrid::default();
    let a = make_waveform(RISE, TAU, g).unwrap().with_detuning(0.3);
    let b = make_waveform(20.0, 120.0, g).unwrap().with_detuning(-0.7);
    let ab = mode_overlap(&a, &b).unwrap();
    let ba = mode_overlap(&b, &a).unwrap();
    assert!((ab - ba.conj()).norm() < 1e-12);
    assert!(ab.norm() <= 1.0 + 1e-9);
}

/// `Tr(ρ1ρ2)` with both density matrices built explicitly on the grid.
fn dense_trace(r1: &PhotonStateMixture, r2: &PhotonStateMixture) -> f64 {
    let g = *r1.grid();
    let n = g.n_bins();
    let vector = |m: &TemporalMode| -> Vec<Complex64> {
        m.amplitude()
            .iter()
            .enumerate()
            .map(|(k, a)| {
                a * Complex64::cis(2.0 * PI * m.detuning_mhz() * 1e-3 * g.time(k)) * g.dt().sqrt()
            })
            .collect()
    };
    let matrix = |r: &PhotonStateMixture| -> Vec<Complex64> {
        let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
        for (w, m) in r.components() {
            let v = vector(m);
            for i in 0..n {
                for j in 0..n {
                    rho[i * n + j] += *w * v[i] * v[j].conj();
                }
            }
        }
        rho
    };
    let (a, b) = (matrix(r1), matrix(r2));
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            tr += a[i * n + j] * b[j * n + i];
        }
    }
    assert!(tr.im.abs() < 1e-9);
    tr.re
}

#[test]
fn jitter_mixture_overlap_matches_dense_trace() {
    let grid = TimeGrid::new(0.0, 4.0, 250).unwrap();
    let mode = make_waveform(0.0, TAU, grid).unwrap();
    for sigma in [0.1, 0.3, 0.8] {
        let r1 = PhotonStateMixture::gaussian_jitter(&mode, sigma, 9).unwrap();
        let r2 = PhotonStateMixture::gaussian_jitter(&mode.with_detuning(0.2), sigma, 9).unwrap();
        let fast = state_overlap(&r1, &r2).unwrap();
        let dense = dense_trace(&r1, &r2);
        assert!((fast - dense).abs() < 1e-6, "σ={sigma}: {fast} vs {dense}");
        assert!((r1.purity() - dense_trace(&r1, &r1)).abs() < 1e-6);
    }
}

#[test]
fn detuned_exponentials_give_quarter_coincidence_mass() {
    let grid = TimeGrid::new(0.0, 2.0, 1500).unwrap();
    let a2 = make_waveform(0.0, TAU, grid).unwrap();
    let d = joint_coincidence_density(&a2, &a2.with_detuning(0.884), true).unwrap();
    assert!((d.total_mass() - 0.25).abs() < 0.01, "{}", d.total_mass());
    let o = mode_overlap(&a2, &a2.with_detuning(0.884))
        .unwrap()
        .norm_sqr();
    assert!((d.total_mass() - (1.0 - o) / 2.0).abs() < 1e-6);
    let m1: f64 = d.marginal_t1().iter().sum::<f64>() * grid.dt();
    assert!((m1 - d.total_mass()).abs() < 1e-9);
}

#[test]
fn windowed_indistinguishability_grows_as_the_window_shrinks() {
    let mode = make_waveform(RISE, TAU, TimeGrid::default()).unwrap();
    let r1 = PhotonStateMixture::gaussian_jitter(&mode, 0.3, 11).unwrap();
    let r2 = r1.clone();
    let full = state_overlap(&r1, &r2).unwrap();
    let lengths = [100.0, 200.0, 400.0, 600.0, 800.0];
    let etas: Vec<f64> = lengths
        .iter()
        .map(|&l| windowed_indistinguishability(&r1, &r2, 0.0, l).unwrap())
        .collect();
    assert!(etas.windows(2).all(|w| w[0] >= w[1]), "{etas:?}");
    assert!((etas[4] - full).abs() < 1e-9);
}
