use super::{TemporalMode, TimeGrid};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;

/// Two-time detection density on a square grid, row index `t1`, column `t2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2D {
    grid: TimeGrid,
    values: Vec<f64>,
    total_mass: f64,
}

impl Density2D {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_bins() + j]
    }

    /// Density integrated over `t2`, as a function of `t1`.
    pub fn marginal_t1(&self) -> Vec<f64> {
        let n = self.grid.n_bins();
        let dt = self.grid.dt();
        self.values
            .chunks_exact(n)
            .map(|row| row.iter().sum::<f64>() * dt)
            .collect()
    }

    /// Density integrated over `t1`, as a function of `t2`.
    pub fn marginal_t2(&self) -> Vec<f64> {
        let n = self.grid.n_bins();
        let dt = self.grid.dt();
        let mut out = vec![0.0; n];
        for row in self.values.chunks_exact(n) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v * dt);
        }
        out
    }

    /// Mass with both times inside `[t_lo, t_hi)`.
    pub fn window_mass(&self, t_lo: f64, t_hi: f64) -> f64 {
        let n = self.grid.n_bins();
        let inside: Vec<bool> = self.grid.times().map(|t| t >= t_lo && t < t_hi).collect();
        let dt2 = self.grid.dt() * self.grid.dt();
        (0..n)
            .filter(|&i| inside[i])
            .map(|i| {
                (0..n)
                    .filter(|&j| inside[j])
                    .map(|j| self.values[i * n + j])
                    .sum::<f64>()
            })
            .sum::<f64>()
            * dt2
    }

    /// Mass of `Δt = t2 − t1` falling into each histogram bin `[edges[k], edges[k+1])`.
    ///
    /// Inside a pair of grid bins the two times are uniform, so the difference of
    /// bins `d` apart is spread as a triangle of half-width `dt` around `d·dt`;
    /// that kernel is integrated exactly over every histogram bin.
    pub fn delta_histogram(&self, edges: &[f64]) -> Result<Vec<f64>> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "edges",
                "need at least two increasing edges",
            ));
        }
        let n = self.grid.n_bins();
        let dt = self.grid.dt();
        let mut diag = vec![0.0; 2 * n - 1];
        for i in 0..n {
            for j in 0..n {
                diag[j + n - 1 - i] += self.values[i * n + j];
            }
        }
        let tri_cdf = |x: f64, c: f64| -> f64 {
            let u = (x - c) / dt;
            if u <= -1.0 {
                0.0
            } else if u <= 0.0 {
                0.5 * (1.0 + u) * (1.0 + u)
            } else if u < 1.0 {
                1.0 - 0.5 * (1.0 - u) * (1.0 - u)
            } else {
                1.0
            }
        };
        let mut hist = vec![0.0; edges.len() - 1];
        for (idx, mass) in diag.iter().enumerate() {
            if *mass == 0.0 {
                continue;
            }
            let c = (idx as f64 - (n - 1) as f64) * dt;
            let m = mass * dt * dt;
            for (h, e) in hist.iter_mut().zip(edges.windows(2)) {
                if e[1] <= c - dt || e[0] >= c + dt {
                    continue;
                }
                *h += m * (tri_cdf(e[1], c) - tri_cdf(e[0], c));
            }
        }
        Ok(hist)
    }
}

/// Probability density of detecting one photon in each beamsplitter output at
/// times `(t1, t2)` when modes `m1` and `m2` enter the two input ports.
///
/// With `interfering` the two-photon amplitudes subtract,
/// `|ψ1(t1)ψ2(t2) − ψ1(t2)ψ2(t1)|²/4`; otherwise the photons are treated as
/// distinguishable and the probabilities add.
pub fn joint_coincidence_density(
    m1: &TemporalMode,
    m2: &TemporalMode,
    interfering: bool,
) -> Result<Density2D> {
    if m1.grid() != m2.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *m1.grid();
    let n = grid.n_bins();
    let a = m1.phased_amplitudes();
    let b = m2.phased_amplitudes();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = if interfering {
                (a[i] * b[j] - a[j] * b[i]).norm_sqr()
            } else {
                a[i].norm_sqr() * b[j].norm_sqr() + a[j].norm_sqr() * b[i].norm_sqr()
            };
            values.push(0.25 * v);
        }
    }
    let total_mass = values.iter().sum::<f64>() * grid.dt() * grid.dt();
    Ok(Density2D {
        grid,
        values,
        total_mass,
    })
}

/// Draws a time pair from `|ψ1(t1)ψ2(t2) + s·ψ1(t2)ψ2(t1)|²` with `s = ±1`,
/// sampling `t1` from its marginal and then `t2` from the conditional row.
/// Linear in the number of grid bins. `overlap` is `⟨ψ1|ψ2⟩`.
pub(crate) fn sample_pair<R: Rng + ?Sized>(
    psi1: &[Complex64],
    psi2: &[Complex64],
    overlap: Complex64,
    sign: f64,
    grid: &TimeGrid,
    rng: &mut R,
) -> (f64, f64) {
    let marginal = psi1.iter().zip(psi2).map(|(a, b)| {
        (a.norm_sqr() + b.norm_sqr() + sign * 2.0 * (a * b.conj() * overlap).re).max(0.0)
    });
    let k1 = draw_index(marginal, rng);
    let (a1, b1) = (psi1[k1], psi2[k1]);
    let conditional = psi1
        .iter()
        .zip(psi2)
        .map(|(a, b)| (a1 * b + sign * a * b1).norm_sqr());
    let k2 = draw_index(conditional, rng);
    let t = |k: usize, u: f64| grid.t_start() + (k as f64 + u) * grid.dt();
    let (u1, u2) = (rng.random::<f64>(), rng.random::<f64>());
    (t(k1, u1), t(k2, u2))
}

/// Inverse-CDF draw of an index from non-negative weights.
fn draw_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let mut cdf: Vec<f64> = Vec::with_capacity(weights.size_hint().0);
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let target = rng.random::<f64>() * acc;
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::super::{make_waveform, mode_overlap};
    use super::*;
    use rand::SeedableRng;

    fn wave() -> TemporalMode {
        make_waveform(60.0, 180.0, TimeGrid::default()).unwrap()
    }

    #[test]
    fn identical_modes_bunch_completely() {
        let m = wave();
        let d = joint_coincidence_density(&m, &m, true).unwrap();
        assert!(d.total_mass().abs() < 1e-9);
        let c = joint_coincidence_density(&m, &m, false).unwrap();
        assert!((c.total_mass() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn marginals_integrate_to_total() {
        let m = wave();
        let d = joint_coincidence_density(&m, &m.with_detuning(0.6), true).unwrap();
        let dt = d.grid().dt();
        let s1: f64 = d.marginal_t1().iter().sum::<f64>() * dt;
        let s2: f64 = d.marginal_t2().iter().sum::<f64>() * dt;
        assert!((s1 - d.total_mass()).abs() < 1e-12);
        assert!((s2 - d.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn delta_histogram_conserves_mass() {
        let m = wave();
        let d = joint_coincidence_density(&m, &m, false).unwrap();
        let edges: Vec<f64> = (0..=81).map(|k| -810.0 + 20.0 * k as f64).collect();
        let h = d.delta_histogram(&edges).unwrap();
        let total: f64 = h.iter().sum();
        assert!((total - d.total_mass()).abs() < 1e-12);
        assert!(d.delta_histogram(&[1.0]).is_err());
    }

    #[test]
    fn window_mass_of_full_grid_is_total() {
        let m = wave();
        let d = joint_coincidence_density(&m, &m.with_detuning(1.0), true).unwrap();
        assert!((d.window_mass(0.0, 800.0) - d.total_mass()).abs() < 1e-12);
        assert!(d.window_mass(0.0, 200.0) < d.total_mass());
    }

    #[test]
    fn sampled_pairs_stay_on_grid() {
        let m = wave();
        let n = m.with_detuning(1.0);
        let o = mode_overlap(&m, &n).unwrap();
        let (a, b) = (m.phased_amplitudes(), n.phased_amplitudes());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (t1, t2) = sample_pair(&a, &b, o, -1.0, m.grid(), &mut rng);
            assert!((0.0..800.0).contains(&t1) && (0.0..800.0).contains(&t2));
        }
    }
}
