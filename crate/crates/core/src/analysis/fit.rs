//! Least-squares peak fits (Levenberg–Marquardt).

use crate::error::{Error, Result};
use crate::stats::Measured;
use serde::{Deserialize, Serialize};

const MAX_ITERATIONS: usize = 500;
const N_PARAMS: usize = 4;

type Params = [f64; N_PARAMS];

/// `offset + amplitude / (1 + ((x − center)/(fwhm/2))²)`
pub fn lorentzian(x: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let u = 2.0 * (x - center) / fwhm;
    offset + amplitude / (1.0 + u * u)
}

/// `offset + amplitude · exp(−(x − center)²/(2σ²))`
pub fn gaussian(x: f64, center: f64, sigma: f64, amplitude: f64, offset: f64) -> f64 {
    let d = (x - center) / sigma;
    offset + amplitude * (-0.5 * d * d).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitQuality {
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center: Measured,
    pub fwhm: Measured,
    pub amplitude: Measured,
    pub offset: Measured,
    pub quality: FitQuality,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        lorentzian(
            x,
            self.center.value,
            self.fwhm.value,
            self.amplitude.value,
            self.offset.value,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub center: Measured,
    pub sigma: Measured,
    pub amplitude: Measured,
    pub offset: Measured,
    pub quality: FitQuality,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        gaussian(
            x,
            self.center.value,
            self.sigma.value,
            self.amplitude.value,
            self.offset.value,
        )
    }
}

/// Fits a Lorentzian peak or dip. Without `sigmas` the points are weighted
/// equally and parameter errors are scaled by the residual variance.
pub fn lorentzian_fit(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Result<LorentzianFit> {
    let guess = initial_guess(points, sigmas)?;
    let model = |x: f64, p: &Params| {
        let [c, w, a, _] = *p;
        let u = 2.0 * (x - c) / w;
        let l = 1.0 / (1.0 + u * u);
        let value = lorentzian(x, c, w, a, p[3]);
        let grad = [a * 4.0 * u * l * l / w, a * 2.0 * u * u * l * l / w, l, 1.0];
        (value, grad)
    };
    let (p, err, quality) = levenberg_marquardt(points, sigmas, guess, model)?;
    check_width(points, p[1].abs(), "fwhm")?;
    Ok(LorentzianFit {
        center: Measured::new(p[0], err[0]),
        fwhm: Measured::new(p[1].abs(), err[1]),
        amplitude: Measured::new(p[2], err[2]),
        offset: Measured::new(p[3], err[3]),
        quality,
    })
}

/// Fits a Gaussian peak or dip; see [`lorentzian_fit`].
pub fn gaussian_fit(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Result<GaussianFit> {
    let mut guess = initial_guess(points, sigmas)?;
    guess[1] /= 2.0 * (2.0 * std::f64::consts::LN_2).sqrt();
    let model = |x: f64, p: &Params| {
        let [c, s, a, _] = *p;
        let d = x - c;
        let g = (-0.5 * d * d / (s * s)).exp();
        let value = gaussian(x, c, s, a, p[3]);
        let grad = [a * g * d / (s * s), a * g * d * d / (s * s * s), g, 1.0];
        (value, grad)
    };
    let (p, err, quality) = levenberg_marquardt(points, sigmas, guess, model)?;
    check_width(points, p[1].abs(), "sigma")?;
    Ok(GaussianFit {
        center: Measured::new(p[0], err[0]),
        sigma: Measured::new(p[1].abs(), err[1]),
        amplitude: Measured::new(p[2], err[2]),
        offset: Measured::new(p[3], err[3]),
        quality,
    })
}

fn check_width(points: &[(f64, f64)], width: f64, name: &str) -> Result<()> {
    let (lo, hi) = x_range(points);
    if !(width > 0.0 && width < 10.0 * (hi - lo)) {
        return Err(Error::FitFailed(format!(
            "{name} = {width:.4} is not supported by data spanning {:.4}",
            hi - lo
        )));
    }
    Ok(())
}

fn x_range(points: &[(f64, f64)]) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        })
}

/// `[center, full width at half extremum, amplitude, offset]` from the data.
fn initial_guess(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Result<Params> {
    if points.len() < 5 {
        return Err(Error::invalid(
            "points",
            format!("{} points, need at least 5", points.len()),
        ));
    }
    if let Some(s) = sigmas {
        if s.len() != points.len() || s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "sigmas",
                "need one positive error per point",
            ));
        }
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("points", "non-finite value"));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (ymin, ymax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        });
    if ymax - ymin <= 1e-12 * ymax.abs().max(ymin.abs()).max(1e-300) {
        return Err(Error::FitFailed("flat data".into()));
    }
    let offset = 0.5 * (pts[0].1 + pts[pts.len() - 1].1);
    let (k, _) = pts
        .iter()
        .enumerate()
        .map(|(k, &(_, y))| (k, (y - offset).abs()))
        .fold(
            (0, -1.0),
            |acc, (k, d)| if d > acc.1 { (k, d) } else { acc },
        );
    let amplitude = pts[k].1 - offset;
    let half = 0.5 * amplitude.abs();
    let beyond = |j: usize| (pts[j].1 - offset).abs() < half;
    let left = (0..k).rev().find(|&j| beyond(j)).map(|j| pts[j].0);
    let right = (k + 1..pts.len()).find(|&j| beyond(j)).map(|j| pts[j].0);
    let center = pts[k].0;
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    let width = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (center - l),
        (None, Some(r)) => 2.0 * (r - center),
        (None, None) => 0.25 * (hi - lo),
    };
    Ok([center, width.max(1e-3 * (hi - lo)), amplitude, offset])
}

fn levenberg_marquardt<F>(
    points: &[(f64, f64)],
    sigmas: Option<&[f64]>,
    mut p: Params,
    model: F,
) -> Result<(Params, Params, FitQuality)>
where
    F: Fn(f64, &Params) -> (f64, Params),
{
    let weight = |i: usize| sigmas.map_or(1.0, |s| 1.0 / s[i]);
    let chi2_of = |p: &Params| -> f64 {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ((y - model(x, p).0) * weight(i)).powi(2))
            .sum()
    };
    let normal = |p: &Params| -> ([[f64; N_PARAMS]; N_PARAMS], Params) {
        let mut jtj = [[0.0; N_PARAMS]; N_PARAMS];
        let mut jtr = [0.0; N_PARAMS];
        for (i, &(x, y)) in points.iter().enumerate() {
            let (f, g) = model(x, p);
            let w = weight(i);
            let r = (y - f) * w;
            for a in 0..N_PARAMS {
                jtr[a] += g[a] * w * r;
                for b in 0..N_PARAMS {
                    jtj[a][b] += g[a] * g[b] * w * w;
                }
            }
        }
        (jtj, jtr)
    };

    let scale: f64 = points.iter().map(|(_, y)| y * y).sum::<f64>().max(1e-300);
    let mut chi2 = chi2_of(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal(&p);
        let mut damped = jtj;
        for (a, row) in damped.iter_mut().enumerate() {
            row[a] += lambda * jtj[a][a].max(1e-300);
        }
        let Some(step) = solve(damped, jtr) else {
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
            continue;
        };
        let mut trial = p;
        trial.iter_mut().zip(&step).for_each(|(q, s)| *q += s);
        let new_chi2 = chi2_of(&trial);
        if new_chi2.is_finite() && new_chi2 <= chi2 {
            let gain = chi2 - new_chi2;
            p = trial;
            chi2 = new_chi2;
            lambda = (lambda / 10.0).max(1e-12);
            let small_step = step
                .iter()
                .zip(&p)
                .all(|(s, q)| s.abs() <= 1e-13 * q.abs().max(1e-12));
            if gain <= 1e-15 * chi2.max(1e-30 * scale) || chi2 <= 1e-28 * scale || small_step {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e20 {
                // no downhill direction left: the minimum is reached to rounding
                converged = true;
                break;
            }
        }
    }
    if !converged || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed(format!(
            "no convergence after {iterations} iterations, chi2 = {chi2:.4e}"
        )));
    }
    let dof = points.len() - N_PARAMS;
    let (jtj, _) = normal(&p);
    let cov = invert(jtj).ok_or_else(|| Error::FitFailed("singular curvature matrix".into()))?;
    let var_scale = if sigmas.is_some() {
        1.0
    } else if dof > 0 {
        chi2 / dof as f64
    } else {
        0.0
    };
    let mut errors = [0.0; N_PARAMS];
    for a in 0..N_PARAMS {
        errors[a] = (cov[a][a] * var_scale).max(0.0).sqrt();
    }
    Ok((
        p,
        errors,
        FitQuality {
            chi2,
            dof,
            iterations,
        },
    ))
}

/// Solves `m·x = b` by Gauss–Jordan elimination with partial pivoting.
fn solve(mut m: [[f64; N_PARAMS]; N_PARAMS], mut b: Params) -> Option<Params> {
    for col in 0..N_PARAMS {
        let pivot = (col..N_PARAMS).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..N_PARAMS {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..N_PARAMS {
                    m[row][k] -= f * m[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let x: Params = std::array::from_fn(|i| b[i] / m[i][i]);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert(m: [[f64; N_PARAMS]; N_PARAMS]) -> Option<[[f64; N_PARAMS]; N_PARAMS]> {
    let mut out = [[0.0; N_PARAMS]; N_PARAMS];
    for col in 0..N_PARAMS {
        let mut e = [0.0; N_PARAMS];
        e[col] = 1.0;
        let x = solve(m, e)?;
        for row in 0..N_PARAMS {
            out[row][col] = x[row];
        }
    }
    Some(out)
}
