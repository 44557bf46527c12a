//! Reconstruction metrics and regularization tuning.

use faer::{c64, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg;
use crate::sketch::SketchOperator;
use crate::solve::{SvdSolver, DEFAULT_RANK_EPS};

/// `|x_ref - x_hat|^2 / |x_ref|^2`.
pub fn relative_error(x_ref: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x_ref.len() != x_hat.len() {
        return Err(invalid(format!(
            "lengths differ: {} vs {}",
            x_ref.len(),
            x_hat.len()
        )));
    }
    let den: f64 = x_ref.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(invalid("reference vector is zero"));
    }
    let num: f64 = x_ref
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / den)
}

/// Complex counterpart of [`relative_error`].
pub fn relative_error_complex(x_ref: &[c64], x_hat: &[c64]) -> Result<f64> {
    if x_ref.len() != x_hat.len() {
        return Err(invalid(format!(
            "lengths differ: {} vs {}",
            x_ref.len(),
            x_hat.len()
        )));
    }
    let den: f64 = x_ref.iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        return Err(invalid("reference vector is zero"));
    }
    let num: f64 = x_ref
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(num / den)
}

/// `20 log10(|S_T^+ s| / |S_T^+ n|)` for a cached system `S`, signal data `s = S x` and
/// noise data `n`. Infinite when the noise maps to zero.
pub fn output_snr_with(
    solver: &SvdSolver,
    signal: &[c64],
    noise: &[c64],
    delta: f64,
) -> Result<f64> {
    let num = linalg::norm(&solver.solve(signal, delta)?);
    let den = linalg::norm(&solver.solve(noise, delta)?);
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (num / den).log10())
}

/// Output SNR of the (optionally sketched) Tikhonov reconstruction of `A x + e`.
pub fn output_snr(
    a: MatRef<'_, c64>,
    sketch: Option<&SketchOperator>,
    x: &[f64],
    e: &[c64],
    delta: f64,
) -> Result<f64> {
    if x.len() != a.ncols() || e.len() != a.nrows() {
        return Err(invalid("signal or noise does not match the operator"));
    }
    let clean = linalg::mat_vec(a, &linalg::real_vec_to_complex(x));
    let (s, signal, noise) = match sketch {
        Some(sk) => (
            sk.apply_matrix(a)?,
            sk.apply_vector(&clean)?,
            sk.apply_vector(e)?,
        ),
        None => (a.to_owned(), clean, e.to_vec()),
    };
    let solver = SvdSolver::new(s.as_ref(), DEFAULT_RANK_EPS)?;
    output_snr_with(&solver, &signal, &noise, delta)
}

/// Logarithmic grid of `per_decade` points per decade over `[lo, hi] * scale`.
pub fn delta_grid(lo: f64, hi: f64, per_decade: usize, scale: f64) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|i| scale * lo * 10f64.powf(i as f64 / per_decade as f64))
        .collect()
}

/// Default tuning grid: 25 points per decade over `[1e-6, 1e2] * sigma_max^2`.
pub fn default_delta_grid(sigma_max: f64) -> Vec<f64> {
    delta_grid(1e-6, 1e2, 25, sigma_max * sigma_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub delta: f64,
    pub output_snr_db: f64,
    /// `|x_LS - S_T^+ S x|^2 / |x_LS|^2`.
    pub signal_error: f64,
    /// False when no grid point met the signal-error target; the smallest delta is
    /// returned then.
    pub feasible: bool,
}

/// Grid search for the regularization maximizing output SNR with signal error at most
/// `target`. The signal error compares the reconstruction of the noiseless data with
/// `x_ls`.
pub fn tune_delta(
    solver: &SvdSolver,
    signal: &[c64],
    noise: &[c64],
    x_ls: &[c64],
    target: f64,
    grid: &[f64],
) -> Result<DeltaChoice> {
    if grid.is_empty() {
        return Err(invalid("empty regularization grid"));
    }
    let mut best: Option<DeltaChoice> = None;
    let mut fallback: Option<DeltaChoice> = None;
    for &delta in grid {
        let xs = solver.solve(signal, delta)?;
        let signal_error = relative_error_complex(x_ls, &xs)?;
        let snr = output_snr_with(solver, signal, noise, delta)?;
        let choice = DeltaChoice {
            delta,
            output_snr_db: snr,
            signal_error,
            feasible: signal_error <= target,
        };
        if fallback.is_none() {
            fallback = Some(DeltaChoice {
                feasible: false,
                ..choice
            });
        }
        if choice.feasible && best.is_none_or(|b| snr > b.output_snr_db) {
            best = Some(choice);
        }
    }
    Ok(best.or(fallback).unwrap())
}
