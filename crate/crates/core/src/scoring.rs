//! Energy score, its ensemble estimator, and the windowed online loss.

use crate::dynamics::{rollout_ensemble, Dynamics};
use crate::error::{Error, Result};
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::f64::consts::PI;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        });
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean distance between a point forecast and the observation.
pub fn energy_score_deterministic(yhat: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(y.len(), yhat.len())?;
    Ok(dist(yhat, y))
}

/// Unbiased ensemble estimator of the energy score,
/// `(1/S) Σ‖y_s − y‖ − 1/(2S(S−1)) Σ_{s≠s'} ‖y_s − y_s'‖`.
pub fn energy_score<M: AsRef<[f64]>>(members: &[M], y: &[f64]) -> Result<f64> {
    let s = members.len();
    if s < 2 {
        return Err(Error::InvalidArgument(format!(
            "energy score needs at least 2 members, got {s}"
        )));
    }
    for m in members {
        check_dim(y.len(), m.as_ref().len())?;
    }
    // Summed as pairwise triangle-inequality excesses
    // ‖y_s − y‖ + ‖y_s' − y‖ − ‖y_s − y_s'‖, each nonnegative; clamping them
    // keeps roundoff from pushing an exact zero below it.
    let to_obs: Vec<f64> = members.iter().map(|m| dist(m.as_ref(), y)).collect();
    let mut total = 0.0;
    for i in 0..s {
        for j in i + 1..s {
            let pair = dist(members[i].as_ref(), members[j].as_ref());
            total += (to_obs[i] + to_obs[j] - pair).max(0.0);
        }
    }
    Ok(total / (s * (s - 1)) as f64)
}

/// Energy score of a sharp (S = 1) or ensemble forecast.
pub fn score_members<M: AsRef<[f64]>>(members: &[M], y: &[f64]) -> Result<f64> {
    match members.len() {
        1 => energy_score_deterministic(members[0].as_ref(), y),
        _ => energy_score(members, y),
    }
}

/// Closed-form CRPS of `N(mu, sigma²)` at `y`.
pub fn gaussian_crps_oracle(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let z = (y - mu) / sigma;
    Ok(sigma * (z * (2.0 * n.cdf(z) - 1.0) + 2.0 * n.pdf(z) - 1.0 / PI.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Window length in model steps.
    pub window: usize,
    /// Ensemble size; 1 selects the deterministic reduction.
    pub ensemble_size: usize,
    /// Loss charged per lead of a window in which any member became unstable.
    pub instability_penalty: f64,
}

impl LossConfig {
    pub fn new(window: usize, ensemble_size: usize) -> Self {
        LossConfig {
            window,
            ensemble_size,
            instability_penalty: 1e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.ensemble_size == 0 {
            return Err(Error::InvalidArgument(
                "window and ensemble size must be >= 1".into(),
            ));
        }
        if !(self.instability_penalty >= 0.0) {
            return Err(Error::InvalidArgument(
                "instability penalty must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Number of disjoint windows in a series of `len` states; the trailing
    /// remainder is dropped.
    pub fn n_windows(&self, len: usize) -> usize {
        if len == 0 {
            0
        } else {
            (len - 1) / self.window
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowScore {
    pub index: usize,
    /// Score at leads `1..=w`; `None` when the window became unstable.
    pub leads: Option<Vec<f64>>,
    pub failed_at: Option<usize>,
}

impl WindowScore {
    pub fn total(&self, cfg: &LossConfig) -> f64 {
        match &self.leads {
            Some(l) => l.iter().sum(),
            None => cfg.instability_penalty * cfg.window as f64,
        }
    }
}

/// Roll out and score the windows with the given indices. Window `j` starts
/// from `series[j w]` and is scored against `series[j w + 1 ..= j w + w]`.
pub fn evaluate_windows<D: Dynamics, S: AsRef<[f64]> + Sync>(
    dynamics: &D,
    model: &D::Model,
    series: &[S],
    windows: &[usize],
    cfg: &LossConfig,
    seed: u64,
) -> Result<Vec<WindowScore>> {
    cfg.validate()?;
    let available = cfg.n_windows(series.len());
    if available == 0 {
        return Err(Error::InvalidArgument(format!(
            "series of {} states is too short for window length {}",
            series.len(),
            cfg.window
        )));
    }
    if let Some(&j) = windows.iter().find(|&&j| j >= available) {
        return Err(Error::InvalidArgument(format!(
            "window {j} out of range ({available} available)"
        )));
    }
    let w = cfg.window;
    let size = if dynamics.is_stochastic() {
        cfg.ensemble_size
    } else {
        1
    };
    let results: Vec<Result<WindowScore>> = windows
        .par_iter()
        .map(|&j| {
            let x0 = series[j * w].as_ref();
            let ens = rollout_ensemble(dynamics, model, x0, w, size, seed, j as u64)?;
            let failed_at = ens.failed_at.iter().flatten().min().copied();
            if failed_at.is_some() {
                return Ok(WindowScore {
                    index: j,
                    leads: None,
                    failed_at,
                });
            }
            let mut leads = Vec::with_capacity(w);
            for m in 0..w {
                let y = series[j * w + m + 1].as_ref();
                let members: Vec<&[f64]> = ens.members.iter().map(|t| t[m].as_slice()).collect();
                let s = if cfg.ensemble_size == 1 || members.len() == 1 {
                    // a deterministic model scores the same for any S
                    energy_score_deterministic(members[0], y)?
                } else {
                    energy_score(&members, y)?
                };
                leads.push(s);
            }
            Ok(WindowScore {
                index: j,
                leads: Some(leads),
                failed_at: None,
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Mean score over scored (window, lead) pairs, reduced in the order given.
pub fn mean_loss(scores: &[WindowScore], cfg: &LossConfig) -> f64 {
    if scores.is_empty() {
        return f64::NAN;
    }
    let total: f64 = scores.iter().map(|s| s.total(cfg)).sum();
    total / (scores.len() * cfg.window) as f64
}

/// Online loss over every disjoint window of the series.
pub fn online_loss<D: Dynamics, S: AsRef<[f64]> + Sync>(
    dynamics: &D,
    model: &D::Model,
    series: &[S],
    cfg: &LossConfig,
    seed: u64,
) -> Result<f64> {
    cfg.validate()?;
    let windows: Vec<usize> = (0..cfg.n_windows(series.len())).collect();
    let scores = evaluate_windows(dynamics, model, series, &windows, cfg, seed)?;
    Ok(mean_loss(&scores, cfg))
}
