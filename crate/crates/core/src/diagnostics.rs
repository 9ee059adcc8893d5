//! Evaluation diagnostics: kinetic-energy spectra, ΔE, score and spread
//! curves, free-running stability.

use crate::closure::{Closure, QgClosedDynamics};
use crate::dynamics::{Dynamics, EnsembleForecast, Propagate, StreamKey};
use crate::error::{Error, Result};
use crate::field::{Grid, LayeredField};
use crate::qg::QgModel;
use crate::scoring::{evaluate_windows, LossConfig};
use std::fmt::Write as _;

/// Isotropic spectrum in annular bins of width `dk`; bin `i` is centred at
/// `(i + 1) dk`. Bins reach the corner of the spectral grid so the binned
/// total is the full domain-mean kinetic energy.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicSpectrum {
    pub dk: f64,
    pub kmax: f64,
    pub kappa: Vec<f64>,
    /// Energy density per unit wavenumber.
    pub energy: Vec<f64>,
    pub snapshots: usize,
}

impl IsotropicSpectrum {
    /// Domain-mean kinetic energy, `Σ E_i dk`.
    pub fn total(&self) -> f64 {
        self.energy.iter().sum::<f64>() * self.dk
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kappa,energy\n");
        for (k, e) in self.kappa.iter().zip(&self.energy) {
            let _ = writeln!(s, "{k:e},{e:e}");
        }
        s
    }
}

/// Running sum of per-snapshot binned kinetic energy.
#[derive(Debug, Clone)]
pub struct SpectrumAccumulator {
    grid: Grid,
    bin_of: Vec<usize>,
    kappa2: Vec<f64>,
    sum: Vec<f64>,
    count: usize,
}

impl SpectrumAccumulator {
    pub fn new(model: &QgModel) -> Self {
        let grid = *model.grid();
        let dk = grid.dk();
        let kappa2 = model.ops().kappa2().to_vec();
        let bin_of: Vec<usize> = kappa2
            .iter()
            .map(|k2| (k2.sqrt() / dk + 0.5).floor() as usize)
            .collect();
        let nbins = bin_of.iter().copied().max().unwrap_or(0);
        SpectrumAccumulator {
            grid,
            bin_of,
            kappa2,
            sum: vec![0.0; nbins],
            count: 0,
        }
    }

    pub fn add(&mut self, model: &QgModel, q: &LayeredField) -> Result<()> {
        q.check_grid(&self.grid)?;
        if q.layers != 2 {
            return Err(Error::DimensionMismatch {
                expected: "2 layers".into(),
                got: q.layers.to_string(),
            });
        }
        let psi = model.invert_pv(&model.ops().forward(q)?);
        let (w1, w2) = model.layer_weights();
        let n2 = (self.grid.len() as f64).powi(2);
        let dk = self.grid.dk();
        let (p1, p2) = (psi.layer(0), psi.layer(1));
        for k in 0..self.grid.len() {
            let b = self.bin_of[k];
            if b == 0 {
                continue;
            }
            let e = 0.5 * self.kappa2[k] * (w1 * p1[k].norm_sqr() + w2 * p2[k].norm_sqr()) / n2;
            self.sum[b - 1] += e / dk;
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &SpectrumAccumulator) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<IsotropicSpectrum> {
        if self.count == 0 {
            return Err(Error::InvalidArgument(
                "spectrum of an empty snapshot set".into(),
            ));
        }
        let dk = self.grid.dk();
        Ok(IsotropicSpectrum {
            dk,
            kmax: self.grid.kmax(),
            kappa: (1..=self.sum.len()).map(|i| i as f64 * dk).collect(),
            energy: self.sum.iter().map(|s| s / self.count as f64).collect(),
            snapshots: self.count,
        })
    }
}

/// Snapshot-averaged, depth-weighted isotropic kinetic-energy spectrum of PV states.
pub fn kinetic_energy_spectrum<'a>(
    states: impl IntoIterator<Item = &'a LayeredField>,
    model: &QgModel,
) -> Result<IsotropicSpectrum> {
    let mut acc = SpectrumAccumulator::new(model);
    for s in states {
        acc.add(model, s)?;
    }
    acc.finish()
}

/// Cut-off wavenumber of the spectral error, two thirds of `kmax`.
pub fn cutoff(kmax: f64) -> f64 {
    2.0 * kmax / 3.0
}

/// Mean squared log ratio of two spectra below the cut-off, by the midpoint
/// rule on the bins. The first bin extends down to zero and the last is
/// clipped at the cut-off.
pub fn spectrum_error(model: &IsotropicSpectrum, truth: &IsotropicSpectrum) -> Result<f64> {
    if model.dk != truth.dk || model.kmax != truth.kmax || model.energy.len() != truth.energy.len()
    {
        return Err(Error::InvalidArgument(
            "spectra use different binnings".into(),
        ));
    }
    let kc = cutoff(truth.kmax);
    let dk = truth.dk;
    let mut acc = 0.0;
    for (i, (&a, &b)) in model.energy.iter().zip(&truth.energy).enumerate() {
        let centre = (i + 1) as f64 * dk;
        let lo = if i == 0 { 0.0 } else { centre - 0.5 * dk };
        if lo >= kc {
            break;
        }
        let hi = (centre + 0.5 * dk).min(kc);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "nonpositive spectrum value in bin at kappa {centre:e}"
            )));
        }
        acc += (a / b).ln().powi(2) * (hi - lo);
    }
    Ok(acc / kc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCurve {
    pub lead_steps: Vec<usize>,
    pub lead_hours: Vec<f64>,
    pub mean_score: Vec<f64>,
    /// Windows contributing at each lead.
    pub n_windows: Vec<usize>,
    pub unstable_windows: usize,
}

impl ScoreCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lead_steps,lead_hours,mean_energy_score,n_windows\n");
        for k in 0..self.lead_steps.len() {
            let _ = writeln!(
                s,
                "{},{},{:e},{}",
                self.lead_steps[k], self.lead_hours[k], self.mean_score[k], self.n_windows[k]
            );
        }
        s
    }
}

/// Mean energy score per lead over every disjoint validation window of
/// length `horizon`. Unstable windows are counted and left out.
pub fn score_curve<D: Dynamics, S: AsRef<[f64]> + Sync>(
    dynamics: &D,
    model: &D::Model,
    series: &[S],
    horizon: usize,
    ensemble_size: usize,
    dt: f64,
    seed: u64,
) -> Result<ScoreCurve> {
    let cfg = LossConfig::new(horizon, ensemble_size);
    let n = cfg.n_windows(series.len());
    if horizon == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} validation states are not enough for horizon {horizon}",
            series.len()
        )));
    }
    let windows: Vec<usize> = (0..n).collect();
    let scores = evaluate_windows(dynamics, model, series, &windows, &cfg, seed)?;
    let mut sum = vec![0.0; horizon];
    let mut count = 0;
    for s in &scores {
        if let Some(l) = &s.leads {
            for (a, b) in sum.iter_mut().zip(l) {
                *a += b;
            }
            count += 1;
        }
    }
    Ok(ScoreCurve {
        lead_steps: (1..=horizon).collect(),
        lead_hours: (1..=horizon).map(|m| m as f64 * dt / 3600.0).collect(),
        mean_score: sum
            .iter()
            .map(|s| {
                if count > 0 {
                    s / count as f64
                } else {
                    f64::NAN
                }
            })
            .collect(),
        n_windows: vec![count; horizon],
        unstable_windows: n - count,
    })
}

/// RMS deviation of the members from the ensemble mean at each lead.
pub fn spread_curve(ens: &EnsembleForecast) -> Result<Vec<f64>> {
    let members: Vec<&Vec<Vec<f64>>> = ens.surviving().collect();
    let s = members.len();
    if s < 2 {
        return Err(Error::InvalidArgument(format!(
            "spread needs at least 2 surviving members, got {s}"
        )));
    }
    let leads = members.iter().map(|m| m.len()).min().unwrap();
    let mut out = Vec::with_capacity(leads);
    for m in 0..leads {
        let d = members[0][m].len();
        let mut mean = vec![0.0; d];
        for mem in &members {
            for (a, b) in mean.iter_mut().zip(&mem[m]) {
                *a += b / s as f64;
            }
        }
        let ss: f64 = members
            .iter()
            .map(|mem| {
                mem[m]
                    .iter()
                    .zip(&mean)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
            })
            .sum();
        out.push((ss / (s * d) as f64).sqrt());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRunReport {
    pub requested_steps: usize,
    pub survived_steps: usize,
    pub survived_seconds: f64,
    pub stable: bool,
    pub final_state: LayeredField,
    /// Time-mean spectrum after discarding the first tenth of the run;
    /// absent when the run became unstable.
    pub spectrum: Option<IsotropicSpectrum>,
}

impl LongRunReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        let _ = writeln!(s, "requested_steps,{}", self.requested_steps);
        let _ = writeln!(s, "survived_steps,{}", self.survived_steps);
        let _ = writeln!(s, "survived_days,{}", self.survived_seconds / 86400.0);
        let _ = writeln!(s, "stable,{}", self.stable);
        if let Some(sp) = &self.spectrum {
            let _ = writeln!(s, "spectrum_snapshots,{}", sp.snapshots);
            let _ = writeln!(s, "kinetic_energy,{:e}", sp.total());
        }
        s
    }
}

/// Free-running closed simulation from `x0`, sampling the spectrum every
/// `sample_every` steps over the stationary segment.
pub fn long_run(
    dynamics: &QgClosedDynamics,
    closure: &Closure,
    x0: &LayeredField,
    steps: usize,
    sample_every: usize,
    seed: u64,
) -> Result<LongRunReport> {
    if steps == 0 || sample_every == 0 {
        return Err(Error::InvalidArgument(
            "long run needs at least one step and a positive sampling interval".into(),
        ));
    }
    let model = dynamics.model();
    let dt = model.params().dt;
    let discard = steps / 10;
    let mut acc = SpectrumAccumulator::new(model);
    let mut runner = dynamics.start(
        closure,
        &x0.values,
        StreamKey {
            seed,
            window: u64::MAX,
            member: 0,
        },
    )?;
    let mut last = x0.clone();
    for n in 1..=steps {
        match runner.advance() {
            Ok(_) => {
                let state = runner.state();
                if n > discard && (n - discard) % sample_every == 0 {
                    acc.add(model, state)?;
                }
                if n == steps {
                    last = state.clone();
                }
            }
            Err(Error::Instability { .. }) => {
                return Ok(LongRunReport {
                    requested_steps: steps,
                    survived_steps: n - 1,
                    survived_seconds: (n - 1) as f64 * dt,
                    stable: false,
                    final_state: runner.state().clone(),
                    spectrum: None,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LongRunReport {
        requested_steps: steps,
        survived_steps: steps,
        survived_seconds: steps as f64 * dt,
        stable: true,
        final_state: last,
        spectrum: if acc.count() > 0 {
            Some(acc.finish()?)
        } else {
            None
        },
    })
}
