//! Evaluation of a trained closure and the no-closure baseline against
//! validation data.

use crate::config::{ExperimentConfig, CODE_VERSION};
use crate::dataset::{check_disjoint, Dataset};
use crate::error::{CliError, Result};
use crate::train::{read_params, CheckpointMeta, PARAMS};
use closure_lab::closure::{ClosureParams, QgClosedDynamics};
use closure_lab::diagnostics::{
    kinetic_energy_spectrum, long_run, score_curve, spectrum_error, spread_curve,
    IsotropicSpectrum, LongRunReport, ScoreCurve,
};
use closure_lab::dynamics::{rollout_ensemble, Dynamics};
use closure_lab::qg::{QgModel, SECONDS_PER_YEAR};
use closure_lab::rng;
use std::fmt::Write as _;
use std::path::Path;

/// Noise-stream domains of the evaluation runs.
const SCORE_STREAM: u64 = 1;
const LONG_RUN_STREAM: u64 = 2;
const SPREAD_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub name: String,
    pub score: ScoreCurve,
    pub long_run: LongRunReport,
    /// ΔE against the validation spectrum; absent for unstable runs.
    pub delta_e: Option<f64>,
    /// Spread per lead averaged (in the mean-square sense) over the
    /// spread initial conditions; absent when fewer than two members of
    /// some forecast survived.
    pub spread: Option<Vec<f64>>,
}

impl ModelEvaluation {
    /// Mean spread over the last quarter of the leads.
    pub fn long_lead_spread(&self) -> Option<f64> {
        let s = self.spread.as_ref()?;
        let tail = &s[s.len() - (s.len() / 4).max(1)..];
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub truth: IsotropicSpectrum,
    pub models: Vec<ModelEvaluation>,
}

impl EvaluationReport {
    pub fn model(&self, name: &str) -> Option<&ModelEvaluation> {
        self.models.iter().find(|m| m.name == name)
    }

    fn header(&self) -> String {
        format!(
            "# config_hash={} version={CODE_VERSION}\n",
            self.config_hash
        )
    }

    pub fn summary_csv(&self) -> String {
        let mut s = self.header();
        s.push_str(
            "model,stable,survived_days,delta_e,long_lead_spread,mean_score,unstable_windows\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_else(|| "nan".into());
        for m in &self.models {
            let mean = m.score.mean_score.iter().sum::<f64>() / m.score.mean_score.len() as f64;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:e},{}",
                m.name,
                m.long_run.stable,
                m.long_run.survived_seconds / 86_400.0,
                opt(m.delta_e),
                opt(m.long_lead_spread()),
                mean,
                m.score.unstable_windows
            );
        }
        s
    }

    /// Truth and model spectra side by side; unstable models are omitted.
    pub fn spectra_csv(&self) -> String {
        let mut s = self.header();
        let models: Vec<(&str, &IsotropicSpectrum)> = self
            .models
            .iter()
            .filter_map(|m| m.long_run.spectrum.as_ref().map(|sp| (m.name.as_str(), sp)))
            .collect();
        s.push_str("kappa,truth");
        for (name, _) in &models {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for (i, k) in self.truth.kappa.iter().enumerate() {
            let _ = write!(s, "{k:e},{:e}", self.truth.energy[i]);
            for (_, sp) in &models {
                let _ = write!(s, ",{:e}", sp.energy[i]);
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let put = |name: &str, text: String| {
            let p = out.join(name);
            std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
        };
        put("summary.csv", self.summary_csv())?;
        put("spectra.csv", self.spectra_csv())?;
        for m in &self.models {
            put(
                &format!("score_curve_{}.csv", m.name),
                self.header() + &m.score.to_csv(),
            )?;
            put(
                &format!("long_run_{}.csv", m.name),
                self.header() + &m.long_run.to_csv(),
            )?;
            if let Some(sp) = &m.spread {
                let mut s = self.header() + "lead_steps,spread\n";
                for (k, v) in sp.iter().enumerate() {
                    let _ = writeln!(s, "{},{v:e}", k + 1);
                }
                put(&format!("spread_{}.csv", m.name), s)?;
            }
        }
        Ok(())
    }
}

/// Scores, long run, ΔE and spread of one closure.
pub fn evaluate_model(
    cfg: &ExperimentConfig,
    name: &str,
    params: &ClosureParams,
    validation: &Dataset,
    truth: &IsotropicSpectrum,
) -> Result<ModelEvaluation> {
    let ev = &cfg.evaluate;
    let coarse = cfg.coarse_params();
    let dynamics = QgClosedDynamics::new(QgModel::new(coarse)?, params.family);
    let closure = dynamics.build(&params.theta)?;
    let series = validation.vectors();
    let x0 = validation
        .states
        .first()
        .ok_or_else(|| CliError::Usage("validation dataset is empty".into()))?;
    let stream = |d: u64| rng::sub_seed(cfg.seed, &[rng::domain::MONTE_CARLO, d]);
    let members = if params.family.is_stochastic() {
        ev.ensemble_size
    } else {
        1
    };
    let score = score_curve(
        &dynamics,
        &closure,
        &series,
        ev.horizon,
        members,
        coarse.dt,
        stream(SCORE_STREAM),
    )?;
    let steps = (ev.long_run_years * SECONDS_PER_YEAR / coarse.dt).round() as usize;
    let long = long_run(
        &dynamics,
        &closure,
        x0,
        steps,
        ev.sample_every,
        stream(LONG_RUN_STREAM),
    )?;
    let delta_e = match &long.spectrum {
        Some(sp) => Some(spectrum_error(sp, truth)?),
        None => None,
    };
    let spread = spread_over_starts(cfg, &dynamics, &closure, &series, stream(SPREAD_STREAM))?;
    Ok(ModelEvaluation {
        name: name.into(),
        score,
        long_run: long,
        delta_e,
        spread,
    })
}

fn spread_over_starts(
    cfg: &ExperimentConfig,
    dynamics: &QgClosedDynamics,
    closure: &<QgClosedDynamics as Dynamics>::Model,
    series: &[Vec<f64>],
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    let ev = &cfg.evaluate;
    let gap = (series.len() / ev.spread_starts).max(1);
    let mut sum_sq = vec![0.0; ev.spread_leads];
    for k in 0..ev.spread_starts.min(series.len()) {
        let ens = rollout_ensemble(
            dynamics,
            closure,
            &series[k * gap],
            ev.spread_leads,
            ev.ensemble_size,
            seed,
            k as u64,
        )?;
        let s = match spread_curve(&ens) {
            Ok(s) if s.len() == ev.spread_leads => s,
            _ => return Ok(None),
        };
        for (a, v) in sum_sq.iter_mut().zip(&s) {
            *a += v * v;
        }
    }
    let n = ev.spread_starts.min(series.len()) as f64;
    Ok(Some(sum_sq.iter().map(|v| (v / n).sqrt()).collect()))
}

/// Spectrum of the validation data, sampled like the long runs.
pub fn truth_spectrum(cfg: &ExperimentConfig, validation: &Dataset) -> Result<IsotropicSpectrum> {
    let model = QgModel::new(cfg.coarse_params())?;
    Ok(kinetic_energy_spectrum(
        validation.states.iter().step_by(cfg.evaluate.sample_every),
        &model,
    )?)
}

/// Evaluates the no-closure baseline and, when given, the closure in the
/// checkpoint directory.
pub fn evaluate(
    cfg: &ExperimentConfig,
    validation_dir: &Path,
    checkpoint: Option<&Path>,
) -> Result<EvaluationReport> {
    let validation = Dataset::open(validation_dir, cfg)?;
    let mut closure = None;
    if let Some(dir) = checkpoint {
        let meta = CheckpointMeta::read(dir)?;
        if !meta.complete {
            return Err(CliError::Usage(format!(
                "training in {} has not finished",
                dir.display()
            )));
        }
        check_disjoint(meta.data_seed, &meta.data_sha256, &validation.manifest)?;
        closure = Some(read_params(&dir.join(PARAMS))?);
    }
    let truth = truth_spectrum(cfg, &validation)?;
    let family = cfg.family()?.with_stochastic(false);
    let mut models = vec![evaluate_model(
        cfg,
        "none",
        &ClosureParams::zeros(family),
        &validation,
        &truth,
    )?];
    if let Some(p) = &closure {
        models.push(evaluate_model(cfg, "closure", p, &validation, &truth)?);
    }
    Ok(EvaluationReport {
        config_hash: cfg.hash(),
        truth,
        models,
    })
}
