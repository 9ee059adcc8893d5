//! Desk-scale closure comparison: no closure, offline (w = 1) training, and
//! online curriculum training of deterministic and stochastic closures,
//! compared by ΔE of 10-year free runs and by long-lead ensemble spread.

use crate::config::ExperimentConfig;
use crate::dataset::{generate, Dataset};
use crate::error::Result;
use crate::evaluate::{evaluate_model, truth_spectrum, ModelEvaluation};
use crate::train::{read_params, train, CheckpointMeta};
use closure_lab::closure::ClosureParams;
use closure_lab::diagnostics::IsotropicSpectrum;
use std::fmt::Write as _;
use std::path::Path;

/// Offset between the training and validation data seeds.
pub const VALIDATION_SEED_OFFSET: u64 = 1;
/// Long-lead spread of the deterministic closure relative to the stochastic one.
pub const SPREAD_RATIO_BOUND: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: String,
    /// Window length of the last curriculum phase behind the parameters.
    pub window: usize,
    pub stable: bool,
    pub survived_days: f64,
    pub delta_e: Option<f64>,
    pub long_lead_spread: Option<f64>,
    pub mean_score: f64,
}

impl Candidate {
    fn from_eval(label: String, window: usize, e: &ModelEvaluation) -> Self {
        Candidate {
            label,
            window,
            stable: e.long_run.stable,
            survived_days: e.long_run.survived_seconds / 86_400.0,
            delta_e: e.delta_e,
            long_lead_spread: e.long_lead_spread(),
            mean_score: e.score.mean_score.iter().sum::<f64>() / e.score.mean_score.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationCheck {
    pub name: &'static str,
    pub detail: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub config_hash: String,
    pub train_seed: u64,
    pub validation_seed: u64,
    pub truth: IsotropicSpectrum,
    pub none: Candidate,
    pub offline: Candidate,
    pub deterministic: Vec<Candidate>,
    pub stochastic: Vec<Candidate>,
}

/// Lowest-ΔE stable candidate.
pub fn best(cands: &[Candidate]) -> Option<&Candidate> {
    cands
        .iter()
        .filter(|c| c.delta_e.is_some())
        .min_by(|a, b| a.delta_e.unwrap().total_cmp(&b.delta_e.unwrap()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_else(|| "none".into())
}

impl ReplicationReport {
    pub fn checks(&self) -> Vec<ReplicationCheck> {
        let de = |c: Option<&Candidate>| c.and_then(|c| c.delta_e);
        let sto = de(best(&self.stochastic));
        let det = de(best(&self.deterministic));
        let none = self.none.delta_e;
        let lt = |a: Option<f64>, b: Option<f64>| matches!((a, b), (Some(a), Some(b)) if a < b);
        let best_online = match (sto, det) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let offline_worse = !self.offline.stable || lt(best_online, self.offline.delta_e);
        let spread_det = best(&self.deterministic).and_then(|c| c.long_lead_spread);
        let spread_sto = best(&self.stochastic).and_then(|c| c.long_lead_spread);
        let spread_ok = matches!(
            (spread_det, spread_sto),
            (Some(d), Some(s)) if s > 0.0 && d <= SPREAD_RATIO_BOUND * s
        );
        vec![
            ReplicationCheck {
                name: "stochastic_beats_no_closure",
                detail: format!("dE stochastic {} < none {}", fmt_opt(sto), fmt_opt(none)),
                pass: lt(sto, none),
            },
            ReplicationCheck {
                name: "stochastic_beats_deterministic",
                detail: format!(
                    "dE stochastic {} < deterministic {}",
                    fmt_opt(sto),
                    fmt_opt(det)
                ),
                pass: lt(sto, det),
            },
            ReplicationCheck {
                name: "offline_unstable_or_worse",
                detail: format!(
                    "offline stable={} dE {} vs best online {}",
                    self.offline.stable,
                    fmt_opt(self.offline.delta_e),
                    fmt_opt(best_online)
                ),
                pass: offline_worse,
            },
            ReplicationCheck {
                name: "deterministic_spread_collapse",
                detail: format!(
                    "spread deterministic {} <= {SPREAD_RATIO_BOUND} x stochastic {}",
                    fmt_opt(spread_det),
                    fmt_opt(spread_sto)
                ),
                pass: spread_ok,
            },
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "config_hash {}\ntrain_seed {}\nvalidation_seed {}\ntruth_kinetic_energy {:e}\n",
            self.config_hash,
            self.train_seed,
            self.validation_seed,
            self.truth.total()
        );
        s.push_str("label,window,stable,survived_days,delta_e,long_lead_spread,mean_score\n");
        let all = std::iter::once(&self.none)
            .chain(std::iter::once(&self.offline))
            .chain(&self.deterministic)
            .chain(&self.stochastic);
        for c in all {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:e}",
                c.label,
                c.window,
                c.stable,
                c.survived_days,
                fmt_opt(c.delta_e),
                fmt_opt(c.long_lead_spread),
                c.mean_score
            );
        }
        for c in self.checks() {
            let _ = writeln!(
                s,
                "{} {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        s
    }
}

fn variant(base: &ExperimentConfig, windows: &[usize], ensemble_size: usize) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.train.windows = windows.to_vec();
    cfg.train.ensemble_size = ensemble_size;
    cfg
}

/// Every phase checkpoint with window at least `min_window`, evaluated.
fn phase_candidates(
    cfg: &ExperimentConfig,
    dir: &Path,
    prefix: &str,
    min_window: usize,
    validation: &Dataset,
    truth: &IsotropicSpectrum,
) -> Result<Vec<Candidate>> {
    let meta = CheckpointMeta::read(dir)?;
    let mut out = Vec::new();
    for p in meta.phases.iter().filter(|p| p.window >= min_window) {
        let params = read_params(&dir.join(&p.params_file))?;
        let label = format!("{prefix}_w{}", p.window);
        let e = evaluate_model(cfg, &label, &params, validation, truth)?;
        out.push(Candidate::from_eval(label, p.window, &e));
    }
    Ok(out)
}

/// Runs the whole comparison inside `work`. `base` supplies physics, data,
/// closure family, ES and evaluation settings; the curriculum and ensemble
/// size of each arm are set here.
pub fn run(base: &ExperimentConfig, work: &Path) -> Result<ReplicationReport> {
    let train_seed = base.seed;
    let validation_seed = base.seed.wrapping_add(VALIDATION_SEED_OFFSET);
    let train_dir = work.join("data_train");
    let valid_dir = work.join("data_validation");
    generate(base, train_seed, &train_dir)?;
    generate(base, validation_seed, &valid_dir)?;
    let train_data = Dataset::open(&train_dir, base)?;
    let validation = Dataset::open(&valid_dir, base)?;
    let truth = truth_spectrum(base, &validation)?;

    let windows = base.train.windows.clone();
    let members = base.train.ensemble_size.max(2);
    let offline_cfg = variant(base, &[1], 1);
    let det_cfg = variant(base, &windows, 1);
    let sto_cfg = variant(base, &windows, members);

    let none_params = ClosureParams::zeros(det_cfg.family()?);
    let none = Candidate::from_eval(
        "none".into(),
        0,
        &evaluate_model(base, "none", &none_params, &validation, &truth)?,
    );

    let off = train(&offline_cfg, &train_data, &work.join("ck_offline"), false)?;
    let offline = Candidate::from_eval(
        "offline_w1".into(),
        1,
        &evaluate_model(base, "offline_w1", &off.params, &validation, &truth)?,
    );

    train(&det_cfg, &train_data, &work.join("ck_deterministic"), false)?;
    let deterministic = phase_candidates(
        &det_cfg,
        &work.join("ck_deterministic"),
        "deterministic",
        2,
        &validation,
        &truth,
    )?;

    train(&sto_cfg, &train_data, &work.join("ck_stochastic"), false)?;
    let stochastic = phase_candidates(
        &sto_cfg,
        &work.join("ck_stochastic"),
        "stochastic",
        2,
        &validation,
        &truth,
    )?;

    Ok(ReplicationReport {
        config_hash: base.hash(),
        train_seed,
        validation_seed,
        truth,
        none,
        offline,
        deterministic,
        stochastic,
    })
}
