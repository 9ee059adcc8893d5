//! Closure training with per-phase checkpoints.
//!
//! Checkpoint directory:
//! - `checkpoint.toml`: metadata and completed phases,
//! - `phase_K.cgcp`: parameters after phase K,
//! - `record_phase_K.csv`: the ES record of phase K,
//! - `closure.cgcp` and `train_record.csv`: written once training finishes.

use crate::config::{ExperimentConfig, CODE_VERSION};
use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use closure_lab::calibrate::{train_closure, PhaseSummary, TrainRecord};
use closure_lab::closure::{ClosureParams, QgClosedDynamics};
use closure_lab::qg::QgModel;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT: &str = "checkpoint.toml";
pub const PARAMS: &str = "closure.cgcp";
pub const RECORD: &str = "train_record.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub code_version: String,
    pub config_hash: String,
    pub family: String,
    pub n_params: usize,
    pub data_seed: u64,
    pub data_sha256: String,
    pub complete: bool,
    pub phases: Vec<PhaseMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMeta {
    pub phase: usize,
    pub window: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub params_file: String,
}

impl CheckpointMeta {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(CHECKPOINT);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| CliError::format(&path, e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(CHECKPOINT);
        std::fs::write(&path, toml::to_string(self).expect("checkpoint serializes"))
            .map_err(|e| CliError::io(&path, e))
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn phase_record(record: &TrainRecord, phase: usize) -> TrainRecord {
    TrainRecord {
        iterations: record
            .iterations
            .iter()
            .filter(|r| r.phase == phase)
            .cloned()
            .collect(),
        wall_seconds: record.wall_seconds,
    }
}

pub fn read_params(path: &Path) -> Result<ClosureParams> {
    let b = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    ClosureParams::from_bytes(&b).map_err(|e| CliError::format(path, e.to_string()))
}

/// Completed phases of an interrupted run in `dir`.
fn resume_state(dir: &Path, meta: &CheckpointMeta) -> Result<Vec<PhaseSummary>> {
    meta.phases
        .iter()
        .map(|p| {
            Ok(PhaseSummary {
                phase: p.phase,
                window: p.window,
                initial_loss: p.initial_loss,
                final_loss: p.final_loss,
                theta: read_params(&dir.join(&p.params_file))?.theta,
            })
        })
        .collect()
}

pub struct Trained {
    pub params: ClosureParams,
    pub phases: Vec<PhaseSummary>,
    pub record: TrainRecord,
}

/// Trains the configured closure on `data`, checkpointing after each
/// phase into `out`. With `resume`, completed phases found in `out` are
/// skipped.
pub fn train(cfg: &ExperimentConfig, data: &Dataset, out: &Path, resume: bool) -> Result<Trained> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let family = cfg.family()?;
    let tcfg = cfg.train_config();
    let mut meta = CheckpointMeta {
        code_version: CODE_VERSION.into(),
        config_hash: cfg.hash(),
        family: family.name().into(),
        n_params: family.n_params(),
        data_seed: data.manifest.seed,
        data_sha256: data.manifest.series_sha256.clone(),
        complete: false,
        phases: Vec::new(),
    };
    let completed = if resume && out.join(CHECKPOINT).exists() {
        let old = CheckpointMeta::read(out)?;
        if old.config_hash != meta.config_hash || old.data_sha256 != meta.data_sha256 {
            return Err(CliError::Usage(format!(
                "checkpoint in {} belongs to another config or dataset",
                out.display()
            )));
        }
        meta.phases = old.phases.clone();
        resume_state(out, &old)?
    } else {
        Vec::new()
    };
    let dynamics = QgClosedDynamics::new(QgModel::new(cfg.coarse_params())?, family);
    let series = data.vectors();
    let theta0 = vec![0.0; family.n_params()];
    let mut io_error = None;
    let outcome = train_closure(
        &dynamics,
        &series,
        &theta0,
        &tcfg,
        cfg.seed,
        completed,
        |p, record| {
            let params_file = format!("phase_{}.cgcp", p.phase);
            let params = ClosureParams::new(family, p.theta.clone())?;
            let res = write(&out.join(&params_file), &params.to_bytes())
                .and_then(|_| {
                    write(
                        &out.join(format!("record_phase_{}.csv", p.phase)),
                        phase_record(record, p.phase).to_csv().as_bytes(),
                    )
                })
                .and_then(|_| {
                    meta.phases.push(PhaseMeta {
                        phase: p.phase,
                        window: p.window,
                        initial_loss: p.initial_loss,
                        final_loss: p.final_loss,
                        params_file,
                    });
                    meta.write(out)
                });
            if let Err(e) = res {
                let msg = e.to_string();
                io_error = Some(e);
                return Err(closure_lab::Error::Io(msg));
            }
            Ok(())
        },
    );
    if let Some(e) = io_error {
        return Err(e);
    }
    let outcome = outcome?;
    let params = ClosureParams::new(family, outcome.theta.clone())?;
    write(&out.join(PARAMS), &params.to_bytes())?;
    let mut csv = format!(
        "# config_hash={} version={CODE_VERSION}\n",
        meta.config_hash
    );
    for (k, p) in meta.phases.iter().enumerate() {
        let path = out.join(format!("record_phase_{}.csv", p.phase));
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        // keep the column header of the first phase only
        for line in text.lines().skip(usize::from(k > 0)) {
            csv.push_str(line);
            csv.push('\n');
        }
    }
    write(&out.join(RECORD), csv.as_bytes())?;
    meta.complete = true;
    meta.write(out)?;
    Ok(Trained {
        params,
        phases: outcome.phases,
        record: outcome.record,
    })
}
