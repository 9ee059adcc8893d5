//! Declarative experiment configuration (TOML, SI units).

use crate::error::{CliError, Result};
use closure_lab::calibrate::{EsConfig, TrainConfig, DEFAULT_WINDOWS};
use closure_lab::closure::ClosureFamily;
use closure_lab::coarsegrain::{stride_for, CoarsenSpec, Coarsener};
use closure_lab::qg::{QgParams, SECONDS_PER_YEAR};
use closure_lab::SsdFilter;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: String,
    pub physics: Physics,
    pub fine: Resolution,
    pub coarse: Resolution,
    pub data: DataConfig,
    pub closure: ClosureConfig,
    pub train: TrainSection,
    pub evaluate: EvaluateConfig,
}

/// Jet parameters shared by the fine and coarse models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub lx: f64,
    pub ly: f64,
    pub h1: f64,
    pub h2: f64,
    pub ubar1: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rd: f64,
    pub ssd_cutoff: f64,
    pub ssd_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub spin_up_years: f64,
    pub duration_years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosureConfig {
    /// `linear-spectral` or `local-stencil`.
    pub family: String,
    pub bands: usize,
    pub state_scale: f64,
    pub noise_scale: f64,
    pub hidden: usize,
    pub input_scale: f64,
    pub output_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub windows: Vec<usize>,
    pub iterations: usize,
    pub population: usize,
    pub sigma: f64,
    pub step: f64,
    pub sigma_decay: f64,
    pub step_decay: f64,
    pub batch: usize,
    /// Members per forecast; 1 trains a deterministic closure.
    pub ensemble_size: usize,
    pub initial_penalty: f64,
    pub penalty_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Score-curve horizon in coarse steps.
    pub horizon: usize,
    pub ensemble_size: usize,
    pub long_run_years: f64,
    /// Coarse steps between spectrum samples.
    pub sample_every: usize,
    /// Lead (coarse steps) of the spread forecast.
    pub spread_leads: usize,
    /// Validation states used as spread initial conditions.
    pub spread_starts: usize,
}

impl Default for Physics {
    fn default() -> Self {
        let p = QgParams::jet(32, 7200.0);
        let f = SsdFilter::default();
        Physics {
            lx: p.lx,
            ly: p.ly,
            h1: p.h1,
            h2: p.h2,
            ubar1: p.ubar1,
            beta: p.beta,
            gamma: p.gamma,
            rd: p.rd,
            ssd_cutoff: f.cutoff,
            ssd_alpha: f.alpha,
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            spin_up_years: 7.0,
            duration_years: 1.0,
        }
    }
}

impl Default for ClosureConfig {
    fn default() -> Self {
        ClosureConfig {
            family: "linear-spectral".into(),
            bands: 8,
            state_scale: 0.01,
            noise_scale: 1e-7,
            hidden: 4,
            input_scale: 1e-5,
            output_scale: 1e-8,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            windows: DEFAULT_WINDOWS.to_vec(),
            iterations: 10,
            population: 16,
            sigma: 0.2,
            step: 0.2,
            sigma_decay: 0.97,
            step_decay: 0.97,
            batch: 4,
            ensemble_size: 8,
            initial_penalty: 1e3,
            penalty_factor: 1e3,
        }
    }
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            horizon: 120,
            ensemble_size: 8,
            long_run_years: 10.0,
            sample_every: 12,
            spread_leads: 360,
            spread_starts: 4,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out: "runs/desk".into(),
            physics: Physics::default(),
            fine: Resolution { n: 128, dt: 900.0 },
            coarse: Resolution { n: 32, dt: 7200.0 },
            data: DataConfig::default(),
            closure: ClosureConfig::default(),
            train: TrainSection::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed {} does not fit a TOML integer", self.seed));
        }
        for p in [self.fine_params(), self.coarse_params()] {
            p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.coarse.n > self.fine.n {
            return bad("coarse grid is finer than the fine grid".into());
        }
        self.stride()?;
        if !(self.data.spin_up_years >= 0.0 && self.data.duration_years >= 0.0) {
            return bad("data durations must be nonnegative".into());
        }
        self.family()?;
        self.train_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let ev = &self.evaluate;
        if ev.horizon == 0 || ev.sample_every == 0 || ev.spread_leads == 0 || ev.spread_starts == 0
        {
            return bad("evaluate horizon, sampling and spread settings must be positive".into());
        }
        if ev.ensemble_size < 2 {
            return bad("evaluate.ensemble_size must be at least 2".into());
        }
        if !(ev.long_run_years > 0.0) {
            return bad("evaluate.long_run_years must be positive".into());
        }
        Ok(())
    }

    fn params(&self, r: &Resolution) -> QgParams {
        let ph = &self.physics;
        let mut p = QgParams::jet(r.n, r.dt);
        p.lx = ph.lx;
        p.ly = ph.ly;
        p.h1 = ph.h1;
        p.h2 = ph.h2;
        p.ubar1 = ph.ubar1;
        p.beta = ph.beta;
        p.gamma = ph.gamma;
        p.rd = ph.rd;
        p.ssd = SsdFilter {
            cutoff: ph.ssd_cutoff,
            alpha: ph.ssd_alpha,
        };
        p
    }

    pub fn fine_params(&self) -> QgParams {
        self.params(&self.fine)
    }

    pub fn coarse_params(&self) -> QgParams {
        self.params(&self.coarse)
    }

    pub fn stride(&self) -> Result<usize> {
        stride_for(self.fine.dt, self.coarse.dt).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn coarsener(&self) -> Result<Coarsener> {
        let f = self.fine_params();
        let c = self.coarse_params();
        let spec = CoarsenSpec::new(f.grid()?, c.grid()?, f.ssd)?;
        Ok(Coarsener::new(spec))
    }

    /// Coarse snapshots a dataset of `duration_years` holds.
    pub fn snapshot_count(&self) -> usize {
        (self.data.duration_years * SECONDS_PER_YEAR / self.coarse.dt + 1e-9).floor() as usize
    }

    /// Closure family; stochastic exactly when training uses more than one
    /// ensemble member.
    pub fn family(&self) -> Result<ClosureFamily> {
        let c = &self.closure;
        let stochastic = self.train.ensemble_size > 1;
        match c.family.as_str() {
            "linear-spectral" if c.bands > 0 => Ok(ClosureFamily::LinearSpectral {
                bands: c.bands,
                stochastic,
                state_scale: c.state_scale,
                noise_scale: c.noise_scale,
            }),
            "local-stencil" if c.hidden > 0 => Ok(ClosureFamily::LocalStencil {
                hidden: c.hidden,
                stochastic,
                input_scale: c.input_scale,
                output_scale: c.output_scale,
            }),
            "linear-spectral" | "local-stencil" => Err(CliError::Config(
                "closure needs at least one band or hidden channel".into(),
            )),
            other => Err(CliError::Config(format!(
                "unknown closure family {other:?}"
            ))),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            curriculum: TrainConfig::curriculum(&t.windows, t.iterations),
            es: EsConfig {
                population: t.population,
                iterations: t.iterations,
                sigma: t.sigma,
                step: t.step,
                sigma_decay: t.sigma_decay,
                step_decay: t.step_decay,
            },
            batch: t.batch,
            ensemble_size: t.ensemble_size,
            initial_penalty: t.initial_penalty,
            penalty_factor: t.penalty_factor,
        }
    }
}
