//! Derivative-free calibration: antithetic evolution strategies driven by the
//! online loss, with a window-length curriculum.

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::rng;
use crate::scoring::{evaluate_windows, mean_loss, LossConfig};
use rand::seq::index::sample;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::time::Instant;

/// Identifies which random numbers an objective evaluation may use. All
/// candidates of one ES iteration share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvalKey(pub u64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Number of unstable windows behind this loss.
    pub unstable: usize,
    /// Number of windows evaluated.
    pub windows: usize,
}

impl From<f64> for Evaluation {
    fn from(loss: f64) -> Self {
        Evaluation {
            loss,
            unstable: 0,
            windows: 1,
        }
    }
}

pub trait Objective: Sync {
    fn evaluate(&self, theta: &[f64], key: EvalKey) -> Result<Evaluation>;
    /// Serial hook after each iteration, in candidate order.
    fn observe(&mut self, _evals: &[Evaluation]) {}
}

impl<F> Objective for F
where
    F: Fn(&[f64], EvalKey) -> Result<f64> + Sync,
{
    fn evaluate(&self, theta: &[f64], key: EvalKey) -> Result<Evaluation> {
        self(theta, key).map(Evaluation::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsConfig {
    /// Candidates per iteration; must be even.
    pub population: usize,
    pub iterations: usize,
    /// Initial perturbation scale.
    pub sigma: f64,
    /// Initial step length in parameter units.
    pub step: f64,
    /// Per-iteration geometric decay factors.
    pub sigma_decay: f64,
    pub step_decay: f64,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            population: 16,
            iterations: 40,
            sigma: 0.1,
            step: 0.1,
            sigma_decay: 0.97,
            step_decay: 0.97,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.population % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "population must be even and >= 2, got {}",
                self.population
            )));
        }
        if !(self.sigma > 0.0) || !(self.step >= 0.0) {
            return Err(Error::InvalidArgument(
                "sigma must be positive and step nonnegative".into(),
            ));
        }
        if !(self.sigma_decay > 0.0
            && self.sigma_decay <= 1.0
            && self.step_decay > 0.0
            && self.step_decay <= 1.0)
        {
            return Err(Error::InvalidArgument(
                "decay factors must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Objective evaluations used by one run, including center evaluations.
    pub fn evaluations(&self) -> usize {
        1 + self.iterations * (self.population + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub phase: usize,
    pub iteration: usize,
    pub window: usize,
    /// Loss of the current center at the phase's fixed evaluation key.
    pub loss: f64,
    pub best_loss: f64,
    pub theta_hash: u64,
    /// Unstable windows over all candidates of this iteration.
    pub instabilities: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainRecord {
    pub iterations: Vec<IterRecord>,
    pub wall_seconds: f64,
}

impl PartialEq for TrainRecord {
    fn eq(&self, other: &Self) -> bool {
        self.iterations == other.iterations
    }
}

impl TrainRecord {
    /// CSV without wall time, so identical runs give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("phase,iteration,window,loss,best_loss,theta_hash,instabilities\n");
        for r in &self.iterations {
            s.push_str(&format!(
                "{},{},{},{:e},{:e},{:016x},{}\n",
                r.phase, r.iteration, r.window, r.loss, r.best_loss, r.theta_hash, r.instabilities
            ));
        }
        s
    }
}

pub fn theta_hash(theta: &[f64]) -> u64 {
    let mut h = Sha256::new();
    for t in theta {
        h.update(t.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsResult {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub initial_loss: f64,
    pub record: Vec<IterRecord>,
    /// Whether every evaluation of the run hit an instability.
    pub all_unstable: bool,
}

/// Centered ranks in `[-0.5, 0.5]`; non-finite losses rank worst, ties by index.
fn centered_ranks(losses: &[f64]) -> Vec<f64> {
    let n = losses.len();
    let key = |v: f64| if v.is_finite() { v } else { f64::INFINITY };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key(losses[a]).total_cmp(&key(losses[b])).then(a.cmp(&b)));
    let mut r = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        r[i] = if n > 1 {
            rank as f64 / (n - 1) as f64 - 0.5
        } else {
            0.0
        };
    }
    r
}

/// Minimize `objective` by antithetic ES with rank-shaped updates, returning
/// the best center seen at the fixed evaluation key.
pub fn es_optimize<O: Objective>(
    objective: &mut O,
    theta0: &[f64],
    cfg: &EsConfig,
    seed: u64,
) -> Result<EsResult> {
    es_optimize_phase(objective, theta0, cfg, seed, 0, 0)
}

fn es_optimize_phase<O: Objective>(
    objective: &mut O,
    theta0: &[f64],
    cfg: &EsConfig,
    seed: u64,
    phase: usize,
    window: usize,
) -> Result<EsResult> {
    cfg.validate()?;
    let dim = theta0.len();
    let eval_key = EvalKey(rng::sub_seed(
        seed,
        &[rng::domain::MINIBATCH, phase as u64, u64::MAX],
    ));
    let first = objective.evaluate(theta0, eval_key)?;
    if !first.loss.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    objective.observe(&[first]);
    let mut all_unstable = first.unstable > 0;
    let mut theta = theta0.to_vec();
    let mut best = (theta.clone(), first.loss);
    let (mut sigma, mut step) = (cfg.sigma, cfg.step);
    let pairs = cfg.population / 2;
    let mut record = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let mut r = rng::stream(seed, &[rng::domain::ES_PERTURB, phase as u64, it as u64]);
        let mut eps = vec![0.0; pairs * dim];
        rng::fill_standard_normal(&mut r, &mut eps);
        let key = EvalKey(rng::sub_seed(
            seed,
            &[rng::domain::MINIBATCH, phase as u64, it as u64],
        ));
        let candidates: Vec<Vec<f64>> = (0..cfg.population)
            .map(|c| {
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                let e = &eps[(c / 2) * dim..(c / 2 + 1) * dim];
                theta
                    .iter()
                    .zip(e)
                    .map(|(t, e)| t + sign * sigma * e)
                    .collect()
            })
            .collect();
        let evals: Vec<Evaluation> = candidates
            .par_iter()
            .map(|c| objective.evaluate(c, key))
            .collect::<Vec<Result<Evaluation>>>()
            .into_iter()
            .collect::<Result<_>>()?;
        let losses: Vec<f64> = evals.iter().map(|e| e.loss).collect();
        let ranks = centered_ranks(&losses);
        let mut g = vec![0.0; dim];
        for p in 0..pairs {
            let w = ranks[2 * p] - ranks[2 * p + 1];
            for (gi, e) in g.iter_mut().zip(&eps[p * dim..(p + 1) * dim]) {
                *gi += w * e;
            }
        }
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= step * gi / pairs as f64;
        }
        let center = objective.evaluate(&theta, eval_key)?;
        let mut observed = evals.clone();
        observed.push(center);
        objective.observe(&observed);
        all_unstable &= observed.iter().all(|e| e.unstable > 0);
        if center.loss.is_finite() && center.loss < best.1 {
            best = (theta.clone(), center.loss);
        }
        record.push(IterRecord {
            phase,
            iteration: it,
            window,
            loss: center.loss,
            best_loss: best.1,
            theta_hash: theta_hash(&theta),
            instabilities: observed.iter().map(|e| e.unstable).sum(),
        });
        sigma *= cfg.sigma_decay;
        step *= cfg.step_decay;
    }
    Ok(EsResult {
        theta: best.0,
        loss: best.1,
        initial_loss: first.loss,
        record,
        all_unstable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub window: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Phases with nondecreasing window lengths.
    pub curriculum: Vec<Phase>,
    pub es: EsConfig,
    /// Windows per objective evaluation.
    pub batch: usize,
    pub ensemble_size: usize,
    /// Penalty per lead used until a stable loss has been observed.
    pub initial_penalty: f64,
    /// Penalty multiplier applied to the running median of stable losses.
    pub penalty_factor: f64,
}

pub const DEFAULT_WINDOWS: [usize; 6] = [1, 4, 12, 36, 108, 288];

impl TrainConfig {
    pub fn curriculum(windows: &[usize], iterations: usize) -> Vec<Phase> {
        windows
            .iter()
            .map(|&window| Phase { window, iterations })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.es.validate()?;
        if self.curriculum.is_empty() {
            return Err(Error::InvalidArgument("curriculum is empty".into()));
        }
        if self
            .curriculum
            .windows(2)
            .any(|p| p[1].window < p[0].window)
        {
            return Err(Error::InvalidArgument(
                "curriculum windows must be nondecreasing".into(),
            ));
        }
        if self.curriculum.iter().any(|p| p.window == 0)
            || self.batch == 0
            || self.ensemble_size == 0
        {
            return Err(Error::InvalidArgument(
                "window, batch and ensemble size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            curriculum: Self::curriculum(&DEFAULT_WINDOWS, 20),
            es: EsConfig::default(),
            batch: 4,
            ensemble_size: 8,
            initial_penalty: 1e3,
            penalty_factor: 1e3,
        }
    }
}

/// Online loss on a seeded mini-batch of windows.
pub struct WindowObjective<'a, D: Dynamics, S> {
    pub dynamics: &'a D,
    pub series: &'a [S],
    pub loss: LossConfig,
    pub batch: usize,
    pub seed: u64,
    pub penalty_factor: f64,
    stable_losses: Vec<f64>,
}

impl<'a, D: Dynamics, S: AsRef<[f64]> + Sync> WindowObjective<'a, D, S> {
    pub fn new(
        dynamics: &'a D,
        series: &'a [S],
        loss: LossConfig,
        batch: usize,
        seed: u64,
        penalty_factor: f64,
    ) -> Self {
        WindowObjective {
            dynamics,
            series,
            loss,
            batch,
            seed,
            penalty_factor,
            stable_losses: Vec::new(),
        }
    }

    pub fn windows_for(&self, key: EvalKey) -> Vec<usize> {
        let n = self.loss.n_windows(self.series.len());
        let k = self.batch.min(n);
        let mut r = rng::stream(self.seed, &[rng::domain::MINIBATCH, key.0]);
        let mut w = sample(&mut r, n, k).into_vec();
        w.sort_unstable();
        w
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl<D: Dynamics, S: AsRef<[f64]> + Sync> Objective for WindowObjective<'_, D, S> {
    fn evaluate(&self, theta: &[f64], key: EvalKey) -> Result<Evaluation> {
        let model = self.dynamics.build(theta)?;
        let windows = self.windows_for(key);
        let noise_seed = rng::sub_seed(self.seed, &[rng::domain::CLOSURE_NOISE, key.0]);
        let scores = evaluate_windows(
            self.dynamics,
            &model,
            self.series,
            &windows,
            &self.loss,
            noise_seed,
        )?;
        let unstable = scores.iter().filter(|s| s.leads.is_none()).count();
        Ok(Evaluation {
            loss: mean_loss(&scores, &self.loss),
            unstable,
            windows: scores.len(),
        })
    }

    fn observe(&mut self, evals: &[Evaluation]) {
        self.stable_losses.extend(
            evals
                .iter()
                .filter(|e| e.unstable == 0 && e.loss.is_finite())
                .map(|e| e.loss),
        );
        if !self.stable_losses.is_empty() {
            self.loss.instability_penalty = self.penalty_factor * median(&self.stable_losses);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary {
    pub phase: usize,
    pub window: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub theta: Vec<f64>,
    pub phases: Vec<PhaseSummary>,
    pub record: TrainRecord,
}

/// Run the curriculum phase by phase, warm-starting each phase from the
/// previous one. `completed` holds phases restored from checkpoints; they are
/// not rerun. `on_phase` sees every newly finished phase.
pub fn train_closure<D, S>(
    dynamics: &D,
    series: &[S],
    theta0: &[f64],
    cfg: &TrainConfig,
    seed: u64,
    completed: Vec<PhaseSummary>,
    mut on_phase: impl FnMut(&PhaseSummary, &TrainRecord) -> Result<()>,
) -> Result<TrainOutcome>
where
    D: Dynamics,
    S: AsRef<[f64]> + Sync,
{
    cfg.validate()?;
    if theta0.len() != dynamics.n_params() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.n_params().to_string(),
            got: theta0.len().to_string(),
        });
    }
    let longest = cfg.curriculum.iter().map(|p| p.window).max().unwrap();
    if series.len() < longest + 1 {
        return Err(Error::InvalidArgument(format!(
            "series of {} states is too short for window length {longest}",
            series.len()
        )));
    }
    if completed.len() > cfg.curriculum.len()
        || completed
            .iter()
            .enumerate()
            .any(|(k, p)| p.phase != k || p.window != cfg.curriculum[k].window)
    {
        return Err(Error::InvalidArgument(
            "checkpointed phases do not match the curriculum".into(),
        ));
    }
    let started = Instant::now();
    let mut theta = completed
        .last()
        .map(|p| p.theta.clone())
        .unwrap_or_else(|| theta0.to_vec());
    let mut phases = completed;
    let mut record = TrainRecord::default();
    let mut penalty = cfg.initial_penalty;
    for (k, phase) in cfg.curriculum.iter().enumerate().skip(phases.len()) {
        let mut loss = LossConfig::new(phase.window, cfg.ensemble_size);
        loss.instability_penalty = penalty;
        let mut obj = WindowObjective::new(
            dynamics,
            series,
            loss,
            cfg.batch,
            rng::sub_seed(seed, &[k as u64]),
            cfg.penalty_factor,
        );
        let es = EsConfig {
            iterations: phase.iterations,
            ..cfg.es
        };
        let res = es_optimize_phase(&mut obj, &theta, &es, seed, k, phase.window)?;
        if res.all_unstable {
            return Err(Error::AllUnstable);
        }
        penalty = obj.loss.instability_penalty;
        theta = res.theta.clone();
        record.iterations.extend(res.record);
        let summary = PhaseSummary {
            phase: k,
            window: phase.window,
            initial_loss: res.initial_loss,
            final_loss: res.loss,
            theta: theta.clone(),
        };
        record.wall_seconds = started.elapsed().as_secs_f64();
        on_phase(&summary, &record)?;
        phases.push(summary);
    }
    record.wall_seconds = started.elapsed().as_secs_f64();
    Ok(TrainOutcome {
        theta,
        phases,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Propagate, StreamKey};
    use rand_chacha::ChaCha8Rng;

    fn bowl(t: &[f64], _: EvalKey) -> Result<f64> {
        Ok((t[0] - 1.0).powi(2) + (t[1] + 2.0).powi(2))
    }

    fn bowl_cfg() -> EsConfig {
        EsConfig {
            population: 16,
            iterations: 290,
            sigma: 0.2,
            step: 0.2,
            sigma_decay: 0.98,
            step_decay: 0.98,
        }
    }

    #[test]
    fn bowl_converges_within_budget() {
        let cfg = bowl_cfg();
        assert!(cfg.evaluations() <= 5000);
        let mut f = bowl;
        let res = es_optimize(&mut f, &[0.0, 0.0], &cfg, 3).unwrap();
        let err = ((res.theta[0] - 1.0).powi(2) + (res.theta[1] + 2.0).powi(2)).sqrt();
        assert!(err < 1e-2, "{:?}", res.theta);
    }

    #[test]
    fn zero_step_keeps_theta() {
        let cfg = EsConfig {
            step: 0.0,
            iterations: 10,
            ..bowl_cfg()
        };
        let mut f = bowl;
        let res = es_optimize(&mut f, &[0.3, 0.4], &cfg, 1).unwrap();
        assert_eq!(res.theta, vec![0.3, 0.4]);
        assert!(res
            .record
            .iter()
            .all(|r| r.theta_hash == theta_hash(&[0.3, 0.4])));
    }

    #[test]
    fn same_seed_same_record() {
        let cfg = EsConfig {
            iterations: 30,
            ..bowl_cfg()
        };
        let mut f = bowl;
        let a = es_optimize(&mut f, &[0.0, 0.0], &cfg, 5).unwrap();
        let b = es_optimize(&mut f, &[0.0, 0.0], &cfg, 5).unwrap();
        let c = es_optimize(&mut f, &[0.0, 0.0], &cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.record, c.record);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut f = bowl;
        assert!(es_optimize(
            &mut f,
            &[0.0, 0.0],
            &EsConfig {
                population: 7,
                ..bowl_cfg()
            },
            1
        )
        .is_err());
        let mut nan = |_: &[f64], _: EvalKey| -> Result<f64> { Ok(f64::NAN) };
        assert!(matches!(
            es_optimize(&mut nan, &[0.0], &bowl_cfg(), 1),
            Err(Error::NonFiniteObjective)
        ));
        let cfg = TrainConfig {
            curriculum: TrainConfig::curriculum(&[4, 1], 3),
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ranks_are_centered() {
        let r = centered_ranks(&[3.0, f64::NAN, 1.0, 2.0]);
        for (a, b) in r.iter().zip([1.0 / 6.0, 0.5, -0.5, -1.0 / 6.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    /// x ← A x (2×2, deterministic) or x ← θ₁ x + θ₂ ξ (scalar).
    struct Linear {
        dim: usize,
        stochastic: bool,
    }

    struct LinearRun<'a> {
        a: &'a [f64],
        x: Vec<f64>,
        rng: ChaCha8Rng,
    }

    impl Propagate for LinearRun<'_> {
        fn advance(&mut self) -> Result<&[f64]> {
            let d = self.x.len();
            let mut y = vec![0.0; d];
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..d).map(|j| self.a[i * d + j] * self.x[j]).sum();
            }
            if self.a.len() > d * d {
                *y.first_mut().unwrap() += self.a[d * d] * rng::standard_normal(&mut self.rng);
            }
            if y.iter().any(|v| !(v.abs() < 1e8)) {
                return Err(Error::Instability {
                    step: 0,
                    time: 0.0,
                    max_abs: f64::INFINITY,
                });
            }
            self.x = y;
            Ok(&self.x)
        }
    }

    impl Dynamics for Linear {
        type Model = Vec<f64>;
        type Runner<'a> = LinearRun<'a>;
        fn n_params(&self) -> usize {
            self.dim * self.dim + self.stochastic as usize
        }
        fn is_stochastic(&self) -> bool {
            self.stochastic
        }
        fn build(&self, t: &[f64]) -> Result<Vec<f64>> {
            Ok(t.to_vec())
        }
        fn start<'a>(
            &'a self,
            a: &'a Vec<f64>,
            x0: &[f64],
            key: StreamKey,
        ) -> Result<LinearRun<'a>> {
            Ok(LinearRun {
                a,
                x: x0.to_vec(),
                rng: rng::stream(key.seed, &[key.window, key.member]),
            })
        }
    }

    /// One slowly contracting rotation trajectory.
    fn rotation_series() -> Vec<Vec<f64>> {
        let (c, s) = (0.99 * 0.3f64.cos(), 0.99 * 0.3f64.sin());
        let mut x = vec![1.0, 0.5];
        let mut out = Vec::new();
        for _ in 0..121 {
            out.push(x.clone());
            x = vec![c * x[0] - s * x[1], s * x[0] + c * x[1]];
        }
        out
    }

    #[test]
    fn recovers_noiseless_linear_dynamics() {
        let cfg = TrainConfig {
            curriculum: vec![
                Phase {
                    window: 1,
                    iterations: 400,
                },
                Phase {
                    window: 3,
                    iterations: 400,
                },
            ],
            es: EsConfig {
                population: 16,
                iterations: 0,
                sigma: 0.1,
                step: 0.1,
                sigma_decay: 0.975,
                step_decay: 0.975,
            },
            batch: 1 << 20,
            ensemble_size: 1,
            initial_penalty: 1e3,
            penalty_factor: 1e3,
        };
        let d = Linear {
            dim: 2,
            stochastic: false,
        };
        let out = train_closure(
            &d,
            &rotation_series(),
            &[0.0; 4],
            &cfg,
            4,
            vec![],
            |_, _| Ok(()),
        )
        .unwrap();
        assert!(out.phases[1].final_loss < 1e-6, "{:?}", out.phases);
        assert!(
            out.phases[1].initial_loss <= 1.5 * out.phases[0].final_loss
                || out.phases[1].initial_loss < 1e-6
        );
    }

    fn ar1_series(a: f64, sigma: f64, n: usize) -> Vec<Vec<f64>> {
        let mut r = rng::stream(123, &[]);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = a * x + sigma * rng::standard_normal(&mut r);
                vec![x]
            })
            .collect()
    }

    #[test]
    fn energy_score_recovers_ar1_law() {
        let series = ar1_series(0.9, 1.0, 20_001);
        let d = Linear {
            dim: 1,
            stochastic: true,
        };
        let cfg = TrainConfig {
            curriculum: vec![Phase {
                window: 1,
                iterations: 150,
            }],
            es: EsConfig {
                population: 16,
                iterations: 0,
                sigma: 0.1,
                step: 0.1,
                sigma_decay: 0.98,
                step_decay: 0.98,
            },
            batch: 2000,
            ensemble_size: 8,
            initial_penalty: 1e3,
            penalty_factor: 1e3,
        };
        let out = train_closure(&d, &series, &[0.5, 0.5], &cfg, 8, vec![], |_, _| Ok(())).unwrap();
        assert!((out.theta[0] - 0.9).abs() < 0.05, "{:?}", out.theta);
        assert!((out.theta[1].abs() - 1.0).abs() < 0.05, "{:?}", out.theta);
    }

    #[test]
    fn resume_skips_completed_phases_and_matches() {
        let s = rotation_series();
        let d = Linear {
            dim: 2,
            stochastic: false,
        };
        let cfg = TrainConfig {
            curriculum: vec![
                Phase {
                    window: 1,
                    iterations: 5,
                },
                Phase {
                    window: 2,
                    iterations: 5,
                },
            ],
            es: EsConfig {
                iterations: 0,
                ..EsConfig::default()
            },
            batch: 8,
            ensemble_size: 1,
            initial_penalty: 1e3,
            penalty_factor: 1e3,
        };
        let mut seen = Vec::new();
        let full = train_closure(&d, &s, &[0.0; 4], &cfg, 2, vec![], |p, _| {
            seen.push(p.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 2);
        let resumed = train_closure(&d, &s, &[0.0; 4], &cfg, 2, vec![seen[0].clone()], |_, _| {
            Ok(())
        })
        .unwrap();
        assert_eq!(resumed.theta, full.theta);
        assert_eq!(resumed.phases, full.phases);
        assert_eq!(
            resumed.record.iterations,
            full.record.iterations[5..].to_vec()
        );
    }

    #[test]
    fn all_unstable_is_a_typed_failure() {
        let s = rotation_series();
        let d = Linear {
            dim: 2,
            stochastic: false,
        };
        let cfg = TrainConfig {
            curriculum: vec![Phase {
                window: 20,
                iterations: 3,
            }],
            es: EsConfig {
                iterations: 0,
                sigma: 1e-3,
                step: 0.0,
                ..EsConfig::default()
            },
            batch: 2,
            ensemble_size: 1,
            initial_penalty: 1e3,
            penalty_factor: 1e3,
        };
        let r = train_closure(
            &d,
            &s,
            &[1e3, 0.0, 0.0, 1e3],
            &cfg,
            1,
            vec![],
            |_, _| Ok(()),
        );
        assert!(matches!(r, Err(Error::AllUnstable)));
    }
}
