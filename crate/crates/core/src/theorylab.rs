//! Scalar AR(1) testbeds with closed-form laws, for checking how pointwise
//! losses and proper scores behave under long-window training.

use crate::calibrate::{train_closure, EsConfig, Phase, TrainConfig};
use crate::dynamics::{rollout_ensemble, Dynamics, Propagate, StreamKey};
use crate::error::{Error, Result};
use crate::rng;
use crate::scoring::{energy_score, gaussian_crps_oracle};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::fmt::Write as _;

/// Innovation law of the reference system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Gaussian,
    /// Centered two-component Gaussian mixture: with probability `p` draw
    /// from `N(m1, s1²)`, otherwise from `N(m2, s2²)`, minus the mixture mean.
    Mixture {
        p: f64,
        m1: f64,
        s1: f64,
        m2: f64,
        s2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1System {
    pub a: f64,
    /// Innovation scale; the innovation is `sigma * ε` with `Var ε = 1` in the
    /// Gaussian case.
    pub sigma: f64,
    pub innovation: Innovation,
}

impl Ar1System {
    pub fn gaussian(a: f64, sigma: f64) -> Self {
        Ar1System {
            a,
            sigma,
            innovation: Innovation::Gaussian,
        }
    }

    /// Right-skewed reference with invariant median below its mean.
    pub fn skewed() -> Self {
        Ar1System {
            a: 0.5,
            sigma: 1.0,
            innovation: Innovation::Mixture {
                p: 0.8,
                m1: -0.5,
                s1: 0.5,
                m2: 2.0,
                s2: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.abs() < 1.0) || !(self.sigma >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "AR(1) needs |a| < 1 and sigma >= 0, got a={}, sigma={}",
                self.a, self.sigma
            )));
        }
        if let Innovation::Mixture { p, s1, s2, .. } = self.innovation {
            if !(0.0..=1.0).contains(&p) || !(s1 >= 0.0 && s2 >= 0.0) {
                return Err(Error::InvalidParams(
                    "mixture weight must lie in [0, 1] and scales be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Variance of one innovation.
    pub fn innovation_variance(&self) -> f64 {
        let v = match self.innovation {
            Innovation::Gaussian => 1.0,
            Innovation::Mixture { p, m1, s1, m2, s2 } => {
                let mean = p * m1 + (1.0 - p) * m2;
                p * (s1 * s1 + m1 * m1) + (1.0 - p) * (s2 * s2 + m2 * m2) - mean * mean
            }
        };
        self.sigma * self.sigma * v
    }

    pub fn invariant_variance(&self) -> f64 {
        self.innovation_variance() / (1.0 - self.a * self.a)
    }

    pub fn draw_innovation(&self, r: &mut ChaCha8Rng) -> f64 {
        let e = match self.innovation {
            Innovation::Gaussian => rng::standard_normal(r),
            Innovation::Mixture { p, m1, s1, m2, s2 } => {
                let mean = p * m1 + (1.0 - p) * m2;
                let z = rng::standard_normal(r);
                let x = if r.gen::<f64>() < p {
                    m1 + s1 * z
                } else {
                    m2 + s2 * z
                };
                x - mean
            }
        };
        self.sigma * e
    }

    /// Burn-in long enough that `|a|^n` is below 1e-12.
    fn burn_in(&self) -> usize {
        if self.a == 0.0 {
            1
        } else {
            ((1e-12f64).ln() / self.a.abs().ln()).ceil() as usize + 1
        }
    }

    /// Stationary trajectory of length `n`.
    pub fn simulate(&self, n: usize, seed: u64) -> Vec<f64> {
        self.simulate_thinned(n, 1, seed)
    }

    /// `n` stationary states taken every `thin` steps.
    pub fn simulate_thinned(&self, n: usize, thin: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, &[rng::domain::AR1_DATA]);
        let mut x = 0.0;
        for _ in 0..self.burn_in() {
            x = self.a * x + self.draw_innovation(&mut r);
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..thin.max(1) {
                x = self.a * x + self.draw_innovation(&mut r);
            }
            out.push(x);
        }
        out
    }
}

/// Conditional mean and variance of `x_{n+m}` given `x_n = x0`.
pub fn ar1_conditional_law(sys: &Ar1System, x0: f64, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidArgument("lead must be >= 1".into()));
    }
    let am = sys.a.powi(m as i32);
    Ok((
        am * x0,
        sys.innovation_variance() * (1.0 - am * am) / (1.0 - sys.a * sys.a),
    ))
}

/// Candidate model `x ← θ₁ x + θ₂ ξ` with standard Gaussian `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Model {
    pub theta1: f64,
    pub theta2: f64,
}

impl Ar1Model {
    pub fn check_stable(&self) -> Result<()> {
        if !(self.theta1.abs() < 1.0) {
            return Err(Error::InvalidParams(format!(
                "model is unstable: |theta1| = {} >= 1",
                self.theta1.abs()
            )));
        }
        Ok(())
    }

    /// Conditional law of the model after `m` steps from `x0`.
    pub fn law(&self, x0: f64, m: usize) -> (f64, f64) {
        let tm = self.theta1.powi(m as i32);
        let var = if self.theta1.abs() < 1.0 {
            self.theta2 * self.theta2 * (1.0 - tm * tm) / (1.0 - self.theta1 * self.theta1)
        } else {
            self.theta2 * self.theta2 * m as f64
        };
        (tm * x0, var)
    }

    pub fn invariant_std(&self) -> Result<f64> {
        self.check_stable()?;
        Ok(self.theta2.abs() / (1.0 - self.theta1 * self.theta1).sqrt())
    }
}

/// The candidate model as trainable dynamics; `theta = (θ₁, θ₂)`, or `(θ₁)`
/// when deterministic.
#[derive(Debug, Clone, Copy)]
pub struct Ar1Dynamics {
    pub stochastic: bool,
    /// States beyond this magnitude count as unstable.
    pub blowup: f64,
}

impl Ar1Dynamics {
    pub fn new(stochastic: bool) -> Self {
        Ar1Dynamics {
            stochastic,
            blowup: 1e6,
        }
    }
}

pub struct Ar1Runner {
    model: Ar1Model,
    x: [f64; 1],
    rng: ChaCha8Rng,
    blowup: f64,
    step: u64,
}

impl Propagate for Ar1Runner {
    fn advance(&mut self) -> Result<&[f64]> {
        let xi = if self.model.theta2 != 0.0 {
            rng::standard_normal(&mut self.rng)
        } else {
            0.0
        };
        self.x[0] = self.model.theta1 * self.x[0] + self.model.theta2 * xi;
        self.step += 1;
        if !(self.x[0].abs() <= self.blowup) {
            return Err(Error::Instability {
                step: self.step,
                time: self.step as f64,
                max_abs: self.x[0].abs(),
            });
        }
        Ok(&self.x)
    }
}

impl Dynamics for Ar1Dynamics {
    type Model = Ar1Model;
    type Runner<'a> = Ar1Runner;

    fn n_params(&self) -> usize {
        if self.stochastic {
            2
        } else {
            1
        }
    }

    fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    fn build(&self, theta: &[f64]) -> Result<Ar1Model> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params().to_string(),
                got: theta.len().to_string(),
            });
        }
        Ok(Ar1Model {
            theta1: theta[0],
            theta2: if self.stochastic { theta[1] } else { 0.0 },
        })
    }

    fn start<'a>(&'a self, model: &'a Ar1Model, x0: &[f64], key: StreamKey) -> Result<Ar1Runner> {
        if x0.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: "1".into(),
                got: x0.len().to_string(),
            });
        }
        Ok(Ar1Runner {
            model: *model,
            x: [x0[0]],
            rng: rng::stream(key.seed, &[rng::domain::AR1_MODEL, key.window, key.member]),
            blowup: self.blowup,
            step: 0,
        })
    }
}

/// Expected squared error at lead `m` over a stationary start, split into
/// bias, model variance and target variance.
pub fn mse_decomposition(model: &Ar1Model, sys: &Ar1System, m: usize) -> Result<(f64, f64, f64)> {
    model.check_stable()?;
    let (tm, am) = (model.theta1.powi(m as i32), sys.a.powi(m as i32));
    let bias = (tm - am).powi(2) * sys.invariant_variance();
    let model_var = model.law(0.0, m).1;
    let target_var = ar1_conditional_law(sys, 0.0, m)?.1;
    Ok((bias, model_var, target_var))
}

/// Closed-form expected squared error summed over leads `1..=w`.
pub fn window_mse_objective(model: &Ar1Model, sys: &Ar1System, w: usize) -> Result<f64> {
    (1..=w)
        .map(|m| mse_decomposition(model, sys, m).map(|(b, v, t)| b + v + t))
        .sum()
}

/// Monte Carlo squared error of one model sample against the truth at each
/// lead, simulated step by step. Returns `(mean, standard error)` per lead.
pub fn mc_mse(
    model: &Ar1Model,
    sys: &Ar1System,
    leads: &[usize],
    n: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let horizon = leads.iter().copied().max().unwrap_or(0);
    let chunks = 64usize;
    let per = n.div_ceil(chunks);
    let sd = sys.invariant_variance().sqrt();
    let partial: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, &[rng::domain::MONTE_CARLO, c as u64]);
            let (mut s1, mut s2) = (vec![0.0; leads.len()], vec![0.0; leads.len()]);
            let count = per.min(n.saturating_sub(c * per));
            for _ in 0..count {
                let x0 = if matches!(sys.innovation, Innovation::Gaussian) {
                    sd * rng::standard_normal(&mut r)
                } else {
                    let mut x = 0.0;
                    for _ in 0..sys.burn_in() {
                        x = sys.a * x + sys.draw_innovation(&mut r);
                    }
                    x
                };
                let (mut y, mut z) = (x0, x0);
                let mut k = 0;
                for m in 1..=horizon {
                    y = sys.a * y + sys.draw_innovation(&mut r);
                    z = model.theta1 * z + model.theta2 * rng::standard_normal(&mut r);
                    while k < leads.len() && leads[k] == m {
                        let e = (z - y).powi(2);
                        s1[k] += e;
                        s2[k] += e * e;
                        k += 1;
                    }
                }
            }
            (s1, s2, count)
        })
        .collect();
    (0..leads.len())
        .map(|k| {
            let (s1, s2, cnt) = partial.iter().fold((0.0, 0.0, 0usize), |acc, p| {
                (acc.0 + p.0[k], acc.1 + p.1[k], acc.2 + p.2)
            });
            let mean = s1 / cnt as f64;
            let var = (s2 / cnt as f64 - mean * mean).max(0.0);
            (mean, (var / cnt as f64).sqrt())
        })
        .collect()
}

/// Expected CRPS of the model's Gaussian predictive law summed over leads
/// `1..=w`, by Monte Carlo over stationary starts and true outcomes.
pub fn window_score_objective(
    model: &Ar1Model,
    sys: &Ar1System,
    w: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    model.check_stable()?;
    let mut r = rng::stream(seed, &[rng::domain::MONTE_CARLO]);
    let sd = sys.invariant_variance().sqrt();
    let mut total = 0.0;
    for _ in 0..mc_samples {
        let x0 = sd * rng::standard_normal(&mut r);
        for m in 1..=w {
            let (tmean, tvar) = ar1_conditional_law(sys, x0, m)?;
            let y = tmean + tvar.sqrt() * rng::standard_normal(&mut r);
            let (mu, var) = model.law(x0, m);
            total += if var > 0.0 {
                gaussian_crps_oracle(mu, var.sqrt(), y)?
            } else {
                (y - mu).abs()
            };
        }
    }
    Ok(total / mc_samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLoss {
    Squared,
    Euclidean,
}

impl PointLoss {
    pub fn eval(&self, c: f64, y: f64) -> f64 {
        match self {
            PointLoss::Squared => (c - y) * (c - y),
            PointLoss::Euclidean => (c - y).abs(),
        }
    }
}

/// `R(c) = E ℓ(c, ȳ)` over samples of the invariant law.
pub fn climatological_risk(loss: PointLoss, c: f64, samples: &[f64]) -> f64 {
    samples.iter().map(|&y| loss.eval(c, y)).sum::<f64>() / samples.len() as f64
}

/// Minimizer of the empirical risk by golden-section search over the sample range.
pub fn risk_minimizer(loss: PointLoss, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let (mut lo, mut hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let risk = |c: f64| climatological_risk(loss, c, samples);
    let (mut c1, mut c2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (risk(c1), risk(c2));
    let tol = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - g * (hi - lo);
            f1 = risk(c1);
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + g * (hi - lo);
            f2 = risk(c2);
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// States `lead` steps after stationary starts; consecutive samples are
/// `lead` steps apart on one trajectory.
pub fn lead_samples(sys: &Ar1System, lead: usize, n: usize, seed: u64) -> Vec<f64> {
    sys.simulate_thinned(n, lead, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// `d_S(P, Q) = E_{y∼Q} S(P, y) − E_{y∼Q} S(Q, y)` for the energy score, with
/// `members`-sample ensembles from each law and independent streams.
pub fn divergence_estimator<P, Q>(
    p: P,
    q: Q,
    members: usize,
    reps: usize,
    seed: u64,
) -> Result<Estimate>
where
    P: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
    Q: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    if members < 2 || reps < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 members and 2 replications".into(),
        ));
    }
    let chunks = 64usize.min(reps);
    let per = reps.div_ceil(chunks);
    let parts: Vec<Result<(f64, f64, usize)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut ry = rng::stream(seed, &[rng::domain::MONTE_CARLO, 0, c as u64]);
            let mut rp = rng::stream(seed, &[rng::domain::MONTE_CARLO, 1, c as u64]);
            let mut rq = rng::stream(seed, &[rng::domain::MONTE_CARLO, 2, c as u64]);
            let (mut s1, mut s2) = (0.0, 0.0);
            let count = per.min(reps.saturating_sub(c * per));
            for _ in 0..count {
                let y = q(&mut ry);
                let ep: Vec<Vec<f64>> = (0..members).map(|_| p(&mut rp)).collect();
                let eq: Vec<Vec<f64>> = (0..members).map(|_| q(&mut rq)).collect();
                let d = energy_score(&ep, &y)? - energy_score(&eq, &y)?;
                s1 += d;
                s2 += d * d;
            }
            Ok((s1, s2, count))
        })
        .collect();
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0usize);
    for part in parts {
        let (a, b, c) = part?;
        s1 += a;
        s2 += b;
        n += c;
    }
    let m = s1 / n as f64;
    Ok(Estimate {
        value: m,
        se: ((s2 / n as f64 - m * m).max(0.0) / n as f64).sqrt(),
    })
}

/// 1-D 2-Wasserstein distance between samples and `N(mean, std²)` via the
/// sorted-sample quantile coupling.
pub fn w2_to_gaussian(samples: &[f64], mean: f64, std: f64) -> Result<f64> {
    if samples.is_empty() || !(std > 0.0) {
        return Err(Error::InvalidArgument(
            "need samples and a positive std".into(),
        ));
    }
    let n = Normal::new(mean, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let len = s.len() as f64;
    let ss: f64 = s
        .iter()
        .enumerate()
        .map(|(i, x)| (x - n.inverse_cdf((i as f64 + 0.5) / len)).powi(2))
        .sum();
    Ok((ss / len).sqrt())
}

/// Training loss for the collapse experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainLoss {
    /// Single-sample Euclidean distance (S = 1).
    Euclidean,
    /// Energy score with an ensemble.
    EnergyScore { members: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseConfig {
    pub window: usize,
    /// Training windows in the simulated series.
    pub windows: usize,
    pub es: EsConfig,
    pub theta0: [f64; 2],
    /// Ensemble size and lead for the long-lead spread.
    pub spread_members: usize,
    pub spread_lead: usize,
    /// Long-run samples for W2, taken every `thin` steps.
    pub w2_samples: usize,
    pub w2_thin: usize,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        CollapseConfig {
            window: 200,
            windows: 100,
            es: EsConfig {
                population: 16,
                iterations: 200,
                sigma: 0.1,
                step: 0.1,
                sigma_decay: 0.98,
                step_decay: 0.98,
            },
            theta0: [0.5, 0.5],
            spread_members: 200,
            spread_lead: 200,
            w2_samples: 100_000,
            w2_thin: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseReport {
    pub loss: TrainLoss,
    pub window: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub final_loss: f64,
    pub long_lead_spread: f64,
    pub invariant_std: f64,
    pub w2: f64,
}

impl CollapseReport {
    pub fn to_csv_row(&self) -> String {
        let loss = match self.loss {
            TrainLoss::Euclidean => "euclidean".to_string(),
            TrainLoss::EnergyScore { members } => format!("energy_score_s{members}"),
        };
        format!(
            "{loss},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.window,
            self.theta1,
            self.theta2,
            self.final_loss,
            self.long_lead_spread,
            self.invariant_std,
            self.w2
        )
    }

    pub const CSV_HEADER: &'static str =
        "loss,window,theta1,theta2,final_loss,long_lead_spread,invariant_std,w2";
}

/// Fit `(θ₁, θ₂)` to a simulated trajectory of a Gaussian AR(1) by online
/// training, then measure long-lead spread and long-run W2 to the true
/// invariant law.
pub fn collapse_experiment(
    sys: &Ar1System,
    loss: TrainLoss,
    cfg: &CollapseConfig,
    seed: u64,
) -> Result<CollapseReport> {
    sys.validate()?;
    let series: Vec<[f64; 1]> = sys
        .simulate(cfg.window * cfg.windows + 1, rng::sub_seed(seed, &[0]))
        .into_iter()
        .map(|x| [x])
        .collect();
    let members = match loss {
        TrainLoss::Euclidean => 1,
        TrainLoss::EnergyScore { members } => members,
    };
    let dynamics = Ar1Dynamics::new(true);
    let tcfg = TrainConfig {
        curriculum: vec![Phase {
            window: cfg.window,
            iterations: cfg.es.iterations,
        }],
        es: cfg.es,
        batch: cfg.windows,
        ensemble_size: members,
        initial_penalty: 1e3,
        penalty_factor: 1e3,
    };
    let out = train_closure(
        &dynamics,
        &series,
        &cfg.theta0,
        &tcfg,
        rng::sub_seed(seed, &[1]),
        vec![],
        |_, _| Ok(()),
    )?;
    let model = dynamics.build(&out.theta)?;
    let final_loss = out.phases.last().map(|p| p.final_loss).unwrap_or(f64::NAN);
    let ens = rollout_ensemble(
        &dynamics,
        &model,
        &[0.0],
        cfg.spread_lead,
        cfg.spread_members,
        rng::sub_seed(seed, &[2]),
        0,
    )?;
    let long_lead_spread = crate::diagnostics::spread_curve(&ens)?
        .last()
        .copied()
        .unwrap_or(f64::NAN);
    let invariant_std = sys.invariant_variance().sqrt();
    let samples = model_long_run(
        &model,
        cfg.w2_samples,
        cfg.w2_thin,
        rng::sub_seed(seed, &[3]),
    )?;
    let w2 = w2_to_gaussian(&samples, 0.0, invariant_std)?;
    Ok(CollapseReport {
        loss,
        window: cfg.window,
        theta1: model.theta1,
        theta2: model.theta2,
        final_loss,
        long_lead_spread,
        invariant_std,
        w2,
    })
}

/// Long free run of a model from rest, discarding a burn-in, thinned.
pub fn model_long_run(model: &Ar1Model, n: usize, thin: usize, seed: u64) -> Result<Vec<f64>> {
    model.check_stable()?;
    let mut r = rng::stream(seed, &[rng::domain::AR1_MODEL, u64::MAX]);
    let burn = if model.theta1 == 0.0 {
        1
    } else {
        ((1e-12f64).ln() / model.theta1.abs().ln()).ceil() as usize + 1
    };
    let mut x = 0.0;
    for _ in 0..burn {
        x = model.theta1 * x + model.theta2 * rng::standard_normal(&mut r);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..thin.max(1) {
            x = model.theta1 * x + model.theta2 * rng::standard_normal(&mut r);
        }
        out.push(x);
    }
    Ok(out)
}

/// One named numeric check of a theory suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        SuiteReport {
            suite: suite.into(),
            checks: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, value: f64, bound: impl Into<String>, pass: bool) {
        self.checks.push(Check {
            name: name.into(),
            value,
            bound: bound.into(),
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {}.{} value={:.9e} bound={}",
                if c.pass { "PASS" } else { "FAIL" },
                self.suite,
                c.name,
                c.value,
                c.bound
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Prop1,
    Prop2,
    SiProp1,
    Scoring,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop1" => Ok(Suite::Prop1),
            "prop2" => Ok(Suite::Prop2),
            "si-prop1" => Ok(Suite::SiProp1),
            "scoring" => Ok(Suite::Scoring),
            _ => Err(Error::InvalidArgument(format!(
                "unknown suite '{s}' (expected prop1, prop2, si-prop1, scoring)"
            ))),
        }
    }
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Prop1 => "prop1",
            Suite::Prop2 => "prop2",
            Suite::SiProp1 => "si-prop1",
            Suite::Scoring => "scoring",
        }
    }

    pub fn run(&self, seed: u64) -> Result<SuiteReport> {
        match self {
            Suite::Prop1 => suite_prop1(seed),
            Suite::Prop2 => suite_prop2(seed),
            Suite::SiProp1 => suite_si_prop1(seed),
            Suite::Scoring => suite_scoring(seed),
        }
    }
}

/// Estimator unbiasedness against the closed-form Gaussian CRPS.
pub fn suite_scoring(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("scoring");
    let reps = 100_000;
    for (k, y) in [0.0, 0.5, 2.0].into_iter().enumerate() {
        let mut r = rng::stream(seed, &[rng::domain::MONTE_CARLO, k as u64]);
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut m = [[0.0]; 4];
        for _ in 0..reps {
            for v in m.iter_mut() {
                v[0] = rng::standard_normal(&mut r);
            }
            let s = energy_score(&m, &[y])?;
            s1 += s;
            s2 += s * s;
        }
        let mean = s1 / reps as f64;
        let se = ((s2 / reps as f64 - mean * mean) / reps as f64).sqrt();
        let err = (mean - gaussian_crps_oracle(0.0, 1.0, y)?).abs();
        rep.check(
            &format!("unbiased_y{y}"),
            err / se,
            "<= 3 standard errors",
            err <= 3.0 * se,
        );
    }
    Ok(rep)
}

/// Expected score of `N(mu, sigma²)` under `y ∼ N(0, 1)`, averaged over
/// common Monte Carlo outcomes.
pub fn expected_gaussian_score(mu: f64, sigma: f64, ys: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &y in ys {
        s += gaussian_crps_oracle(mu, sigma, y)?;
    }
    Ok(s / ys.len() as f64)
}

/// Grid point of minimal expected score over a `n × n` grid of forecasts.
pub fn propriety_grid(n: usize, mc: usize, seed: u64) -> Result<(f64, f64, f64, f64)> {
    let mut r = rng::stream(seed, &[rng::domain::MONTE_CARLO]);
    let ys: Vec<f64> = (0..mc).map(|_| rng::standard_normal(&mut r)).collect();
    let mus: Vec<f64> = (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect();
    let sigmas: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 / (n - 1) as f64).collect();
    let cells: Vec<(f64, f64)> = mus
        .iter()
        .flat_map(|&m| sigmas.iter().map(move |&s| (m, s)))
        .collect();
    let scores: Vec<f64> = cells
        .par_iter()
        .map(|&(m, s)| expected_gaussian_score(m, s, &ys))
        .collect::<Result<_>>()?;
    let best = (0..cells.len())
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
        .unwrap();
    Ok((
        cells[best].0,
        cells[best].1,
        2.0 / (n - 1) as f64,
        1.0 / (n - 1) as f64,
    ))
}

fn normal_sampler(mu: f64) -> impl Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync {
    move |r| vec![mu + rng::standard_normal(r)]
}

/// Closed form of the energy-score divergence between `N(0,1)` and `N(1,1)`
/// in one dimension.
pub fn gaussian_shift_divergence() -> f64 {
    use statrs::function::erf::erf;
    2.0 / std::f64::consts::PI.sqrt() * ((-0.25f64).exp() - 1.0) + erf(0.5)
}

pub fn suite_prop2(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("prop2");
    let (mu, sigma, dmu, dsigma) = propriety_grid(41, 20_000, seed)?;
    rep.check(
        "grid_argmin_mu",
        mu,
        format!("|mu| <= {dmu}"),
        mu.abs() <= dmu + 1e-12,
    );
    rep.check(
        "grid_argmin_sigma",
        sigma,
        format!("|sigma - 1| <= {dsigma}"),
        (sigma - 1.0).abs() <= dsigma + 1e-12,
    );
    let same = divergence_estimator(
        normal_sampler(0.0),
        normal_sampler(0.0),
        4,
        100_000,
        rng::sub_seed(seed, &[1]),
    )?;
    rep.check(
        "divergence_same_law",
        same.value / same.se,
        "|d| <= 3 standard errors",
        same.value.abs() <= 3.0 * same.se,
    );
    let shift = divergence_estimator(
        normal_sampler(0.0),
        normal_sampler(1.0),
        4,
        100_000,
        rng::sub_seed(seed, &[2]),
    )?;
    rep.check(
        "divergence_shift_z",
        shift.value / shift.se,
        "> 5 standard errors",
        shift.value > 5.0 * shift.se,
    );
    let exact = gaussian_shift_divergence();
    rep.check(
        "divergence_shift_vs_closed_form",
        (shift.value - exact).abs() / shift.se,
        "<= 3 standard errors",
        (shift.value - exact).abs() <= 3.0 * shift.se,
    );
    Ok(rep)
}

/// Parameter draws for the decomposition check.
pub fn decomposition_draws(seed: u64, n: usize) -> Vec<(Ar1Model, Ar1System)> {
    let mut r = rng::stream(seed, &[rng::domain::MONTE_CARLO, u64::MAX]);
    (0..n)
        .map(|_| {
            let sys = Ar1System::gaussian(r.gen_range(-0.95..0.95), r.gen_range(0.2..2.0));
            let model = Ar1Model {
                theta1: r.gen_range(-0.95..0.95),
                theta2: r.gen_range(0.0..2.0),
            };
            (model, sys)
        })
        .collect()
}

/// Decomposition identity and both collapse fits.
pub fn suite_prop1(seed: u64) -> Result<SuiteReport> {
    let mut rep = suite_decomposition(seed)?;
    rep.checks.extend(suite_collapse(seed)?.checks);
    Ok(rep)
}

/// Monte Carlo MSE against bias + model variance + target variance.
pub fn suite_decomposition(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("prop1");
    let leads = [1usize, 5, 20];
    for (k, (model, sys)) in decomposition_draws(seed, 5).iter().enumerate() {
        let mc = mc_mse(
            model,
            sys,
            &leads,
            200_000,
            rng::sub_seed(seed, &[k as u64]),
        );
        for (&m, (mean, se)) in leads.iter().zip(mc) {
            let (b, v, t) = mse_decomposition(model, sys, m)?;
            let err = (mean - (b + v + t)).abs();
            rep.check(
                &format!("decomposition_draw{k}_lead{m}"),
                err / se,
                "<= 3 standard errors",
                err <= 3.0 * se,
            );
        }
    }
    Ok(rep)
}

/// Euclidean and energy-score fits of the AR(1) model at a long window.
pub fn suite_collapse(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("prop1");
    let sys = Ar1System::gaussian(0.9, 1.0);
    let cfg = CollapseConfig::default();
    let e = collapse_experiment(&sys, TrainLoss::Euclidean, &cfg, rng::sub_seed(seed, &[10]))?;
    rep.check(
        "euclidean_theta2",
        e.theta2.abs(),
        "<= 0.05",
        e.theta2.abs() <= 0.05,
    );
    rep.check(
        "euclidean_theta1",
        (e.theta1 - 0.9).abs(),
        "|theta1 - 0.9| <= 0.05",
        (e.theta1 - 0.9).abs() <= 0.05,
    );
    rep.check("euclidean_w2", e.w2, ">= 1.5", e.w2 >= 1.5);
    rep.check(
        "euclidean_spread",
        e.long_lead_spread / e.invariant_std,
        "<= 0.05 of climatological std",
        e.long_lead_spread <= 0.05 * e.invariant_std,
    );
    let s = collapse_experiment(
        &sys,
        TrainLoss::EnergyScore { members: 8 },
        &cfg,
        rng::sub_seed(seed, &[11]),
    )?;
    rep.check(
        "score_theta1",
        (s.theta1 - 0.9).abs(),
        "|theta1 - 0.9| <= 0.05",
        (s.theta1 - 0.9).abs() <= 0.05,
    );
    rep.check(
        "score_theta2",
        (s.theta2.abs() - 1.0).abs(),
        "|theta2 - 1| <= 0.05",
        (s.theta2.abs() - 1.0).abs() <= 0.05,
    );
    rep.check("score_w2", s.w2, "<= 0.1", s.w2 <= 0.1);
    Ok(rep)
}

/// Long-lead constant-forecast optimum of the Euclidean loss against the
/// invariant median and mean of the skewed system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyReport {
    pub optimum: f64,
    pub oracle_median: f64,
    pub oracle_mean: f64,
    pub invariant_std: f64,
    pub squared_optimum: f64,
}

pub fn degeneracy_experiment(
    sys: &Ar1System,
    lead: usize,
    samples: usize,
    oracle_steps: usize,
    seed: u64,
) -> Result<DegeneracyReport> {
    sys.validate()?;
    let ys = lead_samples(sys, lead, samples, rng::sub_seed(seed, &[0]));
    let optimum = risk_minimizer(PointLoss::Euclidean, &ys)?;
    let squared_optimum = risk_minimizer(PointLoss::Squared, &ys)?;
    let long = sys.simulate(oracle_steps, rng::sub_seed(seed, &[1]));
    Ok(DegeneracyReport {
        optimum,
        oracle_median: median(&long),
        oracle_mean: mean(&long),
        invariant_std: sys.invariant_variance().sqrt(),
        squared_optimum,
    })
}

pub fn suite_si_prop1(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("si-prop1");
    let d = degeneracy_experiment(&Ar1System::skewed(), 50, 1_000_000, 10_000_000, seed)?;
    let tol = 0.02 * d.invariant_std;
    rep.check(
        "optimum_vs_median",
        (d.optimum - d.oracle_median).abs() / d.invariant_std,
        "<= 0.02 std",
        (d.optimum - d.oracle_median).abs() <= tol,
    );
    rep.check(
        "optimum_vs_mean",
        (d.optimum - d.oracle_mean).abs() / d.invariant_std,
        "> 0.02 std",
        (d.optimum - d.oracle_mean).abs() > tol,
    );
    rep.check(
        "squared_optimum_vs_mean",
        (d.squared_optimum - d.oracle_mean).abs() / d.invariant_std,
        "<= 0.02 std",
        (d.squared_optimum - d.oracle_mean).abs() <= tol,
    );
    Ok(rep)
}
