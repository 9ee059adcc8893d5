//! Model-agnostic interface for parameterized, possibly stochastic, Markov
//! models that can be rolled out from an observed state.
//!
//! Scoring and calibration work with flat `&[f64]` states so the same code
//! drives the QG closures and the scalar toy systems of the theory lab.

use crate::error::Result;

/// Addresses the noise stream of one ensemble member in one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub window: u64,
    pub member: u64,
}

pub trait Propagate {
    /// Advance one model step and return the new state.
    fn advance(&mut self) -> Result<&[f64]>;
}

pub trait Dynamics: Sync {
    /// Parameters compiled into whatever form the runner needs.
    type Model: Sync;
    type Runner<'a>: Propagate
    where
        Self: 'a;

    fn n_params(&self) -> usize;
    /// Whether the model draws noise. Deterministic models ignore the
    /// member part of the stream key.
    fn is_stochastic(&self) -> bool;
    fn build(&self, theta: &[f64]) -> Result<Self::Model>;
    fn start<'a>(
        &'a self,
        model: &'a Self::Model,
        x0: &[f64],
        key: StreamKey,
    ) -> Result<Self::Runner<'a>>;
}

/// Member trajectories from a shared initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleForecast {
    pub initial: Vec<f64>,
    /// `members[s][m]` is member `s` at lead `m + 1`. A failed member keeps
    /// the leads it completed.
    pub members: Vec<Vec<Vec<f64>>>,
    /// Lead (1-based) at which each member became unstable.
    pub failed_at: Vec<Option<usize>>,
    pub seed: u64,
    pub window: u64,
    pub leads: usize,
}

impl EnsembleForecast {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn surviving(&self) -> impl Iterator<Item = &Vec<Vec<f64>>> {
        self.members
            .iter()
            .zip(&self.failed_at)
            .filter(|(_, f)| f.is_none())
            .map(|(m, _)| m)
    }
}

/// Roll out `size` members for `leads` steps. Members run in parallel; each
/// owns the noise stream `(seed, window, member)`.
pub fn rollout_ensemble<D: Dynamics>(
    dynamics: &D,
    model: &D::Model,
    x0: &[f64],
    leads: usize,
    size: usize,
    seed: u64,
    window: u64,
) -> Result<EnsembleForecast> {
    use rayon::prelude::*;
    if size == 0 || leads == 0 {
        return Err(crate::Error::InvalidArgument(
            "ensemble size and window length must be >= 1".into(),
        ));
    }
    let runs: Vec<Result<(Vec<Vec<f64>>, Option<usize>)>> = (0..size)
        .into_par_iter()
        .map(|s| {
            let mut runner = dynamics.start(
                model,
                x0,
                StreamKey {
                    seed,
                    window,
                    member: s as u64,
                },
            )?;
            let mut traj = Vec::with_capacity(leads);
            for m in 0..leads {
                match runner.advance() {
                    Ok(x) => traj.push(x.to_vec()),
                    Err(crate::Error::Instability { .. }) => return Ok((traj, Some(m + 1))),
                    Err(e) => return Err(e),
                }
            }
            Ok((traj, None))
        })
        .collect();
    let mut members = Vec::with_capacity(size);
    let mut failed_at = Vec::with_capacity(size);
    for r in runs {
        let (t, f) = r?;
        members.push(t);
        failed_at.push(f);
    }
    Ok(EnsembleForecast {
        initial: x0.to_vec(),
        members,
        failed_at,
        seed,
        window,
        leads,
    })
}
