use closure_lab::qg::{QgModel, QgParams, StepperState, SECONDS_PER_DAY};
use closure_lab::theorylab::{
    expected_gaussian_score, window_mse_objective, window_score_objective, Ar1Model, Ar1System,
};
use closure_lab::{rng, Error, LayeredField, Result};

pub const MU_RANGE: (f64, f64) = (-2.0, 2.0);
pub const SIGMA_RANGE: (f64, f64) = (0.1, 3.0);
pub const THETA2_RANGE: (f64, f64) = (0.0, 2.0);
const CRPS_SAMPLES: usize = 2000;

pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub struct Viewer {
    model: QgModel,
    state: StepperState,
    field: LayeredField,
}

impl Viewer {
    pub fn new(n: usize, seed: u64, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        let model = QgModel::new(QgParams::jet(n, 7200.0))?;
        let mut q0 = model.initial_noise(seed);
        for v in q0.values.iter_mut() {
            *v *= amplitude;
        }
        let state = model.start(&q0)?;
        Ok(Viewer {
            model,
            state,
            field: q0,
        })
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.model.step(&mut self.state)?;
        }
        self.field = self.model.physical(&self.state)?;
        self.model.check_stable(&self.field, &self.state)
    }

    pub fn layer(&self, l: usize) -> Vec<f64> {
        self.field.layer(l).to_vec()
    }

    pub fn n(&self) -> usize {
        self.field.nx
    }

    pub fn days(&self) -> f64 {
        self.state.time / SECONDS_PER_DAY
    }

    pub fn energy(&self) -> f64 {
        self.model.energy(&self.state.q)
    }
}

pub fn score_landscape(n: usize, mc: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 || mc == 0 {
        return Err(Error::InvalidArgument("need n >= 2 and mc >= 1".into()));
    }
    let mut r = rng::stream(seed, &[rng::domain::MONTE_CARLO]);
    let ys: Vec<f64> = (0..mc).map(|_| rng::standard_normal(&mut r)).collect();
    let mus = axis(MU_RANGE.0, MU_RANGE.1, n);
    let mut out = Vec::with_capacity(n * n);
    for sigma in axis(SIGMA_RANGE.0, SIGMA_RANGE.1, n) {
        for &mu in &mus {
            out.push(expected_gaussian_score(mu, sigma, &ys)?);
        }
    }
    Ok(out)
}

pub fn collapse_curves(a: f64, window: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sys = Ar1System::gaussian(a, 1.0);
    sys.validate()?;
    if window == 0 || n < 2 {
        return Err(Error::InvalidArgument("need window >= 1 and n >= 2".into()));
    }
    let thetas = axis(THETA2_RANGE.0, THETA2_RANGE.1, n);
    let mut mse = Vec::with_capacity(n);
    let mut crps = Vec::with_capacity(n);
    for &theta2 in &thetas {
        let m = Ar1Model { theta1: a, theta2 };
        mse.push(window_mse_objective(&m, &sys, window)?);
        crps.push(window_score_objective(
            &m,
            &sys,
            window,
            CRPS_SAMPLES,
            seed,
        )?);
    }
    mse.extend(crps);
    Ok(mse)
}
