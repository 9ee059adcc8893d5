//! Generative closures `m̃ = G_θ(x̃, ξ)` for the coarse QG model.
//!
//! Every closure output has its zero Fourier mode removed and is passed
//! through the high-pass multiplier `(kx² + ky²) / kmax²`. Deterministic
//! families ignore the noise input entirely.

use crate::dynamics::{Dynamics, Propagate, StreamKey};
use crate::error::{Error, Result};
use crate::field::{Grid, LayeredField};
use crate::qg::{QgModel, StepperState};
use crate::rng;
use crate::spectral::{SpectralField, SpectralOps};

const STENCIL: usize = 5;
const TAPS: usize = STENCIL * STENCIL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosureFamily {
    /// Layer-wise radial-band spectral gains on the state and (when
    /// stochastic) on the noise. Gains are `theta * scale`.
    LinearSpectral {
        bands: usize,
        stochastic: bool,
        state_scale: f64,
        noise_scale: f64,
    },
    /// Shared periodic 5×5 convolution over `(q1, q2[, ξ1, ξ2])` into
    /// `hidden` tanh channels, then a pointwise map to two output layers.
    LocalStencil {
        hidden: usize,
        stochastic: bool,
        input_scale: f64,
        output_scale: f64,
    },
}

impl ClosureFamily {
    pub fn id(&self) -> u32 {
        match self {
            ClosureFamily::LinearSpectral { .. } => 1,
            ClosureFamily::LocalStencil { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClosureFamily::LinearSpectral { .. } => "linear-spectral",
            ClosureFamily::LocalStencil { .. } => "local-stencil",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        match *self {
            ClosureFamily::LinearSpectral { stochastic, .. }
            | ClosureFamily::LocalStencil { stochastic, .. } => stochastic,
        }
    }

    pub fn noise_channels(&self) -> usize {
        if self.is_stochastic() {
            2
        } else {
            0
        }
    }

    fn input_channels(&self) -> usize {
        2 + self.noise_channels()
    }

    pub fn n_params(&self) -> usize {
        match *self {
            ClosureFamily::LinearSpectral {
                bands, stochastic, ..
            } => 2 * bands * if stochastic { 2 } else { 1 },
            ClosureFamily::LocalStencil { hidden, .. } => {
                hidden * self.input_channels() * TAPS + hidden + 2 * hidden
            }
        }
    }

    /// Same family with the noise input switched on or off.
    pub fn with_stochastic(self, on: bool) -> Self {
        match self {
            ClosureFamily::LinearSpectral {
                bands,
                state_scale,
                noise_scale,
                ..
            } => ClosureFamily::LinearSpectral {
                bands,
                stochastic: on,
                state_scale,
                noise_scale,
            },
            ClosureFamily::LocalStencil {
                hidden,
                input_scale,
                output_scale,
                ..
            } => ClosureFamily::LocalStencil {
                hidden,
                stochastic: on,
                input_scale,
                output_scale,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureParams {
    pub family: ClosureFamily,
    pub theta: Vec<f64>,
    pub zero_mean: bool,
    pub high_pass: bool,
}

pub const PARAM_MAGIC: &[u8; 4] = b"CGCP";
pub const PARAM_VERSION: u32 = 1;

impl ClosureParams {
    pub fn new(family: ClosureFamily, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != family.n_params() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} parameters for {}", family.n_params(), family.name()),
                got: theta.len().to_string(),
            });
        }
        Ok(ClosureParams {
            family,
            theta,
            zero_mean: true,
            high_pass: true,
        })
    }

    pub fn zeros(family: ClosureFamily) -> Self {
        ClosureParams {
            family,
            theta: vec![0.0; family.n_params()],
            zero_mean: true,
            high_pass: true,
        }
    }

    pub fn noise_channels(&self) -> usize {
        self.family.noise_channels()
    }

    /// Versioned little-endian blob: magic, version, family descriptor, theta.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(48 + 8 * self.theta.len());
        b.extend_from_slice(PARAM_MAGIC);
        b.extend_from_slice(&PARAM_VERSION.to_le_bytes());
        b.extend_from_slice(&self.family.id().to_le_bytes());
        let (size, sa, sb) = match self.family {
            ClosureFamily::LinearSpectral {
                bands,
                state_scale,
                noise_scale,
                ..
            } => (bands, state_scale, noise_scale),
            ClosureFamily::LocalStencil {
                hidden,
                input_scale,
                output_scale,
                ..
            } => (hidden, input_scale, output_scale),
        };
        b.extend_from_slice(&[
            self.family.is_stochastic() as u8,
            self.zero_mean as u8,
            self.high_pass as u8,
            0,
        ]);
        b.extend_from_slice(&(size as u32).to_le_bytes());
        b.extend_from_slice(&sa.to_le_bytes());
        b.extend_from_slice(&sb.to_le_bytes());
        b.extend_from_slice(&(self.theta.len() as u64).to_le_bytes());
        for t in &self.theta {
            b.extend_from_slice(&t.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("closure parameter blob: {m}"));
        if b.len() < 44 || &b[..4] != PARAM_MAGIC {
            return Err(bad("bad magic or truncated header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != PARAM_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let id = u32_at(8);
        let (stochastic, zero_mean, high_pass) = (b[12] != 0, b[13] != 0, b[14] != 0);
        let size = u32_at(16) as usize;
        let (sa, sb) = (f64_at(20), f64_at(28));
        let n = u64::from_le_bytes(b[36..44].try_into().unwrap()) as usize;
        let family = match id {
            1 => ClosureFamily::LinearSpectral {
                bands: size,
                stochastic,
                state_scale: sa,
                noise_scale: sb,
            },
            2 => ClosureFamily::LocalStencil {
                hidden: size,
                stochastic,
                input_scale: sa,
                output_scale: sb,
            },
            _ => return Err(bad(&format!("unknown family id {id}"))),
        };
        if b.len() != 44 + 8 * n {
            return Err(bad("length does not match parameter count"));
        }
        let theta = (0..n).map(|k| f64_at(44 + 8 * k)).collect();
        let mut p = ClosureParams::new(family, theta)?;
        p.zero_mean = zero_mean;
        p.high_pass = high_pass;
        Ok(p)
    }
}

/// A standard Gaussian field together with the stream it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub values: LayeredField,
    pub seed: u64,
    pub stream: u64,
    pub step: u64,
    pub member: u64,
}

impl NoiseField {
    pub fn draw(
        grid: &Grid,
        layers: usize,
        seed: u64,
        stream: u64,
        step: u64,
        member: u64,
    ) -> Self {
        let mut values = LayeredField::zeros(grid.nx, grid.ny, layers);
        let mut r = rng::stream(seed, &[rng::domain::CLOSURE_NOISE, stream, member, step]);
        rng::fill_standard_normal(&mut r, &mut values.values);
        NoiseField {
            values,
            seed,
            stream,
            step,
            member,
        }
    }
}

/// Closure parameters compiled against a grid.
#[derive(Debug, Clone)]
pub struct Closure {
    params: ClosureParams,
    grid: Grid,
    band: Vec<usize>,
    /// Zero-mean and high-pass constraints folded into one multiplier.
    constraint: Vec<f64>,
}

impl Closure {
    pub fn new(params: ClosureParams, ops: &SpectralOps) -> Result<Self> {
        if params.theta.len() != params.family.n_params() {
            return Err(Error::DimensionMismatch {
                expected: params.family.n_params().to_string(),
                got: params.theta.len().to_string(),
            });
        }
        let grid = *ops.grid();
        let kmax = grid.kmax();
        let bands = match params.family {
            ClosureFamily::LinearSpectral { bands, .. } => bands.max(1),
            _ => 1,
        };
        let band = ops
            .kappa2()
            .iter()
            .map(|k2| (((k2.sqrt() / kmax) * bands as f64) as usize).min(bands - 1))
            .collect();
        let constraint = ops
            .kappa2()
            .iter()
            .map(|&k2| {
                let mut m = if params.high_pass {
                    k2 / (kmax * kmax)
                } else {
                    1.0
                };
                if params.zero_mean && k2 == 0.0 {
                    m = 0.0;
                }
                m
            })
            .collect();
        Ok(Closure {
            params,
            grid,
            band,
            constraint,
        })
    }

    pub fn params(&self) -> &ClosureParams {
        &self.params
    }

    pub fn is_stochastic(&self) -> bool {
        self.params.family.is_stochastic()
    }

    fn is_zero(&self) -> bool {
        self.params.theta.iter().all(|&t| t == 0.0)
    }

    /// Spectral model-error increment for state `x` (given both in spectral
    /// and physical form) and optional noise.
    pub fn increment(
        &self,
        ops: &SpectralOps,
        x_hat: &SpectralField,
        x: &LayeredField,
        xi: Option<&LayeredField>,
    ) -> Result<SpectralField> {
        if x_hat.grid != self.grid || x_hat.layers != 2 {
            return Err(Error::GridMismatch);
        }
        if self.is_stochastic() {
            match xi {
                Some(n) if n.nx == self.grid.nx && n.ny == self.grid.ny && n.layers == 2 => {}
                _ => {
                    return Err(Error::DimensionMismatch {
                        expected: format!("2x{}x{} noise field", self.grid.ny, self.grid.nx),
                        got: xi
                            .map(|n| format!("{}x{}x{}", n.layers, n.ny, n.nx))
                            .unwrap_or_else(|| "none".into()),
                    })
                }
            }
        }
        let n = self.grid.len();
        let mut out = SpectralField::zeros(self.grid, 2);
        if self.is_zero() {
            return Ok(out);
        }
        match self.params.family {
            ClosureFamily::LinearSpectral {
                bands,
                stochastic,
                state_scale,
                noise_scale,
            } => {
                let th = &self.params.theta;
                let xi_hat = if stochastic {
                    Some(ops.forward(xi.unwrap())?)
                } else {
                    None
                };
                for l in 0..2 {
                    for k in 0..n {
                        let b = self.band[k];
                        let mut v = x_hat.coeffs[l * n + k] * (th[l * bands + b] * state_scale);
                        if let Some(s) = &xi_hat {
                            v +=
                                s.coeffs[l * n + k] * (th[2 * bands + l * bands + b] * noise_scale);
                        }
                        out.coeffs[l * n + k] = v * self.constraint[k];
                    }
                }
            }
            ClosureFamily::LocalStencil {
                hidden,
                stochastic,
                input_scale,
                output_scale,
            } => {
                let phys = self.stencil_forward(
                    x,
                    if stochastic { xi } else { None },
                    hidden,
                    input_scale,
                    output_scale,
                );
                out = ops.forward(&phys)?;
                ops.apply_multiplier(&mut out, &self.constraint);
            }
        }
        Ok(out)
    }

    fn stencil_forward(
        &self,
        x: &LayeredField,
        xi: Option<&LayeredField>,
        hidden: usize,
        input_scale: f64,
        output_scale: f64,
    ) -> LayeredField {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let n = nx * ny;
        let channels = self.params.family.input_channels();
        let mut inputs: Vec<f64> = x.values.iter().map(|v| v / input_scale).collect();
        if let Some(xi) = xi {
            inputs.extend_from_slice(&xi.values);
        }
        let th = &self.params.theta;
        let w = &th[..hidden * channels * TAPS];
        let bias = &th[hidden * channels * TAPS..hidden * channels * TAPS + hidden];
        let v = &th[hidden * channels * TAPS + hidden..];
        let mut out = LayeredField::zeros(nx, ny, 2);
        let mut h = vec![0.0; n];
        for c in 0..hidden {
            h.iter_mut().for_each(|x| *x = bias[c]);
            for ch in 0..channels {
                let src = &inputs[ch * n..(ch + 1) * n];
                for (tap, &wt) in w[(c * channels + ch) * TAPS..(c * channels + ch + 1) * TAPS]
                    .iter()
                    .enumerate()
                {
                    if wt == 0.0 {
                        continue;
                    }
                    let dy = (tap / STENCIL) as isize - 2;
                    let dx = (tap % STENCIL) as isize - 2;
                    for j in 0..ny {
                        let js = (j as isize + dy).rem_euclid(ny as isize) as usize;
                        let row = &src[js * nx..(js + 1) * nx];
                        let hrow = &mut h[j * nx..(j + 1) * nx];
                        for (i, hv) in hrow.iter_mut().enumerate() {
                            let is = (i as isize + dx).rem_euclid(nx as isize) as usize;
                            *hv += wt * row[is];
                        }
                    }
                }
            }
            for l in 0..2 {
                let gain = v[l * hidden + c] * output_scale;
                if gain == 0.0 {
                    continue;
                }
                for (o, hv) in out.layer_mut(l).iter_mut().zip(&h) {
                    *o += gain * hv.tanh();
                }
            }
        }
        out
    }
}

/// Physical-space closure output `m̃ = G_θ(x, ξ)`.
pub fn apply_closure(
    ops: &SpectralOps,
    x: &LayeredField,
    xi: Option<&NoiseField>,
    p: &ClosureParams,
) -> Result<LayeredField> {
    let closure = Closure::new(p.clone(), ops)?;
    let x_hat = ops.forward(x)?;
    let m = closure.increment(ops, &x_hat, x, xi.map(|n| &n.values))?;
    let mut out = ops.inverse(&m);
    out.time = x.time;
    Ok(out)
}

/// One coarse step from `x` (Euler start) plus the closure increment.
pub fn closed_step(
    model: &QgModel,
    closure: &Closure,
    x: &LayeredField,
    xi: Option<&NoiseField>,
) -> Result<LayeredField> {
    let mut state = model.start(x)?;
    let m = closure.increment(model.ops(), &state.q, x, xi.map(|n| &n.values))?;
    model.step(&mut state)?;
    state.q.axpy(1.0, &m);
    model.physical(&state)
}

/// The coarse QG model closed by one closure family.
#[derive(Debug)]
pub struct QgClosedDynamics {
    model: QgModel,
    family: ClosureFamily,
}

impl QgClosedDynamics {
    pub fn new(model: QgModel, family: ClosureFamily) -> Self {
        QgClosedDynamics { model, family }
    }

    pub fn model(&self) -> &QgModel {
        &self.model
    }

    pub fn family(&self) -> ClosureFamily {
        self.family
    }

    pub fn field_from(&self, x: &[f64]) -> Result<LayeredField> {
        let g = self.model.grid();
        LayeredField::from_values(g.nx, g.ny, 2, x.to_vec())
    }
}

pub struct ClosedRunner<'a> {
    dynamics: &'a QgClosedDynamics,
    closure: &'a Closure,
    state: StepperState,
    phys: LayeredField,
    key: StreamKey,
}

impl ClosedRunner<'_> {
    pub fn state(&self) -> &LayeredField {
        &self.phys
    }
}

impl Propagate for ClosedRunner<'_> {
    fn advance(&mut self) -> Result<&[f64]> {
        let model = &self.dynamics.model;
        let grid = model.grid();
        let xi = if self.closure.is_stochastic() {
            Some(
                NoiseField::draw(
                    grid,
                    2,
                    self.key.seed,
                    self.key.window,
                    self.state.step,
                    self.key.member,
                )
                .values,
            )
        } else {
            None
        };
        let m = self
            .closure
            .increment(model.ops(), &self.state.q, &self.phys, xi.as_ref())?;
        model.step(&mut self.state)?;
        self.state.q.axpy(1.0, &m);
        self.phys = model.physical(&self.state)?;
        Ok(&self.phys.values)
    }
}

impl Dynamics for QgClosedDynamics {
    type Model = Closure;
    type Runner<'a> = ClosedRunner<'a>;

    fn n_params(&self) -> usize {
        self.family.n_params()
    }

    fn is_stochastic(&self) -> bool {
        self.family.is_stochastic()
    }

    fn build(&self, theta: &[f64]) -> Result<Closure> {
        Closure::new(
            ClosureParams::new(self.family, theta.to_vec())?,
            self.model.ops(),
        )
    }

    fn start<'a>(
        &'a self,
        closure: &'a Closure,
        x0: &[f64],
        key: StreamKey,
    ) -> Result<ClosedRunner<'a>> {
        let phys = self.field_from(x0)?;
        let state = self.model.start(&phys)?;
        Ok(ClosedRunner {
            dynamics: self,
            closure,
            state,
            phys,
            key,
        })
    }
}
