//! Two-layer quasi-geostrophic (Phillips) model.
//!
//! Prognostic variable is the eddy PV anomaly `(q1, q2)`; the stream function
//! follows from a 2×2 inversion per Fourier mode. Time stepping is AB3
//! (bootstrapped by Euler and AB2) followed by one application of the
//! scale-selective dissipation filter.

use crate::error::{Error, Result};
use crate::field::{Grid, LayeredField};
use crate::rng;
use crate::spectral::{SpectralField, SpectralOps, SsdFilter};
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::collections::VecDeque;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 365.0 * SECONDS_PER_DAY;

/// RMS amplitude (1/s) of the spin-up noise.
pub const SPIN_UP_NOISE_RMS: f64 = 1e-7;
/// Instability is declared when `max |q|` exceeds this multiple of the
/// initial RMS.
pub const BLOWUP_FACTOR: f64 = 1e6;
/// Steps between instability checks during spin-up.
pub const SPIN_UP_CHECK_EVERY: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QgParams {
    pub lx: f64,
    pub ly: f64,
    pub h1: f64,
    pub h2: f64,
    pub ubar1: f64,
    pub beta: f64,
    pub gamma: f64,
    /// First Rossby radius of deformation `1/k_d`.
    pub rd: f64,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub ssd: SsdFilter,
    pub ssd_enabled: bool,
    /// Nonlinear advection `J(ψ, q)`; disabled only for linear analysis.
    pub advection: bool,
}

impl QgParams {
    /// Ocean jet configuration at resolution `n × n` and time step `dt`.
    pub fn jet(n: usize, dt: f64) -> Self {
        QgParams {
            lx: 1.0e6,
            ly: 1.0e6,
            h1: 500.0,
            h2: 5000.0,
            ubar1: 0.025,
            beta: 1.0e-11,
            gamma: 7.0e-8,
            rd: 15_000.0,
            nx: n,
            ny: n,
            dt,
            ssd: SsdFilter::default(),
            ssd_enabled: true,
            advection: true,
        }
    }

    /// Desk-scale fine model: 128², 15 minutes.
    pub fn fine_default() -> Self {
        Self::jet(128, 900.0)
    }

    /// Desk-scale coarse model: 32², 2 hours.
    pub fn coarse_default() -> Self {
        Self::jet(32, 7200.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("H1", self.h1),
            ("H2", self.h2),
            ("Lx", self.lx),
            ("Ly", self.ly),
            ("dt", self.dt),
            ("rd", self.rd),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("Ubar1", self.ubar1),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn kd2(&self) -> f64 {
        1.0 / (self.rd * self.rd)
    }

    pub fn delta(&self) -> f64 {
        self.h1 / self.h2
    }

    /// Upper-layer coupling `k_d² / (1 + H1/H2)`.
    pub fn f1(&self) -> f64 {
        self.kd2() / (1.0 + self.delta())
    }

    /// Lower-layer coupling `(H1/H2) k_d² / (1 + H1/H2)`.
    pub fn f2(&self) -> f64 {
        self.delta() * self.f1()
    }

    pub fn beta1(&self) -> f64 {
        self.beta + self.f1() * self.ubar1
    }

    pub fn beta2(&self) -> f64 {
        self.beta - self.f2() * self.ubar1
    }

    /// Stable 64-bit digest of every field.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        for v in [
            self.lx,
            self.ly,
            self.h1,
            self.h2,
            self.ubar1,
            self.beta,
            self.gamma,
            self.rd,
            self.dt,
            self.ssd.cutoff,
            self.ssd.alpha,
        ] {
            h.update(v.to_le_bytes());
        }
        h.update((self.nx as u64).to_le_bytes());
        h.update((self.ny as u64).to_le_bytes());
        h.update([self.ssd_enabled as u8, self.advection as u8]);
        u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
    }
}

/// Time-stepping state for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperState {
    pub q: SpectralField,
    /// Previous tendencies, most recent first (at most two kept).
    pub history: VecDeque<SpectralField>,
    pub step: u64,
    pub time: f64,
    /// `max |q|` above which the trajectory is declared unstable.
    pub blowup: f64,
}

/// The Phillips model on one grid. Immutable and shareable between threads.
#[derive(Debug)]
pub struct QgModel {
    params: QgParams,
    ops: SpectralOps,
}

impl QgModel {
    pub fn new(params: QgParams) -> Result<Self> {
        params.validate()?;
        let ops = SpectralOps::with_filter(params.grid()?, params.ssd);
        Ok(QgModel { params, ops })
    }

    pub fn params(&self) -> &QgParams {
        &self.params
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    pub fn grid(&self) -> &Grid {
        self.ops.grid()
    }

    /// Stream function from PV anomaly. The zero mode of ψ is fixed to 0.
    pub fn invert_pv(&self, q: &SpectralField) -> SpectralField {
        assert_eq!(q.layers, 2, "two-layer model");
        let (f1, f2) = (self.params.f1(), self.params.f2());
        let mut psi = SpectralField::zeros(q.grid, 2);
        let n = q.grid.len();
        for (k, &k2) in self.ops.kappa2().iter().enumerate() {
            if k2 == 0.0 {
                continue;
            }
            // q = M ψ,  M = [[-k2 - f1, f1], [f2, -k2 - f2]],  det = k2 (k2 + f1 + f2)
            let det = k2 * (k2 + f1 + f2);
            let (q1, q2) = (q.coeffs[k], q.coeffs[n + k]);
            psi.coeffs[k] = ((-k2 - f2) * q1 - f1 * q2) / det;
            psi.coeffs[n + k] = (-f2 * q1 + (-k2 - f1) * q2) / det;
        }
        psi
    }

    /// PV anomaly from stream function (the explicit forward operator).
    pub fn pv_of(&self, psi: &SpectralField) -> SpectralField {
        let (f1, f2) = (self.params.f1(), self.params.f2());
        let mut q = SpectralField::zeros(psi.grid, 2);
        let n = psi.grid.len();
        for (k, &k2) in self.ops.kappa2().iter().enumerate() {
            let (p1, p2) = (psi.coeffs[k], psi.coeffs[n + k]);
            q.coeffs[k] = -k2 * p1 + f1 * (p2 - p1);
            q.coeffs[n + k] = -k2 * p2 + f2 * (p1 - p2);
        }
        q
    }

    /// `∂q/∂t` without the dissipation filter.
    pub fn tendency(&self, q: &SpectralField) -> Result<SpectralField> {
        if q.grid != *self.grid() || q.layers != 2 {
            return Err(Error::GridMismatch);
        }
        let p = &self.params;
        let psi = self.invert_pv(q);
        let mut t = if p.advection {
            let mut j = self.ops.jacobian(&psi, q)?;
            j.scale(-1.0);
            j
        } else {
            SpectralField::zeros(q.grid, 2)
        };
        let n = q.grid.len();
        let nx = q.grid.nx;
        let kx = self.ops.kx();
        let (b1, b2, u, gamma) = (p.beta1(), p.beta2(), p.ubar1, p.gamma);
        let k2s = self.ops.kappa2();
        for j in 0..q.grid.ny {
            for i in 0..nx {
                let k = j * nx + i;
                // odd derivative: Nyquist column has no well-defined sign
                let ikx = if i == nx / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, kx[i])
                };
                t.coeffs[k] -= ikx * (psi.coeffs[k] * b1 + q.coeffs[k] * u);
                t.coeffs[n + k] +=
                    -ikx * psi.coeffs[n + k] * b2 + psi.coeffs[n + k] * (gamma * k2s[k]);
            }
        }
        Ok(t)
    }

    /// Layer-thickness-weighted energy `-(1/2) Σ (H_i/H) <ψ_i q_i>`.
    pub fn energy(&self, q: &SpectralField) -> f64 {
        let psi = self.invert_pv(q);
        let (w1, w2) = self.layer_weights();
        -0.5 * (w1 * psi.mean_product(q, 0) + w2 * psi.mean_product(q, 1))
    }

    /// Layer-thickness-weighted enstrophy `(1/2) Σ (H_i/H) <q_i²>`.
    pub fn enstrophy(&self, q: &SpectralField) -> f64 {
        let (w1, w2) = self.layer_weights();
        0.5 * (w1 * q.mean_square(0) + w2 * q.mean_square(1))
    }

    pub fn layer_weights(&self) -> (f64, f64) {
        let h = self.params.h1 + self.params.h2;
        (self.params.h1 / h, self.params.h2 / h)
    }

    /// Fresh stepper state; the blow-up threshold is pinned to the initial RMS.
    pub fn start(&self, q0: &LayeredField) -> Result<StepperState> {
        let q = self.ops.forward(q0)?;
        let rms = q0.rms();
        let blowup = if rms > 0.0 {
            BLOWUP_FACTOR * rms
        } else {
            f64::INFINITY
        };
        Ok(StepperState {
            q,
            history: VecDeque::with_capacity(2),
            step: 0,
            time: q0.time,
            blowup,
        })
    }

    /// Advance one step: Euler, AB2, then AB3; then the ssd filter.
    pub fn step(&self, state: &mut StepperState) -> Result<()> {
        let dt = self.params.dt;
        let t = self.tendency(&state.q)?;
        let mut incr = t.clone();
        match state.history.len() {
            0 => {}
            1 => {
                incr.scale(1.5);
                incr.axpy(-0.5, &state.history[0]);
            }
            _ => {
                incr.scale(23.0 / 12.0);
                incr.axpy(-16.0 / 12.0, &state.history[0]);
                incr.axpy(5.0 / 12.0, &state.history[1]);
            }
        }
        state.q.axpy(dt, &incr);
        if self.params.ssd_enabled {
            self.ops.ssd_filter(&mut state.q);
        }
        state.history.push_front(t);
        state.history.truncate(2);
        state.step += 1;
        state.time += dt;
        Ok(())
    }

    /// Physical-space state plus the instability check.
    pub fn physical(&self, state: &StepperState) -> Result<LayeredField> {
        let mut f = self.ops.inverse(&state.q);
        f.time = state.time;
        self.check_stable(&f, state)?;
        Ok(f)
    }

    pub fn check_stable(&self, f: &LayeredField, state: &StepperState) -> Result<()> {
        let m = f.max_abs();
        if !m.is_finite() || m > state.blowup {
            return Err(Error::Instability {
                step: state.step,
                time: state.time,
                max_abs: m,
            });
        }
        Ok(())
    }

    /// Step and return the new physical state, failing on instability.
    pub fn advance(&self, state: &mut StepperState) -> Result<LayeredField> {
        self.step(state)?;
        self.physical(state)
    }

    /// Band-limited Gaussian PV noise at mid wavenumbers with fixed RMS.
    pub fn initial_noise(&self, seed: u64) -> LayeredField {
        let g = *self.grid();
        let mut white = LayeredField::zeros(g.nx, g.ny, 2);
        rng::fill_standard_normal(
            &mut rng::stream(seed, &[rng::domain::SPIN_UP]),
            &mut white.values,
        );
        let mut s = self.ops.forward(&white).expect("grid matches");
        let kmax = g.kmax();
        let mask: Vec<f64> = self
            .ops
            .kappa2()
            .iter()
            .map(|k2| {
                let r = k2.sqrt() / kmax;
                if (0.1..=0.5).contains(&r) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        self.ops.apply_multiplier(&mut s, &mask);
        let mut f = self.ops.inverse(&s);
        for l in 0..2 {
            let layer = f.layer_mut(l);
            let rms = (layer.iter().map(|v| v * v).sum::<f64>() / layer.len() as f64).sqrt();
            for v in layer.iter_mut() {
                *v *= SPIN_UP_NOISE_RMS / rms;
            }
        }
        f
    }

    /// Integrate from seeded noise for `duration` seconds.
    pub fn spin_up(&self, seed: u64, duration: f64) -> Result<LayeredField> {
        if !(duration >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "duration must be nonnegative, got {duration}"
            )));
        }
        let q0 = self.initial_noise(seed);
        let steps = (duration / self.params.dt).round() as u64;
        if steps == 0 {
            return Ok(q0);
        }
        let mut state = self.start(&q0)?;
        for k in 1..=steps {
            self.step(&mut state)?;
            if k % SPIN_UP_CHECK_EVERY == 0 {
                self.physical(&state)?;
            }
        }
        self.physical(&state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::LayeredField;

    fn small(n: usize) -> QgParams {
        QgParams::jet(n, 1800.0)
    }

    fn random_q(model: &QgModel, seed: u64, frac: f64) -> SpectralField {
        let g = *model.grid();
        let mut f = LayeredField::zeros(g.nx, g.ny, 2);
        rng::fill_standard_normal(&mut rng::stream(seed, &[]), &mut f.values);
        let mut s = model.ops().forward(&f).unwrap();
        let kmax = g.kmax();
        let mask: Vec<f64> = model
            .ops()
            .kappa2()
            .iter()
            .map(|k| if k.sqrt() <= frac * kmax { 1e-5 } else { 0.0 })
            .collect();
        model.ops().apply_multiplier(&mut s, &mask);
        s
    }

    #[test]
    fn derived_betas() {
        let p = QgParams::jet(32, 7200.0);
        let f = p.kd2() / 1.1;
        assert!((p.beta1() - (1e-11 + f * 0.025)).abs() < 1e-24);
        assert!((p.beta2() - (1e-11 - 0.1 * f * 0.025)).abs() < 1e-24);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = small(16);
        p.h1 = 0.0;
        assert!(QgModel::new(p).is_err());
        let mut p = small(16);
        p.dt = -1.0;
        assert!(QgModel::new(p).is_err());
    }

    #[test]
    fn inversion_round_trip() {
        let m = QgModel::new(small(32)).unwrap();
        for seed in 0..5 {
            let mut q = random_q(&m, seed, 2.0);
            q.coeffs[0] = Complex64::new(0.0, 0.0);
            q.coeffs[m.grid().len()] = Complex64::new(0.0, 0.0);
            let back = m.pv_of(&m.invert_pv(&q));
            let err: f64 = back
                .coeffs
                .iter()
                .zip(&q.coeffs)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let nrm: f64 = q.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-12 * nrm, "{err} vs {nrm}");
        }
        let zero = SpectralField::zeros(*m.grid(), 2);
        assert_eq!(m.invert_pv(&zero), zero);
    }

    #[test]
    fn barotropic_inversion_with_equal_layers() {
        let mut p = small(16);
        p.h2 = p.h1;
        let m = QgModel::new(p).unwrap();
        let g = *m.grid();
        let mut q = SpectralField::zeros(g, 2);
        let k = 3 * g.nx + 2;
        let a = Complex64::new(1.3e-5, -0.4e-5);
        q.coeffs[k] = a;
        q.coeffs[g.len() + k] = a;
        let psi = m.invert_pv(&q);
        let k2 = m.ops().kappa2()[k];
        assert!((psi.coeffs[k] + a / k2).norm() <= 1e-14 * (a / k2).norm());
        assert!((psi.coeffs[g.len() + k] + a / k2).norm() <= 1e-14 * (a / k2).norm());
    }

    #[test]
    fn zero_state_has_zero_tendency_and_stays_zero() {
        let m = QgModel::new(small(16)).unwrap();
        let q0 = LayeredField::zeros(16, 16, 2);
        let mut st = m.start(&q0).unwrap();
        assert!(m
            .tendency(&st.q)
            .unwrap()
            .coeffs
            .iter()
            .all(|c| c.norm() == 0.0));
        for _ in 0..5 {
            m.step(&mut st).unwrap();
        }
        assert!(m.physical(&st).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zonal_flow_is_steady_without_beta_and_friction() {
        let mut p = small(32);
        p.beta = 0.0;
        p.gamma = 0.0;
        // β1, β2 retain the shear contribution; the x-derivatives kill them.
        let m = QgModel::new(p).unwrap();
        let g = *m.grid();
        let f = LayeredField::from_fn(&g, 2, |l, _, y| {
            1e-5 * ((2.0 * std::f64::consts::PI * 3.0 * y / g.ly).sin()
                + 0.3 * l as f64 * (2.0 * std::f64::consts::PI * y / g.ly).cos())
        });
        let t = m.tendency(&m.ops().forward(&f).unwrap()).unwrap();
        let tp = m.ops().inverse(&t);
        assert!(tp.max_abs() <= 1e-12 * 1e-5 / p.dt);
    }

    #[test]
    fn advective_tendency_conserves_energy_and_enstrophy() {
        let mut p = small(32);
        p.beta = 0.0;
        p.gamma = 0.0;
        p.ubar1 = 0.0;
        p.ssd_enabled = false;
        let m = QgModel::new(p).unwrap();
        let q = random_q(&m, 42, 0.25);
        let t = m.tendency(&q).unwrap();
        let psi = m.invert_pv(&q);
        let (w1, w2) = m.layer_weights();
        // dE/dt = -Σ w_i <ψ_i, q_i,t>
        let de = -(w1 * psi.mean_product(&t, 0) + w2 * psi.mean_product(&t, 1));
        let scale = (w1 * psi.mean_square(0).sqrt() * t.mean_square(0).sqrt())
            + (w2 * psi.mean_square(1).sqrt() * t.mean_square(1).sqrt());
        assert!(de.abs() <= 1e-10 * scale, "{de} vs {scale}");
        let dz = w1 * q.mean_product(&t, 0) + w2 * q.mean_product(&t, 1);
        let zscale = w1 * q.mean_square(0).sqrt() * t.mean_square(0).sqrt()
            + w2 * q.mean_square(1).sqrt() * t.mean_square(1).sqrt();
        assert!(dz.abs() <= 1e-10 * zscale);

        // single Euler step with an advective-scale dt
        let q_phys = m.ops().inverse(&q);
        let mut p2 = p;
        let u = (m.ops().inverse(&m.ops().ddx(&psi)).rms())
            .max(m.ops().inverse(&m.ops().ddy(&psi)).rms());
        p2.dt = 1e-5 * m.grid().dx() / u;
        let m2 = QgModel::new(p2).unwrap();
        let mut st = m2.start(&q_phys).unwrap();
        let (e0, z0) = (m2.energy(&st.q), m2.enstrophy(&st.q));
        m2.step(&mut st).unwrap();
        let (e1, z1) = (m2.energy(&st.q), m2.enstrophy(&st.q));
        assert!(
            ((e1 - e0) / e0).abs() <= 1e-8,
            "energy drift {}",
            (e1 - e0) / e0
        );
        assert!(
            ((z1 - z0) / z0).abs() <= 1e-8,
            "enstrophy drift {}",
            (z1 - z0) / z0
        );
    }

    /// exp(A t) for a 2×2 complex matrix by scaling and squaring of a Taylor series.
    fn expm2(a: [[Complex64; 2]; 2], t: f64) -> [[Complex64; 2]; 2] {
        let mul = |x: [[Complex64; 2]; 2], y: [[Complex64; 2]; 2]| {
            let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                }
            }
            r
        };
        let norm: f64 = a.iter().flatten().map(|c| c.norm()).sum::<f64>() * t.abs();
        let s = (norm.log2().ceil().max(0.0) as i32) + 4;
        let h = t / 2f64.powi(s);
        let b = [[a[0][0] * h, a[0][1] * h], [a[1][0] * h, a[1][1] * h]];
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut sum = [[one, zero], [zero, one]];
        let mut term = sum;
        for k in 1..30 {
            term = mul(term, b);
            for row in term.iter_mut() {
                for c in row.iter_mut() {
                    *c /= k as f64;
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..s {
            sum = mul(sum, sum);
        }
        sum
    }

    #[test]
    fn linear_mode_matches_exact_evolution_to_third_order() {
        let mut p = small(16);
        p.advection = false;
        p.ssd_enabled = false;
        let base = QgModel::new(p).unwrap();
        let g = *base.grid();
        let (i, j) = (2usize, 1usize);
        let k = j * g.nx + i;
        let (kx, k2) = (g.kx(i), base.ops().kappa2()[k]);
        let (f1, f2) = (p.f1(), p.f2());
        let det = k2 * (k2 + f1 + f2);
        // ψ = Minv q
        let minv = [[(-k2 - f2) / det, -f1 / det], [-f2 / det, (-k2 - f1) / det]];
        let ik = Complex64::new(0.0, kx);
        let a = [
            [
                -ik * p.beta1() * minv[0][0] - ik * p.ubar1,
                -ik * p.beta1() * minv[0][1],
            ],
            [
                (-ik * p.beta2() + p.gamma * k2) * minv[1][0],
                (-ik * p.beta2() + p.gamma * k2) * minv[1][1],
            ],
        ];
        let q0 = [Complex64::new(1e-5, 0.0), Complex64::new(-3e-6, 2e-6)];
        let exact = |t: f64| {
            let e = expm2(a, t);
            [
                e[0][0] * q0[0] + e[0][1] * q0[1],
                e[1][0] * q0[0] + e[1][1] * q0[1],
            ]
        };
        let mode_field = |v: [Complex64; 2]| {
            let mut s = SpectralField::zeros(g, 2);
            let km = ((g.ny - j) % g.ny) * g.nx + (g.nx - i) % g.nx;
            for l in 0..2 {
                s.coeffs[l * g.len() + k] = v[l];
                s.coeffs[l * g.len() + km] = v[l].conj();
            }
            s
        };
        let local_error = |dt: f64| {
            let mut pp = p;
            pp.dt = dt;
            let m = QgModel::new(pp).unwrap();
            let mut hist = VecDeque::new();
            hist.push_back(m.tendency(&mode_field(exact(-dt))).unwrap());
            hist.push_back(m.tendency(&mode_field(exact(-2.0 * dt))).unwrap());
            let mut st = StepperState {
                q: mode_field(exact(0.0)),
                history: hist,
                step: 2,
                time: 0.0,
                blowup: f64::INFINITY,
            };
            m.step(&mut st).unwrap();
            let e = exact(dt);
            ((st.q.coeffs[k] - e[0]).norm_sqr() + (st.q.coeffs[g.len() + k] - e[1]).norm_sqr())
                .sqrt()
        };
        // frequency scale so that ω dt is small
        let omega: f64 = a.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
        let dt = 0.05 / omega;
        let (e1, e2) = (local_error(dt), local_error(dt / 2.0));
        let ratio = e1 / e2;
        // local error of AB3 is O(dt^4): halving dt divides it by ~16
        assert!(
            ratio > 12.0 && ratio < 20.0,
            "ratio {ratio}, errors {e1} {e2}"
        );
        assert!(e1 < 1e-5 * 1e-5);
    }

    #[test]
    fn stepping_is_deterministic() {
        let m = QgModel::new(small(32)).unwrap();
        let q0 = m.initial_noise(3);
        let run = || {
            let mut st = m.start(&q0).unwrap();
            for _ in 0..20 {
                m.step(&mut st).unwrap();
            }
            m.physical(&st).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn instability_is_typed() {
        let m = QgModel::new(small(16)).unwrap();
        let q0 = m.initial_noise(1);
        let mut st = m.start(&q0).unwrap();
        st.q.coeffs[5] = Complex64::new(f64::NAN, 0.0);
        m.step(&mut st).unwrap();
        assert!(matches!(m.physical(&st), Err(Error::Instability { .. })));
        let mut st = m.start(&q0).unwrap();
        st.q.scale(1e7);
        assert!(matches!(m.physical(&st), Err(Error::Instability { .. })));
    }

    #[test]
    fn spin_up_zero_duration_and_reproducibility() {
        let m = QgModel::new(small(16)).unwrap();
        let a = m.spin_up(9, 0.0).unwrap();
        assert_eq!(a, m.initial_noise(9));
        assert!(
            (a.layer(0).iter().map(|v| v * v).sum::<f64>() / 256.0).sqrt() - SPIN_UP_NOISE_RMS
                < 1e-20
        );
        let b = m.spin_up(9, 10.0 * 1800.0).unwrap();
        let c = m.spin_up(9, 10.0 * 1800.0).unwrap();
        assert_eq!(b, c);
        assert_ne!(b, m.spin_up(10, 10.0 * 1800.0).unwrap());
        assert!(m.spin_up(9, -1.0).is_err());
    }
}
