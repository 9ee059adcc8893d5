//! Pseudospectral machinery on a doubly periodic grid.
//!
//! Forward transforms are unnormalized; the inverse carries `1/(nx*ny)`.
//! Real fields are transformed two at a time by packing them into the real
//! and imaginary parts of a single complex FFT.

use crate::error::{Error, Result};
use crate::field::{Grid, LayeredField};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

/// Scale-selective low-pass filter applied once per time step.
///
/// Multiplier is 1 for `κ/kmax ≤ cutoff` and
/// `exp(-alpha * ((κ/kmax - cutoff) / (1 - cutoff))^4)` above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsdFilter {
    pub cutoff: f64,
    pub alpha: f64,
}

impl Default for SsdFilter {
    fn default() -> Self {
        SsdFilter {
            cutoff: 0.65,
            alpha: 23.6,
        }
    }
}

impl SsdFilter {
    pub fn multiplier(&self, kappa: f64, kmax: f64) -> f64 {
        let r = kappa / kmax;
        if r <= self.cutoff {
            1.0
        } else {
            let s = (r - self.cutoff) / (1.0 - self.cutoff);
            (-self.alpha * s.powi(4)).exp()
        }
    }
}

/// Fourier smoothing multiplier `exp(-36 (κ/kmax)^36)`.
#[inline]
pub fn smoothing_multiplier(kappa: f64, kmax: f64) -> f64 {
    (-36.0 * (kappa / kmax).powi(36)).exp()
}

/// Complex coefficients laid out like [`LayeredField`]: `(layer, ky, kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub layers: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, layers: usize) -> Self {
        SpectralField {
            grid,
            layers,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len() * layers],
        }
    }

    pub fn layer(&self, l: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.coeffs[l * n..(l + 1) * n]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.coeffs[l * n..(l + 1) * n]
    }

    pub fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid || self.layers != other.layers {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += o * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= a;
        }
    }

    /// Domain mean of `f·g` for one layer, via Parseval.
    pub fn mean_product(&self, other: &SpectralField, layer: usize) -> f64 {
        let n = self.grid.len() as f64;
        self.layer(layer)
            .iter()
            .zip(other.layer(layer))
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / (n * n)
    }

    /// Domain mean square of one layer, via Parseval.
    pub fn mean_square(&self, layer: usize) -> f64 {
        let n = self.grid.len() as f64;
        self.layer(layer).iter().map(|c| c.norm_sqr()).sum::<f64>() / (n * n)
    }
}

/// FFT plans plus precomputed wavenumber tables for one grid.
pub struct SpectralOps {
    grid: Grid,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    /// `kx` with the Nyquist entry zeroed, for odd derivatives.
    dkx: Vec<f64>,
    dky: Vec<f64>,
    kappa2: Vec<f64>,
    ssd: Vec<f64>,
    smooth: Vec<f64>,
    ssd_filter: SsdFilter,
}

impl std::fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps")
            .field("grid", &self.grid)
            .field("ssd", &self.ssd_filter)
            .finish()
    }
}

/// Blocked transpose of a `rows × cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

thread_local! {
    static WORK: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
    static PACK: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

fn grow(v: &mut Vec<Complex64>, n: usize) {
    if v.len() < n {
        v.resize(n, Complex64::new(0.0, 0.0));
    }
}

enum Dir {
    Forward,
    Inverse,
}

impl SpectralOps {
    pub fn new(grid: Grid) -> Self {
        Self::with_filter(grid, SsdFilter::default())
    }

    pub fn with_filter(grid: Grid, ssd_filter: SsdFilter) -> Self {
        let mut planner = FftPlanner::new();
        let (nx, ny) = (grid.nx, grid.ny);
        let kx: Vec<f64> = (0..nx).map(|i| grid.kx(i)).collect();
        let ky: Vec<f64> = (0..ny).map(|j| grid.ky(j)).collect();
        let mut dkx = kx.clone();
        dkx[nx / 2] = 0.0;
        let mut dky = ky.clone();
        dky[ny / 2] = 0.0;
        let kmax = grid.kmax();
        let mut kappa2 = vec![0.0; nx * ny];
        let mut ssd = vec![0.0; nx * ny];
        let mut smooth = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k2 = kx[i] * kx[i] + ky[j] * ky[j];
                let idx = j * nx + i;
                kappa2[idx] = k2;
                ssd[idx] = ssd_filter.multiplier(k2.sqrt(), kmax);
                smooth[idx] = smoothing_multiplier(k2.sqrt(), kmax);
            }
        }
        SpectralOps {
            grid,
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
            kx,
            ky,
            dkx,
            dky,
            kappa2,
            ssd,
            smooth,
            ssd_filter,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ssd_config(&self) -> SsdFilter {
        self.ssd_filter
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// `kx² + ky²` per mode, row-major `(ky, kx)`.
    pub fn kappa2(&self) -> &[f64] {
        &self.kappa2
    }

    pub fn ssd_multipliers(&self) -> &[f64] {
        &self.ssd
    }

    pub fn smoothing_multipliers(&self) -> &[f64] {
        &self.smooth
    }

    fn fft2(&self, data: &mut [Complex64], dir: Dir) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (row, col) = match dir {
            Dir::Forward => (&self.row_fwd, &self.col_fwd),
            Dir::Inverse => (&self.row_inv, &self.col_inv),
        };
        let need = row
            .get_inplace_scratch_len()
            .max(col.get_inplace_scratch_len());
        WORK.with(|w| {
            let mut w = w.borrow_mut();
            let (t, scratch) = &mut *w;
            grow(t, nx * ny);
            grow(scratch, need);
            // all rows in one batch, then columns as rows of the transpose
            row.process_with_scratch(data, &mut scratch[..need]);
            transpose(data, &mut t[..nx * ny], ny, nx);
            col.process_with_scratch(&mut t[..nx * ny], &mut scratch[..need]);
            transpose(&t[..nx * ny], data, nx, ny);
        });
    }

    /// Forward transform of two real layers at once.
    pub fn forward_pair(
        &self,
        a: &[f64],
        b: &[f64],
        out_a: &mut [Complex64],
        out_b: &mut [Complex64],
    ) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        PACK.with(|p| {
            let mut p = p.borrow_mut();
            grow(&mut p, nx * ny);
            let buf = &mut p[..nx * ny];
            for (c, (&x, &y)) in buf.iter_mut().zip(a.iter().zip(b)) {
                *c = Complex64::new(x, y);
            }
            self.fft2(buf, Dir::Forward);
            for j in 0..ny {
                let jm = if j == 0 { 0 } else { ny - j };
                let row = &buf[j * nx..(j + 1) * nx];
                let mrow = &buf[jm * nx..(jm + 1) * nx];
                let oa = &mut out_a[j * nx..(j + 1) * nx];
                let ob = &mut out_b[j * nx..(j + 1) * nx];
                for i in 0..nx {
                    let im = if i == 0 { 0 } else { nx - i };
                    let c = row[i];
                    let cm = mrow[im].conj();
                    oa[i] = (c + cm) * 0.5;
                    // (c - cm) / (2i)
                    let d = (c - cm) * 0.5;
                    ob[i] = Complex64::new(d.im, -d.re);
                }
            }
        });
    }

    /// Inverse transform of two Hermitian spectra into two real layers.
    pub fn inverse_pair(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        out_a: &mut [f64],
        out_b: &mut [f64],
    ) {
        let norm = 1.0 / self.grid.len() as f64;
        let n = self.grid.len();
        PACK.with(|p| {
            let mut p = p.borrow_mut();
            grow(&mut p, n);
            let buf = &mut p[..n];
            for (c, (&x, &y)) in buf.iter_mut().zip(a.iter().zip(b)) {
                *c = x + Complex64::new(-y.im, y.re);
            }
            self.fft2(buf, Dir::Inverse);
            for ((c, oa), ob) in buf.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
                *oa = c.re * norm;
                *ob = c.im * norm;
            }
        });
    }

    /// Forward transform of one real layer.
    pub fn forward_layer(&self, a: &[f64], out: &mut [Complex64]) {
        for (c, &x) in out.iter_mut().zip(a) {
            *c = Complex64::new(x, 0.0);
        }
        self.fft2(out, Dir::Forward);
    }

    /// Inverse transform of one layer, returning the real part and the
    /// largest absolute imaginary residue.
    pub fn inverse_layer(&self, a: &[Complex64], out: &mut [f64]) -> f64 {
        let norm = 1.0 / self.grid.len() as f64;
        let n = self.grid.len();
        PACK.with(|p| {
            let mut p = p.borrow_mut();
            grow(&mut p, n);
            let buf = &mut p[..n];
            buf.copy_from_slice(a);
            self.fft2(buf, Dir::Inverse);
            let mut max_im = 0.0f64;
            for (o, c) in out.iter_mut().zip(buf.iter()) {
                *o = c.re * norm;
                max_im = max_im.max((c.im * norm).abs());
            }
            max_im
        })
    }

    pub fn forward(&self, field: &LayeredField) -> Result<SpectralField> {
        field.check_grid(&self.grid)?;
        let mut out = SpectralField::zeros(self.grid, field.layers);
        let n = self.grid.len();
        let mut l = 0;
        while l < field.layers {
            if l + 1 < field.layers {
                let (lo, hi) = out.coeffs[l * n..(l + 2) * n].split_at_mut(n);
                self.forward_pair(field.layer(l), field.layer(l + 1), lo, hi);
                l += 2;
            } else {
                self.forward_layer(field.layer(l), out.layer_mut(l));
                l += 1;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, spec: &SpectralField) -> LayeredField {
        let mut out = LayeredField::zeros(self.grid.nx, self.grid.ny, spec.layers);
        self.inverse_into(spec, &mut out);
        out
    }

    pub fn inverse_into(&self, spec: &SpectralField, out: &mut LayeredField) {
        let n = self.grid.len();
        let mut l = 0;
        while l < spec.layers {
            if l + 1 < spec.layers {
                let (lo, hi) = out.values[l * n..(l + 2) * n].split_at_mut(n);
                self.inverse_pair(spec.layer(l), spec.layer(l + 1), lo, hi);
                l += 2;
            } else {
                self.inverse_layer(spec.layer(l), out.layer_mut(l));
                l += 1;
            }
        }
    }

    fn check(&self, f: &SpectralField) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Multiply every layer by a per-mode real multiplier.
    pub fn apply_multiplier(&self, f: &mut SpectralField, mult: &[f64]) {
        let n = self.grid.len();
        for l in 0..f.layers {
            for (c, m) in f.coeffs[l * n..(l + 1) * n].iter_mut().zip(mult) {
                *c *= *m;
            }
        }
    }

    pub fn laplacian(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        let neg: Vec<f64> = self.kappa2.iter().map(|k| -k).collect();
        self.apply_multiplier(&mut out, &neg);
        out
    }

    /// Spectral x-derivative of one layer (Nyquist column zeroed).
    pub fn ddx_layer(&self, a: &[Complex64], out: &mut [Complex64]) {
        let nx = self.grid.nx;
        for (orow, arow) in out.chunks_exact_mut(nx).zip(a.chunks_exact(nx)) {
            for ((o, c), &k) in orow.iter_mut().zip(arow).zip(&self.dkx) {
                *o = Complex64::new(-k * c.im, k * c.re);
            }
        }
    }

    /// Spectral y-derivative of one layer (Nyquist row zeroed).
    pub fn ddy_layer(&self, a: &[Complex64], out: &mut [Complex64]) {
        let nx = self.grid.nx;
        for ((orow, arow), &k) in out
            .chunks_exact_mut(nx)
            .zip(a.chunks_exact(nx))
            .zip(&self.dky)
        {
            for (o, c) in orow.iter_mut().zip(arow) {
                *o = Complex64::new(-k * c.im, k * c.re);
            }
        }
    }

    pub fn ddx(&self, f: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(self.grid, f.layers);
        for l in 0..f.layers {
            self.ddx_layer(f.layer(l), out.layer_mut(l));
        }
        out
    }

    pub fn ddy(&self, f: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(self.grid, f.layers);
        for l in 0..f.layers {
            self.ddy_layer(f.layer(l), out.layer_mut(l));
        }
        out
    }

    /// Pseudospectral Jacobian `J(ψ, q) = ψ_x q_y − ψ_y q_x`, layer by layer.
    ///
    /// Both inputs and the result pass through the Fourier smoothing filter.
    pub fn jacobian(&self, psi: &SpectralField, q: &SpectralField) -> Result<SpectralField> {
        self.check(psi)?;
        self.check(q)?;
        psi.check_same(q)?;
        let n = self.grid.len();
        let mut prods: Vec<Vec<f64>> = Vec::with_capacity(psi.layers);
        let mut sa = vec![Complex64::new(0.0, 0.0); n];
        let mut sb = vec![Complex64::new(0.0, 0.0); n];
        let mut sm = vec![Complex64::new(0.0, 0.0); n];
        let (mut px, mut py, mut qx, mut qy) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for l in 0..psi.layers {
            for (s, (c, m)) in sm.iter_mut().zip(psi.layer(l).iter().zip(&self.smooth)) {
                *s = c * m;
            }
            self.ddx_layer(&sm, &mut sa);
            self.ddy_layer(&sm, &mut sb);
            self.inverse_pair(&sa, &sb, &mut px, &mut py);
            for (s, (c, m)) in sm.iter_mut().zip(q.layer(l).iter().zip(&self.smooth)) {
                *s = c * m;
            }
            self.ddx_layer(&sm, &mut sa);
            self.ddy_layer(&sm, &mut sb);
            self.inverse_pair(&sa, &sb, &mut qx, &mut qy);
            prods.push((0..n).map(|k| px[k] * qy[k] - py[k] * qx[k]).collect());
        }
        let mut out = SpectralField::zeros(self.grid, psi.layers);
        let mut l = 0;
        while l < psi.layers {
            if l + 1 < psi.layers {
                let (lo, hi) = out.coeffs[l * n..(l + 2) * n].split_at_mut(n);
                self.forward_pair(&prods[l], &prods[l + 1], lo, hi);
                l += 2;
            } else {
                self.forward_layer(&prods[l], out.layer_mut(l));
                l += 1;
            }
        }
        self.apply_multiplier(&mut out, &self.smooth);
        Ok(out)
    }

    /// One application of the scale-selective dissipation filter.
    pub fn ssd_filter(&self, f: &mut SpectralField) {
        self.apply_multiplier(f, &self.ssd);
    }

    pub fn dealias_filter(&self, f: &mut SpectralField) {
        self.apply_multiplier(f, &self.smooth);
    }
}
