//! Physical-space layered fields on a doubly periodic grid.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// A doubly periodic rectangular grid.
///
/// Wavenumbers are angular (rad/m) in standard FFT ordering, so index 0 holds
/// the zero mode and index `n/2` the (negative) Nyquist mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "grid sizes must be even and >= 8, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "domain extents must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed integer mode number for FFT index `i` of a length-`n` axis.
    #[inline]
    pub fn mode_index(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    #[inline]
    pub fn kx(&self, i: usize) -> f64 {
        2.0 * PI / self.lx * Self::mode_index(i, self.nx) as f64
    }

    #[inline]
    pub fn ky(&self, j: usize) -> f64 {
        2.0 * PI / self.ly * Self::mode_index(j, self.ny) as f64
    }

    /// Largest isotropically resolved wavenumber: the radius of the largest
    /// disk of modes contained in the grid (the axis Nyquist wavenumber).
    pub fn kmax(&self) -> f64 {
        (PI * self.nx as f64 / self.lx).min(PI * self.ny as f64 / self.ly)
    }

    /// Fundamental isotropic wavenumber spacing.
    pub fn dk(&self) -> f64 {
        (2.0 * PI / self.lx).min(2.0 * PI / self.ly)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn is_nyquist(&self, i: usize, j: usize) -> bool {
        i == self.nx / 2 || j == self.ny / 2
    }
}

/// Real layered field, layer-major: `values[l * ny * nx + j * nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredField {
    pub nx: usize,
    pub ny: usize,
    pub layers: usize,
    pub values: Vec<f64>,
    /// Model time in seconds.
    pub time: f64,
}

impl LayeredField {
    pub fn zeros(nx: usize, ny: usize, layers: usize) -> Self {
        LayeredField {
            nx,
            ny,
            layers,
            values: vec![0.0; nx * ny * layers],
            time: 0.0,
        }
    }

    pub fn from_values(nx: usize, ny: usize, layers: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny * layers {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values ({layers}x{ny}x{nx})", nx * ny * layers),
                got: values.len().to_string(),
            });
        }
        Ok(LayeredField {
            nx,
            ny,
            layers,
            values,
            time: 0.0,
        })
    }

    /// Evaluate `f(layer, x, y)` at grid points `x = i*dx`, `y = j*dy`.
    pub fn from_fn(grid: &Grid, layers: usize, f: impl Fn(usize, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid.nx, grid.ny, layers);
        let (dx, dy) = (grid.dx(), grid.dy());
        for l in 0..layers {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    out.values[(l * grid.ny + j) * grid.nx + i] =
                        f(l, i as f64 * dx, j as f64 * dy);
                }
            }
        }
        out
    }

    #[inline]
    pub fn layer_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        let n = self.layer_len();
        &self.values[l * n..(l + 1) * n]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.layer_len();
        &mut self.values[l * n..(l + 1) * n]
    }

    #[inline]
    pub fn at(&self, l: usize, j: usize, i: usize) -> f64 {
        self.values[(l * self.ny + j) * self.nx + i]
    }

    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(
            0.0f64,
            |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) },
        )
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn layer_mean(&self, l: usize) -> f64 {
        let s = self.layer(l);
        s.iter().sum::<f64>() / s.len() as f64
    }

    pub fn same_shape(&self, other: &LayeredField) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.layers == other.layers
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.nx != grid.nx || self.ny != grid.ny {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", grid.ny, grid.nx),
                got: format!("{}x{}", self.ny, self.nx),
            });
        }
        Ok(())
    }

    /// Root-mean-square pointwise difference.
    pub fn rms_diff(&self, other: &LayeredField) -> f64 {
        assert!(self.same_shape(other));
        let n = self.values.len() as f64;
        (self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    }
}

impl AsRef<[f64]> for LayeredField {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
