//! Coarse-graining: spectral truncation followed by one application of the
//! coarse model's scale-selective filter.

use crate::error::{Error, Result};
use crate::field::{Grid, LayeredField};
use crate::spectral::{SpectralField, SpectralOps, SsdFilter};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarsenSpec {
    pub fine: Grid,
    pub coarse: Grid,
    pub filter: SsdFilter,
}

impl CoarsenSpec {
    pub fn new(fine: Grid, coarse: Grid, filter: SsdFilter) -> Result<Self> {
        if fine.lx != coarse.lx || fine.ly != coarse.ly {
            return Err(Error::InvalidGrid("fine and coarse domains differ".into()));
        }
        if fine.nx % coarse.nx != 0 || fine.ny % coarse.ny != 0 {
            return Err(Error::InvalidGrid(format!(
                "coarse {}x{} does not divide fine {}x{}",
                coarse.ny, coarse.nx, fine.ny, fine.nx
            )));
        }
        if coarse.nx >= fine.nx || coarse.ny >= fine.ny {
            return Err(Error::InvalidGrid(
                "coarse Nyquist must lie strictly below fine Nyquist".into(),
            ));
        }
        Ok(CoarsenSpec {
            fine,
            coarse,
            filter,
        })
    }
}

/// Precomputed transforms for repeated coarsening.
#[derive(Debug)]
pub struct Coarsener {
    spec: CoarsenSpec,
    fine_ops: SpectralOps,
    coarse_ops: SpectralOps,
}

impl Coarsener {
    pub fn new(spec: CoarsenSpec) -> Self {
        Coarsener {
            fine_ops: SpectralOps::new(spec.fine),
            coarse_ops: SpectralOps::with_filter(spec.coarse, spec.filter),
            spec,
        }
    }

    pub fn spec(&self) -> &CoarsenSpec {
        &self.spec
    }

    /// Truncate to the modes representable on the coarse grid. The coarse
    /// Nyquist row and column are dropped.
    fn truncate(&self, fine: &SpectralField) -> SpectralField {
        let (f, c) = (self.spec.fine, self.spec.coarse);
        let mut out = SpectralField::zeros(c, fine.layers);
        let scale = c.len() as f64 / f.len() as f64;
        for l in 0..fine.layers {
            let src = fine.layer(l);
            let dst = out.layer_mut(l);
            for jc in 0..c.ny {
                let mj = Grid::mode_index(jc, c.ny);
                if jc == c.ny / 2 {
                    continue;
                }
                let jf = mj.rem_euclid(f.ny as i64) as usize;
                for ic in 0..c.nx {
                    if ic == c.nx / 2 {
                        continue;
                    }
                    let mi = Grid::mode_index(ic, c.nx);
                    let if_ = mi.rem_euclid(f.nx as i64) as usize;
                    dst[jc * c.nx + ic] = src[jf * f.nx + if_] * scale;
                }
            }
        }
        out
    }

    pub fn coarsen(&self, fine: &LayeredField) -> Result<LayeredField> {
        let s = self.fine_ops.forward(fine)?;
        let mut c = self.truncate(&s);
        self.coarse_ops.ssd_filter(&mut c);
        let mut out = self.coarse_ops.inverse(&c);
        out.time = fine.time;
        Ok(out)
    }

    /// Zero-pad a coarse field onto the fine grid (spectral interpolation).
    pub fn lift(&self, coarse: &LayeredField) -> Result<LayeredField> {
        let (f, c) = (self.spec.fine, self.spec.coarse);
        let s = self.coarse_ops.forward(coarse)?;
        let mut out = SpectralField::zeros(f, coarse.layers);
        let scale = f.len() as f64 / c.len() as f64;
        for l in 0..coarse.layers {
            let src = s.layer(l);
            let dst = out.layer_mut(l);
            for jc in 0..c.ny {
                if jc == c.ny / 2 {
                    continue;
                }
                let jf = Grid::mode_index(jc, c.ny).rem_euclid(f.ny as i64) as usize;
                for ic in 0..c.nx {
                    if ic == c.nx / 2 {
                        continue;
                    }
                    let if_ = Grid::mode_index(ic, c.nx).rem_euclid(f.nx as i64) as usize;
                    dst[jf * f.nx + if_] = src[jc * c.nx + ic] * scale;
                }
            }
        }
        let mut phys = self.fine_ops.inverse(&out);
        phys.time = coarse.time;
        Ok(phys)
    }
}

/// Number of fine steps per coarse step; errors unless it is a positive integer.
pub fn stride_for(fine_dt: f64, coarse_dt: f64) -> Result<usize> {
    let r = coarse_dt / fine_dt;
    let n = r.round();
    if !(n >= 1.0) || (r - n).abs() > 1e-9 * r {
        return Err(Error::InvalidArgument(format!(
            "coarse dt {coarse_dt} s is not an integer multiple of fine dt {fine_dt} s"
        )));
    }
    Ok(n as usize)
}

/// Coarsen every `stride`-th state of a fine trajectory.
///
/// `source` yields the fine state after each fine step; the k-th output is
/// the coarsened state after `k * stride` fine steps.
pub fn make_training_series<I>(
    source: I,
    coarsener: &Coarsener,
    stride: usize,
) -> Result<Vec<LayeredField>>
where
    I: IntoIterator<Item = Result<LayeredField>>,
{
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let mut out = Vec::new();
    for (n, state) in source.into_iter().enumerate() {
        let state = state?;
        if (n + 1) % stride == 0 {
            out.push(coarsener.coarsen(&state)?);
        }
    }
    Ok(out)
}
