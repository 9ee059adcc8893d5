pub mod calibrate;
pub mod closure;
pub mod coarsegrain;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod qg;
pub mod rng;
pub mod scoring;
pub mod spectral;
pub mod theorylab;

pub use error::{Error, Result};
pub use field::{Grid, LayeredField};
pub use spectral::{SpectralField, SpectralOps, SsdFilter};
