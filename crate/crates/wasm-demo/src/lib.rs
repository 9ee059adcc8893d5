//! Browser bindings. Each exported function has a plain Rust twin in
//! [`demo`] so the logic runs and is tested natively.

use wasm_bindgen::prelude::*;

pub mod demo;

fn js_err(e: closure_lab::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Coarse two-layer jet started from amplified seeded noise.
#[wasm_bindgen]
pub struct QgViewer {
    inner: demo::Viewer,
}

#[wasm_bindgen]
impl QgViewer {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, seed: u64, amplitude: f64) -> Result<QgViewer, JsValue> {
        demo::Viewer::new(n, seed, amplitude)
            .map(|inner| QgViewer { inner })
            .map_err(js_err)
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), JsValue> {
        self.inner.advance(steps).map_err(js_err)
    }

    /// Upper-layer PV, row-major `n × n`.
    pub fn upper_pv(&self) -> Vec<f64> {
        self.inner.layer(0)
    }

    pub fn lower_pv(&self) -> Vec<f64> {
        self.inner.layer(1)
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn days(&self) -> f64 {
        self.inner.days()
    }

    pub fn energy(&self) -> f64 {
        self.inner.energy()
    }
}

/// Expected energy score of `N(mu, sigma²)` forecasts of `y ∼ N(0, 1)` on an
/// `n × n` grid, row-major with `sigma` along rows.
#[wasm_bindgen]
pub fn score_landscape(n: usize, mc: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    demo::score_landscape(n, mc, seed).map_err(js_err)
}

/// Window objectives of `x ← a x + θ₂ ξ` against a Gaussian AR(1) with
/// coefficient `a`, over `n` values of `θ₂` in `[0, 2]`: squared error then
/// CRPS, concatenated.
#[wasm_bindgen]
pub fn collapse_curves(a: f64, window: usize, n: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    demo::collapse_curves(a, window, n, seed).map_err(js_err)
}

/// Axis values shared by the landscape and collapse plots.
#[wasm_bindgen]
pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    demo::axis(lo, hi, n)
}
