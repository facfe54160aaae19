//! Synthetic series: a linear combination of sinusoidal, exponential and
//! logarithmic components evaluated on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Coefficients of one synthetic series. Given a recipe, generation is
/// deterministic; randomness enters only through [`SeriesRecipe::sample`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecipe {
    pub sin_amp: f64,
    /// Cycles per sample.
    pub sin_freq: f64,
    pub sin_phase: f64,
    pub exp_amp: f64,
    /// Growth rate per sample.
    pub exp_rate: f64,
    pub log_amp: f64,
    /// Keeps the log argument strictly positive.
    pub log_offset: f64,
    /// Grid spacing: the series is evaluated at `t = i * step`.
    pub step: f64,
}

impl SeriesRecipe {
    /// Amplitudes in [0.5, 2], sinusoid periods of 5-25 samples, exponential
    /// rates in [-0.02, 0.02]: the three components stay comparable in
    /// magnitude over a 50-sample window.
    pub fn sample(rng: &mut RngState) -> Self {
        let sin_amp = rng.uniform(0.5, 2.0);
        let period = rng.uniform(5.0, 25.0);
        let sin_phase = rng.uniform(0.0, std::f64::consts::TAU);
        let exp_amp = rng.uniform(0.5, 2.0);
        let exp_rate = rng.uniform(-0.02, 0.02);
        let log_amp = rng.uniform(0.5, 2.0);
        let log_offset = rng.uniform(0.0, 1.0);
        SeriesRecipe {
            sin_amp,
            sin_freq: 1.0 / period,
            sin_phase,
            exp_amp,
            exp_rate,
            log_amp,
            log_offset,
            step: 1.0,
        }
    }

    /// Pure components, zero sinusoid/log: handy in tests.
    pub fn constant_exp(amp: f64, rate: f64) -> Self {
        SeriesRecipe {
            sin_amp: 0.0,
            sin_freq: 0.0,
            sin_phase: 0.0,
            exp_amp: amp,
            exp_rate: rate,
            log_amp: 0.0,
            log_offset: 0.0,
            step: 1.0,
        }
    }
}

/// Evaluates `s(t) = a_sin sin(2 pi f t + phi) + a_exp e^(r t) + a_log ln(t + 1 + d)`
/// at `t = i * step` for `i = 0..length`. A recipe producing non-finite
/// values (e.g. exponential overflow) is rejected with a range error.
pub fn generate_series(recipe: &SeriesRecipe, length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::invalid("series length must be >= 1"));
    }
    if recipe.log_offset < 0.0 {
        return Err(Error::Range("log offset must be nonnegative".into()));
    }
    let mut out = Vec::with_capacity(length);
    for i in 0..length {
        let t = i as f64 * recipe.step;
        let v = recipe.sin_amp
            * (std::f64::consts::TAU * recipe.sin_freq * t + recipe.sin_phase).sin()
            + recipe.exp_amp * (recipe.exp_rate * t).exp()
            + recipe.log_amp * (t + 1.0 + recipe.log_offset).ln();
        if !v.is_finite() {
            return Err(Error::Range(format!(
                "recipe produces non-finite value at sample {i}"
            )));
        }
        out.push(v);
    }
    Ok(out)
}
