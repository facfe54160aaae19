//! Colored noise via frequency-domain shaping of white Gaussian noise.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Synthesizes `length` samples of zero-mean noise whose power spectral
/// density falls off as `1/f^alpha`, RMS-scaled to `amplitude`. `alpha = 0`
/// is white noise, `alpha = 1` pink.
pub fn colored_noise(
    length: usize,
    alpha: f64,
    amplitude: f64,
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(Error::invalid("colored_noise needs length >= 2"));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid(format!(
            "spectral exponent must be >= 0, got {alpha}"
        )));
    }
    if amplitude == 0.0 {
        return Ok(vec![0.0; length]);
    }

    let n = length;
    let mut spectrum = vec![Complex::new(0.0, 0.0); n];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=n / 2 {
        // amplitude ~ f^(-alpha/2) gives power ~ f^(-alpha)
        let scale = (k as f64).powf(-alpha / 2.0);
        if 2 * k == n {
            // Nyquist bin of an even-length transform must stay real
            spectrum[k] = Complex::new(rng.normal() * scale, 0.0);
        } else {
            let z = Complex::new(
                rng.normal() * scale * inv_sqrt2,
                rng.normal() * scale * inv_sqrt2,
            );
            spectrum[k] = z;
            spectrum[n - k] = z.conj();
        }
    }

    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut spectrum);

    let mut out: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    for v in &mut out {
        *v -= mean;
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        let gain = amplitude / rms;
        for v in &mut out {
            *v *= gain;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_all_zeros() {
        let mut rng = RngState::from_seed(1);
        let noise = colored_noise(128, 1.0, 0.0, &mut rng).unwrap();
        assert!(noise.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_alpha_rejected() {
        let mut rng = RngState::from_seed(1);
        assert!(colored_noise(128, -0.5, 1.0, &mut rng).is_err());
        assert!(colored_noise(1, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn rms_matches_requested_amplitude() {
        let mut rng = RngState::from_seed(2);
        let noise = colored_noise(4096, 1.0, 0.25, &mut rng).unwrap();
        let rms = (noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64).sqrt();
        assert!((rms - 0.25).abs() < 1e-12);
        let mean = noise.iter().sum::<f64>() / noise.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn white_noise_has_vanishing_lag_one_autocorrelation() {
        let mut rng = RngState::from_seed(3);
        let n = 1 << 14;
        let noise = colored_noise(n, 0.0, 1.0, &mut rng).unwrap();
        let var = noise.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let lag1 = noise
            .windows(2)
            .map(|w| w[0] * w[1])
            .sum::<f64>()
            / ((n - 1) as f64 * var);
        assert!(lag1.abs() < 0.05, "lag-1 autocorrelation {lag1}");
    }

    #[test]
    fn pink_noise_psd_slope_near_minus_one() {
        // periodogram regression over the mid-band
        let mut rng = RngState::from_seed(4);
        let n = 1 << 14;
        let noise = colored_noise(n, 1.0, 1.0, &mut rng).unwrap();

        let mut buf: Vec<Complex<f64>> = noise.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in (n / 64)..(n / 8) {
            let power = buf[k].norm_sqr();
            if power > 0.0 {
                xs.push((k as f64).ln());
                ys.push(power.ln());
            }
        }
        let m = xs.len() as f64;
        let mean_x = xs.iter().sum::<f64>() / m;
        let mean_y = ys.iter().sum::<f64>() / m;
        let slope: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mean_x) * (y - mean_y))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum::<f64>();
        assert!(
            (-1.3..=-0.7).contains(&slope),
            "fitted log-log PSD slope {slope}"
        );
    }
}
