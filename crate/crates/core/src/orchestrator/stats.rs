//! Mean, standard deviation and dominant frequency of force and actuation signals.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

/// Fewest samples accepted by [`signal_statistics`].
pub const MIN_SAMPLES: usize = 16;
/// Fewest periods of the detected frequency that the series must span.
pub const MIN_PERIODS: f64 = 8.0;
/// Zero-padding factor of the spectrum (finer bins for peak picking).
const PAD: usize = 8;
/// A secondary peak must carry at least this fraction of the main peak power.
const SECONDARY_RATIO: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series of {0} samples is too short (need at least {MIN_SAMPLES})")]
    TooFewSamples(usize),
    #[error("series spans {periods:.2} periods of its dominant frequency (need at least {MIN_PERIODS})")]
    TooFewPeriods { periods: f64 },
    #[error("sampling interval must be positive")]
    BadInterval,
}

/// One-sided power spectrum of the Hann-windowed, mean-removed signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Frequencies in units of `U_inf / D` (Strouhal numbers).
    pub st: Vec<f64>,
    pub power: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalStats {
    pub mean: f64,
    /// Population standard deviation.
    pub sigma: f64,
    /// Dominant frequency, `None` when the spectrum has no peak.
    pub st: Option<f64>,
    /// Next strongest separate peak (e.g. a harmonic), if any.
    pub secondary_st: Option<f64>,
}

impl SignalStats {
    pub fn no_peak(&self) -> bool {
        self.st.is_none()
    }
}

pub fn mean_sigma(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn spectrum(x: &[f64], dt: f64) -> Spectrum {
    let n = x.len();
    let (mean, _) = mean_sigma(x);
    let m = (n * PAD).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (k, v) in x.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1).max(1) as f64).cos();
        buf[k] = Complex64::new((v - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let half = m / 2 + 1;
    Spectrum {
        st: (0..half).map(|k| k as f64 / (m as f64 * dt)).collect(),
        power: buf[..half].iter().map(|c| c.norm_sqr()).collect(),
    }
}

/// Vertex of the parabola through three log-power values; returns the bin offset.
fn quadratic_offset(a: f64, b: f64, c: f64) -> f64 {
    let (la, lb, lc) = (a.max(1e-300).ln(), b.max(1e-300).ln(), c.max(1e-300).ln());
    let den = la - 2.0 * lb + lc;
    if den.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (la - lc) / den).clamp(-0.5, 0.5)
    }
}

/// Mean, population standard deviation and spectral peak of a uniformly
/// sampled series.
pub fn signal_statistics(x: &[f64], dt: f64) -> Result<SignalStats, StatsError> {
    if !(dt > 0.0) {
        return Err(StatsError::BadInterval);
    }
    if x.len() < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples(x.len()));
    }
    let (mean, sigma) = mean_sigma(x);
    let scale = mean.abs().max(1.0);
    if sigma <= 1e-12 * scale {
        return Ok(SignalStats {
            mean,
            sigma,
            st: None,
            secondary_st: None,
        });
    }
    let spec = spectrum(x, dt);
    let p = &spec.power;
    let m = (p.len() - 1) * 2;
    let df = 1.0 / (m as f64 * dt);
    // Local maxima over the width of the Hann main lobe.
    let lobe = 2 * m / x.len();
    let mut peaks: Vec<usize> = (1..p.len() - 1)
        .filter(|&k| {
            let lo = k.saturating_sub(lobe).max(1);
            let hi = (k + lobe).min(p.len() - 1);
            (lo..=hi).all(|j| p[j] <= p[k])
        })
        .collect();
    peaks.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let Some(&main) = peaks.first() else {
        return Ok(SignalStats {
            mean,
            sigma,
            st: None,
            secondary_st: None,
        });
    };
    let refine = |k: usize| (k as f64 + quadratic_offset(p[k - 1], p[k], p[k + 1])) * df;
    let st = refine(main);
    let periods = x.len() as f64 * dt * st;
    // Windows cut at zero crossings span whole periods up to sampling error.
    if periods < MIN_PERIODS * (1.0 - 1e-3) {
        return Err(StatsError::TooFewPeriods { periods });
    }
    let secondary_st = peaks
        .iter()
        .skip(1)
        .find(|&&k| p[k] >= SECONDARY_RATIO * p[main])
        .map(|&k| refine(k));
    Ok(SignalStats {
        mean,
        sigma,
        st: Some(st),
        secondary_st,
    })
}
