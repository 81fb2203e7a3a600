//! Fluctuation autocorrelation through the power spectrum, integrated
//! correlation times and tail moving averages on uniform time series.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest relative deviation from the mean still treated as a constant signal.
pub const ZERO_VARIANCE_TOLERANCE: f64 = 1e-12;

/// Uniformly sampled real signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::invalid(format!("time step must be positive and finite, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::invalid("time series needs at least 2 samples"));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.t0 + k as f64 * self.dt)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    /// `C(k dt) = Σ_t δn(t) δn(t + k dt)` for `k = 0..n`.
    pub c: Vec<f64>,
    /// Power spectrum `|DFT(δn padded)|^2` on `n_fft` frequencies.
    pub s: Vec<f64>,
    pub dt: f64,
    /// Integrated correlation time over the full delay window.
    pub tau_c: f64,
    /// Delay window `(n - 1) dt` that `tau_c` was integrated over.
    pub window: f64,
    /// Set when the signal is constant; `c` is then identically zero and `tau_c = 0`.
    pub zero_variance: bool,
}

impl CorrelationResult {
    pub fn n_fft(&self) -> usize {
        self.s.len()
    }

    /// Angular frequencies matching `s`, in FFT order.
    pub fn omegas(&self) -> Vec<f64> {
        let n = self.s.len();
        let base = 2.0 * std::f64::consts::PI / (n as f64 * self.dt);
        (0..n).map(|k| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * base).collect()
    }

    pub fn write_correlation_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "tau,C,C_normalized")?;
        let c0 = self.c[0];
        for (k, c) in self.c.iter().enumerate() {
            let norm = if c0 > 0.0 { c / c0 } else { 0.0 };
            writeln!(out, "{:.16e},{:.16e},{:.16e}", k as f64 * self.dt, c, norm)?;
        }
        Ok(())
    }

    pub fn write_spectrum_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "omega,S")?;
        for (w, s) in self.omegas().iter().zip(&self.s) {
            writeln!(out, "{w:.16e},{s:.16e}")?;
        }
        Ok(())
    }
}

/// Linear autocorrelation of the mean-subtracted series via zero-padded FFTs.
pub fn autocorrelate(series: &TimeSeries) -> Result<CorrelationResult> {
    let n = series.len();
    if n < 4 {
        return Err(Error::invalid(format!("autocorrelation needs at least 4 samples, got {n}")));
    }
    if series.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("time series contains non-finite values"));
    }
    let mean = series.mean();
    let n_fft = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = series
        .values
        .iter()
        .map(|v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n_fft)
        .collect();

    // Round-off level fluctuations count as a constant signal.
    let scale = 1.0 + mean.abs();
    let zero_variance = buf.iter().all(|z| z.re.abs() <= ZERO_VARIANCE_TOLERANCE * scale);
    if zero_variance {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n_fft).process(&mut buf);
    let s: Vec<f64> = buf.iter().map(|z| z.norm_sqr()).collect();
    if zero_variance {
        return Ok(CorrelationResult {
            c: vec![0.0; n],
            s,
            dt: series.dt,
            tau_c: 0.0,
            window: (n - 1) as f64 * series.dt,
            zero_variance,
        });
    }
    let mut spec: Vec<Complex64> = s.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    planner.plan_fft_inverse(n_fft).process(&mut spec);
    let c: Vec<f64> = spec[..n].iter().map(|z| z.re / n_fft as f64).collect();
    let mut result = CorrelationResult {
        c,
        s,
        dt: series.dt,
        tau_c: 0.0,
        window: 0.0,
        zero_variance,
    };
    let (tau_c, window) = correlation_time(&result)?;
    result.tau_c = tau_c;
    result.window = window;
    Ok(result)
}

/// Trapezoidal `∫ |C(tau)/C(0)| dtau` over the available delays, with the
/// window length. A zero-variance result gives `(0, window)`.
pub fn correlation_time(corr: &CorrelationResult) -> Result<(f64, f64)> {
    let n = corr.c.len();
    if n < 2 {
        return Err(Error::invalid("correlation needs at least two delays"));
    }
    let window = (n - 1) as f64 * corr.dt;
    let c0 = corr.c[0];
    if corr.zero_variance || c0 == 0.0 {
        return Ok((0.0, window));
    }
    if !(c0 > 0.0) {
        return Err(Error::invalid(format!("C(0) must be positive, got {c0}")));
    }
    let r: Vec<f64> = corr.c.iter().map(|c| (c / c0).abs()).collect();
    let inner: f64 = r[1..n - 1].iter().sum();
    Ok((corr.dt * (0.5 * (r[0] + r[n - 1]) + inner), window))
}

/// Mean of the `window`-point moving average over the trailing
/// `tail_fraction` of the samples.
pub fn moving_average_tail(series: &TimeSeries, tail_fraction: f64, window: usize) -> Result<f64> {
    moving_average_tail_of(series.values(), tail_fraction, window)
}

pub(crate) fn moving_average_tail_of(values: &[f64], tail_fraction: f64, window: usize) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::invalid(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let tail_len = ((values.len() as f64 * tail_fraction).round() as usize).clamp(1, values.len());
    let tail = &values[values.len() - tail_len..];
    if window == 0 || window > tail.len() {
        return Err(Error::invalid(format!(
            "moving-average window {window} must be between 1 and the tail length {}",
            tail.len()
        )));
    }
    let mut sum: f64 = tail[..window].iter().sum();
    let mut total = sum / window as f64;
    for k in window..tail.len() {
        sum += tail[k] - tail[k - window];
        total += sum / window as f64;
    }
    Ok(total / (tail.len() - window + 1) as f64)
}
