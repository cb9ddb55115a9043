//! Welch power spectral densities and the damped-oscillator Lorentzian fit.
//!
//! PSDs are one-sided, in signal²/Hz, normalised so that `Σ S_k·Δf` equals the
//! window-weighted mean square of the trace. Fitted damping rates are reduced
//! frequencies γ = Γ/2π in Hz; [`PsdFit::gamma_angular`] gives Γ.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::domain::AxisLabel;
use crate::error::{ensure, Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions, Residuals};
use crate::simulate::TimeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn name(&self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }

    /// Periodic window of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "rectangular" | "boxcar" => Ok(Window::Rectangular),
            other => Err(Error::InvalidConfig(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchOptions {
    pub segment_length: usize,
    pub overlap: f64,
    #[serde(default)]
    pub window: Window,
}

impl Default for WelchOptions {
    fn default() -> Self {
        Self {
            segment_length: 8192,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub segment_count: usize,
    pub window_name: String,
    pub dt: f64,
    /// Set when fewer than two segments were averaged.
    #[serde(default)]
    pub few_segments: bool,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            0.0
        }
    }

    /// Rectangle-rule integral over all bins, the estimate of the mean square.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution()
    }

    /// Integral over bins with `lo ≤ f ≤ hi`.
    pub fn band_integral(&self, lo: f64, hi: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, v)| v)
            .sum::<f64>()
            * self.resolution()
    }

    pub fn scaled(&self, factor: f64) -> Psd {
        Psd {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.frequencies.len() == self.values.len() && self.frequencies.len() >= 2, || {
            Error::Format("PSD needs matching frequency and value columns with ≥ 2 rows".into())
        })?;
        ensure(self.frequencies.windows(2).all(|w| w[1] > w[0]), || {
            Error::Format("PSD frequencies must be strictly increasing".into())
        })?;
        ensure(self.values.iter().all(|v| v.is_finite() && *v >= 0.0), || {
            Error::Format("PSD values must be finite and non-negative".into())
        })
    }
}

/// Averaged modified periodogram of one channel of `trace`.
pub fn welch_psd(trace: &TimeTrace, axis: AxisLabel, options: &WelchOptions) -> Result<Psd> {
    welch_psd_samples(trace.channel(axis)?, trace.dt(), options)
}

pub fn welch_psd_samples(samples: &[f64], dt: f64, options: &WelchOptions) -> Result<Psd> {
    let n = options.segment_length;
    ensure(dt > 0.0, || Error::InvalidConfig("dt must be positive".into()))?;
    ensure(n >= 2 && n <= samples.len(), || {
        Error::InvalidConfig(format!(
            "segment length {n} must lie in [2, {}] (trace length)",
            samples.len()
        ))
    })?;
    ensure((0.0..1.0).contains(&options.overlap), || {
        Error::InvalidConfig(format!("overlap must lie in [0, 1), got {}", options.overlap))
    })?;
    ensure(samples.iter().all(|v| v.is_finite()), || {
        Error::Format("trace contains non-finite samples".into())
    })?;

    let hop = (((1.0 - options.overlap) * n as f64).round() as usize).max(1);
    let segment_count = (samples.len() - n) / hop + 1;
    let window = options.window.coefficients(n);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2 + 1;
    let mut acc = vec![0.0; half];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for s in 0..segment_count {
        let seg = &samples[s * hop..s * hop + n];
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, c) in acc.iter_mut().zip(&buf[..half]) {
            *a += c.norm_sqr();
        }
    }
    let norm = dt / (window_power * segment_count as f64);
    let values = acc
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            v * norm * one_sided
        })
        .collect();
    let df = 1.0 / (n as f64 * dt);
    Ok(Psd {
        frequencies: (0..half).map(|k| k as f64 * df).collect(),
        values,
        segment_count,
        window_name: options.window.name().to_string(),
        dt,
        few_segments: segment_count < 2,
    })
}

/// One-sided oscillator PSD `(A/π)·2f_q²γ / ((f²−f_q²)² + f²γ²)`, unit area A.
pub fn psd_model(f: f64, a: f64, f_q: f64, gamma: f64) -> f64 {
    let d = f * f - f_q * f_q;
    a / PI * 2.0 * f_q * f_q * gamma / (d * d + f * f * gamma * gamma)
}

/// Model value and its partial derivatives with respect to (A, f_q, γ).
fn psd_model_with_gradient(f: f64, a: f64, f_q: f64, gamma: f64) -> (f64, [f64; 3]) {
    let d = f * f - f_q * f_q;
    let den = d * d + f * f * gamma * gamma;
    let num = 2.0 * a * f_q * f_q * gamma / PI;
    let s = num / den;
    let ds_dfq = 4.0 * a * f_q * gamma / PI / den + s * 4.0 * f_q * d / den;
    let ds_dgamma = 2.0 * a * f_q * f_q / PI / den - s * 2.0 * f * f * gamma / den;
    (s, [s / a, ds_dfq, ds_dgamma])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFloor {
    #[default]
    None,
    FittedConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdWeighting {
    /// Residuals divided by the model, matching χ²-distributed periodogram scatter.
    #[default]
    Relative,
    Uniform,
    /// Residuals of log S, a cross-check mode.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdFitOptions {
    /// Fit band in Hz. `None` picks [Δf, min(f_Nyquist, 3·f_peak)].
    #[serde(default)]
    pub band: Option<(f64, f64)>,
    #[serde(default)]
    pub noise_floor: NoiseFloor,
    #[serde(default)]
    pub weighting: PsdWeighting,
    /// Mismatch flag threshold on the RMS relative residual, in units of 1/√segments.
    #[serde(default = "default_mismatch_factor")]
    pub mismatch_factor: f64,
}

fn default_mismatch_factor() -> f64 {
    3.0
}

impl Default for PsdFitOptions {
    fn default() -> Self {
        Self {
            band: None,
            noise_floor: NoiseFloor::None,
            weighting: PsdWeighting::Relative,
            mismatch_factor: default_mismatch_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdFit {
    /// Integrated power A in signal².
    pub a: f64,
    pub f_q: f64,
    /// Reduced damping γ = Γ/2π in Hz.
    pub gamma: f64,
    pub a_sigma: f64,
    pub f_q_sigma: f64,
    pub gamma_sigma: f64,
    #[serde(default)]
    pub noise_floor: Option<f64>,
    /// RMS relative residual (data − model)/model over the band.
    pub fit_residual: f64,
    pub converged: bool,
    /// γ > f_q: the Lorentzian peak is not resolved.
    pub overdamped: bool,
    /// Residuals too large for a single-oscillator spectrum.
    pub model_mismatch: bool,
    pub iterations: usize,
    pub message: String,
}

impl PsdFit {
    pub fn gamma_angular(&self) -> f64 {
        2.0 * PI * self.gamma
    }

    pub fn a_tilde(&self) -> f64 {
        self.a / (self.f_q * self.f_q)
    }

    /// Converged with no quality flag raised.
    pub fn is_usable(&self) -> bool {
        self.converged && !self.overdamped && !self.model_mismatch
    }
}

struct PsdProblem<'a> {
    f: &'a [f64],
    s: &'a [f64],
    log: bool,
    with_floor: bool,
    /// Per-point residual divisor, held fixed during one least-squares solve.
    scale: Vec<f64>,
}

impl PsdProblem<'_> {
    fn model(&self, p: &[f64], i: usize) -> (f64, [f64; 4]) {
        let (m, g) = psd_model_with_gradient(self.f[i], p[0], p[1], p[2]);
        if self.with_floor {
            (m + p[3], [g[0], g[1], g[2], 1.0])
        } else {
            (m, [g[0], g[1], g[2], 0.0])
        }
    }

    fn model_values(&self, p: &[f64]) -> Vec<f64> {
        (0..self.f.len()).map(|i| self.model(p, i).0).collect()
    }
}

impl Residuals for PsdProblem<'_> {
    fn len(&self) -> usize {
        self.f.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, r) in out.iter_mut().enumerate() {
            let (m, _) = self.model(p, i);
            *r = if self.log {
                self.s[i].ln() - m.ln()
            } else {
                (self.s[i] - m) / self.scale[i]
            };
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for i in 0..self.f.len() {
            let (m, g) = self.model(p, i);
            let factor = if self.log { -1.0 / m } else { -1.0 / self.scale[i] };
            for j in 0..p.len() {
                out[(i, j)] = factor * g[j];
            }
        }
    }

    fn feasible(&self, p: &[f64]) -> bool {
        p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0 && (!self.with_floor || p[3] >= 0.0)
    }
}

/// Outer reweighting passes for relative weighting.
const MAX_REWEIGHTS: usize = 30;

/// Fits the oscillator Lorentzian (optionally plus a constant floor) to `psd`.
///
/// Fails only on unusable input. A fit that does not converge is returned with
/// `converged = false` and the last iterate.
pub fn fit_psd(psd: &Psd, options: &PsdFitOptions) -> Result<PsdFit> {
    psd.validate()?;
    let df = psd.resolution();
    let nyquist = *psd.frequencies.last().unwrap_or(&0.0);
    let peak_index = |lo: f64, hi: f64| {
        psd.frequencies
            .iter()
            .zip(&psd.values)
            .enumerate()
            .filter(|(_, (f, _))| **f >= lo && **f <= hi)
            .max_by(|a, b| a.1 .1.total_cmp(b.1 .1))
            .map(|(i, _)| i)
    };
    let (lo, hi) = match options.band {
        Some((lo, hi)) => (lo, hi),
        None => {
            let k = peak_index(df, nyquist)
                .ok_or_else(|| Error::InvalidConfig("PSD has no bins above DC".into()))?;
            (df, (3.0 * psd.frequencies[k]).min(nyquist))
        }
    };
    ensure(lo < hi && lo >= 0.0, || Error::InvalidConfig(format!("invalid fit band [{lo}, {hi}]")))?;
    let idx: Vec<usize> = (0..psd.frequencies.len())
        .filter(|&i| {
            let f = psd.frequencies[i];
            f >= lo && f <= hi && f > 0.0 && (options.weighting != PsdWeighting::Log || psd.values[i] > 0.0)
        })
        .collect();
    let n_params = if options.noise_floor == NoiseFloor::FittedConstant { 4 } else { 3 };
    ensure(idx.len() > n_params + 2, || {
        Error::InvalidConfig(format!("fit band [{lo}, {hi}] Hz holds only {} bins", idx.len()))
    })?;
    let f: Vec<f64> = idx.iter().map(|&i| psd.frequencies[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| psd.values[i]).collect();
    let peak = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(0);
    ensure(s[peak] > 0.0, || Error::Fit("PSD is zero over the fit band".into()))?;
    ensure(peak > 0 && peak + 1 < s.len(), || {
        Error::Fit(format!("spectral peak at {} Hz lies on the fit band edge", f[peak]))
    })?;

    let floor_guess = if n_params == 4 {
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() / 20].max(0.0)
    } else {
        0.0
    };
    let half = floor_guess + 0.5 * (s[peak] - floor_guess);
    let left = (0..peak).rev().find(|&i| s[i] < half).map_or(f[0], |i| f[i]);
    let right = (peak + 1..s.len()).find(|&i| s[i] < half).map_or(f[s.len() - 1], |i| f[i]);
    let gamma0 = (right - left).max(df);
    let area0 = (s.iter().sum::<f64>() * df - floor_guess * (hi - lo)).max(s[peak] * df);
    let mut start = vec![area0, f[peak], gamma0];
    if n_params == 4 {
        start.push(floor_guess);
    }
    let mut problem = PsdProblem {
        f: &f,
        s: &s,
        log: options.weighting == PsdWeighting::Log,
        with_floor: n_params == 4,
        scale: vec![s[peak]; s.len()],
    };
    // Relative weighting divides by the model, frozen at the previous solution.
    // Solving with frozen weights until they stop changing gives the unbiased
    // score equation Σ (S − m)·∂m/m² = 0; differentiating through the weights
    // would bias A upward by about one part in the segment count.
    let passes = if options.weighting == PsdWeighting::Relative { MAX_REWEIGHTS } else { 1 };
    let mut params = start;
    let mut out = None;
    let mut reweight_converged = passes == 1;
    for _ in 0..passes {
        if options.weighting == PsdWeighting::Relative {
            problem.scale = problem.model_values(&params);
        }
        let o = levenberg_marquardt(&problem, &params, LmOptions::default());
        let change = o
            .params
            .iter()
            .zip(&params)
            .map(|(a, b)| ((a - b) / a.abs().max(f64::MIN_POSITIVE)).abs())
            .fold(0.0, f64::max);
        params = o.params.clone();
        let lm_ok = o.converged;
        out = Some(o);
        if !lm_ok {
            break;
        }
        if passes > 1 && change < 1e-9 {
            reweight_converged = true;
            break;
        }
    }
    let out = out.expect("at least one pass");
    let sig = out.scaled_errors();
    let p = &out.params;
    let rms = (f
        .iter()
        .zip(&s)
        .map(|(&fi, &si)| {
            let m = psd_model(fi, p[0], p[1], p[2]) + if n_params == 4 { p[3] } else { 0.0 };
            ((si - m) / m).powi(2)
        })
        .sum::<f64>()
        / f.len() as f64)
        .sqrt();
    let threshold = options.mismatch_factor / (0.9 * psd.segment_count.max(1) as f64).sqrt();
    Ok(PsdFit {
        a: p[0],
        f_q: p[1],
        gamma: p[2],
        a_sigma: sig[0],
        f_q_sigma: sig[1],
        gamma_sigma: sig[2],
        noise_floor: (n_params == 4).then(|| p[3]),
        fit_residual: rms,
        converged: out.converged && reweight_converged && p[..3].iter().all(|v| v.is_finite() && *v > 0.0),
        overdamped: p[2] > p[1],
        model_mismatch: rms > threshold,
        iterations: out.iterations,
        message: out.message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_psd(a: f64, f_q: f64, gamma: f64, df: f64, bins: usize) -> Psd {
        let frequencies: Vec<f64> = (0..bins).map(|k| k as f64 * df).collect();
        Psd {
            values: frequencies.iter().map(|&f| psd_model(f, a, f_q, gamma)).collect(),
            frequencies,
            segment_count: 100,
            window_name: "hann".into(),
            dt: 1.0 / (2.0 * df * (bins - 1) as f64),
            few_segments: false,
        }
    }

    #[test]
    fn model_peak_and_tail() {
        let (a, fq, g) = (2.0, 5e4, 3e3);
        assert!((psd_model(fq, a, fq, g) - 2.0 * a / (PI * g)).abs() < 1e-18);
        let r = psd_model(1e7, a, fq, g) / psd_model(2e7, a, fq, g);
        assert!((r / 16.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn model_integrates_to_a() {
        // substitution f = f_q·tan(θ/2) maps [0, ∞) to [0, π)
        let (a, fq, g) = (3.5, 4e4, 2e3);
        let n = 2_000_000;
        let h = PI / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let th = (i as f64 + 0.5) * h;
                let f = fq * (th / 2.0).tan();
                psd_model(f, a, fq, g) * fq * 0.5 / (th / 2.0).cos().powi(2) * h
            })
            .sum();
        assert!((total / a - 1.0).abs() < 1e-6, "{}", total / a);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = [2.0, 5e4, 3e3];
        for &f in &[1e3, 4.9e4, 5.2e4, 2e5] {
            let (_, g) = psd_model_with_gradient(f, p[0], p[1], p[2]);
            for j in 0..3 {
                let h = p[j] * 1e-6;
                let mut up = p;
                let mut dn = p;
                up[j] += h;
                dn[j] -= h;
                let fd = (psd_model(f, up[0], up[1], up[2]) - psd_model(f, dn[0], dn[1], dn[2])) / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-6 * fd.abs().max(1e-30), "{j} {f}");
            }
        }
    }

    #[test]
    fn tone_parseval() {
        let n = 1 << 14;
        let dt = 1e-6;
        let seg = 1024;
        let k = 37.0;
        let amp = 1.7;
        let x: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * k * i as f64 / seg as f64).sin())
            .collect();
        for window in [Window::Hann, Window::Rectangular] {
            let psd = welch_psd_samples(&x, dt, &WelchOptions { segment_length: seg, overlap: 0.5, window }).unwrap();
            assert!((psd.integral() / (amp * amp / 2.0) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn white_noise_level() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sigma = 0.3;
        let dt = 1e-5;
        let x: Vec<f64> = (0..256 * 200)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect();
        let psd = welch_psd_samples(&x, dt, &WelchOptions { segment_length: 256, ..Default::default() }).unwrap();
        assert!(psd.segment_count >= 100);
        let inner = &psd.values[1..psd.values.len() - 1];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean / (2.0 * sigma * sigma * dt) - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_signal_and_bad_input() {
        let psd = welch_psd_samples(&[0.0; 4096], 1e-6, &WelchOptions { segment_length: 512, ..Default::default() }).unwrap();
        assert!(psd.values.iter().all(|v| *v == 0.0));
        let mut x = vec![1.0; 4096];
        x[7] = f64::NAN;
        assert!(welch_psd_samples(&x, 1e-6, &WelchOptions { segment_length: 512, ..Default::default() }).is_err());
        assert!(welch_psd_samples(&[0.0; 100], 1e-6, &WelchOptions::default()).is_err());
        let one = welch_psd_samples(&[1.0; 512], 1e-6, &WelchOptions { segment_length: 512, ..Default::default() }).unwrap();
        assert!(one.few_segments);
    }

    #[test]
    fn exact_model_recovered() {
        let psd = model_psd(2.5e-3, 5e4, 4e3, 100.0, 4001);
        let fit = fit_psd(&psd, &PsdFitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.a / 2.5e-3 - 1.0).abs() < 1e-8);
        assert!((fit.f_q / 5e4 - 1.0).abs() < 1e-8);
        assert!((fit.gamma / 4e3 - 1.0).abs() < 1e-8);
        assert!(!fit.overdamped && !fit.model_mismatch);
    }

    #[test]
    fn exact_model_with_floor_and_modes() {
        let mut psd = model_psd(1.0, 3e4, 2e3, 50.0, 4001);
        let floor = 1e-3 * psd_model(3e4, 1.0, 3e4, 2e3);
        for v in &mut psd.values {
            *v += floor;
        }
        let opts = PsdFitOptions {
            noise_floor: NoiseFloor::FittedConstant,
            ..Default::default()
        };
        let fit = fit_psd(&psd, &opts).unwrap();
        assert!(fit.converged);
        assert!((fit.f_q / 3e4 - 1.0).abs() < 1e-8 && (fit.gamma / 2e3 - 1.0).abs() < 1e-8);
        assert!((fit.noise_floor.unwrap() / floor - 1.0).abs() < 1e-6);
        for weighting in [PsdWeighting::Uniform, PsdWeighting::Log] {
            let fit = fit_psd(&psd, &PsdFitOptions { weighting, ..opts }).unwrap();
            assert!(fit.converged && (fit.a - 1.0).abs() < 1e-6, "{weighting:?}");
        }
    }

    #[test]
    fn two_peaks_flagged() {
        let mut psd = model_psd(1.0, 4e4, 1.5e3, 100.0, 2001);
        for (f, v) in psd.frequencies.iter().zip(psd.values.iter_mut()) {
            *v += psd_model(*f, 0.8, 4.8e4, 1.5e3);
        }
        let fit = fit_psd(&psd, &PsdFitOptions::default()).unwrap();
        assert!(!fit.converged || fit.model_mismatch, "{fit:?}");
    }

    #[test]
    fn overdamped_flagged() {
        let psd = model_psd(1.0, 1e4, 3e4, 100.0, 4001);
        let fit = fit_psd(&psd, &PsdFitOptions { band: Some((100.0, 2e5)), ..Default::default() });
        if let Ok(fit) = fit {
            assert!(fit.overdamped || !fit.converged);
        }
    }

    #[test]
    fn rescaling_invariance() {
        let psd = model_psd(2.0, 6e4, 5e3, 200.0, 2001);
        let base = fit_psd(&psd, &PsdFitOptions::default()).unwrap();
        let scaled = fit_psd(&psd.scaled(1e6), &PsdFitOptions::default()).unwrap();
        assert!((scaled.a / base.a / 1e6 - 1.0).abs() < 1e-9);
        assert!((scaled.f_q / base.f_q - 1.0).abs() < 1e-12);
        assert!((scaled.gamma / base.gamma - 1.0).abs() < 1e-9);
    }
}
