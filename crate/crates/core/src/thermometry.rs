//! NV-centre thermometry: zero-field splitting law, ESR dip fitting, and the
//! joint fit of the internal heating law over a power/pressure campaign.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fit::{fit_line, levenberg_marquardt, LmOptions, LmOutcome, Residuals};

/// Zero-field splitting D(T) = Σ cᵢ·Tⁱ in Hz, valid on `[t_min, t_max]` K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZfsLawFields")]
pub struct ZfsLaw {
    coefficients: Vec<f64>,
    #[serde(rename = "T_min")]
    t_min: f64,
    #[serde(rename = "T_max")]
    t_max: f64,
    source: String,
}

#[derive(Debug, Clone, Deserialize)]
struct ZfsLawFields {
    coefficients: Vec<f64>,
    #[serde(rename = "T_min", alias = "t_min")]
    t_min: f64,
    #[serde(rename = "T_max", alias = "t_max")]
    t_max: f64,
    #[serde(default)]
    source: String,
}

impl TryFrom<ZfsLawFields> for ZfsLaw {
    type Error = Error;

    fn try_from(s: ZfsLawFields) -> Result<Self> {
        ZfsLaw::new(s.coefficients, s.t_min, s.t_max, s.source)
    }
}

const MONOTONE_SAMPLES: usize = 4096;

impl ZfsLaw {
    /// Builds a law and checks it is strictly decreasing on its range.
    pub fn new(coefficients: Vec<f64>, t_min: f64, t_max: f64, source: impl Into<String>) -> Result<Self> {
        ensure(!coefficients.is_empty(), || {
            Error::InvalidConfig("ZFS law needs at least one coefficient".into())
        })?;
        ensure(t_min > 0.0 && t_max > t_min, || {
            Error::InvalidConfig(format!("ZFS validity range [{t_min}, {t_max}] is empty"))
        })?;
        let law = Self {
            coefficients,
            t_min,
            t_max,
            source: source.into(),
        };
        let mut prev = law.d_of_t_unchecked(t_min);
        for i in 1..=MONOTONE_SAMPLES {
            let t = t_min + (t_max - t_min) * i as f64 / MONOTONE_SAMPLES as f64;
            let d = law.d_of_t_unchecked(t);
            if !(d < prev) || law.slope(t) >= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "ZFS law is not strictly decreasing near {t:.2} K"
                )));
            }
            prev = d;
        }
        Ok(law)
    }

    /// Cubic law of Toyli et al., PNAS 110, 8417 (2013), fitted over 300–700 K.
    pub fn toyli() -> Self {
        Self::new(
            vec![2.8697e9, 9.7e4, -3.7e2, 1.7e-1],
            250.0,
            700.0,
            "Toyli et al., PNAS 110, 8417 (2013); cubic fit over 300-700 K, range extended to 250 K",
        )
        .expect("built-in law is monotone")
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn d_of_t_unchecked(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// D(T) in Hz.
    pub fn d_of_t(&self, t: f64) -> Result<f64> {
        ensure(t >= self.t_min && t <= self.t_max, || {
            Error::Range(format!(
                "temperature {t} K outside ZFS law range [{}, {}]",
                self.t_min, self.t_max
            ))
        })?;
        Ok(self.d_of_t_unchecked(t))
    }

    /// dD/dT in Hz/K.
    pub fn slope(&self, t: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * t + i as f64 * c)
    }

    /// Inverts D(T) by bisection to better than 1 mK.
    pub fn t_of_d(&self, d: f64) -> Result<f64> {
        let d_hi = self.d_of_t_unchecked(self.t_min);
        let d_lo = self.d_of_t_unchecked(self.t_max);
        ensure(d >= d_lo && d <= d_hi, || {
            Error::Range(format!("splitting {d} Hz outside the law's image [{d_lo}, {d_hi}]"))
        })?;
        let (mut lo, mut hi) = (self.t_min, self.t_max);
        while hi - lo > 1e-7 {
            let mid = 0.5 * (lo + hi);
            if self.d_of_t_unchecked(mid) > d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Photoluminescence against microwave frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsrSpectrum {
    pub frequencies: Vec<f64>,
    pub counts: Vec<f64>,
    pub power_mw: f64,
    pub pressure_hpa: f64,
}

impl EsrSpectrum {
    pub fn validate(&self) -> Result<()> {
        ensure(self.frequencies.len() == self.counts.len(), || {
            Error::Format("ESR frequency and count columns differ in length".into())
        })?;
        ensure(self.frequencies.windows(2).all(|w| w[1] > w[0]), || {
            Error::Format("ESR frequencies must be strictly increasing".into())
        })?;
        ensure(self.counts.iter().all(|c| c.is_finite() && *c >= 0.0), || {
            Error::Format("ESR counts must be finite and non-negative".into())
        })
    }
}

/// Unit-peak Lorentzian with full width at half maximum `width`.
pub fn unit_lorentzian(f: f64, center: f64, width: f64) -> f64 {
    let u = 2.0 * (f - center) / width;
    1.0 / (1.0 + u * u)
}

/// Bi-Lorentzian dip model B·[1 − C1·ℒ(f; f1, w1) − C2·ℒ(f; f2, w2)].
pub fn esr_model(f: f64, fit: &EsrFit) -> f64 {
    fit.baseline
        * (1.0
            - fit.contrast1 * unit_lorentzian(f, fit.center1, fit.width1)
            - fit.contrast2 * unit_lorentzian(f, fit.center2, fit.width2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsrFit {
    pub baseline: f64,
    pub contrast1: f64,
    pub contrast2: f64,
    pub center1: f64,
    pub center2: f64,
    pub width1: f64,
    pub width2: f64,
    /// (f1 + f2)/2
    pub d: f64,
    /// (f2 − f1)/2
    pub e: f64,
    pub d_sigma: f64,
    pub e_sigma: f64,
    /// Standard errors in the order B, C1, f1, w1, C2, f2, w2.
    pub sigmas: Vec<f64>,
    pub converged: bool,
    /// Dips could not be resolved; a single Lorentzian was fitted and E set to 0.
    pub single_dip: bool,
    pub message: String,
}

struct DipProblem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    weights: Vec<f64>,
    dips: usize,
    span: f64,
}

// params: [B, C1, x1, w1, (C2, x2, w2)] with x offsets from the scan midpoint
impl Residuals for DipProblem<'_> {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, &x) in self.x.iter().enumerate() {
            let mut dip = 0.0;
            for k in 0..self.dips {
                dip += p[1 + 3 * k] * unit_lorentzian(x, p[2 + 3 * k], p[3 + 3 * k]);
            }
            out[i] = (p[0] * (1.0 - dip) - self.y[i]) * self.weights[i];
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for (i, &x) in self.x.iter().enumerate() {
            let w = self.weights[i];
            let mut dip = 0.0;
            for k in 0..self.dips {
                let (c, x0, width) = (p[1 + 3 * k], p[2 + 3 * k], p[3 + 3 * k]);
                let u = 2.0 * (x - x0) / width;
                let l = 1.0 / (1.0 + u * u);
                dip += c * l;
                // ∂ℒ/∂x0 = ℒ²·8(x−x0)/w², ∂ℒ/∂w = ℒ²·2u²/w
                out[(i, 1 + 3 * k)] = -p[0] * l * w;
                out[(i, 2 + 3 * k)] = -p[0] * c * l * l * 4.0 * u / width * w;
                out[(i, 3 + 3 * k)] = -p[0] * c * l * l * 2.0 * u * u / width * w;
            }
            out[(i, 0)] = (1.0 - dip) * w;
        }
    }

    fn param_scale(&self, i: usize) -> f64 {
        if i >= 2 && (i - 2).is_multiple_of(3) {
            self.span
        } else {
            0.0
        }
    }

    fn feasible(&self, p: &[f64]) -> bool {
        if !(p[0] > 0.0) {
            return false;
        }
        (0..self.dips).all(|k| {
            let (c, width) = (p[1 + 3 * k], p[3 + 3 * k]);
            c > 0.0 && c < 1.0 && width > 0.0
        })
    }
}

fn smooth(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v[((v.len() - 1) as f64 * q).round() as usize]
}

/// FWHM of the dip around `idx` in a smoothed, baseline-normalised trace.
fn dip_width(x: &[f64], s: &[f64], baseline: f64, idx: usize) -> f64 {
    let half = baseline - 0.5 * (baseline - s[idx]);
    let mut lo = idx;
    while lo > 0 && s[lo] < half {
        lo -= 1;
    }
    let mut hi = idx;
    while hi + 1 < s.len() && s[hi] < half {
        hi += 1;
    }
    (x[hi] - x[lo]).max(2.0 * (x[1] - x[0]))
}

/// Fits a bi-Lorentzian to an ESR spectrum, falling back to a single dip when
/// the strain splitting is unresolved.
pub fn fit_esr(spectrum: &EsrSpectrum) -> Result<EsrFit> {
    spectrum.validate()?;
    let n = spectrum.frequencies.len();
    ensure(n >= 20, || Error::InvalidConfig(format!("ESR fit needs ≥ 20 points, got {n}")))?;
    let f = &spectrum.frequencies;
    let mid = 0.5 * (f[0] + f[n - 1]);
    let x: Vec<f64> = f.iter().map(|v| v - mid).collect();
    let y = &spectrum.counts;
    let weights: Vec<f64> = y.iter().map(|c| 1.0 / c.max(1.0).sqrt()).collect();

    let s = smooth(y, (n / 100).max(1));
    let baseline = percentile(y, 0.9);
    ensure(baseline > 0.0, || Error::Fit("ESR spectrum has no signal".into()))?;

    // local minima of the smoothed trace, deepest first
    let mut minima: Vec<usize> = (1..n - 1)
        .filter(|&i| s[i] <= s[i - 1] && s[i] < s[i + 1])
        .collect();
    minima.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let Some(&first) = minima.first() else {
        return Err(Error::Fit("no dip found in ESR spectrum".into()));
    };
    let depth1 = (1.0 - s[first] / baseline).clamp(1e-4, 0.9);
    let width1 = dip_width(&x, &s, baseline, first);

    // second dip: deepest minimum separated from the first by a clear hump
    let second = minima.iter().skip(1).copied().find(|&j| {
        let (a, b) = if j < first { (j, first) } else { (first, j) };
        let hump = s[a..=b].iter().cloned().fold(f64::MIN, f64::max);
        let depth = baseline - s[j];
        depth > 0.3 * (baseline - s[first]) && hump - s[j] > 0.25 * depth
    });

    let problem2 = DipProblem {
        x: &x,
        y,
        weights: weights.clone(),
        dips: 2,
        span: x[n - 1] - x[0],
    };
    let start2 = match second {
        Some(j) => {
            let (a, b) = if x[j] < x[first] { (j, first) } else { (first, j) };
            let da = (1.0 - s[a] / baseline).clamp(1e-4, 0.9);
            let db = (1.0 - s[b] / baseline).clamp(1e-4, 0.9);
            let w = dip_width(&x, &s, baseline, a).min(x[b] - x[a]);
            vec![baseline, da, x[a], w, db, x[b], w]
        }
        None => vec![
            baseline,
            0.5 * depth1,
            x[first] - 0.25 * width1,
            0.75 * width1,
            0.5 * depth1,
            x[first] + 0.25 * width1,
            0.75 * width1,
        ],
    };
    let bi = levenberg_marquardt(&problem2, &start2, LmOptions::default());
    if let Some(fit) = accept_bi_fit(&bi, mid, &x) {
        return Ok(fit);
    }

    let problem1 = DipProblem {
        x: &x,
        y,
        weights,
        dips: 1,
        span: x[n - 1] - x[0],
    };
    let single = levenberg_marquardt(&problem1, &[baseline, depth1, x[first], width1], LmOptions::default());
    let p = &single.params;
    let sig = single.scaled_errors();
    let converged = single.converged && problem1.feasible(p) && p[2].abs() <= 0.5 * (x[n - 1] - x[0]);
    Ok(EsrFit {
        baseline: p[0],
        contrast1: 0.5 * p[1],
        contrast2: 0.5 * p[1],
        center1: mid + p[2],
        center2: mid + p[2],
        width1: p[3],
        width2: p[3],
        d: mid + p[2],
        e: 0.0,
        d_sigma: sig[2],
        e_sigma: 0.0,
        sigmas: vec![sig[0], 0.5 * sig[1], sig[2], sig[3], 0.5 * sig[1], sig[2], sig[3]],
        converged,
        single_dip: true,
        message: format!("single-dip fallback: {}", single.message),
    })
}

fn accept_bi_fit(out: &LmOutcome, mid: f64, x: &[f64]) -> Option<EsrFit> {
    let p = &out.params;
    if !out.converged {
        return None;
    }
    let cov = out.inverse_hessian.as_ref()?;
    let dof = out.residual_count.saturating_sub(p.len()).max(1) as f64;
    let scale = out.cost / dof;
    let sig: Vec<f64> = (0..7).map(|i| (cov[(i, i)] * scale).max(0.0).sqrt()).collect();
    let (i1, i2) = if p[2] <= p[5] { (2, 5) } else { (5, 2) };
    let var_d = 0.25 * (cov[(i1, i1)] + cov[(i2, i2)] + 2.0 * cov[(i1, i2)]) * scale;
    let var_e = 0.25 * (cov[(i1, i1)] + cov[(i2, i2)] - 2.0 * cov[(i1, i2)]) * scale;
    let e = 0.5 * (p[i2] - p[i1]);
    let step = x[1] - x[0];
    let separated = e.is_finite() && var_e.is_finite() && e > 3.0 * var_e.max(0.0).sqrt() && 2.0 * e > step;
    let in_band = p[i1] >= x[0] && p[i2] <= x[x.len() - 1];
    if !(separated && in_band) {
        return None;
    }
    let (c1, w1, c2, w2) = (p[i1 - 1], p[i1 + 1], p[i2 - 1], p[i2 + 1]);
    Some(EsrFit {
        baseline: p[0],
        contrast1: c1,
        contrast2: c2,
        center1: mid + p[i1],
        center2: mid + p[i2],
        width1: w1,
        width2: w2,
        d: mid + 0.5 * (p[i1] + p[i2]),
        e,
        d_sigma: var_d.max(0.0).sqrt(),
        e_sigma: var_e.max(0.0).sqrt(),
        sigmas: vec![
            sig[0],
            sig[i1 - 1],
            sig[i1],
            sig[i1 + 1],
            sig[i2 - 1],
            sig[i2],
            sig[i2 + 1],
        ],
        converged: true,
        single_dip: false,
        message: out.message.clone(),
    })
}

/// Internal temperature with its first-order uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureReading {
    pub temperature: f64,
    pub sigma: f64,
}

/// Converts a fitted splitting into a temperature; σ_T = σ_D/|dD/dT|.
pub fn temperature_from_esr(fit: &EsrFit, law: &ZfsLaw) -> Result<TemperatureReading> {
    ensure(fit.converged, || Error::Fit(format!("ESR fit did not converge: {}", fit.message)))?;
    let t = law.t_of_d(fit.d)?;
    Ok(TemperatureReading {
        temperature: t,
        sigma: fit.d_sigma / law.slope(t).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingPoint {
    pub power_mw: f64,
    pub pressure_hpa: f64,
    pub t_raw: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Weighted,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingFit {
    /// K·hPa/mW
    pub kappa_heat: f64,
    pub kappa_sigma: f64,
    /// Intercept of the raw fit, before strain correction.
    pub t0_fit: f64,
    pub t0_sigma: f64,
    /// Added to every raw temperature so the intercept equals room temperature.
    pub strain_offset_k: f64,
    /// Intercept after correction; equal to the room temperature.
    pub t0_corrected: f64,
}

impl HeatingFit {
    pub fn correct(&self, t_raw: f64) -> f64 {
        t_raw + self.strain_offset_k
    }
}

/// Joint fit of T_raw = T0 + κ·P/p over all points, then strain-offset correction.
pub fn fit_heating_law(points: &[HeatingPoint], room_t: f64, weighting: Weighting) -> Result<HeatingFit> {
    let distinct = |vals: Vec<f64>| {
        let mut v = vals;
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v.len()
    };
    ensure(
        distinct(points.iter().map(|p| p.pressure_hpa).collect()) >= 2
            && distinct(points.iter().map(|p| p.power_mw).collect()) >= 2,
        || Error::InvalidConfig("heating fit needs at least two pressures and two powers".into()),
    )?;
    ensure(
        points
            .iter()
            .all(|p| p.sigma > 0.0 && p.pressure_hpa > 0.0 && p.t_raw.is_finite()),
        || Error::InvalidConfig("heating points need σ > 0, p > 0 and finite temperatures".into()),
    )?;
    let x: Vec<f64> = points.iter().map(|p| p.power_mw / p.pressure_hpa).collect();
    let y: Vec<f64> = points.iter().map(|p| p.t_raw).collect();
    let s: Vec<f64> = points.iter().map(|p| p.sigma).collect();
    let line = match weighting {
        Weighting::Weighted => fit_line(&x, &y, Some(&s))?,
        Weighting::Unweighted => fit_line(&x, &y, None)?,
    };
    Ok(HeatingFit {
        kappa_heat: line.slope,
        kappa_sigma: line.slope_sigma,
        t0_fit: line.intercept,
        t0_sigma: line.intercept_sigma,
        strain_offset_k: room_t - line.intercept,
        t0_corrected: room_t,
    })
}
