//! Coupling constant K, accommodation, anisotropy, overheating flags and the
//! hydrodynamic radius.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{AxisLabel, GasEnvironment, AVOGADRO, BOLTZMANN};
use crate::error::{ensure, Error, Result};
use crate::fit::{fit_line, mean_and_std, LineFit};
use crate::pipeline::calibration::{same_value, EnergySeries, PowerSweepPoint};
use crate::thermometry::Weighting;
use crate::twobath::alpha_from_k;

/// Internal temperature versus power at one pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSeries {
    pub pressure_hpa: f64,
    pub powers_mw: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub axis: AxisLabel,
    pub pressure_hpa: f64,
    pub k: f64,
    pub k_sigma: f64,
    pub alpha_c: f64,
    pub alpha_sigma: f64,
    /// dE_com/dP in J/mW.
    pub energy_slope: f64,
    pub energy_slope_sigma: f64,
    /// dT_int/dP in K/mW.
    pub temperature_slope: f64,
    pub temperature_slope_sigma: f64,
}

fn line(x: &[f64], y: &[f64], s: &[f64], weighting: Weighting) -> Result<LineFit> {
    let usable = s.iter().all(|v| v.is_finite() && *v > 0.0);
    match weighting {
        Weighting::Weighted if usable => fit_line(x, y, Some(s)),
        _ => fit_line(x, y, None),
    }
}

/// K = (dE_com/dP) / (k_B·dT_int/dP) with first-order error propagation.
///
/// The calibration's relative uncertainty is added in quadrature to the energy slope.
pub fn extract_k(energy: &EnergySeries, temps: &TemperatureSeries, weighting: Weighting) -> Result<KEstimate> {
    ensure(energy.powers_mw.len() >= 3 && temps.powers_mw.len() >= 3, || {
        Error::InvalidConfig("K extraction needs at least three powers in both series".into())
    })?;
    ensure(same_value(energy.pressure_hpa, temps.pressure_hpa), || {
        Error::InvalidConfig(format!(
            "energy series at {} hPa paired with temperatures at {} hPa",
            energy.pressure_hpa, temps.pressure_hpa
        ))
    })?;
    let span = |v: &[f64]| {
        (
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (e_lo, e_hi) = span(&energy.powers_mw);
    let (t_lo, t_hi) = span(&temps.powers_mw);
    ensure(same_value(e_lo, t_lo) && same_value(e_hi, t_hi), || {
        Error::InvalidConfig(format!(
            "power ranges differ: energies [{e_lo}, {e_hi}], temperatures [{t_lo}, {t_hi}]"
        ))
    })?;
    let e_fit = line(&energy.powers_mw, &energy.energies, &energy.sigmas, weighting)?;
    let t_fit = line(&temps.powers_mw, &temps.temperatures, &temps.sigmas, weighting)?;
    if !(t_fit.slope.abs() > 2.0 * t_fit.slope_sigma) {
        return Err(Error::Fit(format!(
            "temperature slope {:.4e} ± {:.4e} K/mW is consistent with zero; K is undefined",
            t_fit.slope, t_fit.slope_sigma
        )));
    }
    let e_slope_sigma = (e_fit.slope_sigma.powi(2)
        + (e_fit.slope * energy.calibration_rel_sigma).powi(2))
    .sqrt();
    let k = e_fit.slope / (BOLTZMANN * t_fit.slope);
    let k_sigma = k.abs()
        * ((e_slope_sigma / e_fit.slope).powi(2) + (t_fit.slope_sigma / t_fit.slope).powi(2)).sqrt();
    let k_sigma = if k == 0.0 {
        e_slope_sigma / (BOLTZMANN * t_fit.slope.abs())
    } else {
        k_sigma
    };
    let ratio = alpha_from_k(1.0)?;
    Ok(KEstimate {
        axis: energy.axis,
        pressure_hpa: energy.pressure_hpa,
        k,
        k_sigma,
        alpha_c: k * ratio,
        alpha_sigma: k_sigma * ratio,
        energy_slope: e_fit.slope,
        energy_slope_sigma: e_slope_sigma,
        temperature_slope: t_fit.slope,
        temperature_slope_sigma: t_fit.slope_sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverheatingFlag {
    Thermal,
    Overheated,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheatingThresholds {
    /// Number of standard deviations used in every comparison.
    pub sigmas: f64,
    /// K above this cannot come from internal heating alone.
    pub overheated_k: f64,
    /// K at or below this counts as thermal.
    pub thermal_k: f64,
}

impl Default for OverheatingThresholds {
    fn default() -> Self {
        Self {
            sigmas: 2.0,
            overheated_k: 1.0,
            thermal_k: 0.5,
        }
    }
}

/// Flags one axis from its per-pressure K values.
///
/// Rules, in order: any K − nσ above `overheated_k` is overheated; every K
/// within nσ of at most `thermal_k` (and K + nσ ≤ `overheated_k`) is thermal; a
/// significant rise of K as pressure falls with some K − nσ above `thermal_k`
/// is overheated; anything else is undetermined.
pub fn classify_axis(per_pressure: &[KEstimate], thr: &OverheatingThresholds) -> OverheatingFlag {
    if per_pressure.is_empty() {
        return OverheatingFlag::Undetermined;
    }
    let n = thr.sigmas;
    if per_pressure.iter().any(|k| k.k - n * k.k_sigma > thr.overheated_k) {
        return OverheatingFlag::Overheated;
    }
    if per_pressure
        .iter()
        .all(|k| k.k - n * k.k_sigma <= thr.thermal_k && k.k + n * k.k_sigma <= thr.overheated_k)
    {
        return OverheatingFlag::Thermal;
    }
    let elevated = per_pressure.iter().any(|k| k.k - n * k.k_sigma > thr.thermal_k);
    if elevated && rises_as_pressure_falls(per_pressure, n) {
        return OverheatingFlag::Overheated;
    }
    OverheatingFlag::Undetermined
}

fn rises_as_pressure_falls(per_pressure: &[KEstimate], n: f64) -> bool {
    let mut pts: Vec<&KEstimate> = per_pressure.iter().collect();
    pts.sort_by(|a, b| a.pressure_hpa.total_cmp(&b.pressure_hpa));
    match pts.len() {
        0 | 1 => false,
        2 => {
            let diff = pts[0].k - pts[1].k;
            diff > n * pts[0].k_sigma.hypot(pts[1].k_sigma)
        }
        _ => {
            let x: Vec<f64> = pts.iter().map(|k| k.pressure_hpa).collect();
            let y: Vec<f64> = pts.iter().map(|k| k.k).collect();
            let s: Vec<f64> = pts.iter().map(|k| k.k_sigma).collect();
            let fit = if s.iter().all(|v| *v > 0.0 && v.is_finite()) {
                fit_line(&x, &y, Some(&s))
            } else {
                fit_line(&x, &y, None)
            };
            fit.is_ok_and(|f| f.slope < 0.0 && -f.slope > n * f.slope_sigma)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anisotropy {
    /// Mean of γ_x/γ_y over same-point fit pairs.
    pub g: f64,
    /// Sample standard deviation of the ratios.
    pub spread: f64,
    pub pairs: usize,
}

/// g = γ_x/γ_y from fits of the same trace, averaged over all sweep points.
pub fn anisotropy(points: &[PowerSweepPoint]) -> Option<Anisotropy> {
    let ratios: Vec<f64> = points
        .iter()
        .filter_map(|p| {
            let x = p.fit(AxisLabel::X).filter(|f| f.converged)?;
            let y = p.fit(AxisLabel::Y).filter(|f| f.converged)?;
            Some(x.gamma / y.gamma)
        })
        .collect();
    if ratios.is_empty() {
        return None;
    }
    let (g, spread) = mean_and_std(&ratios);
    Some(Anisotropy {
        g,
        spread: if spread.is_finite() { spread } else { 0.0 },
        pairs: ratios.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisEstimate {
    pub axis: AxisLabel,
    /// Inverse-variance weighted mean over pressures.
    pub k: f64,
    pub k_sigma: f64,
    pub alpha_c: f64,
    pub alpha_sigma: f64,
    /// χ² of the per-pressure values about the mean, and its degrees of freedom.
    pub consistency_chi2: f64,
    pub consistency_dof: usize,
    pub per_pressure: Vec<KEstimate>,
    pub flag: OverheatingFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbmEstimate {
    pub axes: Vec<AxisEstimate>,
    pub anisotropy: Option<Anisotropy>,
    /// Weighted mean of every per-pressure K across axes.
    pub k_mean: f64,
    pub k_mean_sigma: f64,
}

fn weighted_mean(values: &[(f64, f64)]) -> (f64, f64, f64) {
    let usable: Vec<(f64, f64)> = values
        .iter()
        .copied()
        .filter(|(_, s)| s.is_finite() && *s > 0.0)
        .collect();
    if usable.is_empty() {
        let (m, _) = mean_and_std(&values.iter().map(|v| v.0).collect::<Vec<_>>());
        return (m, f64::NAN, 0.0);
    }
    let sw: f64 = usable.iter().map(|(_, s)| 1.0 / (s * s)).sum();
    let mean = usable.iter().map(|(v, s)| v / (s * s)).sum::<f64>() / sw;
    let chi2 = usable.iter().map(|(v, s)| ((v - mean) / s).powi(2)).sum();
    (mean, 1.0 / sw.sqrt(), chi2)
}

/// Aggregates per-pressure K values into axis estimates and flags.
pub fn build_estimate(
    k_values: &[KEstimate],
    points: &[PowerSweepPoint],
    thresholds: &OverheatingThresholds,
) -> HbmEstimate {
    let mut labels: Vec<AxisLabel> = k_values.iter().map(|k| k.axis).collect();
    labels.sort();
    labels.dedup();
    let axes = labels
        .into_iter()
        .map(|axis| {
            let mut per: Vec<KEstimate> = k_values.iter().filter(|k| k.axis == axis).copied().collect();
            per.sort_by(|a, b| a.pressure_hpa.total_cmp(&b.pressure_hpa));
            let (k, k_sigma, chi2) = weighted_mean(&per.iter().map(|e| (e.k, e.k_sigma)).collect::<Vec<_>>());
            let ratio = (PI + 8.0) / PI;
            AxisEstimate {
                axis,
                k,
                k_sigma,
                alpha_c: k * ratio,
                alpha_sigma: k_sigma * ratio,
                consistency_chi2: chi2,
                consistency_dof: per.len().saturating_sub(1),
                flag: classify_axis(&per, thresholds),
                per_pressure: per,
            }
        })
        .collect();
    let (k_mean, k_mean_sigma, _) =
        weighted_mean(&k_values.iter().map(|e| (e.k, e.k_sigma)).collect::<Vec<_>>());
    HbmEstimate {
        axes,
        anisotropy: anisotropy(points),
        k_mean,
        k_mean_sigma,
    }
}

/// Overheating flag of every axis in `estimate`, recomputed with `thresholds`.
pub fn classify_overheating(
    estimate: &HbmEstimate,
    thresholds: &OverheatingThresholds,
) -> Vec<(AxisLabel, OverheatingFlag)> {
    estimate
        .axes
        .iter()
        .map(|a| (a.axis, classify_axis(&a.per_pressure, thresholds)))
        .collect()
}

/// Prefactor of the free-molecular sphere damping with diffuse re-emission at room temperature.
const SPHERE_DAMPING_FACTOR: f64 = 0.619 * 9.0;

/// Radius of a sphere of density `density` whose gas damping equals `gamma_hz` (γ = Γ/2π).
pub fn hydrodynamic_radius(
    gamma_hz: f64,
    pressure_hpa: f64,
    gas: &GasEnvironment,
    density: f64,
    room_t: f64,
) -> Result<f64> {
    ensure(gamma_hz > 0.0 && pressure_hpa > 0.0, || {
        Error::Domain(format!("need γ > 0 and p > 0, got γ = {gamma_hz} Hz, p = {pressure_hpa} hPa"))
    })?;
    ensure(density > 0.0 && room_t > 0.0 && gas.molar_mass > 0.0, || {
        Error::Domain("density, temperature and molar mass must be positive".into())
    })?;
    let gamma = 2.0 * PI * gamma_hz;
    let p = gas.with_pressure(pressure_hpa)?.pressure_pa();
    Ok(SPHERE_DAMPING_FACTOR / ((2.0 * PI).sqrt() * density)
        * (gas.molar_mass / (AVOGADRO * BOLTZMANN * room_t)).sqrt()
        * p
        / gamma)
}

/// γ (Hz) implied by a hydrodynamic radius; inverse of [`hydrodynamic_radius`].
pub fn damping_for_radius(radius: f64, pressure_hpa: f64, gas: &GasEnvironment, density: f64, room_t: f64) -> Result<f64> {
    ensure(radius > 0.0, || Error::Domain("radius must be positive".into()))?;
    Ok(hydrodynamic_radius(1.0, pressure_hpa, gas, density, room_t)? / radius)
}
