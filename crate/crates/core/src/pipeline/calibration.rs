//! Zero-power calibration of the detector and centre-of-mass energies.

use serde::{Deserialize, Serialize};

use crate::domain::{AxisLabel, BOLTZMANN};
use crate::error::{ensure, Error, Result};
use crate::fit::{fit_line, mean_and_standard_error, LineFit};
use crate::spectral::PsdFit;
use crate::thermometry::Weighting;

/// Relative tolerance when grouping powers or matching pressures.
const SAME_VALUE: f64 = 1e-9;

pub(crate) fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= SAME_VALUE * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisPsdFit {
    pub axis: AxisLabel,
    pub fit: PsdFit,
}

/// PSD fits of every axis for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSweepPoint {
    pub power_mw: f64,
    pub pressure_hpa: f64,
    pub repetition: usize,
    pub fits: Vec<AxisPsdFit>,
}

impl PowerSweepPoint {
    pub fn fit(&self, axis: AxisLabel) -> Option<&PsdFit> {
        self.fits.iter().find(|f| f.axis == axis).map(|f| &f.fit)
    }

    /// Ã = A/f_q² for a converged, underdamped fit.
    pub fn a_tilde(&self, axis: AxisLabel) -> Option<f64> {
        self.fit(axis)
            .filter(|f| f.converged && !f.overdamped)
            .map(PsdFit::a_tilde)
    }

    pub fn axes(&self) -> Vec<AxisLabel> {
        self.fits.iter().map(|f| f.axis).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCalibration {
    pub axis: AxisLabel,
    /// C_calib = k_B·T_room/Ã(0), in J per (signal²/Hz²).
    pub c_calib: f64,
    pub intercept: f64,
    pub intercept_sigma: f64,
    pub slope: f64,
    pub slope_sigma: f64,
    pub line: LineFit,
    pub powers_mw: Vec<f64>,
    /// Repetition-averaged Ã at each power.
    pub a_tilde_mean: Vec<f64>,
    pub a_tilde_se: Vec<f64>,
    pub repetitions: Vec<usize>,
}

impl AxisCalibration {
    pub fn relative_sigma(&self) -> f64 {
        self.intercept_sigma / self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub pressure_hpa: f64,
    pub room_temperature: f64,
    pub axes: Vec<AxisCalibration>,
}

impl CalibrationResult {
    pub fn axis(&self, axis: AxisLabel) -> Result<&AxisCalibration> {
        self.axes
            .iter()
            .find(|a| a.axis == axis)
            .ok_or_else(|| Error::Calibration(format!("no calibration for axis {axis}")))
    }
}

/// E_com = C_calib·Ã versus power at one pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub axis: AxisLabel,
    pub pressure_hpa: f64,
    pub powers_mw: Vec<f64>,
    pub energies: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Relative uncertainty of C_calib, common to every point.
    pub calibration_rel_sigma: f64,
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| same_value(*a, *b));
    v
}

/// Extrapolates Ã to zero power for each axis and derives C_calib.
///
/// All points must share one pressure. Ã is averaged over repetitions at each
/// power; the line fit is weighted by the standard errors when `weighting` is
/// weighted and every power has at least two repetitions with spread.
pub fn calibrate(sweep: &[PowerSweepPoint], room_t: f64, weighting: Weighting) -> Result<CalibrationResult> {
    ensure(room_t > 0.0, || Error::InvalidConfig("room temperature must be positive".into()))?;
    let first = sweep
        .first()
        .ok_or_else(|| Error::Calibration("empty power sweep".into()))?;
    let pressure = first.pressure_hpa;
    ensure(sweep.iter().all(|p| same_value(p.pressure_hpa, pressure)), || {
        Error::InvalidConfig("calibration sweep mixes pressures; calibrate each pressure separately".into())
    })?;
    let mut labels: Vec<AxisLabel> = sweep.iter().flat_map(|p| p.axes()).collect();
    labels.sort();
    labels.dedup();

    let mut axes = Vec::with_capacity(labels.len());
    for axis in labels {
        let powers = distinct_sorted(
            sweep
                .iter()
                .filter(|p| p.a_tilde(axis).is_some())
                .map(|p| p.power_mw),
        );
        if powers.len() < 3 {
            return Err(Error::Calibration(format!(
                "axis {axis} at {pressure} hPa: {} usable powers, need at least 3 to extrapolate",
                powers.len()
            )));
        }
        let mut means = Vec::with_capacity(powers.len());
        let mut ses = Vec::with_capacity(powers.len());
        let mut reps = Vec::with_capacity(powers.len());
        for &pw in &powers {
            let vals: Vec<f64> = sweep
                .iter()
                .filter(|p| same_value(p.power_mw, pw))
                .filter_map(|p| p.a_tilde(axis))
                .collect();
            let (m, se) = mean_and_standard_error(&vals);
            means.push(m);
            ses.push(se);
            reps.push(vals.len());
        }
        let can_weight = ses.iter().all(|s| s.is_finite() && *s > 0.0);
        let line = match weighting {
            Weighting::Weighted if can_weight => fit_line(&powers, &means, Some(&ses))?,
            _ => fit_line(&powers, &means, None)?,
        };
        if !(line.intercept > 0.0) {
            return Err(Error::Calibration(format!(
                "axis {axis} at {pressure} hPa: extrapolated Ã(0) = {:.4e} is not positive",
                line.intercept
            )));
        }
        if line.intercept_sigma >= line.intercept {
            return Err(Error::Calibration(format!(
                "axis {axis} at {pressure} hPa: Ã(0) = {:.4e} ± {:.4e} is not significant",
                line.intercept, line.intercept_sigma
            )));
        }
        axes.push(AxisCalibration {
            axis,
            c_calib: BOLTZMANN * room_t / line.intercept,
            intercept: line.intercept,
            intercept_sigma: line.intercept_sigma,
            slope: line.slope,
            slope_sigma: line.slope_sigma,
            line,
            powers_mw: powers,
            a_tilde_mean: means,
            a_tilde_se: ses,
            repetitions: reps,
        });
    }
    Ok(CalibrationResult {
        pressure_hpa: pressure,
        room_temperature: room_t,
        axes,
    })
}

/// Centre-of-mass energy C_calib·Ã of one sweep point, in joules.
pub fn com_energy(point: &PowerSweepPoint, calib: &CalibrationResult, axis: AxisLabel) -> Result<f64> {
    ensure(same_value(point.pressure_hpa, calib.pressure_hpa), || {
        Error::InvalidConfig(format!(
            "point at {} hPa cannot use the calibration made at {} hPa",
            point.pressure_hpa, calib.pressure_hpa
        ))
    })?;
    let a = point
        .a_tilde(axis)
        .ok_or_else(|| Error::Fit(format!("axis {axis} has no usable PSD fit at {} mW", point.power_mw)))?;
    Ok(calib.axis(axis)?.c_calib * a)
}

/// Repetition-averaged energies of one axis, from the calibration's own averages.
pub fn energy_series(calib: &CalibrationResult, axis: AxisLabel) -> Result<EnergySeries> {
    let a = calib.axis(axis)?;
    Ok(EnergySeries {
        axis,
        pressure_hpa: calib.pressure_hpa,
        powers_mw: a.powers_mw.clone(),
        energies: a.a_tilde_mean.iter().map(|v| v * a.c_calib).collect(),
        sigmas: a.a_tilde_se.iter().map(|v| v * a.c_calib).collect(),
        calibration_rel_sigma: a.relative_sigma(),
    })
}
