//! Hot Brownian motion in the two-bath picture.
//!
//! Gas molecules arrive at ambient temperature T0 (impinging bath) and leave
//! after partial accommodation at T_em = T0 + α_c·(T_int − T0) (emerging bath).
//! The centre-of-mass temperature along an axis is the friction-weighted mean of
//! the two bath temperatures.
//!
//! Free-molecular drag is computed per surface element: an element with outward
//! normal n̂ moving at V picks up `−Φ·[V + (V·n̂)n̂]` from impinging molecules and
//! `−Φ·(π/2)·√(T_em/T0)·(V·n̂)n̂` from diffusely re-emitted ones, where
//! Φ = p·√(m_g/2πk_BT0) is the impinging momentum flux scale.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{AxisLabel, GasEnvironment, ParticleModel, ParticleShape};
use crate::error::{ensure, Error, Result};
use crate::fit::fit_line;

/// Slope dT_com/dT_int of a sphere at α_c = 1 in the small-heating limit, π/(π+8).
pub const SPHERE_COUPLING: f64 = PI / (PI + 8.0);

/// Coefficient of α²·ΔT²/T0 in the expansion of the sphere T_com, 4π/(π+8)².
pub const SPHERE_QUADRATIC: f64 = 4.0 * PI / ((PI + 8.0) * (PI + 8.0));

/// Internal temperature law T_int = T0 + κ·P/p (P in mW, p in hPa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingLaw {
    /// κ_heat in K·hPa/mW.
    pub kappa_heat: f64,
    #[serde(default = "crate::domain::default_room_temperature")]
    pub t0: f64,
}

impl HeatingLaw {
    pub fn new(kappa_heat: f64, t0: f64) -> Result<Self> {
        let law = Self { kappa_heat, t0 };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.kappa_heat >= 0.0 && self.t0 > 0.0, || {
            Error::InvalidConfig(format!("heating law needs κ ≥ 0 and T0 > 0, got {self:?}"))
        })
    }
}

/// Internal temperature in K for `laser_power_mw` at `pressure_hpa`.
pub fn internal_temperature(law: &HeatingLaw, laser_power_mw: f64, pressure_hpa: f64) -> Result<f64> {
    ensure(pressure_hpa > 0.0, || {
        Error::Domain(format!("pressure must be positive, got {pressure_hpa} hPa"))
    })?;
    ensure(laser_power_mw >= 0.0, || {
        Error::Domain(format!("laser power must be non-negative, got {laser_power_mw} mW"))
    })?;
    Ok(law.t0 + law.kappa_heat * laser_power_mw / pressure_hpa)
}

fn check_bath_inputs(t0: f64, delta_t_int: f64, alpha_c: f64) -> Result<()> {
    ensure(t0 > 0.0, || Error::Domain(format!("T0 must be positive, got {t0}")))?;
    ensure(delta_t_int >= 0.0, || {
        Error::Domain(format!("internal temperature increase must be ≥ 0, got {delta_t_int}"))
    })?;
    ensure(alpha_c >= 0.0, || {
        Error::Domain(format!("accommodation coefficient must be ≥ 0, got {alpha_c}"))
    })
}

/// Accommodation coefficients above one are only meaningful as effective values.
pub fn is_effective_accommodation(alpha_c: f64) -> bool {
    alpha_c > 1.0
}

/// Emerging-gas temperature T0 + α_c·ΔT_int.
pub fn emerging_temperature(t0: f64, delta_t_int: f64, alpha_c: f64) -> f64 {
    t0 + alpha_c * delta_t_int
}

/// Centre-of-mass temperature of a hot sphere, full two-bath expression.
pub fn two_bath_tcom(t0: f64, delta_t_int: f64, alpha_c: f64) -> Result<f64> {
    check_bath_inputs(t0, delta_t_int, alpha_c)?;
    let t_em = emerging_temperature(t0, delta_t_int, alpha_c);
    let w = PI / 8.0;
    Ok((t0.powf(1.5) + w * t_em.powf(1.5)) / (t0.sqrt() + w * t_em.sqrt()))
}

/// First-order expansion T0 + π/(π+8)·α_c·ΔT_int.
pub fn two_bath_tcom_linearized(t0: f64, delta_t_int: f64, alpha_c: f64) -> Result<f64> {
    check_bath_inputs(t0, delta_t_int, alpha_c)?;
    Ok(t0 + SPHERE_COUPLING * alpha_c * delta_t_int)
}

pub fn k_from_alpha(alpha_c: f64) -> Result<f64> {
    ensure(alpha_c >= 0.0, || Error::Domain(format!("α_c must be ≥ 0, got {alpha_c}")))?;
    Ok(alpha_c * PI / (PI + 8.0))
}

pub fn alpha_from_k(k: f64) -> Result<f64> {
    ensure(k >= 0.0, || Error::Domain(format!("K must be ≥ 0, got {k}")))?;
    Ok(k * (PI + 8.0) / PI)
}

/// Gas friction split between the impinging and emerging baths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathPair {
    pub t_impinging: f64,
    pub t_emerging: f64,
    /// rad/s
    pub gamma_impinging: f64,
    /// rad/s
    pub gamma_emerging: f64,
}

impl BathPair {
    pub fn gamma_total(&self) -> f64 {
        self.gamma_impinging + self.gamma_emerging
    }

    /// Friction-weighted temperature, the effective centre-of-mass temperature.
    pub fn weighted_temperature(&self) -> f64 {
        (self.gamma_impinging * self.t_impinging + self.gamma_emerging * self.t_emerging)
            / self.gamma_total()
    }
}

/// Splits `gamma_total` for a sphere so that γ_em/γ_imp = (π/8)·√(T_em/T0).
///
/// This is the split whose weighted temperature equals [`two_bath_tcom`].
pub fn make_bath_pair(t0: f64, t_int: f64, alpha_c: f64, gamma_total: f64) -> Result<BathPair> {
    ensure(gamma_total > 0.0, || {
        Error::Domain(format!("total damping must be positive, got {gamma_total}"))
    })?;
    let delta = t_int - t0;
    check_bath_inputs(t0, delta, alpha_c)?;
    let t_em = emerging_temperature(t0, delta, alpha_c);
    let ratio = PI / 8.0 * (t_em / t0).sqrt();
    let gamma_impinging = gamma_total / (1.0 + ratio);
    Ok(BathPair {
        t_impinging: t0,
        t_emerging: t_em,
        gamma_impinging,
        gamma_emerging: gamma_total - gamma_impinging,
    })
}

/// Free-molecular drag along one direction, split into impinging and emerging parts.
///
/// `emerging_reference` is the emerging-bath rate when T_em = T0; it scales as √(T_em/T0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDrag {
    pub impinging: f64,
    pub emerging_reference: f64,
    pub t0: f64,
}

impl AxisDrag {
    pub fn bath_pair(&self, t_int: f64, alpha_c: f64) -> Result<BathPair> {
        let delta = t_int - self.t0;
        check_bath_inputs(self.t0, delta, alpha_c)?;
        let t_em = emerging_temperature(self.t0, delta, alpha_c);
        Ok(BathPair {
            t_impinging: self.t0,
            t_emerging: t_em,
            gamma_impinging: self.impinging,
            gamma_emerging: self.emerging_reference * (t_em / self.t0).sqrt(),
        })
    }
}

/// Drag on a sphere.
pub fn sphere_drag(radius: f64, mass: f64, gas: &GasEnvironment) -> AxisDrag {
    let flux = gas.impinging_momentum_flux();
    let impinging = flux * 16.0 * PI / 3.0 * radius * radius / mass;
    AxisDrag {
        impinging,
        emerging_reference: impinging * PI / 8.0,
        t0: gas.temperature,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderAxis {
    Parallel,
    Perpendicular,
}

fn cylinder_axis_drag(radius: f64, length: f64, mass: f64, gas: &GasEnvironment, axis: CylinderAxis) -> AxisDrag {
    let scale = gas.impinging_momentum_flux() * PI * radius / mass;
    // areas divided by πR
    let (impinging, emerging) = match axis {
        CylinderAxis::Parallel => (4.0 * radius + 2.0 * length, PI * radius),
        CylinderAxis::Perpendicular => (2.0 * radius + 3.0 * length, PI / 2.0 * length),
    };
    AxisDrag {
        impinging: scale * impinging,
        emerging_reference: scale * emerging,
        t0: gas.temperature,
    }
}

/// Drag along a trap axis. Cylinders are oriented with their symmetry axis along y.
pub fn particle_axis_drag(particle: &ParticleModel, gas: &GasEnvironment, axis: AxisLabel) -> AxisDrag {
    match particle.shape() {
        ParticleShape::Sphere { radius } => sphere_drag(radius, particle.mass(), gas),
        ParticleShape::Cylinder { radius, length } => {
            let caxis = match axis {
                AxisLabel::X => CylinderAxis::Perpendicular,
                AxisLabel::Y => CylinderAxis::Parallel,
            };
            cylinder_axis_drag(radius, length, particle.mass(), gas, caxis)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderDrag {
    pub parallel: BathPair,
    pub perpendicular: BathPair,
    /// rad/s
    pub gamma_parallel: f64,
    /// rad/s
    pub gamma_perpendicular: f64,
    /// g = Γ⊥/Γ∥
    pub anisotropy: f64,
}

fn cylinder_dims(particle: &ParticleModel) -> Result<(f64, f64)> {
    match particle.shape() {
        ParticleShape::Cylinder { radius, length } => Ok((radius, length)),
        ParticleShape::Sphere { .. } => Err(Error::Shape(
            "cylinder drag requested for a sphere; use the sphere model".into(),
        )),
    }
}

/// Drag rates of a cylinder whose surface is at `surface_t`, with full accommodation.
pub fn cylinder_drag(particle: &ParticleModel, gas: &GasEnvironment, surface_t: f64) -> Result<CylinderDrag> {
    let (radius, length) = cylinder_dims(particle)?;
    gas.validate()?;
    let par = cylinder_axis_drag(radius, length, particle.mass(), gas, CylinderAxis::Parallel)
        .bath_pair(surface_t, 1.0)?;
    let perp = cylinder_axis_drag(radius, length, particle.mass(), gas, CylinderAxis::Perpendicular)
        .bath_pair(surface_t, 1.0)?;
    Ok(CylinderDrag {
        parallel: par,
        perpendicular: perp,
        gamma_parallel: par.gamma_total(),
        gamma_perpendicular: perp.gamma_total(),
        anisotropy: perp.gamma_total() / par.gamma_total(),
    })
}

/// Internal-temperature sweep used to extract K as a slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSweep {
    /// Largest ΔT_int in K; the sweep runs from 0.
    pub max_delta_t: f64,
    pub points: usize,
}

impl Default for TemperatureSweep {
    fn default() -> Self {
        Self {
            max_delta_t: 2.0,
            points: 11,
        }
    }
}

impl TemperatureSweep {
    pub fn values(&self) -> Vec<f64> {
        if self.points < 2 {
            return vec![0.0; self.points];
        }
        (0..self.points)
            .map(|i| self.max_delta_t * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

fn slope_over_sweep(sweep: &TemperatureSweep, tcom: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let dts = sweep.values();
    let t = dts.iter().map(|&d| tcom(d)).collect::<Result<Vec<_>>>()?;
    Ok(fit_line(&dts, &t, None)?.slope)
}

/// K along a cylinder symmetry axis: slope of T_com against T_int over `sweep`, at α_c = 1.
pub fn cylinder_k(
    particle: &ParticleModel,
    gas: &GasEnvironment,
    axis: CylinderAxis,
    sweep: &TemperatureSweep,
) -> Result<f64> {
    let (radius, length) = cylinder_dims(particle)?;
    gas.validate()?;
    let drag = cylinder_axis_drag(radius, length, particle.mass(), gas, axis);
    slope_over_sweep(sweep, |d| Ok(drag.bath_pair(drag.t0 + d, 1.0)?.weighted_temperature()))
}

/// Sphere K by the same sweep procedure as [`cylinder_k`].
pub fn sphere_k(t0: f64, sweep: &TemperatureSweep) -> Result<f64> {
    slope_over_sweep(sweep, |d| two_bath_tcom(t0, d, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderKPoint {
    pub radius: f64,
    pub length: f64,
    pub anisotropy: f64,
    pub k_parallel: f64,
    pub k_perpendicular: f64,
    pub k_sphere: f64,
}

/// K along both cylinder axes as the length varies at fixed radius.
pub fn cylinder_shape_scan(
    radius: f64,
    lengths: &[f64],
    density: f64,
    gas: &GasEnvironment,
    sweep: &TemperatureSweep,
) -> Result<Vec<CylinderKPoint>> {
    let k_sphere = sphere_k(gas.temperature, sweep)?;
    lengths
        .iter()
        .map(|&length| {
            let p = ParticleModel::new(ParticleShape::Cylinder { radius, length }, density)?;
            let drag = cylinder_drag(&p, gas, gas.temperature)?;
            Ok(CylinderKPoint {
                radius,
                length,
                anisotropy: drag.anisotropy,
                k_parallel: cylinder_k(&p, gas, CylinderAxis::Parallel, sweep)?,
                k_perpendicular: cylinder_k(&p, gas, CylinderAxis::Perpendicular, sweep)?,
                k_sphere,
            })
        })
        .collect()
}
