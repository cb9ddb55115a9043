//! Physical constants, gas and particle descriptions, and trap axes.
//!
//! Everything is SI internally. Pressures enter in hPa at the boundary and go
//! through [`hpa_to_pa`], the single conversion site.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const AVOGADRO: f64 = 6.022_140_76e23;
pub const ROOM_TEMPERATURE: f64 = 294.0;
/// Molar mass of dry air in kg/mol.
pub const AIR_MOLAR_MASS: f64 = 0.028_964_7;
/// Mass density of diamond in kg/m³.
pub const DIAMOND_DENSITY: f64 = 3500.0;

/// Converts hPa to Pa.
pub fn hpa_to_pa(pressure_hpa: f64) -> f64 {
    pressure_hpa * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub k_b: f64,
    pub n_a: f64,
    pub room_temperature: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            k_b: BOLTZMANN,
            n_a: AVOGADRO,
            room_temperature: ROOM_TEMPERATURE,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.k_b > 0.0 && self.n_a > 0.0 && self.room_temperature > 0.0,
            || Error::InvalidConfig("physical constants must be strictly positive".into()),
        )
    }

    /// Thermal energy k_B·T0 in joules.
    pub fn thermal_energy(&self) -> f64 {
        self.k_b * self.room_temperature
    }
}

/// Background gas surrounding the particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasEnvironment {
    pub pressure_hpa: f64,
    #[serde(default = "default_molar_mass")]
    pub molar_mass: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_molar_mass() -> f64 {
    AIR_MOLAR_MASS
}

fn default_temperature() -> f64 {
    ROOM_TEMPERATURE
}

pub(crate) fn default_room_temperature() -> f64 {
    ROOM_TEMPERATURE
}

impl GasEnvironment {
    pub fn air(pressure_hpa: f64) -> Result<Self> {
        let gas = Self {
            pressure_hpa,
            molar_mass: AIR_MOLAR_MASS,
            temperature: ROOM_TEMPERATURE,
        };
        gas.validate()?;
        Ok(gas)
    }

    pub fn with_pressure(&self, pressure_hpa: f64) -> Result<Self> {
        let gas = Self {
            pressure_hpa,
            ..*self
        };
        gas.validate()?;
        Ok(gas)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.pressure_hpa > 0.0 && self.molar_mass > 0.0 && self.temperature > 0.0,
            || {
                Error::InvalidConfig(format!(
                    "gas pressure, molar mass and temperature must be positive, got {self:?}"
                ))
            },
        )
    }

    pub fn pressure_pa(&self) -> f64 {
        hpa_to_pa(self.pressure_hpa)
    }

    pub fn molecule_mass(&self) -> f64 {
        self.molar_mass / AVOGADRO
    }

    /// Momentum flux scale `n·m_g·ū/4 = p·√(m_g / 2πk_BT)` of the impinging gas,
    /// in kg/(m²·s). Free-molecular drag on a surface element is this times a
    /// geometric factor.
    pub fn impinging_momentum_flux(&self) -> f64 {
        self.pressure_pa() * (self.molecule_mass() / (2.0 * PI * BOLTZMANN * self.temperature)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParticleShape {
    Sphere { radius: f64 },
    /// Cylinder of radius `radius` and length `length`, symmetry axis along the trap y axis.
    Cylinder { radius: f64, length: f64 },
}

impl ParticleShape {
    pub fn volume(&self) -> f64 {
        match *self {
            ParticleShape::Sphere { radius } => 4.0 / 3.0 * PI * radius.powi(3),
            ParticleShape::Cylinder { radius, length } => PI * radius * radius * length,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ParticleShape::Sphere { radius } => radius > 0.0,
            ParticleShape::Cylinder { radius, length } => radius > 0.0 && length > 0.0,
        };
        ensure(ok && self.volume().is_finite(), || {
            Error::InvalidConfig(format!("particle dimensions must be positive, got {self:?}"))
        })
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct ParticleFields {
    shape: ParticleShape,
    #[serde(default = "default_density")]
    density: f64,
}

fn default_density() -> f64 {
    DIAMOND_DENSITY
}

/// A levitated particle. Mass is derived from shape and density at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParticleFields")]
pub struct ParticleModel {
    shape: ParticleShape,
    density: f64,
    mass: f64,
}

impl TryFrom<ParticleFields> for ParticleModel {
    type Error = Error;

    fn try_from(spec: ParticleFields) -> Result<Self> {
        ParticleModel::new(spec.shape, spec.density)
    }
}

impl ParticleModel {
    pub fn new(shape: ParticleShape, density: f64) -> Result<Self> {
        shape.validate()?;
        ensure(density > 0.0, || {
            Error::InvalidConfig(format!("density must be positive, got {density}"))
        })?;
        Ok(Self {
            shape,
            density,
            mass: density * shape.volume(),
        })
    }

    pub fn diamond_sphere(radius: f64) -> Result<Self> {
        Self::new(ParticleShape::Sphere { radius }, DIAMOND_DENSITY)
    }

    pub fn diamond_cylinder(radius: f64, length: f64) -> Result<Self> {
        Self::new(ParticleShape::Cylinder { radius, length }, DIAMOND_DENSITY)
    }

    pub fn shape(&self) -> ParticleShape {
        self.shape
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisLabel {
    X,
    Y,
}

impl AxisLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisLabel::X => "x",
            AxisLabel::Y => "y",
        }
    }
}

impl fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AxisLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(AxisLabel::X),
            "y" | "Y" => Ok(AxisLabel::Y),
            other => Err(Error::InvalidConfig(format!("unknown axis '{other}'"))),
        }
    }
}

/// One transverse trap axis.
///
/// `stiffness_coefficient` is β in Ω = β·√P (rad/(s·√W)); `detection_gain` is c0
/// in V = c0·P·q (signal units per metre per watt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapAxis {
    pub label: AxisLabel,
    pub stiffness_coefficient: f64,
    pub detection_gain: f64,
}

impl TrapAxis {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.stiffness_coefficient > 0.0 && self.detection_gain > 0.0,
            || Error::InvalidConfig(format!("axis {} needs β > 0 and c0 > 0", self.label)),
        )
    }

    /// Angular trap frequency Ω = β·√P in rad/s.
    pub fn angular_frequency(&self, laser_power_w: f64) -> Result<f64> {
        ensure(laser_power_w >= 0.0, || {
            Error::Domain(format!("laser power must be non-negative, got {laser_power_w} W"))
        })?;
        Ok(self.stiffness_coefficient * laser_power_w.sqrt())
    }

    /// Detection sensitivity c_calib = c0·P.
    pub fn sensitivity(&self, laser_power_w: f64) -> f64 {
        self.detection_gain * laser_power_w
    }
}

/// Trap frequency in Hz at `laser_power_w` watts.
pub fn trap_frequency(axis: &TrapAxis, laser_power_w: f64) -> Result<f64> {
    Ok(axis.angular_frequency(laser_power_w)? / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis() -> TrapAxis {
        TrapAxis {
            label: AxisLabel::X,
            stiffness_coefficient: 2.0 * PI * 1.25e4,
            detection_gain: 1.0,
        }
    }

    #[test]
    fn trap_frequency_examples() {
        assert_eq!(trap_frequency(&axis(), 0.0).unwrap(), 0.0);
        let f1 = trap_frequency(&axis(), 0.01).unwrap();
        let f4 = trap_frequency(&axis(), 0.04).unwrap();
        assert!((f4 / f1 - 2.0).abs() < 1e-15);
        let f = trap_frequency(&axis(), 0.064).unwrap();
        assert!((f - 1.25e4 * 0.064_f64.sqrt()).abs() < 1e-9);
        assert!((f - 3162.28).abs() < 0.01);
    }

    #[test]
    fn negative_power_is_rejected() {
        assert!(matches!(trap_frequency(&axis(), -1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn trap_frequency_strictly_increasing() {
        let mut last = 0.0;
        for i in 1..200 {
            let f = trap_frequency(&axis(), i as f64 * 1e-3).unwrap();
            assert!(f > last);
            last = f;
        }
    }

    #[test]
    fn mass_scaling() {
        let a = ParticleModel::diamond_sphere(50e-9).unwrap();
        let b = ParticleModel::diamond_sphere(100e-9).unwrap();
        assert!((b.mass() / a.mass() / 8.0 - 1.0).abs() < 1e-12);
        let c = ParticleModel::diamond_cylinder(40e-9, 90e-9).unwrap();
        let expected = DIAMOND_DENSITY * PI * 40e-9 * 40e-9 * 90e-9;
        assert!((c.mass() / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(ParticleModel::diamond_sphere(0.0).is_err());
        assert!(ParticleModel::new(ParticleShape::Sphere { radius: 1e-7 }, -1.0).is_err());
        assert!(GasEnvironment::air(0.0).is_err());
        let bad = TrapAxis {
            detection_gain: 0.0,
            ..axis()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pressure_conversion() {
        assert_eq!(hpa_to_pa(45.0), 4500.0);
        assert_eq!(GasEnvironment::air(45.0).unwrap().pressure_pa(), 4500.0);
    }

    #[test]
    fn particle_json_recomputes_mass() {
        let json = r#"{"shape":{"kind":"sphere","radius":5e-8},"density":3500.0,"mass":1.0}"#;
        let p: ParticleModel = serde_json::from_str(json).unwrap();
        assert!((p.mass() - ParticleModel::diamond_sphere(5e-8).unwrap().mass()).abs() < 1e-30);
        let bad = r#"{"shape":{"kind":"sphere","radius":-1.0}}"#;
        assert!(serde_json::from_str::<ParticleModel>(bad).is_err());
    }

    #[test]
    fn defaults() {
        let c = PhysicalConstants::default();
        assert_eq!(c.room_temperature, 294.0);
        c.validate().unwrap();
    }
}
