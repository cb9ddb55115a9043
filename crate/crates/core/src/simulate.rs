//! Forward model: detector traces from two-bath Langevin dynamics and NV ESR
//! spectra from the internal heating law.
//!
//! Each axis obeys m·q̈ = −mΩ²q − mΓq̇ + ξ(t) with Γ = Γ_imp + Γ_em and
//! ⟨ξ(t)ξ(t')⟩ = 2mΓk_B·T_eff·δ(t−t'), where T_eff is the friction-weighted bath
//! temperature plus any injected anomalous heating. The default integrator
//! samples the exact Gaussian transition of this linear system, so there is no
//! timestep bias. A BAOAB splitting integrator is available as a cross-check.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{trap_frequency, AxisLabel, GasEnvironment, ParticleModel, TrapAxis, BOLTZMANN};
use crate::error::{ensure, Error, Result};
use crate::thermometry::{unit_lorentzian, EsrSpectrum, ZfsLaw};
use crate::twobath::{internal_temperature, particle_axis_drag, HeatingLaw};

/// Extra white force noise on one axis, standing in for unidentified heating.
///
/// One-sided force PSD: `extra_force_psd_per_mw · P · (p_ref/p)^n` in N²/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyInjection {
    pub axis: AxisLabel,
    pub extra_force_psd_per_mw: f64,
    #[serde(default = "default_reference_pressure")]
    pub reference_pressure_hpa: f64,
    #[serde(default = "default_pressure_exponent")]
    pub pressure_exponent: f64,
}

fn default_reference_pressure() -> f64 {
    100.0
}

fn default_pressure_exponent() -> f64 {
    1.0
}

impl AnomalyInjection {
    pub fn force_psd(&self, power_mw: f64, pressure_hpa: f64) -> f64 {
        self.extra_force_psd_per_mw
            * power_mw
            * (self.reference_pressure_hpa / pressure_hpa).powf(self.pressure_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Exact,
    Splitting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Sample interval in s.
    pub dt: f64,
    /// Trace length in s.
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    pub axes: Vec<TrapAxis>,
    pub laser_power_mw: f64,
    pub gas: GasEnvironment,
    pub particle: ParticleModel,
    pub heating: HeatingLaw,
    pub alpha_c: f64,
    #[serde(default)]
    pub anomaly: Option<AnomalyInjection>,
    /// One-sided white detector noise PSD in signal²/Hz.
    #[serde(default)]
    pub detector_noise_psd: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

/// Largest f_q·dt accepted by [`SimulationConfig::validate`].
pub const MAX_FREQUENCY_STEP: f64 = 0.05;

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Error::InvalidConfig(m);
        ensure(self.dt > 0.0 && self.dt.is_finite(), || invalid(format!("dt must be positive, got {}", self.dt)))?;
        ensure(self.duration >= 1000.0 * self.dt, || {
            invalid(format!(
                "duration {} s is shorter than 1000 samples of {} s",
                self.duration, self.dt
            ))
        })?;
        ensure(!self.axes.is_empty(), || invalid("at least one axis is required".into()))?;
        for (i, a) in self.axes.iter().enumerate() {
            a.validate()?;
            ensure(self.axes[..i].iter().all(|b| b.label != a.label), || {
                invalid(format!("axis {} listed twice", a.label))
            })?;
        }
        ensure(self.laser_power_mw > 0.0, || {
            invalid(format!("laser power must be positive, got {} mW", self.laser_power_mw))
        })?;
        ensure(self.alpha_c >= 0.0, || invalid("alpha_c must be ≥ 0".into()))?;
        ensure(self.detector_noise_psd >= 0.0, || invalid("detector noise PSD must be ≥ 0".into()))?;
        self.gas.validate()?;
        self.heating.validate()?;
        if let Some(a) = &self.anomaly {
            ensure(
                a.extra_force_psd_per_mw >= 0.0 && a.reference_pressure_hpa > 0.0,
                || invalid("anomaly needs a non-negative PSD and positive reference pressure".into()),
            )?;
        }
        for a in &self.axes {
            let fq = trap_frequency(a, self.laser_power_mw * 1e-3)?;
            if fq * self.dt >= MAX_FREQUENCY_STEP {
                return Err(Error::Unstable(format!(
                    "axis {}: f_q·dt = {:.3} ≥ {MAX_FREQUENCY_STEP}; reduce dt",
                    a.label,
                    fq * self.dt
                )));
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Ground-truth parameters of one simulated axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisTruth {
    pub label: AxisLabel,
    pub trap_frequency_hz: f64,
    /// Reduced damping Γ/2π in Hz.
    pub gamma_hz: f64,
    /// Integrated signal power ⟨V²⟩.
    pub integrated_power: f64,
    pub t_int: f64,
    /// Two-bath centre-of-mass temperature.
    pub t_com: f64,
    /// Temperature driving the motion, including injected anomalies.
    pub t_effective: f64,
    pub mass: f64,
    /// c_calib = c0·P, signal per metre.
    pub sensitivity: f64,
}

impl AxisTruth {
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.trap_frequency_hz
    }

    pub fn gamma_rad(&self) -> f64 {
        2.0 * PI * self.gamma_hz
    }

    /// A/f_q², the power-normalised integrated PSD.
    pub fn a_tilde(&self) -> f64 {
        self.integrated_power / (self.trap_frequency_hz * self.trap_frequency_hz)
    }
}

/// Physics behind each simulated axis, without generating noise.
pub fn ground_truth(config: &SimulationConfig) -> Result<Vec<AxisTruth>> {
    let p_hpa = config.gas.pressure_hpa;
    let t_int = internal_temperature(&config.heating, config.laser_power_mw, p_hpa)?;
    let power_w = config.laser_power_mw * 1e-3;
    let mass = config.particle.mass();
    config
        .axes
        .iter()
        .map(|axis| {
            let omega = axis.angular_frequency(power_w)?;
            let mut gas = config.gas;
            gas.temperature = config.heating.t0;
            let bath = particle_axis_drag(&config.particle, &gas, axis.label).bath_pair(t_int, config.alpha_c)?;
            let gamma = bath.gamma_total();
            let t_com = bath.weighted_temperature();
            let extra = match &config.anomaly {
                Some(a) if a.axis == axis.label => {
                    a.force_psd(config.laser_power_mw, p_hpa) / (4.0 * mass * gamma * BOLTZMANN)
                }
                _ => 0.0,
            };
            let t_eff = t_com + extra;
            let sens = axis.sensitivity(power_w);
            Ok(AxisTruth {
                label: axis.label,
                trap_frequency_hz: omega / (2.0 * PI),
                gamma_hz: gamma / (2.0 * PI),
                integrated_power: sens * sens * BOLTZMANN * t_eff / (mass * omega * omega),
                t_int,
                t_com,
                t_effective: t_eff,
                mass,
                sensitivity: sens,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    #[serde(rename = "power_mW")]
    pub power_mw: f64,
    #[serde(rename = "pressure_hPa")]
    pub pressure_hpa: f64,
    pub dt_s: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<AxisTruth>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub label: AxisLabel,
    pub samples: Vec<f64>,
}

/// Sampled detector signal V_q = c_calib·q per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub channels: Vec<Channel>,
    pub metadata: TraceMetadata,
}

impl TimeTrace {
    pub fn dt(&self) -> f64 {
        self.metadata.dt_s
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, label: AxisLabel) -> Result<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.label == label)
            .map(|c| c.samples.as_slice())
            .ok_or_else(|| Error::InvalidConfig(format!("trace has no {label} channel")))
    }

    pub fn truth(&self, label: AxisLabel) -> Option<&AxisTruth> {
        self.metadata.ground_truth.as_ref()?.iter().find(|t| t.label == label)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.metadata.dt_s > 0.0, || Error::Format("trace dt must be positive".into()))?;
        let n = self.len();
        ensure(self.channels.iter().all(|c| c.samples.len() == n), || {
            Error::Format("trace channels differ in length".into())
        })?;
        ensure(
            self.channels.iter().all(|c| c.samples.iter().all(|v| v.is_finite())),
            || Error::Format("trace contains non-finite samples".into()),
        )
    }
}

/// Mixes a base seed with indices into an independent 64-bit seed (SplitMix64 finaliser).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

fn axis_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One-step transition of the dimensionless state (q/σ_q, v/σ_v).
struct ExactStep {
    pqq: f64,
    pqv: f64,
    pvq: f64,
    pvv: f64,
    l11: f64,
    l21: f64,
    l22: f64,
}

impl ExactStep {
    fn new(omega: f64, gamma: f64, dt: f64) -> Self {
        let a = 0.5 * gamma;
        let w2 = omega * omega - a * a;
        let (c, s) = if w2 > 0.0 {
            let w = w2.sqrt();
            ((w * dt).cos(), (w * dt).sin() / w)
        } else if w2 < 0.0 {
            let k = (-w2).sqrt();
            ((k * dt).cosh(), (k * dt).sinh() / k)
        } else {
            (1.0, dt)
        };
        let e = (-a * dt).exp();
        let pqq = e * (c + a * s);
        let pqv = e * s * omega;
        let pvq = -e * omega * s;
        let pvv = e * (c - a * s);
        let sqq = (1.0 - pqq * pqq - pqv * pqv).max(0.0);
        let sqv = -(pqq * pvq + pqv * pvv);
        let svv = (1.0 - pvq * pvq - pvv * pvv).max(0.0);
        let l11 = sqq.sqrt();
        let l21 = if l11 > 0.0 { sqv / l11 } else { 0.0 };
        let l22 = (svv - l21 * l21).max(0.0).sqrt();
        Self {
            pqq,
            pqv,
            pvq,
            pvv,
            l11,
            l21,
            l22,
        }
    }
}

/// Dimensionless position samples q/σ_q for one axis.
fn integrate_axis(
    omega: f64,
    gamma: f64,
    dt: f64,
    n: usize,
    integrator: Integrator,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut q = normal(rng);
    let mut v = normal(rng);
    let mut out = Vec::with_capacity(n);
    match integrator {
        Integrator::Exact => {
            let st = ExactStep::new(omega, gamma, dt);
            for _ in 0..n {
                out.push(q);
                let z1 = normal(rng);
                let z2 = normal(rng);
                let nq = st.pqq * q + st.pqv * v + st.l11 * z1;
                let nv = st.pvq * q + st.pvv * v + st.l21 * z1 + st.l22 * z2;
                q = nq;
                v = nv;
            }
        }
        Integrator::Splitting => {
            // BAOAB in units where σ_q = σ_v = 1: q̇ = Ω·v, v̇ = −Ω·q − Γv + noise
            if omega * dt >= 2.0 {
                return Err(Error::Unstable(format!(
                    "splitting integrator needs Ω·dt < 2, got {:.3}",
                    omega * dt
                )));
            }
            let c1 = (-gamma * dt).exp();
            let c2 = (1.0 - c1 * c1).sqrt();
            let h = 0.5 * dt * omega;
            for _ in 0..n {
                out.push(q);
                v -= h * q;
                q += h * v;
                v = c1 * v + c2 * normal(rng);
                q += h * v;
                v -= h * q;
            }
        }
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Unstable("integration produced non-finite values".into()));
    }
    Ok(out)
}

/// Generates a detector trace for every configured axis. Deterministic in `config.seed`.
pub fn simulate_trace(config: &SimulationConfig) -> Result<TimeTrace> {
    config.validate()?;
    let truth = ground_truth(config)?;
    let n = config.sample_count();
    let mut channels = Vec::with_capacity(truth.len());
    for (idx, t) in truth.iter().enumerate() {
        let mut rng = axis_rng(config.seed, 2 * idx as u64);
        let unit = integrate_axis(t.omega(), t.gamma_rad(), config.dt, n, config.integrator, &mut rng)?;
        let sigma_v = t.sensitivity * (BOLTZMANN * t.t_effective / (t.mass * t.omega() * t.omega())).sqrt();
        let mut samples: Vec<f64> = unit.into_iter().map(|x| sigma_v * x).collect();
        if config.detector_noise_psd > 0.0 {
            let mut noise_rng = axis_rng(config.seed, 2 * idx as u64 + 1);
            let sd = (config.detector_noise_psd / (2.0 * config.dt)).sqrt();
            for s in &mut samples {
                *s += sd * normal(&mut noise_rng);
            }
        }
        channels.push(Channel {
            label: t.label,
            samples,
        });
    }
    let trace = TimeTrace {
        channels,
        metadata: TraceMetadata {
            power_mw: config.laser_power_mw,
            pressure_hpa: config.gas.pressure_hpa,
            dt_s: config.dt,
            seed: config.seed,
            repetition: None,
            ground_truth: Some(truth),
        },
    };
    trace.validate()?;
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyScan {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl FrequencyScan {
    pub fn frequencies(&self) -> Vec<f64> {
        let step = (self.stop_hz - self.start_hz) / (self.points.max(2) - 1) as f64;
        (0..self.points).map(|i| self.start_hz + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsrSimConfig {
    pub scan: FrequencyScan,
    /// Strain splitting E in Hz.
    pub strain_e_hz: f64,
    pub contrast: f64,
    /// Dip FWHM in Hz.
    pub linewidth_hz: f64,
    /// Mean counts per point off resonance.
    pub baseline_counts: f64,
    /// Poisson counting noise; `false` gives the noiseless spectrum.
    pub shot_noise: bool,
    /// Strain-induced shift of D in Hz, added to D(T_int).
    #[serde(default)]
    pub zfs_offset_hz: f64,
}

impl Default for EsrSimConfig {
    fn default() -> Self {
        Self {
            scan: FrequencyScan {
                start_hz: 2.830e9,
                stop_hz: 2.900e9,
                points: 201,
            },
            strain_e_hz: 5e6,
            contrast: 0.05,
            linewidth_hz: 8e6,
            baseline_counts: 1e5,
            shot_noise: true,
            zfs_offset_hz: 0.0,
        }
    }
}

/// Synthetic ESR spectrum of a particle heated according to `heating`.
pub fn simulate_esr(
    heating: &HeatingLaw,
    law: &ZfsLaw,
    power_mw: f64,
    pressure_hpa: f64,
    config: &EsrSimConfig,
    seed: u64,
) -> Result<EsrSpectrum> {
    ensure(config.linewidth_hz > 0.0, || Error::InvalidConfig("ESR linewidth must be positive".into()))?;
    ensure(config.contrast > 0.0 && config.contrast < 1.0, || {
        Error::InvalidConfig("ESR contrast must lie in (0, 1)".into())
    })?;
    ensure(config.baseline_counts > 0.0 && config.strain_e_hz >= 0.0, || {
        Error::InvalidConfig("ESR baseline must be positive and strain non-negative".into())
    })?;
    ensure(config.scan.points >= 2 && config.scan.stop_hz > config.scan.start_hz, || {
        Error::InvalidConfig("ESR scan must have increasing bounds and ≥ 2 points".into())
    })?;
    let t_int = internal_temperature(heating, power_mw, pressure_hpa)?;
    let d = law.d_of_t(t_int)? + config.zfs_offset_hz;
    let lo = d - config.strain_e_hz - config.linewidth_hz;
    let hi = d + config.strain_e_hz + config.linewidth_hz;
    ensure(config.scan.start_hz <= lo && config.scan.stop_hz >= hi, || {
        Error::InvalidConfig(format!(
            "scan [{}, {}] Hz does not cover both dips around D = {d} Hz",
            config.scan.start_hz, config.scan.stop_hz
        ))
    })?;
    let frequencies = config.scan.frequencies();
    let mut rng = axis_rng(seed, 0);
    let counts = frequencies
        .iter()
        .map(|&f| {
            let mean = config.baseline_counts
                * (1.0
                    - config.contrast * unit_lorentzian(f, d - config.strain_e_hz, config.linewidth_hz)
                    - config.contrast * unit_lorentzian(f, d + config.strain_e_hz, config.linewidth_hz));
            if config.shot_noise {
                Poisson::new(mean).map(|p| p.sample(&mut rng)).unwrap_or(0.0)
            } else {
                mean
            }
        })
        .collect();
    Ok(EsrSpectrum {
        frequencies,
        counts,
        power_mw,
        pressure_hpa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ParticleShape;
    use crate::thermometry::fit_esr;
    use crate::twobath::two_bath_tcom;

    pub(crate) fn base_config() -> SimulationConfig {
        SimulationConfig {
            dt: 4e-7,
            duration: 0.05,
            seed: 7,
            axes: vec![
                TrapAxis {
                    label: AxisLabel::X,
                    stiffness_coefficient: 2.0 * PI * 2.6e5,
                    detection_gain: 1e9,
                },
                TrapAxis {
                    label: AxisLabel::Y,
                    stiffness_coefficient: 2.0 * PI * 2.2e5,
                    detection_gain: 1.3e9,
                },
            ],
            laser_power_mw: 100.0,
            gas: GasEnvironment::air(45.0).unwrap(),
            particle: ParticleModel::diamond_sphere(150e-9).unwrap(),
            heating: HeatingLaw::new(17.0, 294.0).unwrap(),
            alpha_c: 1.0,
            anomaly: None,
            detector_noise_psd: 0.0,
            integrator: Integrator::Exact,
        }
    }

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = base_config();
        let a = simulate_trace(&cfg).unwrap();
        let b = simulate_trace(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 8;
        assert_ne!(a.channels[0].samples, simulate_trace(&other).unwrap().channels[0].samples);
    }

    #[test]
    fn zero_anomaly_is_bit_identical() {
        let cfg = base_config();
        let mut with = cfg.clone();
        with.anomaly = Some(AnomalyInjection {
            axis: AxisLabel::Y,
            extra_force_psd_per_mw: 0.0,
            reference_pressure_hpa: 100.0,
            pressure_exponent: 1.0,
        });
        let a = simulate_trace(&cfg).unwrap();
        let b = simulate_trace(&with).unwrap();
        assert_eq!(a.channels, b.channels);
    }

    #[test]
    fn sample_count_and_validation() {
        let cfg = base_config();
        let t = simulate_trace(&cfg).unwrap();
        assert_eq!(t.len(), 125_000);
        assert_eq!(t.channels.len(), 2);

        let mut short = cfg.clone();
        short.duration = 100.0 * cfg.dt;
        assert!(matches!(simulate_trace(&short), Err(Error::InvalidConfig(_))));

        let mut coarse = cfg.clone();
        coarse.dt = 2e-6;
        coarse.duration = 1.0;
        assert!(matches!(simulate_trace(&coarse), Err(Error::Unstable(_))));
    }

    #[test]
    fn ground_truth_matches_two_bath() {
        let cfg = base_config();
        let truth = ground_truth(&cfg).unwrap();
        let expected = two_bath_tcom(294.0, 17.0 * 100.0 / 45.0, 1.0).unwrap();
        for t in &truth {
            assert!((t.t_com / expected - 1.0).abs() < 1e-12);
            assert!(t.gamma_hz < t.trap_frequency_hz);
        }
    }

    #[test]
    fn a_tilde_power_independent_without_heating() {
        let mut cfg = base_config();
        cfg.alpha_c = 0.0;
        let a = ground_truth(&cfg).unwrap()[0].a_tilde();
        cfg.laser_power_mw = 30.0;
        let b = ground_truth(&cfg).unwrap()[0].a_tilde();
        assert!((a / b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_and_splitting_variances_agree() {
        let mut cfg = base_config();
        cfg.duration = 0.2;
        let exact = simulate_trace(&cfg).unwrap();
        cfg.integrator = Integrator::Splitting;
        let split = simulate_trace(&cfg).unwrap();
        let truth = exact.truth(AxisLabel::X).unwrap().integrated_power;
        let ve = variance(exact.channel(AxisLabel::X).unwrap());
        let vs = variance(split.channel(AxisLabel::X).unwrap());
        // ΓT ≈ 1.3e4 energy correlation times, relative SE ≈ 1%
        assert!((ve / truth - 1.0).abs() < 0.05, "{}", ve / truth);
        assert!((vs / truth - 1.0).abs() < 0.05, "{}", vs / truth);
    }

    #[test]
    fn stationarity_halves() {
        let mut cfg = base_config();
        cfg.duration = 0.4;
        let t = simulate_trace(&cfg).unwrap();
        let x = t.channel(AxisLabel::X).unwrap();
        let (a, b) = x.split_at(x.len() / 2);
        let r = variance(a) / variance(b);
        assert!((r - 1.0).abs() < 0.06, "{r}");
    }

    #[test]
    fn cylinder_axes_differ() {
        let mut cfg = base_config();
        cfg.particle = ParticleModel::new(
            ParticleShape::Cylinder {
                radius: 100e-9,
                length: 400e-9,
            },
            3500.0,
        )
        .unwrap();
        let truth = ground_truth(&cfg).unwrap();
        assert!(truth[0].gamma_hz > truth[1].gamma_hz);
        assert!(truth[0].t_com > truth[1].t_com);
    }

    #[test]
    fn seeds_are_mixed() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(5, &[3]), derive_seed(5, &[3]));
    }

    fn synthetic_law() -> ZfsLaw {
        ZfsLaw::new(vec![2.9e9, -5.0e4, -100.0, 0.05], 200.0, 800.0, "synthetic").unwrap()
    }

    fn esr_config() -> EsrSimConfig {
        let law = synthetic_law();
        let d = law.d_of_t(294.0).unwrap();
        EsrSimConfig {
            scan: FrequencyScan {
                start_hz: d - 60e6,
                stop_hz: d + 30e6,
                points: 181,
            },
            ..EsrSimConfig::default()
        }
    }

    #[test]
    fn esr_zero_strain_single_dip() {
        let law = synthetic_law();
        let heating = HeatingLaw::new(17.0, 294.0).unwrap();
        let mut cfg = esr_config();
        cfg.strain_e_hz = 0.0;
        cfg.shot_noise = false;
        let s = simulate_esr(&heating, &law, 0.0, 45.0, &cfg, 1).unwrap();
        let imin = (0..s.counts.len()).min_by(|&a, &b| s.counts[a].total_cmp(&s.counts[b])).unwrap();
        let d = law.d_of_t(294.0).unwrap();
        let step = s.frequencies[1] - s.frequencies[0];
        assert!((s.frequencies[imin] - d).abs() <= step);
        let fit = fit_esr(&s).unwrap();
        assert!(fit.single_dip);
        assert!((fit.d / d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn esr_heating_lowers_d() {
        let law = synthetic_law();
        let heating = HeatingLaw::new(17.0, 294.0).unwrap();
        let mut cfg = esr_config();
        cfg.shot_noise = false;
        let cold = fit_esr(&simulate_esr(&heating, &law, 20.0, 45.0, &cfg, 1).unwrap()).unwrap();
        let hot = fit_esr(&simulate_esr(&heating, &law, 120.0, 45.0, &cfg, 1).unwrap()).unwrap();
        assert!(hot.d < cold.d);
        let expected = law.d_of_t(294.0 + 17.0 * 120.0 / 45.0).unwrap();
        assert!((hot.d / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn esr_scan_must_cover_dips() {
        let law = synthetic_law();
        let heating = HeatingLaw::new(17.0, 294.0).unwrap();
        let mut cfg = esr_config();
        cfg.scan.stop_hz = law.d_of_t(294.0).unwrap();
        assert!(simulate_esr(&heating, &law, 0.0, 45.0, &cfg, 1).is_err());
    }

    #[test]
    fn esr_deterministic() {
        let law = synthetic_law();
        let heating = HeatingLaw::new(17.0, 294.0).unwrap();
        let cfg = esr_config();
        let a = simulate_esr(&heating, &law, 50.0, 45.0, &cfg, 9).unwrap();
        let b = simulate_esr(&heating, &law, 50.0, 45.0, &cfg, 9).unwrap();
        assert_eq!(a, b);
    }
}
