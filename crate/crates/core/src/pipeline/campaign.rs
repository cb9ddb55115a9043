//! Full powers × pressures × repetitions campaigns, simulated or read from disk.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    AxisLabel, GasEnvironment, ParticleModel, TrapAxis, AIR_MOLAR_MASS, ROOM_TEMPERATURE,
};
use crate::error::{ensure, Error, Result};
use crate::fit::mean_and_standard_error;
use crate::io;
use crate::pipeline::calibration::{calibrate, energy_series, same_value, AxisPsdFit, CalibrationResult, EnergySeries, PowerSweepPoint};
use crate::pipeline::estimate::{
    build_estimate, extract_k, hydrodynamic_radius, HbmEstimate, KEstimate, OverheatingThresholds,
    TemperatureSeries,
};
use crate::simulate::{
    derive_seed, simulate_esr, simulate_trace, AnomalyInjection, EsrSimConfig, Integrator, SimulationConfig,
    TimeTrace,
};
use crate::spectral::{fit_psd, welch_psd, PsdFitOptions, WelchOptions};
use crate::thermometry::{
    fit_esr, fit_heating_law, temperature_from_esr, EsrFit, EsrSpectrum, HeatingFit, HeatingPoint, Weighting,
    ZfsLaw,
};
use crate::twobath::{CylinderKPoint, HeatingLaw};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSettings {
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub detector_noise_psd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Simulate,
    /// A directory holding `traces/` and `esr/` CSV files with sidecars.
    Ingest { directory: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pressures_hpa: Vec<f64>,
    #[serde(default)]
    pub powers_mw: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub trace: TraceSettings,
    pub axes: Vec<TrapAxis>,
    pub particle: ParticleModel,
    #[serde(default = "default_molar_mass")]
    pub gas_molar_mass: f64,
    pub heating: HeatingLaw,
    pub alpha_c: f64,
    #[serde(default)]
    pub anomaly: Option<AnomalyInjection>,
    #[serde(default)]
    pub welch: WelchOptions,
    #[serde(default)]
    pub psd_fit: PsdFitOptions,
    #[serde(default)]
    pub esr: EsrSimConfig,
    #[serde(default = "default_esr_repetitions")]
    pub esr_repetitions: usize,
    #[serde(default = "ZfsLaw::toyli")]
    pub zfs_law: ZfsLaw,
    #[serde(default = "default_room")]
    pub room_temperature: f64,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub thresholds: OverheatingThresholds,
    #[serde(default)]
    pub source: DataSource,
    /// When set, PSDs, ESR spectra and (optionally) traces are written here.
    #[serde(default)]
    pub artifacts_dir: Option<PathBuf>,
    #[serde(default)]
    pub persist_traces: bool,
}

fn default_repetitions() -> usize {
    10
}

fn default_esr_repetitions() -> usize {
    1
}

fn default_molar_mass() -> f64 {
    AIR_MOLAR_MASS
}

fn default_room() -> f64 {
    ROOM_TEMPERATURE
}

impl CampaignConfig {
    /// A 150 nm diamond sphere at {45, 60, 80, 100} hPa, 30–150 mW, ten repetitions,
    /// κ = 17 K·hPa/mW and α_c = 1.
    pub fn standard() -> Self {
        Self {
            seed: 1,
            pressures_hpa: vec![45.0, 60.0, 80.0, 100.0],
            powers_mw: vec![30.0, 60.0, 90.0, 120.0, 150.0],
            repetitions: 10,
            trace: TraceSettings {
                dt: 4e-7,
                duration: 1.0,
                integrator: Integrator::Exact,
                detector_noise_psd: 0.0,
            },
            axes: vec![
                TrapAxis {
                    label: AxisLabel::X,
                    stiffness_coefficient: 2.0 * PI * 1e5 / 0.15_f64.sqrt(),
                    detection_gain: 1e9,
                },
                TrapAxis {
                    label: AxisLabel::Y,
                    stiffness_coefficient: 2.0 * PI * 8.5e4 / 0.15_f64.sqrt(),
                    detection_gain: 1.2e9,
                },
            ],
            particle: ParticleModel::diamond_sphere(150e-9).expect("positive radius"),
            gas_molar_mass: AIR_MOLAR_MASS,
            heating: HeatingLaw {
                kappa_heat: 17.0,
                t0: ROOM_TEMPERATURE,
            },
            alpha_c: 1.0,
            anomaly: None,
            welch: WelchOptions::default(),
            psd_fit: PsdFitOptions::default(),
            esr: EsrSimConfig {
                zfs_offset_hz: 4e5,
                ..EsrSimConfig::default()
            },
            esr_repetitions: 1,
            zfs_law: ZfsLaw::toyli(),
            room_temperature: ROOM_TEMPERATURE,
            weighting: Weighting::Weighted,
            thresholds: OverheatingThresholds::default(),
            source: DataSource::Simulate,
            artifacts_dir: None,
            persist_traces: false,
        }
    }

    pub fn gas(&self, pressure_hpa: f64) -> Result<GasEnvironment> {
        let gas = GasEnvironment {
            pressure_hpa,
            molar_mass: self.gas_molar_mass,
            temperature: self.heating.t0,
        };
        gas.validate()?;
        Ok(gas)
    }

    /// Simulation settings of one campaign cell.
    pub fn cell_simulation(&self, pressure_hpa: f64, power_mw: f64, seed: u64) -> Result<SimulationConfig> {
        Ok(SimulationConfig {
            dt: self.trace.dt,
            duration: self.trace.duration,
            seed,
            axes: self.axes.clone(),
            laser_power_mw: power_mw,
            gas: self.gas(pressure_hpa)?,
            particle: self.particle,
            heating: self.heating,
            alpha_c: self.alpha_c,
            anomaly: self.anomaly,
            detector_noise_psd: self.trace.detector_noise_psd,
            integrator: self.trace.integrator,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::InvalidConfig(m.to_string());
        ensure(self.room_temperature > 0.0, || bad("room temperature must be positive"))?;
        ensure(self.pressures_hpa.iter().all(|p| *p > 0.0), || bad("pressures must be positive"))?;
        ensure(self.powers_mw.iter().all(|p| *p > 0.0), || bad("powers must be positive"))?;
        if self.source == DataSource::Simulate && !self.pressures_hpa.is_empty() && !self.powers_mw.is_empty() {
            ensure(self.repetitions > 0 && self.esr_repetitions > 0, || {
                bad("repetition counts must be positive")
            })?;
            let p = self.pressures_hpa[0];
            let hottest = self.powers_mw.iter().copied().fold(0.0, f64::max);
            self.cell_simulation(p, hottest, 0)?.validate()?;
        }
        self.heating.validate()?;
        Ok(())
    }
}

/// A stage that failed for one cell, pressure or axis. The campaign carries on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_hpa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<AxisLabel>,
    pub message: String,
}

impl CellFailure {
    fn new(stage: &str, err: &Error) -> Self {
        Self {
            stage: stage.to_string(),
            pressure_hpa: None,
            power_mw: None,
            repetition: None,
            axis: None,
            message: err.to_string(),
        }
    }

    fn at(mut self, pressure: f64, power: Option<f64>, repetition: Option<usize>) -> Self {
        self.pressure_hpa = Some(pressure);
        self.power_mw = power;
        self.repetition = repetition;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsrReading {
    pub pressure_hpa: f64,
    pub power_mw: f64,
    pub repetition: usize,
    pub fit: EsrFit,
    pub t_raw: f64,
    pub sigma: f64,
    /// After the strain-offset correction; equals `t_raw` if the heating fit failed.
    pub t_corrected: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroRadius {
    pub pressure_hpa: f64,
    /// Mean fitted γ_x over the pressure's sweep, Hz.
    pub gamma_x_hz: f64,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CampaignReport {
    pub points: Vec<PowerSweepPoint>,
    pub esr_readings: Vec<EsrReading>,
    pub heating_fit: Option<HeatingFit>,
    pub calibrations: Vec<CalibrationResult>,
    pub energy_series: Vec<EnergySeries>,
    pub temperature_series: Vec<TemperatureSeries>,
    pub k_estimates: Vec<KEstimate>,
    pub estimate: Option<HbmEstimate>,
    pub hydrodynamic_radii: Vec<HydroRadius>,
    pub failures: Vec<CellFailure>,
}

impl CampaignReport {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.esr_readings.is_empty() && self.failures.is_empty()
    }
}

fn cell_stem(pressure: f64, power: f64, rep: usize) -> String {
    format!("p{pressure}_P{power}_r{rep}")
}

fn fit_trace(trace: &TimeTrace, config: &CampaignConfig, rep: usize) -> (Option<PowerSweepPoint>, Vec<CellFailure>) {
    let meta = &trace.metadata;
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for ch in &trace.channels {
        let res = welch_psd(trace, ch.label, &config.welch).and_then(|psd| {
            if let Some(dir) = &config.artifacts_dir {
                let name = format!("{}_{}.csv", cell_stem(meta.pressure_hpa, meta.power_mw, rep), ch.label);
                io::write_psd(&psd, &dir.join("psd").join(name))?;
            }
            fit_psd(&psd, &config.psd_fit)
        });
        match res {
            Ok(fit) => fits.push(AxisPsdFit { axis: ch.label, fit }),
            Err(e) => {
                let mut f = CellFailure::new("fit_psd", &e).at(meta.pressure_hpa, Some(meta.power_mw), Some(rep));
                f.axis = Some(ch.label);
                failures.push(f);
            }
        }
    }
    let point = (!fits.is_empty()).then(|| PowerSweepPoint {
        power_mw: meta.power_mw,
        pressure_hpa: meta.pressure_hpa,
        repetition: rep,
        fits,
    });
    (point, failures)
}

fn simulate_cell(
    config: &CampaignConfig,
    pi: usize,
    wi: usize,
    rep: usize,
) -> (Option<PowerSweepPoint>, Vec<CellFailure>) {
    let (p, w) = (config.pressures_hpa[pi], config.powers_mw[wi]);
    let seed = derive_seed(config.seed, &[pi as u64, wi as u64, rep as u64, 0]);
    let trace = config.cell_simulation(p, w, seed).and_then(|c| simulate_trace(&c)).and_then(|mut t| {
        t.metadata.repetition = Some(rep);
        if let (Some(dir), true) = (&config.artifacts_dir, config.persist_traces) {
            io::write_trace(&t, &dir.join("traces").join(format!("{}.csv", cell_stem(p, w, rep))))?;
        }
        Ok(t)
    });
    match trace {
        Ok(t) => fit_trace(&t, config, rep),
        Err(e) => (None, vec![CellFailure::new("simulate_trace", &e).at(p, Some(w), Some(rep))]),
    }
}

/// PSD fits of every channel of one trace; the first failing channel is the error.
pub fn sweep_point(
    trace: &TimeTrace,
    welch: &WelchOptions,
    psd_fit: &PsdFitOptions,
    repetition: usize,
) -> Result<PowerSweepPoint> {
    let fits = trace
        .channels
        .iter()
        .map(|ch| {
            let psd = welch_psd(trace, ch.label, welch)?;
            Ok(AxisPsdFit {
                axis: ch.label,
                fit: fit_psd(&psd, psd_fit)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerSweepPoint {
        power_mw: trace.metadata.power_mw,
        pressure_hpa: trace.metadata.pressure_hpa,
        repetition,
        fits,
    })
}

/// Fits one spectrum and converts it to a raw temperature.
pub fn esr_reading(spectrum: &EsrSpectrum, rep: usize, law: &ZfsLaw) -> Result<EsrReading> {
    let fit = fit_esr(spectrum)?;
    let t = temperature_from_esr(&fit, law)?;
    Ok(EsrReading {
        pressure_hpa: spectrum.pressure_hpa,
        power_mw: spectrum.power_mw,
        repetition: rep,
        fit,
        t_raw: t.temperature,
        sigma: t.sigma,
        t_corrected: t.temperature,
    })
}

fn simulate_esr_cell(config: &CampaignConfig, pi: usize, wi: usize, rep: usize) -> std::result::Result<EsrReading, CellFailure> {
    let (p, w) = (config.pressures_hpa[pi], config.powers_mw[wi]);
    let seed = derive_seed(config.seed, &[pi as u64, wi as u64, rep as u64, 1]);
    simulate_esr(&config.heating, &config.zfs_law, w, p, &config.esr, seed)
        .and_then(|s| {
            if let Some(dir) = &config.artifacts_dir {
                io::write_esr(&s, &dir.join("esr").join(format!("{}.csv", cell_stem(p, w, rep))))?;
            }
            esr_reading(&s, rep, &config.zfs_law)
        })
        .map_err(|e| CellFailure::new("esr", &e).at(p, Some(w), Some(rep)))
}

type TraceOutcome = (Option<PowerSweepPoint>, Vec<CellFailure>);

fn gather_simulated(config: &CampaignConfig) -> (Vec<TraceOutcome>, Vec<std::result::Result<EsrReading, CellFailure>>) {
    let np = config.pressures_hpa.len();
    let nw = config.powers_mw.len();
    let trace_cells: Vec<(usize, usize, usize)> = (0..np)
        .flat_map(|pi| (0..nw).flat_map(move |wi| (0..config.repetitions).map(move |r| (pi, wi, r))))
        .collect();
    let esr_cells: Vec<(usize, usize, usize)> = (0..np)
        .flat_map(|pi| (0..nw).flat_map(move |wi| (0..config.esr_repetitions).map(move |r| (pi, wi, r))))
        .collect();
    let traces = trace_cells
        .par_iter()
        .map(|&(pi, wi, r)| simulate_cell(config, pi, wi, r))
        .collect();
    let esr = esr_cells
        .par_iter()
        .map(|&(pi, wi, r)| simulate_esr_cell(config, pi, wi, r))
        .collect();
    (traces, esr)
}

fn gather_ingested(config: &CampaignConfig, dir: &Path) -> Result<(Vec<TraceOutcome>, Vec<std::result::Result<EsrReading, CellFailure>>)> {
    let list = |sub: &str| -> Result<Vec<PathBuf>> {
        let d = dir.join(sub);
        if d.is_dir() {
            io::list_csv(&d)
        } else {
            Ok(Vec::new())
        }
    };
    let trace_files = list("traces")?;
    let esr_files = list("esr")?;
    let traces = trace_files
        .par_iter()
        .enumerate()
        .map(|(i, path)| match io::read_trace(path) {
            Ok(t) => {
                let rep = t.metadata.repetition.unwrap_or(i);
                fit_trace(&t, config, rep)
            }
            Err(e) => {
                let mut f = CellFailure::new("read_trace", &e);
                f.message = format!("{}: {}", path.display(), f.message);
                (None, vec![f])
            }
        })
        .collect();
    let esr = esr_files
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            io::read_esr(path)
                .and_then(|s| esr_reading(&s, i, &config.zfs_law))
                .map_err(|e| {
                    let mut f = CellFailure::new("esr", &e);
                    f.message = format!("{}: {}", path.display(), f.message);
                    f
                })
        })
        .collect();
    Ok((traces, esr))
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| same_value(*a, *b));
    v
}

/// Fits the heating law to all readings and stores strain-corrected temperatures.
pub fn correct_strain(readings: &mut [EsrReading], room_t: f64, weighting: Weighting) -> Result<HeatingFit> {
    let points: Vec<HeatingPoint> = readings
        .iter()
        .map(|r| HeatingPoint {
            power_mw: r.power_mw,
            pressure_hpa: r.pressure_hpa,
            t_raw: r.t_raw,
            sigma: r.sigma,
        })
        .collect();
    let fit = fit_heating_law(&points, room_t, weighting)?;
    for r in readings {
        r.t_corrected = fit.correct(r.t_raw);
    }
    Ok(fit)
}

/// Inverse-variance mean of corrected temperatures at each power of one pressure.
pub fn temperature_series(readings: &[EsrReading], pressure: f64) -> TemperatureSeries {
    let at_p: Vec<&EsrReading> = readings.iter().filter(|r| same_value(r.pressure_hpa, pressure)).collect();
    let powers = distinct(at_p.iter().map(|r| r.power_mw));
    let mut temperatures = Vec::with_capacity(powers.len());
    let mut sigmas = Vec::with_capacity(powers.len());
    for &w in &powers {
        let rs: Vec<&&EsrReading> = at_p.iter().filter(|r| same_value(r.power_mw, w)).collect();
        if rs.iter().all(|r| r.sigma > 0.0 && r.sigma.is_finite()) {
            let sw: f64 = rs.iter().map(|r| r.sigma.powi(-2)).sum();
            temperatures.push(rs.iter().map(|r| r.t_corrected * r.sigma.powi(-2)).sum::<f64>() / sw);
            sigmas.push(sw.sqrt().recip());
        } else {
            let (m, se) = mean_and_standard_error(&rs.iter().map(|r| r.t_corrected).collect::<Vec<_>>());
            temperatures.push(m);
            sigmas.push(se);
        }
    }
    TemperatureSeries {
        pressure_hpa: pressure,
        powers_mw: powers,
        temperatures,
        sigmas,
    }
}

/// Runs every stage of the campaign. Only an invalid configuration is an error;
/// failures of individual cells, pressures or axes are collected in the report.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport> {
    config.validate()?;
    let (traces, esr) = match &config.source {
        DataSource::Simulate => {
            if config.pressures_hpa.is_empty() || config.powers_mw.is_empty() {
                return Ok(CampaignReport::default());
            }
            gather_simulated(config)
        }
        DataSource::Ingest { directory } => gather_ingested(config, directory)?,
    };

    let mut report = CampaignReport::default();
    for (point, failures) in traces {
        report.points.extend(point);
        report.failures.extend(failures);
    }
    for r in esr {
        match r {
            Ok(reading) => report.esr_readings.push(reading),
            Err(f) => report.failures.push(f),
        }
    }
    if report.points.is_empty() && report.esr_readings.is_empty() {
        return Ok(report);
    }

    match correct_strain(&mut report.esr_readings, config.room_temperature, config.weighting) {
        Ok(h) => report.heating_fit = Some(h),
        Err(e) => report.failures.push(CellFailure::new("fit_heating_law", &e)),
    }

    let pressures = distinct(report.points.iter().map(|p| p.pressure_hpa));
    for &p in &pressures {
        let sweep: Vec<PowerSweepPoint> = report
            .points
            .iter()
            .filter(|pt| same_value(pt.pressure_hpa, p))
            .cloned()
            .collect();

        if sweep.iter().any(|pt| pt.fit(AxisLabel::X).is_some()) {
            let gammas: Vec<f64> = sweep
                .iter()
                .filter_map(|pt| pt.fit(AxisLabel::X).filter(|f| f.converged).map(|f| f.gamma))
                .collect();
            if !gammas.is_empty() {
                let (g, _) = mean_and_standard_error(&gammas);
                match config.gas(p).and_then(|gas| {
                    hydrodynamic_radius(g, p, &gas, config.particle.density(), config.room_temperature)
                }) {
                    Ok(r) => report.hydrodynamic_radii.push(HydroRadius {
                        pressure_hpa: p,
                        gamma_x_hz: g,
                        radius_m: r,
                    }),
                    Err(e) => report.failures.push(CellFailure::new("hydrodynamic_radius", &e).at(p, None, None)),
                }
            }
        }

        let calib = match calibrate(&sweep, config.room_temperature, config.weighting) {
            Ok(c) => c,
            Err(e) => {
                report.failures.push(CellFailure::new("calibrate", &e).at(p, None, None));
                continue;
            }
        };
        let temps = temperature_series(&report.esr_readings, p);
        let temps_usable = temps.powers_mw.len() >= 3;
        if !temps_usable {
            report.failures.push(
                CellFailure::new(
                    "temperature_series",
                    &Error::Fit(format!("{} ESR temperatures at this pressure, need 3", temps.powers_mw.len())),
                )
                .at(p, None, None),
            );
        }
        for axis in calib.axes.iter().map(|a| a.axis) {
            let es = match energy_series(&calib, axis) {
                Ok(es) => es,
                Err(e) => {
                    let mut f = CellFailure::new("energy_series", &e).at(p, None, None);
                    f.axis = Some(axis);
                    report.failures.push(f);
                    continue;
                }
            };
            if temps_usable {
                match extract_k(&es, &temps, config.weighting) {
                    Ok(k) => report.k_estimates.push(k),
                    Err(e) => {
                        let mut f = CellFailure::new("extract_k", &e).at(p, None, None);
                        f.axis = Some(axis);
                        report.failures.push(f);
                    }
                }
            }
            report.energy_series.push(es);
        }
        report.temperature_series.push(temps);
        report.calibrations.push(calib);
    }
    if !report.k_estimates.is_empty() {
        report.estimate = Some(build_estimate(&report.k_estimates, &report.points, &config.thresholds));
    }
    Ok(report)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// Writes `report.json` and one CSV per figure-shaped view of the results.
pub fn write_report(report: &CampaignReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_json(&dir.join("report.json"), report)?;

    // E_com against power per axis and pressure
    let mut w = csv_writer(&dir.join("fig1c_energy.csv"))?;
    w.write_record(["pressure_hPa", "axis", "power_mW", "E_com_J", "E_sigma_J"])?;
    for s in &report.energy_series {
        for i in 0..s.powers_mw.len() {
            w.write_record([
                s.pressure_hpa.to_string(),
                s.axis.to_string(),
                s.powers_mw[i].to_string(),
                s.energies[i].to_string(),
                s.sigmas[i].to_string(),
            ])?;
        }
    }
    w.flush()?;

    // internal temperature against power, with the joint heating-law line
    let mut w = csv_writer(&dir.join("fig2c_temperature.csv"))?;
    w.write_record(["pressure_hPa", "power_mW", "T_K", "T_sigma_K", "T_model_K"])?;
    for s in &report.temperature_series {
        for i in 0..s.powers_mw.len() {
            let model = report.heating_fit.map_or(f64::NAN, |h| {
                h.t0_corrected + h.kappa_heat * s.powers_mw[i] / s.pressure_hpa
            });
            w.write_record([
                s.pressure_hpa.to_string(),
                s.powers_mw[i].to_string(),
                s.temperatures[i].to_string(),
                s.sigmas[i].to_string(),
                model.to_string(),
            ])?;
        }
    }
    w.flush()?;

    // K and α_c per axis and pressure, with the axis flag
    let mut w = csv_writer(&dir.join("fig3a_k_vs_pressure.csv"))?;
    w.write_record(["axis", "pressure_hPa", "K", "K_sigma", "alpha_c", "alpha_sigma", "flag"])?;
    for k in &report.k_estimates {
        let flag = report
            .estimate
            .as_ref()
            .and_then(|e| e.axes.iter().find(|a| a.axis == k.axis))
            .map_or("undetermined".to_string(), |a| {
                serde_json::to_value(a.flag).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
            });
        w.write_record([
            k.axis.to_string(),
            k.pressure_hpa.to_string(),
            k.k.to_string(),
            k.k_sigma.to_string(),
            k.alpha_c.to_string(),
            k.alpha_sigma.to_string(),
            flag,
        ])?;
    }
    w.flush()?;

    // anisotropy from same-trace damping pairs
    let mut w = csv_writer(&dir.join("fig3b_anisotropy.csv"))?;
    w.write_record(["pressure_hPa", "power_mW", "repetition", "gamma_x_Hz", "gamma_y_Hz", "g"])?;
    for p in &report.points {
        if let (Some(x), Some(y)) = (p.fit(AxisLabel::X), p.fit(AxisLabel::Y)) {
            w.write_record([
                p.pressure_hpa.to_string(),
                p.power_mw.to_string(),
                p.repetition.to_string(),
                x.gamma.to_string(),
                y.gamma.to_string(),
                (x.gamma / y.gamma).to_string(),
            ])?;
        }
    }
    w.flush()?;

    // linewidth against power, which stays flat when heating comes from force noise
    let mut w = csv_writer(&dir.join("fig4a_linewidth.csv"))?;
    w.write_record(["axis", "pressure_hPa", "power_mW", "gamma_Hz", "gamma_se_Hz", "fits"])?;
    let pressures = distinct(report.points.iter().map(|p| p.pressure_hpa));
    let powers = distinct(report.points.iter().map(|p| p.power_mw));
    let mut axes: Vec<AxisLabel> = report.points.iter().flat_map(|p| p.axes()).collect();
    axes.sort();
    axes.dedup();
    for &axis in &axes {
        for &p in &pressures {
            for &pw in &powers {
                let g: Vec<f64> = report
                    .points
                    .iter()
                    .filter(|pt| same_value(pt.pressure_hpa, p) && same_value(pt.power_mw, pw))
                    .filter_map(|pt| pt.fit(axis).filter(|f| f.converged).map(|f| f.gamma))
                    .collect();
                if g.is_empty() {
                    continue;
                }
                let (m, se) = mean_and_standard_error(&g);
                w.write_record([
                    axis.to_string(),
                    p.to_string(),
                    pw.to_string(),
                    m.to_string(),
                    se.to_string(),
                    g.len().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    // per-axis K against pressure with thresholds
    let mut w = csv_writer(&dir.join("fig4b_k_flags.csv"))?;
    w.write_record(["axis", "pressure_hPa", "K", "K_sigma", "K_minus_2sigma", "above_one"])?;
    for k in &report.k_estimates {
        w.write_record([
            k.axis.to_string(),
            k.pressure_hpa.to_string(),
            k.k.to_string(),
            k.k_sigma.to_string(),
            (k.k - 2.0 * k.k_sigma).to_string(),
            (k.k - 2.0 * k.k_sigma > 1.0).to_string(),
        ])?;
    }
    w.flush()?;

    // raw Ã against power with the zero-power extrapolation
    let mut w = csv_writer(&dir.join("figS1_calibration.csv"))?;
    w.write_record([
        "pressure_hPa",
        "axis",
        "power_mW",
        "A_tilde",
        "A_tilde_se",
        "A_tilde_line",
        "C_calib",
    ])?;
    for c in &report.calibrations {
        for a in &c.axes {
            for i in 0..a.powers_mw.len() {
                w.write_record([
                    c.pressure_hpa.to_string(),
                    a.axis.to_string(),
                    a.powers_mw[i].to_string(),
                    a.a_tilde_mean[i].to_string(),
                    a.a_tilde_se[i].to_string(),
                    a.line.eval(a.powers_mw[i]).to_string(),
                    a.c_calib.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV of K along both cylinder axes against the anisotropy g.
pub fn write_cylinder_scan(points: &[CylinderKPoint], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["radius_m", "length_m", "g", "K_parallel", "K_perpendicular", "K_sphere"])?;
    for p in points {
        w.write_record([
            p.radius.to_string(),
            p.length.to_string(),
            p.anisotropy.to_string(),
            p.k_parallel.to_string(),
            p.k_perpendicular.to_string(),
            p.k_sphere.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
