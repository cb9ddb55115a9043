use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use hbm_core::domain::{GasEnvironment, DIAMOND_DENSITY, ROOM_TEMPERATURE};
use hbm_core::io;
use hbm_core::pipeline::{
    calibrate as calibrate_sweep, correct_strain, energy_series, esr_reading, extract_k as extract_k_series,
    run_campaign, sweep_point, temperature_series, write_cylinder_scan, write_report, CampaignConfig, EnergySeries,
    EsrReading, OverheatingFlag, TemperatureSeries,
};
use hbm_core::simulate::{derive_seed, simulate_esr, simulate_trace, EsrSimConfig, SimulationConfig, TimeTrace};
use hbm_core::spectral::{fit_psd as fit_psd_model, welch_psd, Psd, PsdFitOptions, WelchOptions};
use hbm_core::thermometry::{Weighting, ZfsLaw};
use hbm_core::twobath::{cylinder_shape_scan, CylinderKPoint, TemperatureSweep};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Common, Format};

#[derive(Debug)]
pub enum CliError {
    Core(hbm_core::Error),
    /// Bad arguments or an unreadable configuration.
    Config(String),
    /// A fit ran but did not converge.
    FitFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_fit_failure() => 2,
            CliError::Core(e) if e.is_config_error() => 3,
            CliError::Core(_) => 1,
            CliError::Config(_) => 3,
            CliError::FitFailed(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) | CliError::FitFailed(m) => f.write_str(m),
        }
    }
}

impl From<hbm_core::Error> for CliError {
    fn from(e: hbm_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

fn optional_config<T: DeserializeOwned + Default>(common: &Common) -> Result<T> {
    common.config.as_deref().map_or_else(|| Ok(T::default()), load_config)
}

fn required_config<T: DeserializeOwned>(common: &Common, command: &str) -> Result<T> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("`{command}` needs --config <json>")))?;
    load_config(path)
}

fn required_out<'a>(common: &'a Common, command: &str) -> Result<&'a Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("`{command}` needs --out <dir>")))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

/// Writes `value` as `<out>/<name>.json`, or prints it when no directory was given.
fn emit_json<T: Serialize>(value: &T, common: &Common, name: &str) -> Result<()> {
    match &common.out {
        Some(dir) => io::write_json(&dir.join(format!("{name}.json")), value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

/// Writes a small table as `<out>/<name>.csv`, or prints it when no directory was given.
fn emit_table(header: &[&str], rows: &[Vec<String>], common: &Common, name: &str) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{name}.csv")), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit<T: Serialize>(
    value: &T,
    header: &[&str],
    rows: impl FnOnce() -> Vec<Vec<String>>,
    common: &Common,
    name: &str,
) -> Result<()> {
    match common.format {
        Format::Json => emit_json(value, common, name),
        Format::Csv => emit_table(header, &rows(), common, name),
    }
}

#[derive(Debug, Deserialize)]
struct SimulateInput {
    #[serde(flatten)]
    simulation: SimulationConfig,
    #[serde(default)]
    esr: Option<EsrSection>,
}

#[derive(Debug, Deserialize)]
struct EsrSection {
    #[serde(default)]
    config: EsrSimConfig,
    #[serde(default = "ZfsLaw::toyli")]
    zfs_law: ZfsLaw,
}

pub fn simulate(common: &Common) -> Result<()> {
    let mut input: SimulateInput = required_config(common, "simulate")?;
    let out = required_out(common, "simulate")?;
    if let Some(seed) = common.seed {
        input.simulation.seed = seed;
    }
    let sim = &input.simulation;
    let trace = simulate_trace(sim)?;
    match common.format {
        Format::Csv => io::write_trace(&trace, &out.join("trace.csv"))?,
        Format::Json => io::write_json(&out.join("trace.json"), &trace)?,
    }
    if let Some(esr) = &input.esr {
        let spectrum = simulate_esr(
            &sim.heating,
            &esr.zfs_law,
            sim.laser_power_mw,
            sim.gas.pressure_hpa,
            &esr.config,
            derive_seed(sim.seed, &[1]),
        )?;
        match common.format {
            Format::Csv => io::write_esr(&spectrum, &out.join("esr.csv"))?,
            Format::Json => io::write_json(&out.join("esr.json"), &spectrum)?,
        }
    }
    eprintln!("wrote {} samples per channel to {}", trace.len(), out.display());
    Ok(())
}

fn read_any_trace(path: &Path) -> Result<TimeTrace> {
    if is_json(path) {
        let t: TimeTrace = io::read_json(path)?;
        t.validate()?;
        Ok(t)
    } else {
        Ok(io::read_trace(path)?)
    }
}

pub fn psd(trace_path: &Path, common: &Common) -> Result<()> {
    let opts: WelchOptions = optional_config(common)?;
    let out = required_out(common, "psd")?;
    let trace = read_any_trace(trace_path)?;
    for ch in &trace.channels {
        let psd = welch_psd(&trace, ch.label, &opts)?;
        if psd.few_segments {
            eprintln!("warning: axis {} PSD averages fewer than two segments", ch.label);
        }
        match common.format {
            Format::Csv => io::write_psd(&psd, &out.join(format!("psd_{}.csv", ch.label)))?,
            Format::Json => io::write_json(&out.join(format!("psd_{}.json", ch.label)), &psd)?,
        }
    }
    Ok(())
}

pub fn fit_psd(psd_path: &Path, common: &Common) -> Result<()> {
    let opts: PsdFitOptions = optional_config(common)?;
    let psd: Psd = if is_json(psd_path) {
        let p: Psd = io::read_json(psd_path)?;
        p.validate()?;
        p
    } else {
        io::read_psd(psd_path)?
    };
    let fit = fit_psd_model(&psd, &opts)?;
    emit(
        &fit,
        &["A", "f_q_Hz", "gamma_Hz", "A_sigma", "f_q_sigma_Hz", "gamma_sigma_Hz", "converged", "overdamped", "model_mismatch"],
        || {
            vec![vec![
                fit.a.to_string(),
                fit.f_q.to_string(),
                fit.gamma.to_string(),
                fit.a_sigma.to_string(),
                fit.f_q_sigma.to_string(),
                fit.gamma_sigma.to_string(),
                fit.converged.to_string(),
                fit.overdamped.to_string(),
                fit.model_mismatch.to_string(),
            ]]
        },
        common,
        "fit_psd",
    )?;
    if fit.overdamped {
        eprintln!("warning: fitted γ exceeds f_q; the underdamped model is unreliable");
    }
    if fit.model_mismatch {
        eprintln!("warning: residuals exceed the expected periodogram scatter");
    }
    if !fit.converged {
        return Err(CliError::FitFailed(format!("PSD fit did not converge: {}", fit.message)));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct EsrAnalysis {
    zfs_law: ZfsLaw,
    room_temperature: f64,
    weighting: Weighting,
}

impl Default for EsrAnalysis {
    fn default() -> Self {
        Self {
            zfs_law: ZfsLaw::toyli(),
            room_temperature: ROOM_TEMPERATURE,
            weighting: Weighting::Weighted,
        }
    }
}

const READING_HEADER: [&str; 9] = [
    "pressure_hPa",
    "power_mW",
    "repetition",
    "D_Hz",
    "D_sigma_Hz",
    "E_Hz",
    "T_raw_K",
    "T_sigma_K",
    "T_corrected_K",
];

fn reading_row(r: &EsrReading) -> Vec<String> {
    vec![
        r.pressure_hpa.to_string(),
        r.power_mw.to_string(),
        r.repetition.to_string(),
        r.fit.d.to_string(),
        r.fit.d_sigma.to_string(),
        r.fit.e.to_string(),
        r.t_raw.to_string(),
        r.sigma.to_string(),
        r.t_corrected.to_string(),
    ]
}

fn distinct_pressures(readings: &[EsrReading]) -> Vec<f64> {
    let mut v: Vec<f64> = readings.iter().map(|r| r.pressure_hpa).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn fit_esr(input: &Path, common: &Common) -> Result<()> {
    let cfg: EsrAnalysis = optional_config(common)?;
    if !input.is_dir() {
        let reading = esr_reading(&io::read_esr(input)?, 0, &cfg.zfs_law)?;
        return emit(&reading, &READING_HEADER, || vec![reading_row(&reading)], common, "esr_reading");
    }
    let mut readings = io::list_csv(input)?
        .iter()
        .enumerate()
        .map(|(i, path)| {
            io::read_esr(path)
                .and_then(|s| esr_reading(&s, i, &cfg.zfs_law))
                .map_err(|e| CliError::Core(e).context(path))
        })
        .collect::<Result<Vec<_>>>()?;
    if readings.is_empty() {
        return Err(CliError::Config(format!("no ESR spectra in {}", input.display())));
    }
    let heating = match correct_strain(&mut readings, cfg.room_temperature, cfg.weighting) {
        Ok(h) => Some(h),
        Err(e) => {
            eprintln!("warning: no strain correction: {e}");
            None
        }
    };
    let series: Vec<TemperatureSeries> = distinct_pressures(&readings)
        .into_iter()
        .map(|p| temperature_series(&readings, p))
        .collect();
    match &common.out {
        Some(dir) => {
            match common.format {
                Format::Csv => emit_table(
                    &READING_HEADER,
                    &readings.iter().map(reading_row).collect::<Vec<_>>(),
                    common,
                    "esr_readings",
                )?,
                Format::Json => io::write_json(&dir.join("esr_readings.json"), &readings)?,
            }
            io::write_json(&dir.join("temperatures.json"), &series)?;
            if let Some(h) = &heating {
                io::write_json(&dir.join("heating_fit.json"), h)?;
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&series)?),
    }
    Ok(())
}

impl CliError {
    fn context(self, path: &Path) -> Self {
        match self {
            CliError::Core(hbm_core::Error::Format(m)) => {
                CliError::Core(hbm_core::Error::Format(format!("{}: {m}", path.display())))
            }
            CliError::Core(e) if e.is_fit_failure() => CliError::FitFailed(format!("{}: {e}", path.display())),
            other => other,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct CalibrateOptions {
    welch: WelchOptions,
    psd_fit: PsdFitOptions,
    room_temperature: f64,
    weighting: Weighting,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self {
            welch: WelchOptions::default(),
            psd_fit: PsdFitOptions::default(),
            room_temperature: ROOM_TEMPERATURE,
            weighting: Weighting::Weighted,
        }
    }
}

pub fn calibrate(traces: &Path, common: &Common) -> Result<()> {
    let opts: CalibrateOptions = optional_config(common)?;
    let files: Vec<PathBuf> = io::list_csv(traces)?;
    if files.is_empty() {
        return Err(CliError::Config(format!("no trace CSV files in {}", traces.display())));
    }
    let sweep = files
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let trace = io::read_trace(path)?;
            let rep = trace.metadata.repetition.unwrap_or(i);
            sweep_point(&trace, &opts.welch, &opts.psd_fit, rep)
        })
        .zip(&files)
        .map(|(r, path)| r.map_err(|e| CliError::Core(e).context(path)))
        .collect::<Result<Vec<_>>>()?;
    let calib = calibrate_sweep(&sweep, opts.room_temperature, opts.weighting)?;
    let series = calib
        .axes
        .iter()
        .map(|a| energy_series(&calib, a.axis))
        .collect::<hbm_core::Result<Vec<EnergySeries>>>()?;
    let Some(dir) = &common.out else {
        return emit_json(&calib, common, "calibration");
    };
    io::write_json(&dir.join("calibration.json"), &calib)?;
    for es in &series {
        io::write_json(&dir.join(format!("energy_{}.json", es.axis)), es)?;
        if common.format == Format::Csv {
            let rows: Vec<Vec<String>> = (0..es.powers_mw.len())
                .map(|i| vec![es.powers_mw[i].to_string(), es.energies[i].to_string(), es.sigmas[i].to_string()])
                .collect();
            emit_table(&["power_mW", "E_com_J", "sigma_J"], &rows, common, &format!("energy_{}", es.axis))?;
        }
    }
    for a in &calib.axes {
        eprintln!(
            "axis {}: C_calib = {:.6e} J/signal² (±{:.2}%) from {} powers",
            a.axis,
            a.c_calib,
            100.0 * a.relative_sigma(),
            a.powers_mw.len()
        );
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TemperatureInput {
    One(TemperatureSeries),
    Many(Vec<TemperatureSeries>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct ExtractOptions {
    weighting: Weighting,
}

pub fn extract_k(energy: &Path, temperature: &Path, common: &Common) -> Result<()> {
    let opts: ExtractOptions = optional_config(common)?;
    let es: EnergySeries = load_config(energy)?;
    let temps = match load_config::<TemperatureInput>(temperature)? {
        TemperatureInput::One(t) => t,
        TemperatureInput::Many(list) => list
            .into_iter()
            .find(|t| (t.pressure_hpa / es.pressure_hpa - 1.0).abs() < 1e-9)
            .ok_or_else(|| {
                CliError::Config(format!("no temperature series at {} hPa in {}", es.pressure_hpa, temperature.display()))
            })?,
    };
    let k = extract_k_series(&es, &temps, opts.weighting)?;
    emit(
        &k,
        &["axis", "pressure_hPa", "K", "K_sigma", "alpha_c", "alpha_sigma"],
        || {
            vec![vec![
                k.axis.to_string(),
                k.pressure_hpa.to_string(),
                k.k.to_string(),
                k.k_sigma.to_string(),
                k.alpha_c.to_string(),
                k.alpha_sigma.to_string(),
            ]]
        },
        common,
        "k_estimate",
    )
}

pub fn campaign(common: &Common) -> Result<()> {
    let mut cfg: CampaignConfig = required_config(common, "campaign")?;
    let out = required_out(common, "campaign")?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if cfg.artifacts_dir.is_none() {
        cfg.artifacts_dir = Some(out.join("artifacts"));
    }
    let report = run_campaign(&cfg)?;
    write_report(&report, out)?;
    for f in &report.failures {
        eprintln!("warning: {} failed: {}", f.stage, f.message);
    }
    if report.is_empty() {
        eprintln!("empty campaign: nothing to analyse");
        return Ok(());
    }
    let Some(est) = &report.estimate else {
        return Err(CliError::FitFailed("no coupling constant could be extracted; see report.json".into()));
    };
    for a in &est.axes {
        let flag = match a.flag {
            OverheatingFlag::Thermal => "thermal",
            OverheatingFlag::Overheated => "overheated",
            OverheatingFlag::Undetermined => "undetermined",
        };
        eprintln!(
            "axis {}: K = {:.4} ± {:.4}, α_c = {:.3} ± {:.3}, {flag}",
            a.axis, a.k, a.k_sigma, a.alpha_c, a.alpha_sigma
        );
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct CylinderScan {
    radius: f64,
    /// Smallest and largest length as a multiple of the diameter.
    min_aspect: f64,
    max_aspect: f64,
    points: usize,
    pressure_hpa: f64,
    density: f64,
    sweep: TemperatureSweep,
}

impl Default for CylinderScan {
    fn default() -> Self {
        Self {
            radius: 40e-9,
            min_aspect: 0.5,
            max_aspect: 4.0,
            points: 36,
            pressure_hpa: 45.0,
            density: DIAMOND_DENSITY,
            sweep: TemperatureSweep::default(),
        }
    }
}

pub fn cylinder_k(common: &Common) -> Result<()> {
    let scan: CylinderScan = optional_config(common)?;
    if scan.points < 2 || !(scan.min_aspect > 0.0 && scan.max_aspect > scan.min_aspect) {
        return Err(CliError::Config("cylinder scan needs ≥ 2 points and 0 < min_aspect < max_aspect".into()));
    }
    let lengths: Vec<f64> = (0..scan.points)
        .map(|i| {
            let a = scan.min_aspect + (scan.max_aspect - scan.min_aspect) * i as f64 / (scan.points - 1) as f64;
            2.0 * scan.radius * a
        })
        .collect();
    let gas = GasEnvironment::air(scan.pressure_hpa)?;
    let points: Vec<CylinderKPoint> = cylinder_shape_scan(scan.radius, &lengths, scan.density, &gas, &scan.sweep)?;
    match (common.format, &common.out) {
        (Format::Csv, Some(dir)) => write_cylinder_scan(&points, &dir.join("figS2_cylinder_k.csv"))?,
        (Format::Csv, None) => {
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| {
                    [p.radius, p.length, p.anisotropy, p.k_parallel, p.k_perpendicular, p.k_sphere]
                        .iter()
                        .map(f64::to_string)
                        .collect()
                })
                .collect();
            emit_table(&["radius_m", "length_m", "g", "K_parallel", "K_perpendicular", "K_sphere"], &rows, common, "")?;
        }
        (Format::Json, _) => emit_json(&points, common, "cylinder_k")?,
    }
    Ok(())
}
