//! CSV files with JSON sidecars for traces, PSDs and ESR spectra.
//!
//! Every `name.csv` is paired with `name.json` in the same directory. Floats are
//! written in Rust's shortest round-trip form, so a write followed by a read
//! reproduces every sample bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::AxisLabel;
use crate::error::{ensure, Error, Result};
use crate::simulate::{Channel, TimeTrace, TraceMetadata};
use crate::spectral::Psd;
use crate::thermometry::{EsrSpectrum, ZfsLaw};

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// Reads a numeric CSV and returns its header and columns.
fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        ensure(rec.len() == header.len(), || {
            Error::Format(format!("{}: row {} has {} fields", path.display(), line + 2, rec.len()))
        })?;
        for (col, field) in cols.iter_mut().zip(rec.iter()) {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("{}: row {}: '{field}' is not a number", path.display(), line + 2))
            })?;
            col.push(v);
        }
    }
    Ok((header, cols))
}

fn expect_header(path: &Path, header: &[String], expected: &[&str]) -> Result<()> {
    ensure(header.iter().map(String::as_str).eq(expected.iter().copied()), || {
        Error::Format(format!(
            "{}: expected header {}, found {}",
            path.display(),
            expected.join(","),
            header.join(",")
        ))
    })
}

/// Writes `t_s,Vx,Vy` (one `V<axis>` column per channel) plus the metadata sidecar.
pub fn write_trace(trace: &TimeTrace, csv_path: &Path) -> Result<()> {
    trace.validate()?;
    let mut w = writer(csv_path)?;
    let mut header = vec!["t_s".to_string()];
    header.extend(trace.channels.iter().map(|c| format!("V{}", c.label)));
    w.write_record(&header)?;
    let dt = trace.dt();
    let mut row = Vec::with_capacity(header.len());
    for i in 0..trace.len() {
        row.clear();
        row.push((i as f64 * dt).to_string());
        row.extend(trace.channels.iter().map(|c| c.samples[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    write_json(&sidecar_path(csv_path), &trace.metadata)
}

pub fn read_trace(csv_path: &Path) -> Result<TimeTrace> {
    let metadata: TraceMetadata = read_json(&sidecar_path(csv_path))?;
    let (header, mut cols) = read_columns(csv_path)?;
    ensure(header.len() >= 2 && header[0] == "t_s", || {
        Error::Format(format!("{}: header must start with t_s and hold ≥ 1 channel", csv_path.display()))
    })?;
    let mut channels = Vec::with_capacity(header.len() - 1);
    for (name, samples) in header.iter().zip(cols.drain(..)).skip(1) {
        let label: AxisLabel = name
            .strip_prefix('V')
            .ok_or_else(|| Error::Format(format!("channel column '{name}' must be V<axis>")))?
            .parse()?;
        channels.push(Channel { label, samples });
    }
    let trace = TimeTrace { channels, metadata };
    trace.validate()?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PsdSidecar {
    window: String,
    segments: usize,
    dt: f64,
    #[serde(default)]
    few_segments: bool,
}

/// Writes `f_Hz,S` plus a sidecar with window, segment count and dt.
pub fn write_psd(psd: &Psd, csv_path: &Path) -> Result<()> {
    let mut w = writer(csv_path)?;
    w.write_record(["f_Hz", "S"])?;
    for (f, s) in psd.frequencies.iter().zip(&psd.values) {
        w.write_record([f.to_string(), s.to_string()])?;
    }
    w.flush()?;
    write_json(
        &sidecar_path(csv_path),
        &PsdSidecar {
            window: psd.window_name.clone(),
            segments: psd.segment_count,
            dt: psd.dt,
            few_segments: psd.few_segments,
        },
    )
}

pub fn read_psd(csv_path: &Path) -> Result<Psd> {
    let side: PsdSidecar = read_json(&sidecar_path(csv_path))?;
    let (header, mut cols) = read_columns(csv_path)?;
    expect_header(csv_path, &header, &["f_Hz", "S"])?;
    let values = cols.pop().unwrap_or_default();
    let frequencies = cols.pop().unwrap_or_default();
    let psd = Psd {
        frequencies,
        values,
        segment_count: side.segments,
        window_name: side.window,
        dt: side.dt,
        few_segments: side.few_segments,
    };
    psd.validate()?;
    Ok(psd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct EsrSidecar {
    #[serde(rename = "power_mW")]
    power_mw: f64,
    #[serde(rename = "pressure_hPa")]
    pressure_hpa: f64,
}

/// Writes `f_Hz,counts` plus a sidecar with laser power and pressure.
pub fn write_esr(spectrum: &EsrSpectrum, csv_path: &Path) -> Result<()> {
    spectrum.validate()?;
    let mut w = writer(csv_path)?;
    w.write_record(["f_Hz", "counts"])?;
    for (f, c) in spectrum.frequencies.iter().zip(&spectrum.counts) {
        w.write_record([f.to_string(), c.to_string()])?;
    }
    w.flush()?;
    write_json(
        &sidecar_path(csv_path),
        &EsrSidecar {
            power_mw: spectrum.power_mw,
            pressure_hpa: spectrum.pressure_hpa,
        },
    )
}

pub fn read_esr(csv_path: &Path) -> Result<EsrSpectrum> {
    let side: EsrSidecar = read_json(&sidecar_path(csv_path))?;
    let (header, mut cols) = read_columns(csv_path)?;
    expect_header(csv_path, &header, &["f_Hz", "counts"])?;
    let counts = cols.pop().unwrap_or_default();
    let frequencies = cols.pop().unwrap_or_default();
    let s = EsrSpectrum {
        frequencies,
        counts,
        power_mw: side.power_mw,
        pressure_hpa: side.pressure_hpa,
    };
    s.validate()?;
    Ok(s)
}

/// Reads a `{coefficients, T_min, T_max, source}` document.
pub fn read_zfs_law(path: &Path) -> Result<ZfsLaw> {
    read_json(path)
}

/// CSV files (with a sibling sidecar) directly inside `dir`, sorted by name.
pub fn list_csv(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv") && sidecar_path(p).exists())
        .collect();
    out.sort();
    Ok(out)
}
