//! Calibration, K extraction and campaign orchestration.

pub mod calibration;
pub mod campaign;
pub mod estimate;

pub use calibration::{calibrate, com_energy, energy_series, AxisCalibration, AxisPsdFit, CalibrationResult, EnergySeries, PowerSweepPoint};
pub use campaign::{
    correct_strain, esr_reading, run_campaign, sweep_point, temperature_series, write_cylinder_scan, write_report,
    CampaignConfig, CampaignReport, CellFailure, DataSource, EsrReading, HydroRadius, TraceSettings,
};
pub use estimate::{
    anisotropy, build_estimate, classify_axis, classify_overheating, damping_for_radius, extract_k,
    hydrodynamic_radius, Anisotropy, AxisEstimate, HbmEstimate, KEstimate, OverheatingFlag, OverheatingThresholds,
    TemperatureSeries,
};
