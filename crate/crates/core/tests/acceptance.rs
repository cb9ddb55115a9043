//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output. A
//! criterion known to be unattainable is still printed as FAIL; the process only
//! exits non-zero when an outcome differs from the expected one.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use hbm_core::domain::{AxisLabel, GasEnvironment, ParticleModel, TrapAxis, BOLTZMANN, DIAMOND_DENSITY};
use hbm_core::fit::mean_and_standard_error;
use hbm_core::pipeline::{hydrodynamic_radius, run_campaign, CampaignConfig, OverheatingFlag};
use hbm_core::simulate::{ground_truth, simulate_esr, simulate_trace, AnomalyInjection, Integrator, SimulationConfig};
use hbm_core::spectral::{fit_psd, welch_psd, welch_psd_samples, PsdFitOptions, WelchOptions};
use hbm_core::thermometry::{fit_esr, fit_heating_law, temperature_from_esr, HeatingPoint, Weighting};
use hbm_core::twobath::{
    cylinder_shape_scan, sphere_k, two_bath_tcom, two_bath_tcom_linearized, HeatingLaw, TemperatureSweep,
    SPHERE_COUPLING, SPHERE_QUADRATIC,
};

/// Target coupling for an α_c = 1 sphere, as quoted for the end-to-end check.
const K_TARGET: f64 = 0.2827;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn analytic_slope() -> Outcome {
    let slope = two_bath_tcom_linearized(294.0, 1.0, 1.0).unwrap() - 294.0;
    let exact = PI / (PI + 8.0);
    let err = (SPHERE_COUPLING - exact).abs().max((slope - exact).abs());
    outcome(
        err <= 1e-12,
        format!(
            "linearized slope {slope:.13} vs π/(π+8) = {exact:.13}; quoted decimal 0.282723 differs from π/(π+8) by {:.2e}",
            0.282723 - exact
        ),
    )
}

/// Relative gap between the full and linearized excess on a 100-point grid up to ΔT/T0 = 0.1.
fn model_agreement() -> Outcome {
    let t0 = 294.0;
    let (mut worst, mut worst_x) = (0.0_f64, 0.0);
    for i in 1..=100 {
        let x = 0.1 * i as f64 / 100.0;
        let full = two_bath_tcom(t0, x * t0, 1.0).unwrap();
        let lin = two_bath_tcom_linearized(t0, x * t0, 1.0).unwrap();
        let gap = (full - lin).abs() / (full - t0);
        if gap > worst {
            worst = gap;
            worst_x = x;
        }
    }
    outcome(
        worst <= 0.005,
        format!("max |T_com − linear|/ΔT_com = {:.3}% at ΔT/T0 = {worst_x:.3} (limit 0.5%)", 100.0 * worst),
    )
}

/// The gap is the second-order term c2·x/s of the expansion; checks that this explains the shortfall.
fn model_agreement_shortfall_is_second_order() -> bool {
    let t0 = 294.0;
    let x = 0.1;
    let full = two_bath_tcom(t0, x * t0, 1.0).unwrap();
    let lin = two_bath_tcom_linearized(t0, x * t0, 1.0).unwrap();
    let gap = (full - lin).abs() / (full - t0);
    let second_order = SPHERE_QUADRATIC * x / (SPHERE_COUPLING + SPHERE_QUADRATIC * x);
    rel(gap, second_order) < 0.05
}

fn quadratic_coefficient() -> Outcome {
    let t0 = 294.0;
    let c = |h: f64| {
        let excess = two_bath_tcom(t0, h, 1.0).unwrap() - two_bath_tcom_linearized(t0, h, 1.0).unwrap();
        excess * t0 / (h * h)
    };
    let h = 4.0;
    let r1 = 2.0 * c(h / 2.0) - c(h);
    let r2 = 2.0 * c(h / 4.0) - c(h / 2.0);
    let r = (4.0 * r2 - r1) / 3.0;
    let err = rel(r, SPHERE_QUADRATIC);
    outcome(
        err < 1e-6,
        format!("Richardson quadratic coefficient {r:.9} vs 4π/(π+8)² = {SPHERE_QUADRATIC:.9}, rel. error {err:.1e}"),
    )
}

fn single_axis(f_q: f64, gamma_hz: f64, pressure_hpa: f64, seed: u64) -> SimulationConfig {
    let gas = GasEnvironment::air(pressure_hpa).unwrap();
    let radius = hydrodynamic_radius(gamma_hz, pressure_hpa, &gas, DIAMOND_DENSITY, 294.0).unwrap();
    let power_mw: f64 = 100.0;
    SimulationConfig {
        dt: 0.025 / f_q,
        duration: 1.0,
        seed,
        axes: vec![TrapAxis {
            label: AxisLabel::X,
            stiffness_coefficient: 2.0 * PI * f_q / (power_mw * 1e-3).sqrt(),
            detection_gain: 1e9,
        }],
        laser_power_mw: power_mw,
        gas,
        particle: ParticleModel::diamond_sphere(radius).unwrap(),
        heating: HeatingLaw::new(17.0, 294.0).unwrap(),
        alpha_c: 0.0,
        anomaly: None,
        detector_noise_psd: 0.0,
        integrator: Integrator::Exact,
    }
}

fn equipartition() -> Outcome {
    let mut cfg = single_axis(60e3, 2e3, 45.0, 0);
    cfg.duration = 0.2;
    let energies: Vec<f64> = (0..50)
        .map(|s| {
            let trace = simulate_trace(&SimulationConfig { seed: 300 + s, ..cfg.clone() }).unwrap();
            let t = trace.truth(AxisLabel::X).unwrap();
            let v = trace.channel(AxisLabel::X).unwrap();
            let q2 = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64 / t.sensitivity.powi(2);
            t.mass * t.omega().powi(2) * q2
        })
        .collect();
    let (mean, se) = mean_and_standard_error(&energies);
    let target = BOLTZMANN * 294.0;
    let z = (mean - target) / se;
    let energy_ok = z.abs() <= 3.0;

    // PSD fits on 64-segment estimates across three trap settings
    let mut worst = (0.0_f64, 0.0_f64, 0.0_f64);
    for (i, &(f_q, gamma, p)) in [(60e3, 2e3, 45.0), (30e3, 800.0, 20.0), (75e3, 6e3, 90.0)].iter().enumerate() {
        let mut cfg = single_axis(f_q, gamma, p, 900 + i as u64);
        let seg = ((10.0 / (gamma * cfg.dt)).ceil() as usize).next_power_of_two();
        let segments = 64.max((8000.0 / (PI * gamma) / (seg as f64 * cfg.dt)).ceil() as usize);
        cfg.duration = ((segments + 1) * seg / 2) as f64 * cfg.dt;
        let trace = simulate_trace(&cfg).unwrap();
        let truth = *trace.truth(AxisLabel::X).unwrap();
        let opts = WelchOptions {
            segment_length: seg,
            ..WelchOptions::default()
        };
        let psd = welch_psd(&trace, AxisLabel::X, &opts).unwrap();
        assert!(psd.segment_count >= 50);
        let fit = fit_psd(&psd, &PsdFitOptions::default()).unwrap();
        worst.0 = worst.0.max(rel(fit.f_q, truth.trap_frequency_hz));
        worst.1 = worst.1.max(rel(fit.gamma, truth.gamma_hz));
        worst.2 = worst.2.max(rel(fit.a, truth.integrated_power));
    }
    let psd_ok = worst.0 <= 0.01 && worst.1 <= 0.05 && worst.2 <= 0.05;
    outcome(
        energy_ok && psd_ok,
        format!(
            "⟨E_com⟩/k_B = {:.2} K over 50 seeds ({z:+.2} SE from 294 K); PSD fit worst errors f_q {:.3}%, γ {:.2}%, A {:.2}%",
            mean / BOLTZMANN,
            100.0 * worst.0,
            100.0 * worst.1,
            100.0 * worst.2
        ),
    )
}

fn k_recovery() -> Outcome {
    let mut cfg = CampaignConfig::standard();
    cfg.trace.duration = 4.0;
    cfg.esr_repetitions = 10;
    let report = run_campaign(&cfg).unwrap();
    let Some(est) = report.estimate.as_ref() else {
        return outcome(false, format!("no estimate; failures {:?}", report.failures));
    };
    let mut pass = report.failures.is_empty() && est.axes.len() == 2;
    let mut parts = Vec::new();
    for a in &est.axes {
        // per-pressure values agree with their weighted mean at the 1% level of a χ² test
        let consistent = chi2_upper_1pct(a.consistency_dof).is_some_and(|limit| a.consistency_chi2 <= limit);
        let within = (a.k - K_TARGET).abs() <= 0.03;
        pass &= within && consistent && a.per_pressure.len() == 4;
        let per: Vec<String> = a.per_pressure.iter().map(|k| format!("{:.0}:{:.3}", k.pressure_hpa, k.k)).collect();
        parts.push(format!(
            "K_{} = {:.4} ± {:.4} (χ² {:.2}/{} dof; {})",
            a.axis,
            a.k,
            a.k_sigma,
            a.consistency_chi2,
            a.consistency_dof,
            per.join(" ")
        ));
    }
    outcome(pass, format!("{}; target {K_TARGET} ± 0.03", parts.join("; ")))
}

/// 99th percentile of χ² for small degrees of freedom.
fn chi2_upper_1pct(dof: usize) -> Option<f64> {
    [6.635, 9.210, 11.345, 13.277, 15.086, 16.812].get(dof.checked_sub(1)?).copied()
}

fn thermometry() -> Outcome {
    let cfg = CampaignConfig::standard();
    let mut points = Vec::new();
    for (pi, &p) in cfg.pressures_hpa.iter().enumerate() {
        for (wi, &power) in cfg.powers_mw.iter().enumerate() {
            for rep in 0..10 {
                let seed = 77_000 + (pi * 1000 + wi * 100 + rep) as u64;
                let spectrum = simulate_esr(&cfg.heating, &cfg.zfs_law, power, p, &cfg.esr, seed).unwrap();
                let reading = temperature_from_esr(&fit_esr(&spectrum).unwrap(), &cfg.zfs_law).unwrap();
                points.push(HeatingPoint {
                    power_mw: power,
                    pressure_hpa: p,
                    t_raw: reading.temperature,
                    sigma: reading.sigma,
                });
            }
        }
    }
    let fit = fit_heating_law(&points, 294.0, Weighting::Weighted).unwrap();
    let err = rel(fit.kappa_heat, 17.0);
    let corrected_t0 = fit.t0_fit + fit.strain_offset_k;
    outcome(
        err <= 0.05 && fit.t0_corrected == 294.0 && (corrected_t0 - 294.0).abs() < 1e-9,
        format!(
            "κ = {:.3} ± {:.3} K·hPa/mW ({:.2}% from 17); raw T0 {:.2} K, offset {:+.2} K, corrected T0 {}",
            fit.kappa_heat,
            fit.kappa_sigma,
            100.0 * err,
            fit.t0_fit,
            fit.strain_offset_k,
            fit.t0_corrected
        ),
    )
}

fn cylinder_model() -> Outcome {
    let gas = GasEnvironment::air(45.0).unwrap();
    let sweep = TemperatureSweep::default();
    let radius = 40e-9;
    let k_sphere = sphere_k(294.0, &sweep).unwrap();
    let lengths: Vec<f64> = (0..=120).map(|i| 2.0 * radius * (1.0 + i as f64 * 0.05)).collect();
    let scan = cylinder_shape_scan(radius, &lengths, DIAMOND_DENSITY, &gas, &sweep).unwrap();
    let equal = &scan[0];
    let g_exact = equal.anisotropy == 1.0;
    let sphere_limit = rel(equal.k_parallel, k_sphere).max(rel(equal.k_perpendicular, k_sphere));
    let elongated: Vec<_> = scan.iter().filter(|p| p.anisotropy > 1.0 && p.anisotropy <= 1.5).collect();
    let bracketed = elongated.iter().all(|p| {
        p.k_parallel.min(p.k_perpendicular) < k_sphere && k_sphere < p.k_parallel.max(p.k_perpendicular)
    });
    let g_max = elongated.iter().map(|p| p.anisotropy).fold(1.0, f64::max);
    outcome(
        g_exact && sphere_limit < 0.01 && bracketed && g_max > 1.45,
        format!(
            "g(l=2R) = {}; K at g=1 within {:.1e} of sphere K {k_sphere:.5}; {} shapes with 1 < g ≤ {g_max:.3} bracket: {bracketed}",
            equal.anisotropy,
            sphere_limit,
            elongated.len()
        ),
    )
}

/// Force noise on y whose apparent coupling is `k_at_reference` at the reference pressure
/// and grows as 1/p below it.
fn anomaly_campaign(seed: u64, k_at_reference: f64) -> CampaignConfig {
    let mut cfg = CampaignConfig::standard();
    cfg.seed = seed;
    cfg.repetitions = 5;
    cfg.trace.duration = 0.25;
    cfg.esr_repetitions = 3;
    let p_ref = 100.0;
    let truth = ground_truth(&cfg.cell_simulation(p_ref, cfg.powers_mw[0], 0).unwrap()).unwrap();
    let y = truth.iter().find(|t| t.label == AxisLabel::Y).unwrap();
    let s = k_at_reference * 4.0 * y.mass * y.gamma_rad() * BOLTZMANN * cfg.heating.kappa_heat / p_ref;
    cfg.anomaly = Some(AnomalyInjection {
        axis: AxisLabel::Y,
        extra_force_psd_per_mw: s,
        reference_pressure_hpa: p_ref,
        pressure_exponent: 1.0,
    });
    cfg
}

fn anomaly_classification() -> Outcome {
    let mut misclassified_x = 0;
    let mut y_overheated = 0;
    let mut signature = 0;
    let mut kx = Vec::new();
    for seed in 0..20 {
        let report = run_campaign(&anomaly_campaign(500 + seed, 1.2)).unwrap();
        let est = report.estimate.as_ref().unwrap();
        let axis = |l| est.axes.iter().find(|a| a.axis == l).unwrap();
        let (x, y) = (axis(AxisLabel::X), axis(AxisLabel::Y));
        misclassified_x += usize::from(x.flag != OverheatingFlag::Thermal);
        y_overheated += usize::from(y.flag == OverheatingFlag::Overheated);
        let ky = |p: f64| y.per_pressure.iter().find(|k| k.pressure_hpa == p).map(|k| k.k);
        let rising = matches!((ky(45.0), ky(100.0)), (Some(lo), Some(hi)) if lo > hi && hi > 1.0);
        signature += usize::from(rising && (x.k - K_TARGET).abs() < 0.1);
        kx.push(x.k);
    }
    let (kx_mean, kx_se) = mean_and_standard_error(&kx);
    outcome(
        misclassified_x == 0 && y_overheated == 20 && signature == 20,
        format!(
            "20 seeds: y overheated {y_overheated}/20, x misclassified {misclassified_x}/20, \
             K_y > 1 rising as p falls with K_x ≈ {K_TARGET}: {signature}/20; mean K_x = {kx_mean:.3} ± {kx_se:.3}"
        ),
    )
}

fn parseval() -> Outcome {
    let dt = 1e-6;
    let n = 4096;
    let df = 1.0 / (n as f64 * dt);
    let mut worst = 0.0_f64;
    for (amps, bins) in [(vec![1.0], vec![100]), (vec![0.3, 2.0, 1e-3], vec![17, 250, 1900])] {
        let samples: Vec<f64> = (0..16 * n)
            .map(|i| {
                let t = i as f64 * dt;
                amps.iter().zip(&bins).map(|(a, &k)| a * (2.0 * PI * k as f64 * df * t).sin()).sum()
            })
            .collect();
        let ms = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
        let psd = welch_psd_samples(&samples, dt, &WelchOptions { segment_length: n, ..WelchOptions::default() }).unwrap();
        worst = worst.max(rel(psd.integral(), ms));
        let expected: f64 = amps.iter().map(|a| a * a / 2.0).sum();
        worst = worst.max(rel(psd.integral(), expected));
    }
    outcome(worst <= 1e-6, format!("worst relative mismatch {worst:.1e} (limit 1e-6)"))
}

fn main() -> ExitCode {
    type Check = (&'static str, fn() -> Outcome, bool);
    let checks: [Check; 9] = [
        ("1 analytic slope", analytic_slope, true),
        ("2a model agreement", model_agreement, false),
        ("2b quadratic coefficient", quadratic_coefficient, true),
        ("3 equipartition and PSD fit", equipartition, true),
        ("4 end-to-end K recovery", k_recovery, true),
        ("5 thermometry", thermometry, true),
        ("6 cylinder model", cylinder_model, true),
        ("7 anomaly classification", anomaly_classification, true),
        ("8 Parseval", parseval, true),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = 0;
    for (name, check, expected) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {verdict} [{:.1} s] {}", start.elapsed().as_secs_f64(), out.detail);
        if out.pass != expected {
            unexpected += 1;
            println!("  unexpected outcome for criterion {name}");
        }
    }
    // 2a cannot hold: the second-order term alone exceeds the tolerance at ΔT/T0 = 0.1
    if !model_agreement_shortfall_is_second_order() {
        unexpected += 1;
        println!("  criterion 2a shortfall is not explained by the second-order term");
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
