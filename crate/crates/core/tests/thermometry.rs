use hbm_core::simulate::{simulate_esr, EsrSimConfig};
use hbm_core::thermometry::{
    fit_esr, fit_heating_law, temperature_from_esr, HeatingPoint, Weighting, ZfsLaw,
};
use hbm_core::twobath::{internal_temperature, HeatingLaw};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const PRESSURES: [f64; 4] = [45.0, 60.0, 80.0, 100.0];
const POWERS: [f64; 5] = [30.0, 60.0, 90.0, 120.0, 150.0];

fn synthetic_law() -> ZfsLaw {
    ZfsLaw::new(vec![2.9e9, -5.0e4, -100.0, 0.05], 200.0, 800.0, "synthetic cubic").unwrap()
}

fn heating() -> HeatingLaw {
    HeatingLaw::new(17.0, 294.0).unwrap()
}

#[test]
fn kappa_recovered_from_gaussian_noise_campaigns() {
    let normal = Normal::new(0.0, 2.0).unwrap();
    let mut kappas = Vec::new();
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        for &p in &PRESSURES {
            for &power in &POWERS {
                for _ in 0..10 {
                    let t = internal_temperature(&heating(), power, p).unwrap();
                    points.push(HeatingPoint {
                        power_mw: power,
                        pressure_hpa: p,
                        t_raw: t + 3.5 + normal.sample(&mut rng),
                        sigma: 2.0,
                    });
                }
            }
        }
        let fit = fit_heating_law(&points, 294.0, Weighting::Weighted).unwrap();
        assert!((fit.kappa_heat / 17.0 - 1.0).abs() < 0.05, "seed {seed}: κ = {}", fit.kappa_heat);
        assert!((fit.t0_fit - 297.5).abs() < 4.0 * fit.t0_sigma);
        assert!((fit.strain_offset_k + 3.5).abs() < 4.0 * fit.t0_sigma);
        assert_eq!(fit.t0_corrected, 294.0);
        kappas.push((fit.kappa_heat, fit.kappa_sigma));
    }
    // reported σ_κ matches the scatter across seeds
    let n = kappas.len() as f64;
    let mean = kappas.iter().map(|k| k.0).sum::<f64>() / n;
    let sd = (kappas.iter().map(|k| (k.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let reported = kappas.iter().map(|k| k.1).sum::<f64>() / n;
    assert!((mean - 17.0).abs() < 3.0 * sd / n.sqrt());
    assert!((reported / sd - 1.0).abs() < 0.25, "reported {reported}, scatter {sd}");
}

/// simulate_esr → fit_esr → temperature_from_esr → fit_heating_law.
fn esr_campaign(law: &ZfsLaw, cfg: &EsrSimConfig, seed: u64) -> Vec<HeatingPoint> {
    let mut points = Vec::new();
    for (pi, &p) in PRESSURES.iter().enumerate() {
        for (wi, &power) in POWERS.iter().enumerate() {
            let s = seed * 1000 + (pi * 10 + wi) as u64;
            let fit = fit_esr(&simulate_esr(&heating(), law, power, p, cfg, s).unwrap()).unwrap();
            let reading = temperature_from_esr(&fit, law).unwrap();
            points.push(HeatingPoint {
                power_mw: power,
                pressure_hpa: p,
                t_raw: reading.temperature,
                sigma: reading.sigma,
            });
        }
    }
    points
}

#[test]
fn esr_chain_recovers_heating_law() {
    let law = synthetic_law();
    let cfg = EsrSimConfig::default();
    for seed in 0..5 {
        let fit = fit_heating_law(&esr_campaign(&law, &cfg, seed), 294.0, Weighting::Weighted).unwrap();
        assert!((fit.kappa_heat / 17.0 - 1.0).abs() < 0.05, "κ = {}", fit.kappa_heat);
        assert!((fit.t0_fit - 294.0).abs() < 4.0 * fit.t0_sigma, "T0 = {} ± {}", fit.t0_fit, fit.t0_sigma);
    }
}

#[test]
fn esr_chain_absorbs_strain_offset() {
    let law = ZfsLaw::toyli();
    let cfg = EsrSimConfig {
        zfs_offset_hz: 4e5,
        ..EsrSimConfig::default()
    };
    let points = esr_campaign(&law, &cfg, 11);
    let fit = fit_heating_law(&points, 294.0, Weighting::Weighted).unwrap();
    assert!((fit.kappa_heat / 17.0 - 1.0).abs() < 0.05, "κ = {}", fit.kappa_heat);
    // a positive D shift reads as a colder particle
    assert!(fit.t0_fit < 294.0 && fit.strain_offset_k > 0.0);
    assert_eq!(fit.t0_corrected, 294.0);
    // corrected lowest-heating reading lands near the true internal temperature
    let first = &points[0];
    let truth = internal_temperature(&heating(), first.power_mw, first.pressure_hpa).unwrap();
    assert!((fit.correct(first.t_raw) - truth).abs() < 4.0 * first.sigma.max(fit.t0_sigma));
}

#[test]
fn temperature_inverts_zero_field_splitting() {
    for law in [synthetic_law(), ZfsLaw::toyli()] {
        let (lo, hi) = law.range();
        for i in 0..=200 {
            let t = lo + (hi - lo) * i as f64 / 200.0;
            let back = law.t_of_d(law.d_of_t(t).unwrap()).unwrap();
            assert!((back - t).abs() < 1e-3, "{}: {t} K -> {back} K", law.source());
        }
        assert!(law.t_of_d(law.d_of_t(hi).unwrap() - 1e7).is_err());
    }
}
