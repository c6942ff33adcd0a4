use ddegk::dde::integrate_dde;
use ddegk::gk::suarez_schopf_perturbed;
use ddegk::stochastic::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

fn frozen(tau: f64, sigma: f64) -> StochasticModel {
    StochasticModel {
        sigma,
        tau0: tau,
        tau1: tau,
        epsilon: 0.0,
        ..StochasticModel::tipping_default()
    }
}

#[test]
fn schedule_examples() {
    let lin = StochasticModel::tipping_default();
    let t = tau_schedule(&lin, 237.8);
    assert!((t - 1.64975).abs() < 1e-5 && t <= lin.tau1, "{t}");
    assert_eq!(tau_schedule(&lin, 1e4), lin.tau1);
    assert_eq!(tau_schedule(&frozen(1.5, 0.2), 77.0), 1.5);
    let tri = StochasticModel::oscillating_default();
    let p = tri.triangle_period();
    assert_eq!(tau_schedule(&tri, 0.0), tri.tau0);
    assert!((tau_schedule(&tri, 0.5 * p) - tri.tau1).abs() < 1e-12);
    assert!((tau_schedule(&tri, p) - tri.tau0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn delay_stays_in_range(t in 0.0f64..1e5, eps in 0.0f64..1e-2, tri in any::<bool>()) {
        let m = StochasticModel {
            epsilon: eps,
            schedule: if tri { Schedule::Triangle } else { Schedule::Linear },
            ..StochasticModel::tipping_default()
        };
        let tau = tau_schedule(&m, t);
        prop_assert!(m.tau0 <= tau && tau <= m.tau1);
    }

    #[test]
    fn diffusion_bounded_by_sigma(theta in -50.0f64..50.0, sigma in 0.0f64..2.0) {
        let m = StochasticModel { sigma, ..StochasticModel::tipping_default() };
        let d = m.diffusion(theta);
        prop_assert!(d <= sigma);
        if theta != 0.0 && sigma > 0.0 {
            prop_assert!(d < sigma);
        }
    }
}

#[test]
fn seeds_are_reproducible() {
    let m = StochasticModel::tipping_default();
    let h = default_history(&m);
    let a = simulate_tsp(&m, &h, 0.01, 20_000, 42).unwrap();
    let b = simulate_tsp(&m, &h, 0.01, 20_000, 42).unwrap();
    let c = simulate_tsp(&m, &h, 0.01, 20_000, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.theta, c.theta);
    assert!(a.tau_t.iter().all(|&t| (m.tau0..=m.tau1).contains(&t)));
    let diff = a.theta.iter().map(|&x| m.diffusion(x)).fold(0.0, f64::max);
    assert!(diff <= m.sigma);
}

#[test]
fn deterministic_limit_is_first_order() {
    let tau = 1.45;
    let m = frozen(tau, 0.0);
    let h = |s: f64| 0.3 + 0.1 * s;
    let t_end = 50.0;
    let reference = integrate_dde(&suarez_schopf_perturbed(0.75, tau).unwrap(), &h, t_end, tau / 1024.0).unwrap();
    let err = |dt: f64| {
        let steps = (t_end / dt).round() as usize;
        let run = simulate_tsp(&m, &h, dt, steps, 0).unwrap();
        run.times
            .iter()
            .zip(&run.theta)
            .map(|(&t, &x)| (x - reference.eval(t)).abs())
            .fold(0.0, f64::max)
    };
    let e: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&d| err(d)).collect();
    for k in 0..2 {
        let order = (e[k] / e[k + 1]).log2();
        assert!((order - 1.0).abs() < 0.15, "errors {e:?}");
    }
}

#[test]
fn long_run_window_in_years() {
    let dt = 2e-3;
    let steps = 1_000_000;
    let yr = to_physical_years(dt * steps as f64);
    assert!((yr - 1125.0).abs() < 1.0, "{yr}");
    assert_eq!(to_physical_years(0.0), 0.0);
    assert!((from_physical_years(5.78) - 10.27).abs() < 0.01);
    let m = StochasticModel::oscillating_default();
    let run = simulate_tsp(&m, &default_history(&m), dt, steps, 7).unwrap();
    assert_eq!(run.len(), steps + 1);
    assert!((to_physical_years(*run.times.last().unwrap()) - yr).abs() < 1e-6);
}

#[test]
fn bad_inputs_rejected() {
    let m = StochasticModel::tipping_default();
    let h = default_history(&m);
    assert!(simulate_tsp(&m, &h, 0.0, 10, 0).is_err());
    assert!(simulate_tsp(&m, &h, 2.0, 10, 0).is_err());
    let neg = StochasticModel { sigma: -0.1, ..m.clone() };
    assert!(simulate_tsp(&neg, &h, 0.01, 10, 0).is_err());
    let swapped = StochasticModel { tau0: 1.7, tau1: 1.6, ..m.clone() };
    assert!(simulate_tsp(&swapped, &h, 0.01, 10, 0).is_err());
    assert!(welch_psd(&[0.0; 100], 0.01, DEFAULT_SEGMENT_YEARS).is_err());
}

fn sinusoid(period_yr: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (2.0 * PI * to_physical_years(k as f64 * dt) / period_yr).sin())
        .collect()
}

#[test]
fn welch_locates_a_sinusoid() {
    let dt = 0.01;
    let x = sinusoid(5.5, dt, 200_000);
    let psd = welch_psd(&x, dt, DEFAULT_SEGMENT_YEARS).unwrap();
    let best = (0..psd.power.len()).max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b])).unwrap();
    let df = psd.frequency[1];
    assert!((psd.frequency[best] - 1.0 / 5.5).abs() <= df, "peak at {} yr", 1.0 / psd.frequency[best]);
}

#[test]
fn welch_white_noise_is_flat() {
    let dt = 0.01;
    let n = 100_000;
    let spectra: Vec<Psd> = (0..20u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            welch_psd(&x, dt, DEFAULT_SEGMENT_YEARS).unwrap()
        })
        .collect();
    let bins = spectra[0].power.len();
    let mean: Vec<f64> = (1..bins - 1)
        .map(|k| spectra.iter().map(|s| s.power[k]).sum::<f64>() / spectra.len() as f64)
        .collect();
    let level = mean.iter().sum::<f64>() / mean.len() as f64;
    let worst_db = mean.iter().map(|p| (10.0 * (p / level).log10()).abs()).fold(0.0, f64::max);
    assert!(worst_db <= 3.0, "deviation {worst_db} dB");
    // one-sided density of unit variance noise is 2 dt_yr
    assert!((level / (2.0 * to_physical_years(dt)) - 1.0).abs() < 0.05);
}

#[test]
fn band_filter_passes_and_rejects() {
    let dt = 0.02;
    let n = 100_000;
    let band = (15.0, 30.0);
    let rms = |v: &[f64]| {
        // ignore the ends, where the even extension differs from the signal
        let mid = &v[n / 10..9 * n / 10];
        (mid.iter().map(|x| x * x).sum::<f64>() / mid.len() as f64).sqrt()
    };
    let inside = sinusoid(21.0, dt, n);
    let kept = band_filter(&inside, dt, band).unwrap();
    let ratio = rms(&kept) / rms(&inside);
    assert!((ratio - 1.0).abs() <= 0.05, "in-band gain {ratio}");
    let outside = sinusoid(5.5, dt, n);
    let gone = band_filter(&outside, dt, band).unwrap();
    let db = 20.0 * (rms(&gone) / rms(&outside)).log10();
    assert!(db <= -20.0, "out-of-band attenuation {db} dB");
    assert!(band_filter(&inside, dt, (20.0, 20.01)).is_err());
    assert!(band_filter(&inside, dt, (30.0, 15.0)).is_err());
}

#[test]
fn psd_csv_is_by_period() {
    let psd = welch_psd(&sinusoid(5.5, 0.01, 50_000), 0.01, 60.0).unwrap();
    let csv = psd.to_csv();
    assert!(csv.starts_with("period_yr,power\n"));
    assert_eq!(csv.lines().count(), psd.by_period().len() + 1);
}
