use ddegk::bifurcation::*;
use ddegk::gk::{suarez_schopf_perturbed, DdeSpec};
use ddegk::manifold::ReducedSystem2D;
use ddegk::poly::{Monomial, Poly3};
use ddegk::Result;

fn factory(tau: f64) -> Result<ReducedSystem2D> {
    ReducedSystem2D::build(&suarez_schopf_perturbed(0.75, tau)?, 6)
}

fn reduced(tau: f64) -> ReducedSystem2D {
    factory(tau).unwrap()
}

const TAU_C6: f64 = 1.740864;

// distance to the closed polygon through the sampled loop
fn dist_to_path(path: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = path.len();
    (0..n)
        .map(|i| {
            let (a, b) = (path[i], path[(i + 1) % n]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
        })
        .fold(f64::INFINITY, f64::min)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn hopf_amplitude_follows_square_root_law() {
    let s = OrbitSettings::default();
    let deltas = [1e-3, 1.6e-3, 2.5e-3, 4e-3, 6.3e-3, 1e-2];
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for d in deltas {
        let o = compute_upo(&reduced(TAU_C6 - d), Family::UpoInnerPlus, &s).unwrap();
        lx.push(d.ln());
        ly.push(o.orbit.amplitude.ln());
    }
    let k = slope(&lx, &ly);
    assert!((k - 0.5).abs() <= 0.05, "log-log slope {k}");
}

#[test]
fn upos_repel_and_stable_cycles_attract() {
    let s = OrbitSettings::default();
    let red = reduced(1.7);
    let check = |o: &ReducedOrbit, grows: bool| {
        let p0 = o.path[0];
        for sign in [1.0, -1.0] {
            let start = [p0[0] * (1.0 + sign * 1e-3), p0[1] * (1.0 + sign * 1e-3)];
            let d0 = dist_to_path(&o.path, start);
            let steps = (10.0 * o.orbit.period / s.dt) as usize;
            let traj = red.integrate(start, s.dt, steps, steps).unwrap();
            let d1 = dist_to_path(&o.path, *traj.last().unwrap());
            if grows {
                assert!(d1 > 5.0 * d0, "{:?}: {d0:e} -> {d1:e}", o.family());
            } else {
                assert!(d1 < 0.2 * d0, "{:?}: {d0:e} -> {d1:e}", o.family());
            }
        }
    };
    check(&compute_upo(&red, Family::UpoInnerPlus, &s).unwrap(), true);
    check(&compute_upo(&red, Family::UpoInnerMinus, &s).unwrap(), true);
    check(&compute_stable_cycle(&red, &s).unwrap(), false);
}

#[test]
fn inner_upos_mirror_through_the_saddle() {
    // in unperturbed variables T -> -T maps theta onto -theta - 2 T+
    let s = OrbitSettings::default();
    let red = reduced(1.7);
    let plus = compute_upo(&red, Family::UpoInnerPlus, &s).unwrap().orbit;
    let minus = compute_upo(&red, Family::UpoInnerMinus, &s).unwrap().orbit;
    assert!((plus.period - minus.period).abs() < 1e-3 * plus.period);
    assert!((plus.amplitude - minus.amplitude).abs() < 0.02 * plus.amplitude);
    assert!((plus.max() + minus.min() + 1.0).abs() < 0.01, "{} {}", plus.max(), minus.min());
    assert!((plus.min() + minus.max() + 1.0).abs() < 0.01, "{} {}", plus.min(), minus.max());
}

#[test]
fn nothing_periodic_below_the_fold() {
    let s = OrbitSettings::default();
    let red = reduced(1.5);
    assert!(compute_stable_cycle(&red, &s).is_err());
    for f in [Family::UpoInnerPlus, Family::UpoInnerMinus, Family::UpoOuter] {
        assert!(compute_upo(&red, f, &s).is_err(), "{f:?}");
    }
}

#[test]
fn only_the_stable_cycle_survives_above_hopf() {
    let s = OrbitSettings::default();
    let red = reduced(2.0);
    assert!(compute_stable_cycle(&red, &s).is_ok());
    for f in [Family::UpoInnerPlus, Family::UpoInnerMinus, Family::UpoOuter] {
        assert!(compute_upo(&red, f, &s).is_err(), "{f:?}");
    }
}

#[test]
fn fold_cycles_nearly_coincide() {
    let s = OrbitSettings::default();
    let red = reduced(1.562);
    let stable = compute_stable_cycle(&red, &s).unwrap().orbit;
    let outer = compute_upo(&red, Family::UpoOuter, &s).unwrap().orbit;
    assert!((stable.amplitude - outer.amplitude).abs() < 0.05 * stable.amplitude);
    // and the outer family is present just below the homoclinic value
    assert!(compute_upo(&reduced(1.585), Family::UpoOuter, &s).is_ok());
}

#[test]
fn inner_branch_terminates_at_hopf() {
    let s = OrbitSettings::default();
    let taus: Vec<f64> = (0..=6).map(|k| 1.70 + 0.01 * k as f64).collect();
    let seq = continue_branch(factory, &taus, Family::UpoInnerPlus, &s, false);
    let (stop, _) = seq.terminated.clone().expect("branch must end at the Hopf point");
    assert!(stop > TAU_C6 && stop < TAU_C6 + 0.01);
    assert_eq!(seq.points.len(), 5);
    assert!(seq.points.windows(2).all(|w| w[1].amplitude < w[0].amplitude));
    let par = continue_branch(factory, &taus, Family::UpoInnerPlus, &s, true);
    assert_eq!(par.points.len(), seq.points.len());
    for (a, b) in par.points.iter().zip(&seq.points) {
        assert!((a.period - b.period).abs() < 1e-4 * a.period);
    }
}

#[test]
fn stable_branch_grows_with_delay() {
    let s = OrbitSettings::default();
    let taus: Vec<f64> = (0..=4).map(|k| 1.6 + 0.1 * k as f64).collect();
    let b = continue_branch(factory, &taus, Family::StableCycle, &s, false);
    assert!(b.terminated.is_none());
    assert!(b.points.windows(2).all(|w| w[1].amplitude > w[0].amplitude));
}

#[test]
fn period_grows_logarithmically_near_homoclinic() {
    let s = OrbitSettings::default();
    let tau_h = detect_homoclinic(factory, (1.57, 1.62), &s).unwrap();
    assert!((tau_h - 1.5906).abs() < 0.01, "tau# {tau_h}");
    let offsets = [1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2];
    let periods: Vec<f64> = offsets
        .iter()
        .map(|d| compute_upo(&reduced(tau_h + d), Family::UpoInnerPlus, &s).unwrap().orbit.period)
        .collect();
    assert!(periods.windows(2).all(|w| w[0] > w[1]), "{periods:?}");
    // T ~ -c ln(tau - tau#): equal increments per halving of the distance
    let inc: Vec<f64> = periods.windows(2).map(|w| w[0] - w[1]).collect();
    let (lo, hi) = inc.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 2.0, "increments {inc:?}");
}

#[test]
fn hopf_classifier_signs() {
    let (tau_c, l1, kind) = detect_hopf(0.6, 6).unwrap();
    assert!(tau_c > 0.0 && l1 > 0.0);
    assert_eq!(kind, HopfType::Subcritical);
    let cubic = |coeff: f64| {
        move |tau: f64| -> Result<DdeSpec> {
            DdeSpec::new(0.25, -0.75, 0.0, tau, Poly3::new([Monomial { exps: [3, 0, 0], coeff }])?)
        }
    };
    let scan: Vec<f64> = (1..=200).map(|k| 0.025 * k as f64).collect();
    assert_eq!(detect_hopf_with(cubic(-1.0), 6, &scan).unwrap().2, HopfType::Supercritical);
    assert_eq!(detect_hopf_with(cubic(1.0), 6, &scan).unwrap().2, HopfType::Subcritical);
    assert!(detect_hopf_with(cubic(0.0), 6, &scan).is_err());
}

#[test]
fn bisection_rejects_bad_brackets() {
    let s = OrbitSettings::default();
    assert!(detect_sno(factory, (1.6, 1.7), &s).is_err());
    assert!(detect_sno(factory, (1.5, 1.52), &s).is_err());
    assert!(detect_homoclinic(factory, (1.62, 1.57), &s).is_err());
}

#[test]
fn diagram_round_trip() {
    assert_eq!(diagram_csv(&[]), "family,tau,amplitude,period\n");
    assert!(parse_diagram_csv(&diagram_csv(&[])).unwrap().is_empty());
    let pts = vec![
        BranchPoint { family: Family::UpoOuter, tau: 1.58, amplitude: 1.2, period: 30.780527 },
        BranchPoint { family: Family::StableCycle, tau: 1.7, amplitude: 1.6, period: 11.364 },
        BranchPoint { family: Family::StableCycle, tau: 1.6, amplitude: 1.5, period: 1.0 / 3.0 },
    ];
    let text = diagram_csv(&pts);
    let back = parse_diagram_csv(&text).unwrap();
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.family.cmp(&b.family).then(a.tau.total_cmp(&b.tau)));
    assert_eq!(back, sorted);
    assert!(parse_diagram_csv("tau,family\n").is_err());
}
