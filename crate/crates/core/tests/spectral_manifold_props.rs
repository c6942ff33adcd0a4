use ddegk::gk::*;
use ddegk::manifold::*;
use ddegk::spectral::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn setup(tau: f64, n: usize) -> (GkSystem, SpectralData, Interactions) {
    let system = GkSystem::assemble(&suarez_schopf_perturbed(0.75, tau).unwrap(), n).unwrap();
    let spectrum = eigendecompose(&system).unwrap();
    let inter = Interactions::new(&system, &spectrum).unwrap();
    (system, spectrum, inter)
}

fn tau_c6() -> f64 {
    find_tau_c(0.75, 6, (1.6, 1.9)).unwrap()
}

#[test]
fn biorthonormal_and_sorted() {
    for n in [6, 12, 20, 30] {
        for tau in [1.5, 1.74, 2.2] {
            let (_, s, _) = setup(tau, n);
            assert!(s.biorthonormality_error() <= 1e-10, "N {n} tau {tau}: {:e}", s.biorthonormality_error());
            let ev = s.eigenvalues();
            assert!(ev.windows(2).all(|w| lexicographic(&w[0], &w[1]) != std::cmp::Ordering::Greater));
        }
    }
}

#[test]
fn conjugate_modes_are_conjugate() {
    let (_, s, _) = setup(1.7, 12);
    for j in 0..s.dim() {
        if let Some(k) = s.conjugate_partner(j) {
            let d = (s.right(k) - s.right(j).map(|z| z.conj())).norm();
            assert!(d < 1e-12, "mode {j}: {d:e}");
        } else {
            assert_eq!(s.lambda(j).im, 0.0);
        }
    }
}

#[test]
fn eigenvalue_paths_are_continuous() {
    let taus: Vec<f64> = (0..=120).map(|k| 1.3 + 0.01 * k as f64).collect();
    let paths = eigen_sweep(0.75, 20, &taus, 6).unwrap();
    for j in 0..6 {
        let d: Vec<f64> = paths.windows(2).map(|w| (w[1][j] - w[0][j]).norm()).collect();
        for k in 1..d.len() - 1 {
            let local = d[k - 1].max(d[k + 1]);
            assert!(d[k] <= 10.0 * local + 1e-12, "branch {j} jumps at tau {}", taus[k]);
        }
    }
}

#[test]
fn critical_pair_crosses_alone() {
    let grid: Vec<f64> = (0..=40).map(|k| 1.6 + 0.005 * k as f64).collect();
    let report = pes_verify(0.75, 12, &grid).unwrap();
    assert_eq!(report.m_c, 2);
    let (lo, hi) = report.crossing;
    assert!(lo < 1.7408395 && 1.7408395 < hi);
    assert!(report.min_gap > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn homological_residuals_vanish(
        tau in 1.55f64..1.95,
        r1 in 0.0f64..0.7, a1 in 0.0f64..6.3,
        r2 in 0.0f64..0.7, a2 in 0.0f64..6.3,
    ) {
        let (_, spectrum, inter) = setup(tau, 6);
        let param = ManifoldParam::build_psi(&inter, &spectrum).unwrap();
        let x = [Complex64::from_polar(r1, a1), Complex64::from_polar(r2, a2)];
        prop_assert!(param.homological_residual(&inter, x, 2) <= 1e-10);
        prop_assert!(param.homological_residual(&inter, x, 3) <= 1e-10);
    }

    #[test]
    fn lyapunov_coefficient_scales_with_mode_norm(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 0.1);
        let (system, spectrum, inter) = setup(tau_c6(), 6);
        let l1 = lyapunov_coefficient(&inter, &spectrum).unwrap();
        let scaled = spectrum.with_mode_scaled(0, c);
        let inter2 = Interactions::new(&system, &scaled).unwrap();
        let l1c = lyapunov_coefficient(&inter2, &scaled).unwrap();
        let expect = c.norm_sqr() * l1;
        prop_assert!((l1c - expect).abs() <= 1e-10 * expect.abs(), "{} vs {}", l1c, expect);
        prop_assert!(l1c > 0.0);
    }

    #[test]
    fn reduced_field_keeps_conjugacy(p in -0.8f64..0.8, q in -0.8f64..0.8) {
        let red = ReducedSystem2D::build(&suarez_schopf_perturbed(0.75, 1.7).unwrap(), 6).unwrap();
        let x = Complex64::new(p, q);
        let f = red.rhs([x, x.conj()]);
        prop_assert!((f[1] - f[0].conj()).norm() <= 1e-12 * (1.0 + f[0].norm()));
        let path = red.integrate([p * 0.3, q * 0.3], 0.01, 500, 50).unwrap();
        for pq in path {
            let z = Complex64::new(pq[0], pq[1]);
            prop_assert!(red.lift_complex([z, z.conj()]).im.abs() <= 1e-10);
        }
    }
}

#[test]
fn lyapunov_perron_quadrature_matches_phi() {
    let (_, spectrum, inter) = setup(tau_c6(), 6);
    let param = ManifoldParam::build_phi2(&inter, &spectrum).unwrap();
    // the trapezoid error grows like |X|^2; at |X| = 0.2 it sits near 4e-7
    let x1 = Complex64::from_polar(0.2, -0.517);
    let x = [x1, x1.conj()];
    let lam = spectrum.eigenvalues();
    let nodes = 10_000;
    let (a, b) = (-40.0, 0.0);
    let h = (b - a) / (nodes - 1) as f64;
    let phi = param.phi(x);
    for s_idx in 2..spectrum.dim() {
        let integrand = |s: f64| {
            let z = [x[0] * (lam[0] * s).exp(), x[1] * (lam[1] * s).exp()];
            let g2 = inter.nu_c(s_idx) * inter.f_k_at(2, inter.functionals_of(&z));
            (-lam[s_idx] * s).exp() * g2
        };
        let mut sum = 0.5 * (integrand(a) + integrand(b));
        for k in 1..nodes - 1 {
            sum += integrand(a + k as f64 * h);
        }
        let quad = sum * h;
        let err = (quad - phi[s_idx - 2]).norm();
        assert!(err <= 1e-6, "mode {s_idx}: quadrature {quad} vs {}, error {err:e}", phi[s_idx - 2]);
    }
}

#[test]
fn reduced_origin_is_a_hopf_focus() {
    let red = ReducedSystem2D::build(&suarez_schopf_perturbed(0.75, 1.7).unwrap(), 6).unwrap();
    let zero = Complex64::new(0.0, 0.0);
    let f = red.rhs([zero, zero]);
    assert_eq!(f[0], zero);
    assert_eq!(red.field(0).get(1, 0), red.lambda()[0]);
    assert_eq!(red.field(0).get(0, 1), zero);
    assert_eq!(red.field(1).get(0, 1), red.lambda()[1]);
    assert_eq!(red.field(1).get(1, 0), zero);
    // finite-difference Jacobian in the complex coordinates
    let h = 1e-7;
    for j in 0..2 {
        let mut e = [zero, zero];
        e[j] = Complex64::new(h, 0.0);
        let col = red.rhs(e);
        for (i, c) in col.iter().enumerate() {
            let expect = if i == j { red.lambda()[j] } else { zero };
            assert!((c / h - expect).norm() < 1e-5, "J[{i}][{j}] = {}", c / h);
        }
    }
}

#[test]
fn lyapunov_rescaling_examples() {
    let (system, spectrum, inter) = setup(tau_c6(), 6);
    let l1 = lyapunov_coefficient(&inter, &spectrum).unwrap();
    for c in [Complex64::new(2.0, 0.0), Complex64::new(1.0, 1.0)] {
        let scaled = spectrum.with_mode_scaled(0, c);
        let l1c = lyapunov_coefficient(&Interactions::new(&system, &scaled).unwrap(), &scaled).unwrap();
        assert!((l1c / l1 - c.norm_sqr()).abs() <= 1e-10, "c = {c}: ratio {}", l1c / l1);
    }
}

#[test]
fn reduced_flow_error_is_superquadratic_in_amplitude() {
    let tau = 1.7;
    let (system, spectrum, inter) = setup(tau, 6);
    let param = ManifoldParam::build_psi(&inter, &spectrum).unwrap();
    let red = ReducedSystem2D::new(&inter, &param);
    let t_end = 2.0;
    let dt = 1e-3;
    let discrepancy = |amp: f64| {
        let x = Complex64::new(amp, 0.0);
        let z = param.lift_coordinates([x, x.conj()]);
        let y0: Vec<f64> = (0..system.dim())
            .map(|i| (0..system.dim()).map(|m| z[m] * spectrum.right(m)[i]).sum::<Complex64>().re)
            .collect();
        let traj = integrate_gk(&system, &y0, t_end, dt, 1).unwrap();
        let gk = traj.endpoint_series();
        let path = red.integrate([amp, 0.0], dt, (t_end / dt).round() as usize, 1).unwrap();
        gk.iter()
            .zip(&path)
            .map(|(u, pq)| (u - red.lift_real(*pq)).abs())
            .fold(0.0, f64::max)
    };
    let d: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&a| discrepancy(a)).collect();
    for k in 0..2 {
        let slope = (d[k] / d[k + 1]).log10();
        assert!(slope > 2.0, "decade {k}: discrepancies {d:?}");
    }
}

#[test]
fn lyapunov_requires_the_critical_delay() {
    let (_, spectrum, inter) = setup(1.7, 6);
    assert!(lyapunov_coefficient(&inter, &spectrum).is_err());
}
