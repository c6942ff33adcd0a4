//! Center-unstable manifold reduction of the GK system onto the critical
//! pair `(e_1, e_2)`.
//!
//! The GK nonlinearity is rank one, `G(y) = F(l_u.y, l_v.y, l_w.y) nu`, so every
//! interaction coefficient `<G_k(e_a, ..), e_c*>` factors into `nu_c` times the
//! polarized `k`-linear form of `F` applied to the functionals of the modes.
//! Mode coordinates of a state are `X_j = <X, e_j*>`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gk::{DdeSpec, GkSystem};
use crate::ode::{rk4_step, Rk4Workspace};
use crate::poly::{Poly2, Poly3};
use crate::spectral::{eigendecompose, SpectralData};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Number of critical modes handled by the reduction.
pub const M_C: usize = 2;

/// Projections `nu_c = <nu, e_c*>` and mode functionals, from which every
/// interaction coefficient is assembled.
#[derive(Debug, Clone)]
pub struct Interactions {
    nu_c: Vec<Complex64>,
    functionals: Vec<[Complex64; 3]>,
    f: Poly3,
    f2: Poly3,
    f3: Poly3,
}

impl Interactions {
    pub fn new(system: &GkSystem, spectrum: &SpectralData) -> Result<Self> {
        let n = system.dim();
        if spectrum.dim() != n {
            return invalid("spectrum and system dimensions differ");
        }
        let nu = system.nu();
        let ell = system.functionals();
        let nu_c = (0..n)
            .map(|c| {
                spectrum
                    .adjoint_modes()
                    .column(c)
                    .iter()
                    .zip(nu)
                    .map(|(q, v)| q.conj() * v)
                    .sum()
            })
            .collect();
        let functionals = (0..n)
            .map(|m| {
                let e = spectrum.right_modes().column(m);
                let apply = |l: &Vec<f64>| e.iter().zip(l).map(|(z, w)| z * w).sum();
                [apply(&ell[0]), apply(&ell[1]), apply(&ell[2])]
            })
            .collect();
        let f = system.spec().nonlinearity().clone();
        Ok(Self {
            nu_c,
            functionals,
            f2: f.homogeneous(2),
            f3: f.homogeneous(3),
            f,
        })
    }

    pub fn nu_c(&self, c: usize) -> Complex64 {
        self.nu_c[c]
    }

    /// `(l_u.e_m, l_v.e_m, l_w.e_m)`.
    pub fn functional(&self, m: usize) -> [Complex64; 3] {
        self.functionals[m]
    }

    /// `<G_2(e_a, e_b), e_c*>`.
    pub fn quadratic(&self, a: usize, b: usize, c: usize) -> Complex64 {
        self.nu_c[c] * self.f2.multilinear(&[self.functionals[a], self.functionals[b]])
    }

    /// `<G_3(e_a, e_b, e_d), e_c*>`.
    pub fn cubic(&self, a: usize, b: usize, d: usize, c: usize) -> Complex64 {
        self.nu_c[c]
            * self
                .f3
                .multilinear(&[self.functionals[a], self.functionals[b], self.functionals[d]])
    }

    /// Functionals of a complex state given in mode coordinates.
    pub fn functionals_of(&self, z: &[Complex64]) -> [Complex64; 3] {
        let mut out = [ZERO; 3];
        for (zm, l) in z.iter().zip(&self.functionals) {
            for r in 0..3 {
                out[r] += zm * l[r];
            }
        }
        out
    }

    /// `F` evaluated on functionals, so that `<G(y), e_c*> = nu_c F`.
    pub fn f_at(&self, args: [Complex64; 3]) -> Complex64 {
        self.f.eval_complex(args)
    }

    pub fn f_k_at(&self, k: usize, args: [Complex64; 3]) -> Complex64 {
        match k {
            2 => self.f2.eval_complex(args),
            3 => self.f3.eval_complex(args),
            _ => self.f.homogeneous(k).eval_complex(args),
        }
    }
}

/// Scans all critical index tuples of order `k` against every stable mode
/// with a nonzero interaction and returns the smallest `|Re(sum lambda - lambda_n)|`.
pub fn nonresonance_scan<C>(lambda: &[Complex64], m_c: usize, k: usize, coeff: C) -> Result<f64>
where
    C: Fn(&[usize], usize) -> Complex64,
{
    if !(2..=3).contains(&k) {
        return invalid(format!("non-resonance order must be 2 or 3, got {k}"));
    }
    let scale = lambda.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut min_re = f64::INFINITY;
    let tuples = index_tuples(m_c, k);
    let coeff_scale = tuples
        .iter()
        .flat_map(|t| (m_c..lambda.len()).map(move |n| (t, n)))
        .map(|(t, n)| coeff(t, n).norm())
        .fold(0.0, f64::max);
    for t in &tuples {
        let sum: Complex64 = t.iter().map(|&j| lambda[j]).sum();
        for n in m_c..lambda.len() {
            if coeff(t, n).norm() <= 1e-13 * coeff_scale {
                continue;
            }
            let re = (sum - lambda[n]).re;
            if re.abs() <= 1e-12 * scale {
                return Err(Error::Resonance {
                    low: t.clone(),
                    stable: n,
                    real_part: re,
                });
            }
            min_re = min_re.min(re.abs());
        }
    }
    Ok(min_re)
}

fn index_tuples(m_c: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..m_c).map(move |j| {
                    let mut t = t.clone();
                    t.push(j);
                    t
                })
            })
            .collect();
    }
    out
}

/// Non-resonance check of order `k` for the critical pair of `spectrum`.
pub fn nonresonance_check(interactions: &Interactions, spectrum: &SpectralData, k: usize) -> Result<f64> {
    nonresonance_scan(spectrum.eigenvalues(), M_C, k, |t, n| match t.len() {
        2 => interactions.quadratic(t[0], t[1], n),
        _ => interactions.cubic(t[0], t[1], t[2], n),
    })
}

/// Quadratic (and optionally cubic) parameterization of the stable modes
/// `n = 3..N` over the critical pair.
#[derive(Debug, Clone)]
pub struct ManifoldParam {
    pub tau: f64,
    lambda: Vec<Complex64>,
    quad: Vec<[[Complex64; 2]; 2]>,
    cubic: Vec<[[[Complex64; 2]; 2]; 2]>,
    phi: Vec<Poly2>,
    h3: Vec<Poly2>,
}

impl ManifoldParam {
    /// Leading-order parameterization `Phi`:
    /// `<G_2(e_j1, e_j2), e_n*> / (lambda_j1 + lambda_j2 - lambda_n)`.
    pub fn build_phi2(interactions: &Interactions, spectrum: &SpectralData) -> Result<Self> {
        nonresonance_check(interactions, spectrum, 2)?;
        let n = spectrum.dim();
        if n <= M_C {
            return invalid("GK dimension must exceed the critical count");
        }
        let lambda = spectrum.eigenvalues().to_vec();
        let mut quad = Vec::with_capacity(n - M_C);
        let mut phi = Vec::with_capacity(n - M_C);
        for s in M_C..n {
            let mut table = [[ZERO; 2]; 2];
            let mut poly = Poly2::zero(2);
            for j1 in 0..2 {
                for j2 in 0..2 {
                    let c = interactions.quadratic(j1, j2, s) / (lambda[j1] + lambda[j2] - lambda[s]);
                    table[j1][j2] = c;
                    let (i, k) = exponents(&[j1, j2]);
                    poly.add_to(i, k, c);
                }
            }
            quad.push(table);
            phi.push(poly);
        }
        Ok(Self {
            tau: spectrum.tau,
            lambda,
            quad,
            cubic: vec![[[[ZERO; 2]; 2]; 2]; n - M_C],
            phi,
            h3: vec![Poly2::zero(3); n - M_C],
        })
    }

    /// `Psi = Phi + h_3`, with `h_3` the cubic homological solution
    /// `<G_3(e_j1, e_j2, e_j3), e_n*> / (lambda_j1 + lambda_j2 + lambda_j3 - lambda_n)`.
    pub fn build_psi(interactions: &Interactions, spectrum: &SpectralData) -> Result<Self> {
        let mut param = Self::build_phi2(interactions, spectrum)?;
        nonresonance_check(interactions, spectrum, 3)?;
        let lambda = &param.lambda;
        for (idx, s) in (M_C..spectrum.dim()).enumerate() {
            let mut table = [[[ZERO; 2]; 2]; 2];
            let mut poly = Poly2::zero(3);
            for j1 in 0..2 {
                for j2 in 0..2 {
                    for j3 in 0..2 {
                        let c = interactions.cubic(j1, j2, j3, s)
                            / (lambda[j1] + lambda[j2] + lambda[j3] - lambda[s]);
                        table[j1][j2][j3] = c;
                        let (i, k) = exponents(&[j1, j2, j3]);
                        poly.add_to(i, k, c);
                    }
                }
            }
            param.cubic[idx] = table;
            param.h3[idx] = poly;
        }
        Ok(param)
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.lambda
    }

    /// Coefficient of `X_j1 X_j2` in `Psi_n` (0-based indices, `n >= 2`).
    pub fn quad_coeff(&self, j1: usize, j2: usize, n: usize) -> Complex64 {
        self.quad[n - M_C][j1][j2]
    }

    pub fn cubic_coeff(&self, j1: usize, j2: usize, j3: usize, n: usize) -> Complex64 {
        self.cubic[n - M_C][j1][j2][j3]
    }

    /// Quadratic part of mode `n` as a polynomial in `(X_1, X_2)`.
    pub fn phi_poly(&self, n: usize) -> &Poly2 {
        &self.phi[n - M_C]
    }

    pub fn h3_poly(&self, n: usize) -> &Poly2 {
        &self.h3[n - M_C]
    }

    pub fn psi_poly(&self, n: usize) -> Poly2 {
        self.phi[n - M_C].add(&self.h3[n - M_C])
    }

    /// `(Psi_3, ..., Psi_N)` at critical coordinates `x`.
    pub fn psi(&self, x: [Complex64; 2]) -> Vec<Complex64> {
        self.phi
            .iter()
            .zip(&self.h3)
            .map(|(p, h)| p.eval(x[0], x[1]) + h.eval(x[0], x[1]))
            .collect()
    }

    pub fn phi(&self, x: [Complex64; 2]) -> Vec<Complex64> {
        self.phi.iter().map(|p| p.eval(x[0], x[1])).collect()
    }

    /// Full mode-coordinate vector `(x_1, x_2, Psi_3(x), ..., Psi_N(x))`.
    pub fn lift_coordinates(&self, x: [Complex64; 2]) -> Vec<Complex64> {
        let mut z = vec![x[0], x[1]];
        z.extend(self.psi(x));
        z
    }

    /// Largest residual of the order-`k` homological equation
    /// `D h(X) A_c X - A_s h(X) - Pi_s G_k(X)` at `x`, with `h = Phi` for
    /// `k = 2` and `h = h_3` for `k = 3`.
    pub fn homological_residual(&self, interactions: &Interactions, x: [Complex64; 2], k: usize) -> f64 {
        let polys = if k == 2 { &self.phi } else { &self.h3 };
        let args = interactions.functionals_of(&x);
        let fk = interactions.f_k_at(k, args);
        let ax = [self.lambda[0] * x[0], self.lambda[1] * x[1]];
        polys
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                let s = idx + M_C;
                let (d1, d2) = p.gradient(x[0], x[1]);
                let lhs = d1 * ax[0] + d2 * ax[1] - self.lambda[s] * p.eval(x[0], x[1]);
                (lhs - interactions.nu_c(s) * fk).norm()
            })
            .fold(0.0, f64::max)
    }
}

// Exponents (of x_1, x_2) of the monomial `x_j1 ... x_jk`.
fn exponents(idx: &[usize]) -> (usize, usize) {
    let ones = idx.iter().filter(|&&j| j == 0).count();
    (ones, idx.len() - ones)
}

/// Cubic Lyapunov coefficient of the Hopf pair at a critical spectrum.
pub fn lyapunov_coefficient(interactions: &Interactions, spectrum: &SpectralData) -> Result<f64> {
    let l1 = spectrum.lambda(0);
    if l1.re.abs() > 1e-8 {
        return Err(Error::NotCritical {
            tau: spectrum.tau,
            real_part: l1.re,
        });
    }
    if !(l1.im > 0.0) || spectrum.lambda(1) != l1.conj() {
        return invalid("leading eigenvalues are not a conjugate pair");
    }
    let g2 = |a, b, c| interactions.quadratic(a, b, c);
    let a20 = g2(0, 0, 0);
    let a11 = g2(0, 1, 0) + g2(1, 0, 0);
    let mut a21 = interactions.cubic(0, 0, 1, 0) + interactions.cubic(0, 1, 0, 0) + interactions.cubic(1, 0, 0, 0);
    for n in 2..spectrum.dim() {
        let ln = spectrum.lambda(n);
        a21 += (g2(0, 1, n) + g2(1, 0, n)) / (2.0 * l1.re - ln) * (g2(0, n, 0) + g2(n, 0, 0));
        a21 += g2(0, 0, n) / (2.0 * l1 - ln) * (g2(1, n, 0) + g2(n, 1, 0));
    }
    Ok((a20 * a11 * Complex64::new(0.0, 1.0) / l1.im + a21).re)
}

/// Effective reduced GK system in the critical coordinates,
/// `x_j' = lambda_j x_j + <G(x + Psi(x)), e_j*>`, expanded to polynomials.
#[derive(Debug, Clone)]
pub struct ReducedSystem2D {
    pub tau: f64,
    lambda: [Complex64; 2],
    fields: [Poly2; 2],
    // (u, v, w) functionals of the lifted state; u is the reconstructed endpoint
    lifts: [Poly2; 3],
}

impl ReducedSystem2D {
    pub fn new(interactions: &Interactions, param: &ManifoldParam) -> Self {
        let lambda = [param.lambda[0], param.lambda[1]];
        let lifts: [Poly2; 3] = std::array::from_fn(|r| {
            let l0 = interactions.functional(0)[r];
            let l1 = interactions.functional(1)[r];
            let mut p = Poly2::linear(l0, l1);
            for s in M_C..param.dim() {
                let ls = interactions.functional(s)[r];
                p = p.add(&param.psi_poly(s).scale(ls));
            }
            p
        });
        // F(u, v, w) with cached powers
        let mut closure = Poly2::zero(0);
        let mut powers: [Vec<Poly2>; 3] = Default::default();
        for m in interactions.f.terms() {
            let mut term = Poly2::constant(Complex64::new(m.coeff, 0.0));
            for r in 0..3 {
                let e = m.exps[r] as usize;
                while powers[r].len() <= e {
                    let next = match powers[r].last() {
                        None => Poly2::constant(Complex64::new(1.0, 0.0)),
                        Some(p) => p.mul(&lifts[r]),
                    };
                    powers[r].push(next);
                }
                if e > 0 {
                    term = term.mul(&powers[r][e]);
                }
            }
            closure = closure.add(&term);
        }
        let fields = std::array::from_fn(|j| {
            let mut lin = Poly2::zero(1);
            if j == 0 {
                lin.set(1, 0, lambda[0]);
            } else {
                lin.set(0, 1, lambda[1]);
            }
            lin.add(&closure.scale(interactions.nu_c(j)))
        });
        Self {
            tau: param.tau,
            lambda,
            fields,
            lifts,
        }
    }

    /// Spectrum, interactions, `Psi` and the reduced system for one spec.
    pub fn build(spec: &DdeSpec, n: usize) -> Result<Self> {
        let system = GkSystem::assemble(spec, n)?;
        let spectrum = eigendecompose(&system)?;
        let interactions = Interactions::new(&system, &spectrum)?;
        let param = ManifoldParam::build_psi(&interactions, &spectrum)?;
        Ok(Self::new(&interactions, &param))
    }

    pub fn lambda(&self) -> [Complex64; 2] {
        self.lambda
    }

    /// Component `j` of the vector field as a polynomial in `(x_1, x_2)`.
    pub fn field(&self, j: usize) -> &Poly2 {
        &self.fields[j]
    }

    pub fn rhs(&self, x: [Complex64; 2]) -> [Complex64; 2] {
        [self.fields[0].eval(x[0], x[1]), self.fields[1].eval(x[0], x[1])]
    }

    /// Real form in `x_1 = p + i q`, `x_2 = conj(x_1)`.
    pub fn real_rhs(&self, pq: [f64; 2]) -> [f64; 2] {
        let x1 = Complex64::new(pq[0], pq[1]);
        let f = self.fields[0].eval(x1, x1.conj());
        [f.re, f.im]
    }

    /// Reconstructed DDE value `T*(x) = sum_j (x_1 e_1^j + x_2 e_2^j + sum_n Psi_n(x) e_n^j)`.
    pub fn lift_complex(&self, x: [Complex64; 2]) -> Complex64 {
        self.lifts[0].eval(x[0], x[1])
    }

    pub fn lift(&self, x: [Complex64; 2]) -> Result<f64> {
        let v = self.lift_complex(x);
        if v.im.abs() > 1e-10 * (1.0 + v.re.abs()) {
            return Err(Error::BrokenConjugacy { residue: v.im });
        }
        Ok(v.re)
    }

    /// `T*` along a real-form path `(p, q)`.
    pub fn lift_real(&self, pq: [f64; 2]) -> f64 {
        let x1 = Complex64::new(pq[0], pq[1]);
        self.lifts[0].eval(x1, x1.conj()).re
    }

    pub fn lift_path(&self, path: &[[Complex64; 2]]) -> Result<Vec<f64>> {
        path.iter().map(|x| self.lift(*x)).collect()
    }

    /// Integrates the real form with RK4; negative `dt` runs backward. Returns
    /// every `stride`-th state including the first.
    pub fn integrate(&self, start: [f64; 2], dt: f64, steps: usize, stride: usize) -> Result<Vec<[f64; 2]>> {
        let stride = stride.max(1);
        let mut ws = Rk4Workspace::new(2);
        let mut y = start.to_vec();
        let f = |y: &[f64], out: &mut [f64]| {
            let r = self.real_rhs([y[0], y[1]]);
            out[0] = r[0];
            out[1] = r[1];
        };
        let mut out = vec![start];
        for k in 1..=steps {
            rk4_step(&f, &mut y, dt, &mut ws);
            if !(y[0].is_finite() && y[1].is_finite()) || y[0].hypot(y[1]) > 1e6 {
                return Err(Error::BlowUp { time: k as f64 * dt });
            }
            if k % stride == 0 {
                out.push([y[0], y[1]]);
            }
        }
        Ok(out)
    }

    /// Monomial table `(component, (i, j), coefficient)` of the vector field.
    pub fn coefficients(&self) -> Vec<ReducedCoefficient> {
        let mut out = Vec::new();
        for (j, f) in self.fields.iter().enumerate() {
            for ((a, b), c) in f.monomials() {
                out.push(ReducedCoefficient {
                    component: j + 1,
                    exponents: [a, b],
                    re: c.re,
                    im: c.im,
                });
            }
        }
        out
    }
}

/// One monomial `c x_1^a x_2^b` of the reduced vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoefficient {
    pub component: usize,
    pub exponents: [usize; 2],
    pub re: f64,
    pub im: f64,
}

/// Size of `R = Psi(Gamma_1, Gamma_2) - Gamma_s` relative to `Gamma_s` along
/// a sampled trajectory (uniform in time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectReport {
    /// `mean ||R||_s^2 / mean ||Gamma_s||_s^2` with
    /// `||w||_s^2 = sum_{j >= 3} |<w, e_j*>|^2`.
    pub energy_ratio: f64,
    /// Same ratio with Euclidean norms of the state vectors in `C^N`.
    pub euclidean_energy_ratio: f64,
    /// `mean (||R||_s^2 / ||Gamma_s||_s^2)`; dominated by the instants where
    /// `Gamma_s` nearly vanishes.
    pub mean_pointwise_ratio: f64,
}

/// Parameterization defect of sampled GK states.
pub fn parameterization_defect(
    spectrum: &SpectralData,
    param: &ManifoldParam,
    states: &[Vec<f64>],
) -> Result<DefectReport> {
    if states.is_empty() {
        return invalid("no states");
    }
    let n = spectrum.dim();
    let (mut num, mut den, mut num_e, mut den_e, mut pointwise) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in states {
        let z = spectrum.coordinates(y);
        let psi = param.psi([z[0], z[1]]);
        let diff: Vec<Complex64> = (M_C..n).map(|s| psi[s - M_C] - z[s]).collect();
        let r2: f64 = diff.iter().map(|d| d.norm_sqr()).sum();
        let g2: f64 = z[M_C..].iter().map(|d| d.norm_sqr()).sum();
        num += r2;
        den += g2;
        pointwise += r2 / g2;
        num_e += stable_vector(spectrum, &diff).norm_squared();
        den_e += stable_vector(spectrum, &z[M_C..]).norm_squared();
    }
    Ok(DefectReport {
        energy_ratio: num / den,
        euclidean_energy_ratio: num_e / den_e,
        mean_pointwise_ratio: pointwise / states.len() as f64,
    })
}

fn stable_vector(spectrum: &SpectralData, coords: &[Complex64]) -> DVector<Complex64> {
    let mut v = DVector::zeros(spectrum.dim());
    for (idx, c) in coords.iter().enumerate() {
        v += spectrum.right(idx + M_C) * *c;
    }
    v
}

/// Both sides of the model-error estimate along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelError {
    /// Time average of `||Q_c^H (G(y) - G(y_c + phi(y_c)))||^2`.
    pub lhs: f64,
    /// Time average of `||P_s z_s - phi(y_c)||^2`.
    pub defect: f64,
}

impl ModelError {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.defect
    }
}

/// Model-error diagnostic for `Psi` along sampled GK states bounded by `bound`.
pub fn model_error_diagnostic(
    interactions: &Interactions,
    spectrum: &SpectralData,
    param: &ManifoldParam,
    states: &[Vec<f64>],
    bound: f64,
) -> Result<ModelError> {
    if states.is_empty() {
        return invalid("no states");
    }
    let n = spectrum.dim();
    let (mut lhs, mut defect) = (0.0, 0.0);
    for y in states {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= bound) {
            return Err(Error::Unbounded { bound });
        }
        let z = spectrum.coordinates(y);
        let lifted = param.lift_coordinates([z[0], z[1]]);
        let f_true = interactions.f_at(interactions.functionals_of(&z));
        let f_red = interactions.f_at(interactions.functionals_of(&lifted));
        let df = f_true - f_red;
        lhs += (0..M_C).map(|j| (interactions.nu_c(j) * df).norm_sqr()).sum::<f64>();
        let diff: Vec<Complex64> = (M_C..n).map(|s| z[s] - lifted[s]).collect();
        defect += stable_vector(spectrum, &diff).norm_squared();
    }
    let k = states.len() as f64;
    Ok(ModelError {
        lhs: lhs / k,
        defect: defect / k,
    })
}
