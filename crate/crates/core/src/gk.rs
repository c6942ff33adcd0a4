//! Galerkin-Koornwinder (GK) approximation of scalar DDEs
//!
//! `x'(t) = a x(t) + b x(t - tau) + c int_{t-tau}^t x + F(x(t), x(t - tau), int x)`
//!
//! The history segment is expanded as `u_N(t, theta) = sum_j y_j(t) K_j^tau(theta)`
//! and the transport form of the DDE is projected onto the basis, giving the
//! N-dimensional ODE `y' = A(tau) y + G(y)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::koornwinder::{koornwinder_at_left, koornwinder_norm_sq, KoornwinderBasis};
use crate::ode::{rk4_step, Rk4Workspace};
use crate::poly::{Monomial, Poly3};

/// Scalar DDE with linear coefficients and a tangent polynomial nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdeSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub tau: f64,
    nonlinearity: Poly3,
}

impl DdeSpec {
    pub fn new(a: f64, b: f64, c: f64, tau: f64, nonlinearity: Poly3) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return invalid(format!("delay must be positive, got {tau}"));
        }
        if ![a, b, c].iter().all(|v| v.is_finite()) {
            return invalid("non-finite linear coefficient");
        }
        if !nonlinearity.is_tangent() {
            return invalid("nonlinearity must have no constant or linear terms");
        }
        Ok(Self {
            a,
            b,
            c,
            tau,
            nonlinearity,
        })
    }

    pub fn nonlinearity(&self) -> &Poly3 {
        &self.nonlinearity
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.c, tau, self.nonlinearity.clone())
    }

    /// Right-hand side for current value `u`, delayed value `v` and window integral `w`.
    pub fn rhs(&self, u: f64, v: f64, w: f64) -> f64 {
        self.a * u + self.b * v + self.c * w + self.nonlinearity.eval([u, v, w])
    }
}

/// Positive nontrivial steady state `T+ = sqrt(1 - alpha)` of the
/// Suarez-Schopf model `T' = T - alpha T(t - tau) - T^3`.
pub fn suarez_schopf_t_plus(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok((1.0 - alpha).sqrt())
}

/// Suarez-Schopf model written in the perturbation `T - T+`:
/// `a = 1 - 3 T+^2`, `b = -alpha`, `c = 0`, `F(u) = -3 T+ u^2 - u^3`.
pub fn suarez_schopf_perturbed(alpha: f64, tau: f64) -> Result<DdeSpec> {
    let tp = suarez_schopf_t_plus(alpha)?;
    DdeSpec::new(
        1.0 - 3.0 * tp * tp,
        -alpha,
        0.0,
        tau,
        Poly3::new([
            Monomial { exps: [2, 0, 0], coeff: -3.0 * tp },
            Monomial { exps: [3, 0, 0], coeff: -1.0 },
        ])?,
    )
}

/// The same model perturbed about `T- = -sqrt(1 - alpha)`; it is the
/// sign-reflection of [`suarez_schopf_perturbed`].
pub fn suarez_schopf_perturbed_minus(alpha: f64, tau: f64) -> Result<DdeSpec> {
    let tp = suarez_schopf_t_plus(alpha)?;
    DdeSpec::new(
        1.0 - 3.0 * tp * tp,
        -alpha,
        0.0,
        tau,
        Poly3::new([
            Monomial { exps: [2, 0, 0], coeff: 3.0 * tp },
            Monomial { exps: [3, 0, 0], coeff: -1.0 },
        ])?,
    )
}

/// Assembled GK system `y' = A y + G(y)` with `A = (2/tau) P + Q`.
#[derive(Debug, Clone)]
pub struct GkSystem {
    spec: DdeSpec,
    basis: KoornwinderBasis,
    a: DMatrix<f64>,
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    nu: Vec<f64>,
    // linear functionals giving (u, v, w) from y
    ell: [Vec<f64>; 3],
}

impl GkSystem {
    /// Assembles `A(tau)` entrywise:
    /// `A_ij = (a + b K_j(-1) + c tau (2 delta_j0 - 1)
    ///          + (2/tau) sum_{k<j} a_{j,k} (delta_ik ||K_i||^2 - 1)) / ||K_i||^2`.
    pub fn assemble(spec: &DdeSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("GK dimension must be >= 1");
        }
        let tau = spec.tau;
        let basis = KoornwinderBasis::new(n, tau)?;
        let norms: Vec<f64> = (0..n).map(koornwinder_norm_sq).collect();
        let mut p = DMatrix::zeros(n, n);
        let mut q = DMatrix::zeros(n, n);
        for j in 0..n {
            let coeffs = basis.deriv_coeffs(j);
            let total: f64 = coeffs.iter().sum();
            let lin = spec.a
                + spec.b * koornwinder_at_left(j)
                + spec.c * tau * if j == 0 { 1.0 } else { -1.0 };
            for i in 0..n {
                let own = if i < j { coeffs[i] * norms[i] } else { 0.0 };
                p[(i, j)] = (own - total) / norms[i];
                q[(i, j)] = lin / norms[i];
            }
        }
        let a = &p * (2.0 / tau) + &q;
        let ell = [
            vec![1.0; n],
            (0..n).map(koornwinder_at_left).collect(),
            (0..n).map(|j| if j == 0 { tau } else { -tau }).collect(),
        ];
        Ok(Self {
            spec: spec.clone(),
            basis,
            a,
            p,
            q,
            nu: norms.iter().map(|v| 1.0 / v).collect(),
            ell,
        })
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn tau(&self) -> f64 {
        self.spec.tau
    }

    pub fn spec(&self) -> &DdeSpec {
        &self.spec
    }

    pub fn basis(&self) -> &KoornwinderBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Model-independent transport part.
    pub fn transport(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Model-dependent part.
    pub fn model_part(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `nu_j = 1 / ||K_j||^2`.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Linear functionals `(u, v, w)` of the state: endpoint value, value at
    /// `-tau` and window integral.
    pub fn functionals(&self) -> &[Vec<f64>; 3] {
        &self.ell
    }

    /// Arguments fed to `F` for state `y`.
    pub fn nonlinear_args(&self, y: &[f64]) -> [f64; 3] {
        let dot = |l: &Vec<f64>| l.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        [dot(&self.ell[0]), dot(&self.ell[1]), dot(&self.ell[2])]
    }

    /// `G(y) = F(u, v, w) * nu`.
    pub fn nonlinear(&self, y: &[f64]) -> Vec<f64> {
        let f = self.spec.nonlinearity().eval(self.nonlinear_args(y));
        self.nu.iter().map(|v| v * f).collect()
    }

    /// `A y + G(y)` written into `out`.
    pub fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let f = self.spec.nonlinearity().eval(self.nonlinear_args(y));
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.a[(i, j)] * y[j];
            }
            out[i] = acc + self.nu[i] * f;
        }
    }

    /// Projection of a history segment onto this system's basis.
    pub fn project(&self, segment: crate::koornwinder::Segment<'_>) -> Vec<f64> {
        let quad = crate::koornwinder::GaussLegendre::for_dimension(self.dim());
        self.basis.project(segment, &quad)
    }
}

/// Approximate DDE state `x_N = sum_j y_j`, since `K_j^tau(0) = 1`.
pub fn reconstruct_endpoint(y: &[f64]) -> f64 {
    y.iter().sum()
}

/// Sampled GK trajectory.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Reconstructed DDE value at every sample.
    pub fn endpoint_series(&self) -> Vec<f64> {
        self.states.iter().map(|y| reconstruct_endpoint(y)).collect()
    }
}

/// Fixed-step RK4 integration of the GK system over `[0, t_end]`, keeping
/// every `stride`-th step (and the initial state).
pub fn integrate_gk(
    system: &GkSystem,
    y0: &[f64],
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Trajectory> {
    if y0.len() != system.dim() {
        return invalid(format!(
            "initial state has length {}, expected {}",
            y0.len(),
            system.dim()
        ));
    }
    if !(dt > 0.0) || dt > t_end {
        return invalid("time step must satisfy 0 < dt <= t_end");
    }
    let stride = stride.max(1);
    let steps = (t_end / dt).round() as usize;
    let mut ws = Rk4Workspace::new(system.dim());
    let mut y = y0.to_vec();
    let rhs = |y: &[f64], out: &mut [f64]| system.rhs(y, out);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y.clone()],
    };
    for k in 1..=steps {
        rk4_step(&rhs, &mut y, dt, &mut ws);
        let t = k as f64 * dt;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { time: t });
        }
        if k % stride == 0 || k == steps {
            traj.times.push(t);
            traj.states.push(y.clone());
        }
    }
    Ok(traj)
}

/// Settings of the one-period GK-versus-DDE comparison on a stable cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleErrorSettings {
    /// Constant history used to reach the cycle.
    pub warm_history: f64,
    /// Length of the coarse run that settles onto the cycle.
    pub warm_time: f64,
    /// Coarse step is `tau / warm_steps_per_delay`.
    pub warm_steps_per_delay: usize,
    /// Fine step is `tau / 2^refine`.
    pub refine: u32,
    /// Samples compared every `stride` fine steps.
    pub stride: usize,
}

impl Default for CycleErrorSettings {
    fn default() -> Self {
        Self {
            warm_history: 1.0,
            warm_time: 600.0,
            warm_steps_per_delay: 512,
            refine: 18,
            stride: 16,
        }
    }
}

/// One-period sup-norm distance between the DDE stable cycle and the GK
/// solutions started from the projection of a segment on that cycle, for
/// each dimension in `dims`. Returns the cycle period alongside the errors.
pub fn gk_cycle_errors(
    spec: &DdeSpec,
    dims: &[usize],
    settings: &CycleErrorSettings,
) -> Result<(f64, Vec<f64>)> {
    use crate::dde::{extract_periodic_orbit, integrate_dde};
    use crate::koornwinder::Segment;
    use rayon::prelude::*;

    let tau = spec.tau;
    let h0 = settings.warm_history;
    let coarse = integrate_dde(
        spec,
        &|_| h0,
        settings.warm_time,
        tau / settings.warm_steps_per_delay as f64,
    )?;
    let orbit = extract_periodic_orbit(&coarse.to_series(1), 0.5 * settings.warm_time)?;
    let t0 = orbit.start_time();
    if t0 < tau {
        return invalid("cycle segment starts before the coarse run has a full delay of history");
    }
    let segment = |s: f64| coarse.eval(t0 + s);

    let dt = tau / f64::from(2u32.pow(settings.refine));
    let stride = settings.stride.max(1);
    // whole number of strides so both grids end on a compared sample
    let steps = (orbit.period / (dt * stride as f64)).ceil() * stride as f64;
    let t_end = steps * dt;
    let reference = integrate_dde(spec, &segment, t_end, dt)?;

    let errors = dims
        .par_iter()
        .map(|&n| {
            let system = GkSystem::assemble(spec, n)?;
            let y0 = system.project(Segment::new(&segment, segment(0.0)));
            let traj = integrate_gk(&system, &y0, t_end, dt, stride)?;
            let approx = traj.endpoint_series();
            let err = approx
                .iter()
                .zip(reference.values.iter().step_by(stride))
                .map(|(a, r)| (a - r).abs())
                .fold(0.0, f64::max);
            Ok(err)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((orbit.period, errors))
}
