//! Reference method-of-steps integrator and periodic-orbit extraction.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gk::{suarez_schopf_t_plus, DdeSpec};
use crate::koornwinder::GaussLegendre;

/// States with magnitude above this are treated as blow-up.
const BLOW_UP: f64 = 1e8;

/// Uniformly sampled scalar time series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let n = self.t.len();
        if n == 0 || t < self.t[0] || t > self.t[n - 1] {
            return None;
        }
        let k = self.t.partition_point(|&s| s <= t);
        if k == 0 {
            return Some(self.x[0]);
        }
        if k >= n {
            return Some(self.x[n - 1]);
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let r = (t - t0) / (t1 - t0);
        Some(self.x[k - 1] + r * (self.x[k] - self.x[k - 1]))
    }
}

/// Dense output of [`integrate_dde`]: grid values and derivatives on
/// `t_k = k dt`, interpolated by cubic Hermite splines.
#[derive(Debug, Clone)]
pub struct DdeSolution {
    pub dt: f64,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl DdeSolution {
    pub fn t_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Hermite interpolant on `[0, t_end]` (clamped at the ends).
    pub fn eval(&self, t: f64) -> f64 {
        hermite(&self.values, &self.derivs, self.dt, t)
    }

    /// Every `stride`-th grid sample as a time series.
    pub fn to_series(&self, stride: usize) -> TimeSeries {
        let stride = stride.max(1);
        let mut out = TimeSeries::default();
        for k in (0..self.values.len()).step_by(stride) {
            out.t.push(k as f64 * self.dt);
            out.x.push(self.values[k]);
        }
        out
    }
}

fn hermite(values: &[f64], derivs: &[f64], dt: f64, t: f64) -> f64 {
    let last = values.len() - 1;
    let pos = (t / dt).clamp(0.0, last as f64);
    let j = (pos.floor() as usize).min(last.saturating_sub(1));
    if last == 0 {
        return values[0];
    }
    let s = pos - j as f64;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * values[j] + h10 * dt * derivs[j] + h01 * values[j + 1] + h11 * dt * derivs[j + 1]
}

/// Method of steps with classical RK4 on the grid `k dt`. Values before
/// `t = 0` come from `history` (defined on `[-tau, 0]`); later delayed values
/// from the Hermite interpolant of the computed solution. The window integral
/// is carried as a running trapezoidal sum.
pub fn integrate_dde(
    spec: &DdeSpec,
    history: &dyn Fn(f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Result<DdeSolution> {
    let tau = spec.tau;
    if !(dt > 0.0) || dt > tau {
        return invalid(format!("time step must satisfy 0 < dt <= tau, got {dt}"));
    }
    if !(t_end >= dt) {
        return invalid("integration horizon shorter than one step");
    }
    let x0 = history(0.0);
    if !x0.is_finite() {
        return invalid("history is not finite at 0");
    }
    let steps = (t_end / dt).round() as usize;
    let uses_window = spec.c != 0.0 || spec.nonlinearity().terms().iter().any(|m| m.exps[2] > 0);
    let mut w = if uses_window {
        let quad = GaussLegendre::for_dimension(1);
        0.5 * tau * quad.integrate(|s| history(0.5 * tau * (s - 1.0)))
    } else {
        0.0
    };

    let mut values = Vec::with_capacity(steps + 1);
    let mut derivs = Vec::with_capacity(steps + 1);
    values.push(x0);
    derivs.push(0.0);

    let past = |values: &[f64], derivs: &[f64], s: f64| -> f64 {
        if s <= 0.0 {
            history(s)
        } else {
            hermite(values, derivs, dt, s)
        }
    };

    derivs[0] = spec.rhs(x0, history(-tau), w);
    for k in 0..steps {
        let t = k as f64 * dt;
        let x = values[k];
        let v0 = past(&values, &derivs, t - tau);
        let vh = past(&values, &derivs, t + 0.5 * dt - tau);
        let v1 = past(&values, &derivs, t + dt - tau);
        // window integral at the stage times: add the new piece, drop the
        // piece that left the window
        let drop_h = if uses_window { 0.25 * dt * (v0 + vh) } else { 0.0 };
        let drop_1 = if uses_window { 0.25 * dt * (vh + v1) } else { 0.0 };

        let k1 = derivs[k];
        let xa = x + 0.5 * dt * k1;
        let wa = w + 0.25 * dt * (x + xa) - drop_h;
        let k2 = spec.rhs(xa, vh, wa);
        let xb = x + 0.5 * dt * k2;
        let wb = w + 0.25 * dt * (x + xb) - drop_h;
        let k3 = spec.rhs(xb, vh, wb);
        let xc = x + dt * k3;
        let wc = w + 0.5 * dt * (x + xc) - drop_h - drop_1;
        let k4 = spec.rhs(xc, v1, wc);
        let xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !xn.is_finite() || xn.abs() > BLOW_UP {
            return Err(Error::BlowUp { time: t + dt });
        }
        if uses_window {
            w += 0.5 * dt * (x + xn) - drop_h - drop_1;
        }
        values.push(xn);
        derivs.push(0.0);
        let vn = past(&values, &derivs, t + dt - tau);
        derivs[k + 1] = spec.rhs(xn, vn, w);
    }
    Ok(DdeSolution { dt, values, derivs })
}

/// Equilibria `(0, T+, T-)` of the Suarez-Schopf model.
pub fn steady_states(alpha: f64) -> Result<(f64, f64, f64)> {
    let tp = suarez_schopf_t_plus(alpha)?;
    Ok((0.0, tp, -tp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Mixed,
}

/// One period of a sampled cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub period: f64,
    pub amplitude: f64,
    pub samples: Vec<(f64, f64)>,
    pub stability: Stability,
}

impl Orbit {
    pub fn start_time(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.0)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min)
    }
}

/// Upward crossings of `level`, refined by a parabola through three samples.
pub fn upward_crossings(series: &TimeSeries, level: f64) -> Vec<f64> {
    let (t, x) = (&series.t, &series.x);
    let mut out = Vec::new();
    for k in 1..x.len() {
        let (a, b) = (x[k - 1] - level, x[k] - level);
        if a < 0.0 && b >= 0.0 {
            let lin = t[k - 1] + (t[k] - t[k - 1]) * a / (a - b);
            let refined = if k + 1 < x.len() {
                parabolic_root(
                    [t[k - 1], t[k], t[k + 1]],
                    [a, b, x[k + 1] - level],
                    (t[k - 1], t[k]),
                )
            } else {
                None
            };
            out.push(refined.unwrap_or(lin));
        }
    }
    out
}

fn parabolic_root(t: [f64; 3], y: [f64; 3], range: (f64, f64)) -> Option<f64> {
    // Newton form around t[0]
    let d1 = (y[1] - y[0]) / (t[1] - t[0]);
    let d2 = ((y[2] - y[1]) / (t[2] - t[1]) - d1) / (t[2] - t[0]);
    let c = y[0];
    let b = d1 - d2 * (t[1] - t[0]);
    let a = d2;
    let roots = if a.abs() < 1e-14 * b.abs().max(1e-300) {
        vec![-c / b]
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        vec![q / a, c / q]
    };
    roots
        .into_iter()
        .map(|r| t[0] + r)
        .find(|r| *r >= range.0 - 1e-12 && *r <= range.1 + 1e-12)
}

/// Relative spread above which crossing intervals are not periodic.
const PERIOD_SPREAD: f64 = 0.01;

/// Extracts the last full period of a (nearly) periodic signal after
/// discarding `transient_skip` time units.
pub fn extract_periodic_orbit(series: &TimeSeries, transient_skip: f64) -> Result<Orbit> {
    let start = series.t.partition_point(|&t| t < series.t.first().copied().unwrap_or(0.0) + transient_skip);
    let tail = TimeSeries {
        t: series.t[start..].to_vec(),
        x: series.x[start..].to_vec(),
    };
    if tail.len() < 8 {
        return Err(Error::NoPeriodicity("series too short after transient".into()));
    }
    let mean = tail.x.iter().sum::<f64>() / tail.len() as f64;
    let (lo, hi) = tail
        .x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi - lo > 1e-12 * (1.0 + mean.abs())) {
        return Err(Error::NoPeriodicity("signal is constant".into()));
    }
    let crossings = upward_crossings(&tail, mean);
    if crossings.len() < 4 {
        return Err(Error::NoPeriodicity(format!(
            "only {} mean crossings after the transient",
            crossings.len()
        )));
    }
    let intervals: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let (imin, imax) = intervals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let period = (crossings[crossings.len() - 1] - crossings[0]) / intervals.len() as f64;
    if (imax - imin) / period > PERIOD_SPREAD {
        return Err(Error::NoPeriodicity(format!(
            "crossing intervals range over [{imin:.4}, {imax:.4}]"
        )));
    }
    let (c0, c1) = (crossings[crossings.len() - 2], crossings[crossings.len() - 1]);
    let mut samples = vec![(c0, mean)];
    samples.extend(
        tail.t
            .iter()
            .zip(&tail.x)
            .filter(|(t, _)| **t > c0 && **t < c1)
            .map(|(t, x)| (*t, *x)),
    );
    samples.push((c1, mean));
    let max = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Ok(Orbit {
        period,
        amplitude: max - min,
        samples,
        stability: Stability::Stable,
    })
}

/// Sup-norm distance between an orbit's samples and another series over one
/// period. Samples of `approx` are linearly interpolated to the reference
/// times.
pub fn linf_cycle_error(reference: &Orbit, approx: &TimeSeries) -> Result<f64> {
    let mut err: f64 = 0.0;
    for &(t, x) in &reference.samples {
        let y = approx.interpolate(t).ok_or_else(|| {
            Error::InvalidArgument(format!("approximation does not cover t = {t}"))
        })?;
        err = err.max((x - y).abs());
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gk::suarez_schopf_perturbed;
    use crate::poly::Poly3;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pure_ode_exponential() {
        let spec = DdeSpec::new(-0.4, 0.0, 0.0, 1.0, Poly3::zero()).unwrap();
        let sol = integrate_dde(&spec, &|_| 2.0, 3.0, 0.01).unwrap();
        assert_abs_diff_eq!(sol.values.last().copied().unwrap(), 2.0 * (-1.2f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn equilibrium_stays_put() {
        let spec = suarez_schopf_perturbed(0.75, 1.7).unwrap();
        let sol = integrate_dde(&spec, &|_| 0.0, 20.0, 0.01).unwrap();
        assert!(sol.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_delay_first_step_is_exact() {
        // x' = -x(t - 1) with x = 1 on [-1, 0] gives x = 1 - t on [0, 1]
        let spec = DdeSpec::new(0.0, -1.0, 0.0, 1.0, Poly3::zero()).unwrap();
        let sol = integrate_dde(&spec, &|_| 1.0, 2.0, 0.125).unwrap();
        assert_abs_diff_eq!(sol.eval(1.0), 0.0, epsilon = 1e-13);
        // second interval: x = 1 - t + (t - 1)^2 / 2
        assert_abs_diff_eq!(sol.eval(2.0), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn distributed_delay_matches_closed_form() {
        // x' = int_{t-1}^t x with x = 1 on [-1, 0]: on [0, 1] the solution
        // solves x'' = x(t) - 1, x(0) = 1, x'(0) = 1, so x = 1 + sinh t
        let spec = DdeSpec::new(0.0, 0.0, 1.0, 1.0, Poly3::zero()).unwrap();
        let sol = integrate_dde(&spec, &|_| 1.0, 1.0, 1e-3).unwrap();
        assert_abs_diff_eq!(sol.eval(1.0), 1.0 + 1f64.sinh(), epsilon = 1e-5);
    }

    #[test]
    fn steady_state_values() {
        assert_eq!(steady_states(0.75).unwrap(), (0.0, 0.5, -0.5));
        let (_, p, m) = steady_states(0.19).unwrap();
        assert_abs_diff_eq!(p, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(m, -0.9, epsilon = 1e-15);
        assert!(steady_states(1.0).is_err());
    }

    #[test]
    fn sinusoid_period() {
        let dt = 0.01;
        let t: Vec<f64> = (0..20000).map(|k| k as f64 * dt).collect();
        let x = t.iter().map(|t| (2.0 * std::f64::consts::PI * t / 7.3).sin()).collect();
        let orbit = extract_periodic_orbit(&TimeSeries { t, x }, 10.0).unwrap();
        assert!((orbit.period - 7.3).abs() < 1e-4, "{}", orbit.period);
        assert_abs_diff_eq!(orbit.amplitude, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn constant_has_no_period() {
        let t: Vec<f64> = (0..1000).map(|k| k as f64 * 0.1).collect();
        let x = vec![0.3; 1000];
        assert!(matches!(
            extract_periodic_orbit(&TimeSeries { t, x }, 0.0),
            Err(Error::NoPeriodicity(_))
        ));
    }

    #[test]
    fn identical_series_has_zero_error() {
        let t: Vec<f64> = (0..5000).map(|k| k as f64 * 0.01).collect();
        let x: Vec<f64> = t.iter().map(|t| t.sin()).collect();
        let series = TimeSeries { t, x };
        let orbit = extract_periodic_orbit(&series, 0.0).unwrap();
        let orbit = Orbit {
            samples: orbit.samples[1..orbit.samples.len() - 1].to_vec(),
            ..orbit
        };
        assert_eq!(linf_cycle_error(&orbit, &series).unwrap(), 0.0);
    }
}
