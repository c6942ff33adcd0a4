//! Stochastic Suarez-Schopf model with a drifting delay, and spectral tools
//! for the resulting tipping solution paths (TSPs).
//!
//! `dθ = (aθ - α θ(t - τ(t)) - bθ² - θ³) dt + σ/(1 + θ²) dW`, written in the
//! variable perturbed about `T+`, so `a = 1 - 3T+²` and `b = 3T+`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gk::suarez_schopf_t_plus;

/// Name of the random stream, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9) + StandardNormal (rand_distr 0.5)";

/// Days per model delay unit, as used by the physical-time conversion.
pub const DELTA_DAYS: f64 = 349.0;
/// Reference delay of the physical-time conversion.
pub const REFERENCE_TAU: f64 = 1.7;
const DAYS_PER_YEAR: f64 = 365.0;

/// Model time to years, with the reference delay.
pub fn to_physical_years(t: f64) -> f64 {
    to_physical_years_at(t, REFERENCE_TAU)
}

/// Model time to years, scaling by a given delay instead of the reference.
pub fn to_physical_years_at(t: f64, tau: f64) -> f64 {
    t * DELTA_DAYS / (tau * DAYS_PER_YEAR)
}

/// Years to model time (inverse of [`to_physical_years`]).
pub fn from_physical_years(years: f64) -> f64 {
    years * REFERENCE_TAU * DAYS_PER_YEAR / DELTA_DAYS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `min(τ0 + εt, τ1)`.
    Linear,
    /// Up-down ramp between `τ0` and `τ1` at slope `±ε`.
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticModel {
    pub alpha: f64,
    pub sigma: f64,
    pub tau0: f64,
    pub tau1: f64,
    pub epsilon: f64,
    pub schedule: Schedule,
    pub stratonovich: bool,
}

impl StochasticModel {
    /// Single drift from 1.45 to 1.65 over 237.8 time units.
    pub fn tipping_default() -> Self {
        Self {
            alpha: 0.75,
            sigma: 0.2,
            tau0: 1.45,
            tau1: 1.65,
            epsilon: 8.4e-4,
            schedule: Schedule::Linear,
            stratonovich: false,
        }
    }

    /// Periodic sweep of the same delay range, for long variability runs.
    pub fn oscillating_default() -> Self {
        Self {
            schedule: Schedule::Triangle,
            ..Self::tipping_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        suarez_schopf_t_plus(self.alpha)?;
        let finite = [self.sigma, self.tau0, self.tau1, self.epsilon]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return invalid("stochastic model parameters must be finite");
        }
        if self.sigma < 0.0 || self.epsilon < 0.0 {
            return invalid("sigma and epsilon must be nonnegative");
        }
        if !(self.tau0 > 0.0 && self.tau0 <= self.tau1) {
            return invalid(format!("need 0 < tau0 <= tau1, got {} and {}", self.tau0, self.tau1));
        }
        Ok(())
    }

    pub fn t_plus(&self) -> f64 {
        suarez_schopf_t_plus(self.alpha).unwrap_or(f64::NAN)
    }

    /// Linear coefficient `1 - 3T+²`.
    pub fn a(&self) -> f64 {
        1.0 - 3.0 * self.t_plus().powi(2)
    }

    /// Quadratic coefficient `3T+`.
    pub fn b(&self) -> f64 {
        3.0 * self.t_plus()
    }

    /// Full cycle of the triangle schedule, `2(τ1 - τ0)/ε`.
    pub fn triangle_period(&self) -> f64 {
        2.0 * (self.tau1 - self.tau0) / self.epsilon
    }

    fn drift(&self, theta: f64, delayed: f64) -> f64 {
        let mut f = self.a() * theta - self.alpha * delayed - self.b() * theta * theta - theta.powi(3);
        if self.stratonovich {
            f += self.sigma * self.sigma * theta / (1.0 + theta * theta).powi(3);
        }
        f
    }

    /// Noise amplitude `σ/(1 + θ²)`.
    pub fn diffusion(&self, theta: f64) -> f64 {
        self.sigma / (1.0 + theta * theta)
    }
}

/// Delay at time `t >= 0`.
pub fn tau_schedule(model: &StochasticModel, t: f64) -> f64 {
    let (t0, t1, eps) = (model.tau0, model.tau1, model.epsilon);
    if eps == 0.0 || t1 == t0 {
        return t0;
    }
    match model.schedule {
        Schedule::Linear => (t0 + eps * t).min(t1),
        Schedule::Triangle => {
            let half = (t1 - t0) / eps;
            let phase = t.rem_euclid(2.0 * half);
            let tau = if phase <= half {
                t0 + eps * phase
            } else {
                t1 - eps * (phase - half)
            };
            tau.clamp(t0, t1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspRun {
    pub dt: f64,
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub tau_t: Vec<f64>,
    pub seed: u64,
}

impl TspRun {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// CSV `t,theta,tau`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * self.len() + 16);
        out.push_str("t,theta,tau\n");
        for k in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", self.times[k], self.theta[k], self.tau_t[k]));
        }
        out
    }
}

const BLOW_UP: f64 = 1e6;

/// Constant history `θ ≡ -2T+`, the La Nina state `T-` in perturbed form.
pub fn default_history(model: &StochasticModel) -> impl Fn(f64) -> f64 {
    let v = -2.0 * model.t_plus();
    move |_| v
}

/// Euler-Maruyama (Itô) path over `steps` steps of size `dt`. The delayed
/// value is linearly interpolated in the stored path; `history` supplies
/// values on `[-τ1, 0]`.
pub fn simulate_tsp(
    model: &StochasticModel,
    history: &dyn Fn(f64) -> f64,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<TspRun> {
    model.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid("time step must be positive");
    }
    if dt > model.tau0 {
        return invalid("time step must not exceed the smallest delay");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqdt = dt.sqrt();
    let mut theta = Vec::with_capacity(steps + 1);
    let mut tau_t = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let x0 = history(0.0);
    if !x0.is_finite() {
        return invalid("history is not finite at 0");
    }
    theta.push(x0);
    times.push(0.0);
    tau_t.push(tau_schedule(model, 0.0));
    for k in 0..steps {
        let t = k as f64 * dt;
        let tau = tau_t[k];
        let s = t - tau;
        let delayed = if s <= 0.0 {
            if s < -model.tau1 - 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "delayed time {s} precedes the history window"
                )));
            }
            history(s)
        } else {
            let pos = s / dt;
            let i = pos.floor() as usize;
            let w = pos - i as f64;
            if i + 1 > k {
                theta[i]
            } else {
                (1.0 - w) * theta[i] + w * theta[i + 1]
            }
        };
        let x = theta[k];
        let xi: f64 = StandardNormal.sample(&mut rng);
        let next = x + model.drift(x, delayed) * dt + model.diffusion(x) * sqdt * xi;
        if !next.is_finite() || next.abs() > BLOW_UP {
            return Err(Error::BlowUp { time: t + dt });
        }
        theta.push(next);
        let tn = (k + 1) as f64 * dt;
        times.push(tn);
        tau_t.push(tau_schedule(model, tn));
    }
    Ok(TspRun {
        dt,
        times,
        theta,
        tau_t,
        seed,
    })
}

/// Independent members with the default history, one per seed, in parallel.
pub fn simulate_ensemble(model: &StochasticModel, dt: f64, steps: usize, seeds: &[u64]) -> Result<Vec<TspRun>> {
    let history = default_history(model);
    seeds
        .par_iter()
        .map(|&seed| simulate_tsp(model, &history, dt, steps, seed))
        .collect()
}

/// One-sided power spectral density with frequencies in cycles per year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub frequency: Vec<f64>,
    pub power: Vec<f64>,
}

impl Psd {
    /// Period in years of every positive-frequency bin, paired with power.
    pub fn by_period(&self) -> Vec<(f64, f64)> {
        self.frequency
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f > 0.0)
            .map(|(f, p)| (1.0 / f, *p))
            .collect()
    }

    /// CSV `period_yr,power`, longest period first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period_yr,power\n");
        for (p, w) in self.by_period() {
            out.push_str(&format!("{p},{w}\n"));
        }
        out
    }
}

/// Default Welch segment length in years.
pub const DEFAULT_SEGMENT_YEARS: f64 = 120.0;

/// Welch estimate: Hann-windowed segments of `segment_years`, 50% overlap,
/// mean removed per segment. `dt` is the model-time sample spacing.
pub fn welch_psd(series: &[f64], dt: f64, segment_years: f64) -> Result<Psd> {
    let dt_yr = to_physical_years(dt);
    if !(dt_yr > 0.0) || !(segment_years > 0.0) {
        return invalid("sample spacing and segment length must be positive");
    }
    let len = (segment_years / dt_yr).round() as usize;
    if len < 8 {
        return invalid("segment shorter than eight samples");
    }
    let hop = len / 2;
    if series.len() < len + hop {
        return invalid(format!(
            "series of {} samples is shorter than two {}-sample segments",
            series.len(),
            len
        ));
    }
    let window: Vec<f64> = (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / len as f64).cos())
        .collect();
    let wsum: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let bins = len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    let mut start = 0;
    while start + len <= series.len() {
        let seg = &series[start..start + len];
        let mean = seg.iter().sum::<f64>() / len as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = dt_yr / (wsum * count as f64);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let edge = k == 0 || (len.is_multiple_of(2) && k == bins - 1);
            a * scale * if edge { 1.0 } else { 2.0 }
        })
        .collect();
    let frequency = (0..bins).map(|k| k as f64 / (len as f64 * dt_yr)).collect();
    Ok(Psd { frequency, power })
}

/// Bin-wise median of spectra on a common grid.
pub fn median_psd(spectra: &[Psd]) -> Result<Psd> {
    let first = spectra.first().ok_or_else(|| Error::InvalidArgument("no spectra".into()))?;
    if spectra.iter().any(|s| s.frequency.len() != first.frequency.len()) {
        return invalid("spectra are on different grids");
    }
    let power = (0..first.power.len())
        .map(|k| {
            let mut v: Vec<f64> = spectra.iter().map(|s| s.power[k]).collect();
            median(&mut v)
        })
        .collect();
    Ok(Psd {
        frequency: first.frequency.clone(),
        power,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Strongest bin of a period band and its contrast to the surroundings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPeak {
    pub period: f64,
    pub power: f64,
    /// Median power of the half-octave bands on either side.
    pub background: f64,
    pub local_max: bool,
}

impl BandPeak {
    pub fn contrast(&self) -> f64 {
        self.power / self.background
    }
}

/// Peak of `psd` inside the period band `[lo, hi]` years.
pub fn band_peak(psd: &Psd, band: (f64, f64)) -> Result<BandPeak> {
    let (lo, hi) = band;
    if !(0.0 < lo && lo < hi) {
        return invalid("period band must satisfy 0 < lo < hi");
    }
    let f = &psd.frequency;
    let p = &psd.power;
    let inside: Vec<usize> = (1..f.len()).filter(|&k| (lo..=hi).contains(&(1.0 / f[k]))).collect();
    let &best = inside
        .iter()
        .max_by(|&&a, &&b| p[a].total_cmp(&p[b]))
        .ok_or_else(|| Error::InvalidArgument(format!("no frequency bin inside the {lo}-{hi} yr band")))?;
    let r = std::f64::consts::SQRT_2;
    let mut around: Vec<f64> = (1..f.len())
        .filter(|&k| {
            let per = 1.0 / f[k];
            (lo / r..lo).contains(&per) || (per > hi && per <= hi * r)
        })
        .map(|k| p[k])
        .collect();
    if around.is_empty() {
        return invalid("no frequency bins in the neighbouring half-octaves");
    }
    let local_max = best > 0 && best + 1 < p.len() && p[best] > p[best - 1] && p[best] > p[best + 1];
    Ok(BandPeak {
        period: 1.0 / f[best],
        power: p[best],
        background: median(&mut around),
        local_max,
    })
}

/// Filter order of the Butterworth prototype.
pub const BUTTERWORTH_ORDER: i32 = 4;

/// Zero-phase Butterworth band-pass in the period band `(lo, hi)` years.
///
/// Forward-backward filtering has gain `|H|²` and no phase shift, so it is
/// applied as that gain in the frequency domain, after even extension of the
/// series to suppress wrap-around at the ends.
pub fn band_filter(series: &[f64], dt: f64, band: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = band;
    let n = series.len();
    let dt_yr = to_physical_years(dt);
    if !(0.0 < lo && lo < hi) {
        return invalid("period band must satisfy 0 < lo < hi");
    }
    if n < 4 {
        return invalid("series too short to filter");
    }
    if lo <= 2.0 * dt_yr {
        return invalid("band reaches beyond the Nyquist period");
    }
    let m = 2 * n;
    let df = 1.0 / (m as f64 * dt_yr);
    let (f_lo, f_hi) = (1.0 / hi, 1.0 / lo);
    if f_hi - f_lo < 2.0 * df {
        return Err(Error::InvalidArgument(format!(
            "band {lo}-{hi} yr is narrower than the frequency resolution of the series"
        )));
    }
    let f0 = (f_lo * f_hi).sqrt();
    let bw = f_hi - f_lo;
    let gain = |f: f64| {
        if f == 0.0 {
            return 0.0;
        }
        let x = (f * f - f0 * f0) / (f * bw);
        1.0 / (1.0 + x.powi(2 * BUTTERWORTH_ORDER))
    };
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .chain(series.iter().rev())
        .map(|&x| Complex::new(x, 0.0))
        .collect();
    fwd.process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let kk = k.min(m - k);
        *b *= gain(kk as f64 * df);
    }
    inv.process(&mut buf);
    Ok(buf[..n].iter().map(|c| c.re / m as f64).collect())
}
