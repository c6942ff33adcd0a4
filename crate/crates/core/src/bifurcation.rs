//! Periodic orbits of the 2D reduced system and the local/global
//! bifurcation values of the delay parameter.
//!
//! Stable cycles are reached by forward integration and unstable periodic
//! orbits (UPOs) by backward integration, under which they attract. Orbits
//! are told apart by their winding numbers around the three equilibria of
//! the reduced system: the origin, the saddle and the opposite lobe
//! equilibrium.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dde::{extract_periodic_orbit, Orbit, Stability, TimeSeries};
use crate::error::{invalid, Error, Result};
use crate::manifold::ReducedSystem2D;
use crate::spectral::find_tau_c_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    StableCycle,
    UpoInnerMinus,
    UpoInnerPlus,
    UpoOuter,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::StableCycle,
        Family::UpoInnerMinus,
        Family::UpoInnerPlus,
        Family::UpoOuter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::StableCycle => "stable_cycle",
            Family::UpoInnerMinus => "upo_inner_minus",
            Family::UpoInnerPlus => "upo_inner_plus",
            Family::UpoOuter => "upo_outer",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s || (s == "stable" && *f == Family::StableCycle))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown orbit family '{s}'")))
    }

    fn is_upo(self) -> bool {
        self != Family::StableCycle
    }
}

/// Tunables of the orbit computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSettings {
    /// RK4 step of the reduced system (model time).
    pub dt: f64,
    /// Minimum integration time before convergence is tested.
    pub transient: f64,
    /// Give up after this much integration time.
    pub max_time: f64,
    /// Successive loop maxima must agree to this tolerance.
    pub loop_tol: f64,
    /// UPOs with longer periods count as absent (homoclinic proximity).
    pub period_cap: f64,
    /// Seed `x_1` for the stable cycle (forward integration).
    pub stable_seed: f64,
    /// Inner UPO seeds sit this fraction of the saddle distance outward
    /// from their lobe equilibrium.
    pub inner_seed: f64,
    /// Cycles with a smaller lifted amplitude count as equilibria.
    pub min_amplitude: f64,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            transient: 200.0,
            max_time: 6000.0,
            loop_tol: 1e-8,
            period_cap: 500.0,
            stable_seed: 1.0,
            inner_seed: 0.1,
            min_amplitude: 1e-4,
        }
    }
}

/// Equilibria of the reduced system in real coordinates `x_1 = p + i q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibria {
    pub origin: [f64; 2],
    pub saddle: [f64; 2],
    pub opposite: [f64; 2],
}

fn jacobian(red: &ReducedSystem2D, x: [f64; 2]) -> [[f64; 2]; 2] {
    let h = 1e-7;
    let mut j = [[0.0; 2]; 2];
    for c in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[c] += h;
        xm[c] -= h;
        let (fp, fm) = (red.real_rhs(xp), red.real_rhs(xm));
        for r in 0..2 {
            j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

fn newton(red: &ReducedSystem2D, mut x: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..50 {
        let f = red.real_rhs(x);
        let j = jacobian(red, x);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !det.is_finite() || det.abs() < 1e-300 {
            return None;
        }
        let dx = [
            (j[1][1] * f[0] - j[0][1] * f[1]) / det,
            (-j[1][0] * f[0] + j[0][0] * f[1]) / det,
        ];
        x = [x[0] - dx[0], x[1] - dx[1]];
        if !(x[0].is_finite() && x[1].is_finite()) || x[0].hypot(x[1]) > 1e3 {
            return None;
        }
        if dx[0].hypot(dx[1]) < 1e-13 * (1.0 + x[0].hypot(x[1])) {
            let f = red.real_rhs(x);
            return (f[0].hypot(f[1]) < 1e-9).then_some(x);
        }
    }
    None
}

/// Locates the origin, the saddle (negative Jacobian determinant) and the
/// nearest remaining equilibrium by Newton's method from a grid of seeds.
pub fn reduced_equilibria(red: &ReducedSystem2D) -> Result<Equilibria> {
    let mut roots: Vec<[f64; 2]> = Vec::new();
    let k = 24;
    let radius = 1.5;
    for a in 0..=k {
        for b in 0..=k {
            let seed = [
                radius * (2.0 * a as f64 / k as f64 - 1.0),
                radius * (2.0 * b as f64 / k as f64 - 1.0),
            ];
            if let Some(r) = newton(red, seed) {
                if !roots.iter().any(|q| (q[0] - r[0]).hypot(q[1] - r[1]) < 1e-7) {
                    roots.push(r);
                }
            }
        }
    }
    roots.sort_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])));
    let origin = [0.0, 0.0];
    let others: Vec<[f64; 2]> = roots
        .into_iter()
        .filter(|r| r[0].hypot(r[1]) > 1e-8)
        .collect();
    let det = |x: [f64; 2]| {
        let j = jacobian(red, x);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    };
    let saddle = others
        .iter()
        .copied()
        .find(|&x| det(x) < 0.0)
        .ok_or_else(|| Error::NoPeriodicity("reduced system has no saddle equilibrium".into()))?;
    let opposite = others
        .iter()
        .copied()
        .find(|&x| x != saddle)
        .ok_or_else(|| Error::NoPeriodicity("reduced system has a single nontrivial equilibrium".into()))?;
    Ok(Equilibria {
        origin,
        saddle,
        opposite,
    })
}

/// Winding number of a closed path around a point.
pub fn winding_number(path: &[[f64; 2]], point: [f64; 2]) -> i32 {
    if path.len() < 3 {
        return 0;
    }
    let mut total = 0.0;
    let angle = |p: &[f64; 2]| (p[1] - point[1]).atan2(p[0] - point[0]);
    let closed = path.iter().chain(std::iter::once(&path[0]));
    let mut prev = angle(&path[0]);
    for p in closed.skip(1) {
        let a = angle(p);
        let mut d = a - prev;
        if d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        } else if d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        total += d;
        prev = a;
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}

/// Cycle of the reduced system with its lifted DDE profile.
#[derive(Debug, Clone)]
pub struct ReducedOrbit {
    /// Lifted `T*` over one period, in forward time.
    pub orbit: Orbit,
    /// One period of the path in `(Re x_1, Im x_1)`, in forward time.
    pub path: Vec<[f64; 2]>,
    /// Absolute winding numbers about origin, saddle and opposite equilibrium.
    pub windings: [i32; 3],
}

impl ReducedOrbit {
    pub fn family(&self) -> Option<Family> {
        match self.windings {
            [1, 0, 0] => Some(Family::UpoInnerPlus),
            [0, 0, 1] => Some(Family::UpoInnerMinus),
            [1, 1, 1] => Some(Family::UpoOuter),
            _ => None,
        }
    }
}

// Integrates until successive maxima of the lifted signal settle, then
// returns one period of the limiting cycle.
fn settle(red: &ReducedSystem2D, seed: [f64; 2], backward: bool, s: &OrbitSettings) -> Result<(Orbit, Vec<[f64; 2]>)> {
    let dt = if backward { -s.dt } else { s.dt };
    let chunk = ((s.transient / s.dt).ceil() as usize).max(10);
    let max_steps = (s.max_time / s.dt).ceil() as usize;
    let mut path = vec![seed];
    let mut maxima: Vec<f64> = Vec::new();
    let mut lift: Vec<f64> = vec![red.lift_real(seed)];
    let mut state = seed;
    let mut converged = false;
    while path.len() <= max_steps {
        let seg = red.integrate(state, dt, chunk, 1)?;
        for p in seg.into_iter().skip(1) {
            path.push(p);
            let v = red.lift_real(p);
            let n = lift.len();
            if n >= 2 && lift[n - 1] >= lift[n - 2] && lift[n - 1] > v {
                maxima.push(lift[n - 1]);
            }
            lift.push(v);
        }
        state = *path.last().unwrap();
        let f = red.real_rhs(state);
        if f[0].hypot(f[1]) < 1e-10 {
            break;
        }
        let m = maxima.len();
        if m >= 3 && path.len() as f64 * s.dt >= s.transient {
            let (a, b, c) = (maxima[m - 3], maxima[m - 2], maxima[m - 1]);
            if (c - b).abs() < s.loop_tol * (1.0 + c.abs()) && (b - a).abs() < 10.0 * s.loop_tol * (1.0 + c.abs()) {
                converged = true;
                break;
            }
        }
    }
    let recent_span = {
        let tail = &lift[lift.len().saturating_sub(chunk)..];
        tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    if recent_span < 1e-6 {
        return Err(Error::NoPeriodicity("converged to an equilibrium".into()));
    }
    if !converged && maxima.len() < 3 {
        return Err(Error::NoPeriodicity("no oscillation".into()));
    }
    // a few more periods on the limiting cycle for period extraction
    let rough_period = estimate_period(&lift, s.dt).unwrap_or(s.transient);
    let extra = ((4.5 * rough_period / s.dt).ceil() as usize).max(16);
    let seg = red.integrate(state, dt, extra, 1)?;
    let series = TimeSeries {
        t: (0..seg.len()).map(|k| k as f64 * s.dt).collect(),
        x: seg.iter().map(|p| red.lift_real(*p)).collect(),
    };
    let mut orbit = extract_periodic_orbit(&series, 0.0)?;
    if orbit.amplitude < s.min_amplitude {
        return Err(Error::NoPeriodicity("converged to an equilibrium".into()));
    }
    let (t0, t1) = (orbit.samples[0].0, orbit.samples[orbit.samples.len() - 1].0);
    let k0 = (t0 / s.dt).floor() as usize;
    let k1 = ((t1 / s.dt).ceil() as usize).min(seg.len() - 1);
    let mut loop_path: Vec<[f64; 2]> = seg[k0..=k1].to_vec();
    if backward {
        loop_path.reverse();
        let end = orbit.samples[orbit.samples.len() - 1].0;
        orbit.samples = orbit.samples.iter().rev().map(|(t, x)| (end - t, *x)).collect();
    } else {
        let start = orbit.samples[0].0;
        for s in &mut orbit.samples {
            s.0 -= start;
        }
    }
    Ok((orbit, loop_path))
}

fn estimate_period(lift: &[f64], dt: f64) -> Option<f64> {
    let tail = &lift[lift.len() / 2..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let ups: Vec<usize> = (1..tail.len())
        .filter(|&k| tail[k - 1] < mean && tail[k] >= mean)
        .collect();
    if ups.len() < 2 {
        return None;
    }
    Some((ups[ups.len() - 1] - ups[ups.len() - 2]) as f64 * dt)
}

fn windings(path: &[[f64; 2]], eq: &Equilibria) -> [i32; 3] {
    [
        winding_number(path, eq.origin).abs(),
        winding_number(path, eq.saddle).abs(),
        winding_number(path, eq.opposite).abs(),
    ]
}

/// Attracting cycle reached forward in time from `|x_1| = stable_seed`.
pub fn compute_stable_cycle(red: &ReducedSystem2D, settings: &OrbitSettings) -> Result<ReducedOrbit> {
    compute_stable_cycle_from(red, [settings.stable_seed, 0.0], settings)
}

pub fn compute_stable_cycle_from(red: &ReducedSystem2D, seed: [f64; 2], settings: &OrbitSettings) -> Result<ReducedOrbit> {
    let none = || Error::NoAttractingCycle { tau: red.tau };
    let (orbit, path) = settle(red, seed, false, settings).map_err(|_| none())?;
    let eq = reduced_equilibria(red)?;
    let w = windings(&path, &eq);
    // the attracting cycle must enclose both lobes
    if w != [1, 1, 1] {
        return Err(none());
    }
    Ok(ReducedOrbit {
        orbit,
        path,
        windings: w,
    })
}

/// Seed for a UPO family.
pub fn upo_seed(red: &ReducedSystem2D, family: Family, settings: &OrbitSettings) -> Result<[f64; 2]> {
    match family {
        Family::UpoInnerPlus | Family::UpoInnerMinus => {
            // step from the lobe equilibrium directly away from the saddle
            let eq = reduced_equilibria(red)?;
            let o = if family == Family::UpoInnerPlus { eq.origin } else { eq.opposite };
            let s = eq.saddle;
            let f = settings.inner_seed;
            Ok([o[0] + f * (o[0] - s[0]), o[1] + f * (o[1] - s[1])])
        }
        Family::UpoOuter => {
            // just inside the attracting cycle, which lies outside every UPO
            let cycle = compute_stable_cycle(red, settings).map_err(|_| Error::NoUpo {
                family: family.name().into(),
                tau: red.tau,
            })?;
            let far = cycle
                .path
                .iter()
                .copied()
                .max_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])))
                .unwrap_or([0.0, 0.0]);
            Ok([0.995 * far[0], 0.995 * far[1]])
        }
        Family::StableCycle => invalid("stable cycles are not UPOs"),
    }
}

/// UPO of a family by backward integration from the family seed.
pub fn compute_upo(red: &ReducedSystem2D, family: Family, settings: &OrbitSettings) -> Result<ReducedOrbit> {
    let seed = upo_seed(red, family, settings)?;
    compute_upo_from(red, family, seed, settings)
}

pub fn compute_upo_from(
    red: &ReducedSystem2D,
    family: Family,
    seed: [f64; 2],
    settings: &OrbitSettings,
) -> Result<ReducedOrbit> {
    if !family.is_upo() {
        return invalid("stable cycles are not UPOs");
    }
    let none = || Error::NoUpo {
        family: family.name().into(),
        tau: red.tau,
    };
    let (mut orbit, path) = settle(red, seed, true, settings).map_err(|_| none())?;
    if orbit.period > settings.period_cap {
        return Err(none());
    }
    let eq = reduced_equilibria(red)?;
    let w = windings(&path, &eq);
    let out = ReducedOrbit {
        orbit: {
            orbit.stability = Stability::Unstable;
            orbit
        },
        path,
        windings: w,
    };
    if out.family() != Some(family) {
        return Err(none());
    }
    Ok(out)
}

/// Orbit of any family.
pub fn compute_orbit(red: &ReducedSystem2D, family: Family, settings: &OrbitSettings) -> Result<ReducedOrbit> {
    match family {
        Family::StableCycle => compute_stable_cycle(red, settings),
        _ => compute_upo(red, family, settings),
    }
}

/// One point of a bifurcation diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub family: Family,
    pub tau: f64,
    pub amplitude: f64,
    pub period: f64,
}

/// Points of a branch and where (and why) it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub family: Family,
    pub points: Vec<BranchPoint>,
    pub terminated: Option<(f64, String)>,
}

/// Follows a family over `taus`. Sequential sweeps warm-start each orbit
/// from the previous one and stop at the first failure; `parallel` sweeps
/// cold-start every point and keep all successes.
pub fn continue_branch<F>(
    factory: F,
    taus: &[f64],
    family: Family,
    settings: &OrbitSettings,
    parallel: bool,
) -> Branch
where
    F: Fn(f64) -> Result<ReducedSystem2D> + Sync,
{
    let point = |o: &ReducedOrbit, tau| BranchPoint {
        family,
        tau,
        amplitude: o.orbit.amplitude,
        period: o.orbit.period,
    };
    if parallel {
        let results: Vec<(f64, Result<BranchPoint>)> = taus
            .par_iter()
            .map(|&tau| {
                let r = factory(tau).and_then(|red| compute_orbit(&red, family, settings).map(|o| point(&o, tau)));
                (tau, r)
            })
            .collect();
        let mut points = Vec::new();
        let mut terminated = None;
        for (tau, r) in results {
            match r {
                Ok(p) => points.push(p),
                Err(e) if terminated.is_none() => terminated = Some((tau, e.to_string())),
                Err(_) => {}
            }
        }
        return Branch {
            family,
            points,
            terminated,
        };
    }
    let mut points = Vec::new();
    let mut warm: Option<[f64; 2]> = None;
    for &tau in taus {
        let attempt = factory(tau).and_then(|red| {
            let warm_try = warm.map(|seed| match family {
                Family::StableCycle => compute_stable_cycle_from(&red, seed, settings),
                _ => compute_upo_from(&red, family, seed, settings),
            });
            match warm_try {
                Some(Ok(o)) => Ok(o),
                _ => compute_orbit(&red, family, settings),
            }
        });
        match attempt {
            Ok(o) => {
                warm = o.path.first().copied();
                points.push(point(&o, tau));
            }
            Err(e) => {
                if points.is_empty() {
                    // the branch has not started yet
                    continue;
                }
                return Branch {
                    family,
                    points,
                    terminated: Some((tau, e.to_string())),
                };
            }
        }
    }
    Branch {
        family,
        points,
        terminated: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopfType {
    Subcritical,
    Supercritical,
}

/// Smallest admissible `|l1|` for classifying a Hopf point.
pub const DEGENERATE_L1: f64 = 1e-6;

/// Critical delay, first Lyapunov coefficient and Hopf type for a spec
/// family. The bracket for the bisection is located by scanning `scan`.
pub fn detect_hopf_with<F>(family: F, n: usize, scan: &[f64]) -> Result<(f64, f64, HopfType)>
where
    F: Fn(f64) -> Result<crate::gk::DdeSpec>,
{
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for &tau in scan {
        let re = crate::spectral::leading_real_part(&family(tau)?, n)?;
        if let Some((t0, r0)) = prev {
            if r0 < 0.0 && re >= 0.0 {
                bracket = Some((t0, tau));
                break;
            }
        }
        prev = Some((tau, re));
    }
    let (lo, hi) = bracket.ok_or(Error::Bracket {
        lo: scan.first().copied().unwrap_or(0.0),
        hi: scan.last().copied().unwrap_or(0.0),
    })?;
    let tau_c = find_tau_c_with(&family, n, (lo, hi))?;
    let system = crate::gk::GkSystem::assemble(&family(tau_c)?, n)?;
    let spectrum = crate::spectral::eigendecompose(&system)?;
    let inter = crate::manifold::Interactions::new(&system, &spectrum)?;
    let l1 = crate::manifold::lyapunov_coefficient(&inter, &spectrum)?;
    if l1.abs() < DEGENERATE_L1 {
        return Err(Error::DegenerateHopf { l1 });
    }
    let kind = if l1 > 0.0 {
        HopfType::Subcritical
    } else {
        HopfType::Supercritical
    };
    Ok((tau_c, l1, kind))
}

/// Hopf point of the Suarez-Schopf GK system.
pub fn detect_hopf(alpha: f64, n: usize) -> Result<(f64, f64, HopfType)> {
    let scan: Vec<f64> = (1..=400).map(|k| 0.025 * k as f64).collect();
    detect_hopf_with(|tau| crate::gk::suarez_schopf_perturbed(alpha, tau), n, &scan)
}

/// Bisection tolerance on global bifurcation values.
pub const GLOBAL_TOL: f64 = 1e-4;

fn bisect_existence<P>(exists: P, bracket: (f64, f64), tol: f64) -> Result<f64>
where
    P: Fn(f64) -> bool,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return invalid("bracket must satisfy lo < hi");
    }
    if exists(lo) || !exists(hi) {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if exists(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Homoclinic value: infimum of delays with an inner UPO about the origin of
/// period below the cap.
pub fn detect_homoclinic<F>(factory: F, bracket: (f64, f64), settings: &OrbitSettings) -> Result<f64>
where
    F: Fn(f64) -> Result<ReducedSystem2D>,
{
    bisect_existence(
        |tau| {
            factory(tau)
                .and_then(|red| compute_upo(&red, Family::UpoInnerPlus, settings))
                .is_ok()
        },
        bracket,
        GLOBAL_TOL,
    )
}

/// Saddle-node of periodic orbits: infimum of delays with an attracting cycle.
pub fn detect_sno<F>(factory: F, bracket: (f64, f64), settings: &OrbitSettings) -> Result<f64>
where
    F: Fn(f64) -> Result<ReducedSystem2D>,
{
    bisect_existence(
        |tau| {
            factory(tau)
                .and_then(|red| compute_stable_cycle(&red, settings))
                .is_ok()
        },
        bracket,
        GLOBAL_TOL,
    )
}

/// Diagram CSV `family,tau,amplitude,period`, sorted by family then delay.
pub fn diagram_csv(points: &[BranchPoint]) -> String {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.family.cmp(&b.family).then(a.tau.total_cmp(&b.tau)));
    let mut out = String::from("family,tau,amplitude,period\n");
    for p in sorted {
        out.push_str(&format!("{},{},{},{}\n", p.family.name(), p.tau, p.amplitude, p.period));
    }
    out
}

pub fn parse_diagram_csv(text: &str) -> Result<Vec<BranchPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some("family,tau,amplitude,period") {
        return invalid("missing diagram header");
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return invalid(format!("malformed diagram row '{l}'"));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number '{s}'")))
            };
            Ok(BranchPoint {
                family: Family::parse(f[0])?,
                tau: num(f[1])?,
                amplitude: num(f[2])?,
                period: num(f[3])?,
            })
        })
        .collect()
}
