//! Subcommand settings and their runners. Every setting can come from the
//! command line or from a flat config file with the same key names (flags
//! use dashes, keys use underscores); flags win.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ddegk::bifurcation::{self as bif, Family, OrbitSettings};
use ddegk::dde::{extract_periodic_orbit, integrate_dde, Orbit};
use ddegk::gk::{suarez_schopf_perturbed, GkSystem};
use ddegk::manifold::ReducedSystem2D;
use ddegk::spectral::{low_frequency_pairs, sorted_eigenvalues, tau_c_analytic};
use ddegk::stochastic::{self as sto, Schedule, StochasticModel};

use crate::config::{layer, load_file, required, Count, Interval, Range};
use crate::error::CliError;
use crate::output::{csv, Outputs};

/// Settings type of one subcommand.
pub trait Command: Serialize + for<'de> Deserialize<'de> + Sized {
    const NAME: &'static str;

    fn defaults() -> Self;

    fn out_dir(&self) -> Option<&Path>;

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError>;
}

/// Resolves the settings of `C` and runs it.
pub fn execute<C: Command>(cli: &C, config: Option<&Path>) -> Result<(), CliError> {
    let file = config.map(|p| load_file(p, C::NAME)).transpose()?;
    let settings = layer(&C::defaults(), file.as_ref(), cli)?;
    let mut out = Outputs::open(settings.out_dir())?;
    let extra = settings.run(&mut out)?;
    out.finish(C::NAME, &settings, extra)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn family_list(s: &str) -> Result<Vec<Family>, CliError> {
    if s == "all" {
        return Ok(Family::ALL.to_vec());
    }
    s.split(',').map(|f| Family::parse(f.trim()).map_err(CliError::from)).collect()
}

fn orbit_settings(dt: Option<f64>, period_cap: Option<f64>) -> OrbitSettings {
    let mut s = OrbitSettings::default();
    if let Some(dt) = dt {
        s.dt = dt;
    }
    if let Some(cap) = period_cap {
        s.period_cap = cap;
    }
    s
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SpectrumArgs {
    /// Delayed-feedback strength alpha in (0.5, 1) [required]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// GK dimension [default: 20]
    #[arg(long = "N", visible_alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Delays lo:hi:step or a single value [default: 1.3:2.5:0.01]
    #[arg(long)]
    pub tau: Option<Range>,
    /// Lowest-frequency eigenvalue pairs written per delay [default: 10]
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Also locate the Hopf point and its Lyapunov coefficient [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub find_tauc: Option<bool>,
    /// Output directory [default: $DDEGK_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Command for SpectrumArgs {
    const NAME: &'static str = "spectrum";

    fn defaults() -> Self {
        Self {
            alpha: None,
            n: Some(20),
            tau: Some("1.3:2.5:0.01".parse().unwrap()),
            pairs: Some(10),
            find_tauc: Some(false),
            out_dir: None,
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError> {
        let alpha = required(&self.alpha, "alpha")?;
        let n = required(&self.n, "N")?;
        let pairs = required(&self.pairs, "pairs")?;
        let mut rows = Vec::new();
        for tau in required(&self.tau, "tau")?.values() {
            let sys = GkSystem::assemble(&suarez_schopf_perturbed(alpha, tau)?, n)?;
            let ev = sorted_eigenvalues(sys.matrix());
            for (k, z) in low_frequency_pairs(&ev, pairs).into_iter().enumerate() {
                rows.push(vec![fmt(tau), k.to_string(), fmt(z.re), fmt(z.im)]);
            }
        }
        out.write("spectrum.csv", csv("tau,pair,re,im", rows).as_bytes())?;
        if self.find_tauc == Some(true) {
            let (tau_c, l1, kind) = bif::detect_hopf(alpha, n)?;
            let summary = json!({
                "alpha": alpha,
                "N": n,
                "tau_c": tau_c,
                "tau_c_analytic": tau_c_analytic(alpha).ok(),
                "l1": l1,
                "type": kind,
            });
            out.write_json("spectrum_summary.json", &summary)?;
        }
        Ok(json!({}))
    }
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct ReduceArgs {
    /// Delayed-feedback strength [default: 0.75]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// GK dimension of the reduction [default: 6]
    #[arg(long = "N", visible_alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Delay [default: 1.7]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Output directory [default: $DDEGK_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Command for ReduceArgs {
    const NAME: &'static str = "reduce";

    fn defaults() -> Self {
        Self {
            alpha: Some(0.75),
            n: Some(6),
            tau: Some(1.7),
            out_dir: None,
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError> {
        let (alpha, n, tau) = (required(&self.alpha, "alpha")?, required(&self.n, "N")?, required(&self.tau, "tau")?);
        let red = ReducedSystem2D::build(&suarez_schopf_perturbed(alpha, tau)?, n)?;
        let eq = bif::reduced_equilibria(&red)?;
        let lifted = |p: [f64; 2]| json!({"x1": p, "lift": red.lift_real(p)});
        let summary = json!({
            "alpha": alpha,
            "N": n,
            "tau": tau,
            "lambda": red.lambda(),
            "equilibria": {
                "origin": lifted(eq.origin),
                "saddle": lifted(eq.saddle),
                "opposite": lifted(eq.opposite),
            },
            "coefficients": red.coefficients(),
        });
        out.write_json("reduced.json", &summary)?;
        Ok(json!({}))
    }
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct DiagramArgs {
    /// Delayed-feedback strength [default: 0.75]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// GK dimension of the reduction [default: 6]
    #[arg(long = "N", visible_alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Delays lo:hi:step [default: 1.55:2.0:0.005]
    #[arg(long)]
    pub tau: Option<Range>,
    /// `all` or a comma list of stable_cycle, upo_inner_plus, upo_inner_minus, upo_outer [default: all]
    #[arg(long)]
    pub family: Option<String>,
    /// Cold-start every delay in parallel instead of warm-started sweeps [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub parallel: Option<bool>,
    /// Locate tau_c, the homoclinic and the fold values [default: true]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub summary: Option<bool>,
    /// Bracket lo:hi of the homoclinic value [default: 1.57:1.62]
    #[arg(long)]
    pub sharp_bracket: Option<Interval>,
    /// Bracket lo:hi of the fold of cycles [default: 1.5:1.58]
    #[arg(long)]
    pub star_bracket: Option<Interval>,
    /// RK4 step of the reduced system [default: 0.01]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Longest accepted orbit period [default: 500]
    #[arg(long)]
    pub period_cap: Option<f64>,
    /// Output directory [default: $DDEGK_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Command for DiagramArgs {
    const NAME: &'static str = "diagram";

    fn defaults() -> Self {
        let s = OrbitSettings::default();
        Self {
            alpha: Some(0.75),
            n: Some(6),
            tau: Some("1.55:2.0:0.005".parse().unwrap()),
            family: Some("all".into()),
            parallel: Some(false),
            summary: Some(true),
            sharp_bracket: Some(Interval { lo: 1.57, hi: 1.62 }),
            star_bracket: Some(Interval { lo: 1.5, hi: 1.58 }),
            dt: Some(s.dt),
            period_cap: Some(s.period_cap),
            out_dir: None,
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError> {
        let alpha = required(&self.alpha, "alpha")?;
        let n = required(&self.n, "N")?;
        let families = family_list(&required(&self.family, "family")?)?;
        let taus = required(&self.tau, "tau")?.values();
        let settings = orbit_settings(self.dt, self.period_cap);
        let factory = |tau: f64| ReducedSystem2D::build(&suarez_schopf_perturbed(alpha, tau)?, n);
        let parallel = self.parallel == Some(true);
        let mut points = Vec::new();
        let mut branches = Vec::new();
        for fam in families {
            let b = bif::continue_branch(factory, &taus, fam, &settings, parallel);
            branches.push(json!({
                "family": fam,
                "points": b.points.len(),
                "terminated": b.terminated.map(|(tau, why)| json!({"tau": tau, "reason": why})),
            }));
            points.extend(b.points);
        }
        out.write("diagram.csv", bif::diagram_csv(&points).as_bytes())?;
        let mut summary = json!({"branches": branches});
        if self.summary == Some(true) {
            let (tau_c, l1, kind) = bif::detect_hopf(alpha, n)?;
            let sb = required(&self.sharp_bracket, "sharp_bracket")?;
            let fb = required(&self.star_bracket, "star_bracket")?;
            summary["tau_c"] = json!(tau_c);
            summary["l1"] = json!(l1);
            summary["hopf_type"] = json!(kind);
            summary["tau_sharp"] = json!(bif::detect_homoclinic(factory, (sb.lo, sb.hi), &settings)?);
            summary["tau_star"] = json!(bif::detect_sno(factory, (fb.lo, fb.hi), &settings)?);
        }
        out.write_json("diagram_summary.json", &summary)?;
        Ok(json!({}))
    }
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct OrbitArgs {
    /// Delayed-feedback strength [default: 0.75]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// GK dimension of the reduction [default: 6]
    #[arg(long = "N", visible_alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Delay [default: 1.7]
    #[arg(long)]
    pub tau: Option<f64>,
    /// stable_cycle, upo_inner_plus, upo_inner_minus or upo_outer [default: stable_cycle]
    #[arg(long)]
    pub family: Option<String>,
    /// RK4 step of the reduced system [default: 0.01]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Longest accepted orbit period [default: 500]
    #[arg(long)]
    pub period_cap: Option<f64>,
    /// Output directory [default: $DDEGK_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn orbit_json(orbit: &Orbit, tau: f64) -> Value {
    json!({
        "period": orbit.period,
        "amplitude": orbit.amplitude,
        "max": orbit.max(),
        "min": orbit.min(),
        "stability": orbit.stability,
        "period_years": sto::to_physical_years_at(orbit.period, tau),
        "period_years_reference_delay": sto::to_physical_years(orbit.period),
    })
}

fn samples_csv(orbit: &Orbit) -> String {
    let t0 = orbit.start_time();
    csv("t,theta", orbit.samples.iter().map(|&(t, x)| vec![fmt(t - t0), fmt(x)]))
}

impl Command for OrbitArgs {
    const NAME: &'static str = "orbit";

    fn defaults() -> Self {
        let s = OrbitSettings::default();
        Self {
            alpha: Some(0.75),
            n: Some(6),
            tau: Some(1.7),
            family: Some(Family::StableCycle.name().into()),
            dt: Some(s.dt),
            period_cap: Some(s.period_cap),
            out_dir: None,
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError> {
        let (alpha, n, tau) = (required(&self.alpha, "alpha")?, required(&self.n, "N")?, required(&self.tau, "tau")?);
        let family = Family::parse(&required(&self.family, "family")?)?;
        let red = ReducedSystem2D::build(&suarez_schopf_perturbed(alpha, tau)?, n)?;
        let o = bif::compute_orbit(&red, family, &orbit_settings(self.dt, self.period_cap))?;
        out.write("orbit.csv", samples_csv(&o.orbit).as_bytes())?;
        let mut summary = orbit_json(&o.orbit, tau);
        summary["family"] = json!(family);
        summary["tau"] = json!(tau);
        summary["windings"] = json!(o.windings);
        out.write_json("orbit.json", &summary)?;
        Ok(json!({}))
    }
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct DdeArgs {
    /// Delayed-feedback strength [default: 0.75]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Delay [default: 1.7]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Integration horizon [default: 400]
    #[arg(long)]
    pub t_end: Option<f64>,
    /// RK4 steps per delay [default: 512]
    #[arg(long)]
    pub steps_per_delay: Option<Count>,
    /// Constant history value of the perturbed variable [default: 1.0]
    #[arg(long)]
    pub history: Option<f64>,
    /// Write every stride-th sample [default: 8]
    #[arg(long)]
    pub stride: Option<Count>,
    /// Extract the periodic orbit after the transient [default: true]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub orbit: Option<bool>,
    /// Transient skipped before orbit extraction [default: half of t_end]
    #[arg(long)]
    pub skip: Option<f64>,
    /// Output directory [default: $DDEGK_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Command for DdeArgs {
    const NAME: &'static str = "dde";

    fn defaults() -> Self {
        Self {
            alpha: Some(0.75),
            tau: Some(1.7),
            t_end: Some(400.0),
            steps_per_delay: Some(Count(512)),
            history: Some(1.0),
            stride: Some(Count(8)),
            orbit: Some(true),
            skip: None,
            out_dir: None,
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError> {
        let (alpha, tau) = (required(&self.alpha, "alpha")?, required(&self.tau, "tau")?);
        let t_end = required(&self.t_end, "t_end")?;
        let per_delay = required(&self.steps_per_delay, "steps_per_delay")?.0.max(1);
        let stride = required(&self.stride, "stride")?.0.max(1) as usize;
        let h0 = required(&self.history, "history")?;
        let sol = integrate_dde(&suarez_schopf_perturbed(alpha, tau)?, &|_| h0, t_end, tau / per_delay as f64)?;
        let series = sol.to_series(stride);
        let rows = series.t.iter().zip(&series.x).map(|(t, x)| vec![fmt(*t), fmt(*x)]);
        out.write("dde.csv", csv("t,theta", rows).as_bytes())?;
        if self.orbit == Some(true) {
            let skip = self.skip.unwrap_or(0.5 * t_end);
            let orbit = extract_periodic_orbit(&sol.to_series(1), skip)?;
            let mut summary = orbit_json(&orbit, tau);
            summary["tau"] = json!(tau);
            out.write_json("dde_orbit.json", &summary)?;
            out.write("dde_orbit.csv", samples_csv(&orbit).as_bytes())?;
        }
        Ok(json!({}))
    }
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct TspArgs {
    /// Delayed-feedback strength [default: 0.75]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Noise strength [default: 0.2]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Initial (lowest) delay [default: 1.45]
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Highest delay [default: 1.65]
    #[arg(long)]
    pub tau1: Option<f64>,
    /// Drift rate of the delay [default: 8.4e-4]
    #[arg(long)]
    pub eps: Option<f64>,
    /// linear or triangle [default: linear]
    #[arg(long)]
    pub schedule: Option<String>,
    /// Add the Stratonovich drift correction [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stratonovich: Option<bool>,
    /// Euler-Maruyama step [default: 2e-3]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of steps, `1e6` notation accepted [default: 118900, about t = 237.8]
    #[arg(long)]
    pub steps: Option<Count>,
    /// Seed of the first member [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ensemble size; member k uses seed + k [default: 1]
    #[arg(long)]
    pub ensemble: Option<Count>,
    /// Write every stride-th sample of the paths [default: 10]
    #[arg(long)]
    pub stride: Option<Count>,
    /// Welch segment length in years [default: 120]
    #[arg(long)]
    pub segment_years: Option<f64>,
    /// Period band lo:hi in years of the band-passed output [default: 15:30]
    #[arg(long)]
    pub band: Option<Interval>,
    /// Output directory [default: $DDEGK_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl TspArgs {
    fn model(&self) -> Result<StochasticModel, CliError> {
        let schedule = match required(&self.schedule, "schedule")?.as_str() {
            "linear" => Schedule::Linear,
            "triangle" => Schedule::Triangle,
            other => return Err(CliError::Config(format!("unknown schedule '{other}' (linear or triangle)"))),
        };
        let model = StochasticModel {
            alpha: required(&self.alpha, "alpha")?,
            sigma: required(&self.sigma, "sigma")?,
            tau0: required(&self.tau0, "tau0")?,
            tau1: required(&self.tau1, "tau1")?,
            epsilon: required(&self.eps, "eps")?,
            schedule,
            stratonovich: required(&self.stratonovich, "stratonovich")?,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Peak summary of the interannual and decadal bands.
fn band_summary(psd: &sto::Psd) -> Value {
    let mut v = json!({});
    for (key, band) in [("enso_4_8yr", (4.0, 8.0)), ("decadal_15_30yr", (15.0, 30.0))] {
        v[key] = match sto::band_peak(psd, band) {
            Ok(p) => json!({
                "period_yr": p.period,
                "power": p.power,
                "background": p.background,
                "contrast": p.contrast(),
                "local_max": p.local_max,
            }),
            Err(e) => json!({"error": e.to_string()}),
        };
    }
    v
}

impl Command for TspArgs {
    const NAME: &'static str = "tsp";

    fn defaults() -> Self {
        let m = StochasticModel::tipping_default();
        Self {
            alpha: Some(m.alpha),
            sigma: Some(m.sigma),
            tau0: Some(m.tau0),
            tau1: Some(m.tau1),
            eps: Some(m.epsilon),
            schedule: Some("linear".into()),
            stratonovich: Some(false),
            dt: Some(2e-3),
            steps: Some(Count(118_900)),
            seed: Some(0),
            ensemble: Some(Count(1)),
            stride: Some(Count(10)),
            segment_years: Some(sto::DEFAULT_SEGMENT_YEARS),
            band: Some(Interval { lo: 15.0, hi: 30.0 }),
            out_dir: None,
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError> {
        let model = self.model()?;
        let dt = required(&self.dt, "dt")?;
        let steps = required(&self.steps, "steps")?.0 as usize;
        let seed = required(&self.seed, "seed")?;
        let members = required(&self.ensemble, "ensemble")?.0.max(1);
        let stride = required(&self.stride, "stride")?.0.max(1) as usize;
        let segment = required(&self.segment_years, "segment_years")?;
        let band = required(&self.band, "band")?;
        let seeds: Vec<u64> = (0..members).map(|k| seed.wrapping_add(k)).collect();
        let runs = sto::simulate_ensemble(&model, dt, steps, &seeds)?;
        let mut spectra = Vec::new();
        let mut notes = Vec::new();
        for run in &runs {
            let rows = (0..run.len())
                .step_by(stride)
                .map(|k| vec![fmt(run.times[k]), fmt(run.theta[k]), fmt(run.tau_t[k])]);
            out.write(&format!("tsp_seed{}.csv", run.seed), csv("t,theta,tau", rows).as_bytes())?;
            match sto::band_filter(&run.theta, dt, (band.lo, band.hi)) {
                Ok(f) => {
                    let rows = (0..f.len()).step_by(stride).map(|k| vec![fmt(run.times[k]), fmt(f[k])]);
                    out.write(&format!("filtered_seed{}.csv", run.seed), csv("t,theta_band", rows).as_bytes())?;
                }
                Err(e) => notes.push(format!("seed {}: band filter skipped: {e}", run.seed)),
            }
            match sto::welch_psd(&run.theta, dt, segment) {
                Ok(p) => spectra.push(p),
                Err(e) => notes.push(format!("seed {}: spectrum skipped: {e}", run.seed)),
            }
        }
        for n in &notes {
            eprintln!("note: {n}");
        }
        let mut extra = json!({
            "seeds": seeds,
            "window_years": sto::to_physical_years(dt * steps as f64),
            "notes": notes,
        });
        if spectra.len() == runs.len() {
            let psd = sto::median_psd(&spectra)?;
            out.write("psd.csv", psd.to_csv().as_bytes())?;
            extra["bands"] = band_summary(&psd);
        }
        Ok(extra)
    }
}

#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct PsdArgs {
    /// CSV file with a header row [required]
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Column to analyse [default: theta]
    #[arg(long)]
    pub column: Option<String>,
    /// Sample spacing in model time [default: inferred from a `t` column]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Welch segment length in years [default: 120]
    #[arg(long)]
    pub segment_years: Option<f64>,
    /// Output directory [default: $DDEGK_OUT_DIR or .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Columns of a headed CSV file, by name.
fn read_columns(path: &Path) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{} is empty", path.display())))?;
    let mut cols: Vec<(String, Vec<f64>)> = header.split(',').map(|h| (h.trim().to_string(), Vec::new())).collect();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(CliError::Config(format!("{} row {}: expected {} fields", path.display(), i + 2, cols.len())));
        }
        for (c, cell) in cols.iter_mut().zip(cells) {
            let v = cell
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{} row {}: '{cell}' is not a number", path.display(), i + 2)))?;
            c.1.push(v);
        }
    }
    Ok(cols)
}

impl Command for PsdArgs {
    const NAME: &'static str = "psd";

    fn defaults() -> Self {
        Self {
            input: None,
            column: Some("theta".into()),
            dt: None,
            segment_years: Some(sto::DEFAULT_SEGMENT_YEARS),
            out_dir: None,
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    fn run(&self, out: &mut Outputs) -> Result<Value, CliError> {
        let input = required(&self.input, "input")?;
        let column = required(&self.column, "column")?;
        let cols = read_columns(&input)?;
        let find = |name: &str| cols.iter().find(|c| c.0 == name).map(|c| &c.1);
        let series = find(&column)
            .ok_or_else(|| CliError::Config(format!("{} has no column '{column}'", input.display())))?;
        let dt = match (self.dt, find("t")) {
            (Some(dt), _) => dt,
            (None, Some(t)) if t.len() >= 2 => t[1] - t[0],
            _ => return Err(CliError::Config("no dt given and no t column to infer it from".into())),
        };
        let psd = sto::welch_psd(series, dt, required(&self.segment_years, "segment_years")?)?;
        out.write("psd.csv", psd.to_csv().as_bytes())?;
        let summary = json!({"dt": dt, "samples": series.len(), "bands": band_summary(&psd)});
        out.write_json("psd_summary.json", &summary)?;
        Ok(json!({}))
    }
}
