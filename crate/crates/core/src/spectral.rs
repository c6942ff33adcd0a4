//! Eigenstructure of the GK matrix: ordered eigenvalues, biorthonormal
//! right/adjoint modes, critical delays and exchange-of-stability checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::gk::{suarez_schopf_perturbed, suarez_schopf_t_plus, DdeSpec, GkSystem};

/// Largest admissible condition number of the eigenvector matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Eigenvalues and biorthonormal modes, sorted by decreasing real part and
/// then decreasing imaginary part.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub tau: f64,
    eigenvalues: Vec<Complex64>,
    right: DMatrix<Complex64>,
    adjoint: DMatrix<Complex64>,
    m_c: usize,
    condition: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Eigenvalue with 0-based index `j` (`lambda(0)` is `lambda_1` in 1-based notation).
    pub fn lambda(&self, j: usize) -> Complex64 {
        self.eigenvalues[j]
    }

    /// Right eigenvectors as columns.
    pub fn right_modes(&self) -> &DMatrix<Complex64> {
        &self.right
    }

    /// Adjoint eigenvectors as columns, with `Q^H P = I`.
    pub fn adjoint_modes(&self) -> &DMatrix<Complex64> {
        &self.adjoint
    }

    pub fn right(&self, j: usize) -> DVector<Complex64> {
        self.right.column(j).into_owned()
    }

    pub fn adjoint(&self, j: usize) -> DVector<Complex64> {
        self.adjoint.column(j).into_owned()
    }

    pub fn critical_count(&self) -> usize {
        self.m_c
    }

    pub fn with_critical_count(mut self, m_c: usize) -> Result<Self> {
        if m_c == 0 || m_c > self.dim() {
            return invalid(format!("critical count {m_c} out of range"));
        }
        self.m_c = m_c;
        Ok(self)
    }

    /// Condition number of the right eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Mode coordinates `z_j = <y, e_j*>` of a real state.
    pub fn coordinates(&self, y: &[f64]) -> Vec<Complex64> {
        (0..self.dim())
            .map(|j| {
                self.adjoint
                    .column(j)
                    .iter()
                    .zip(y)
                    .map(|(q, v)| q.conj() * v)
                    .sum()
            })
            .collect()
    }

    /// Index of the conjugate partner of mode `j`, if `lambda_j` is not real.
    pub fn conjugate_partner(&self, j: usize) -> Option<usize> {
        let l = self.eigenvalues[j];
        if l.im == 0.0 {
            return None;
        }
        (0..self.dim()).find(|&k| k != j && self.eigenvalues[k] == l.conj())
    }

    /// Rescales `e_j -> c e_j` (and its conjugate partner by `conj(c)`),
    /// re-normalizing the adjoints so biorthonormality is kept.
    pub fn with_mode_scaled(&self, j: usize, c: Complex64) -> Self {
        let mut out = self.clone();
        let mut scale = |k: usize, c: Complex64| {
            for i in 0..out.dim() {
                out.right[(i, k)] *= c;
                out.adjoint[(i, k)] /= c.conj();
            }
        };
        scale(j, c);
        if let Some(k) = self.conjugate_partner(j) {
            scale(k, c.conj());
        }
        out
    }

    /// `max |Q^H P - I|`.
    pub fn biorthonormality_error(&self) -> f64 {
        let prod = self.adjoint.adjoint() * &self.right;
        let n = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((prod[(i, j)] - target).norm());
            }
        }
        err
    }
}

/// Lexicographic order used throughout: decreasing real part, then
/// decreasing imaginary part.
pub fn lexicographic(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

/// Eigenvalues of a real matrix with exact conjugate pairing, in
/// lexicographic order.
pub fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
    pair_conjugates(&mut ev);
    ev.sort_by(lexicographic);
    ev
}

// Snaps each eigenvalue with negative imaginary part onto the conjugate of its
// closest upper-half-plane partner; near-real values become real.
fn pair_conjugates(ev: &mut [Complex64]) {
    let scale = ev.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    for z in ev.iter_mut() {
        if z.im.abs() <= tol {
            z.im = 0.0;
        }
    }
    let upper: Vec<usize> = (0..ev.len()).filter(|&k| ev[k].im > 0.0).collect();
    let mut used = vec![false; ev.len()];
    for k in 0..ev.len() {
        if ev[k].im < 0.0 {
            let best = upper
                .iter()
                .copied()
                .filter(|&u| !used[u])
                .min_by(|&u, &v| {
                    (ev[u].conj() - ev[k])
                        .norm()
                        .total_cmp(&(ev[v].conj() - ev[k]).norm())
                });
            if let Some(u) = best {
                used[u] = true;
                ev[k] = ev[u].conj();
            }
        }
    }
}

/// Full eigendecomposition of the GK matrix.
pub fn eigendecompose(system: &GkSystem) -> Result<SpectralData> {
    eigendecompose_matrix(system.matrix(), system.tau())
}

/// The `count` eigenvalues of smallest `|Im|` taken from the closed upper
/// half plane, one per conjugate pair, in order of increasing frequency.
/// At large N the GK spectrum also holds high-frequency pairs that do not
/// approximate characteristic roots; these come last in this ordering.
pub fn low_frequency_pairs(eigenvalues: &[Complex64], count: usize) -> Vec<Complex64> {
    let mut upper: Vec<Complex64> = eigenvalues.iter().copied().filter(|z| z.im >= 0.0).collect();
    upper.sort_by(|a, b| a.im.total_cmp(&b.im).then(b.re.total_cmp(&a.re)));
    upper.truncate(count);
    upper
}

/// Eigendecomposition of an arbitrary real matrix: eigenvalues from the real
/// Schur form, right modes by shifted inverse iteration, adjoints from the
/// inverse of the mode matrix.
pub fn eigendecompose_matrix(a: &DMatrix<f64>, tau: f64) -> Result<SpectralData> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return invalid("matrix must be square and non-empty");
    }
    if !a.iter().all(|v| v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let ev = sorted_eigenvalues(a);
    let ac: DMatrix<Complex64> = a.map(|v| Complex64::new(v, 0.0));
    let scale = a.amax().max(1.0);

    let mut right = DMatrix::<Complex64>::zeros(n, n);
    let mut done = vec![false; n];
    for j in 0..n {
        if done[j] {
            continue;
        }
        let lambda = ev[j];
        let v = normalize_mode(inverse_iteration(&ac, lambda, scale, j)?);
        let v = if lambda.im == 0.0 {
            normalize_mode(v.map(|z| Complex64::new(z.re, 0.0)))
        } else {
            v
        };
        right.set_column(j, &v);
        done[j] = true;
        if lambda.im != 0.0 {
            if let Some(k) = (j + 1..n).find(|&k| !done[k] && ev[k] == lambda.conj()) {
                right.set_column(k, &v.map(|z| z.conj()));
                done[k] = true;
            }
        }
    }

    let svd = right.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::NearDefective { condition });
    }
    let inv = right
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::NearDefective { condition: f64::INFINITY })?;
    let adjoint = inv.adjoint();
    let data = SpectralData {
        tau,
        eigenvalues: ev,
        right,
        adjoint,
        m_c: n.min(2),
        condition,
    };
    debug_assert!(data
        .eigenvalues
        .windows(2)
        .all(|w| lexicographic(&w[0], &w[1]) != std::cmp::Ordering::Greater));
    Ok(data)
}

fn inverse_iteration(
    a: &DMatrix<Complex64>,
    lambda: Complex64,
    scale: f64,
    seed: usize,
) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let mut shift = lambda + Complex64::new(1e-11 * scale, 1e-11 * scale);
    let mut lu = None;
    for _ in 0..4 {
        let m = a - DMatrix::<Complex64>::identity(n, n) * shift;
        let candidate = m.lu();
        if candidate.is_invertible() {
            lu = Some(candidate);
            break;
        }
        shift += Complex64::new(1e-9 * scale, 0.0);
    }
    let lu = lu.ok_or(Error::NearDefective { condition: f64::INFINITY })?;
    // deterministic start vector without special structure
    let mut v = DVector::from_fn(n, |i, _| {
        let x = ((i + 1) as f64 * 0.754_877_666 + seed as f64 * 0.569_840_290).fract();
        Complex64::new(0.5 + x, 0.25 - 0.5 * x)
    });
    for _ in 0..3 {
        let w = lu
            .solve(&v)
            .ok_or(Error::NearDefective { condition: f64::INFINITY })?;
        let norm = w.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NearDefective { condition: f64::INFINITY });
        }
        v = w / Complex64::new(norm, 0.0);
    }
    Ok(v)
}

/// Unit Euclidean norm with the largest-modulus component real and positive.
pub fn normalize_mode(v: DVector<Complex64>) -> DVector<Complex64> {
    let norm = v.norm();
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    v.map(|z| z * phase / norm)
}

/// `|lambda - (1 - 3 T+^2) + alpha exp(-lambda tau)|` for the linearized
/// Suarez-Schopf model.
pub fn characteristic_residual(lambda: Complex64, tau: f64, alpha: f64) -> f64 {
    let tp2 = 1.0 - alpha;
    (lambda - (1.0 - 3.0 * tp2) + alpha * (-lambda * tau).exp()).norm()
}

/// Closed-form Hopf delay `arccos((3 alpha - 2)/alpha) / sqrt(alpha^2 - (3 alpha - 2)^2)`.
pub fn tau_c_analytic(alpha: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0.5, 1), got {alpha}"));
    }
    let a = 3.0 * alpha - 2.0;
    Ok((a / alpha).acos() / (alpha * alpha - a * a).sqrt())
}

/// Real part of the leading eigenvalue of `A(tau)`.
pub fn leading_real_part(spec: &DdeSpec, n: usize) -> Result<f64> {
    let system = GkSystem::assemble(spec, n)?;
    Ok(sorted_eigenvalues(system.matrix())[0].re)
}

/// Bisection tolerance on the critical delay.
pub const TAU_C_TOL: f64 = 1e-9;

/// Critical delay of the N-dimensional GK system for a family of specs.
pub fn find_tau_c_with<F>(family: F, n: usize, bracket: (f64, f64)) -> Result<f64>
where
    F: Fn(f64) -> Result<DdeSpec>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return invalid("bracket must satisfy lo < hi");
    }
    let mut f_lo = leading_real_part(&family(lo)?, n)?;
    let f_hi = leading_real_part(&family(hi)?, n)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > TAU_C_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = leading_real_part(&family(mid)?, n)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical delay of the Suarez-Schopf GK system.
pub fn find_tau_c(alpha: f64, n: usize, bracket: (f64, f64)) -> Result<f64> {
    find_tau_c_with(|tau| suarez_schopf_perturbed(alpha, tau), n, bracket)
}

/// Outcome of a successful exchange-of-stability check.
#[derive(Debug, Clone, PartialEq)]
pub struct PesReport {
    pub m_c: usize,
    /// Grid interval `(tau_k, tau_{k+1})` where the critical modes cross.
    pub crossing: (f64, f64),
    /// Smallest spectral gap `Re lambda_{m_c} - Re lambda_{m_c + 1}` on the grid.
    pub min_gap: f64,
}

/// Checks on an increasing grid that the first `m_c` eigenvalues move from
/// the left to the right half plane exactly once while all others stay
/// stable.
pub fn pes_verify_with<F>(matrix: F, tau_grid: &[f64], m_c: usize) -> Result<PesReport>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync,
{
    if tau_grid.len() < 2 || tau_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("tau grid must be increasing with at least two points");
    }
    let spectra: Vec<Vec<Complex64>> = tau_grid
        .par_iter()
        .map(|&tau| matrix(tau).map(|a| sorted_eigenvalues(&a)))
        .collect::<Result<_>>()?;
    if spectra[0].len() <= m_c {
        return invalid("critical count must be below the dimension");
    }
    let mut crossing = None;
    let mut min_gap = f64::INFINITY;
    for (k, (&tau, ev)) in tau_grid.iter().zip(&spectra).enumerate() {
        for (j, l) in ev.iter().enumerate().skip(m_c) {
            if l.re >= 0.0 {
                return Err(Error::PesViolation { mode: j, tau });
            }
        }
        let leading = ev[0].re;
        let last_critical = ev[m_c - 1].re;
        min_gap = min_gap.min(last_critical - ev[m_c].re);
        let unstable = leading > 0.0;
        if k == 0 && unstable {
            return Err(Error::PesViolation { mode: 0, tau });
        }
        if k > 0 {
            let was_unstable = spectra[k - 1][0].re > 0.0;
            match (was_unstable, unstable) {
                (false, true) if crossing.is_none() => crossing = Some((tau_grid[k - 1], tau)),
                (false, true) | (true, false) => {
                    return Err(Error::PesViolation { mode: 0, tau })
                }
                _ => {}
            }
        }
    }
    let crossing = crossing.ok_or(Error::PesViolation {
        mode: 0,
        tau: tau_grid[tau_grid.len() - 1],
    })?;
    if !(min_gap > 0.0) {
        return Err(Error::PesViolation {
            mode: m_c,
            tau: crossing.0,
        });
    }
    Ok(PesReport {
        m_c,
        crossing,
        min_gap,
    })
}

/// Exchange-of-stability check for the Suarez-Schopf GK system (`m_c = 2`).
pub fn pes_verify(alpha: f64, n: usize, tau_grid: &[f64]) -> Result<PesReport> {
    suarez_schopf_t_plus(alpha)?;
    pes_verify_with(
        |tau| Ok(GkSystem::assemble(&suarez_schopf_perturbed(alpha, tau)?, n)?.matrix().clone()),
        tau_grid,
        2,
    )
}

/// Leading `modes` eigenvalue branches over a delay grid. Each branch is
/// continued by nearest-neighbour matching so that `out[k][j]` follows one
/// eigenvalue path; the first grid point fixes the lexicographic labels.
pub fn eigen_sweep(alpha: f64, n: usize, taus: &[f64], modes: usize) -> Result<Vec<Vec<Complex64>>> {
    let spectra: Vec<Vec<Complex64>> = taus
        .par_iter()
        .map(|&tau| {
            let sys = GkSystem::assemble(&suarez_schopf_perturbed(alpha, tau)?, n)?;
            Ok(sorted_eigenvalues(sys.matrix()))
        })
        .collect::<Result<_>>()?;
    let modes = modes.min(n);
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(taus.len());
    for ev in spectra {
        let row = match out.last() {
            None => ev[..modes].to_vec(),
            Some(prev) => track(prev, &ev),
        };
        out.push(row);
    }
    Ok(out)
}

// Greedy assignment of the closest pairs first.
fn track(prev: &[Complex64], next: &[Complex64]) -> Vec<Complex64> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * next.len());
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            pairs.push(((p - q).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![None; prev.len()];
    let mut taken = vec![false; next.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !taken[j] {
            out[i] = Some(next[j]);
            taken[j] = true;
        }
    }
    out.into_iter().map(|z| z.unwrap_or(Complex64::new(f64::NAN, f64::NAN))).collect()
}
