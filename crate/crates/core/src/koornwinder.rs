//! Koornwinder polynomials on `[-1, 1]` and their rescaled versions on the
//! delay interval `[-tau, 0]`.
//!
//! `K_n(s) = -(1 + s) L_n'(s) + (n^2 + n + 1) L_n(s)` where `L_n` is the
//! Legendre polynomial of degree `n`. The family is orthogonal for the measure
//! `ds/2 + delta_1`, i.e. Lebesgue measure with a point mass at `s = 1`, and
//! every member satisfies `K_n(1) = 1`.
//!
//! Degrees are 0-based everywhere in this crate: slot `j` of a GK state vector
//! carries the coefficient of `K_j`.

use crate::error::{invalid, Result};

/// Legendre polynomial `L_n(s)` by the three-term recurrence.
pub fn legendre(n: usize, s: f64) -> f64 {
    legendre_with_derivative(n, s).0
}

/// `(L_n(s), L_n'(s))`.
///
/// The derivative uses `L'_{k+1} = L'_{k-1} + (2k + 1) L_k`, which stays exact
/// at the endpoints where the `(1 - s^2)` form degenerates.
pub fn legendre_with_derivative(n: usize, s: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut d_prev = 0.0;
    if n == 0 {
        return (p_prev, d_prev);
    }
    let mut p = s;
    let mut d = 1.0;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * s * p - kf * p_prev) / (kf + 1.0);
        let d_next = d_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

fn koornwinder_unchecked(n: usize, s: f64) -> f64 {
    let (l, dl) = legendre_with_derivative(n, s);
    let nf = n as f64;
    -(1.0 + s) * dl + (nf * nf + nf + 1.0) * l
}

/// Koornwinder polynomial `K_n(s)` for `s` in `[-1, 1]`.
pub fn koornwinder(n: usize, s: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&s) {
        return invalid(format!("Koornwinder argument {s} outside [-1, 1]"));
    }
    Ok(koornwinder_unchecked(n, s))
}

/// `K_n(-1) = (n^2 + n + 1)(-1)^n`.
pub fn koornwinder_at_left(n: usize) -> f64 {
    let nf = n as f64;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    (nf * nf + nf + 1.0) * sign
}

/// Squared norm `||K_n||^2 = (n^2 + 1)((n + 1)^2 + 1) / (2n + 1)` in the
/// endpoint-augmented inner product.
pub fn koornwinder_norm_sq(n: usize) -> f64 {
    let nf = n as f64;
    (nf * nf + 1.0) * ((nf + 1.0) * (nf + 1.0) + 1.0) / (2.0 * nf + 1.0)
}

/// Coefficients `a_{n,k}`, `k < n`, of `K_n' = sum_k a_{n,k} K_k`.
///
/// Solves the upper triangular system `T a = b` with `T_ii = i^2 + 1`,
/// `T_ij = -(2i + 1)` above the diagonal, by back substitution.
pub fn derivative_coeffs(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("derivative coefficients need degree n >= 1");
    }
    let nf = n as f64;
    let rhs: Vec<f64> = (0..n)
        .map(|i| {
            let fi = i as f64;
            if (n + i).is_multiple_of(2) {
                -0.5 * (2.0 * fi + 1.0) * (nf + fi + 1.0) * (nf - fi)
            } else {
                (nf * nf + nf) * (2.0 * fi + 1.0)
                    - 0.5 * fi * (nf + fi) * (nf - fi + 1.0)
                    - 0.5 * (fi + 1.0) * (nf - fi - 1.0) * (nf + fi + 2.0)
            }
        })
        .collect();
    let mut a = vec![0.0; n];
    let mut tail = 0.0;
    for i in (0..n).rev() {
        let fi = i as f64;
        a[i] = (rhs[i] + (2.0 * fi + 1.0) * tail) / (fi * fi + 1.0);
        tail += a[i];
    }
    Ok(a)
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `L_n` from Chebyshev-like initial guesses.
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return invalid("quadrature order must be >= 2");
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Default rule used for the delay-interval inner products: `max(64, 2N)` nodes.
    pub fn for_dimension(n: usize) -> Self {
        Self::new(64.max(2 * n)).expect("order >= 64")
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Element of `L^2([-tau, 0)) x R`: a history function and its endpoint value.
#[derive(Clone, Copy)]
pub struct Segment<'a> {
    pub history: &'a dyn Fn(f64) -> f64,
    pub endpoint: f64,
}

impl<'a> Segment<'a> {
    pub fn new(history: &'a dyn Fn(f64) -> f64, endpoint: f64) -> Self {
        Self { history, endpoint }
    }
}

/// `<f, g>_H = (1/tau) int_{-tau}^0 f g dtheta + f(0) g(0)`.
pub fn inner_product_h(f: Segment<'_>, g: Segment<'_>, tau: f64, quad: &GaussLegendre) -> f64 {
    // theta = tau (s - 1) / 2 maps [-1, 1] onto [-tau, 0]; dtheta / tau = ds / 2.
    let integral = quad.integrate(|s| {
        let theta = 0.5 * tau * (s - 1.0);
        (f.history)(theta) * (g.history)(theta)
    });
    0.5 * integral + f.endpoint * g.endpoint
}

/// Koornwinder basis of dimension `N` rescaled to the delay interval.
#[derive(Debug, Clone)]
pub struct KoornwinderBasis {
    dim: usize,
    delay: f64,
    deriv_coeffs: Vec<Vec<f64>>,
}

impl KoornwinderBasis {
    pub fn new(dim: usize, delay: f64) -> Result<Self> {
        if dim == 0 {
            return invalid("basis dimension N must be >= 1");
        }
        if !(delay > 0.0) || !delay.is_finite() {
            return invalid(format!("delay must be positive, got {delay}"));
        }
        let mut deriv_coeffs = vec![Vec::new()];
        for n in 1..dim {
            deriv_coeffs.push(derivative_coeffs(n)?);
        }
        Ok(Self {
            dim,
            delay,
            deriv_coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// `a_{n,k}` for `k < n`; empty for `n = 0`.
    pub fn deriv_coeffs(&self, n: usize) -> &[f64] {
        &self.deriv_coeffs[n]
    }

    /// `[K_0(s), ..., K_{N-1}(s)]` with one pass of the Legendre recurrences.
    pub fn eval_all(&self, s: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        let (mut p_prev, mut d_prev) = (1.0, 0.0);
        let (mut p, mut d) = (s, 1.0);
        for n in 0..self.dim {
            let (l, dl) = if n == 0 { (p_prev, d_prev) } else { (p, d) };
            let nf = n as f64;
            out.push(-(1.0 + s) * dl + (nf * nf + nf + 1.0) * l);
            if n >= 1 {
                let p_next = ((2.0 * nf + 1.0) * s * p - nf * p_prev) / (nf + 1.0);
                let d_next = d_prev + (2.0 * nf + 1.0) * p;
                p_prev = p;
                p = p_next;
                d_prev = d;
                d = d_next;
            }
        }
        out
    }

    /// Rescaled polynomial `K_n^tau(theta) = K_n(1 + 2 theta / tau)`.
    pub fn eval_rescaled(&self, n: usize, theta: f64) -> f64 {
        koornwinder_unchecked(n, 1.0 + 2.0 * theta / self.delay)
    }

    /// Derivative of `K_n^tau` via the expansion `(2/tau) sum_k a_{n,k} K_k^tau`.
    pub fn deriv_rescaled(&self, n: usize, theta: f64) -> f64 {
        let s = 1.0 + 2.0 * theta / self.delay;
        let vals = self.eval_all(s);
        2.0 / self.delay
            * self.deriv_coeffs[n]
                .iter()
                .zip(&vals)
                .map(|(a, k)| a * k)
                .sum::<f64>()
    }

    /// Function part of the state `sum_j y_j K_j^tau(theta)`.
    pub fn synthesize(&self, coeffs: &[f64], theta: f64) -> f64 {
        let s = 1.0 + 2.0 * theta / self.delay;
        self.eval_all(s).iter().zip(coeffs).map(|(k, y)| k * y).sum()
    }

    /// Coefficients `y_n = <h, K_n^tau>_H / ||K_n||^2` of a history segment.
    pub fn project(&self, segment: Segment<'_>, quad: &GaussLegendre) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for (&s, &w) in quad.nodes.iter().zip(&quad.weights) {
            let theta = 0.5 * self.delay * (s - 1.0);
            let h = (segment.history)(theta);
            for (a, k) in acc.iter_mut().zip(self.eval_all(s)) {
                *a += 0.5 * w * h * k;
            }
        }
        acc.iter()
            .enumerate()
            .map(|(n, a)| (a + segment.endpoint) / koornwinder_norm_sq(n))
            .collect()
    }
}

/// Projection of a history segment onto the first `n` rescaled Koornwinder
/// polynomials, with the default quadrature rule.
pub fn project_history(segment: Segment<'_>, n: usize, tau: f64) -> Result<Vec<f64>> {
    let basis = KoornwinderBasis::new(n, tau)?;
    Ok(basis.project(segment, &GaussLegendre::for_dimension(n)))
}
