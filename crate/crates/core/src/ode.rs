//! Fixed-step classical Runge-Kutta for autonomous systems.

/// Scratch buffers for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

/// One RK4 step of `dy/dt = f(y)` in place. A negative `dt` integrates
/// backward in time.
pub fn rk4_step<F>(f: &F, y: &mut [f64], dt: f64, ws: &mut Rk4Workspace)
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let n = y.len();
    f(y, &mut ws.k1);
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * dt * ws.k1[i];
    }
    f(&ws.tmp, &mut ws.k2);
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * dt * ws.k2[i];
    }
    f(&ws.tmp, &mut ws.k3);
    for i in 0..n {
        ws.tmp[i] = y[i] + dt * ws.k3[i];
    }
    f(&ws.tmp, &mut ws.k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
}
