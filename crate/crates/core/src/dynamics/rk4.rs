use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Vector-space operations needed by the RK4 stepper.
pub trait OdeState: Clone {
    /// `self += a * x`.
    fn axpy(&mut self, a: f64, x: &Self);
    fn is_finite(&self) -> bool;
}

impl OdeState for f64 {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl OdeState for C64 {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl OdeState for DVector<C64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, xi) in self.iter_mut().zip(x.iter()) {
            *s += xi * a;
        }
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl OdeState for DMatrix<C64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, xi) in self.iter_mut().zip(x.iter()) {
            *s += xi * a;
        }
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<S: OdeState> OdeState for Vec<S> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, xi) in self.iter_mut().zip(x) {
            s.axpy(a, xi);
        }
    }
    fn is_finite(&self) -> bool {
        self.iter().all(OdeState::is_finite)
    }
}

/// One classical RK4 step of `y' = f(t, y)`, sampling `f` at `t`, `t + dt/2`, `t + dt`.
/// `step` is only used to label a non-finite result.
pub fn rk4_step<S, F>(y: &S, t: f64, dt: f64, step: usize, f: &mut F) -> Result<S>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
{
    let half = 0.5 * dt;
    let k1 = f(t, y);
    let mut y2 = y.clone();
    y2.axpy(half, &k1);
    let k2 = f(t + half, &y2);
    let mut y3 = y.clone();
    y3.axpy(half, &k2);
    let k3 = f(t + half, &y3);
    let mut y4 = y.clone();
    y4.axpy(dt, &k3);
    let k4 = f(t + dt, &y4);

    let mut out = y.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    if !out.is_finite() {
        return Err(Error::Numerical {
            step,
            reason: "non-finite state after RK4 update".into(),
        });
    }
    Ok(out)
}

/// Number of equal steps covering `span` with steps as close as possible to `dt`.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    if !(span >= 0.0 && span.is_finite()) {
        return Err(Error::config(format!("integration span must be non-negative, got {span}")));
    }
    if span == 0.0 {
        return Ok(0);
    }
    Ok(((span / dt).round() as usize).max(1))
}
