//! Adaptive integration of a scalar ODE `y' = f(x, y)` on an interval that
//! contains no coefficient breakpoint.
//!
//! Steps use the Dormand–Prince 5(4) pair. Where the problem is stiff in
//! the direction of integration (`h·∂f/∂y` beyond the explicit stability
//! boundary) the step is taken with the linearly implicit Rosenbrock
//! 2(3) scheme of Shampine and Reichelt instead.

use thiserror::Error;

/// Scalar right-hand side with its `y`-derivative.
pub trait ScalarOde {
    fn rhs(&self, x: f64, y: f64) -> f64;
    fn dfdy(&self, x: f64, y: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Initial step as a fraction of the interval length.
    pub initial_fraction: f64,
    pub max_steps: usize,
    /// `(a, θ)`: keep every step below θ·|x − a|, for solutions with a
    /// power-law singularity at `a`.
    pub anchor: Option<(f64, f64)>,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            initial_fraction: 1e-3,
            max_steps: 2_000_000,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at x = {x} (y = {y})")]
    StepUnderflow { x: f64, y: f64 },
    #[error("step budget exhausted at x = {x}")]
    Budget { x: f64 },
}

/// What to do after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Accepted points including the start.
    pub points: Vec<Point>,
    /// True when the callback stopped the integration early.
    pub stopped: bool,
    pub stiff_steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn last(&self) -> Point {
        *self.points.last().expect("trajectory has a start point")
    }
}

// Dormand–Prince 5(4) coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Explicit stability boundary of DP5 on the negative real axis, with margin.
const STIFF_THRESHOLD: f64 = 3.0;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// One DP5 step: new value and error estimate, or `None` if a stage left
/// the domain of `f`.
fn dp5_step<O: ScalarOde>(ode: &O, x: f64, y: f64, k1: f64, h: f64) -> Option<(f64, f64, f64)> {
    let k2 = finite(ode.rhs(x + C2 * h, y + h * A21 * k1))?;
    let k3 = finite(ode.rhs(x + C3 * h, y + h * (A31 * k1 + A32 * k2)))?;
    let k4 = finite(ode.rhs(x + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3)))?;
    let k5 = finite(ode.rhs(
        x + C5 * h,
        y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
    ))?;
    let k6 = finite(ode.rhs(
        x + h,
        y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
    ))?;
    let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    let k7 = finite(ode.rhs(x + h, y_new))?;
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    Some((y_new, err, k7))
}

/// One Rosenbrock 2(3) step (scalar ode23s).
fn ros23_step<O: ScalarOde>(ode: &O, x: f64, y: f64, f0: f64, h: f64) -> Option<(f64, f64, f64)> {
    let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;
    let j = finite(ode.dfdy(x, y))?;
    let dx = f64::EPSILON.sqrt() * x.abs().max(h.abs());
    let ft = (finite(ode.rhs(x + dx, y))? - f0) / dx;
    let w = 1.0 - h * d * j;
    if w == 0.0 {
        return None;
    }
    let k1 = (f0 + h * d * ft) / w;
    let f1 = finite(ode.rhs(x + 0.5 * h, y + 0.5 * h * k1))?;
    let k2 = (f1 - k1) / w + k1;
    let y_new = y + h * k2;
    let f2 = finite(ode.rhs(x + h, y_new))?;
    let k3 = (f2 - e32 * (k2 - f1) - 2.0 * (k1 - f0) + h * d * ft) / w;
    let err = h / 6.0 * (k1 - 2.0 * k2 + k3);
    Some((y_new, err, f2))
}

/// Integrates from `(x0, y0)` to `x1` (either direction). `on_step` sees
/// every accepted point and may stop the integration.
pub fn integrate<O: ScalarOde>(
    ode: &O,
    x0: f64,
    y0: f64,
    x1: f64,
    opts: &StepperOptions,
    mut on_step: impl FnMut(f64, f64) -> Control,
) -> Result<Trajectory, OdeError> {
    let mut traj = Trajectory {
        points: vec![Point { x: x0, y: y0 }],
        stopped: false,
        stiff_steps: 0,
        rejected: 0,
    };
    if x0 == x1 {
        return Ok(traj);
    }
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    let (mut x, mut y) = (x0, y0);
    let mut f = ode.rhs(x, y);
    if !f.is_finite() {
        return Err(OdeError::StepUnderflow { x, y });
    }
    let mut h = dir * span * opts.initial_fraction;
    let h_min = |x: f64| 16.0 * f64::EPSILON * x.abs().max(span);

    for _ in 0..opts.max_steps {
        let remaining = x1 - x;
        if remaining * dir <= 0.0 {
            return Ok(traj);
        }
        if let Some((a, theta)) = opts.anchor {
            let cap = theta * (x - a).abs();
            if cap > 0.0 && h.abs() > cap {
                h = dir * cap;
            }
        }
        let last = h.abs() >= remaining.abs();
        if last {
            h = remaining;
        }
        let j = ode.dfdy(x, y);
        let stiff = j.is_finite() && h * j < -STIFF_THRESHOLD;
        let attempt = if stiff {
            ros23_step(ode, x, y, f, h)
        } else {
            dp5_step(ode, x, y, f, h)
        };
        let order = if stiff { 3.0 } else { 5.0 };
        let accepted = match attempt {
            Some((y_new, err, f_new)) => {
                let scale = opts.abs_tol + opts.rel_tol * y.abs().max(y_new.abs());
                let ratio = (err / scale).abs();
                let factor = if ratio == 0.0 {
                    5.0
                } else {
                    (0.9 * ratio.powf(-1.0 / order)).clamp(0.2, 5.0)
                };
                if ratio <= 1.0 {
                    x = if last { x1 } else { x + h };
                    y = y_new;
                    f = f_new;
                    traj.points.push(Point { x, y });
                    if stiff {
                        traj.stiff_steps += 1;
                    }
                    h *= factor;
                    true
                } else {
                    h *= factor.min(0.9);
                    false
                }
            }
            None => {
                h *= 0.25;
                false
            }
        };
        if accepted {
            if on_step(x, y) == Control::Stop {
                traj.stopped = true;
                return Ok(traj);
            }
        } else {
            traj.rejected += 1;
            if h.abs() < h_min(x) {
                return Err(OdeError::StepUnderflow { x, y });
            }
        }
    }
    Err(OdeError::Budget { x })
}
