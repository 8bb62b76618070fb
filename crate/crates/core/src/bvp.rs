//! The first-order problem
//!
//! ```text
//! ẏ = c g(ξ) − f(ξ) − κ(ξ) / y^{1/(p−1)},   y(0⁺) = y(1⁻) = 0,   y > 0,
//! ```
//!
//! its a-priori bounds and a shooting solver that decides admissibility of
//! a speed `c`.
//!
//! The solver integrates backward from `ξ = 1`, where `y = 0` is singular.
//! Near that end it works with `u = y^{p′}`, which satisfies the regular
//! equation `u̇ = p′[(cg − f) u^{1/p} − κ]`. Going backward, `y` can never
//! reach zero in the interior (the singular term pushes it up), so a speed
//! is rejected when `y` levels off at a positive value as `ξ → 0⁺`; the
//! crossing abscissa reported for it comes from a forward shot out of the
//! origin along the admissible slope.

use serde::Serialize;
use thiserror::Error;

use crate::coefficients::limits::{self, LadderLimit, LadderOptions};
use crate::coefficients::model::merge_points;
use crate::coefficients::stats::{self, AverageStats, Mode, ScanOptions, StatsError};
use crate::coefficients::{Model, PiecewiseFn, ReducedProblem};
use crate::expr::Expr;
use crate::ode::{self, Control, OdeError, ScalarOde, StepperOptions};
use crate::quadrature::{gk15, QuadOptions};
use crate::serde_ext::extended;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BvpError {
    #[error("y must be positive, got {0}")]
    NonPositive(f64),
    #[error("ξ = {0} is a breakpoint; use one-sided evaluation")]
    AtBreakpoint(f64),
    #[error("coefficient evaluation failed at ξ = {xi}: {message}")]
    Evaluation { xi: f64, message: String },
    #[error("ell_p = +inf: no traveling wave exists for any speed")]
    EllPInfinite,
    #[error("r = {r} too large: need Θ ⊂ [r0, 1 - r0] with 2r < r0 (closest point {closest})")]
    RadiusTooLarge { r: f64, closest: f64 },
    #[error("inf of κ on [{lo}, {hi}] is {m}, not positive")]
    KappaNotPositive { lo: f64, hi: f64, m: f64 },
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("Picard iteration diverged: residual grew for 3 consecutive steps (last {residual})")]
    PicardDiverged { residual: f64 },
}

/// Which side of a breakpoint to take coefficients from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `c g − f − κ / y^{1/(p−1)}` at a point that is not a breakpoint.
pub fn rhs(m: &Model, c: f64, xi: f64, y: f64) -> Result<f64, BvpError> {
    if m.nodes().contains(&xi) || m.kappa().breakpoints().contains(&xi) {
        return Err(BvpError::AtBreakpoint(xi));
    }
    rhs_one_sided(m, c, xi, y, Side::Right)
}

pub fn rhs_one_sided(m: &Model, c: f64, xi: f64, y: f64, side: Side) -> Result<f64, BvpError> {
    if !(y > 0.0) {
        return Err(BvpError::NonPositive(y));
    }
    let ev = |phi: &PiecewiseFn| {
        let r = match side {
            Side::Left => phi.eval_left(xi),
            Side::Right => phi.eval_right(xi),
        };
        r.map_err(|e| BvpError::Evaluation {
            xi,
            message: e.to_string(),
        })
    };
    let q = 1.0 / (m.p() - 1.0);
    Ok(c * ev(m.g())? - ev(m.f())? - ev(m.kappa())? * y.powf(-q))
}

/// Values at 0⁺ entering the slope analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointData {
    #[serde(serialize_with = "extended")]
    pub ell_p: f64,
    pub f0: f64,
    pub g0: f64,
}

/// ℓ_p, f(0⁺), g(0⁺) from overrides or the endpoint ladder.
pub fn endpoint_data(m: &Model) -> EndpointData {
    let ladder = LadderOptions::default();
    let p = m.p();
    let ell_p = m.overrides().ell_p.unwrap_or_else(|| {
        match limits::limit_at_zero(
            |x| m.kappa().eval(x).ok().map(|k| k.powf(p - 1.0) / x),
            &ladder,
        ) {
            Some(l) => l.liminf().max(0.0),
            None => f64::NAN,
        }
    });
    let at_zero = |c: &PiecewiseFn| {
        c.value_at_zero().unwrap_or_else(|| {
            limits::limit_at_zero(|x| c.eval(x).ok(), &ladder)
                .filter(LadderLimit::is_converged)
                .map_or(f64::NAN, |l| l.liminf())
        })
    };
    EndpointData {
        ell_p,
        f0: at_zero(m.f()),
        g0: at_zero(m.g()),
    }
}

/// Nonnegative roots of η(t) = t^{p′} − a t^{1/(p−1)} + λ, a = c g(0) − f(0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRoots {
    /// Distinct roots in increasing order (a double root appears once).
    pub roots: Vec<f64>,
    pub min_eta: f64,
    pub argmin: f64,
    /// `c g(0) − f(0)`.
    pub drift_at_zero: f64,
    pub lambda: f64,
}

impl SlopeRoots {
    pub fn largest(&self) -> Option<f64> {
        self.roots.last().copied()
    }
}

fn eta(p: f64, a: f64, lambda: f64, t: f64) -> f64 {
    let q = 1.0 / (p - 1.0);
    t.powf(q) * (t - a) + lambda
}

fn bisect_root(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root analysis of η for given exponent, drift at zero and ℓ_p.
pub fn slope_roots_from(p: f64, drift_at_zero: f64, ell_p: f64) -> SlopeRoots {
    let a = drift_at_zero;
    let lambda = ell_p.powf(1.0 / (p - 1.0));
    let e = |t: f64| eta(p, a, lambda, t);
    // η' = t^{q−1}(p′ t − q a) vanishes at t* = a/p.
    let argmin = (a / p).max(0.0);
    let min_eta = e(argmin);
    let scale = lambda.max(a.abs().powf(p / (p - 1.0))).max(1.0);
    let mut roots = Vec::new();
    if min_eta.abs() <= 1e-14 * scale {
        roots.push(argmin);
        if lambda == 0.0 && argmin > 0.0 {
            roots.insert(0, 0.0);
        }
    } else if min_eta < 0.0 {
        let lower = if lambda == 0.0 {
            0.0
        } else {
            bisect_root(e, 0.0, argmin)
        };
        // η(a) = λ ≥ 0, so the upper root lies in (t*, a].
        let upper = if lambda == 0.0 {
            a
        } else {
            bisect_root(e, argmin, a)
        };
        roots.push(lower);
        roots.push(upper);
    } else if lambda == 0.0 {
        roots.push(0.0);
    }
    SlopeRoots {
        roots,
        min_eta,
        argmin,
        drift_at_zero: a,
        lambda,
    }
}

pub fn slope_roots(m: &Model, c: f64) -> Result<SlopeRoots, BvpError> {
    let ed = endpoint_data(m);
    if ed.ell_p == f64::INFINITY {
        return Err(BvpError::EllPInfinite);
    }
    Ok(slope_roots_from(m.p(), c * ed.g0 - ed.f0, ed.ell_p))
}

/// Positive lower bound for every positive solution on `[2r, 1 − 2r]`:
/// `0.99 · min{(r m)^{1/p′}, (m / (p (M + 1)))^{p−1}}` with `m = inf κ` and
/// `M = sup |c g − f|` on `[r, 1 − r]`.
pub fn lower_bound_delta(m: &Model, c: f64, r: f64) -> Result<f64, BvpError> {
    let theta = m.theta();
    let closest = theta
        .iter()
        .map(|t| t.min(1.0 - t))
        .fold(0.5f64, f64::min);
    if !(r > 0.0) || 2.0 * r >= closest {
        return Err(BvpError::RadiusTooLarge { r, closest });
    }
    let (lo, hi) = (r, 1.0 - r);
    let kmin = stats::range_extremum(m.kappa(), lo, hi, Mode::Inf);
    if !(kmin > 0.0) {
        return Err(BvpError::KappaNotPositive { lo, hi, m: kmin });
    }
    let drift = m.reduced().drift(c).map(|e| Expr::Call(crate::expr::Func::Abs, Box::new(e.clone())));
    let big_m = stats::range_extremum(&drift, lo, hi, Mode::Sup);
    Ok(delta_formula(m.p(), r, kmin, big_m))
}

pub(crate) fn delta_formula(p: f64, r: f64, m: f64, big_m: f64) -> f64 {
    let p_conj = p / (p - 1.0);
    let a = (r * m).powf(1.0 / p_conj);
    let b = (m / (p * (big_m + 1.0))).powf(p - 1.0);
    0.99 * a.min(b)
}

/// Necessary condition `c ∫₀¹ g > ∫₀¹ f`.
pub fn necessary_integral(m: &Model, c: f64) -> bool {
    let q = QuadOptions::default();
    match (m.g().integrate(0.0, 1.0, &q), m.f().integrate(0.0, 1.0, &q)) {
        (Ok(g), Ok(f)) => c * g.value > f.value,
        _ => false,
    }
}

/// Outcome of the integral lower-solution test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerSolutionCheck {
    /// β = inf ⨍₀^ξ (c g − f).
    #[serde(serialize_with = "extended")]
    pub beta: f64,
    /// p′ (p − 1)^{1/p} K₀^{1/p′}.
    #[serde(serialize_with = "extended")]
    pub threshold: f64,
    pub holds: bool,
    /// Witness slope β / p.
    pub lambda: f64,
    /// Quadrature error of β.
    pub error: f64,
}

pub fn lower_solution_threshold(p: f64, k0: f64) -> f64 {
    let p_conj = p / (p - 1.0);
    p_conj * (p - 1.0).powf(1.0 / p) * k0.powf(1.0 / p_conj)
}

pub fn integral_lower_solution_check(
    m: &Model,
    c: f64,
    stats: &AverageStats,
) -> Result<LowerSolutionCheck, BvpError> {
    let drift = m.reduced().drift(c);
    let inf = stats::average_extremum(&drift, Mode::Inf, &ScanOptions::default())?;
    let k0 = stats.big_k0();
    let threshold = lower_solution_threshold(m.p(), k0);
    // d threshold / d K0 = threshold / (p′ K0)
    let thr_err = if k0 > 0.0 {
        threshold / (m.p_conj() * k0) * stats.kappa_sup.error
    } else {
        0.0
    };
    let slack = 10.0 * (inf.error + thr_err) + 1e-12 * threshold.abs().max(1.0);
    Ok(LowerSolutionCheck {
        beta: inf.value,
        threshold,
        holds: inf.value > threshold + slack,
        lambda: inf.value / m.p(),
        error: inf.error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpOptions {
    pub stepper: StepperOptions,
    /// Left classification abscissa.
    pub xi_min: f64,
    /// Distance from ξ = 1 where the backward integration is seeded.
    pub delta_seed: f64,
    /// Switch from u = y^{p′} to y once y exceeds this.
    pub y_switch: f64,
    /// slope_tol = factor · (λ_max + 1).
    pub slope_tol_factor: f64,
    pub residual_tol: f64,
    /// Skip the η and integral necessary conditions.
    pub skip_prechecks: bool,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions {
            stepper: StepperOptions::default(),
            xi_min: 1e-6,
            delta_seed: 1e-8,
            y_switch: 1e-6,
            slope_tol_factor: 0.05,
            residual_tol: 1e-6,
            skip_prechecks: false,
        }
    }
}

/// Floor check `y ≥ δ` on `[2r, 1 − 2r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FloorCheck {
    pub r: f64,
    pub delta: f64,
    pub min_y: f64,
    pub passed: bool,
}

/// A positive solution sampled on a mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YSolution {
    pub c: f64,
    pub p: f64,
    pub mesh: Vec<f64>,
    pub y: Vec<f64>,
    pub ydot_left: Vec<f64>,
    pub ydot_right: Vec<f64>,
    /// Integral-identity residual of the cell to the right of each node
    /// (0 for the last node).
    pub residual: Vec<f64>,
    pub slope_at_zero: f64,
    pub residual_sup: f64,
    pub boundary_defect: (f64, f64),
    pub floor_check: Option<FloorCheck>,
    pub stiff_steps: usize,
    pub diagnostics: Vec<String>,
}

impl YSolution {
    /// Builds a solution record from samples, computing slopes and
    /// residuals. `mesh` must be increasing and contain the breakpoints
    /// inside its range.
    pub fn from_samples(m: &Model, c: f64, mesh: Vec<f64>, y: Vec<f64>) -> YSolution {
        let prob = Problem::new(m, c);
        let n = mesh.len();
        let mut ydot_left = vec![f64::NAN; n];
        let mut ydot_right = vec![f64::NAN; n];
        for i in 0..n {
            ydot_left[i] = prob.rhs_side(mesh[i], y[i], Side::Left);
            ydot_right[i] = prob.rhs_side(mesh[i], y[i], Side::Right);
        }
        let mut residual = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            residual[i] = prob.cell_residual(
                mesh[i],
                mesh[i + 1],
                y[i],
                y[i + 1],
                ydot_right[i],
                ydot_left[i + 1],
            );
        }
        let residual_sup = residual.iter().copied().fold(0.0, f64::max);
        let slope_at_zero = if n > 0 { y[0] / mesh[0] } else { f64::NAN };
        let boundary_defect = if n > 0 { (y[0], y[n - 1]) } else { (f64::NAN, f64::NAN) };
        let mut sol = YSolution {
            c,
            p: m.p(),
            mesh,
            y,
            ydot_left,
            ydot_right,
            residual,
            slope_at_zero,
            residual_sup,
            boundary_defect,
            floor_check: None,
            stiff_steps: 0,
            diagnostics: Vec::new(),
        };
        sol.floor_check = floor_check(m, c, &sol, 0.05);
        sol
    }

    /// Cubic Hermite interpolation of y from the one-sided slopes; linear
    /// in cells where a slope is not finite and towards y(0) = 0 below the
    /// first node.
    pub fn y_at(&self, xi: f64) -> f64 {
        let (xs, ys) = (&self.mesh, &self.y);
        let n = xs.len();
        if n == 0 {
            return f64::NAN;
        }
        if xi <= xs[0] {
            return if xi > 0.0 && xs[0] > 0.0 { ys[0] * xi / xs[0] } else { ys[0] };
        }
        if xi >= xs[n - 1] {
            return ys[n - 1];
        }
        let k = xs.partition_point(|v| *v <= xi);
        let (x0, x1) = (xs[k - 1], xs[k]);
        let (s0, s1) = (self.ydot_right[k - 1], self.ydot_left[k]);
        if !(s0.is_finite() && s1.is_finite()) {
            return interp(xs, ys, xi);
        }
        let h = x1 - x0;
        let t = (xi - x0) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        (h00 * ys[k - 1] + h10 * h * s0 + h01 * ys[k] + h11 * h * s1).max(0.0)
    }

    /// Max |y − other| over the mesh points of `self` inside `[lo, hi]`.
    pub fn sup_distance(&self, other: &YSolution, lo: f64, hi: f64) -> f64 {
        self.mesh
            .iter()
            .zip(&self.y)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(x, y)| (y - other.y_at(*x)).abs())
            .fold(0.0, f64::max)
    }
}

fn floor_check(m: &Model, c: f64, sol: &YSolution, r: f64) -> Option<FloorCheck> {
    let delta = lower_bound_delta(m, c, r).ok()?;
    let min_y = sol
        .mesh
        .iter()
        .zip(&sol.y)
        .filter(|(x, _)| **x >= 2.0 * r && **x <= 1.0 - 2.0 * r)
        .map(|(_, y)| *y)
        .fold(f64::INFINITY, f64::min);
    Some(FloorCheck {
        r,
        delta,
        min_y,
        passed: min_y >= delta,
    })
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|v| *v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AdmissibilityResult {
    Admissible(YSolution),
    Inadmissible {
        xi_cross: f64,
        reason: String,
    },
    Indeterminate {
        diagnostic: String,
        slope_at_min: f64,
    },
}

impl AdmissibilityResult {
    pub fn is_admissible(&self) -> bool {
        matches!(self, AdmissibilityResult::Admissible(_))
    }

    pub fn is_inadmissible(&self) -> bool {
        matches!(self, AdmissibilityResult::Inadmissible { .. })
    }

    pub fn solution(&self) -> Option<&YSolution> {
        match self {
            AdmissibilityResult::Admissible(s) => Some(s),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AdmissibilityResult::Admissible(_) => "admissible",
            AdmissibilityResult::Inadmissible { .. } => "inadmissible",
            AdmissibilityResult::Indeterminate { .. } => "indeterminate",
        }
    }
}

/// f, g, κ and the speed, with breakpoint-aware piece lookup.
struct Problem {
    c: f64,
    p: f64,
    red: ReducedProblem,
    nodes: Vec<f64>,
}

impl Problem {
    fn new(m: &Model, c: f64) -> Problem {
        let red = m.reduced();
        let nodes = merge_points([m.nodes(), red.nodes()].iter().map(|v| v.as_slice()));
        Problem {
            c,
            p: m.p(),
            red,
            nodes,
        }
    }

    fn q(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Piece expressions on an interval free of breakpoints.
    fn segment(&self, lo: f64, hi: f64) -> Segment<'_> {
        Segment {
            c: self.c,
            q: self.q(),
            p: self.p,
            f: self.red.f.piece_on(lo, hi),
            g: self.red.g.piece_on(lo, hi),
            kappa: self.red.kappa.piece_on(lo, hi),
        }
    }

    fn segment_at(&self, x: f64, side: Side) -> Segment<'_> {
        fn pick(phi: &PiecewiseFn, x: f64, side: Side) -> &Expr {
            let k = match side {
                Side::Left => phi.piece_index_left(x),
                Side::Right => phi.piece_index(x),
            };
            &phi.pieces()[k]
        }
        Segment {
            c: self.c,
            q: self.q(),
            p: self.p,
            f: pick(&self.red.f, x, side),
            g: pick(&self.red.g, x, side),
            kappa: pick(&self.red.kappa, x, side),
        }
    }

    fn rhs_side(&self, x: f64, y: f64, side: Side) -> f64 {
        self.segment_at(x, side).rhs(x, y)
    }

    /// |y₂ − y₁ − ∫ F(ξ, Y(ξ))| with Y the cubic Hermite interpolant.
    fn cell_residual(&self, x0: f64, x1: f64, y0: f64, y1: f64, s0: f64, s1: f64) -> f64 {
        let seg = self.segment(x0, x1);
        let h = x1 - x0;
        let floor = 0.5 * y0.min(y1);
        let s0 = if s0.is_finite() { s0 } else { (y1 - y0) / h };
        let s1 = if s1.is_finite() { s1 } else { (y1 - y0) / h };
        let mut integrand = |x: f64| {
            let t = (x - x0) / h;
            let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
            let h10 = t * (1.0 - t) * (1.0 - t);
            let h01 = t * t * (3.0 - 2.0 * t);
            let h11 = t * t * (t - 1.0);
            let yy = (h00 * y0 + h10 * h * s0 + h01 * y1 + h11 * h * s1).max(floor);
            seg.rhs(x, yy)
        };
        match gk15(&mut integrand, x0, x1) {
            Ok((v, _)) => (y1 - y0 - v).abs(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Segments (lo, hi) between consecutive nodes covering [a, b].
    fn segments(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut edges = vec![a];
        edges.extend(self.nodes.iter().copied().filter(|x| *x > a && *x < b));
        edges.push(b);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

struct Segment<'a> {
    c: f64,
    q: f64,
    p: f64,
    f: &'a Expr,
    g: &'a Expr,
    kappa: &'a Expr,
}

impl Segment<'_> {
    fn drift(&self, x: f64) -> f64 {
        match (self.g.eval(x), self.f.eval(x)) {
            (Ok(g), Ok(f)) => self.c * g - f,
            _ => f64::NAN,
        }
    }

    fn kappa(&self, x: f64) -> f64 {
        self.kappa.eval(x).unwrap_or(f64::NAN)
    }

    fn rhs(&self, x: f64, y: f64) -> f64 {
        if !(y > 0.0) {
            return f64::NAN;
        }
        self.drift(x) - self.kappa(x) * y.powf(-self.q)
    }
}

impl ScalarOde for Segment<'_> {
    fn rhs(&self, x: f64, y: f64) -> f64 {
        Segment::rhs(self, x, y)
    }

    fn dfdy(&self, x: f64, y: f64) -> f64 {
        self.q * self.kappa(x) * y.powf(-self.q - 1.0)
    }
}

/// The regularized variable u = y^{p′}: u̇ = p′[(cg − f) u^{1/p} − κ].
struct SegmentU<'a>(Segment<'a>);

impl ScalarOde for SegmentU<'_> {
    fn rhs(&self, x: f64, u: f64) -> f64 {
        if u < 0.0 {
            return f64::NAN;
        }
        let s = &self.0;
        let pc = s.p / (s.p - 1.0);
        pc * (s.drift(x) * u.powf(1.0 / s.p) - s.kappa(x))
    }

    fn dfdy(&self, x: f64, u: f64) -> f64 {
        let s = &self.0;
        let pc = s.p / (s.p - 1.0);
        if u <= 0.0 {
            return 0.0;
        }
        pc * s.drift(x) / s.p * u.powf(1.0 / s.p - 1.0)
    }
}

/// Backward trajectory from (1, 0) to ξ_min, in increasing ξ order.
struct Backward {
    xs: Vec<f64>,
    ys: Vec<f64>,
    stiff_steps: usize,
}

fn shoot_backward(prob: &Problem, opts: &BvpOptions) -> Result<Backward, BvpError> {
    let last_node = prob.nodes.last().copied().unwrap_or(0.0);
    let seed = opts.delta_seed.min(0.1 * (1.0 - last_node));
    let x_seed = 1.0 - seed;
    let pc = prob.p_conj();

    // First-order seed u(1 − s) ≈ p′ ∫_{1−s}^1 κ.
    let top = prob.segment(last_node.max(opts.xi_min), 1.0);
    let mut kint = |x: f64| top.kappa(x);
    let (kappa_int, _) = gk15(&mut kint, x_seed, 1.0).map_err(|_| BvpError::Evaluation {
        xi: 1.0,
        message: "κ not finite near 1".into(),
    })?;
    let mut u = pc * kappa_int;
    // With positive drift the tail can instead sit on the quasi-steady
    // branch κ y^{-q} = cg − f. The true seed lies below both balances.
    let drift = top.drift(x_seed);
    if drift > 0.0 {
        let u_qs = (top.kappa(x_seed) / drift).powf(pc / prob.q());
        if u_qs.is_finite() && u_qs < u {
            u = u_qs;
        }
    }
    let mut x = x_seed;

    let mut xs = vec![x];
    let mut ys = vec![u.powf(1.0 / pc)];
    let mut stiff_steps = 0;
    let u_switch = opts.y_switch.powf(pc);

    for (lo, hi) in prob.segments(opts.xi_min, x_seed).into_iter().rev() {
        let seg = prob.segment(lo, hi);
        let mut target = lo;
        if ys.last().copied().unwrap_or(0.0) < opts.y_switch {
            let su = SegmentU(prob.segment(lo, hi));
            // u is tiny here; an absolute tolerance meant for y is useless.
            let uopts = StepperOptions {
                abs_tol: opts.stepper.abs_tol * u_switch,
                anchor: Some((1.0, 0.5)),
                ..opts.stepper
            };
            let traj = ode::integrate(&su, x, u, lo, &uopts, |_, uu| {
                if uu >= u_switch {
                    Control::Stop
                } else {
                    Control::Continue
                }
            })?;
            stiff_steps += traj.stiff_steps;
            for pt in &traj.points[1..] {
                xs.push(pt.x);
                ys.push(pt.y.max(0.0).powf(1.0 / pc));
            }
            let end = traj.last();
            x = end.x;
            u = end.y;
            if !traj.stopped {
                continue;
            }
            target = lo;
        }
        let y0 = *ys.last().expect("seeded");
        // Near a degenerate zero at ξ = 0 the solution is O(ξ²); keep the
        // error control relative there.
        let yopts = StepperOptions {
            abs_tol: opts.stepper.abs_tol * opts.y_switch,
            ..opts.stepper
        };
        let traj = ode::integrate(&seg, x, y0, target, &yopts, |_, _| Control::Continue)?;
        stiff_steps += traj.stiff_steps;
        for pt in &traj.points[1..] {
            xs.push(pt.x);
            ys.push(pt.y);
        }
        x = traj.last().x;
        u = traj.last().y.powf(pc);
    }
    xs.reverse();
    ys.reverse();
    Ok(Backward { xs, ys, stiff_steps })
}

/// Forward shot from (ξ_min, λ ξ_min); returns the abscissa where y hits 0.
fn shoot_forward(prob: &Problem, lambda: f64, opts: &BvpOptions) -> Option<f64> {
    let mut x = opts.xi_min;
    let mut y = lambda * x;
    let stop = 1e-4 * y;
    for (lo, hi) in prob.segments(opts.xi_min, 1.0) {
        let seg = prob.segment(lo, hi);
        match ode::integrate(&seg, x, y, hi, &opts.stepper, |_, yy| {
            if yy <= stop {
                Control::Stop
            } else {
                Control::Continue
            }
        }) {
            Ok(t) => {
                let end = t.last();
                if t.stopped {
                    let k = seg.kappa(end.x);
                    let dx = if k > 0.0 {
                        end.y.powf(prob.p_conj()) / (prob.p_conj() * k)
                    } else {
                        0.0
                    };
                    return Some((end.x + dx).min(hi));
                }
                x = end.x;
                y = end.y;
            }
            Err(OdeError::StepUnderflow { x, .. }) => return Some(x),
            Err(_) => return None,
        }
    }
    None
}

/// Decides admissibility of the speed `c`.
pub fn solve_bvp(m: &Model, c: f64, opts: &BvpOptions) -> Result<AdmissibilityResult, BvpError> {
    let ed = endpoint_data(m);
    if ed.ell_p == f64::INFINITY {
        return Err(BvpError::EllPInfinite);
    }
    let roots = slope_roots_from(m.p(), c * ed.g0 - ed.f0, ed.ell_p);
    let prob = Problem::new(m, c);
    let lambda_seed = roots
        .largest()
        .unwrap_or(roots.argmin)
        .max(roots.argmin)
        .max(1e-3);

    if !opts.skip_prechecks {
        let reason = if roots.min_eta > 0.0 {
            Some(format!(
                "min η = {:.6e} > 0: no slope at 0 is compatible",
                roots.min_eta
            ))
        } else if !necessary_integral(m, c) {
            Some("c ∫g ≤ ∫f".to_string())
        } else {
            None
        };
        if let Some(reason) = reason {
            let xi_cross = shoot_forward(&prob, lambda_seed, opts)
                .filter(|x| *x > opts.xi_min && *x < 1.0)
                .unwrap_or(0.5 * (opts.xi_min + 1.0));
            return Ok(AdmissibilityResult::Inadmissible { xi_cross, reason });
        }
    }

    let back = shoot_backward(&prob, opts)?;
    let y_min = back.ys[0];
    let lambda_max = roots.largest().unwrap_or(roots.argmin);
    let slope_tol = opts.slope_tol_factor * (lambda_max + 1.0);
    let band = (lambda_max + slope_tol) * opts.xi_min;
    let slope = y_min / opts.xi_min;

    if y_min > 0.0 && y_min <= band {
        let mut sol = YSolution::from_samples(m, c, back.xs, back.ys);
        sol.stiff_steps = back.stiff_steps;
        if sol.boundary_defect.1 > 1e-3 {
            sol.diagnostics.push(format!(
                "right boundary defect {:.3e} is large",
                sol.boundary_defect.1
            ));
        }
        if let Some(fc) = sol.floor_check {
            if !fc.passed {
                sol.diagnostics.push(format!(
                    "floor check failed: min y = {:.3e} < δ = {:.3e} on [{}, {}]",
                    fc.min_y,
                    fc.delta,
                    2.0 * fc.r,
                    1.0 - 2.0 * fc.r
                ));
            }
        }
        if sol.residual_sup > opts.residual_tol {
            sol.diagnostics.push(format!(
                "residual {:.3e} above tolerance {:.1e}",
                sol.residual_sup, opts.residual_tol
            ));
        }
        return Ok(AdmissibilityResult::Admissible(sol));
    }

    // A plateau (y roughly constant over the last decade) means y(0⁺) > 0.
    let y_decade = interp(&back.xs, &back.ys, 10.0 * opts.xi_min);
    let plateau = y_min >= 0.5 * y_decade;
    if plateau {
        if let Some(xi_cross) =
            shoot_forward(&prob, lambda_seed, opts).filter(|x| *x > opts.xi_min && *x < 1.0)
        {
            return Ok(AdmissibilityResult::Inadmissible {
                xi_cross,
                reason: format!("y(0+) ≈ {y_min:.6e} > 0"),
            });
        }
    }
    Ok(AdmissibilityResult::Indeterminate {
        diagnostic: format!(
            "y({}) = {y_min:.6e} above the slope band {band:.6e} (λ_max = {lambda_max:.6}, plateau = {plateau})",
            opts.xi_min
        ),
        slope_at_min: slope,
    })
}

/// Damped fixed-point refinement
/// `y ← max{floor, (1 − ω) y + ω ∫_ξ^1 [κ/y^{1/(p−1)} − (cg − f)]}`.
pub fn picard_refine(
    m: &Model,
    c: f64,
    y0: &YSolution,
    iters: usize,
) -> Result<YSolution, BvpError> {
    const OMEGA: f64 = 0.5;
    let tol = BvpOptions::default().residual_tol;
    if iters == 0 || y0.mesh.len() < 2 || y0.residual_sup <= tol {
        return Ok(y0.clone());
    }
    let prob = Problem::new(m, c);
    let delta = lower_bound_delta(m, c, 0.05).ok();
    let mesh = y0.mesh.clone();
    let n = mesh.len();
    let mut best = y0.clone();
    let mut current = y0.clone();
    let mut grew = 0;
    let mut last_res = y0.residual_sup;
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        next[n - 1] = current.y[n - 1];
        let mut acc = current.y[n - 1];
        for i in (0..n - 1).rev() {
            // ∫_{ξ_i}^{ξ_{i+1}} ẏ along the Hermite interpolant
            let (x0, x1) = (mesh[i], mesh[i + 1]);
            let seg = prob.segment(x0, x1);
            let (ya, yb) = (current.y[i], current.y[i + 1]);
            let (sa, sb) = (current.ydot_right[i], current.ydot_left[i + 1]);
            let h = x1 - x0;
            let floor = 0.5 * ya.min(yb);
            let mut f = |x: f64| {
                let t = (x - x0) / h;
                let yy = ((1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t) * ya
                    + t * (1.0 - t) * (1.0 - t) * h * sa
                    + t * t * (3.0 - 2.0 * t) * yb
                    + t * t * (t - 1.0) * h * sb)
                    .max(floor);
                seg.rhs(x, yy)
            };
            let (integral, _) = gk15(&mut f, x0, x1).unwrap_or((f64::NAN, 0.0));
            acc -= integral;
            let floor_i = match delta {
                Some(d) if mesh[i] >= 0.1 && mesh[i] <= 0.9 => 0.5 * d,
                _ => 0.5 * current.y[i],
            };
            let v = (1.0 - OMEGA) * current.y[i] + OMEGA * acc;
            next[i] = if v.is_finite() { v.max(floor_i) } else { current.y[i] };
        }
        current = YSolution::from_samples(m, c, mesh.clone(), next);
        if current.residual_sup < best.residual_sup {
            best = current.clone();
        }
        if current.residual_sup > last_res {
            grew += 1;
            if grew >= 3 {
                return Err(BvpError::PicardDiverged {
                    residual: current.residual_sup,
                });
            }
        } else {
            grew = 0;
        }
        last_res = current.residual_sup;
    }
    best.stiff_steps = y0.stiff_steps;
    best.diagnostics = y0.diagnostics.clone();
    Ok(best)
}
