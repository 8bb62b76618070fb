//! Extrema of the running averages `ξ ↦ (1/ξ) ∫₀^ξ φ` and the limit
//! quantities at 0⁺.

use serde::Serialize;
use thiserror::Error;

use super::limits::{self, LadderLimit, LadderOptions};
use super::model::Model;
use super::piecewise::PiecewiseFn;
use crate::expr::Expr;
use crate::quadrature::{Quad, QuadError, QuadOptions};
use crate::serde_ext::{extended, extended_opt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Inf,
    Sup,
}

impl Mode {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Inf => a < b,
            Mode::Sup => a > b,
        }
    }

    fn worst(self) -> f64 {
        match self {
            Mode::Inf => f64::INFINITY,
            Mode::Sup => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Uniform scan points per interval between consecutive breakpoints.
    pub points_per_interval: usize,
    pub ladder: LadderOptions,
    pub quad: QuadOptions,
    /// Relative width at which golden-section refinement stops.
    pub golden_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            points_per_interval: 512,
            ladder: LadderOptions::default(),
            quad: QuadOptions::default(),
            golden_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("{0}")]
    Hypothesis(String),
}

/// Extremum of the running average of a coefficient over (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageExtremum {
    pub mode: Mode,
    /// The extremum over (0, 1), including the limit extension at 0⁺.
    #[serde(serialize_with = "extended")]
    pub value: f64,
    /// Where it is attained; `None` when approached as ξ → 0⁺.
    pub argument: Option<f64>,
    /// Extremum over the scanned part `[ξ_ladder, 1]`.
    #[serde(serialize_with = "extended")]
    pub interior: f64,
    pub interior_argument: f64,
    /// Limit behaviour of the average at 0⁺.
    pub at_zero: Option<LadderLimit>,
    /// Average at ξ = 1, i.e. ∫₀¹ φ.
    #[serde(serialize_with = "extended")]
    pub at_one: f64,
    #[serde(serialize_with = "extended")]
    pub error: f64,
}

/// `(1/ξ) ∫₀^ξ φ(τ) dτ`.
pub fn integral_average(phi: &PiecewiseFn, xi: f64, opts: &QuadOptions) -> Result<Quad, QuadError> {
    phi.average(xi, opts)
}

/// The common value when every piece is the same constant.
fn constant_value(phi: &PiecewiseFn) -> Option<f64> {
    let value = |e: &Expr| e.is_constant().then(|| e.eval(0.5).ok()).flatten();
    let first = value(&phi.pieces()[0])?;
    phi.pieces()
        .iter()
        .all(|e| value(e) == Some(first))
        .then_some(first)
}

/// Infimum or supremum of `phi` itself over `[lo, hi]`, using the closure of
/// each piece (one-sided values at breakpoints).
pub fn range_extremum(phi: &PiecewiseFn, lo: f64, hi: f64, mode: Mode) -> f64 {
    const SAMPLES: usize = 1024;
    let mut best = mode.worst();
    for i in 0..phi.pieces().len() {
        let (a, b) = phi.piece_interval(i);
        let (a, b) = (a.max(lo), b.min(hi));
        if a > b {
            continue;
        }
        let e = &phi.pieces()[i];
        let val = |x: f64| e.eval(x).unwrap_or(f64::NAN);
        let (mut arg, mut v) = (a, mode.worst());
        for k in 0..=SAMPLES {
            let x = a + (b - a) * k as f64 / SAMPLES as f64;
            let fx = val(x);
            if fx.is_nan() {
                continue;
            }
            if mode.better(fx, v) || v == mode.worst() {
                arg = x;
                v = fx;
            }
        }
        if b > a {
            let w = (b - a) / SAMPLES as f64;
            let (l, r) = ((arg - w).max(a), (arg + w).min(b));
            let (_, g) = golden(
                |x| {
                    let fx = val(x);
                    if fx.is_nan() {
                        mode.worst()
                    } else {
                        fx
                    }
                },
                l,
                r,
                mode,
                1e-12,
            );
            if mode.better(g, v) {
                v = g;
            }
        }
        if mode.better(v, best) {
            best = v;
        }
    }
    best
}

/// Cumulative integrals of `phi` on an increasing grid starting at 0.
struct Cumulative {
    xs: Vec<f64>,
    integrals: Vec<f64>,
    errors: Vec<f64>,
}

fn scan_grid(phi: &PiecewiseFn, opts: &ScanOptions) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend_from_slice(phi.breakpoints());
    edges.push(1.0);
    let n = opts.points_per_interval.max(2);
    let mut xs: Vec<f64> = edges
        .windows(2)
        .flat_map(|w| (1..=n).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / n as f64))
        .collect();
    xs.extend(opts.ladder.points());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn cumulative(phi: &PiecewiseFn, xs: &[f64], quad: &QuadOptions) -> Result<Cumulative, QuadError> {
    let mut integrals = Vec::with_capacity(xs.len());
    let mut errors = Vec::with_capacity(xs.len());
    let (mut acc, mut err, mut prev) = (0.0, 0.0, 0.0);
    for &x in xs {
        let q = phi.integrate(prev, x, quad)?;
        acc += q.value;
        err += q.error;
        integrals.push(acc);
        errors.push(err);
        prev = x;
    }
    Ok(Cumulative {
        xs: xs.to_vec(),
        integrals,
        errors,
    })
}

/// Golden-section search for the extremum of `a` on `[lo, hi]`.
fn golden(mut a: impl FnMut(f64) -> f64, lo: f64, hi: f64, mode: Mode, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (lo, hi);
    let key = |v: f64| match mode {
        Mode::Inf => v,
        Mode::Sup => -v,
    };
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = key(a(x1));
    let mut f2 = key(a(x2));
    for _ in 0..200 {
        if hi - lo <= tol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = key(a(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = key(a(x2));
        }
    }
    if f1 <= f2 {
        (x1, key(f1))
    } else {
        (x2, key(f2))
    }
}

/// Infimum or supremum of `ξ ↦ ⨍₀^ξ φ` over (0, 1).
///
/// The average is scanned on a breakpoint-respecting grid, the best bracket
/// is refined by golden section, and the behaviour at 0⁺ is extrapolated
/// from the ladder. A non-integrable singularity at 0 makes every average
/// infinite, which is reported as such.
pub fn average_extremum(
    phi: &PiecewiseFn,
    mode: Mode,
    opts: &ScanOptions,
) -> Result<AverageExtremum, StatsError> {
    if let Some(c) = constant_value(phi) {
        let at_zero = Some(LadderLimit::Converged { value: c, spread: 0.0 });
        return Ok(AverageExtremum {
            mode,
            value: c,
            argument: Some(1.0),
            interior: c,
            interior_argument: 1.0,
            at_zero,
            at_one: c,
            error: 0.0,
        });
    }
    let xs = scan_grid(phi, opts);
    let divergent = |positive: bool| {
        let v = if positive {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        AverageExtremum {
            mode,
            value: v,
            argument: None,
            interior: v,
            interior_argument: xs[0],
            at_zero: Some(LadderLimit::Diverges { positive }),
            at_one: v,
            error: 0.0,
        }
    };
    let cum = match cumulative(phi, &xs, &opts.quad) {
        Ok(c) => c,
        Err(QuadError::Budget { a, value, .. }) if a == 0.0 => {
            return Ok(divergent(value >= 0.0));
        }
        // Overflow while refining toward 0 also means a non-integrable
        // singularity there.
        Err(QuadError::NonFinite { x }) if x < xs[0] => {
            let probe = phi.eval(xs[0] * 1e-6).unwrap_or(1.0);
            return Ok(divergent(probe >= 0.0));
        }
        Err(e) => return Err(e.into()),
    };
    let avgs: Vec<f64> = cum.xs.iter().zip(&cum.integrals).map(|(x, i)| i / x).collect();

    let mut best = 0;
    for k in 1..avgs.len() {
        if mode.better(avgs[k], avgs[best]) {
            best = k;
        }
    }

    // Refine inside the neighbouring cells.
    let (mut arg, mut val) = (cum.xs[best], avgs[best]);
    let lo_idx = best.saturating_sub(1);
    let hi_idx = (best + 1).min(avgs.len() - 1);
    if hi_idx > lo_idx {
        let base_x = cum.xs[lo_idx];
        let base_i = cum.integrals[lo_idx];
        let quad = opts.quad;
        let f = |x: f64| match phi.integrate(base_x, x, &quad) {
            Ok(q) => (base_i + q.value) / x,
            Err(_) => mode.worst(),
        };
        let (x, v) = golden(f, base_x, cum.xs[hi_idx], mode, opts.golden_tol);
        if mode.better(v, val) {
            arg = x;
            val = v;
        }
    }
    let quad_err = cum.errors[best.max(hi_idx)] / arg;

    let ladder_avgs: Vec<f64> = opts
        .ladder
        .points()
        .iter()
        .map(|p| {
            let k = cum.xs.partition_point(|x| x < p);
            avgs[k]
        })
        .collect();
    let at_zero = Some(limits::extrapolate(&ladder_avgs, opts.ladder.rel_tol));
    let edge = at_zero.map(|l| match mode {
        Mode::Inf => l.liminf(),
        Mode::Sup => l.limsup(),
    });

    let mut out = AverageExtremum {
        mode,
        value: val,
        argument: Some(arg),
        interior: val,
        interior_argument: arg,
        at_zero,
        at_one: *avgs.last().expect("non-empty grid"),
        error: quad_err + 1e-12 * val.abs().max(1.0),
    };
    if let Some(e) = edge {
        // Ties go to the interior point, which is an actual attained value.
        let margin = 1e-12 * e.abs().max(1.0);
        let wins = match mode {
            Mode::Inf => e < val - margin,
            Mode::Sup => e > val + margin,
        };
        if wins {
            out.value = e;
            out.argument = None;
            out.error = at_zero.map_or(0.0, |l| l.uncertainty()) + cum.errors[0] / cum.xs[0];
        }
    }
    Ok(out)
}

/// The functionals F₀, G₀, K₀, ℓ_p, L_p, f(0⁺), g(0⁺) of a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageStats {
    /// sup ⨍₀^ξ f
    #[serde(rename = "F0")]
    pub f_sup: AverageExtremum,
    /// inf ⨍₀^ξ g
    #[serde(rename = "G0")]
    pub g_inf: AverageExtremum,
    /// sup ⨍₀^ξ κ(τ)/τ^{1/(p−1)}
    #[serde(rename = "K0")]
    pub kappa_sup: AverageExtremum,
    #[serde(serialize_with = "extended")]
    pub ell_p: f64,
    #[serde(rename = "L_p", serialize_with = "extended")]
    pub big_l_p: f64,
    /// Ladder estimate of κ^{p−1}/ξ at 0⁺, kept even when overridden.
    pub slope_limit: Option<LadderLimit>,
    #[serde(serialize_with = "extended")]
    pub f0: f64,
    #[serde(serialize_with = "extended")]
    pub g0: f64,
    /// ∫₀¹ f and ∫₀¹ g.
    #[serde(serialize_with = "extended")]
    pub f_integral: f64,
    #[serde(serialize_with = "extended")]
    pub g_integral: f64,
    /// Smallest value of ∫₀^ξ g over the scan grid.
    #[serde(serialize_with = "extended")]
    pub g_cumulative_min: f64,
    #[serde(serialize_with = "extended_opt")]
    pub g_cumulative_argmin: Option<f64>,
    pub warnings: Vec<String>,
}

impl AverageStats {
    pub fn big_f0(&self) -> f64 {
        self.f_sup.value
    }

    pub fn big_g0(&self) -> f64 {
        self.g_inf.value
    }

    pub fn big_k0(&self) -> f64 {
        self.kappa_sup.value
    }
}

fn endpoint_limit(c: &PiecewiseFn, opts: &LadderOptions) -> Option<f64> {
    c.value_at_zero().or_else(|| {
        limits::limit_at_zero(|x| c.eval(x).ok(), opts)
            .filter(|l| l.is_converged())
            .map(|l| l.liminf())
    })
}

pub fn average_stats(m: &Model) -> Result<AverageStats, StatsError> {
    average_stats_with(m, &ScanOptions::default())
}

pub fn average_stats_with(m: &Model, opts: &ScanOptions) -> Result<AverageStats, StatsError> {
    let reduced = m.reduced();
    let f_sup = average_extremum(m.f(), Mode::Sup, opts)?;
    let g_inf = average_extremum(m.g(), Mode::Inf, opts)?;
    let kappa_sup = average_extremum(&reduced.kappa_over_power(), Mode::Sup, opts)?;
    let mut warnings = Vec::new();

    let p = m.p();
    let slope_limit = limits::limit_at_zero(
        |x| m.kappa().eval(x).ok().map(|k| k.powf(p - 1.0) / x),
        &opts.ladder,
    );
    let (mut ell_p, mut big_l_p) = match slope_limit {
        Some(l) => (l.liminf().max(0.0), l.limsup().max(0.0)),
        None => (f64::NAN, f64::NAN),
    };
    if let Some(LadderLimit::Oscillates { lo, hi }) = slope_limit {
        warnings.push(format!(
            "κ^(p-1)/ξ does not settle at 0+: ladder values in [{lo}, {hi}], ell_p < L_p"
        ));
    }
    let ov = m.overrides();
    for (name, numeric, supplied) in [
        ("ell_p", &mut ell_p, ov.ell_p),
        ("L_p", &mut big_l_p, ov.big_l_p),
    ] {
        if let Some(v) = supplied {
            if numeric.is_finite() && (*numeric - v).abs() > 1e-3 * v.abs().max(1.0) {
                warnings.push(format!(
                    "supplied {name} = {v} differs from the numerical estimate {numeric}"
                ));
            }
            *numeric = v;
        }
    }
    // An override of ell_p alone pins L_p when the numeric limit exists.
    if ov.ell_p.is_some() && ov.big_l_p.is_none() && slope_limit.is_some_and(|l| l.is_converged()) {
        big_l_p = ell_p;
    }
    if ov.big_l_p.is_some() && ov.ell_p.is_none() && slope_limit.is_some_and(|l| l.is_converged()) {
        ell_p = big_l_p;
    }
    if ell_p.is_nan() || big_l_p.is_nan() {
        return Err(StatsError::Hypothesis(
            "κ cannot be evaluated near 0+ to estimate ell_p".into(),
        ));
    }

    let f0 = endpoint_limit(m.f(), &opts.ladder).unwrap_or(f64::NAN);
    let g0 = endpoint_limit(m.g(), &opts.ladder).unwrap_or(f64::NAN);
    if f0.is_nan() || g0.is_nan() {
        warnings.push("f(0+) or g(0+) has no detectable limit".into());
    }

    let xs = scan_grid(m.g(), opts);
    let cum = cumulative(m.g(), &xs, &opts.quad)?;
    let (mut gmin, mut gargmin) = (f64::INFINITY, None);
    for (x, i) in cum.xs.iter().zip(&cum.integrals) {
        if *i < gmin {
            gmin = *i;
            gargmin = Some(*x);
        }
    }
    let f_integral = m.f().integrate(0.0, 1.0, &opts.quad)?.value;
    let g_integral = *cum.integrals.last().expect("non-empty grid");

    Ok(AverageStats {
        f_sup,
        g_inf,
        kappa_sup,
        ell_p,
        big_l_p,
        slope_limit,
        f0,
        g0,
        f_integral,
        g_integral,
        g_cumulative_min: gmin,
        g_cumulative_argmin: gargmin,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::parse_model;

    fn pw(s: &str) -> PiecewiseFn {
        PiecewiseFn::from_expr(Expr::parse(s).unwrap())
    }

    fn model(f: &str, g: &str, h: &str, d: &str, p: f64) -> Model {
        Model::new(p, pw(f), pw(g), pw(h), pw(d)).unwrap()
    }

    /// Brute-force oracle: dense grid of closed-form averages.
    fn dense_extremum(avg: impl Fn(f64) -> f64, mode: Mode) -> f64 {
        let n = 200_000;
        let vals = (1..=n).map(|k| avg(k as f64 / n as f64));
        match mode {
            Mode::Inf => vals.fold(f64::INFINITY, f64::min),
            Mode::Sup => vals.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    #[test]
    fn integral_average_examples() {
        let q = QuadOptions::default();
        assert!((integral_average(&pw("1-x"), 1.0, &q).unwrap().value - 0.5).abs() < 1e-14);
        assert!((integral_average(&pw("3.25"), 0.37, &q).unwrap().value - 3.25).abs() < 1e-14);
        let step = PiecewiseFn::step(0.5, 0.0, 1.0);
        assert!((integral_average(&step, 1.0, &q).unwrap().value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fisher_stats() {
        let s = average_stats(&model("0", "1", "x*(1-x)", "1", 2.0)).unwrap();
        assert!((s.ell_p - 1.0).abs() < 1e-6, "{}", s.ell_p);
        assert!((s.big_l_p - 1.0).abs() < 1e-6);
        assert!((s.big_k0() - 1.0).abs() < 1e-6, "{:?}", s.kappa_sup);
        assert_eq!(s.kappa_sup.argument, None);
        assert_eq!(s.big_f0(), 0.0);
        assert_eq!(s.big_g0(), 1.0);
        assert_eq!((s.f0, s.g0), (0.0, 1.0));
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);
    }

    #[test]
    fn degenerate_fisher_stats() {
        let s = average_stats(&model("0", "1", "x*(1-x)", "x", 2.0)).unwrap();
        assert!(s.ell_p.abs() < 1e-6);
        assert!((s.big_k0() - 3.0 / 16.0).abs() < 1e-10, "{:?}", s.kappa_sup);
        let arg = s.kappa_sup.argument.unwrap();
        assert!((arg - 0.75).abs() < 1e-5, "{arg}");
        let oracle = dense_extremum(|x| x / 2.0 - x * x / 3.0, Mode::Sup);
        assert!((s.big_k0() - oracle).abs() < 1e-9);
    }

    #[test]
    fn heaviside_convection() {
        let src = "p = 2\nf = [{ interval = [0, 0.5], expr = \"0\" }, { interval = [0.5, 1], expr = \"1\" }]\ng = \"1\"\nh = \"x*(1-x)\"\nd = \"1\"\n";
        let s = average_stats(&parse_model(src).unwrap()).unwrap();
        assert!((s.big_f0() - 0.5).abs() < 1e-10);
        assert_eq!(s.f_sup.argument, Some(1.0));
        assert!((s.f_sup.at_one - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inf_of_decreasing_average_at_one() {
        let phi = PiecewiseFn::new(
            vec![0.5],
            vec![Expr::Const(2.2), Expr::Const(1.2)],
        )
        .unwrap();
        let e = average_extremum(&phi, Mode::Inf, &ScanOptions::default()).unwrap();
        assert!((e.value - 1.7).abs() < 1e-12);
        let oracle = dense_extremum(|x| 2.2 - (x - 0.5).max(0.0) / x, Mode::Inf);
        assert!((e.value - oracle).abs() < 1e-9);
    }

    #[test]
    fn interior_maximum_with_kink() {
        // ⨍ of x^2 - x on (0,1) is x^2/3 - x/2: inf -3/16 at 3/4.
        let e = average_extremum(&pw("x^2 - x"), Mode::Inf, &ScanOptions::default()).unwrap();
        assert!((e.value + 3.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn singular_kappa_gives_infinite_k0() {
        // κ/τ = (1-x)/x is not integrable at 0.
        let m = model("0", "1", "x*(1-x)", "1", 2.0);
        let psi = m.reduced().kappa_over_power().map(|e| Expr::div(e.clone(), Expr::Var));
        let e = average_extremum(&psi, Mode::Sup, &ScanOptions::default()).unwrap();
        assert_eq!(e.value, f64::INFINITY);
    }

    #[test]
    fn p_laplacian_limits() {
        // p = 3, d = 1, h = x(1-x): κ^2/ξ = ξ(1-ξ)^2 → ell_p = 0.
        let s = average_stats(&model("0", "1", "x*(1-x)", "1", 3.0)).unwrap();
        assert!(s.ell_p.abs() < 1e-6);
        // K0 = sup ⨍ (1-τ)τ^{1/2}
        let oracle = dense_extremum(
            |x| (2.0 / 3.0 * x.powf(1.5) - 2.0 / 5.0 * x.powf(2.5)) / x,
            Mode::Sup,
        );
        assert!((s.big_k0() - oracle).abs() < 1e-8, "{} {oracle}", s.big_k0());
    }

    #[test]
    fn overrides_win_and_are_cross_checked() {
        let src = "p = 2\nf = \"0\"\ng = \"1\"\nh = \"x*(1-x)\"\nd = \"1\"\n[limits]\nell_p = 1.5\n";
        let s = average_stats(&parse_model(src).unwrap()).unwrap();
        assert_eq!(s.ell_p, 1.5);
        assert_eq!(s.big_l_p, 1.5);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn sign_changing_g_integral() {
        let m = model("0", "1 - 3*x", "x*(1-x)", "1", 2.0);
        let s = average_stats(&m).unwrap();
        assert!((s.g_integral + 0.5).abs() < 1e-12);
        assert!(s.g_cumulative_min < 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn constants_are_their_own_averages(f in -5.0f64..5.0, g in 0.1f64..5.0) {
                let m = Model::new(
                    2.0,
                    PiecewiseFn::constant(f),
                    PiecewiseFn::constant(g),
                    pw("x*(1-x)"),
                    pw("1"),
                )
                .unwrap();
                let s = average_stats(&m).unwrap();
                prop_assert_eq!(s.big_f0(), f);
                prop_assert_eq!(s.big_g0(), g);
                prop_assert!(s.ell_p <= s.big_l_p);
            }

            #[test]
            fn average_matches_raw_integral(a in -3.0f64..3.0, b in -3.0f64..3.0, at in 0.1f64..0.9, xi in 0.01f64..1.0) {
                let phi = PiecewiseFn::new(
                    vec![at],
                    vec![Expr::parse(&format!("{a}*x^2 + 1")).unwrap(), Expr::Const(b)],
                )
                .unwrap();
                let q = QuadOptions::default();
                let avg = integral_average(&phi, xi, &q).unwrap();
                let raw = phi.integrate(0.0, xi, &q).unwrap();
                prop_assert!((avg.value * xi - raw.value).abs() <= 10.0 * (q.abs_tol + q.rel_tol * raw.value.abs()));
            }

            #[test]
            fn grid_refinement_within_error(a in -3.0f64..3.0, b in -3.0f64..3.0, at in 0.1f64..0.9) {
                let phi = PiecewiseFn::new(
                    vec![at],
                    vec![Expr::parse(&format!("{a}*x - x^2")).unwrap(), Expr::parse(&format!("{b}*(1-x)")).unwrap()],
                )
                .unwrap();
                let coarse = ScanOptions::default();
                let fine = ScanOptions { points_per_interval: 1024, ..coarse };
                for mode in [Mode::Inf, Mode::Sup] {
                    let c = average_extremum(&phi, mode, &coarse).unwrap();
                    let f = average_extremum(&phi, mode, &fine).unwrap();
                    prop_assert!((c.value - f.value).abs() <= c.error.max(f.error) + 1e-10,
                        "{:?} vs {:?}", c, f);
                }
            }

            #[test]
            fn sup_dominates_endpoint_limit(a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let phi = pw(&format!("{a} + {b}*x"));
                let s = average_extremum(&phi, Mode::Sup, &ScanOptions::default()).unwrap();
                let i = average_extremum(&phi, Mode::Inf, &ScanOptions::default()).unwrap();
                prop_assert!(s.value >= a - 1e-12);
                prop_assert!(i.value <= a + 1e-12);
            }
        }
    }
}
