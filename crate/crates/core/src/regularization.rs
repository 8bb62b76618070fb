//! Piecewise-linear smoothing of jumps and the behaviour of the average
//! functionals along a vanishing ladder of smoothing widths.

use serde::Serialize;
use thiserror::Error;

use crate::bvp::{self, BvpError, BvpOptions};
use crate::coefficients::{
    average_extremum, Mode, Model, ModelError, PiecewiseFn, ScanOptions, StatsError,
};
use crate::expr::{EvalError, Expr};
use crate::serde_ext::extended;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegularizationError {
    #[error("ε = {eps} is outside (0, ε̄) with ε̄ = {eps_bar}")]
    EpsOutOfRange { eps: f64, eps_bar: f64 },
    #[error("the point set omits the discontinuity at {0}")]
    MissingBreakpoint(f64),
    #[error("point set must lie strictly inside (0, 1), got {0:?}")]
    BadPointSet(Vec<f64>),
    #[error("cannot evaluate the function at {x}: {source}")]
    Evaluation { x: f64, source: EvalError },
    #[error("expected a function without jumps; it jumps at {0:?}")]
    NotContinuous(Vec<f64>),
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),
    #[error("speed {c} is not admissible for the original problem ({verdict})")]
    NotAdmissible { c: f64, verdict: &'static str },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bvp(#[from] BvpError),
}

/// Sorted copy of a point set with duplicates removed.
fn normalize(points: &[f64]) -> Result<Vec<f64>, RegularizationError> {
    let mut a: Vec<f64> = points.to_vec();
    a.sort_by(f64::total_cmp);
    a.dedup();
    if a.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(RegularizationError::BadPointSet(a));
    }
    Ok(a)
}

/// ε̄ = ½ min gap of A ∪ {0, 1}.
pub fn eps_bar(points: &[f64]) -> f64 {
    let mut all = vec![0.0];
    all.extend(points.iter().copied().filter(|x| *x > 0.0 && *x < 1.0));
    all.push(1.0);
    all.sort_by(f64::total_cmp);
    all.dedup();
    0.5 * all
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// ε̄/2^k for k = 1..=10.
pub fn default_ladder(eps_bar: f64) -> Vec<f64> {
    (1..=10).map(|k| eps_bar / f64::powi(2.0, k)).collect()
}

/// Replaces `phi` on each `[γ − ε, γ + ε]`, γ ∈ `points`, by the chord
/// between its values at the two ends.
pub fn eps_regularize(
    phi: &PiecewiseFn,
    points: &[f64],
    eps: f64,
) -> Result<PiecewiseFn, RegularizationError> {
    let a = normalize(points)?;
    let bar = eps_bar(&a);
    if !(eps > 0.0 && eps < bar) {
        return Err(RegularizationError::EpsOutOfRange { eps, eps_bar: bar });
    }
    for d in phi.discontinuities() {
        if !a.iter().any(|&g| (g - d).abs() <= 1e-12) {
            return Err(RegularizationError::MissingBreakpoint(d));
        }
    }
    if a.is_empty() {
        return Ok(phi.clone());
    }

    let eval = |x: f64| {
        phi.eval(x)
            .map_err(|source| RegularizationError::Evaluation { x, source })
    };
    let in_ramp = |x: f64| a.iter().any(|&g| x >= g - eps && x <= g + eps);

    let mut bps: Vec<f64> = a.iter().flat_map(|&g| [g - eps, g + eps]).collect();
    bps.extend(phi.breakpoints().iter().copied().filter(|&b| !in_ramp(b)));
    bps.sort_by(f64::total_cmp);
    bps.dedup();

    let mut pieces = Vec::with_capacity(bps.len() + 1);
    for i in 0..=bps.len() {
        let lo = if i == 0 { 0.0 } else { bps[i - 1] };
        let hi = if i == bps.len() { 1.0 } else { bps[i] };
        let mid = 0.5 * (lo + hi);
        match a.iter().find(|&&g| mid > g - eps && mid < g + eps) {
            Some(&g) => {
                let (l, r) = (eval(g - eps)?, eval(g + eps)?);
                pieces.push(Expr::affine(g - eps, l, (r - l) / (2.0 * eps)));
            }
            None => pieces.push(phi.piece_on(lo, hi).clone()),
        }
    }
    let (at_zero, at_one) = phi.supplied_limits();
    Ok(PiecewiseFn::from_parts_unchecked(bps, pieces).with_endpoint_limits(at_zero, at_one))
}

/// ψ̃: `min{ψ, (ψ(ε)/ε) x}` on [0, ε), ψ on [ε, 1 − ε] and
/// `min{ψ, (ψ(1−ε)/ε)(1 − x)}` on (1 − ε, 1]. Vanishes at both ends.
pub fn truncate_boundary(psi: &PiecewiseFn, eps: f64) -> Result<PiecewiseFn, RegularizationError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(RegularizationError::EpsOutOfRange { eps, eps_bar: 0.5 });
    }
    let jumps = psi.discontinuities();
    if !jumps.is_empty() {
        return Err(RegularizationError::NotContinuous(jumps));
    }
    let at = |x: f64| {
        psi.eval(x)
            .map_err(|source| RegularizationError::Evaluation { x, source })
    };
    let left = at(eps)? / eps;
    let right = at(1.0 - eps)? / eps;
    let mask = PiecewiseFn::from_parts_unchecked(
        vec![eps, 1.0 - eps],
        vec![
            Expr::affine(0.0, 0.0, left),
            Expr::Const(f64::INFINITY),
            Expr::affine(1.0, 0.0, -right),
        ],
    );
    let out = psi.combine(&mask, |p, m| match m {
        Expr::Const(v) if v.is_infinite() => p.clone(),
        _ => Expr::min(p.clone(), m.clone()),
    });
    Ok(out.with_endpoint_limits(Some(0.0), Some(0.0)))
}

/// Regularizes f, g, h and d of a model with respect to its jump set Θ.
/// Endpoint overrides carry over since nothing changes near 0 or 1.
pub fn regularize_model(m: &Model, eps: f64) -> Result<Model, RegularizationError> {
    let theta = m.theta();
    let reg = |phi: &PiecewiseFn| eps_regularize(phi, &theta, eps);
    let out = Model::new(m.p(), reg(m.f())?, reg(m.g())?, reg(m.h())?, reg(m.d())?)?;
    Ok(out.with_overrides(m.overrides().clone()))
}

/// Extremum of the running average along a ladder of regularizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaLimit {
    pub mode: Mode,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    /// The same extremum for the unregularized function.
    #[serde(serialize_with = "extended")]
    pub target: f64,
    pub gaps: Vec<f64>,
    pub final_gap: f64,
    pub tolerance: f64,
    pub converged: bool,
}

/// Final-gap tolerance used by [`gamma_limit_check`].
pub const GAMMA_TOL: f64 = 1e-3;

pub fn gamma_limit_check(
    phi: &PiecewiseFn,
    points: &[f64],
    ladder: &[f64],
    mode: Mode,
) -> Result<GammaLimit, RegularizationError> {
    gamma_limit_check_with(phi, points, ladder, mode, &ScanOptions::default(), GAMMA_TOL)
}

pub fn gamma_limit_check_with(
    phi: &PiecewiseFn,
    points: &[f64],
    ladder: &[f64],
    mode: Mode,
    opts: &ScanOptions,
    tolerance: f64,
) -> Result<GammaLimit, RegularizationError> {
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(RegularizationError::Hypothesis(
            "ε ladder must be strictly decreasing".into(),
        ));
    }
    let base = average_extremum(phi, mode, opts)?;
    let bad_limit = match (mode, base.at_zero) {
        (Mode::Inf, Some(l)) => l.liminf() == f64::INFINITY,
        (Mode::Sup, Some(l)) => !l.limsup().is_finite(),
        (_, None) => false,
    };
    if bad_limit || !base.value.is_finite() {
        return Err(RegularizationError::Hypothesis(format!(
            "the running average diverges at 0+ ({mode:?} mode, value {})",
            base.value
        )));
    }
    let target = base.value;
    let mut values = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let reg = eps_regularize(phi, points, eps)?;
        values.push(average_extremum(&reg, mode, opts)?.value);
    }
    let gaps: Vec<f64> = values.iter().map(|v| (v - target).abs()).collect();
    let final_gap = gaps.last().copied().unwrap_or(f64::NAN);
    Ok(GammaLimit {
        mode,
        epsilons: ladder.to_vec(),
        values,
        target,
        gaps,
        final_gap,
        tolerance,
        converged: final_gap < tolerance,
    })
}

/// The functionals entering the existence criterion along a common
/// ladder. The drift functional and the solution distances need a speed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationReport {
    pub c: Option<f64>,
    pub points: Vec<f64>,
    pub eps_bar: f64,
    pub epsilons: Vec<f64>,
    /// inf ⨍₀^ξ (c g − f) along the ladder.
    #[serde(rename = "inf_avg_H")]
    pub inf_avg_h: Option<GammaLimit>,
    /// sup ⨍₀^ξ κ/τ^{1/(p−1)} along the ladder.
    pub sup_avg_psi: GammaLimit,
    /// sup over `window` of |y_ε − y|.
    pub y_distance: Option<Vec<f64>>,
    pub window: (f64, f64),
}

pub fn regularization_report(
    m: &Model,
    c: Option<f64>,
    ladder: Option<&[f64]>,
    with_solutions: bool,
) -> Result<RegularizationReport, RegularizationError> {
    let points = m.theta();
    let bar = eps_bar(&points);
    let ladder = ladder.map_or_else(|| default_ladder(bar), <[f64]>::to_vec);
    let red = m.reduced();
    let inf_avg_h = c
        .map(|c| gamma_limit_check(&red.drift(c), &points, &ladder, Mode::Inf))
        .transpose()?;
    let sup_avg_psi = gamma_limit_check(&red.kappa_over_power(), &points, &ladder, Mode::Sup)?;
    let window = (0.1, 0.9);
    let y_distance = match c {
        Some(c) if with_solutions => Some(solution_distances(m, c, &ladder, window, &BvpOptions::default())?),
        _ => None,
    };
    Ok(RegularizationReport {
        c,
        points,
        eps_bar: bar,
        epsilons: ladder,
        inf_avg_h,
        sup_avg_psi,
        y_distance,
        window,
    })
}

/// sup over `window` of |y_ε − y| for each ε, where y solves the original
/// problem at `c`. Non-admissible solves give NaN entries.
pub fn solution_distances(
    m: &Model,
    c: f64,
    ladder: &[f64],
    window: (f64, f64),
    opts: &BvpOptions,
) -> Result<Vec<f64>, RegularizationError> {
    let base = bvp::solve_bvp(m, c, opts)?;
    let Some(y) = base.solution() else {
        return Err(RegularizationError::NotAdmissible { c, verdict: base.label() });
    };
    let mut out = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let reg = regularize_model(m, eps)?;
        let d = match bvp::solve_bvp(&reg, c, opts)?.solution() {
            Some(ye) => ye.sup_distance(y, window.0, window.1),
            None => f64::NAN,
        };
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::parse_model;
    use crate::quadrature::QuadOptions;
    use proptest::prelude::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn eps_bar_uses_endpoints() {
        assert_eq!(eps_bar(&[]), 0.5);
        assert_eq!(eps_bar(&[0.5]), 0.25);
        assert!((eps_bar(&[0.2, 0.5]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn heaviside_ramp_midpoint() {
        let h = PiecewiseFn::step(0.5, 0.0, 1.0);
        let r = eps_regularize(&h, &[0.5], 0.1).unwrap();
        assert!(r.is_continuous());
        assert!((r.eval(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((r.eval(0.45).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(r.eval(0.39).unwrap(), 0.0);
        assert_eq!(r.eval(0.61).unwrap(), 1.0);
        assert_eq!(r.breakpoints(), &[0.4, 0.6]);
    }

    #[test]
    fn continuous_function_is_untouched() {
        let phi = PiecewiseFn::from_expr(e("x*(1-x)"));
        for eps in [0.4, 0.1, 1e-3] {
            assert_eq!(eps_regularize(&phi, &[], eps).unwrap(), phi);
        }
    }

    #[test]
    fn regularize_errors() {
        let h = PiecewiseFn::step(0.5, 0.0, 1.0);
        assert!(matches!(
            eps_regularize(&h, &[0.5], 0.25),
            Err(RegularizationError::EpsOutOfRange { .. })
        ));
        assert!(matches!(
            eps_regularize(&h, &[0.3], 0.1),
            Err(RegularizationError::MissingBreakpoint(_))
        ));
    }

    #[test]
    fn truncation_of_constant() {
        let t = truncate_boundary(&PiecewiseFn::constant(1.0), 0.1).unwrap();
        assert!((t.eval(0.05).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(t.eval(0.5).unwrap(), 1.0);
        assert!((t.eval(0.95).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(t.value_at_zero(), Some(0.0));
        assert_eq!(t.value_at_one(), Some(0.0));
        assert!(t.eval(0.0).unwrap().abs() < 1e-15);
        assert!(t.eval(1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn truncation_rejects_jumps_and_bad_eps() {
        let h = PiecewiseFn::step(0.5, 0.0, 1.0);
        assert!(truncate_boundary(&h, 0.1).is_err());
        assert!(truncate_boundary(&PiecewiseFn::constant(1.0), 0.5).is_err());
    }

    #[test]
    fn gamma_limit_inf_example() {
        let phi = PiecewiseFn::step(0.5, 2.2, 1.2);
        let bar = eps_bar(&[0.5]);
        let r = gamma_limit_check(&phi, &[0.5], &default_ladder(bar), Mode::Inf).unwrap();
        // Dense scan of 2.2 − (ξ − 1/2)₊/ξ.
        let oracle = (1..=20000)
            .map(|i| {
                let x = i as f64 / 20000.0;
                2.2 - (x - 0.5).max(0.0) / x
            })
            .fold(f64::INFINITY, f64::min);
        assert!((r.target - oracle).abs() < 1e-9);
        assert!((r.target - 1.7).abs() < 1e-9);
        assert!(r.converged, "{r:?}");
    }

    #[test]
    fn gamma_limit_sup_step() {
        let phi = PiecewiseFn::step(0.5, 0.0, 1.0);
        let r = gamma_limit_check(&phi, &[0.5], &default_ladder(0.25), Mode::Sup).unwrap();
        assert!((r.target - 0.5).abs() < 1e-9);
        assert!(r.final_gap < 1e-3);
    }

    #[test]
    fn gamma_limit_continuous_is_exact() {
        let phi = PiecewiseFn::from_expr(e("1 - x"));
        let r = gamma_limit_check(&phi, &[], &default_ladder(0.5), Mode::Inf).unwrap();
        assert!(r.gaps.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gamma_limit_divergence_is_a_hypothesis_failure() {
        let phi = PiecewiseFn::from_expr(e("1/x"));
        let r = gamma_limit_check(&phi, &[], &default_ladder(0.5), Mode::Sup);
        assert!(matches!(r, Err(RegularizationError::Hypothesis(_))), "{r:?}");
    }

    #[test]
    fn l1_distance_estimate() {
        let phi = PiecewiseFn::new(vec![0.3, 0.7], vec![e("x"), e("2 + x*x"), e("-1")]).unwrap();
        let a = [0.3, 0.7];
        let kbar = 3.0;
        for eps in default_ladder(eps_bar(&a)) {
            let r = eps_regularize(&phi, &a, eps).unwrap();
            let diff = r.combine(&phi, |u, v| {
                Expr::Call(crate::expr::Func::Abs, Box::new(Expr::sub(u.clone(), v.clone())))
            });
            let l1 = diff.integrate(0.0, 1.0, &QuadOptions::default()).unwrap().value;
            assert!(l1 <= 4.0 * 2.0 * kbar * eps, "eps {eps}: {l1}");
        }
    }

    #[test]
    fn regularized_model_keeps_hypotheses() {
        let src = r#"
p = 2
f = [{ interval = [0, 0.5], expr = "0" }, { interval = [0.5, 1], expr = "1" }]
g = "1"
h = "x*(1-x)"
d = "1"
"#;
        let m = parse_model(src).unwrap();
        let r = regularize_model(&m, 0.01).unwrap();
        assert!(r.theta().is_empty());
        assert!((r.f().eval(0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    fn piece_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
    }

    proptest! {
        #[test]
        fn linearity(
            (a0, a1, b0, b1) in piece_strategy(),
            alpha in -2.0..2.0f64,
            beta in -2.0..2.0f64,
            k in 1u32..8,
        ) {
            let phi = PiecewiseFn::new(vec![0.4], vec![Expr::affine(0.0, a0, a1), Expr::Const(b0)]).unwrap();
            let chi = PiecewiseFn::new(vec![0.6], vec![Expr::Const(b1), Expr::affine(0.5, a1, b0)]).unwrap();
            let pts = [0.4, 0.6];
            let eps = eps_bar(&pts) / f64::powi(2.0, k as i32);
            let lhs = eps_regularize(&PiecewiseFn::linear_combination(alpha, &phi, beta, &chi), &pts, eps).unwrap();
            let r1 = eps_regularize(&phi, &pts, eps).unwrap();
            let r2 = eps_regularize(&chi, &pts, eps).unwrap();
            for i in 1..1000 {
                let x = i as f64 / 1000.0;
                let want = alpha * r1.eval(x).unwrap() + beta * r2.eval(x).unwrap();
                prop_assert!((lhs.eval(x).unwrap() - want).abs() < 1e-12);
            }
        }

        #[test]
        fn truncation_is_below(eps in 1e-3..0.49f64, s in 0.1..5.0f64) {
            let psi = PiecewiseFn::from_expr(Expr::affine(0.0, s, -0.5 * s));
            let t = truncate_boundary(&psi, eps).unwrap();
            for i in 0..=1000 {
                let x = i as f64 / 1000.0;
                prop_assert!(t.eval(x).unwrap() <= psi.eval(x).unwrap() + 1e-15);
            }
        }

        #[test]
        fn sup_inf_estimates_off_the_jumps(lo in -2.0..2.0f64, hi in -2.0..2.0f64, k in 3u32..10) {
            // I = [0.2, 0.35] and [0.55, 0.9] avoid the jump at 0.4.
            let phi = PiecewiseFn::step(0.4, lo, hi);
            let eps = eps_bar(&[0.4]) / f64::powi(2.0, k as i32);
            let r = eps_regularize(&phi, &[0.4], eps).unwrap();
            for (a, b) in [(0.2, 0.35), (0.55, 0.9)] {
                let xs: Vec<f64> = (0..=200).map(|i| a + (b - a) * i as f64 / 200.0).collect();
                let sup_r = xs.iter().map(|&x| r.eval(x).unwrap().abs()).fold(0.0, f64::max);
                let sup_p = xs.iter().map(|&x| phi.eval(x).unwrap().abs()).fold(0.0, f64::max);
                let inf_r = xs.iter().map(|&x| r.eval(x).unwrap()).fold(f64::INFINITY, f64::min);
                let inf_p = xs.iter().map(|&x| phi.eval(x).unwrap()).fold(f64::INFINITY, f64::min);
                prop_assert!(sup_r <= sup_p + 1e-15);
                prop_assert!(inf_r >= inf_p - 1e-15);
            }
        }

        #[test]
        fn uniform_convergence_off_the_jumps(lo in -2.0..2.0f64, hi in -2.0..2.0f64) {
            let phi = PiecewiseFn::step(0.5, lo, hi);
            let mut prev = f64::INFINITY;
            for eps in default_ladder(0.25) {
                let r = eps_regularize(&phi, &[0.5], eps).unwrap();
                // K = [0.1, 0.45] ∪ [0.55, 0.9]
                let d = (0..=400)
                    .map(|i| {
                        let x = 0.1 + 0.8 * i as f64 / 400.0;
                        if (x - 0.5).abs() < 0.05 { 0.0 } else { (r.eval(x).unwrap() - phi.eval(x).unwrap()).abs() }
                    })
                    .fold(0.0, f64::max);
                prop_assert!(d <= prev);
                prev = d;
            }
            prop_assert_eq!(prev, 0.0);
        }
    }
}
