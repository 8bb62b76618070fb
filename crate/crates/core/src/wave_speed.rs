//! Existence certificates, bounds on the minimal speed c* and its location
//! by bisection over the solver's admissibility verdict.

use serde::Serialize;
use thiserror::Error;

use crate::bvp::{self, AdmissibilityResult, BvpError, BvpOptions};
use crate::coefficients::{average_extremum, AverageStats, Mode, Model, ScanOptions, StatsError};
use crate::serde_ext::{extended, extended_opt};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveSpeedError {
    #[error("g(0+) = {g0} is not positive; apply the sign flip g -> -g, c -> -c (Model::dual) first")]
    DualCase { g0: f64 },
    #[error(
        "refusing bisection: the admissible speeds need not form a half-line because \
         ∫_0^ξ g dips to {min:.6e}{} (the running integral of g must stay non-negative)",
        argmin.map(|x| format!(" at ξ = {x}")).unwrap_or_default()
    )]
    Refused { min: f64, argmin: Option<f64> },
    #[error("no admissible speed found up to {limit}")]
    NoAdmissible { limit: f64 },
    #[error("ell_p = +inf: no traveling wave exists for any speed")]
    EllPInfinite,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Bvp(#[from] BvpError),
}

/// Why no wave exists at the tested speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonExistence {
    EllPInfinite,
    SlopeCondition,
    NecessaryIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Exists,
    NotExists(NonExistence),
    Indeterminate,
}

/// One tested inequality `lhs ? rhs`, with the margin required to trust it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inequality {
    #[serde(serialize_with = "extended")]
    pub lhs: f64,
    #[serde(serialize_with = "extended")]
    pub rhs: f64,
    #[serde(serialize_with = "extended")]
    pub margin: f64,
}

impl Inequality {
    fn below(&self) -> bool {
        self.lhs < self.rhs - self.margin
    }

    fn above(&self) -> bool {
        self.lhs > self.rhs + self.margin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub c: f64,
    pub verdict: Verdict,
    /// `c g(0) − f(0)` against `p′[ℓ_p (p − 1)]^{1/p}`.
    pub slope: Option<Inequality>,
    /// `c ∫g` against `∫f`.
    pub integral: Inequality,
    /// `inf ⨍(c g − f)` against `p′(p − 1)^{1/p} K₀^{1/p′}`.
    pub existence: Option<Inequality>,
}

/// Relative floor for margins, so that exact ties never certify.
const TIE: f64 = 1e-12;

fn margin(err: f64, scale: f64) -> f64 {
    10.0 * err + TIE * scale.abs().max(1.0)
}

/// `p′[ℓ (p − 1)]^{1/p}`.
pub fn slope_threshold(p: f64, ell_p: f64) -> f64 {
    let pc = p / (p - 1.0);
    pc * (ell_p * (p - 1.0)).powf(1.0 / p)
}

fn ell_p_error(stats: &AverageStats, m: &Model) -> f64 {
    if m.overrides().ell_p.is_some() {
        0.0
    } else {
        stats
            .slope_limit
            .map_or(0.0, |l| l.uncertainty())
            .min(f64::MAX)
    }
}

pub fn certify(m: &Model, stats: &AverageStats, c: f64) -> Result<Certificate, WaveSpeedError> {
    let p = m.p();
    let integral = {
        let lhs = c * stats.g_integral;
        let rhs = stats.f_integral;
        Inequality {
            lhs,
            rhs,
            margin: margin(0.0, lhs.abs().max(rhs.abs())),
        }
    };
    if stats.ell_p == f64::INFINITY {
        return Ok(Certificate {
            c,
            verdict: Verdict::NotExists(NonExistence::EllPInfinite),
            slope: None,
            integral,
            existence: None,
        });
    }

    let slope = {
        let lhs = c * stats.g0 - stats.f0;
        let rhs = slope_threshold(p, stats.ell_p);
        // d rhs / d ℓ = rhs / (p ℓ)
        let err = if stats.ell_p > 0.0 {
            rhs / (p * stats.ell_p) * ell_p_error(stats, m)
        } else {
            0.0
        };
        Inequality {
            lhs,
            rhs,
            margin: margin(err, rhs),
        }
    };

    let existence = if stats.big_l_p.is_finite() && stats.big_k0().is_finite() {
        let check = bvp::integral_lower_solution_check(m, c, stats)?;
        let k0 = stats.big_k0();
        let thr_err = if k0 > 0.0 {
            check.threshold / (m.p_conj() * k0) * stats.kappa_sup.error
        } else {
            0.0
        };
        Some(Inequality {
            lhs: check.beta,
            rhs: check.threshold,
            margin: margin(check.error + thr_err, check.threshold),
        })
    } else {
        None
    };

    let verdict = if slope.below() {
        Verdict::NotExists(NonExistence::SlopeCondition)
    } else if integral.lhs < integral.rhs - integral.margin {
        Verdict::NotExists(NonExistence::NecessaryIntegral)
    } else if existence.is_some_and(|e| e.above()) {
        Verdict::Exists
    } else {
        Verdict::Indeterminate
    };
    Ok(Certificate {
        c,
        verdict,
        slope: Some(slope),
        integral,
        existence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assumptions {
    pub g0_positive: bool,
    pub big_g0_positive: bool,
    /// ∫₀^ξ g ≥ 0 for all ξ.
    pub running_integral_nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedBounds {
    #[serde(serialize_with = "extended")]
    pub lower: f64,
    /// `+∞` when K₀ is infinite.
    #[serde(serialize_with = "extended")]
    pub upper: f64,
    #[serde(serialize_with = "extended")]
    pub simple_lower: f64,
    /// `None` unless G₀ > 0.
    #[serde(serialize_with = "extended_opt")]
    pub simple_upper: Option<f64>,
    pub assumptions: Assumptions,
    pub notes: Vec<String>,
}

/// Running-integral tolerance for the half-line condition on g.
const G_INTEGRAL_TOL: f64 = 1e-12;

fn assumptions(stats: &AverageStats) -> Assumptions {
    Assumptions {
        g0_positive: stats.g0 > 0.0,
        big_g0_positive: stats.big_g0() > 0.0,
        running_integral_nonnegative: stats.g_cumulative_min >= -G_INTEGRAL_TOL,
    }
}

/// inf ⨍₀^ξ (c g − f).
fn beta(m: &Model, c: f64) -> Result<f64, StatsError> {
    Ok(average_extremum(&m.reduced().drift(c), Mode::Inf, &ScanOptions::default())?.value)
}

pub fn bounds_c_star(m: &Model, stats: &AverageStats) -> Result<SpeedBounds, WaveSpeedError> {
    let p = m.p();
    if !(stats.g0 > 0.0) {
        return Err(WaveSpeedError::DualCase { g0: stats.g0 });
    }
    if stats.ell_p == f64::INFINITY {
        return Err(WaveSpeedError::EllPInfinite);
    }
    let assumptions = assumptions(stats);
    let mut notes = Vec::new();
    let lower = (stats.f0 + slope_threshold(p, stats.ell_p)) / stats.g0;
    let simple_lower = stats.f0 / stats.g0 + slope_threshold(p, stats.ell_p) / stats.g0;
    let k0 = stats.big_k0();
    let thr = bvp::lower_solution_threshold(p, k0);
    let simple_upper = (assumptions.big_g0_positive && k0.is_finite())
        .then(|| (stats.big_f0() + thr) / stats.big_g0());
    if !assumptions.big_g0_positive {
        notes.push("G0 <= 0: closed-form bounds unavailable".into());
    }
    if !assumptions.running_integral_nonnegative {
        notes.push("running integral of g changes sign: upper bound may not be monotone in c".into());
    }

    let upper = if k0.is_finite() {
        upper_root(m, thr, simple_upper.unwrap_or(lower.max(0.0) + 1.0))?
    } else {
        notes.push("K0 = +inf: upper bound unavailable".into());
        f64::INFINITY
    };
    Ok(SpeedBounds {
        lower,
        upper,
        simple_lower,
        simple_upper,
        assumptions,
        notes,
    })
}

/// Smallest c with inf ⨍(c g − f) ≥ thr, by doubling then bisection.
fn upper_root(m: &Model, thr: f64, seed: f64) -> Result<f64, WaveSpeedError> {
    const ITERS: usize = 60;
    let ok = |c: f64| beta(m, c).map(|b| b >= thr);
    let mut hi = seed;
    let mut step = seed.abs().max(1.0);
    let mut found = false;
    for _ in 0..ITERS {
        if ok(hi)? {
            found = true;
            break;
        }
        hi += step;
        step *= 2.0;
    }
    if !found {
        return Ok(f64::INFINITY);
    }
    let mut lo = hi - seed.abs().max(1.0);
    let mut step = seed.abs().max(1.0);
    found = false;
    for _ in 0..ITERS {
        if !ok(lo)? {
            found = true;
            break;
        }
        hi = lo;
        lo -= step;
        step *= 2.0;
    }
    if !found {
        return Ok(hi);
    }
    for _ in 0..ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One solver evaluation during the c* search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketStep {
    pub c: f64,
    pub verdict: String,
    pub c_lo: f64,
    pub c_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedSearch {
    pub c_star: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub tol: f64,
    pub bounds: SpeedBounds,
    /// The smallest c that gave a strict admissible verdict.
    pub lowest_admissible: f64,
    pub history: Vec<BracketStep>,
    pub warnings: Vec<String>,
}

pub fn find_c_star(m: &Model, stats: &AverageStats, tol: f64) -> Result<SpeedSearch, WaveSpeedError> {
    find_c_star_with(m, stats, tol, &BvpOptions::default())
}

enum Probe {
    Admissible,
    Inadmissible,
    Indeterminate(String),
}

pub fn find_c_star_with(
    m: &Model,
    stats: &AverageStats,
    tol: f64,
    opts: &BvpOptions,
) -> Result<SpeedSearch, WaveSpeedError> {
    if !(stats.g0 > 0.0) {
        return Err(WaveSpeedError::DualCase { g0: stats.g0 });
    }
    if stats.g_cumulative_min < -G_INTEGRAL_TOL {
        return Err(WaveSpeedError::Refused {
            min: stats.g_cumulative_min,
            argmin: stats.g_cumulative_argmin,
        });
    }
    let bounds = bounds_c_star(m, stats)?;
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let probe = |c: f64| -> Probe {
        match bvp::solve_bvp(m, c, opts) {
            Ok(AdmissibilityResult::Admissible(_)) => Probe::Admissible,
            Ok(AdmissibilityResult::Inadmissible { .. }) => Probe::Inadmissible,
            Ok(AdmissibilityResult::Indeterminate { diagnostic, .. }) => Probe::Indeterminate(diagnostic),
            Err(e) => Probe::Indeterminate(e.to_string()),
        }
    };
    let label = |p: &Probe| match p {
        Probe::Admissible => "admissible".to_string(),
        Probe::Inadmissible => "inadmissible".to_string(),
        Probe::Indeterminate(d) => format!("indeterminate: {d}"),
    };

    // Top of the bracket: a strictly admissible speed.
    let base = if bounds.upper.is_finite() {
        bounds.upper
    } else {
        bounds.lower.max(0.0) + 1.0
    };
    let limit = 1024.0 * (base.abs() + 1.0);
    let mut c_hi = base + tol.max(1e-3 * base.abs());
    let mut step = c_hi.abs().max(1.0);
    loop {
        let r = probe(c_hi);
        history.push(BracketStep {
            c: c_hi,
            verdict: label(&r),
            c_lo: f64::NEG_INFINITY,
            c_hi,
        });
        if matches!(r, Probe::Admissible) {
            break;
        }
        c_hi += step;
        step *= 2.0;
        if c_hi > limit {
            return Err(WaveSpeedError::NoAdmissible { limit });
        }
    }
    let mut lowest_admissible = c_hi;

    // Bottom: an inadmissible speed.
    let mut c_lo = bounds.lower.min(c_hi) - 0.25 * tol;
    let mut step = tol.max(c_lo.abs() * 1e-3);
    for _ in 0..64 {
        let r = probe(c_lo);
        history.push(BracketStep {
            c: c_lo,
            verdict: label(&r),
            c_lo,
            c_hi,
        });
        match r {
            Probe::Inadmissible => break,
            Probe::Admissible => {
                warnings.push(format!("admissible verdict at c = {c_lo} below the lower bound"));
                c_hi = c_lo;
                lowest_admissible = c_lo;
            }
            Probe::Indeterminate(_) => {}
        }
        c_lo -= step;
        step *= 2.0;
    }

    while c_hi - c_lo >= tol {
        let mid = 0.5 * (c_lo + c_hi);
        let r = probe(mid);
        match &r {
            Probe::Admissible => {
                c_hi = mid;
                lowest_admissible = mid;
            }
            Probe::Inadmissible => c_lo = mid,
            Probe::Indeterminate(d) => {
                warnings.push(format!("indeterminate at c = {mid}, treated as admissible: {d}"));
                c_hi = mid;
            }
        }
        history.push(BracketStep {
            c: mid,
            verdict: label(&r),
            c_lo,
            c_hi,
        });
    }
    Ok(SpeedSearch {
        c_star: 0.5 * (c_lo + c_hi),
        c_lo,
        c_hi,
        tol,
        bounds,
        lowest_admissible,
        history,
        warnings,
    })
}
