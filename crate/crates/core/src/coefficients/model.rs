use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::limits::{self, LadderOptions};
use super::piecewise::{PiecewiseError, PiecewiseFn};
use crate::expr::Expr;
use crate::quadrature::QuadOptions;

/// Standing hypotheses on the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Hypothesis {
    /// f, g, h bounded and piecewise continuous on [0, 1].
    H1,
    /// d positive and finite on compact subsets of (0, 1).
    H2,
    /// h(0) = h(1) = 0 and h > 0 inside.
    H3,
    /// κ = d^{1/(p-1)} h integrable on (0, 1).
    H4,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::H1 => "(H1)",
            Hypothesis::H2 => "(H2)",
            Hypothesis::H3 => "(H3)",
            Hypothesis::H4 => "(H4)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    /// Abscissa witnessing a failure.
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("coefficient `{coefficient}` piece {piece} (line {line}, column {column}): {message}")]
    Expression {
        coefficient: String,
        piece: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("coefficient `{coefficient}`: {message}")]
    Layout { coefficient: String, message: String },
    #[error("coefficient `{coefficient}`: {source}")]
    Piecewise {
        coefficient: String,
        source: PiecewiseError,
    },
    #[error("exponent p must exceed 1, got {0}")]
    Exponent(f64),
    #[error("hypothesis {hypothesis} violated{}: {detail}", witness_suffix(*.witness))]
    Hypothesis {
        hypothesis: Hypothesis,
        witness: Option<f64>,
        detail: String,
        checks: Vec<HypothesisCheck>,
    },
}

fn witness_suffix(w: Option<f64>) -> String {
    w.map(|x| format!(" at ξ = {x}")).unwrap_or_default()
}

/// Analytic values that replace the numerically estimated limits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitOverrides {
    pub ell_p: Option<f64>,
    #[serde(rename = "L_p")]
    pub big_l_p: Option<f64>,
    pub f0: Option<f64>,
    pub g0: Option<f64>,
}

/// Reference data carried by a model file for regression tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub c_star: Option<f64>,
    pub exact: Option<String>,
}

/// The first-order problem ẏ = c g − f − κ / y^{1/(p−1)}, which only needs
/// f, g and κ.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub p: f64,
    pub f: PiecewiseFn,
    pub g: PiecewiseFn,
    pub kappa: PiecewiseFn,
}

impl ReducedProblem {
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Sorted union of every breakpoint of f, g and κ (jumps and switches).
    pub fn nodes(&self) -> Vec<f64> {
        merge_points([&self.f, &self.g, &self.kappa].iter().map(|c| c.breakpoints()))
    }

    /// Sorted union of the genuine discontinuities of f, g and κ.
    pub fn theta(&self) -> Vec<f64> {
        let d: Vec<Vec<f64>> = [&self.f, &self.g, &self.kappa]
            .iter()
            .map(|c| c.discontinuities())
            .collect();
        merge_points(d.iter().map(|v| v.as_slice()))
    }

    /// `c g − f` as a single piecewise function.
    pub fn drift(&self, c: f64) -> PiecewiseFn {
        PiecewiseFn::linear_combination(c, &self.g, -1.0, &self.f)
    }

    /// `κ(τ) / τ^{1/(p−1)}`.
    pub fn kappa_over_power(&self) -> PiecewiseFn {
        let q = 1.0 / (self.p - 1.0);
        self.kappa.map(|k| {
            let denom = if q == 1.0 {
                Expr::Var
            } else {
                Expr::pow(Expr::Var, Expr::Const(q))
            };
            Expr::div(k.clone(), denom)
        })
    }
}

pub(crate) fn merge_points<'a>(sets: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut all: Vec<f64> = sets.flat_map(|s| s.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Problem data `f u_x + g u_t = (d |u_x|^{p−2} u_x)_x + h` with derived κ.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    p: f64,
    f: PiecewiseFn,
    g: PiecewiseFn,
    h: PiecewiseFn,
    d: PiecewiseFn,
    kappa: PiecewiseFn,
    overrides: LimitOverrides,
    reference: Option<Reference>,
    checks: Vec<HypothesisCheck>,
}

impl Model {
    /// Assembles and validates a model; fails on the first violated
    /// hypothesis (all check results are attached to the error).
    pub fn new(
        p: f64,
        f: PiecewiseFn,
        g: PiecewiseFn,
        h: PiecewiseFn,
        d: PiecewiseFn,
    ) -> Result<Self, ModelError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(ModelError::Exponent(p));
        }
        let kappa = build_kappa(p, &d, &h);
        let mut m = Model {
            p,
            f,
            g,
            h,
            d,
            kappa,
            overrides: LimitOverrides::default(),
            reference: None,
            checks: Vec::new(),
        };
        m.checks = m.run_checks();
        if let Some(bad) = m.checks.iter().find(|c| !c.passed) {
            return Err(ModelError::Hypothesis {
                hypothesis: bad.hypothesis,
                witness: bad.witness,
                detail: bad.detail.clone(),
                checks: m.checks.clone(),
            });
        }
        Ok(m)
    }

    pub fn with_overrides(mut self, overrides: LimitOverrides) -> Self {
        self.overrides = overrides;
        self
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent p′ = p / (p − 1).
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn f(&self) -> &PiecewiseFn {
        &self.f
    }

    pub fn g(&self) -> &PiecewiseFn {
        &self.g
    }

    pub fn h(&self) -> &PiecewiseFn {
        &self.h
    }

    pub fn d(&self) -> &PiecewiseFn {
        &self.d
    }

    pub fn kappa(&self) -> &PiecewiseFn {
        &self.kappa
    }

    pub fn overrides(&self) -> &LimitOverrides {
        &self.overrides
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    pub fn checks(&self) -> &[HypothesisCheck] {
        &self.checks
    }

    /// Θ: sorted union of the discontinuity points of f, g, h, d.
    pub fn theta(&self) -> Vec<f64> {
        let d: Vec<Vec<f64>> = [&self.f, &self.g, &self.h, &self.d]
            .iter()
            .map(|c| c.discontinuities())
            .collect();
        merge_points(d.iter().map(|v| v.as_slice()))
    }

    /// Θ ∪ {0, 1}.
    pub fn theta_star(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        t.extend(self.theta());
        t.push(1.0);
        t
    }

    /// Every point where some coefficient switches expression.
    pub fn nodes(&self) -> Vec<f64> {
        merge_points(
            [&self.f, &self.g, &self.h, &self.d]
                .iter()
                .map(|c| c.breakpoints()),
        )
    }

    pub fn reduced(&self) -> ReducedProblem {
        ReducedProblem {
            p: self.p,
            f: self.f.clone(),
            g: self.g.clone(),
            kappa: self.kappa.clone(),
        }
    }

    /// The sign-flipped model (g → −g). Speeds of the two models correspond
    /// through c → −c.
    pub fn dual(&self) -> Model {
        let mut m = self.clone();
        m.g = self.g.map(|e| Expr::Neg(Box::new(e.clone())));
        m.overrides.g0 = self.overrides.g0.map(|v| -v);
        m
    }

    fn run_checks(&self) -> Vec<HypothesisCheck> {
        let grid = check_grid(&self.nodes());
        let mut out = Vec::new();

        // (H1)
        let mut h1 = pass(Hypothesis::H1);
        for (name, c) in [("f", &self.f), ("g", &self.g), ("h", &self.h)] {
            if let Some(fail) = bounded_check(name, c, &grid) {
                h1 = fail;
                break;
            }
        }
        out.push(h1);

        // (H2)
        let mut h2 = pass(Hypothesis::H2);
        for &x in &grid {
            match self.d.eval(x) {
                Ok(v) if v > 0.0 => {}
                Ok(v) => {
                    h2 = fail(Hypothesis::H2, x, format!("d({x}) = {v} is not positive"));
                    break;
                }
                Err(e) => {
                    h2 = fail(Hypothesis::H2, x, format!("d is not finite: {e}"));
                    break;
                }
            }
        }
        out.push(h2);

        // (H3)
        let mut h3 = pass(Hypothesis::H3);
        let ends = [
            (0.0, endpoint_value(&self.h, false)),
            (1.0, endpoint_value(&self.h, true)),
        ];
        for (x, v) in ends {
            match v {
                Some(v) if v.abs() <= 1e-8 => {}
                Some(v) => {
                    h3 = fail(Hypothesis::H3, x, format!("h({x}) = {v}, expected 0"));
                    break;
                }
                None => {
                    h3 = fail(Hypothesis::H3, x, format!("h has no limit at {x}"));
                    break;
                }
            }
        }
        if h3.passed {
            for &x in &grid {
                match self.h.eval(x) {
                    Ok(v) if v > 0.0 => {}
                    Ok(v) => {
                        h3 = fail(Hypothesis::H3, x, format!("h({x}) = {v} is not positive"));
                        break;
                    }
                    Err(e) => {
                        h3 = fail(Hypothesis::H3, x, format!("h is not finite: {e}"));
                        break;
                    }
                }
            }
        }
        out.push(h3);

        // (H4)
        let h4 = match self.kappa.integrate(0.0, 1.0, &QuadOptions::default()) {
            Ok(q) => HypothesisCheck {
                hypothesis: Hypothesis::H4,
                passed: true,
                witness: None,
                detail: format!("∫κ = {:.12e}", q.value),
            },
            Err(e) => HypothesisCheck {
                hypothesis: Hypothesis::H4,
                passed: false,
                witness: None,
                detail: format!("κ is not integrable: {e}"),
            },
        };
        out.push(h4);
        out
    }
}

fn build_kappa(p: f64, d: &PiecewiseFn, h: &PiecewiseFn) -> PiecewiseFn {
    let q = 1.0 / (p - 1.0);
    d.combine(h, |de, he| {
        let dq = if q == 1.0 {
            de.clone()
        } else {
            Expr::pow(de.clone(), Expr::Const(q))
        };
        Expr::mul(dq, he.clone())
    })
}

fn pass(h: Hypothesis) -> HypothesisCheck {
    HypothesisCheck {
        hypothesis: h,
        passed: true,
        witness: None,
        detail: String::new(),
    }
}

fn fail(h: Hypothesis, x: f64, detail: String) -> HypothesisCheck {
    HypothesisCheck {
        hypothesis: h,
        passed: false,
        witness: Some(x),
        detail,
    }
}

/// Interior sample points: a uniform grid per node interval plus geometric
/// ladders toward both ends.
fn check_grid(nodes: &[f64]) -> Vec<f64> {
    const PER_INTERVAL: usize = 256;
    let mut pts = Vec::new();
    let mut edges = vec![0.0];
    edges.extend_from_slice(nodes);
    edges.push(1.0);
    for w in edges.windows(2) {
        for k in 1..PER_INTERVAL {
            pts.push(w[0] + (w[1] - w[0]) * k as f64 / PER_INTERVAL as f64);
        }
    }
    for k in 0..=30 {
        let s = 1e-2 * 0.5f64.powi(k);
        pts.push(s);
        pts.push(1.0 - s);
    }
    pts.sort_by(f64::total_cmp);
    pts
}

fn endpoint_value(c: &PiecewiseFn, at_one: bool) -> Option<f64> {
    let direct = if at_one {
        c.value_at_one()
    } else {
        c.value_at_zero()
    };
    direct.or_else(|| {
        let opts = LadderOptions::default();
        let l = if at_one {
            limits::limit_at_one(|x| c.eval(x).ok(), &opts)
        } else {
            limits::limit_at_zero(|x| c.eval(x).ok(), &opts)
        }?;
        l.is_converged().then(|| l.liminf())
    })
}

/// Finite everywhere on the grid and no blow-up along the endpoint ladders.
fn bounded_check(name: &str, c: &PiecewiseFn, grid: &[f64]) -> Option<HypothesisCheck> {
    let mut bulk = 0.0f64;
    for &x in grid {
        match c.eval(x) {
            Ok(v) => {
                if x > 1e-2 && x < 1.0 - 1e-2 {
                    bulk = bulk.max(v.abs());
                }
            }
            Err(e) => {
                return Some(fail(Hypothesis::H1, x, format!("{name} is not finite: {e}")));
            }
        }
    }
    for &x in grid.iter().filter(|&&x| x <= 1e-2 || x >= 1.0 - 1e-2) {
        let v = c.eval(x).unwrap_or(f64::INFINITY).abs();
        if v > 1e3 * (1.0 + bulk) {
            return Some(fail(
                Hypothesis::H1,
                x,
                format!("{name} appears unbounded near the endpoint (|{name}({x})| = {v})"),
            ));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pw(s: &str) -> PiecewiseFn {
        PiecewiseFn::from_expr(Expr::parse(s).unwrap())
    }

    fn fisher() -> Model {
        Model::new(2.0, pw("0"), pw("1"), pw("x*(1-x)"), pw("1")).unwrap()
    }

    #[test]
    fn fisher_kappa_and_theta() {
        let m = fisher();
        assert!(m.theta().is_empty());
        for x in [0.1, 0.5, 0.9] {
            assert!((m.kappa().eval(x).unwrap() - x * (1.0 - x)).abs() < 1e-15);
        }
        assert!(m.checks().iter().all(|c| c.passed));
        assert_eq!(m.p_conj(), 2.0);
    }

    #[test]
    fn degenerate_kappa() {
        let m = Model::new(2.0, pw("0"), pw("1"), pw("x*(1-x)"), pw("x")).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!((m.kappa().eval(x).unwrap() - x * x * (1.0 - x)).abs() < 1e-15);
        }
    }

    #[test]
    fn p_laplacian_kappa() {
        let m = Model::new(3.0, pw("0"), pw("1"), pw("x*(1-x)"), pw("x")).unwrap();
        let x: f64 = 0.3;
        assert!((m.kappa().eval(x).unwrap() - x.sqrt() * x * (1.0 - x)).abs() < 1e-15);
        assert_eq!(m.p_conj(), 1.5);
    }

    #[test]
    fn h3_violation_names_hypothesis() {
        let err = Model::new(2.0, pw("0"), pw("1"), pw("x"), pw("1")).unwrap_err();
        match err {
            ModelError::Hypothesis {
                hypothesis,
                witness,
                ..
            } => {
                assert_eq!(hypothesis, Hypothesis::H3);
                assert_eq!(witness, Some(1.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_violations() {
        let e = Model::new(2.0, pw("0"), pw("1"), pw("x*(1-x)"), pw("x - 0.5")).unwrap_err();
        assert!(matches!(e, ModelError::Hypothesis { hypothesis: Hypothesis::H2, .. }), "{e}");
        let e = Model::new(2.0, pw("1/x"), pw("1"), pw("x*(1-x)"), pw("1")).unwrap_err();
        assert!(matches!(e, ModelError::Hypothesis { hypothesis: Hypothesis::H1, .. }), "{e}");
        // κ = x(1-x)/x^2 ~ 1/x is not integrable at 0.
        let e = Model::new(2.0, pw("0"), pw("1"), pw("x*(1-x)"), pw("1/x^2")).unwrap_err();
        assert!(matches!(e, ModelError::Hypothesis { hypothesis: Hypothesis::H4, .. }), "{e}");
        assert!(matches!(
            Model::new(1.0, pw("0"), pw("1"), pw("x*(1-x)"), pw("1")),
            Err(ModelError::Exponent(_))
        ));
    }

    #[test]
    fn singular_but_integrable_diffusivity() {
        // d = x^{-1/2}: κ = x^{1/2}(1-x) integrable, model accepted.
        assert!(Model::new(2.0, pw("0"), pw("1"), pw("x*(1-x)"), pw("x^(-0.5)")).is_ok());
    }

    #[test]
    fn theta_collects_all_jumps() {
        let f = PiecewiseFn::step(0.3, 0.0, 1.0);
        let h = PiecewiseFn::new(
            vec![0.5],
            vec![Expr::parse("x*(1-x)").unwrap(), Expr::parse("2*x*(1-x)").unwrap()],
        )
        .unwrap();
        let d = PiecewiseFn::new(
            vec![0.7],
            vec![Expr::parse("1").unwrap(), Expr::parse("2").unwrap()],
        )
        .unwrap();
        let m = Model::new(2.0, f, pw("1"), h, d).unwrap();
        assert_eq!(m.theta(), vec![0.3, 0.5, 0.7]);
        assert_eq!(m.theta_star(), vec![0.0, 0.3, 0.5, 0.7, 1.0]);
        assert_eq!(m.kappa().discontinuities(), vec![0.5, 0.7]);
    }

    #[test]
    fn dual_flips_g() {
        let m = fisher().dual();
        assert_eq!(m.g().eval(0.5).unwrap(), -1.0);
    }
}
