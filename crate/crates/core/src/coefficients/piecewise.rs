use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::quadrature::{self, Quad, QuadError, QuadOptions};

/// Default tolerance below which a difference between adjacent pieces is not
/// considered a discontinuity.
pub const JUMP_TOL: f64 = 1e-9;

/// How two adjacent pieces meet at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Join {
    /// The one-sided limits differ by more than the jump tolerance.
    Jump,
    /// The expression changes but the function is continuous there (a kink,
    /// or a point carried over from another coefficient).
    Switch,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PiecewiseError {
    #[error("breakpoints must be strictly increasing inside (0, 1), got {0:?}")]
    BadBreakpoints(Vec<f64>),
    #[error("{pieces} pieces given for {breakpoints} breakpoints")]
    PieceCount { pieces: usize, breakpoints: usize },
    #[error("piece {piece} on [{lo}, {hi}]: {source}")]
    NonFinite {
        piece: usize,
        lo: f64,
        hi: f64,
        source: EvalError,
    },
}

/// A piecewise-continuous function on (0, 1).
///
/// Piece `i` lives on `(γ_i, γ_{i+1})` with `γ_0 = 0` and `γ_{n+1} = 1`, and
/// its expression is continuous on the closure of that interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFn {
    breakpoints: Vec<f64>,
    joins: Vec<Join>,
    pieces: Vec<Expr>,
    limit_at_zero: Option<f64>,
    limit_at_one: Option<f64>,
}

/// Number of interior samples per piece used by the continuity checks.
const CHECK_SAMPLES: usize = 64;

impl PiecewiseFn {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Expr>) -> Result<Self, PiecewiseError> {
        Self::with_jump_tol(breakpoints, pieces, JUMP_TOL)
    }

    pub fn with_jump_tol(
        breakpoints: Vec<f64>,
        pieces: Vec<Expr>,
        jump_tol: f64,
    ) -> Result<Self, PiecewiseError> {
        let increasing = breakpoints.windows(2).all(|w| w[0] < w[1]);
        let inside = breakpoints.iter().all(|&b| b > 0.0 && b < 1.0);
        if !increasing || !inside {
            return Err(PiecewiseError::BadBreakpoints(breakpoints));
        }
        if pieces.len() != breakpoints.len() + 1 {
            return Err(PiecewiseError::PieceCount {
                pieces: pieces.len(),
                breakpoints: breakpoints.len(),
            });
        }
        let mut f = PiecewiseFn {
            joins: vec![Join::Jump; breakpoints.len()],
            breakpoints,
            pieces,
            limit_at_zero: None,
            limit_at_one: None,
        };
        f.check_pieces()?;
        f.classify_joins(jump_tol);
        Ok(f)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_expr(Expr::Const(c))
    }

    pub fn from_expr(e: Expr) -> Self {
        PiecewiseFn {
            breakpoints: Vec::new(),
            joins: Vec::new(),
            pieces: vec![e],
            limit_at_zero: None,
            limit_at_one: None,
        }
    }

    /// Heaviside step `lo` on (0, at) and `hi` on (at, 1).
    pub fn step(at: f64, lo: f64, hi: f64) -> Self {
        Self::new(vec![at], vec![Expr::Const(lo), Expr::Const(hi)])
            .expect("step breakpoint inside (0, 1)")
    }

    pub fn with_endpoint_limits(mut self, at_zero: Option<f64>, at_one: Option<f64>) -> Self {
        self.limit_at_zero = at_zero;
        self.limit_at_one = at_one;
        self
    }

    fn check_pieces(&self) -> Result<(), PiecewiseError> {
        for (i, e) in self.pieces.iter().enumerate() {
            let (lo, hi) = self.piece_interval(i);
            for k in 0..=CHECK_SAMPLES {
                let x = lo + (hi - lo) * k as f64 / CHECK_SAMPLES as f64;
                // The outer ends 0 and 1 may legitimately be singular.
                if (k == 0 && lo == 0.0) || (k == CHECK_SAMPLES && hi == 1.0) {
                    continue;
                }
                if let Err(source) = e.eval(x) {
                    return Err(PiecewiseError::NonFinite {
                        piece: i,
                        lo,
                        hi,
                        source,
                    });
                }
            }
        }
        Ok(())
    }

    fn classify_joins(&mut self, jump_tol: f64) {
        for (j, &b) in self.breakpoints.iter().enumerate() {
            let l = self.pieces[j].eval(b);
            let r = self.pieces[j + 1].eval(b);
            self.joins[j] = match (l, r) {
                (Ok(l), Ok(r)) if (l - r).abs() <= jump_tol => Join::Switch,
                _ => Join::Jump,
            };
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn joins(&self) -> &[Join] {
        &self.joins
    }

    pub fn pieces(&self) -> &[Expr] {
        &self.pieces
    }

    /// Points where the function genuinely jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        self.breakpoints
            .iter()
            .zip(&self.joins)
            .filter(|(_, j)| **j == Join::Jump)
            .map(|(b, _)| *b)
            .collect()
    }

    pub fn is_continuous(&self) -> bool {
        self.joins.iter().all(|j| *j == Join::Switch)
    }

    pub fn piece_interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { 0.0 } else { self.breakpoints[i - 1] };
        let hi = if i == self.breakpoints.len() {
            1.0
        } else {
            self.breakpoints[i]
        };
        (lo, hi)
    }

    /// Index of the piece whose open interval contains `x`; at a breakpoint
    /// the piece to the right is returned.
    pub fn piece_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    /// Index of the piece to the left of `x` (differs from [`piece_index`]
    /// only at breakpoints).
    ///
    /// [`piece_index`]: PiecewiseFn::piece_index
    pub fn piece_index_left(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < x)
    }

    /// The piece used on an open interval that contains no breakpoint.
    pub fn piece_on(&self, lo: f64, hi: f64) -> &Expr {
        &self.pieces[self.piece_index(0.5 * (lo + hi))]
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        self.pieces[self.piece_index(x)].eval(x)
    }

    pub fn eval_left(&self, x: f64) -> Result<f64, EvalError> {
        self.pieces[self.piece_index_left(x)].eval(x)
    }

    pub fn eval_right(&self, x: f64) -> Result<f64, EvalError> {
        self.eval(x)
    }

    /// One-sided limit at 0⁺: the user-supplied value if any, else the first
    /// piece evaluated at 0, else `None` (caller falls back to a ladder).
    pub fn value_at_zero(&self) -> Option<f64> {
        self.limit_at_zero
            .or_else(|| self.pieces[0].eval(0.0).ok())
    }

    pub fn value_at_one(&self) -> Option<f64> {
        self.limit_at_one
            .or_else(|| self.pieces[self.pieces.len() - 1].eval(1.0).ok())
    }

    pub fn supplied_limits(&self) -> (Option<f64>, Option<f64>) {
        (self.limit_at_zero, self.limit_at_one)
    }

    /// Integral over `[a, b] ⊂ [0, 1]`, one panel set per piece so that no
    /// quadrature panel straddles a breakpoint.
    pub fn integrate(&self, a: f64, b: f64, opts: &QuadOptions) -> Result<Quad, QuadError> {
        let (a, b, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut total = Quad {
            value: 0.0,
            error: 0.0,
            panels: 0,
        };
        let first = self.piece_index(a);
        let last = self.piece_index_left(b);
        for i in first..=last.max(first) {
            let (lo, hi) = self.piece_interval(i);
            let (lo, hi) = (lo.max(a), hi.min(b));
            if hi <= lo {
                continue;
            }
            let e = &self.pieces[i];
            let q = quadrature::integrate(|x| e.eval(x).unwrap_or(f64::NAN), lo, hi, opts)?;
            total.value += q.value;
            total.error += q.error;
            total.panels += q.panels;
        }
        total.value *= sign;
        Ok(total)
    }

    /// `(1/ξ) ∫₀^ξ φ`.
    pub fn average(&self, xi: f64, opts: &QuadOptions) -> Result<Quad, QuadError> {
        let q = self.integrate(0.0, xi, opts)?;
        Ok(Quad {
            value: q.value / xi,
            error: q.error / xi,
            panels: q.panels,
        })
    }

    /// Pointwise combination of two piecewise functions on the merged
    /// breakpoint set. Endpoint limits are dropped.
    pub fn combine(&self, other: &PiecewiseFn, op: impl Fn(&Expr, &Expr) -> Expr) -> PiecewiseFn {
        let mut bps: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .copied()
            .collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let mut pieces = Vec::with_capacity(bps.len() + 1);
        for i in 0..=bps.len() {
            let lo = if i == 0 { 0.0 } else { bps[i - 1] };
            let hi = if i == bps.len() { 1.0 } else { bps[i] };
            pieces.push(op(self.piece_on(lo, hi), other.piece_on(lo, hi)));
        }
        let mut out = PiecewiseFn {
            joins: vec![Join::Jump; bps.len()],
            breakpoints: bps,
            pieces,
            limit_at_zero: None,
            limit_at_one: None,
        };
        out.classify_joins(JUMP_TOL);
        out
    }

    /// Applies `op` to every piece expression.
    pub fn map(&self, op: impl Fn(&Expr) -> Expr) -> PiecewiseFn {
        let mut out = PiecewiseFn {
            breakpoints: self.breakpoints.clone(),
            joins: self.joins.clone(),
            pieces: self.pieces.iter().map(op).collect(),
            limit_at_zero: None,
            limit_at_one: None,
        };
        out.classify_joins(JUMP_TOL);
        out
    }

    /// `α φ + β χ`.
    pub fn linear_combination(alpha: f64, phi: &PiecewiseFn, beta: f64, chi: &PiecewiseFn) -> PiecewiseFn {
        phi.combine(chi, |a, b| {
            Expr::add(
                Expr::mul(Expr::Const(alpha), a.clone()),
                Expr::mul(Expr::Const(beta), b.clone()),
            )
        })
    }

    /// Builds a function from explicit pieces where the caller already knows
    /// every breakpoint is continuous (e.g. regularized coefficients).
    pub(crate) fn from_parts_unchecked(breakpoints: Vec<f64>, pieces: Vec<Expr>) -> PiecewiseFn {
        let mut out = PiecewiseFn {
            joins: vec![Join::Jump; breakpoints.len()],
            breakpoints,
            pieces,
            limit_at_zero: None,
            limit_at_one: None,
        };
        out.classify_joins(JUMP_TOL);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(matches!(
            PiecewiseFn::new(vec![0.5, 0.4], vec![e("1"), e("2"), e("3")]),
            Err(PiecewiseError::BadBreakpoints(_))
        ));
        assert!(matches!(
            PiecewiseFn::new(vec![1.0], vec![e("1"), e("2")]),
            Err(PiecewiseError::BadBreakpoints(_))
        ));
        assert!(matches!(
            PiecewiseFn::new(vec![0.5], vec![e("1")]),
            Err(PiecewiseError::PieceCount { .. })
        ));
    }

    #[test]
    fn non_finite_piece_is_rejected() {
        let r = PiecewiseFn::new(vec![0.5], vec![e("1"), e("1 / (x - 0.75)")]);
        assert!(matches!(r, Err(PiecewiseError::NonFinite { piece: 1, .. })), "{r:?}");
        // Singular at the outer end is fine.
        assert!(PiecewiseFn::new(vec![], vec![e("1 / x")]).is_ok());
    }

    #[test]
    fn join_classification() {
        let tent = PiecewiseFn::new(vec![0.5], vec![e("x"), e("1 - x")]).unwrap();
        assert_eq!(tent.joins(), &[Join::Switch]);
        assert!(tent.discontinuities().is_empty());
        let step = PiecewiseFn::step(0.5, 0.0, 1.0);
        assert_eq!(step.joins(), &[Join::Jump]);
        assert_eq!(step.discontinuities(), vec![0.5]);
    }

    #[test]
    fn one_sided_evaluation() {
        let step = PiecewiseFn::step(0.5, 0.0, 1.0);
        assert_eq!(step.eval_left(0.5).unwrap(), 0.0);
        assert_eq!(step.eval_right(0.5).unwrap(), 1.0);
        assert_eq!(step.eval(0.25).unwrap(), 0.0);
        assert_eq!(step.piece_on(0.4, 0.5), &Expr::Const(0.0));
    }

    #[test]
    fn averages() {
        let opts = QuadOptions::default();
        let psi = PiecewiseFn::from_expr(e("1 - x"));
        assert!((psi.average(1.0, &opts).unwrap().value - 0.5).abs() < 1e-14);
        let c = PiecewiseFn::constant(3.25);
        for xi in [1e-6, 0.3, 1.0] {
            assert!((c.average(xi, &opts).unwrap().value - 3.25).abs() < 1e-13);
        }
        let step = PiecewiseFn::step(0.5, 0.0, 1.0);
        assert!((step.average(1.0, &opts).unwrap().value - 0.5).abs() < 1e-14);
        assert!((step.average(0.75, &opts).unwrap().value - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn linear_combination_merges_breakpoints() {
        let a = PiecewiseFn::step(0.25, 0.0, 1.0);
        let b = PiecewiseFn::step(0.75, 2.0, 0.0);
        let c = PiecewiseFn::linear_combination(2.0, &a, -1.0, &b);
        assert_eq!(c.breakpoints(), &[0.25, 0.75]);
        assert_eq!(c.eval(0.1).unwrap(), -2.0);
        assert_eq!(c.eval(0.5).unwrap(), 0.0);
        assert_eq!(c.eval(0.9).unwrap(), 2.0);
    }
}
