//! One-sided limits at an endpoint, estimated from values on a geometric
//! ladder `ξ_k = ξ₀ · 2^{-k}`.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderOptions {
    pub start: f64,
    pub halvings: usize,
    pub rel_tol: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions {
            start: 1e-2,
            halvings: 12,
            rel_tol: 1e-6,
        }
    }
}

impl LadderOptions {
    /// Abscissae `ξ₀ · 2^{-k}` for `k = 0..=halvings`, decreasing.
    pub fn points(&self) -> Vec<f64> {
        (0..=self.halvings)
            .map(|k| self.start * 0.5f64.powi(k as i32))
            .collect()
    }
}

/// Outcome of a ladder extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LadderLimit {
    /// Last extrapolants agree; `spread` is their disagreement.
    Converged { value: f64, spread: f64 },
    /// Monotone with non-vanishing increments.
    Diverges { positive: bool },
    /// No limit detected; `lo`/`hi` bracket the tail values.
    Oscillates { lo: f64, hi: f64 },
}

impl LadderLimit {
    /// Lower limit (liminf) as an extended real.
    pub fn liminf(&self) -> f64 {
        match *self {
            LadderLimit::Converged { value, .. } => value,
            LadderLimit::Diverges { positive } => signed_inf(positive),
            LadderLimit::Oscillates { lo, .. } => lo,
        }
    }

    /// Upper limit (limsup) as an extended real.
    pub fn limsup(&self) -> f64 {
        match *self {
            LadderLimit::Converged { value, .. } => value,
            LadderLimit::Diverges { positive } => signed_inf(positive),
            LadderLimit::Oscillates { hi, .. } => hi,
        }
    }

    pub fn uncertainty(&self) -> f64 {
        match *self {
            LadderLimit::Converged { spread, .. } => spread,
            LadderLimit::Diverges { .. } => f64::INFINITY,
            LadderLimit::Oscillates { lo, hi } => hi - lo,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, LadderLimit::Converged { .. })
    }
}

fn signed_inf(positive: bool) -> f64 {
    if positive {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Aitken Δ² estimate from three consecutive terms; falls back to the last
/// term when the second difference vanishes.
fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let d1 = b - a;
    let d2 = c - b;
    let dd = d2 - d1;
    if dd == 0.0 || !dd.is_finite() {
        return c;
    }
    let est = c - d2 * d2 / dd;
    if est.is_finite() {
        est
    } else {
        c
    }
}

/// Extrapolates the limit of a sequence sampled on a geometric ladder.
pub fn extrapolate(values: &[f64], rel_tol: f64) -> LadderLimit {
    let n = values.len();
    assert!(n >= 5, "ladder needs at least five points");
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tail = &values[n - 5..];
    let diffs: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();

    if diffs.iter().all(|d| d.abs() <= rel_tol * scale * 1e-3) {
        let v = values[n - 1];
        return LadderLimit::Converged { value: v, spread: 0.0 };
    }

    // Increments that do not shrink and keep their sign signal divergence.
    let same_sign = diffs.iter().all(|d| *d > 0.0) || diffs.iter().all(|d| *d < 0.0);
    let non_shrinking = diffs
        .windows(2)
        .all(|w| w[1].abs() >= 0.95 * w[0].abs());
    if same_sign && non_shrinking {
        return LadderLimit::Diverges {
            positive: diffs[0] > 0.0,
        };
    }

    let est: Vec<f64> = tail.windows(3).map(|w| aitken(w[0], w[1], w[2])).collect();
    let last3 = &est[est.len() - 3..];
    let lo = last3.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = last3.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let value = last3[2];
    let tol = rel_tol * value.abs().max(scale);
    let monotone_increments = same_sign
        && diffs
            .windows(2)
            .all(|w| w[1].abs() <= w[0].abs() * (1.0 + 1e-12));
    if hi - lo <= tol || (monotone_increments && diffs[3].abs() <= tol) {
        return LadderLimit::Converged {
            value,
            spread: (hi - lo).max(diffs[3].abs().min(tol)),
        };
    }
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    LadderLimit::Oscillates { lo, hi }
}

/// Samples `f` on the ladder and extrapolates; evaluation failures (`None`)
/// are skipped as long as enough points remain.
pub fn limit_at_zero(mut f: impl FnMut(f64) -> Option<f64>, opts: &LadderOptions) -> Option<LadderLimit> {
    let values: Vec<f64> = opts.points().into_iter().filter_map(&mut f).collect();
    if values.len() < 5 {
        return None;
    }
    Some(extrapolate(&values, opts.rel_tol))
}

/// Same ladder mirrored toward 1: samples `f(1 - ξ_k)`.
pub fn limit_at_one(mut f: impl FnMut(f64) -> Option<f64>, opts: &LadderOptions) -> Option<LadderLimit> {
    limit_at_zero(|s| f(1.0 - s), opts)
}
