//! TOML model files.
//!
//! ```toml
//! p = 2.0
//! f = "0"
//! g = "1"
//! h = [{ interval = [0.0, 0.5], expr = "x*(1-x)" },
//!      { interval = [0.5, 1.0], expr = "2*x*(1-x)" }]
//! d = "1"
//!
//! [limits]
//! ell_p = 1.0
//!
//! [reference]
//! c_star = 2.0
//! ```
//!
//! A coefficient is either a single expression string (one piece on [0, 1])
//! or a list of pieces whose intervals tile [0, 1].

use serde::Deserialize;

use super::model::{LimitOverrides, Model, ModelError, Reference};
use super::piecewise::PiecewiseFn;
use crate::expr::Expr;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    p: f64,
    f: RawCoefficient,
    g: RawCoefficient,
    h: RawCoefficient,
    d: RawCoefficient,
    #[serde(default)]
    limits: Option<LimitOverrides>,
    #[serde(default)]
    reference: Option<Reference>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawCoefficient {
    Single(String),
    Pieces(Vec<RawPiece>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    interval: [f64; 2],
    expr: String,
}

const INTERVAL_TOL: f64 = 1e-12;

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let raw: RawModel = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((0, 0));
        ModelError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let overrides = raw.limits.unwrap_or_default();
    let f = build(text, "f", &raw.f)?.with_endpoint_limits(overrides.f0, None);
    let g = build(text, "g", &raw.g)?.with_endpoint_limits(overrides.g0, None);
    let h = build(text, "h", &raw.h)?;
    let d = build(text, "d", &raw.d)?;
    let mut m = Model::new(raw.p, f, g, h, d)?.with_overrides(overrides);
    if let Some(r) = raw.reference {
        m = m.with_reference(r);
    }
    Ok(m)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Best-effort source position of an expression string: the first quoted
/// occurrence after the coefficient key.
fn locate(text: &str, coefficient: &str, expr: &str, column: usize) -> (usize, usize) {
    let key_pos = text
        .match_indices(coefficient)
        .find(|(i, _)| {
            let line_start = text[..*i].rfind('\n').map_or(0, |j| j + 1);
            text[line_start..*i].trim().is_empty()
                && text[i + coefficient.len()..].trim_start().starts_with('=')
        })
        .map_or(0, |(i, _)| i);
    for quote in ['"', '\''] {
        let needle = format!("{quote}{expr}{quote}");
        if let Some(i) = text[key_pos..].find(&needle) {
            let (line, col) = line_col(text, key_pos + i + 1);
            return (line, col + column.saturating_sub(1));
        }
    }
    let (line, col) = line_col(text, key_pos);
    (line, col)
}

fn build(text: &str, name: &str, raw: &RawCoefficient) -> Result<PiecewiseFn, ModelError> {
    let pieces: Vec<(f64, f64, &str)> = match raw {
        RawCoefficient::Single(s) => vec![(0.0, 1.0, s.as_str())],
        RawCoefficient::Pieces(list) => list
            .iter()
            .map(|p| (p.interval[0], p.interval[1], p.expr.as_str()))
            .collect(),
    };
    let layout = |message: String| ModelError::Layout {
        coefficient: name.to_string(),
        message,
    };
    if pieces.is_empty() {
        return Err(layout("no pieces given".into()));
    }
    if (pieces[0].0).abs() > INTERVAL_TOL {
        return Err(layout(format!("first interval starts at {}, not 0", pieces[0].0)));
    }
    let last = pieces[pieces.len() - 1].1;
    if (last - 1.0).abs() > INTERVAL_TOL {
        return Err(layout(format!("last interval ends at {last}, not 1")));
    }
    for (i, &(a, b, _)) in pieces.iter().enumerate() {
        if !(a < b) {
            return Err(layout(format!("interval {i} = [{a}, {b}] is empty")));
        }
        if i > 0 && (pieces[i - 1].1 - a).abs() > INTERVAL_TOL {
            return Err(layout(format!(
                "intervals {} and {i} are not contiguous ({} vs {a})",
                i - 1,
                pieces[i - 1].1
            )));
        }
    }
    let mut exprs = Vec::with_capacity(pieces.len());
    for (i, &(_, _, src)) in pieces.iter().enumerate() {
        let e = Expr::parse(src).map_err(|e| {
            let (line, column) = locate(text, name, src, e.column);
            ModelError::Expression {
                coefficient: name.to_string(),
                piece: i,
                line,
                column,
                message: e.message.clone(),
            }
        })?;
        exprs.push(e);
    }
    let breakpoints = pieces[1..].iter().map(|p| p.0).collect();
    PiecewiseFn::new(breakpoints, exprs).map_err(|source| ModelError::Piecewise {
        coefficient: name.to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Hypothesis;

    const FISHER: &str = r#"
p = 2
f = "0"
g = "1"
h = "x*(1-x)"
d = "1"
"#;

    #[test]
    fn fisher_parses() {
        let m = parse_model(FISHER).unwrap();
        assert!(m.theta().is_empty());
        assert_eq!(m.p(), 2.0);
        assert!((m.kappa().eval(0.25).unwrap() - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn piece_lists_limits_and_reference() {
        let src = r#"
p = 2.0
f = [{ interval = [0.0, 0.5], expr = "0" }, { interval = [0.5, 1.0], expr = "1" }]
g = "1"
h = "x*(1-x)"
d = [{ interval = [0, 1], expr = "x" }]

[limits]
ell_p = 0.0
f0 = 0.0

[reference]
c_star = 0.7071067811865476
exact = "degenerate"
"#;
        let m = parse_model(src).unwrap();
        assert_eq!(m.theta(), vec![0.5]);
        assert_eq!(m.overrides().ell_p, Some(0.0));
        assert_eq!(m.f().value_at_zero(), Some(0.0));
        assert_eq!(m.reference().unwrap().exact.as_deref(), Some("degenerate"));
        assert!((m.kappa().eval(0.5).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_model("p = 2\nf = \"0\"\ng = = 1\n").unwrap_err();
        let ModelError::Syntax { line, .. } = err else {
            panic!("{err:?}")
        };
        assert_eq!(line, 3);
    }

    #[test]
    fn expression_error_has_position() {
        let src = "p = 2\nf = \"0\"\ng = \"1\"\nh = \"x*(1-x\"\nd = \"1\"\n";
        let err = parse_model(src).unwrap_err();
        let ModelError::Expression {
            coefficient, line, ..
        } = &err
        else {
            panic!("{err:?}")
        };
        assert_eq!(coefficient, "h");
        assert_eq!(*line, 4);
    }

    #[test]
    fn layout_errors() {
        let gap = r#"
p = 2
f = [{ interval = [0.0, 0.4], expr = "0" }, { interval = [0.5, 1.0], expr = "1" }]
g = "1"
h = "x*(1-x)"
d = "1"
"#;
        assert!(matches!(parse_model(gap), Err(ModelError::Layout { .. })));
        let short = FISHER.replace("g = \"1\"", "g = [{ interval = [0, 0.9], expr = \"1\" }]");
        assert!(matches!(parse_model(&short), Err(ModelError::Layout { .. })));
    }

    #[test]
    fn h3_violation() {
        let src = FISHER.replace("x*(1-x)", "x");
        match parse_model(&src) {
            Err(ModelError::Hypothesis { hypothesis, .. }) => assert_eq!(hypothesis, Hypothesis::H3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_piece_is_rejected() {
        let src = FISHER.replace("f = \"0\"", "f = \"log(x - 0.5)\"");
        assert!(parse_model(&src).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let src = format!("{FISHER}q = 3\n");
        assert!(matches!(parse_model(&src), Err(ModelError::Syntax { .. })));
    }
}
