//! Scalar expressions in one variable `x`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right associative
//! atom    := number | 'x' | func '(' args ')' | '(' expr ')'
//! func    := exp | log | sqrt | abs | min | max
//! ```
//!
//! `**` is accepted as a synonym for `^`. Printing is fully parenthesised so
//! that `parse(print(e)) == e` for every parsed `e`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Min => "min",
            BinOp::Max => "max",
        }
    }
}

/// Expression tree over the variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log of non-positive argument {arg} at x = {x}")]
    LogDomain { x: f64, arg: f64 },
    #[error("sqrt of negative argument {arg} at x = {x}")]
    SqrtDomain { x: f64, arg: f64 },
    #[error("division by zero at x = {x}")]
    DivisionByZero { x: f64 },
    #[error("non-finite power {base}^{exponent} at x = {x}")]
    PowDomain { x: f64, base: f64, exponent: f64 },
    #[error("non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at column {column}")]
pub struct ParseError {
    /// 1-based character column inside the expression string.
    pub column: usize,
    pub message: String,
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn var() -> Self {
        Expr::Var
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Add, lhs, rhs)
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Sub, lhs, rhs)
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Mul, lhs, rhs)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Div, lhs, rhs)
    }

    pub fn pow(base: Expr, exponent: Expr) -> Self {
        Self::binary(BinOp::Pow, base, exponent)
    }

    pub fn min(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Min, lhs, rhs)
    }

    pub fn max(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Max, lhs, rhs)
    }

    /// `a + s * (x - x0)`, the affine function through `(x0, a)` with slope `s`.
    pub fn affine(x0: f64, a: f64, s: f64) -> Self {
        Self::add(
            Expr::Const(a),
            Self::mul(Expr::Const(s), Self::sub(Expr::Var, Expr::Const(x0))),
        )
    }

    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Parser::new(src)?.parse_all()
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Evaluates at `x`. Any non-finite intermediate is reported as an error.
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Call(f, e) => {
                let a = e.eval(x)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(EvalError::LogDomain { x, arg: a });
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::SqrtDomain { x, arg: a });
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(x)?;
                let b = r.eval(x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero { x });
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let v = pow(a, b);
                        if !v.is_finite() {
                            return Err(EvalError::PowDomain {
                                x,
                                base: a,
                                exponent: b,
                            });
                        }
                        v
                    }
                    BinOp::Min => a.min(b),
                    BinOp::Max => a.max(b),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x })
        }
    }
}

// `powf` already treats integral exponents of negative bases correctly; the
// only special case is 0^0 which we pin to 1.
fn pow(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else {
        a.powf(b)
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    // Only reachable for programmatically built trees.
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var => f.write_str("x"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op @ (BinOp::Min | BinOp::Max), a, b) => {
                write!(f, "{}({a}, {b})", op.symbol())
            }
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError {
                column: col,
                message: format!("invalid number literal `{text}`"),
            })?;
            out.push((Token::Num(value), col));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let tok = match c {
            '+' => Token::Plus,
            '-' | '\u{2212}' => Token::Minus,
            '*' if chars.get(i + 1) == Some(&'*') => {
                i += 1;
                Token::Caret
            }
            '*' | '\u{d7}' => Token::Star,
            '/' => Token::Slash,
            '^' => Token::Caret,
            '(' => Token::LParen,
            ')' => Token::RParen,
            ',' => Token::Comma,
            other => {
                return Err(ParseError {
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((tok, col));
        i += 1;
    }
    out.push((Token::End, chars.len() + 1));
    Ok(out)
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            tokens: lex(src)?,
            pos: 0,
        })
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        match self.peek() {
            Token::End => Ok(e),
            t => Err(self.error(format!("unexpected token {t:?}"))),
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn column(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ParseError {
        ParseError {
            column: self.column(),
            message,
        }
    }

    fn expect(&mut self, tok: Token) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {tok:?}, found {:?}", self.peek())))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Token::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Token::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let col = self.column();
        match self.bump() {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Token::Ident(name) => self.ident(name, col),
            t => Err(ParseError {
                column: col,
                message: format!("expected a value, found {t:?}"),
            }),
        }
    }

    fn ident(&mut self, name: String, col: usize) -> Result<Expr, ParseError> {
        let unary = match name.as_str() {
            "x" => return Ok(Expr::Var),
            "exp" => Some(Func::Exp),
            "log" | "ln" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            "min" | "max" => None,
            _ => {
                return Err(ParseError {
                    column: col,
                    message: format!("unknown identifier `{name}`"),
                })
            }
        };
        self.expect(Token::LParen)?;
        let first = self.expr()?;
        let e = match unary {
            Some(f) => Expr::Call(f, Box::new(first)),
            None => {
                self.expect(Token::Comma)?;
                let second = self.expr()?;
                let op = if name == "min" { BinOp::Min } else { BinOp::Max };
                Expr::binary(op, first, second)
            }
        };
        self.expect(Token::RParen)?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0), -4.0);
        assert_eq!(ev("2 ^ -1", 0.0), 0.5);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("x*(1-x)", 0.25), 0.1875);
        assert_eq!(ev("x**2", 3.0), 9.0);
    }

    #[test]
    fn functions() {
        assert!((ev("exp(log(x))", 2.5) - 2.5).abs() < 1e-15);
        assert_eq!(ev("sqrt(x)", 4.0), 2.0);
        assert_eq!(ev("abs(x - 1)", 0.25), 0.75);
        assert_eq!(ev("min(x, 1 - x)", 0.3), 0.3);
        assert_eq!(ev("max(x, 1 - x)", 0.3), 0.7);
        assert_eq!(ev("1e-3 * x", 2.0), 2e-3);
    }

    #[test]
    fn domain_errors() {
        let e = Expr::parse("log(x)").unwrap();
        assert!(matches!(e.eval(0.0), Err(EvalError::LogDomain { .. })));
        let e = Expr::parse("sqrt(x - 1)").unwrap();
        assert!(matches!(e.eval(0.5), Err(EvalError::SqrtDomain { .. })));
        let e = Expr::parse("1 / x").unwrap();
        assert!(matches!(e.eval(0.0), Err(EvalError::DivisionByZero { .. })));
        let e = Expr::parse("(x - 1) ^ 0.5").unwrap();
        assert!(matches!(e.eval(0.0), Err(EvalError::PowDomain { .. })));
    }

    #[test]
    fn parse_errors_carry_column() {
        let err = Expr::parse("1 + * 2").unwrap_err();
        assert_eq!(err.column, 5);
        let err = Expr::parse("foo(x)").unwrap_err();
        assert_eq!(err.column, 1);
        let err = Expr::parse("x $ 2").unwrap_err();
        assert_eq!(err.column, 3);
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("min(x)").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Const),
            Just(Expr::Var),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(Func::Exp),
                        Just(Func::Log),
                        Just(Func::Sqrt),
                        Just(Func::Abs)
                    ],
                    inner.clone()
                )
                    .prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow),
                        Just(BinOp::Min),
                        Just(BinOp::Max)
                    ],
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = Expr::parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
