//! A small expression language for user-supplied functions, with symbolic
//! differentiation so that parsed functions carry exact derivatives.
//!
//! Grammar: numbers, named variables, `+ - * / ^`, unary minus, parentheses,
//! the constants `pi` and `e`, calls to `sin cos tan atan exp ln log sqrt
//! sinh cosh tanh sech erf abs`, and `integral(body, lo, hi)` where `body`
//! is written in the dummy variable `s`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geomkit::ScalarField;
use crate::hill::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Sech,
    Erf,
    Abs,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "atan" => Func::Atan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "sech" => Func::Sech,
            "erf" => Func::Erf,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sech => "sech",
            Func::Erf => "erf",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Atan => x.atan(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Sech => 1.0 / x.cosh(),
            Func::Erf => libm::erf(x),
            Func::Abs => x.abs(),
            Func::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative of `f` as an expression in its argument `x`.
    fn derivative(self, x: &Expr) -> Expr {
        use Expr::*;
        let call = |f: Func| Call(f, Box::new(x.clone()));
        match self {
            Func::Sin => call(Func::Cos),
            Func::Cos => neg(call(Func::Sin)),
            Func::Tan => add(num(1.0), pow(call(Func::Tan), num(2.0))),
            Func::Atan => div(num(1.0), add(num(1.0), pow(x.clone(), num(2.0)))),
            Func::Exp => call(Func::Exp),
            Func::Ln => div(num(1.0), x.clone()),
            Func::Sqrt => div(num(0.5), call(Func::Sqrt)),
            Func::Sinh => call(Func::Cosh),
            Func::Cosh => call(Func::Sinh),
            Func::Tanh => pow(call(Func::Sech), num(2.0)),
            Func::Sech => neg(mul(call(Func::Sech), call(Func::Tanh))),
            Func::Erf => mul(
                num(2.0 / std::f64::consts::PI.sqrt()),
                Call(Func::Exp, Box::new(neg(pow(x.clone(), num(2.0))))),
            ),
            Func::Abs => call(Func::Sign),
            Func::Sign => num(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// `∫_lo^hi body(s) ds`; `body` uses variable 0 for `s` only.
    Integral {
        body: Box<Expr>,
        lo: Box<Expr>,
        hi: Box<Expr>,
    },
}

fn num(x: f64) -> Expr {
    Expr::Num(x)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (Expr::Num(z), other) | (other, Expr::Num(z)) if z == 0.0 => other,
        (a, Expr::Neg(b)) => sub(a, *b),
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (a, Expr::Num(0.0)) => a,
        (Expr::Num(0.0), b) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (Expr::Num(0.0), _) | (_, Expr::Num(0.0)) => Expr::Num(0.0),
        (Expr::Num(1.0), other) | (other, Expr::Num(1.0)) => other,
        (Expr::Num(m), other) | (other, Expr::Num(m)) if m == -1.0 => neg(other),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(0.0), _) => Expr::Num(0.0),
        (a, Expr::Num(1.0)) => a,
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x / y),
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, Expr::Num(0.0)) => Expr::Num(1.0),
        (a, Expr::Num(1.0)) => a,
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x.powf(y)),
        (a, b) => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

impl Expr {
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                match **b {
                    Expr::Num(e) if e == e.trunc() && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(vars)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(vars)),
            Expr::Integral { body, lo, hi } => {
                let (lo, hi) = (lo.eval(vars), hi.eval(vars));
                quad(|s| body.eval(&[s]), lo, hi).unwrap_or(f64::NAN)
            }
        }
    }

    /// Largest variable index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Integral { lo, hi, .. } => lo.arity().max(hi.arity()),
        }
    }

    /// Replaces variable 0 by `with`.
    fn substitute_first(&self, with: &Expr) -> Expr {
        let rec = |e: &Expr| Box::new(e.substitute_first(with));
        match self {
            Expr::Var(0) => with.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(rec(a)),
            Expr::Add(a, b) => Expr::Add(rec(a), rec(b)),
            Expr::Sub(a, b) => Expr::Sub(rec(a), rec(b)),
            Expr::Mul(a, b) => Expr::Mul(rec(a), rec(b)),
            Expr::Div(a, b) => Expr::Div(rec(a), rec(b)),
            Expr::Pow(a, b) => Expr::Pow(rec(a), rec(b)),
            Expr::Call(f, a) => Expr::Call(*f, rec(a)),
            Expr::Integral { body, lo, hi } => Expr::Integral {
                body: body.clone(),
                lo: rec(lo),
                hi: rec(hi),
            },
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.diff(var), (**b).clone()),
                    mul((**a).clone(), b.diff(var)),
                ),
                pow((**b).clone(), num(2.0)),
            ),
            Expr::Pow(a, b) => {
                let (a, b) = (&**a, &**b);
                if b.arity() == 0 {
                    let e = b.eval(&[]);
                    mul(mul(num(e), pow(a.clone(), num(e - 1.0))), a.diff(var))
                } else {
                    // a^b (b' ln a + b a'/a)
                    mul(
                        pow(a.clone(), b.clone()),
                        add(
                            mul(b.diff(var), Expr::Call(Func::Ln, Box::new(a.clone()))),
                            div(mul(b.clone(), a.diff(var)), a.clone()),
                        ),
                    )
                }
            }
            Expr::Call(f, a) => mul(f.derivative(a), a.diff(var)),
            Expr::Integral { body, lo, hi } => sub(
                mul(body.substitute_first(hi), hi.diff(var)),
                mul(body.substitute_first(lo), lo.diff(var)),
            ),
        }
    }

    /// Field of `dim` variables with symbolic gradient and Hessian.
    pub fn to_field(&self, dim: usize) -> Result<ScalarField> {
        if self.arity() > dim {
            return Err(Error::Expr(format!(
                "expression uses {} variables, field has {dim}",
                self.arity()
            )));
        }
        let value = Arc::new(self.clone());
        let grad: Arc<Vec<Expr>> = Arc::new((0..dim).map(|i| self.diff(i)).collect());
        let hess: Arc<Vec<Vec<Expr>>> = Arc::new(
            grad.iter()
                .map(|gi| (0..dim).map(|j| gi.diff(j)).collect())
                .collect(),
        );
        let g = grad.clone();
        Ok(ScalarField::new(dim, move |p| value.eval(p))
            .with_grad(move |p| DVector::from_iterator(dim, g.iter().map(|e| e.eval(p))))
            .with_hess(move |p| {
                DMatrix::from_fn(dim, dim, |i, j| 0.5 * (hess[i][j].eval(p) + hess[j][i].eval(p)))
            }))
    }

    /// One-variable closure.
    pub fn to_fn1(&self) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        if self.arity() > 1 {
            return Err(Error::Expr("expected a function of one variable".into()));
        }
        let e = self.clone();
        Ok(Arc::new(move |t| e.eval(&[t])))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Integral { body, lo, hi } => write!(f, "integral({body}, {lo}, {hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(Error::Expr(format!("expected '{op}' at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Token::Op('(')) {
                    self.pos += 1;
                    return self.call(&name);
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(i));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => Err(Error::Expr(format!("unknown identifier '{name}'"))),
                }
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        if name == "integral" {
            let start = self.pos;
            let mut inner = Parser {
                tokens: self.tokens.clone(),
                pos: start,
                vars: &["s"],
            };
            let body = inner.expr()?;
            self.pos = inner.pos;
            self.expect(',')?;
            let lo = self.expr()?;
            self.expect(',')?;
            let hi = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::Integral {
                body: Box::new(body),
                lo: Box::new(lo),
                hi: Box::new(hi),
            });
        }
        let func = Func::from_name(name).ok_or_else(|| Error::Expr(format!("unknown function '{name}'")))?;
        let arg = self.expr()?;
        self.expect(')')?;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

/// Parses `src` with the given variable names (variable `i` is `vars[i]`).
pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
    let mut p = Parser {
        tokens: tokenize(src)?,
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(Error::Expr(format!("trailing input at token {}", p.pos)));
    }
    Ok(e)
}

/// Parses a one-variable expression in `t` into a field with exact
/// derivatives.
pub fn field_of_t(src: &str) -> Result<ScalarField> {
    parse(src, &["t"])?.to_field(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("-2^2 + 3*4/2 - 1", &[]).unwrap();
        assert_eq!(e.eval(&[]), -4.0 + 6.0 - 1.0);
        let e = parse("2^3^2", &[]).unwrap();
        assert_eq!(e.eval(&[]), 512.0);
        let e = parse("1.5e-1 * pi", &[]).unwrap();
        assert!(close(e.eval(&[]), 0.15 * std::f64::consts::PI));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("foo(1)", &[]).is_err());
        assert!(parse("x +", &["x"]).is_err());
        assert!(parse("y", &["x"]).is_err());
        assert!(parse("1 $ 2", &[]).is_err());
        assert!(parse("(1", &[]).is_err());
    }

    #[test]
    fn symbolic_derivatives() {
        let f = parse("sin(x)*exp(y) + x^3/y", &["x", "y"]).unwrap().to_field(2).unwrap();
        let p = [0.7, 1.3];
        let g = f.gradient(&p, 0.0);
        assert!(close(g[0], 0.7f64.cos() * 1.3f64.exp() + 3.0 * 0.49 / 1.3));
        assert!(close(g[1], 0.7f64.sin() * 1.3f64.exp() - 0.343 / (1.3 * 1.3)));
        let h = f.hessian(&p, 0.0);
        let fd = f.value_only().hessian(&p, 1e-4);
        assert!((h - fd).norm() < 1e-6);
    }

    #[test]
    fn erf_and_integral_derivatives() {
        let f = field_of_t("sqrt(pi)/2*erf(t) + 1").unwrap();
        let g = field_of_t("integral(exp(-s^2), 0, t) + 1").unwrap();
        for t in [-1.5, 0.0, 0.8] {
            assert!((f.value(&[t]) - g.value(&[t])).abs() < 1e-13);
            assert!(close(f.gradient(&[t], 0.0)[0], (-t * t).exp()));
            assert!(close(g.gradient(&[t], 0.0)[0], (-t * t).exp()));
            assert!(close(g.hessian(&[t], 0.0)[(0, 0)], -2.0 * t * (-t * t).exp()));
        }
    }

    #[test]
    fn variable_exponent() {
        let f = parse("x^x", &["x"]).unwrap().to_field(1).unwrap();
        let x = 1.7f64;
        assert!(close(f.gradient(&[x], 0.0)[0], x.powf(x) * (x.ln() + 1.0)));
    }
}
