//! Arithmetic expressions in `x1`, `x2`, `t` for potentials and data.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals and the
//! functions `exp sin cos abs`. `^` is right-associative and binds tighter
//! than unary minus, so `-x1^2` means `-(x1^2)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Sin,
    Cos,
    Abs,
    Ln,
    Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    #[doc(hidden)]
    Call(FuncTag, Box<Expr>),
}

/// Opaque function tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuncTag(Func);

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X1) => x.first().copied().unwrap_or(0.0),
            Expr::Var(Var::X2) => x.get(1).copied().unwrap_or(0.0),
            Expr::Var(Var::T) => t,
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Expr::Pow(a, b) => {
                let base = a.eval(x, t);
                match **b {
                    Expr::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(x, t)),
                }
            }
            Expr::Call(FuncTag(f), a) => {
                let v = a.eval(x, t);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Abs => v.abs(),
                    Func::Ln => v.ln(),
                    Func::Sign => {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        }
    }

    /// Whether the expression mentions `v`.
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// Symbolic derivative with respect to `v`.
    pub fn derivative(&self, v: Var) -> Expr {
        use Expr::*;
        if !self.depends_on(v) {
            return Num(0.0);
        }
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(v)),
            Add(a, b) => add(a.derivative(v), b.derivative(v)),
            Sub(a, b) => sub(a.derivative(v), b.derivative(v)),
            Mul(a, b) => add(mul(a.derivative(v), (**b).clone()), mul((**a).clone(), b.derivative(v))),
            Div(a, b) => div(
                sub(mul(a.derivative(v), (**b).clone()), mul((**a).clone(), b.derivative(v))),
                Pow(b.clone(), Box::new(Num(2.0))),
            ),
            Pow(a, b) => {
                if !b.depends_on(v) {
                    let reduced = Pow(a.clone(), Box::new(sub((**b).clone(), Num(1.0))));
                    mul(mul((**b).clone(), reduced), a.derivative(v))
                } else {
                    let ln_a = Call(FuncTag(Func::Ln), a.clone());
                    let inner =
                        add(mul(b.derivative(v), ln_a), div(mul((**b).clone(), a.derivative(v)), (**a).clone()));
                    mul(self.clone(), inner)
                }
            }
            Call(FuncTag(f), a) => {
                let da = a.derivative(v);
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Sin => Call(FuncTag(Func::Cos), a.clone()),
                    Func::Cos => neg(Call(FuncTag(Func::Sin), a.clone())),
                    Func::Abs => Call(FuncTag(Func::Sign), a.clone()),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                    Func::Sign => Num(0.0),
                };
                mul(outer, da)
            }
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}
fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}
fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        a => Expr::Neg(Box::new(a)),
    }
}
fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}
fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        a
    } else if is_zero(&a) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}
fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Num(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}
fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Num(0.0)
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Expression { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let func = match name {
                    "x1" | "x" => return Ok(Expr::Var(Var::X1)),
                    "x2" | "y" => return Ok(Expr::Var(Var::X2)),
                    "t" => return Ok(Expr::Var(Var::T)),
                    "exp" => Func::Exp,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "abs" => Func::Abs,
                    _ => {
                        self.pos = start;
                        return Err(self.err(&format!("unknown identifier '{name}'")));
                    }
                };
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(Expr::Call(FuncTag(func), Box::new(arg)))
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < s.len() && s[self.pos].is_ascii_digit() {
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Expr::Num).map_err(|_| {
            self.pos = start;
            self.err(&format!("invalid number '{text}'"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: &[f64], t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, t)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", &[0.0], 0.0), 7.0);
        assert_eq!(ev("-x1^2", &[3.0], 0.0), -9.0);
        assert_eq!(ev("2^3^2", &[0.0], 0.0), 512.0);
        assert_eq!(ev("(1+2)*3 - 4/2", &[0.0], 0.0), 7.0);
        assert_eq!(ev("x1*x2 + t", &[2.0, 5.0], 0.5), 10.5);
        assert_eq!(ev("1.5e-1 + 2E1", &[0.0], 0.0), 20.15);
        assert!(
            (ev("exp(-x^2)*cos(t)+abs(sin(x2))", &[1.0, -1.0], 0.3) - ((-1f64).exp() * 0.3f64.cos() + 1f64.sin()))
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("1 + foo(x)") {
            Err(Error::Expression { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("exp 2").is_err());
    }

    #[test]
    fn symbolic_derivatives() {
        let e = Expr::parse("-x1^2 + sin(x1*x2) + exp(-t*x1)").unwrap();
        let d = e.derivative(Var::X1);
        let (x, y, t): (f64, f64, f64) = (0.7, -1.3, 0.4);
        let exact = -2.0 * x + y * (x * y).cos() - t * (-t * x).exp();
        assert!((d.eval(&[x, y], t) - exact).abs() < 1e-14);
        assert_eq!(Expr::parse("x2 + t").unwrap().derivative(Var::X1), Expr::Num(0.0));
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let e = Expr::parse("cos(x1)^3 / (2 + x2^2) - abs(x1 - 0.1) * 2^x1").unwrap();
            let d = e.derivative(Var::X1).eval(&[x, y], 0.0);
            let h = 1e-6;
            prop_assume!((x - 0.1).abs() > 1e-3);
            let fd = (e.eval(&[x + h, y], 0.0) - e.eval(&[x - h, y], 0.0)) / (2.0 * h);
            prop_assert!((d - fd).abs() < 1e-6 * (1.0 + d.abs()));
        }
    }
}
