//! Scalar expressions in the variables `y1, y2, …` with symbolic derivatives.
//!
//! Densities, weights and test functions in configuration files are given as
//! strings such as `1 + 0.5*exp(-(y1^2 + y2^2))`. Parsing yields an [`Expr`]
//! that evaluates quickly and differentiates exactly.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Atan,
    Abs,
    Sign,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Arc<Node>),
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Pow(Arc<Node>, Arc<Node>),
    Call(Func, Arc<Node>),
    /// `if a < b { then } else { other }`
    Less(Arc<Node>, Arc<Node>, Arc<Node>, Arc<Node>),
}

/// A parsed scalar expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    root: Arc<Node>,
    source: String,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn eval(node: &Node, y: &[f64]) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Var(i) => y.get(*i).copied().unwrap_or(0.0),
        Node::Neg(a) => -eval(a, y),
        Node::Add(a, b) => eval(a, y) + eval(b, y),
        Node::Sub(a, b) => eval(a, y) - eval(b, y),
        Node::Mul(a, b) => eval(a, y) * eval(b, y),
        Node::Div(a, b) => eval(a, y) / eval(b, y),
        Node::Pow(a, b) => {
            let base = eval(a, y);
            match **b {
                Node::Const(c) if c == 2.0 => base * base,
                Node::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(c as i32),
                _ => base.powf(eval(b, y)),
            }
        }
        Node::Call(f, a) => {
            let v = eval(a, y);
            match f {
                Func::Exp => v.exp(),
                Func::Ln => v.ln(),
                Func::Sqrt => v.sqrt(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Tanh => v.tanh(),
                Func::Atan => v.atan(),
                Func::Abs => v.abs(),
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
        Node::Less(a, b, t, e) => {
            if eval(a, y) < eval(b, y) {
                eval(t, y)
            } else {
                eval(e, y)
            }
        }
    }
}

fn konst(c: f64) -> Arc<Node> {
    Arc::new(Node::Const(c))
}

fn as_const(n: &Node) -> Option<f64> {
    match n {
        Node::Const(c) => Some(*c),
        _ => None,
    }
}

fn add(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Node::Add(a, b)),
    }
}

fn sub(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Arc::new(Node::Sub(a, b)),
    }
}

fn neg(a: Arc<Node>) -> Arc<Node> {
    match as_const(&a) {
        Some(x) => konst(-x),
        None => Arc::new(Node::Neg(a)),
    }
}

fn mul(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x * y),
        (Some(x), _) if x == 0.0 => konst(0.0),
        (_, Some(y)) if y == 0.0 => konst(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Arc::new(Node::Mul(a, b)),
    }
}

fn div(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x / y),
        (Some(x), _) if x == 0.0 => konst(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Arc::new(Node::Div(a, b)),
    }
}

fn pow(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x.powf(y)),
        (_, Some(y)) if y == 0.0 => konst(1.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Arc::new(Node::Pow(a, b)),
    }
}

fn call(f: Func, a: Arc<Node>) -> Arc<Node> {
    if let Some(x) = as_const(&a) {
        return konst(eval(&Node::Call(f, konst(x)), &[]));
    }
    Arc::new(Node::Call(f, a))
}

fn diff(node: &Arc<Node>, v: usize) -> Arc<Node> {
    match &**node {
        Node::Const(_) => konst(0.0),
        Node::Var(i) => konst(if *i == v { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(diff(a, v)),
        Node::Add(a, b) => add(diff(a, v), diff(b, v)),
        Node::Sub(a, b) => sub(diff(a, v), diff(b, v)),
        Node::Mul(a, b) => add(mul(diff(a, v), b.clone()), mul(a.clone(), diff(b, v))),
        Node::Div(a, b) => {
            let num = sub(mul(diff(a, v), b.clone()), mul(a.clone(), diff(b, v)));
            div(num, mul(b.clone(), b.clone()))
        }
        Node::Pow(a, b) => {
            let da = diff(a, v);
            let db = diff(b, v);
            match as_const(b) {
                Some(c) => mul(mul(konst(c), pow(a.clone(), konst(c - 1.0))), da),
                None => {
                    let term = add(
                        mul(db, call(Func::Ln, a.clone())),
                        div(mul(b.clone(), da), a.clone()),
                    );
                    mul(node.clone(), term)
                }
            }
        }
        Node::Call(f, a) => {
            let da = diff(a, v);
            if as_const(&da) == Some(0.0) {
                return konst(0.0);
            }
            let outer = match f {
                Func::Exp => node.clone(),
                Func::Ln => div(konst(1.0), a.clone()),
                Func::Sqrt => div(konst(0.5), node.clone()),
                Func::Sin => call(Func::Cos, a.clone()),
                Func::Cos => neg(call(Func::Sin, a.clone())),
                Func::Tanh => sub(konst(1.0), mul(node.clone(), node.clone())),
                Func::Atan => div(konst(1.0), add(konst(1.0), mul(a.clone(), a.clone()))),
                Func::Abs => call(Func::Sign, a.clone()),
                Func::Sign => konst(0.0),
            };
            mul(outer, da)
        }
        Node::Less(a, b, t, e) => {
            Arc::new(Node::Less(a.clone(), b.clone(), diff(t, v), diff(e, v)))
        }
    }
}

fn render(node: &Node) -> String {
    match node {
        Node::Const(c) => {
            if *c < 0.0 {
                format!("({c:?})")
            } else {
                format!("{c:?}")
            }
        }
        Node::Var(i) => format!("y{}", i + 1),
        Node::Neg(a) => format!("(-{})", render(a)),
        Node::Add(a, b) => format!("({} + {})", render(a), render(b)),
        Node::Sub(a, b) => format!("({} - {})", render(a), render(b)),
        Node::Mul(a, b) => format!("{}*{}", render(a), render(b)),
        Node::Div(a, b) => format!("{}/({})", render(a), render(b)),
        Node::Pow(a, b) => format!("({})^({})", render(a), render(b)),
        Node::Call(f, a) => {
            let name = match f {
                Func::Exp => "exp",
                Func::Ln => "ln",
                Func::Sqrt => "sqrt",
                Func::Sin => "sin",
                Func::Cos => "cos",
                Func::Tanh => "tanh",
                Func::Atan => "atan",
                Func::Abs => "abs",
                Func::Sign => "sign",
            };
            format!("{name}({})", render(a))
        }
        Node::Less(a, b, t, e) => format!("less({}, {}, {}, {})", render(a), render(b), render(t), render(e)),
    }
}

fn max_var(node: &Node) -> Option<usize> {
    match node {
        Node::Const(_) => None,
        Node::Var(i) => Some(*i),
        Node::Neg(a) | Node::Call(_, a) => max_var(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            max_var(a).max(max_var(b))
        }
        Node::Less(a, b, t, e) => max_var(a).max(max_var(b)).max(max_var(t)).max(max_var(e)),
    }
}

impl Expr {
    fn from_node(root: Arc<Node>) -> Self {
        let source = render(&root);
        Expr { root, source }
    }

    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!("unexpected trailing input in `{src}`")));
        }
        Ok(Expr {
            root,
            source: src.trim().to_string(),
        })
    }

    pub fn constant(c: f64) -> Self {
        Expr::from_node(konst(c))
    }

    pub fn var(i: usize) -> Self {
        Expr::from_node(Arc::new(Node::Var(i)))
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        eval(&self.root, y)
    }

    /// Partial derivative with respect to the zero-based variable `v`.
    pub fn diff(&self, v: usize) -> Expr {
        Expr::from_node(diff(&self.root, v))
    }

    /// Number of variables referenced (one more than the largest index).
    pub fn arity(&self) -> usize {
        max_var(&self.root).map_or(0, |i| i + 1)
    }

    pub fn constant_value(&self) -> Option<f64> {
        as_const(&self.root)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::from_node(add(self.root.clone(), other.root.clone()))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        Expr::from_node(sub(self.root.clone(), other.root.clone()))
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        Expr::from_node(mul(self.root.clone(), other.root.clone()))
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::from_node(mul(konst(c), self.root.clone()))
    }

    pub fn powf(&self, p: f64) -> Expr {
        Expr::from_node(pow(self.root.clone(), konst(p)))
    }

    pub fn ln(&self) -> Expr {
        Expr::from_node(call(Func::Ln, self.root.clone()))
    }

    pub fn exp(&self) -> Expr {
        Expr::from_node(call(Func::Exp, self.root.clone()))
    }

    /// Substitutes `y ↦ λ y` in every variable.
    pub fn dilate(&self, lambda: f64) -> Expr {
        fn go(n: &Arc<Node>, l: f64) -> Arc<Node> {
            match &**n {
                Node::Const(_) => n.clone(),
                Node::Var(_) => mul(konst(l), n.clone()),
                Node::Neg(a) => neg(go(a, l)),
                Node::Add(a, b) => add(go(a, l), go(b, l)),
                Node::Sub(a, b) => sub(go(a, l), go(b, l)),
                Node::Mul(a, b) => mul(go(a, l), go(b, l)),
                Node::Div(a, b) => div(go(a, l), go(b, l)),
                Node::Pow(a, b) => pow(go(a, l), go(b, l)),
                Node::Call(f, a) => call(*f, go(a, l)),
                Node::Less(a, b, t, e) => Arc::new(Node::Less(go(a, l), go(b, l), go(t, l), go(e, l))),
            }
        }
        Expr::from_node(go(&self.root, lambda))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
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
                .map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Expression(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Arc::new(Node::Add(lhs, self.term()?));
            } else if self.eat('-') {
                lhs = Arc::new(Node::Sub(lhs, self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Arc::new(Node::Mul(lhs, self.unary()?));
            } else if self.eat('/') {
                lhs = Arc::new(Node::Div(lhs, self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Arc<Node>> {
        if self.eat('-') {
            Ok(neg(self.unary()?))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Arc<Node>> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            Ok(Arc::new(Node::Pow(base, exp)))
        } else {
            Ok(base)
        }
    }

    fn args(&mut self) -> Result<Vec<Arc<Node>>> {
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Arc<Node>> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(konst(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(rest) = name.strip_prefix('y').or_else(|| name.strip_prefix('x')) {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k == 0 {
                            return Err(Error::Expression("variables are numbered from 1".into()));
                        }
                        return Ok(Arc::new(Node::Var(k - 1)));
                    }
                }
                match name.as_str() {
                    "pi" => return Ok(konst(std::f64::consts::PI)),
                    "e" => return Ok(konst(std::f64::consts::E)),
                    _ => {}
                }
                let f = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "ln" | "log" => Some(Func::Ln),
                    "sqrt" => Some(Func::Sqrt),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tanh" => Some(Func::Tanh),
                    "atan" => Some(Func::Atan),
                    "abs" => Some(Func::Abs),
                    "sign" => Some(Func::Sign),
                    _ => None,
                };
                let args = self.args()?;
                if let Some(f) = f {
                    if args.len() != 1 {
                        return Err(Error::Expression(format!("`{name}` takes one argument")));
                    }
                    return Ok(Arc::new(Node::Call(f, args[0].clone())));
                }
                match (name.as_str(), args.len()) {
                    ("pow", 2) => Ok(Arc::new(Node::Pow(args[0].clone(), args[1].clone()))),
                    ("min", 2) => Ok(Arc::new(Node::Less(
                        args[0].clone(),
                        args[1].clone(),
                        args[0].clone(),
                        args[1].clone(),
                    ))),
                    ("max", 2) => Ok(Arc::new(Node::Less(
                        args[0].clone(),
                        args[1].clone(),
                        args[1].clone(),
                        args[0].clone(),
                    ))),
                    _ => Err(Error::Expression(format!("unknown function `{name}`"))),
                }
            }
            other => Err(Error::Expression(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("1 + 0.5*exp(-(y1^2 + y2^2))").unwrap();
        assert!((e.eval(&[0.0, 0.0]) - 1.5).abs() < 1e-15);
        assert_eq!(e.arity(), 2);
        let e = Expr::parse("-y1^2").unwrap();
        assert_eq!(e.eval(&[3.0]), -9.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.eval(&[]), 512.0);
        let e = Expr::parse("max(ln(abs(y1)), -5)").unwrap();
        assert_eq!(e.eval(&[0.0]), -5.0);
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("y0").is_err());
    }

    #[test]
    fn derivatives_of_elementary_functions() {
        let e = Expr::parse("sin(y1)*exp(y2) + y1^3/y2").unwrap();
        let dx = e.diff(0);
        let dy = e.diff(1);
        let (x, y) = (0.7, 1.3);
        assert!((dx.eval(&[x, y]) - (x.cos() * y.exp() + 3.0 * x * x / y)).abs() < 1e-13);
        assert!((dy.eval(&[x, y]) - (x.sin() * y.exp() - x.powi(3) / (y * y))).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn symbolic_matches_central_difference(a in -1.5f64..1.5, b in -1.5f64..1.5) {
            let e = Expr::parse("(2 + y1*exp(-(y1^2+y2^2)/4))^(4/3) + tanh(y2)*atan(y1) + sqrt(3 + cos(y1*y2))").unwrap();
            for v in 0..2 {
                let h = 1e-5;
                let mut p = [a, b];
                let mut m = [a, b];
                p[v] += h;
                m[v] -= h;
                let fd = (e.eval(&p) - e.eval(&m)) / (2.0 * h);
                let sym = e.diff(v).eval(&[a, b]);
                prop_assert!((fd - sym).abs() < 1e-8 * (1.0 + sym.abs()));
            }
        }
    }
}
