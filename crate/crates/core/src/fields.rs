//! Expression language for scalar fields on phase space and its jet evaluator.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::{Jet, JetSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at byte {offset}: index exceeds dimension {n}")]
    IndexOutOfRange { offset: usize, name: String, n: usize },
    #[error("empty expression")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error in {op}: `{subexpr}` at value {value}")]
    Domain { op: &'static str, subexpr: String, value: f64 },
    #[error("variable `{0}` is not bound in this context")]
    Unbound(String),
}

/// A variable reference; chart indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    P(usize),
    Y(usize),
    Nu,
    V,
    W,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::P(i) => write!(f, "p{}", i + 1),
            Var::Y(i) => write!(f, "y{}", i + 1),
            Var::Nu => f.write_str("nu"),
            Var::V => f.write_str("v"),
            Var::W => f.write_str("w"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Abs,
    Atan2,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "atan2" => Func::Atan2,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Atan2 | Func::Pow => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Atan2 => "atan2",
            Func::Pow => "pow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: Var, with: &Node) -> Node {
        match self {
            Node::Var(v) if *v == var => with.clone(),
            Node::Num(_) | Node::Var(_) => self.clone(),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(var, with))),
            Node::Bin(op, a, b) => Node::Bin(*op, Box::new(a.substitute(var, with)), Box::new(b.substitute(var, with))),
            Node::Call(f, args) => Node::Call(*f, args.iter().map(|a| a.substitute(var, with)).collect()),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "-({a})"),
            Node::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parsed, immutable scalar formula.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Arc<Node>,
    source: Arc<str>,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expression {
    pub fn from_node(node: Node) -> Expression {
        let source: Arc<str> = node.to_string().into();
        Expression {
            root: Arc::new(node),
            source,
        }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Calls `f` on every variable referenced by the expression.
    pub fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        fn walk(n: &Node, f: &mut impl FnMut(Var)) {
            match n {
                Node::Num(_) => {}
                Node::Var(v) => f(*v),
                Node::Neg(a) => walk(a, f),
                Node::Bin(_, a, b) => {
                    walk(a, f);
                    walk(b, f);
                }
                Node::Call(_, args) => args.iter().for_each(|a| walk(a, f)),
            }
        }
        walk(&self.root, f)
    }

    pub fn eval(&self, env: &Env<'_>) -> Result<Jet, EvalError> {
        eval_node(&self.root, env)
    }

    /// Plain value with every variable bound as an order-0 jet.
    pub fn eval_value(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        Ok(self.eval(env)?.value())
    }
}

/// Parses `text` in a system of dimension `n`.
pub fn parse_expression(text: &str, n: usize) -> Result<Expression, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        src: text.as_bytes(),
        text,
        pos: 0,
        n,
    };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(Expression {
        root: Arc::new(node),
        source: text.into(),
    })
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            msg: msg.to_string(),
        }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // Unary minus binds looser than '^', so -x^2 is -(x^2).
    fn factor(&mut self) -> Result<Node, ParseError> {
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.factor()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let lit = &self.text[start..i];
        match lit.parse::<f64>() {
            Ok(v) => {
                self.pos = i;
                Ok(Node::Num(v))
            }
            Err(_) => Err(ParseError::Syntax {
                offset: start,
                msg: format!("malformed number `{lit}`"),
            }),
        }
    }

    fn ident(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_alphanumeric() || s[i] == b'_') {
            i += 1;
        }
        let name = &self.text[start..i];
        self.pos = i;

        if let Some(func) = Func::lookup(name) {
            if !self.eat(b'(') {
                return Err(self.syntax(&format!("expected `(` after `{name}`")));
            }
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.syntax("expected `)` or `,`"));
            }
            if args.len() != func.arity() {
                return Err(ParseError::Syntax {
                    offset: start,
                    msg: format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()),
                });
            }
            return Ok(Node::Call(func, args));
        }

        let var = match name {
            "nu" => Var::Nu,
            "v" => Var::V,
            "w" => Var::W,
            _ => {
                let unknown = || ParseError::UnknownIdentifier {
                    offset: start,
                    name: name.to_string(),
                };
                let (head, digits) = name.split_at(1);
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(unknown());
                }
                let k: usize = digits.parse().map_err(|_| unknown())?;
                if k == 0 || k > self.n {
                    return Err(ParseError::IndexOutOfRange {
                        offset: start,
                        name: name.to_string(),
                        n: self.n,
                    });
                }
                match head {
                    "x" => Var::X(k - 1),
                    "p" => Var::P(k - 1),
                    "y" => Var::Y(k - 1),
                    _ => return Err(unknown()),
                }
            }
        };
        Ok(Node::Var(var))
    }
}

/// Variable bindings for evaluation. Unset slots are reported as unbound.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub space: &'static JetSpace,
    pub x: &'a [Jet],
    pub p: &'a [Jet],
    pub y: &'a [Jet],
    pub nu: Option<&'a Jet>,
    pub v: Option<&'a Jet>,
    pub w: Option<&'a Jet>,
}

impl<'a> Env<'a> {
    pub fn new(space: &'static JetSpace) -> Env<'a> {
        Env {
            space,
            x: &[],
            p: &[],
            y: &[],
            nu: None,
            v: None,
            w: None,
        }
    }

    /// Phase-space bindings; `x` and `p` must live in `space`.
    pub fn phase(x: &'a [Jet], p: &'a [Jet]) -> Env<'a> {
        let space = x.first().or(p.first()).expect("nonempty phase point").space();
        Env {
            x,
            p,
            ..Env::new(space)
        }
    }

    fn lookup(&self, v: Var) -> Option<&'a Jet> {
        match v {
            Var::X(i) => self.x.get(i),
            Var::P(i) => self.p.get(i),
            Var::Y(i) => self.y.get(i),
            Var::Nu => self.nu,
            Var::V => self.v,
            Var::W => self.w,
        }
    }
}

fn domain(op: &'static str, node: &Node, value: f64) -> EvalError {
    EvalError::Domain {
        op,
        subexpr: node.to_string(),
        value,
    }
}

fn eval_node(node: &Node, env: &Env<'_>) -> Result<Jet, EvalError> {
    match node {
        Node::Num(v) => Ok(Jet::constant(env.space, *v)),
        Node::Var(v) => env
            .lookup(*v)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(v.to_string())),
        Node::Neg(a) => Ok(-eval_node(a, env)?),
        Node::Bin(op, a, b) => {
            let x = eval_node(a, env)?;
            match op {
                BinOp::Pow => power(node, &x, b, env),
                _ => {
                    let y = eval_node(b, env)?;
                    Ok(match op {
                        BinOp::Add => x + y,
                        BinOp::Sub => x - y,
                        BinOp::Mul => x * y,
                        BinOp::Div => {
                            if y.value() == 0.0 {
                                return Err(domain("division", b, 0.0));
                            }
                            x / y
                        }
                        BinOp::Pow => unreachable!(),
                    })
                }
            }
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], env)?;
            let a0 = a.value();
            let k = a.order();
            match func {
                Func::Sqrt => {
                    if a0 < 0.0 || (a0 == 0.0 && k > 0) {
                        return Err(domain("sqrt", &args[0], a0));
                    }
                    if a0 == 0.0 {
                        return Ok(a.zero_like());
                    }
                    Ok(a.powf_series(0.5))
                }
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Tan => {
                    let c = a.cos();
                    if c.value() == 0.0 {
                        return Err(domain("tan", &args[0], a0));
                    }
                    Ok(a.sin() / c)
                }
                Func::Exp => Ok(a.exp()),
                Func::Log => {
                    if a0 <= 0.0 {
                        return Err(domain("log", &args[0], a0));
                    }
                    Ok(a.ln())
                }
                Func::Abs => {
                    if a0 > 0.0 {
                        Ok(a)
                    } else if a0 < 0.0 {
                        Ok(-a)
                    } else if k == 0 {
                        Ok(a)
                    } else {
                        Err(domain("abs", &args[0], a0))
                    }
                }
                Func::Atan2 => {
                    let b = eval_node(&args[1], env)?;
                    if a0 == 0.0 && b.value() == 0.0 {
                        return Err(domain("atan2", node, 0.0));
                    }
                    Ok(a.atan2(&b))
                }
                Func::Pow => power(node, &a, &args[1], env),
            }
        }
    }
}

fn power(node: &Node, base: &Jet, exp_node: &Node, env: &Env<'_>) -> Result<Jet, EvalError> {
    let e = eval_node(exp_node, env)?;
    let b0 = base.value();
    if !e.is_constant() {
        if b0 <= 0.0 {
            return Err(domain("pow", node, b0));
        }
        return Ok((e * base.ln()).exp());
    }
    let c = e.value();
    if c.fract() == 0.0 && c.abs() <= 64.0 {
        if c >= 0.0 {
            return Ok(base.powi(c as u32));
        }
        if b0 == 0.0 {
            return Err(domain("pow", node, b0));
        }
        return Ok(base.recip().powi((-c) as u32));
    }
    if b0 > 0.0 {
        Ok(base.powf_series(c))
    } else if b0 == 0.0 && c > 0.0 && base.order() == 0 {
        Ok(base.zero_like())
    } else {
        Err(domain("pow", node, b0))
    }
}

/// Point in the cotangent chart: positions `x` and momenta `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> PhasePoint {
        assert_eq!(x.len(), p.len(), "x and p must have equal length");
        PhasePoint { x, p }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }

    pub fn p_norm(&self) -> f64 {
        self.p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Coordinate jets over the 2n variables `(x1..xn, p1..pn)`.
    pub fn jets(&self, order: usize) -> (Vec<Jet>, Vec<Jet>) {
        let n = self.dim();
        let sp = JetSpace::get(2 * n, order);
        let x = (0..n).map(|i| Jet::variable(sp, i, self.x[i])).collect();
        let p = (0..n).map(|i| Jet::variable(sp, n + i, self.p[i])).collect();
        (x, p)
    }

    /// Value of phase-space coordinate `var` (0..n are x, n..2n are p).
    pub fn coord(&self, var: usize) -> f64 {
        let n = self.dim();
        if var < n {
            self.x[var]
        } else {
            self.p[var - n]
        }
    }

    pub fn coord_mut(&mut self, var: usize) -> &mut f64 {
        let n = self.dim();
        if var < n {
            &mut self.x[var]
        } else {
            &mut self.p[var - n]
        }
    }
}

/// Jet of `expr` at `q` over the phase variables `(x1..xn, p1..pn)`.
pub fn evaluate_jet(expr: &Expression, q: &PhasePoint, order: usize) -> Result<Jet, EvalError> {
    let (x, p) = q.jets(order);
    expr.eval(&Env::phase(&x, &p))
}

/// Nested central-difference estimate of the partial derivative named by
/// `multi_index` (phase variable indices, repeats allowed).
pub fn finite_difference_probe(
    expr: &Expression,
    q: &PhasePoint,
    multi_index: &[usize],
    step: f64,
) -> Result<f64, EvalError> {
    match multi_index.split_first() {
        None => evaluate_jet(expr, q, 0).map(|j| j.value()),
        Some((&var, rest)) => {
            let mut plus = q.clone();
            *plus.coord_mut(var) += step;
            let mut minus = q.clone();
            *minus.coord_mut(var) -= step;
            let fp = finite_difference_probe(expr, &plus, rest, step)?;
            let fm = finite_difference_probe(expr, &minus, rest, step)?;
            Ok((fp - fm) / (2.0 * step))
        }
    }
}
