//! Arithmetic and predicate expressions over grid coordinates `x1..xn`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! or      := and ("||" and)*
//! and     := not ("&&" not)*
//! not     := "!" not | cmp
//! cmp     := sum (("<=" | ">=" | "<" | ">" | "==" | "!=") sum)?
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | xK | ("min" | "max" | "abs") "(" args ")" | "(" or ")"
//! ```
//!
//! `−` (U+2212) is accepted for `-`. `-x^2` is `-(x^2)`; `^` is right-associative.
//! Evaluation is a fixed post-order walk, so results are reproducible bit for bit.

use std::fmt;

use thiserror::Error;

/// Divisors smaller than this in magnitude are rejected at evaluation.
pub const DIVISION_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    /// Byte offset into the source.
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by {0:e}, below the guard 1e-300")]
    DivisionGuard(f64),
    #[error("non-finite result {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CmpOp {
    Le,
    Ge,
    Lt,
    Gt,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Abs(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Cmp(CmpOp, Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Not(Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Bool,
}

/// A compiled numeric expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    dims: usize,
}

/// A compiled boolean expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    root: Node,
    dims: usize,
}

impl Expr {
    /// Parses a numeric expression in at most `dims` coordinates.
    pub fn parse(src: &str, dims: usize) -> Result<Self, ParseError> {
        let root = parse_typed(src, dims, Ty::Num)?;
        Ok(Expr { root, dims })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = num(&self.root, x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(v))
        }
    }
}

impl Predicate {
    pub fn parse(src: &str, dims: usize) -> Result<Self, ParseError> {
        let root = parse_typed(src, dims, Ty::Bool)?;
        Ok(Predicate { root, dims })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn eval(&self, x: &[f64]) -> Result<bool, EvalError> {
        boolean(&self.root, x)
    }
}

fn parse_typed(src: &str, dims: usize, want: Ty) -> Result<Node, ParseError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0, dims, end: src.len() };
    let (node, ty) = p.or()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.offset, format!("unexpected {}", t.kind)));
    }
    if ty != want {
        let what = if want == Ty::Num { "a number" } else { "a condition" };
        return Err(ParseError { offset: 0, message: format!("expected {what}, found {}", ty.name()) });
    }
    Ok(node)
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Num => "a number",
            Ty::Bool => "a condition",
        }
    }
}

fn num(n: &Node, x: &[f64]) -> Result<f64, EvalError> {
    Ok(match n {
        Node::Num(v) => *v,
        Node::Var(k) => x[*k],
        Node::Neg(a) => -num(a, x)?,
        Node::Abs(a) => num(a, x)?.abs(),
        Node::Bin(op, a, b) => {
            let (a, b) = (num(a, x)?, num(b, x)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.abs() < DIVISION_GUARD {
                        return Err(EvalError::DivisionGuard(b));
                    }
                    a / b
                }
                BinOp::Pow => power(a, b),
                BinOp::Min => a.min(b),
                BinOp::Max => a.max(b),
            }
        }
        Node::Cmp(..) | Node::And(..) | Node::Or(..) | Node::Not(_) => unreachable!("type-checked at parse"),
    })
}

fn power(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn boolean(n: &Node, x: &[f64]) -> Result<bool, EvalError> {
    Ok(match n {
        Node::Cmp(op, a, b) => {
            let (a, b) = (num(a, x)?, num(b, x)?);
            for v in [a, b] {
                if v.is_nan() {
                    return Err(EvalError::NonFinite(v));
                }
            }
            match op {
                CmpOp::Le => a <= b,
                CmpOp::Ge => a >= b,
                CmpOp::Lt => a < b,
                CmpOp::Gt => a > b,
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
            }
        }
        Node::And(a, b) => boolean(a, x)? && boolean(b, x)?,
        Node::Or(a, b) => boolean(a, x)? || boolean(b, x)?,
        Node::Not(a) => !boolean(a, x)?,
        _ => unreachable!("type-checked at parse"),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Num(v) => write!(f, "number {v}"),
            Kind::Ident(s) => write!(f, "'{s}'"),
            Kind::Op(s) => write!(f, "'{s}'"),
            Kind::LParen => f.write_str("'('"),
            Kind::RParen => f.write_str("')'"),
            Kind::Comma => f.write_str("','"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    offset: usize,
}

const OPERATORS: [&str; 15] = ["<=", ">=", "==", "!=", "&&", "||", "<", ">", "!", "+", "-", "*", "/", "^", "−"];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut i = 0;
    let bytes = src.as_bytes();
    while i < src.len() {
        let rest = &src[i..];
        let c = rest.chars().next().expect("non-empty");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < src.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                j += 1;
            }
            if j < src.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                let mut k = j + 1;
                if k < src.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < src.len() && bytes[k].is_ascii_digit() {
                    while k < src.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text = &src[i..j];
            let v: f64 =
                text.parse().map_err(|_| ParseError { offset: i, message: format!("malformed number '{text}'") })?;
            out.push(Token { kind: Kind::Num(v), offset: i });
            i = j;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < src.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            out.push(Token { kind: Kind::Ident(src[i..j].to_string()), offset: i });
            i = j;
            continue;
        }
        let simple = match c {
            '(' => Some(Kind::LParen),
            ')' => Some(Kind::RParen),
            ',' => Some(Kind::Comma),
            _ => None,
        };
        if let Some(kind) = simple {
            out.push(Token { kind, offset: i });
            i += 1;
            continue;
        }
        match OPERATORS.iter().find(|op| rest.starts_with(**op)) {
            Some(&op) => {
                let canonical = if op == "−" { "-" } else { op };
                out.push(Token { kind: Kind::Op(canonical), offset: i });
                i += op.len();
            }
            None => return Err(ParseError { offset: i, message: format!("unexpected character '{c}'") }),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dims: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn error_at(&self, offset: usize, message: String) -> ParseError {
        ParseError { offset, message }
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        match self.peek() {
            Some(Token { kind: Kind::Op(o), .. }) if ops.contains(o) => {
                let o = *o;
                self.pos += 1;
                Some(o)
            }
            _ => None,
        }
    }

    fn expect(&mut self, kind: Kind) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error_at(t.offset, format!("expected {kind}, found {}", t.kind))),
            None => Err(self.error_at(self.end, format!("expected {kind}, found end of input"))),
        }
    }

    fn want(&self, ty: Ty, got: Ty, offset: usize) -> Result<(), ParseError> {
        if ty == got {
            Ok(())
        } else {
            Err(self.error_at(offset, format!("expected {}, found {}", ty.name(), got.name())))
        }
    }

    fn or(&mut self) -> Result<(Node, Ty), ParseError> {
        let start = self.offset();
        let (mut lhs, mut ty) = self.and()?;
        while self.eat_op(&["||"]).is_some() {
            self.want(Ty::Bool, ty, start)?;
            let at = self.offset();
            let (rhs, rt) = self.and()?;
            self.want(Ty::Bool, rt, at)?;
            lhs = Node::Or(Box::new(lhs), Box::new(rhs));
            ty = Ty::Bool;
        }
        Ok((lhs, ty))
    }

    fn and(&mut self) -> Result<(Node, Ty), ParseError> {
        let start = self.offset();
        let (mut lhs, ty) = self.not()?;
        while self.eat_op(&["&&"]).is_some() {
            self.want(Ty::Bool, ty, start)?;
            let at = self.offset();
            let (rhs, rt) = self.not()?;
            self.want(Ty::Bool, rt, at)?;
            lhs = Node::And(Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, ty))
    }

    fn not(&mut self) -> Result<(Node, Ty), ParseError> {
        if self.eat_op(&["!"]).is_some() {
            let at = self.offset();
            let (inner, ty) = self.not()?;
            self.want(Ty::Bool, ty, at)?;
            return Ok((Node::Not(Box::new(inner)), Ty::Bool));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<(Node, Ty), ParseError> {
        let start = self.offset();
        let (lhs, ty) = self.sum()?;
        let Some(op) = self.eat_op(&["<=", ">=", "<", ">", "==", "!="]) else {
            return Ok((lhs, ty));
        };
        self.want(Ty::Num, ty, start)?;
        let at = self.offset();
        let (rhs, rt) = self.sum()?;
        self.want(Ty::Num, rt, at)?;
        let op = match op {
            "<=" => CmpOp::Le,
            ">=" => CmpOp::Ge,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            "==" => CmpOp::Eq,
            _ => CmpOp::Ne,
        };
        Ok((Node::Cmp(op, Box::new(lhs), Box::new(rhs)), Ty::Bool))
    }

    fn binary_chain(
        &mut self,
        ops: &[&'static str],
        next: fn(&mut Self) -> Result<(Node, Ty), ParseError>,
    ) -> Result<(Node, Ty), ParseError> {
        let start = self.offset();
        let (mut lhs, ty) = next(self)?;
        while let Some(op) = self.eat_op(ops) {
            self.want(Ty::Num, ty, start)?;
            let at = self.offset();
            let (rhs, rt) = next(self)?;
            self.want(Ty::Num, rt, at)?;
            let op = match op {
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                "*" => BinOp::Mul,
                _ => BinOp::Div,
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, ty))
    }

    fn sum(&mut self) -> Result<(Node, Ty), ParseError> {
        self.binary_chain(&["+", "-"], Self::product)
    }

    fn product(&mut self) -> Result<(Node, Ty), ParseError> {
        self.binary_chain(&["*", "/"], Self::unary)
    }

    fn unary(&mut self) -> Result<(Node, Ty), ParseError> {
        if self.eat_op(&["-"]).is_some() {
            let at = self.offset();
            let (inner, ty) = self.unary()?;
            self.want(Ty::Num, ty, at)?;
            return Ok((Node::Neg(Box::new(inner)), Ty::Num));
        }
        self.power()
    }

    fn power(&mut self) -> Result<(Node, Ty), ParseError> {
        let start = self.offset();
        let (base, ty) = self.atom()?;
        if self.eat_op(&["^"]).is_none() {
            return Ok((base, ty));
        }
        self.want(Ty::Num, ty, start)?;
        let at = self.offset();
        let (exp, et) = self.unary()?;
        self.want(Ty::Num, et, at)?;
        Ok((Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)), Ty::Num))
    }

    fn atom(&mut self) -> Result<(Node, Ty), ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_at(self.end, "expected an operand, found end of input".into()));
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(v) => Ok((Node::Num(v), Ty::Num)),
            Kind::LParen => {
                let inner = self.or()?;
                self.expect(Kind::RParen)?;
                Ok(inner)
            }
            Kind::Ident(name) => self.ident(&name, tok.offset),
            other => Err(self.error_at(tok.offset, format!("expected an operand, found {other}"))),
        }
    }

    fn ident(&mut self, name: &str, offset: usize) -> Result<(Node, Ty), ParseError> {
        if let Some(k) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if k == 0 || k > self.dims {
                return Err(self.error_at(offset, format!("coordinate {name} outside x1..x{}", self.dims)));
            }
            return Ok((Node::Var(k - 1), Ty::Num));
        }
        let arity = match name {
            "abs" => 1,
            "min" | "max" => 2,
            _ => return Err(self.error_at(offset, format!("unknown name '{name}'"))),
        };
        self.expect(Kind::LParen)?;
        let mut args = Vec::new();
        loop {
            let at = self.offset();
            let (a, ty) = self.or()?;
            self.want(Ty::Num, ty, at)?;
            args.push(a);
            if self.peek().is_some_and(|t| t.kind == Kind::Comma) {
                self.pos += 1;
                continue;
            }
            break;
        }
        self.expect(Kind::RParen)?;
        if name == "abs" && args.len() != arity {
            return Err(self.error_at(offset, format!("abs takes 1 argument, got {}", args.len())));
        }
        if args.len() < arity {
            return Err(self.error_at(offset, format!("{name} takes at least 2 arguments, got {}", args.len())));
        }
        let mut it = args.into_iter();
        let first = it.next().expect("arity checked");
        Ok(match name {
            "abs" => (Node::Abs(Box::new(first)), Ty::Num),
            _ => {
                let op = if name == "min" { BinOp::Min } else { BinOp::Max };
                (it.fold(first, |acc, a| Node::Bin(op, Box::new(acc), Box::new(a))), Ty::Num)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, x.len()).unwrap().eval(x).unwrap()
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("x2-x1^2", &[0.5, 1.0]), 0.75);
        assert_eq!(ev("2*x1−x2^2", &[0.5, 1.0]), 0.0);
        assert_eq!(ev("-x1^2", &[3.0]), -9.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("max(x1, 2, -1) + min(abs(-3), 4)", &[1.0]), 5.0);
        assert_eq!(ev("1.5e1 / 3", &[]), 5.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
    }

    #[test]
    fn predicates() {
        let p = Predicate::parse("x1<=x2 && !(x2 > 1−x1)", 2).unwrap();
        assert!(p.eval(&[0.2, 0.5]).unwrap());
        assert!(!p.eval(&[0.2, 0.9]).unwrap());
        assert!(!p.eval(&[0.6, 0.5]).unwrap());
        let q = Predicate::parse("x1 == 0 || abs(x2) * abs(x1) <= 1", 2).unwrap();
        assert!(q.eval(&[0.0, 3.0]).unwrap());
        assert!(!q.eval(&[1.0, 3.0]).unwrap());
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let e = Expr::parse("x1++", 1).unwrap_err();
        assert_eq!(e.offset, 3);
        assert_eq!(Expr::parse("x1 + x3", 2).unwrap_err().offset, 5);
        assert_eq!(Expr::parse("(x1", 1).unwrap_err().offset, 3);
        assert_eq!(Expr::parse("x1 $ 2", 1).unwrap_err().offset, 3);
        assert_eq!(Expr::parse("sin(x1)", 1).unwrap_err().offset, 0);
        assert!(Expr::parse("x1 < 2", 1).is_err());
        assert!(Predicate::parse("x1 + 2", 1).is_err());
        assert!(Expr::parse("x1 && x1", 1).is_err());
        assert!(Expr::parse("", 1).is_err());
    }

    #[test]
    fn division_guard() {
        let e = Expr::parse("1 / x1", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap_err(), EvalError::DivisionGuard(0.0));
        assert_eq!(e.eval(&[2.0]).unwrap(), 0.5);
        assert!(Expr::parse("(-1)^0.5", 0).unwrap().eval(&[]).is_err());
    }

    #[derive(Debug, Clone)]
    enum Tree {
        Const(i8),
        Var(usize),
        Neg(Box<Tree>),
        Abs(Box<Tree>),
        Bin(char, Box<Tree>, Box<Tree>),
    }

    impl Tree {
        fn render(&self) -> String {
            match self {
                Tree::Const(c) => format!("({c})"),
                Tree::Var(k) => format!("x{}", k + 1),
                Tree::Neg(a) => format!("(-{})", a.render()),
                Tree::Abs(a) => format!("abs({})", a.render()),
                Tree::Bin('m', a, b) => format!("min({}, {})", a.render(), b.render()),
                Tree::Bin('M', a, b) => format!("max({}, {})", a.render(), b.render()),
                Tree::Bin(op, a, b) => format!("({} {op} {})", a.render(), b.render()),
            }
        }

        fn value(&self, x: &[f64]) -> f64 {
            match self {
                Tree::Const(c) => *c as f64,
                Tree::Var(k) => x[*k],
                Tree::Neg(a) => -a.value(x),
                Tree::Abs(a) => a.value(x).abs(),
                Tree::Bin(op, a, b) => {
                    let (a, b) = (a.value(x), b.value(x));
                    match op {
                        '+' => a + b,
                        '-' => a - b,
                        '*' => a * b,
                        'm' => a.min(b),
                        _ => a.max(b),
                    }
                }
            }
        }
    }

    fn tree() -> impl proptest::strategy::Strategy<Value = Tree> {
        use proptest::prelude::*;
        let leaf = prop_oneof![any::<i8>().prop_map(Tree::Const), (0usize..3).prop_map(Tree::Var)];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Tree::Neg(Box::new(a))),
                inner.clone().prop_map(|a| Tree::Abs(Box::new(a))),
                (prop::sample::select(vec!['+', '-', '*', 'm', 'M']), inner.clone(), inner)
                    .prop_map(|(op, a, b)| Tree::Bin(op, Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest::proptest! {
        // Fully parenthesized trees evaluate exactly as the same operations in Rust.
        #[test]
        fn parsed_trees_evaluate_like_the_tree(t in tree(), x in proptest::array::uniform3(-4.0f64..4.0)) {
            let e = Expr::parse(&t.render(), 3).unwrap();
            proptest::prop_assert_eq!(e.eval(&x).unwrap().to_bits(), t.value(&x).to_bits());
        }
    }
}
