//! A small language for holomorphic formulas in one variable.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'i' | 'z' | 't' | func '(' expr ')' | '(' expr ')'
//! func    := exp | sin | cos | sinh | cosh | tanh | sqrt | log
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-z^2`
//! is `-(z^2)`. Its exponent must fold to a real integer or half-integer.
//! An expression uses at most one of the variables `z` and `t`. Implicit
//! multiplication such as `2z` is a syntax error.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::math::C64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", render_parse_error(.offset, .message, .expected))]
pub struct ParseError {
    /// Byte offset of the offending token in the source.
    pub offset: usize,
    pub message: String,
    /// Tokens that would have been accepted at `offset`.
    pub expected: Vec<&'static str>,
}

fn render_parse_error(offset: &usize, message: &str, expected: &[&'static str]) -> String {
    if expected.is_empty() {
        format!("parse error at byte {offset}: {message}")
    } else {
        format!(
            "parse error at byte {offset}: {message}; expected {}",
            expected.join(", ")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Z,
    T,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::Z => "z",
            Variable::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
    Log,
}

const FUNCS: [(&str, Func); 8] = [
    ("exp", Func::Exp),
    ("sin", Func::Sin),
    ("cos", Func::Cos),
    ("sinh", Func::Sinh),
    ("cosh", Func::Cosh),
    ("tanh", Func::Tanh),
    ("sqrt", Func::Sqrt),
    ("log", Func::Log),
];

impl Func {
    pub fn name(self) -> &'static str {
        FUNCS
            .iter()
            .find(|(_, f)| *f == self)
            .map(|(n, _)| *n)
            .unwrap_or("?")
    }

    fn apply(self, v: C64) -> C64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Sqrt => v.sqrt(),
            Func::Log => v.ln(),
        }
    }
}

/// Syntax tree node. Constant subtrees are folded during parsing.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(C64),
    Var,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    /// Exponent is an integer or half-integer.
    Pow(Box<Node>, f64),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, v: C64) -> Result<C64, EvalError> {
        Ok(match self {
            Node::Const(c) => *c,
            Node::Var => v,
            Node::Neg(a) => -a.eval(v)?,
            Node::Binary(op, a, b) => {
                let (a, b) = (a.eval(v)?, b.eval(v)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.re == 0.0 && b.im == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Node::Pow(a, e) => pow(a.eval(v)?, *e)?,
            Node::Call(f, a) => f.apply(a.eval(v)?),
        })
    }

    fn fmt_with(&self, var: &str, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => fmt_const(*c, out),
            Node::Var => out.write_str(var),
            Node::Neg(a) => {
                out.write_str("(-")?;
                a.fmt_with(var, out)?;
                out.write_str(")")
            }
            Node::Binary(op, a, b) => {
                out.write_str("(")?;
                a.fmt_with(var, out)?;
                write!(out, " {} ", op.symbol())?;
                b.fmt_with(var, out)?;
                out.write_str(")")
            }
            Node::Pow(a, e) => {
                out.write_str("(")?;
                a.fmt_with(var, out)?;
                out.write_str(" ^ ")?;
                fmt_real(*e, out)?;
                out.write_str(")")
            }
            Node::Call(f, a) => {
                write!(out, "{}(", f.name())?;
                a.fmt_with(var, out)?;
                out.write_str(")")
            }
        }
    }
}

fn pow(base: C64, e: f64) -> Result<C64, EvalError> {
    if base.re == 0.0 && base.im == 0.0 {
        return if e < 0.0 {
            Err(EvalError::ZeroToNegativePower)
        } else if e == 0.0 {
            Ok(C64::new(1.0, 0.0))
        } else {
            Ok(C64::new(0.0, 0.0))
        };
    }
    let twice = 2.0 * e;
    if e == libm::trunc(e) {
        Ok(base.powi(e as i32))
    } else {
        Ok(base.sqrt().powi(twice as i32))
    }
}

// Rust's float Display is the shortest string that parses back exactly.
fn fmt_real(x: f64, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x.is_sign_negative() {
        write!(out, "(-{})", -x)
    } else {
        write!(out, "{x}")
    }
}

fn fmt_const(c: C64, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 && !c.im.is_sign_negative() {
        fmt_real(c.re, out)
    } else if c.re == 0.0 && !c.re.is_sign_negative() {
        out.write_str("(")?;
        fmt_real(c.im, out)?;
        out.write_str(" * i)")
    } else {
        out.write_str("(")?;
        fmt_real(c.re, out)?;
        out.write_str(" + (")?;
        fmt_real(c.im, out)?;
        out.write_str(" * i))")
    }
}

/// A parsed expression. Immutable; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    var: Option<Variable>,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            var: None,
            end: src.len(),
        };
        let root = p.expr()?;
        if let Some(tok) = p.peek() {
            return Err(p.error_at(
                tok.offset,
                format!("unexpected {}", tok.kind.describe()),
                &["operator", "end of input"],
            ));
        }
        Ok(Expr { root, var: p.var })
    }

    pub fn constant(c: C64) -> Self {
        Expr {
            root: Node::Const(c),
            var: None,
        }
    }

    pub fn eval(&self, v: C64) -> Result<C64, EvalError> {
        self.root.eval(v)
    }

    /// The variable used by the expression, or `None` for a constant.
    pub fn variable(&self) -> Option<Variable> {
        self.var
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    /// Value of a constant expression.
    pub fn as_constant(&self) -> Option<C64> {
        match self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesised form that parses back to an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = self.var.map(Variable::name).unwrap_or("z");
        self.root.fmt_with(var, f)
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(_) => "number".to_string(),
            TokKind::Ident(s) => format!("identifier '{s}'"),
            TokKind::Sym(c) => format!("'{c}'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let mantissa = &src[start..i];
            if !mantissa.bytes().any(|b| b.is_ascii_digit()) {
                return Err(ParseError {
                    offset: start,
                    message: "malformed number".into(),
                    expected: alloc::vec!["digit"],
                });
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                let digits = j;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j == digits {
                    return Err(ParseError {
                        offset: j,
                        message: "malformed exponent in number".into(),
                        expected: alloc::vec!["digit"],
                    });
                }
                i = j;
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number '{text}'"),
                expected: Vec::new(),
            })?;
            if !v.is_finite() {
                return Err(ParseError {
                    offset: start,
                    message: format!("number '{text}' overflows"),
                    expected: Vec::new(),
                });
            }
            out.push(Token {
                kind: TokKind::Num(v),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(src[start..i].to_string()),
                offset: start,
            });
        } else if b"+-*/^()".contains(&c) {
            out.push(Token {
                kind: TokKind::Sym(c as char),
                offset: i,
            });
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                offset: i,
                message: format!("unexpected character '{ch}'"),
                expected: Vec::new(),
            });
        }
    }
    Ok(out)
}

const OPERAND: &[&str] = &["number", "i", "z", "t", "function", "'('", "'-'"];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    var: Option<Variable>,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_sym(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Sym(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.peek().map(|t| t.offset).unwrap_or(self.end)
    }

    fn error_at(&self, offset: usize, message: String, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset,
            message,
            expected: expected.to_vec(),
        }
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        match self.peek() {
            Some(t) => self.error_at(
                t.offset,
                format!("unexpected {}", t.kind.describe()),
                expected,
            ),
            None => self.error_at(self.end, "unexpected end of input".into(), expected),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = fold(Node::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = fold(Node::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek_sym() == Some('-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(fold(Node::Neg(Box::new(inner))));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.peek_sym() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let at = self.offset();
        let exponent = self.unary()?;
        let e = match exponent {
            Node::Const(c)
                if c.im == 0.0 && libm::trunc(2.0 * c.re) == 2.0 * c.re && c.re.abs() <= 1e6 =>
            {
                c.re
            }
            _ => {
                return Err(self.error_at(
                    at,
                    "exponent must be a constant integer or half-integer".into(),
                    &["integer or half-integer constant"],
                ))
            }
        };
        Ok(fold(Node::Pow(Box::new(base), e)))
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected(OPERAND));
        };
        match tok.kind {
            TokKind::Num(v) => {
                self.pos += 1;
                Ok(Node::Const(C64::new(v, 0.0)))
            }
            TokKind::Sym('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "i" => Ok(Node::Const(C64::new(0.0, 1.0))),
                    "z" => self.variable(Variable::Z, tok.offset),
                    "t" => self.variable(Variable::T, tok.offset),
                    _ => {
                        let Some(&(_, func)) = FUNCS.iter().find(|(n, _)| *n == name) else {
                            return Err(self.error_at(
                                tok.offset,
                                format!("unknown identifier '{name}'"),
                                &[
                                    "i", "z", "t", "exp", "sin", "cos", "sinh", "cosh", "tanh",
                                    "sqrt", "log",
                                ],
                            ));
                        };
                        if self.peek_sym() != Some('(') {
                            return Err(self.unexpected(&["'('"]));
                        }
                        self.pos += 1;
                        if self.peek_sym() == Some(')') {
                            return Err(self.error_at(
                                self.offset(),
                                format!("function '{name}' takes exactly one argument"),
                                OPERAND,
                            ));
                        }
                        let arg = self.expr()?;
                        self.expect_close()?;
                        Ok(fold(Node::Call(func, Box::new(arg))))
                    }
                }
            }
            TokKind::Sym(_) => Err(self.unexpected(OPERAND)),
        }
    }

    fn variable(&mut self, v: Variable, offset: usize) -> Result<Node, ParseError> {
        match self.var {
            Some(prev) if prev != v => Err(self.error_at(
                offset,
                format!(
                    "expression mixes the variables {} and {}",
                    prev.name(),
                    v.name()
                ),
                &[prev.name()],
            )),
            _ => {
                self.var = Some(v);
                Ok(Node::Var)
            }
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        if self.peek_sym() == Some(')') {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&["')'", "operator"]))
        }
    }
}

/// Replaces a node whose children are all constants by its value, unless
/// evaluation fails or is not finite (those are left for run time).
fn fold(node: Node) -> Node {
    let foldable = match &node {
        Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => matches!(**a, Node::Const(_)),
        Node::Binary(_, a, b) => matches!(**a, Node::Const(_)) && matches!(**b, Node::Const(_)),
        _ => false,
    };
    if foldable {
        if let Ok(c) = node.eval(C64::new(0.0, 0.0)) {
            if c.re.is_finite() && c.im.is_finite() {
                // drop signed zeros so printing is a fixed point
                return Node::Const(C64::new(c.re + 0.0, c.im + 0.0));
            }
        }
    }
    node
}
