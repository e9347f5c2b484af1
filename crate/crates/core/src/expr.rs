//! A small expression language for the scalar functions of a problem:
//! coefficients `a(t)`, sources `f(t)`, load weights `m(s)` and kernels `K(t,s)`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := primary ('^' unary)?          // right-associative, binds tighter than unary minus
//! primary := number | 'pi' | 'e' | var | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! So `-2^2 == -4`, `2^3^2 == 512` and `2^-1 == 0.5`. There is no implicit
//! multiplication: `2t` is a syntax error.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared variable `{name}` at position {pos}")]
    UndeclaredVariable { name: String, pos: usize },
    #[error("expected {expected} variable binding(s), got {got}")]
    Bindings { expected: usize, got: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{node}`: {msg}")]
    Domain { node: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

/// Expression tree node. Variables are indices into the owning [`Expr`]'s
/// variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Const(Constant),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with the variables it may reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

impl Expr {
    /// Parses `text`, accepting only the variables named in `allowed_vars`.
    /// Bindings passed to [`Expr::eval`] follow the order of `allowed_vars`.
    pub fn parse(text: &str, allowed_vars: &[&str]) -> Result<Self, ExprError> {
        let tokens = lex(text)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            vars: allowed_vars,
            end: text.len(),
        };
        if tokens.is_empty() {
            return Err(ExprError::Syntax {
                pos: 0,
                msg: "empty expression".into(),
            });
        }
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ExprError::Syntax {
                pos: tok.pos,
                msg: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(Expr {
            root,
            vars: allowed_vars.iter().map(|v| v.to_string()).collect(),
        })
    }

    /// Builds an expression from a tree; used by generators and tests.
    pub fn from_node(root: Node, vars: &[&str]) -> Self {
        Expr {
            root,
            vars: vars.iter().map(|v| v.to_string()).collect(),
        }
    }

    /// A constant expression over the given variables.
    pub fn constant(value: f64, vars: &[&str]) -> Self {
        Self::from_node(Node::Num(value), vars)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates with positional bindings, one per declared variable.
    pub fn eval(&self, bindings: &[f64]) -> Result<f64, ExprError> {
        if bindings.len() != self.vars.len() {
            return Err(ExprError::Bindings {
                expected: self.vars.len(),
                got: bindings.len(),
            });
        }
        self.eval_node(&self.root, bindings)
    }

    /// Evaluates with named bindings. Every declared variable that the tree
    /// actually uses must be bound.
    pub fn eval_map(&self, bindings: &HashMap<&str, f64>) -> Result<f64, ExprError> {
        let mut values = Vec::with_capacity(self.vars.len());
        for (idx, name) in self.vars.iter().enumerate() {
            match bindings.get(name.as_str()) {
                Some(v) => values.push(*v),
                None if self.uses_var(idx) => return Err(ExprError::Unbound(name.clone())),
                None => values.push(f64::NAN),
            }
        }
        self.eval_node(&self.root, &values)
    }

    fn uses_var(&self, idx: usize) -> bool {
        fn walk(n: &Node, idx: usize) -> bool {
            match n {
                Node::Var(i) => *i == idx,
                Node::Num(_) | Node::Const(_) => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a, idx),
                Node::Bin(_, a, b) => walk(a, idx) || walk(b, idx),
            }
        }
        walk(&self.root, idx)
    }

    fn domain_err(&self, node: &Node, msg: &str) -> ExprError {
        ExprError::Domain {
            node: self.render(node),
            msg: msg.to_string(),
        }
    }

    fn eval_node(&self, node: &Node, b: &[f64]) -> Result<f64, ExprError> {
        let v = match node {
            Node::Num(v) => *v,
            Node::Const(Constant::Pi) => std::f64::consts::PI,
            Node::Const(Constant::E) => std::f64::consts::E,
            Node::Var(i) => b[*i],
            Node::Neg(a) => -self.eval_node(a, b)?,
            Node::Bin(op, l, r) => {
                let x = self.eval_node(l, b)?;
                let y = self.eval_node(r, b)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(self.domain_err(node, "division by zero"));
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            Node::Call(f, a) => {
                let x = self.eval_node(a, b)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(self.domain_err(node, "log of non-positive value"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain_err(node, "sqrt of negative value"));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(self.domain_err(node, "non-finite result"));
        }
        Ok(v)
    }

    fn render(&self, node: &Node) -> String {
        let mut s = String::new();
        write_node(&mut s, node, &self.vars).expect("writing to a String cannot fail");
        s
    }
}

fn write_node(out: &mut impl fmt::Write, node: &Node, vars: &[String]) -> fmt::Result {
    match node {
        Node::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(out, "(-{})", -v),
        Node::Num(v) => write!(out, "{v}"),
        Node::Const(Constant::Pi) => out.write_str("pi"),
        Node::Const(Constant::E) => out.write_str("e"),
        Node::Var(i) => out.write_str(&vars[*i]),
        Node::Neg(a) => {
            out.write_str("(-")?;
            write_node(out, a, vars)?;
            out.write_str(")")
        }
        Node::Bin(op, l, r) => {
            out.write_str("(")?;
            write_node(out, l, vars)?;
            write!(out, " {} ", op.symbol())?;
            write_node(out, r, vars)?;
            out.write_str(")")
        }
        Node::Call(f, a) => {
            write!(out, "{}(", f.name())?;
            write_node(out, a, vars)?;
            out.write_str(")")
        }
    }
}

/// Prints a fully parenthesised form that parses back to the same tree value.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.vars)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Op(c) => format!("`{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent only when followed by digits, so `2e` stays `2` `e`
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(v),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(text[start..i].to_string()),
                pos: start,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or(c);
                    return Err(ExprError::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{ch}`"),
                    });
                }
            };
            out.push(Token { kind, pos: start });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn error_here(&self, msg: &str) -> ExprError {
        match self.peek() {
            Some(tok) => ExprError::Syntax {
                pos: tok.pos,
                msg: format!("{msg}, found {}", tok.kind.describe()),
            },
            None => ExprError::Syntax {
                pos: self.end,
                msg: format!("{msg}, found end of input"),
            },
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here("expected operand"));
        };
        match tok.kind {
            TokenKind::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
                        return Err(self.error_here(&format!("expected `(` after `{name}`")));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if let Some(idx) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(idx));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Const(Constant::Pi)),
                    "e" => Ok(Node::Const(Constant::E)),
                    _ => Err(ExprError::UndeclaredVariable { name, pos: tok.pos }),
                }
            }
            _ => Err(self.error_here("expected operand")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error_here("expected `)`")),
        }
    }
}
