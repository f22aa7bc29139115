//! A small arithmetic language for source terms over `x`, `y`.
//!
//! ```text
//! expr   = term { ("+" | "-") term } ;
//! term   = unary { ("*" | "/") unary } ;
//! unary  = ("+" | "-") unary | power ;
//! power  = atom [ "^" unary ] ;
//! atom   = number | variable | "pi" | func "(" expr ")" | "(" expr ")" ;
//! variable = "x" | "y" | "x1" | "x2" ;
//! func   = "sin" | "cos" | "exp" | "ln" | "sqrt" | "abs" | "step" ;
//! number = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ```
//!
//! `step(t)` is 1 for `t > 0` and 0 otherwise. `^` is right associative and
//! binds tighter than unary minus, so `-x^2` is `-(x^2)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Step,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "step" => Func::Step,
            _ => return None,
        })
    }

    fn apply(self, t: f64) -> f64 {
        match self {
            Func::Sin => t.sin(),
            Func::Cos => t.cos(),
            Func::Exp => t.exp(),
            Func::Ln => t.ln(),
            Func::Sqrt => t.sqrt(),
            Func::Abs => t.abs(),
            Func::Step => f64::from(u8::from(t > 0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => x,
            Node::Y => y,
            Node::Neg(a) => -a.eval(x, y),
            Node::Call(f, a) => f.apply(a.eval(x, y)),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            let text = &src[pos..end];
            let v = text.parse().map_err(|_| parse_error(src, chars[start].0, "malformed number"))?;
            out.push((pos, Token::Num(v)));
        } else if c.is_ascii_alphabetic() {
            while i < chars.len() && chars[i].1.is_ascii_alphanumeric() {
                i += 1;
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            out.push((pos, Token::Ident(src[pos..end].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((pos, Token::Op(c)));
            i += 1;
        } else {
            return Err(parse_error(src, pos, &format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

fn parse_error(src: &str, pos: usize, msg: &str) -> Error {
    Error::Parse(format!("expression `{src}` at offset {pos}: {msg}"))
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Token)>,
    next: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.next).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.next).map_or(self.src.len(), |t| t.0)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.next += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(parse_error(self.src, self.pos(), &format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                '+'
            } else if self.eat('-') {
                '-'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                '*'
            } else if self.eat('/') {
                '/'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let pos = self.pos();
        let Some(tok) = self.peek().cloned() else {
            return Err(parse_error(self.src, pos, "unexpected end of input"));
        };
        self.next += 1;
        match tok {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Token::Ident(name) => match name.as_str() {
                "x" | "x1" => Ok(Node::X),
                "y" | "x2" => Ok(Node::Y),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                _ => {
                    let f = Func::from_name(&name)
                        .ok_or_else(|| parse_error(self.src, pos, &format!("unknown name `{name}`")))?;
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Node::Call(f, Box::new(arg)))
                }
            },
            Token::Op(c) => Err(parse_error(self.src, pos, &format!("unexpected `{c}`"))),
        }
    }
}

/// A parsed expression; keeps its source text for display and round trips.
#[derive(Debug, Clone)]
pub struct Expr {
    src: String,
    root: Node,
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.root.eval(x, y)
    }

    pub fn source(&self) -> &str {
        &self.src
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(src: &str) -> Result<Expr> {
        let mut p = Parser { src, tokens: tokenize(src)?, next: 0 };
        let root = p.expr()?;
        if p.next != p.tokens.len() {
            return Err(parse_error(src, p.pos(), "trailing input"));
        }
        Ok(Expr { src: src.to_string(), root })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}
