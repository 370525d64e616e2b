//! Metric-component expressions: AST, recursive-descent parser, printer,
//! and evaluation into jets.
//!
//! Grammar (standard precedence, `^` binds tightest and associates right):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
//! ```
//!
//! `IDENT` is a declared coordinate name or one of the built-in functions
//! `sin cos tan exp log sqrt sinh cosh tanh`.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetFn};

/// Expression tree node. `Var` indices refer to the coordinate list the
/// expression was parsed against.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(usize),
    Neg(Box<Expr>),
    Unary(JetFn, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

const FUNCTIONS: [(&str, JetFn); 9] = [
    ("sin", JetFn::Sin),
    ("cos", JetFn::Cos),
    ("tan", JetFn::Tan),
    ("exp", JetFn::Exp),
    ("log", JetFn::Log),
    ("sqrt", JetFn::Sqrt),
    ("sinh", JetFn::Sinh),
    ("cosh", JetFn::Cosh),
    ("tanh", JetFn::Tanh),
];

/// True when `name` is one of the built-in function names and therefore not
/// usable as a coordinate.
pub fn is_function_name(name: &str) -> bool {
    FUNCTIONS.iter().any(|(f, _)| *f == name)
}

fn function_by_name(name: &str) -> Option<JetFn> {
    FUNCTIONS.iter().find(|(f, _)| *f == name).map(|(_, j)| *j)
}

fn function_name(f: JetFn) -> &'static str {
    FUNCTIONS
        .iter()
        .find(|(_, j)| *j == f)
        .map(|(name, _)| *name)
        .expect("only grammar functions appear in parsed expressions")
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Number(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token and the byte offset where it starts.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos] == b'.' {
                self.pos += 1;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
            if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
                let mark = self.pos;
                self.pos += 1;
                if self.pos < self.src.len()
                    && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                } else {
                    // not an exponent after all; `e` starts the next token
                    self.pos = mark;
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                offset: start,
                expected: "a numeric literal".into(),
                found: format!("`{text}`"),
            })?;
            return Ok((Tok::Number(value), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((Tok::Ident(text.to_string()), start));
        }
        Err(Error::Syntax {
            offset: start,
            expected: "a number, identifier, operator, or parenthesis".into(),
            found: format!("`{}`", c as char),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    coords: &'a [String],
    current: Tok,
    offset: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, coords: &'a [String]) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let (current, offset) = lexer.next()?;
        Ok(Parser {
            lexer,
            coords,
            current,
            offset,
        })
    }

    fn advance(&mut self) -> Result<()> {
        let (tok, offset) = self.lexer.next()?;
        self.current = tok;
        self.offset = offset;
        Ok(())
    }

    fn error(&self, expected: &str) -> Error {
        Error::Syntax {
            offset: self.offset,
            expected: expected.into(),
            found: self.current.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.current {
                Tok::Plus => {
                    self.advance()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.advance()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.current {
                Tok::Star => {
                    self.advance()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.advance()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.current == Tok::Minus {
            self.advance()?;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.current == Tok::Caret {
            self.advance()?;
            // right associative: the exponent is itself a factor
            let exponent = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.current.clone() {
            Tok::Number(v) => {
                self.advance()?;
                Ok(Expr::Number(v))
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                if self.current != Tok::RParen {
                    return Err(self.error("`)`"));
                }
                self.advance()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let ident_offset = self.offset;
                self.advance()?;
                if self.current == Tok::LParen {
                    let f = function_by_name(&name).ok_or(Error::UnknownIdentifier {
                        name: name.clone(),
                        offset: ident_offset,
                    })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    if self.current != Tok::RParen {
                        return Err(self.error("`)`"));
                    }
                    self.advance()?;
                    Ok(Expr::Unary(f, Box::new(arg)))
                } else {
                    match self.coords.iter().position(|c| *c == name) {
                        Some(i) => Ok(Expr::Var(i)),
                        None => Err(Error::UnknownIdentifier {
                            name,
                            offset: ident_offset,
                        }),
                    }
                }
            }
            _ => Err(self.error("a number, identifier, `-`, or `(`")),
        }
    }
}

/// Parse `text` against the declared coordinate names.
pub fn parse_expression(text: &str, coords: &[String]) -> Result<Expr> {
    let mut parser = Parser::new(text, coords)?;
    let e = parser.expr()?;
    if parser.current != Tok::End {
        return Err(parser.error("end of input"));
    }
    Ok(e)
}

impl Expr {
    /// Evaluate to a jet of the given truncation order at `point`.
    /// Coordinate references become seeded jet variables.
    pub fn eval(&self, point: &[f64], order: usize) -> Result<Jet> {
        let n = point.len();
        match self {
            Expr::Number(v) => Ok(Jet::constant(*v, n, order)),
            Expr::Var(i) => Jet::variable(*i, point[*i], n, order),
            Expr::Neg(a) => Ok(-&a.eval(point, order)?),
            Expr::Unary(f, a) => {
                let ja = a.eval(point, order)?;
                ja.apply(*f).map_err(|e| self.locate(e))
            }
            Expr::Add(a, b) => Ok(&a.eval(point, order)? + &b.eval(point, order)?),
            Expr::Sub(a, b) => Ok(&a.eval(point, order)? - &b.eval(point, order)?),
            Expr::Mul(a, b) => Ok(&a.eval(point, order)? * &b.eval(point, order)?),
            Expr::Div(a, b) => {
                let ja = a.eval(point, order)?;
                let jb = b.eval(point, order)?;
                ja.try_div(&jb).map_err(|e| self.locate(e))
            }
            Expr::Pow(a, b) => {
                let ja = a.eval(point, order)?;
                // A literal exponent (possibly negated) uses the direct power
                // rule; anything else goes through exp(b·log a), which needs
                // a positive base.
                if let Some(r) = b.literal_value() {
                    return ja.apply(JetFn::Pow(r)).map_err(|e| self.locate(e));
                }
                let jb = b.eval(point, order)?;
                let log = ja.apply(JetFn::Log).map_err(|e| self.locate(e))?;
                (&jb * &log).apply(JetFn::Exp)
            }
        }
    }

    /// Plain real evaluation, sharing the domain rules of the jet path.
    pub fn eval_value(&self, point: &[f64]) -> Result<f64> {
        Ok(self.eval(point, 0)?.value())
    }

    fn literal_value(&self) -> Option<f64> {
        match self {
            Expr::Number(v) => Some(*v),
            Expr::Neg(inner) => inner.literal_value().map(|v| -v),
            _ => None,
        }
    }

    fn locate(&self, err: Error) -> Error {
        match err {
            Error::Domain {
                context,
                message,
                value,
            } => Error::Domain {
                context: format!("{context} (in `{}`)", self.pretty_anon()),
                message,
                value,
            },
            other => other,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Number(_) | Expr::Var(_) | Expr::Unary(..) => 5,
        }
    }

    fn write_with(&self, out: &mut String, coords: Option<&[String]>) {
        let prec = self.precedence();
        let child = |out: &mut String, e: &Expr, strict: bool| {
            let need = e.precedence() < prec || (strict && e.precedence() == prec);
            if need {
                out.push('(');
            }
            e.write_with(out, coords);
            if need {
                out.push(')');
            }
        };
        match self {
            Expr::Number(v) => {
                if *v == v.trunc() && v.abs() < 1e15 && !v.is_sign_negative() {
                    out.push_str(&format!("{}", *v as i64));
                } else {
                    out.push_str(&format!("{v}"));
                }
            }
            Expr::Var(i) => match coords {
                Some(names) => out.push_str(&names[*i]),
                None => out.push_str(&format!("x{i}")),
            },
            Expr::Neg(a) => {
                out.push('-');
                child(out, a, false);
            }
            Expr::Unary(func, a) => {
                out.push_str(function_name(*func));
                out.push('(');
                a.write_with(out, coords);
                out.push(')');
            }
            // binary chains parse left-associatively, so a right child of
            // equal precedence always needs parentheses to round-trip
            Expr::Add(a, b) => {
                child(out, a, false);
                out.push_str(" + ");
                child(out, b, true);
            }
            Expr::Sub(a, b) => {
                child(out, a, false);
                out.push_str(" - ");
                child(out, b, true);
            }
            Expr::Mul(a, b) => {
                child(out, a, false);
                out.push('*');
                child(out, b, true);
            }
            Expr::Div(a, b) => {
                child(out, a, false);
                out.push('/');
                child(out, b, true);
            }
            Expr::Pow(a, b) => {
                child(out, a, true);
                out.push('^');
                child(out, b, false);
            }
        }
    }

    /// Render with coordinate names; reparsing the result yields an equal AST.
    pub fn pretty(&self, coords: &[String]) -> String {
        let mut out = String::new();
        self.write_with(&mut out, Some(coords));
        out
    }

    fn pretty_anon(&self) -> String {
        let mut out = String::new();
        self.write_with(&mut out, None);
        out
    }
}
