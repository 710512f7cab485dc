//! Lexer and recursive-descent parser for the concrete syntax.
//!
//! Grammar sketch (see README for the full reference):
//!
//! ```text
//! type  := arrow
//! arrow := sum ("->" arrow)? | ("forall"|"exists"|"mu") IDENT "." arrow
//! sum   := prod ("+" prod)*
//! prod  := tatom ("*" tatom)*
//! tatom := IDENT | "unit" | "int" | "bool" | "(" type ")"
//!
//! term  := "fun" "(" IDENT ":" type ")" "=>" term
//!        | "tfun" IDENT "=>" term
//!        | "if" term "then" term "else" term
//!        | "case" term "of" "inl" IDENT "=>" term "|" "inr" IDENT "=>" term
//!        | "unpack" "<" IDENT "," IDENT ">" "=" term "in" term
//!        | "pack" "[" type "]" postfix "as" type
//!        | cmp
//! cmp   := add (("="|"<"|"<=") add)?
//! add   := add ("+"|"-") appx | appx
//! appx  := appx postfix | appx "[" type "]" | prefixed | postfix
//! prefixed := ("inl"|"inr"|"fold") "[" type "]" postfix | "unfold" postfix
//! postfix := atom (".1" | ".2")*
//! atom  := IDENT | INT | "-" INT | "true" | "false" | "<>"
//!        | "<" term "," term ">" | "(" term ")" | "[]"   (hole, contexts only)
//! ```
//!
//! Files: a `.fmu` file is either one term or a sequence of
//! `def name = term;` items (later defs may refer to earlier ones).

use crate::context::Ctx;
use crate::syntax::{PrimOp, Term, TmVar, Type};
use num_bigint::BigInt;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "fun", "tfun", "if", "then", "else", "case", "of", "inl", "inr", "fold", "unfold", "pack",
    "unpack", "as", "in", "forall", "exists", "mu", "unit", "int", "bool", "true", "false", "def",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct SpannedTok {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'-') if self.peek2() == Some(b'-') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_tok(&mut self) -> Result<SpannedTok, ParseError> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let mk = |tok| SpannedTok { tok, line, col };
        let c = match self.peek() {
            None => return Ok(mk(Tok::Eof)),
            Some(c) => c,
        };
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(d) = self.peek() {
                if d.is_ascii_digit() {
                    s.push(d as char);
                    self.bump();
                } else {
                    break;
                }
            }
            return Ok(mk(Tok::Int(s.parse().unwrap())));
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'%' {
            let mut s = String::new();
            while let Some(d) = self.peek() {
                if d.is_ascii_alphanumeric() || matches!(d, b'_' | b'\'' | b'#' | b'%') {
                    s.push(d as char);
                    self.bump();
                } else {
                    break;
                }
            }
            if let Some(kw) = KEYWORDS.iter().find(|k| **k == s) {
                return Ok(mk(Tok::Kw(kw)));
            }
            return Ok(mk(Tok::Ident(s)));
        }
        macro_rules! sym2 {
            ($a:expr, $b:expr, $s:expr, $fallback:expr) => {{
                self.bump();
                if self.peek() == Some($b) {
                    self.bump();
                    return Ok(mk(Tok::Sym($s)));
                }
                return Ok(mk(Tok::Sym($fallback)));
            }};
        }
        match c {
            b'-' => sym2!(b'-', b'>', "->", "-"),
            b'=' => sym2!(b'=', b'>', "=>", "="),
            b'<' => {
                self.bump();
                match self.peek() {
                    Some(b'=') => {
                        self.bump();
                        Ok(mk(Tok::Sym("<=")))
                    }
                    Some(b'>') => {
                        self.bump();
                        Ok(mk(Tok::Sym("<>")))
                    }
                    _ => Ok(mk(Tok::Sym("<"))),
                }
            }
            b'[' => {
                self.bump();
                if self.peek() == Some(b']') {
                    self.bump();
                    return Ok(mk(Tok::Sym("[]")));
                }
                Ok(mk(Tok::Sym("[")))
            }
            b'+' | b'*' | b'.' | b',' | b'(' | b')' | b']' | b'>' | b':' | b'|' | b';' => {
                self.bump();
                let s = match c {
                    b'+' => "+",
                    b'*' => "*",
                    b'.' => ".",
                    b',' => ",",
                    b'(' => "(",
                    b')' => ")",
                    b']' => "]",
                    b'>' => ">",
                    b':' => ":",
                    b'|' => "|",
                    b';' => ";",
                    _ => unreachable!(),
                };
                Ok(mk(Tok::Sym(s)))
            }
            _ => Err(ParseError {
                line,
                col,
                message: format!("unexpected character '{}'", c as char),
                expected: vec![],
            }),
        }
    }
}

fn lex(src: &str) -> Result<Vec<SpannedTok>, ParseError> {
    let mut lx = Lexer::new(src);
    let mut out = Vec::new();
    loop {
        let t = lx.next_tok()?;
        let done = t.tok == Tok::Eof;
        out.push(t);
        if done {
            return Ok(out);
        }
    }
}

struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
    /// When true, `[]` parses as the context hole.
    allow_hole: bool,
}

/// Internal: terms extended with a hole, so the same parser serves contexts.
#[derive(Debug, Clone)]
enum PTerm {
    Term(Term),
    Hole,
    // Structural nodes that may contain a hole somewhere.
    Prim(PrimOp, Vec<PTerm>),
    If(Box<PTerm>, Box<PTerm>, Box<PTerm>),
    Pair(Box<PTerm>, Box<PTerm>),
    Fst(Box<PTerm>),
    Snd(Box<PTerm>),
    Inl(Type, Box<PTerm>),
    Inr(Type, Box<PTerm>),
    Case(Box<PTerm>, TmVar, Box<PTerm>, TmVar, Box<PTerm>),
    Lam(TmVar, Type, Box<PTerm>),
    App(Box<PTerm>, Box<PTerm>),
    TLam(String, Box<PTerm>),
    TApp(Box<PTerm>, Type),
    Pack(Type, Box<PTerm>, Type),
    Unpack(Box<PTerm>, String, TmVar, Box<PTerm>),
    Fold(Type, Box<PTerm>),
    Unfold(Box<PTerm>),
}

impl PTerm {
    fn into_term(self) -> Result<Term, String> {
        match self {
            PTerm::Term(t) => Ok(t),
            PTerm::Hole => Err("hole [] not allowed in a term".into()),
            PTerm::Prim(op, args) => Ok(Term::Prim(
                op,
                args.into_iter().map(|a| a.into_term()).collect::<Result<_, _>>()?,
            )),
            PTerm::If(a, b, c) => Ok(Term::If(
                Box::new(a.into_term()?),
                Box::new(b.into_term()?),
                Box::new(c.into_term()?),
            )),
            PTerm::Pair(a, b) => Ok(Term::Pair(Box::new(a.into_term()?), Box::new(b.into_term()?))),
            PTerm::Fst(a) => Ok(Term::Fst(Box::new(a.into_term()?))),
            PTerm::Snd(a) => Ok(Term::Snd(Box::new(a.into_term()?))),
            PTerm::Inl(t, a) => Ok(Term::Inl(t, Box::new(a.into_term()?))),
            PTerm::Inr(t, a) => Ok(Term::Inr(t, Box::new(a.into_term()?))),
            PTerm::Case(s, x1, e1, x2, e2) => Ok(Term::Case(
                Box::new(s.into_term()?),
                x1,
                Box::new(e1.into_term()?),
                x2,
                Box::new(e2.into_term()?),
            )),
            PTerm::Lam(x, t, b) => Ok(Term::Lam(x, t, Box::new(b.into_term()?))),
            PTerm::App(a, b) => Ok(Term::App(Box::new(a.into_term()?), Box::new(b.into_term()?))),
            PTerm::TLam(a, b) => Ok(Term::TLam(a, Box::new(b.into_term()?))),
            PTerm::TApp(a, t) => Ok(Term::TApp(Box::new(a.into_term()?), t)),
            PTerm::Pack(t1, a, t2) => Ok(Term::Pack(t1, Box::new(a.into_term()?), t2)),
            PTerm::Unpack(a, al, x, b) => {
                Ok(Term::Unpack(Box::new(a.into_term()?), al, x, Box::new(b.into_term()?)))
            }
            PTerm::Fold(t, a) => Ok(Term::Fold(t, Box::new(a.into_term()?))),
            PTerm::Unfold(a) => Ok(Term::Unfold(Box::new(a.into_term()?))),
        }
    }

    fn into_ctx(self) -> Result<Ctx, String> {
        fn term_of(p: PTerm) -> Result<Term, String> {
            p.into_term()
        }
        match self {
            PTerm::Hole => Ok(Ctx::Hole),
            PTerm::Term(_) => Err("context contains no hole".into()),
            PTerm::Prim(op, args) => {
                let idx = args
                    .iter()
                    .position(|a| a.has_hole())
                    .ok_or("context contains no hole")?;
                let mut pre = Vec::new();
                let mut post = Vec::new();
                let mut hole = None;
                for (i, a) in args.into_iter().enumerate() {
                    if i < idx {
                        pre.push(term_of(a)?);
                    } else if i == idx {
                        hole = Some(a.into_ctx()?);
                    } else {
                        post.push(term_of(a)?);
                    }
                }
                Ok(Ctx::Prim(op, pre, Box::new(hole.unwrap()), post))
            }
            PTerm::If(a, b, c) => match (a.has_hole(), b.has_hole(), c.has_hole()) {
                (true, _, _) => Ok(Ctx::If0(Box::new(a.into_ctx()?), term_of(*b)?, term_of(*c)?)),
                (_, true, _) => Ok(Ctx::If1(term_of(*a)?, Box::new(b.into_ctx()?), term_of(*c)?)),
                _ => Ok(Ctx::If2(term_of(*a)?, term_of(*b)?, Box::new(c.into_ctx()?))),
            },
            PTerm::Pair(a, b) => {
                if a.has_hole() {
                    Ok(Ctx::Pair0(Box::new(a.into_ctx()?), term_of(*b)?))
                } else {
                    Ok(Ctx::Pair1(term_of(*a)?, Box::new(b.into_ctx()?)))
                }
            }
            PTerm::Fst(a) => Ok(Ctx::Fst(Box::new(a.into_ctx()?))),
            PTerm::Snd(a) => Ok(Ctx::Snd(Box::new(a.into_ctx()?))),
            PTerm::Inl(t, a) => Ok(Ctx::Inl(t, Box::new(a.into_ctx()?))),
            PTerm::Inr(t, a) => Ok(Ctx::Inr(t, Box::new(a.into_ctx()?))),
            PTerm::Case(s, x1, e1, x2, e2) => {
                match (s.has_hole(), e1.has_hole(), e2.has_hole()) {
                    (true, _, _) => Ok(Ctx::Case0(
                        Box::new(s.into_ctx()?),
                        x1,
                        term_of(*e1)?,
                        x2,
                        term_of(*e2)?,
                    )),
                    (_, true, _) => Ok(Ctx::Case1(
                        term_of(*s)?,
                        x1,
                        Box::new(e1.into_ctx()?),
                        x2,
                        term_of(*e2)?,
                    )),
                    _ => Ok(Ctx::Case2(
                        term_of(*s)?,
                        x1,
                        term_of(*e1)?,
                        x2,
                        Box::new(e2.into_ctx()?),
                    )),
                }
            }
            PTerm::Lam(x, t, b) => Ok(Ctx::Lam(x, t, Box::new(b.into_ctx()?))),
            PTerm::App(a, b) => {
                if a.has_hole() {
                    Ok(Ctx::App0(Box::new(a.into_ctx()?), term_of(*b)?))
                } else {
                    Ok(Ctx::App1(term_of(*a)?, Box::new(b.into_ctx()?)))
                }
            }
            PTerm::TLam(a, b) => Ok(Ctx::TLam(a, Box::new(b.into_ctx()?))),
            PTerm::TApp(a, t) => Ok(Ctx::TApp(Box::new(a.into_ctx()?), t)),
            PTerm::Pack(t1, a, t2) => Ok(Ctx::Pack(t1, Box::new(a.into_ctx()?), t2)),
            PTerm::Unpack(a, al, x, b) => {
                if a.has_hole() {
                    Ok(Ctx::Unpack0(Box::new(a.into_ctx()?), al, x, term_of(*b)?))
                } else {
                    Ok(Ctx::Unpack1(term_of(*a)?, al, x, Box::new(b.into_ctx()?)))
                }
            }
            PTerm::Fold(t, a) => Ok(Ctx::Fold(t, Box::new(a.into_ctx()?))),
            PTerm::Unfold(a) => Ok(Ctx::Unfold(Box::new(a.into_ctx()?))),
        }
    }

    fn has_hole(&self) -> bool {
        match self {
            PTerm::Hole => true,
            PTerm::Term(_) => false,
            PTerm::Prim(_, args) => args.iter().any(|a| a.has_hole()),
            PTerm::If(a, b, c) | PTerm::Case(a, _, b, _, c) => {
                a.has_hole() || b.has_hole() || c.has_hole()
            }
            PTerm::Pair(a, b) | PTerm::App(a, b) | PTerm::Unpack(a, _, _, b) => {
                a.has_hole() || b.has_hole()
            }
            PTerm::Fst(a)
            | PTerm::Snd(a)
            | PTerm::Inl(_, a)
            | PTerm::Inr(_, a)
            | PTerm::Lam(_, _, a)
            | PTerm::TLam(_, a)
            | PTerm::TApp(a, _)
            | PTerm::Pack(_, a, _)
            | PTerm::Fold(_, a)
            | PTerm::Unfold(a) => a.has_hole(),
        }
    }
}

impl Parser {
    fn cur(&self) -> &SpannedTok {
        &self.toks[self.pos]
    }

    fn err<T>(&self, message: impl Into<String>, expected: &[&str]) -> Result<T, ParseError> {
        let t = self.cur();
        Err(ParseError {
            line: t.line,
            col: t.col,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_sym(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.cur().tok == Tok::Sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("found {:?}", self.cur().tok), &[s])
        }
    }

    fn eat_kw(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.cur().tok == Tok::Kw(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("found {:?}", self.cur().tok), &[s])
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.cur().tok.clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("found {other:?}"), &["identifier"]),
        }
    }

    // ---- types ----

    fn parse_type(&mut self) -> Result<Type, ParseError> {
        match self.cur().tok.clone() {
            Tok::Kw(kw @ ("forall" | "exists" | "mu")) => {
                self.bump();
                let a = self.ident()?;
                self.eat_sym(".")?;
                let body = self.parse_type()?;
                Ok(match kw {
                    "forall" => Type::All(a, Box::new(body)),
                    "exists" => Type::Exist(a, Box::new(body)),
                    _ => Type::Rec(a, Box::new(body)),
                })
            }
            _ => {
                let lhs = self.parse_sum()?;
                if self.cur().tok == Tok::Sym("->") {
                    self.bump();
                    let rhs = self.parse_type()?;
                    Ok(Type::Fun(Box::new(lhs), Box::new(rhs)))
                } else {
                    Ok(lhs)
                }
            }
        }
    }

    fn parse_sum(&mut self) -> Result<Type, ParseError> {
        let mut t = self.parse_prod()?;
        while self.cur().tok == Tok::Sym("+") {
            self.bump();
            let r = self.parse_prod()?;
            t = Type::Sum(Box::new(t), Box::new(r));
        }
        Ok(t)
    }

    fn parse_prod(&mut self) -> Result<Type, ParseError> {
        let mut t = self.parse_tatom()?;
        while self.cur().tok == Tok::Sym("*") {
            self.bump();
            let r = self.parse_tatom()?;
            t = Type::Pair(Box::new(t), Box::new(r));
        }
        Ok(t)
    }

    fn parse_tatom(&mut self) -> Result<Type, ParseError> {
        match self.cur().tok.clone() {
            Tok::Kw("unit") => {
                self.bump();
                Ok(Type::Unit)
            }
            Tok::Kw("int") => {
                self.bump();
                Ok(Type::Int)
            }
            Tok::Kw("bool") => {
                self.bump();
                Ok(Type::Bool)
            }
            Tok::Ident(a) => {
                self.bump();
                Ok(Type::Var(a))
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.parse_type()?;
                self.eat_sym(")")?;
                Ok(t)
            }
            Tok::Kw(kw @ ("forall" | "exists" | "mu")) => {
                // permit un-parenthesized quantifier in atom position of * / +
                // only via parens; be strict here
                self.err(format!("quantifier '{kw}' needs parentheses here"), &["(", "identifier"])
            }
            other => self.err(format!("found {other:?}"), &["type"]),
        }
    }

    // ---- terms ----

    fn parse_term(&mut self) -> Result<PTerm, ParseError> {
        match self.cur().tok.clone() {
            Tok::Kw("fun") => {
                self.bump();
                self.eat_sym("(")?;
                let x = self.ident()?;
                self.eat_sym(":")?;
                let t = self.parse_type()?;
                self.eat_sym(")")?;
                self.eat_sym("=>")?;
                let body = self.parse_term()?;
                Ok(PTerm::Lam(x, t, Box::new(body)))
            }
            Tok::Kw("tfun") => {
                self.bump();
                let a = self.ident()?;
                self.eat_sym("=>")?;
                let body = self.parse_term()?;
                Ok(PTerm::TLam(a, Box::new(body)))
            }
            Tok::Kw("if") => {
                self.bump();
                let c = self.parse_term()?;
                self.eat_kw("then")?;
                let t = self.parse_term()?;
                self.eat_kw("else")?;
                let e = self.parse_term()?;
                Ok(PTerm::If(Box::new(c), Box::new(t), Box::new(e)))
            }
            Tok::Kw("case") => {
                self.bump();
                let s = self.parse_term()?;
                self.eat_kw("of")?;
                self.eat_kw("inl")?;
                let x1 = self.ident()?;
                self.eat_sym("=>")?;
                let e1 = self.parse_term()?;
                self.eat_sym("|")?;
                self.eat_kw("inr")?;
                let x2 = self.ident()?;
                self.eat_sym("=>")?;
                let e2 = self.parse_term()?;
                Ok(PTerm::Case(Box::new(s), x1, Box::new(e1), x2, Box::new(e2)))
            }
            Tok::Kw("unpack") => {
                self.bump();
                self.eat_sym("<")?;
                let a = self.ident()?;
                self.eat_sym(",")?;
                let x = self.ident()?;
                self.eat_sym(">")?;
                self.eat_sym("=")?;
                let e1 = self.parse_term()?;
                self.eat_kw("in")?;
                let e2 = self.parse_term()?;
                Ok(PTerm::Unpack(Box::new(e1), a, x, Box::new(e2)))
            }
            Tok::Kw("pack") => {
                self.bump();
                self.eat_sym("[")?;
                let t1 = self.parse_type()?;
                self.eat_sym("]")?;
                let body = self.parse_postfix()?;
                self.eat_kw("as")?;
                let t2 = self.parse_type()?;
                Ok(PTerm::Pack(t1, Box::new(body), t2))
            }
            _ => self.parse_cmp(),
        }
    }

    fn parse_cmp(&mut self) -> Result<PTerm, ParseError> {
        let lhs = self.parse_add()?;
        let op = match self.cur().tok {
            Tok::Sym("=") => Some(PrimOp::Eq),
            Tok::Sym("<") => Some(PrimOp::Lt),
            Tok::Sym("<=") => Some(PrimOp::Le),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.parse_add()?;
            Ok(PTerm::Prim(op, vec![lhs, rhs]))
        } else {
            Ok(lhs)
        }
    }

    fn parse_add(&mut self) -> Result<PTerm, ParseError> {
        let mut t = self.parse_appx()?;
        loop {
            let op = match self.cur().tok {
                Tok::Sym("+") => PrimOp::Add,
                Tok::Sym("-") => PrimOp::Sub,
                _ => break,
            };
            self.bump();
            let r = self.parse_appx()?;
            t = PTerm::Prim(op, vec![t, r]);
        }
        Ok(t)
    }

    // `<` is excluded: a pair literal in application-argument position must
    // be parenthesized, so that `x < y` stays a comparison.
    fn starts_atom(&self) -> bool {
        matches!(
            self.cur().tok,
            Tok::Ident(_)
                | Tok::Int(_)
                | Tok::Kw("true")
                | Tok::Kw("false")
                | Tok::Sym("<>")
                | Tok::Sym("(")
        ) || (self.allow_hole && self.cur().tok == Tok::Sym("[]"))
    }

    fn parse_appx(&mut self) -> Result<PTerm, ParseError> {
        let mut t = self.parse_prefixed()?;
        loop {
            if self.starts_atom() {
                let a = self.parse_postfix()?;
                t = PTerm::App(Box::new(t), Box::new(a));
            } else if self.cur().tok == Tok::Sym("[") {
                self.bump();
                let ty = self.parse_type()?;
                self.eat_sym("]")?;
                t = PTerm::TApp(Box::new(t), ty);
            } else {
                break;
            }
        }
        Ok(t)
    }

    fn parse_prefixed(&mut self) -> Result<PTerm, ParseError> {
        match self.cur().tok.clone() {
            Tok::Kw(kw @ ("inl" | "inr" | "fold")) => {
                self.bump();
                self.eat_sym("[")?;
                let t = self.parse_type()?;
                self.eat_sym("]")?;
                let a = self.parse_postfix()?;
                Ok(match kw {
                    "inl" => PTerm::Inl(t, Box::new(a)),
                    "inr" => PTerm::Inr(t, Box::new(a)),
                    _ => PTerm::Fold(t, Box::new(a)),
                })
            }
            Tok::Kw("unfold") => {
                self.bump();
                let a = self.parse_postfix()?;
                Ok(PTerm::Unfold(Box::new(a)))
            }
            _ => self.parse_postfix(),
        }
    }

    fn parse_postfix(&mut self) -> Result<PTerm, ParseError> {
        let mut t = self.parse_atom()?;
        while self.cur().tok == Tok::Sym(".") {
            self.bump();
            match self.bump() {
                Tok::Int(n) if n == BigInt::from(1) => t = PTerm::Fst(Box::new(t)),
                Tok::Int(n) if n == BigInt::from(2) => t = PTerm::Snd(Box::new(t)),
                _ => return self.err("projection must be .1 or .2", &[".1", ".2"]),
            }
        }
        Ok(t)
    }

    fn parse_atom(&mut self) -> Result<PTerm, ParseError> {
        match self.cur().tok.clone() {
            Tok::Ident(x) => {
                self.bump();
                Ok(PTerm::Term(Term::Var(x)))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(PTerm::Term(Term::Int(n)))
            }
            Tok::Sym("-") => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => Ok(PTerm::Term(Term::Int(-n))),
                    _ => self.err("'-' must be followed by an integer literal here", &["integer"]),
                }
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(PTerm::Term(Term::True))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(PTerm::Term(Term::False))
            }
            Tok::Sym("<>") => {
                self.bump();
                Ok(PTerm::Term(Term::Unit))
            }
            Tok::Sym("<") => {
                self.bump();
                let a = self.parse_term()?;
                self.eat_sym(",")?;
                let b = self.parse_term()?;
                self.eat_sym(">")?;
                Ok(PTerm::Pair(Box::new(a), Box::new(b)))
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.parse_term()?;
                self.eat_sym(")")?;
                Ok(t)
            }
            Tok::Sym("[]") if self.allow_hole => {
                self.bump();
                Ok(PTerm::Hole)
            }
            other => self.err(format!("found {other:?}"), &["term"]),
        }
    }

    fn at_eof(&self) -> bool {
        self.cur().tok == Tok::Eof
    }
}

fn parser_for(src: &str, allow_hole: bool) -> Result<Parser, ParseError> {
    Ok(Parser { toks: lex(src)?, pos: 0, allow_hole })
}

pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = parser_for(src, false)?;
    let t = p.parse_term()?;
    if !p.at_eof() {
        return p.err("trailing input after term", &["end of input"]);
    }
    t.into_term().map_err(|m| ParseError { line: 0, col: 0, message: m, expected: vec![] })
}

pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let mut p = parser_for(src, false)?;
    let t = p.parse_type()?;
    if !p.at_eof() {
        return p.err("trailing input after type", &["end of input"]);
    }
    Ok(t)
}

/// Parses a one-hole program context; the hole is written `[]`.
pub fn parse_ctx(src: &str) -> Result<Ctx, ParseError> {
    let mut p = parser_for(src, true)?;
    let t = p.parse_term()?;
    if !p.at_eof() {
        return p.err("trailing input after context", &["end of input"]);
    }
    t.into_ctx().map_err(|m| ParseError { line: 0, col: 0, message: m, expected: vec![] })
}

/// A parsed `.fmu` file: named definitions (in order) and an optional final
/// bare term.
#[derive(Debug, Clone, Default)]
pub struct SourceFile {
    pub defs: Vec<(String, Term)>,
    pub main: Option<Term>,
}

impl SourceFile {
    /// Resolves definitions by substituting earlier defs into later bodies,
    /// returning the fully-expanded bindings.
    pub fn expanded(&self) -> Vec<(String, Term)> {
        let mut out: Vec<(String, Term)> = Vec::new();
        for (name, body) in &self.defs {
            let mut b = body.clone();
            for (n, t) in &out {
                b = b.subst(n, t);
            }
            out.push((name.clone(), b));
        }
        out
    }

    /// The term a plain `eval`/`typecheck` run operates on: the bare term if
    /// present, otherwise the last definition, with defs expanded.
    pub fn main_term(&self) -> Option<Term> {
        let exp = self.expanded();
        match &self.main {
            Some(t) => {
                let mut b = t.clone();
                for (n, d) in &exp {
                    b = b.subst(n, d);
                }
                Some(b)
            }
            None => exp.last().map(|(_, t)| t.clone()),
        }
    }
}

pub fn parse_file(src: &str) -> Result<SourceFile, ParseError> {
    let mut p = parser_for(src, false)?;
    let mut out = SourceFile::default();
    while !p.at_eof() {
        if p.cur().tok == Tok::Kw("def") {
            p.bump();
            let name = p.ident()?;
            p.eat_sym("=")?;
            let body = p.parse_term()?;
            p.eat_sym(";")?;
            let body = body
                .into_term()
                .map_err(|m| ParseError { line: 0, col: 0, message: m, expected: vec![] })?;
            out.defs.push((name, body));
        } else {
            let t = p.parse_term()?;
            let t = t
                .into_term()
                .map_err(|m| ParseError { line: 0, col: 0, message: m, expected: vec![] })?;
            if !p.at_eof() {
                return p.err("trailing input after final term", &["end of input"]);
            }
            out.main = Some(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::print::{term_to_string, type_to_string};
    use crate::syntax::{int, lam, tm_var};

    #[test]
    fn parses_lambda() {
        let t = parse_term("fun (x:int) => x").unwrap();
        assert_eq!(t, lam("x", Type::Int, tm_var("x")));
    }

    #[test]
    fn parses_unfold_fold() {
        let t = parse_term("unfold (fold[mu a. unit] <>)").unwrap();
        let expect = Term::Unfold(Box::new(Term::Fold(
            Type::Rec("a".into(), Box::new(Type::Unit)),
            Box::new(Term::Unit),
        )));
        assert_eq!(t, expect);
    }

    #[test]
    fn reports_malformed() {
        assert!(parse_term("fun (x:int =>").is_err());
    }

    #[test]
    fn roundtrip_some_terms() {
        for src in [
            "fun (x:int) => x + 1",
            "(fun (x:int -> int) => x 3) (fun (y:int) => y - 2)",
            "case inl[int + bool] 5 of inl x => x | inr y => 0",
            "if 1 < 2 then <1, <>> else <2, <>>",
            "pack [int] <5, fun (x:int) => x = 5> as exists a. a * (a -> bool)",
            "unpack <a, p> = pack [int] <5, <>> as exists a. a * unit in <>",
            "(tfun a => fun (x:a) => x) [bool] true",
            "unfold (fold[mu a. int + a] (inr[int + (mu a. int + a)] (fold[mu a. int + a] (inl[int + (mu a. int + a)] 0))))",
            "-5 + x.1",
        ] {
            let t = parse_term(src).unwrap_or_else(|e| panic!("{src}: {e}"));
            let printed = term_to_string(&t);
            let t2 = parse_term(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert_eq!(t, t2, "roundtrip failed for {src} -> {printed}");
        }
    }

    #[test]
    fn roundtrip_types() {
        for src in [
            "int -> bool -> unit",
            "(int -> bool) -> unit",
            "int * bool + unit * int",
            "forall a. a -> (exists b. a * b)",
            "mu a. unit + (a -> a)",
        ] {
            let t = parse_type(src).unwrap();
            let t2 = parse_type(&type_to_string(&t)).unwrap();
            assert_eq!(t, t2);
        }
    }

    #[test]
    fn parses_defs() {
        let f = parse_file("-- a file\ndef id = fun (x:int) => x;\ndef five = id 5;\n").unwrap();
        assert_eq!(f.defs.len(), 2);
        let main = f.main_term().unwrap();
        assert_eq!(main, Term::App(Box::new(lam("x", Type::Int, tm_var("x"))), Box::new(int(5))));
    }

    #[test]
    fn parses_context_hole() {
        let c = parse_ctx("(fun (x:int) => x) []").unwrap();
        match c {
            Ctx::App1(_, h) => assert!(matches!(*h, Ctx::Hole)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
