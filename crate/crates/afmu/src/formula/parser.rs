//! Recursive descent parser for the textual syntax.
//!
//! ```text
//! imp    := expr ('->' imp)?
//! expr   := conj ('|' conj)*
//! conj   := unary ('&' unary)*
//! unary  := '<>' unary | '[]' unary | binder | atom
//! binder := ('mu' | 'nu') ident '.' imp
//! atom   := 'true' | 'false' | ident | '~' ident | '~' unary | '(' imp ')'
//! ```
//!
//! Negation of a compound formula and implication are expanded into negation
//! normal form; the negated part may not mention enclosing fixpoint variables.

use std::collections::HashSet;

use thiserror::Error;

use super::{fresh_name, Formula, Kind, Name};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("positivity violation at {pos}: ~{var} under the binder of {var}")]
    Positivity { pos: usize, var: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::Positivity { pos, .. } => *pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    True,
    False,
    Mu,
    Nu,
    Ident(String),
    Tilde,
    Arrow,
    And,
    Or,
    Dia,
    Box,
    Dot,
    LParen,
    RParen,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two = |d: char| chars.get(i + 1).map(|x| x.1) == Some(d);
        let tok = match c {
            '~' => Tok::Tilde,
            '&' => Tok::And,
            '|' => Tok::Or,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '<' if two('>') => {
                i += 1;
                Tok::Dia
            }
            '-' if two('>') => {
                i += 1;
                Tok::Arrow
            }
            '[' if two(']') => {
                i += 1;
                Tok::Box
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '_' || chars[j].1 == '\'') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().map(|x| x.1).collect();
                i = j - 1;
                match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "mu" => Tok::Mu,
                    "nu" => Tok::Nu,
                    _ => Tok::Ident(word),
                }
            }
            _ => return Err(ParseError::Syntax { pos, msg: format!("unexpected character '{c}'") }),
        };
        out.push((tok, pos));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

/// Raw syntax tree before binder hygiene.
enum Raw {
    Top,
    Bottom,
    Var(String),
    NegVar(String, usize),
    Not(Box<Raw>, usize),
    Or(Box<Raw>, Box<Raw>),
    And(Box<Raw>, Box<Raw>),
    Dia(Box<Raw>),
    Box(Box<Raw>),
    Fix(bool, String, Box<Raw>),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }
    fn pos(&self) -> usize {
        self.toks[self.i].1
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }
    fn err<T>(&self, msg: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.pos(), msg: msg.to_string() })
    }

    fn imp(&mut self) -> Result<Raw, ParseError> {
        let pos = self.pos();
        let left = self.expr()?;
        if *self.peek() != Tok::Arrow {
            return Ok(left);
        }
        self.bump();
        let right = self.imp()?;
        Ok(Raw::Or(Box::new(Raw::Not(Box::new(left), pos)), Box::new(right)))
    }

    fn expr(&mut self) -> Result<Raw, ParseError> {
        let mut left = self.conj()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let right = self.conj()?;
            left = Raw::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn conj(&mut self) -> Result<Raw, ParseError> {
        let mut left = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let right = self.unary()?;
            left = Raw::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        match self.peek().clone() {
            Tok::Dia => {
                self.bump();
                Ok(Raw::Dia(Box::new(self.unary()?)))
            }
            Tok::Box => {
                self.bump();
                Ok(Raw::Box(Box::new(self.unary()?)))
            }
            Tok::Mu | Tok::Nu => {
                let mu = self.bump() == Tok::Mu;
                let name = match self.bump() {
                    Tok::Ident(n) => n,
                    _ => {
                        self.i -= 1;
                        return self.err("expected a variable after the binder");
                    }
                };
                if *self.peek() != Tok::Dot {
                    return self.err("expected '.'");
                }
                self.bump();
                let body = self.imp()?;
                Ok(Raw::Fix(mu, name, Box::new(body)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Raw, ParseError> {
        match self.bump() {
            Tok::True => Ok(Raw::Top),
            Tok::False => Ok(Raw::Bottom),
            Tok::Ident(n) => Ok(Raw::Var(n)),
            Tok::Tilde => {
                let pos = self.toks[self.i - 1].1;
                match self.peek().clone() {
                    Tok::Ident(n) => {
                        self.bump();
                        Ok(Raw::NegVar(n, pos))
                    }
                    _ => Ok(Raw::Not(Box::new(self.unary()?), pos)),
                }
            }
            Tok::LParen => {
                let e = self.imp()?;
                if *self.peek() != Tok::RParen {
                    return self.err("expected ')'");
                }
                self.bump();
                Ok(e)
            }
            Tok::End => {
                self.i = self.toks.len() - 1;
                self.err("unexpected end of input")
            }
            _ => {
                self.i -= 1;
                self.err("expected a formula")
            }
        }
    }
}

fn raw_names(r: &Raw, out: &mut HashSet<Name>) {
    match r {
        Raw::Top | Raw::Bottom => {}
        Raw::Var(n) | Raw::NegVar(n, _) => {
            out.insert(n.as_str().into());
        }
        Raw::Or(a, b) | Raw::And(a, b) => {
            raw_names(a, out);
            raw_names(b, out);
        }
        Raw::Dia(a) | Raw::Box(a) | Raw::Not(a, _) => raw_names(a, out),
        Raw::Fix(_, n, a) => {
            out.insert(n.as_str().into());
            raw_names(a, out);
        }
    }
}

fn raw_free(r: &Raw, bound: &mut Vec<String>, out: &mut HashSet<Name>) {
    match r {
        Raw::Top | Raw::Bottom => {}
        Raw::Var(n) | Raw::NegVar(n, _) => {
            if !bound.contains(n) {
                out.insert(n.as_str().into());
            }
        }
        Raw::Or(a, b) | Raw::And(a, b) => {
            raw_free(a, bound, out);
            raw_free(b, bound, out);
        }
        Raw::Dia(a) | Raw::Box(a) | Raw::Not(a, _) => raw_free(a, bound, out),
        Raw::Fix(_, n, a) => {
            bound.push(n.clone());
            raw_free(a, bound, out);
            bound.pop();
        }
    }
}

struct Hygiene {
    free: HashSet<Name>,
    used: HashSet<Name>,
    taken: HashSet<Name>,
    exact: bool,
}

impl Hygiene {
    fn build(&mut self, r: &Raw, env: &mut Vec<(String, Name)>) -> Result<Formula, ParseError> {
        Ok(match r {
            Raw::Top => Formula::top(),
            Raw::Bottom => Formula::bottom(),
            Raw::Var(n) => match env.iter().rev().find(|(a, _)| a == n) {
                Some((_, b)) => Formula::new(Kind::Prop(b.clone())),
                None => Formula::prop(n),
            },
            Raw::NegVar(n, pos) => {
                if env.iter().any(|(a, _)| a == n) {
                    return Err(ParseError::Positivity { pos: *pos, var: n.clone() });
                }
                Formula::neg_prop(n)
            }
            Raw::Not(a, pos) => {
                let mut free = HashSet::new();
                raw_free(a, &mut Vec::new(), &mut free);
                if let Some((n, _)) = env.iter().find(|(n, _)| free.contains(n.as_str())) {
                    return Err(ParseError::Positivity { pos: *pos, var: n.clone() });
                }
                self.build(a, env)?.negation()
            }
            Raw::Or(a, b) => Formula::or(self.build(a, env)?, self.build(b, env)?),
            Raw::And(a, b) => Formula::and(self.build(a, env)?, self.build(b, env)?),
            Raw::Dia(a) => Formula::dia(self.build(a, env)?),
            Raw::Box(a) => Formula::boxed(self.build(a, env)?),
            Raw::Fix(mu, n, a) => {
                let clash = self.free.contains(n.as_str()) || self.taken.contains(n.as_str());
                let name: Name = if clash && !self.exact {
                    let fresh = fresh_name(n, &self.used);
                    self.used.insert(fresh.clone());
                    fresh
                } else {
                    n.as_str().into()
                };
                self.taken.insert(name.clone());
                env.push((n.clone(), name.clone()));
                let body = self.build(a, env)?;
                env.pop();
                if *mu {
                    Formula::new(Kind::Mu(name, body))
                } else {
                    Formula::new(Kind::Nu(name, body))
                }
            }
        })
    }
}

/// Parses a formula, renaming binders where needed so that the result is
/// tidy and its binders are pairwise distinct.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    parse_with(text, false)
}

/// Parses a formula keeping binder names as written. Nested or repeated
/// binders of the same name are allowed; the result must still be tidy.
pub fn parse_exact(text: &str) -> Result<Formula, ParseError> {
    let f = parse_with(text, true)?;
    if !f.is_tidy() {
        return Err(ParseError::Syntax { pos: 0, msg: "a variable occurs both free and bound".into() });
    }
    Ok(f)
}

fn parse_with(text: &str, exact: bool) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, i: 0 };
    let raw = p.imp()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    let mut used = HashSet::new();
    raw_names(&raw, &mut used);
    let mut free = HashSet::new();
    raw_free(&raw, &mut Vec::new(), &mut free);
    let mut h = Hygiene { free, used, taken: HashSet::new(), exact };
    h.build(&raw, &mut Vec::new())
}
