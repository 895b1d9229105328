//! Concrete syntax: formulas, model files, team files and dependency
//! definition files, with printers that parse back to the same values.
//!
//! Formula grammar (lowest precedence first, binary operators are
//! right-associative):
//!
//! ```text
//! formula  := disj [ "=>" formula ]
//! disj     := conj [ "\/" disj ]
//! conj     := unary [ "/\" conj ]
//! unary    := "<>" unary | quant | primary
//! quant    := ("exists" | "forall") IDENT+ "." unary
//! primary  := "(" formula ")" | "top" | "bot"
//!           | "!" IDENT "(" terms ")"
//!           | IDENT "(" terms [ ";" terms ] ")"
//!           | "[" IDENT ":" terms "]" "{" formula "}"
//!           | term ("=" | "!=") term
//! term     := IDENT | DIGIT [A-Za-z0-9_']* | "@" [A-Za-z0-9_']+
//! ```
//!
//! Quantifiers bind as tightly as `<>`: `forall z. (A) /\ B` is
//! `(forall z. A) /\ B`.
//!
//! `IDENT(...)` is a dependency atom when the name is registered and a
//! relation literal otherwise.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ast::{Formula, Literal, Signature, Term};
use crate::deps::{DependencySpec, Registry};
use crate::semantics::{Elem, Model, Team};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub begin: usize,
    pub end: usize,
}

impl SourceSpan {
    fn new(begin: usize, end: usize) -> SourceSpan {
        debug_assert!(begin <= end);
        SourceSpan { begin, end }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
    /// 1-based line for file formats, 0 for single formulas.
    pub line: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{} at {}..{}", self.message, self.span.begin, self.span.end)
        }
    }
}

fn err<T>(message: impl Into<String>, begin: usize, end: usize) -> Result<T, ParseError> {
    Err(ParseError {
        message: message.into(),
        span: SourceSpan::new(begin, end),
        line: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Const(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Dot,
    Eq,
    Neq,
    Bang,
    And,
    Or,
    Implies,
    Diamond,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) | Tok::Const(s) => return write!(f, "`{s}`"),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Eq => "=",
            Tok::Neq => "!=",
            Tok::Bang => "!",
            Tok::And => "/\\",
            Tok::Or => "\\/",
            Tok::Implies => "=>",
            Tok::Diamond => "<>",
        };
        write!(f, "`{s}`")
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let two = text.get(i..i + 2).unwrap_or("");
        let (tok, len) = match two {
            "/\\" => (Tok::And, 2),
            "\\/" => (Tok::Or, 2),
            "=>" => (Tok::Implies, 2),
            "<>" => (Tok::Diamond, 2),
            "!=" => (Tok::Neq, 2),
            _ => match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                ',' => (Tok::Comma, 1),
                ';' => (Tok::Semi, 1),
                ':' => (Tok::Colon, 1),
                '.' => (Tok::Dot, 1),
                '=' => (Tok::Eq, 1),
                '!' => (Tok::Bang, 1),
                '@' => {
                    let start = i + 1;
                    let mut j = start;
                    while j < bytes.len() && is_ident_char(bytes[j] as char) {
                        j += 1;
                    }
                    if j == start {
                        return err("expected constant name after `@`", i, j);
                    }
                    out.push((Tok::Const(text[start..j].to_string()), SourceSpan::new(i, j)));
                    i = j;
                    continue;
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let mut j = i;
                    while j < bytes.len() && is_ident_char(bytes[j] as char) {
                        j += 1;
                    }
                    let word = text[i..j].to_string();
                    let tok = if c.is_ascii_digit() {
                        Tok::Const(word)
                    } else {
                        Tok::Ident(word)
                    };
                    out.push((tok, SourceSpan::new(i, j)));
                    i = j;
                    continue;
                }
                _ => {
                    let end = i + c.len_utf8().max(1);
                    let ch = text[i..].chars().next().unwrap_or(c);
                    return err(format!("unexpected character `{ch}`"), i, end.min(text.len()));
                }
            },
        };
        out.push((tok, SourceSpan::new(i, i + len)));
        i += len;
    }
    Ok(out)
}

const KEYWORDS: [&str; 4] = ["exists", "forall", "top", "bot"];

struct Parser<'a> {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    len: usize,
    registry: &'a Registry,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn span(&self) -> SourceSpan {
        self.toks
            .get(self.pos)
            .map(|(_, s)| *s)
            .unwrap_or(SourceSpan::new(self.len, self.len))
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        let s = self.span();
        match self.peek() {
            Some(t) => err(format!("expected {wanted}, found {t}"), s.begin, s.end),
            None => err(format!("expected {wanted}, found end of input"), s.begin, s.end),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.unexpected(&tok.to_string())
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disj()?;
        if self.peek() == Some(&Tok::Implies) {
            self.pos += 1;
            let rhs = self.formula()?;
            return Ok(Formula::hook(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.conj()?;
        if self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let rhs = self.disj()?;
            return Ok(Formula::or(lhs, rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let rhs = self.conj()?;
            return Ok(Formula::and(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Tok::Diamond) => {
                self.pos += 1;
                Ok(Formula::diamond(self.unary()?))
            }
            Some(Tok::Ident(k)) if k == "exists" || k == "forall" => {
                let universal = k == "forall";
                self.pos += 1;
                let mut vars = vec![self.ident()?];
                while let Some(Tok::Ident(k)) = self.peek() {
                    if KEYWORDS.contains(&k.as_str()) {
                        break;
                    }
                    vars.push(self.ident()?);
                }
                self.expect(Tok::Dot)?;
                let body = self.unary()?;
                Ok(if universal {
                    Formula::forall_all(&vars, body)
                } else {
                    Formula::exists_all(&vars, body)
                })
            }
            _ => self.primary(),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Const(c)) => {
                let c = c.clone();
                self.pos += 1;
                Ok(Term::Const(c))
            }
            Some(Tok::Ident(_)) => Ok(Term::Var(self.ident()?)),
            _ => self.unexpected("term"),
        }
    }

    fn terms_until(&mut self, stops: &[Tok]) -> Result<Vec<Term>, ParseError> {
        let mut out = vec![self.term()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            out.push(self.term()?);
        }
        match self.peek() {
            Some(t) if stops.contains(t) => Ok(out),
            _ => self.unexpected(&stops.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" or ")),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        let start = self.span();
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::Ident(k)) if k == "top" => {
                self.pos += 1;
                Ok(Formula::top())
            }
            Some(Tok::Ident(k)) if k == "bot" => {
                self.pos += 1;
                Ok(Formula::bot())
            }
            Some(Tok::Bang) => {
                self.pos += 1;
                let name = self.ident()?;
                if self.registry.contains_name(&name) {
                    let s = self.span();
                    return err(
                        format!("dependency atom `{name}` cannot be negated"),
                        start.begin,
                        s.end,
                    );
                }
                self.expect(Tok::LParen)?;
                let args = self.terms_until(&[Tok::RParen])?;
                self.expect(Tok::RParen)?;
                Ok(Formula::not_rel(name, args))
            }
            Some(Tok::LBracket) => {
                self.pos += 1;
                let rel = self.ident()?;
                self.expect(Tok::Colon)?;
                let args = self.terms_until(&[Tok::RBracket])?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::LBrace)?;
                let sentence = self.formula()?;
                self.expect(Tok::RBrace)?;
                Ok(Formula::generic(rel, args, sentence))
            }
            Some(Tok::Ident(_)) if self.peek_at(1) == Some(&Tok::LParen) => {
                let name = self.ident()?;
                self.pos += 1;
                self.atom_args(name, start)
            }
            Some(Tok::Ident(_)) | Some(Tok::Const(_)) => {
                let lhs = self.term()?;
                let positive = match self.peek() {
                    Some(Tok::Eq) => true,
                    Some(Tok::Neq) => false,
                    _ => return self.unexpected("`=` or `!=`"),
                };
                self.pos += 1;
                let rhs = self.term()?;
                Ok(Formula::Lit(Literal::Eq { lhs, rhs, positive }))
            }
            _ => self.unexpected("formula"),
        }
    }

    fn atom_args(&mut self, name: String, start: SourceSpan) -> Result<Formula, ParseError> {
        let first = self.terms_until(&[Tok::RParen, Tok::Semi])?;
        let semi_span = self.span();
        let mut second = None;
        if self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
            second = Some(self.terms_until(&[Tok::RParen])?);
        }
        let end = self.span();
        self.expect(Tok::RParen)?;
        if !self.registry.contains_name(&name) {
            if second.is_some() {
                return err(
                    format!("`;` is only allowed in dependency atoms, `{name}` is a relation"),
                    semi_span.begin,
                    semi_span.end,
                );
            }
            return Ok(Formula::rel(name, first));
        }
        let split = first.len();
        let mut args = first;
        if let Some(rest) = second {
            args.extend(rest);
            let canonical = crate::deps::split_position(&name, args.len());
            if canonical != Some(split) {
                let msg = match canonical {
                    Some(k) => format!("`{name}` with {} terms takes `;` after term {k}", args.len()),
                    None => format!("`{name}` does not take `;`"),
                };
                return err(msg, start.begin, end.end);
            }
        }
        Ok(Formula::dep(name, args))
    }
}

/// Parses a formula, recognising the built-in dependency names.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parse_formula_with(text, &Registry::builtin())
}

/// Parses a formula, treating every name in `registry` as a dependency.
pub fn parse_formula_with(text: &str, registry: &Registry) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: text.len(),
        registry,
    };
    let f = p.formula()?;
    if p.pos < p.toks.len() {
        return p.unexpected("end of input");
    }
    Ok(f)
}

pub fn print_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Const(c) => {
            let plain = c.starts_with(|ch: char| ch.is_ascii_digit()) && c.chars().all(is_ident_char);
            if plain {
                c.clone()
            } else {
                format!("@{c}")
            }
        }
    }
}

fn print_terms(args: &[Term]) -> String {
    args.iter().map(print_term).collect::<Vec<_>>().join(",")
}

fn is_binary(f: &Formula) -> bool {
    matches!(f, Formula::And(..) | Formula::Or(..) | Formula::Hook(..))
}

fn print_operand(f: &Formula, out: &mut String) {
    if matches!(f, Formula::Exists(..) | Formula::Forall(..)) {
        out.push('(');
        print_into(f, out);
        out.push(')');
    } else {
        print_into(f, out);
    }
}

fn print_wrapped(f: &Formula, out: &mut String) {
    if is_binary(f) {
        print_into(f, out);
    } else {
        out.push('(');
        print_into(f, out);
        out.push(')');
    }
}

fn print_into(f: &Formula, out: &mut String) {
    match f {
        Formula::Lit(Literal::Top) => out.push_str("top"),
        Formula::Lit(Literal::Bot) => out.push_str("bot"),
        Formula::Lit(Literal::Rel {
            name,
            args,
            positive,
        }) => {
            if !positive {
                out.push('!');
            }
            out.push_str(name);
            out.push('(');
            out.push_str(&print_terms(args));
            out.push(')');
        }
        Formula::Lit(Literal::Eq { lhs, rhs, positive }) => {
            out.push_str(&print_term(lhs));
            out.push_str(if *positive { " = " } else { " != " });
            out.push_str(&print_term(rhs));
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Hook(a, b) => {
            let op = match f {
                Formula::And(..) => " /\\ ",
                Formula::Or(..) => " \\/ ",
                _ => " => ",
            };
            out.push('(');
            print_operand(a, out);
            out.push_str(op);
            print_operand(b, out);
            out.push(')');
        }
        Formula::Diamond(b) => {
            out.push_str("<> ");
            print_wrapped(b, out);
        }
        Formula::Exists(..) | Formula::Forall(..) => {
            let universal = matches!(f, Formula::Forall(..));
            out.push_str(if universal { "forall" } else { "exists" });
            let mut cur = f;
            loop {
                match (cur, universal) {
                    (Formula::Forall(v, b), true) | (Formula::Exists(v, b), false) => {
                        out.push(' ');
                        out.push_str(v);
                        cur = b;
                    }
                    _ => break,
                }
            }
            out.push_str(". ");
            match cur {
                Formula::Exists(..) | Formula::Forall(..) => print_into(cur, out),
                _ => print_wrapped(cur, out),
            }
        }
        Formula::Dep { name, args } => {
            out.push_str(name);
            out.push('(');
            match crate::deps::split_position(name, args.len()) {
                Some(k) => {
                    out.push_str(&print_terms(&args[..k]));
                    out.push_str(" ; ");
                    out.push_str(&print_terms(&args[k..]));
                }
                None => out.push_str(&print_terms(args)),
            }
            out.push(')');
        }
        Formula::Generic {
            rel,
            args,
            sentence,
        } => {
            out.push('[');
            out.push_str(rel);
            out.push_str(" : ");
            out.push_str(&print_terms(args));
            out.push_str("] { ");
            print_into(sentence, out);
            out.push_str(" }");
        }
    }
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    print_into(f, &mut out);
    out
}

/// Splits a file into (1-based line number, content without comment) pairs,
/// skipping blank lines.
fn file_lines(text: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let mut offset = 0;
    text.split('\n').enumerate().filter_map(move |(i, raw)| {
        let start = offset;
        offset += raw.len() + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((i + 1, start, content))
    })
}

fn line_err<T>(line: usize, start: usize, raw: &str, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        message: message.into(),
        span: SourceSpan::new(start, start + raw.len()),
        line,
    })
}

fn parse_name_arity(s: &str) -> Option<(String, usize)> {
    let (name, arity) = s.trim().split_once('/')?;
    let name = name.trim();
    let ok = name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') && name.chars().all(is_ident_char);
    if !ok {
        return None;
    }
    Some((name.to_string(), arity.trim().parse().ok()?))
}

fn parse_tuples(s: &str) -> Result<Vec<Vec<String>>, String> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix('(') {
            let close = r.find(')').ok_or("unclosed tuple")?;
            let inner = &r[..close];
            let items: Vec<String> = inner.split(',').map(|e| e.trim().to_string()).collect();
            if items.iter().any(|e| e.is_empty()) {
                return Err(format!("empty element in tuple ({inner})"));
            }
            out.push(items);
            rest = r[close + 1..].trim_start();
        } else {
            let end = rest.find(|c: char| c.is_whitespace()).unwrap_or(rest.len());
            let tok = &rest[..end];
            if tok.contains([')', ',']) {
                return Err(format!("malformed tuple near `{tok}`"));
            }
            out.push(vec![tok.to_string()]);
            rest = rest[end..].trim_start();
        }
    }
    Ok(out)
}

/// Model file: a `domain:` line, then `rel NAME/ARITY:` lines with
/// parenthesised tuples and optional `const NAME = ELEMENT` lines.
pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    let mut model: Option<Model> = None;
    for (line, start, content) in file_lines(text) {
        if let Some(rest) = content.strip_prefix("domain:") {
            if model.is_some() {
                return line_err(line, start, content, "duplicate domain declaration");
            }
            let elems: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            match Model::new(elems) {
                Ok(m) => model = Some(m),
                Err(e) => return line_err(line, start, content, e.to_string()),
            }
        } else if let Some(rest) = content.strip_prefix("rel ") {
            let Some(m) = model.as_mut() else {
                return line_err(line, start, content, "relation declared before `domain:`");
            };
            let Some((head, body)) = rest.split_once(':') else {
                return line_err(line, start, content, "expected `rel NAME/ARITY: tuples`");
            };
            let Some((name, arity)) = parse_name_arity(head) else {
                return line_err(line, start, content, format!("malformed relation header `{}`", head.trim()));
            };
            let tuples = match parse_tuples(body) {
                Ok(t) => t,
                Err(e) => return line_err(line, start, content, e),
            };
            if let Err(e) = m.add_relation_named(&name, arity, &tuples) {
                return line_err(line, start, content, e.to_string());
            }
        } else if let Some(rest) = content.strip_prefix("const ") {
            let Some(m) = model.as_mut() else {
                return line_err(line, start, content, "constant declared before `domain:`");
            };
            let Some((name, elem)) = rest.split_once('=') else {
                return line_err(line, start, content, "expected `const NAME = ELEMENT`");
            };
            if let Err(e) = m.add_constant(name.trim(), elem.trim()) {
                return line_err(line, start, content, e.to_string());
            }
        } else {
            return line_err(line, start, content, format!("unrecognised line `{content}`"));
        }
    }
    model.ok_or(ParseError {
        message: "missing `domain:` line".into(),
        span: SourceSpan::new(0, 0),
        line: 1,
    })
}

pub fn print_model(m: &Model) -> String {
    let mut out = String::from("domain:");
    for e in m.elements() {
        out.push(' ');
        out.push_str(m.name(e));
    }
    out.push('\n');
    for (name, rel) in m.relations() {
        out.push_str(&format!("rel {name}/{}:", rel.arity()));
        for t in rel.tuples() {
            let names: Vec<&str> = t.iter().map(|&e| m.name(e)).collect();
            out.push_str(&format!(" ({})", names.join(",")));
        }
        out.push('\n');
    }
    for (c, e) in m.constants() {
        out.push_str(&format!("const {c} = {}\n", m.name(*e)));
    }
    out
}

/// Team file: a `vars:` line then `row:` lines of element names in the
/// declared variable order.
pub fn parse_team(text: &str, model: &Model) -> Result<Team, ParseError> {
    let mut vars: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<Elem>> = Vec::new();
    for (line, start, content) in file_lines(text) {
        if let Some(rest) = content.strip_prefix("vars:") {
            if vars.is_some() {
                return line_err(line, start, content, "duplicate `vars:` line");
            }
            let vs: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            let mut seen = BTreeSet::new();
            for v in &vs {
                let ok = v.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
                    && v.chars().all(is_ident_char)
                    && !KEYWORDS.contains(&v.as_str());
                if !ok {
                    return line_err(line, start, content, format!("invalid variable name `{v}`"));
                }
                if !seen.insert(v.clone()) {
                    return line_err(line, start, content, format!("duplicate variable `{v}`"));
                }
            }
            vars = Some(vs);
        } else if let Some(rest) = content.strip_prefix("row:") {
            let Some(vs) = vars.as_ref() else {
                return line_err(line, start, content, "row before `vars:` line");
            };
            let names: Vec<&str> = rest.split_whitespace().collect();
            if names.len() != vs.len() {
                return line_err(
                    line,
                    start,
                    content,
                    format!("row has {} values, expected {}", names.len(), vs.len()),
                );
            }
            let mut row = Vec::with_capacity(names.len());
            for n in names {
                match model.element(n) {
                    Some(e) => row.push(e),
                    None => return line_err(line, start, content, format!("unknown element `{n}`")),
                }
            }
            rows.push(row);
        } else {
            return line_err(line, start, content, format!("unrecognised line `{content}`"));
        }
    }
    let Some(vs) = vars else {
        return Err(ParseError {
            message: "missing `vars:` line".into(),
            span: SourceSpan::new(0, 0),
            line: 1,
        });
    };
    Ok(Team::from_rows(vs, rows))
}

pub fn print_team(t: &Team, m: &Model) -> String {
    let mut out = String::from("vars:");
    for v in t.vars() {
        out.push(' ');
        out.push_str(v);
    }
    out.push('\n');
    for row in t.rows() {
        out.push_str("row:");
        for &e in row {
            out.push(' ');
            out.push_str(m.name(e));
        }
        out.push('\n');
    }
    out
}

/// Reads `dep NAME/ARITY := SENTENCE` lines and registers each definition
/// in a copy of `registry`. Closure flags of new entries start as unknown.
pub fn load_dependency_defs(text: &str, registry: &Registry) -> Result<Registry, ParseError> {
    let mut reg = registry.clone();
    for (line, start, content) in file_lines(text) {
        let Some(rest) = content.strip_prefix("dep ") else {
            return line_err(line, start, content, format!("unrecognised line `{content}`"));
        };
        let Some((head, body)) = rest.split_once(":=") else {
            return line_err(line, start, content, "expected `dep NAME/ARITY := SENTENCE`");
        };
        let Some((name, arity)) = parse_name_arity(head) else {
            return line_err(line, start, content, format!("malformed dependency header `{}`", head.trim()));
        };
        if arity == 0 {
            return line_err(line, start, content, "dependency arity must be at least 1");
        }
        let sentence = match parse_formula_with(body, &reg) {
            Ok(f) => f,
            Err(e) => return line_err(line, start, content, e.message),
        };
        if let Err(msg) = check_dependency_sentence(&sentence, arity) {
            return line_err(line, start, content, msg);
        }
        let spec = DependencySpec::user(name, arity, sentence);
        if let Err(e) = reg.register(spec) {
            return line_err(line, start, content, e.to_string());
        }
    }
    Ok(reg)
}

/// A dependency body must be a first-order sentence over `R` (with the
/// given arity) and equality.
pub fn check_dependency_sentence(sentence: &Formula, arity: usize) -> Result<(), String> {
    if !sentence.is_first_order() {
        return Err("dependency body must be first-order".into());
    }
    let free = crate::ast::free_vars(sentence);
    if !free.is_empty() {
        let names: Vec<_> = free.into_iter().collect();
        return Err(format!("dependency body has free variables: {}", names.join(", ")));
    }
    let sig = Signature::of_formula(sentence);
    for (name, &k) in &sig.relations {
        if name != "R" {
            return Err(format!("unknown symbol {name}: only R and equality are allowed"));
        }
        if k != arity {
            return Err(format!("arity mismatch: R used with {k} terms, declared {arity}"));
        }
    }
    if let Some(c) = sig.constants.iter().next() {
        return Err(format!("unknown symbol {c}: constants are not allowed"));
    }
    Ok(())
}
