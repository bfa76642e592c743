//! The SPARQL dialect: emission of semantic queries in the direct and
//! reified graph models, and a parser for the same subset.
//!
//! The grammar is documented in `docs/dialect.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{GraphModel, Literal, Provenance};
use crate::query::{
    QueryError, QueryGraph, QueryRelation, QueryTerm, QueryType, SemanticQuery, TemporalAnchor,
    TemporalConstraint, TemporalMode, VarKind, Variable,
};
use crate::vocab;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SparqlError {
    #[error("parse error at byte {position}: expected {expected}")]
    Parse { position: usize, expected: String },
    #[error("unsupported SPARQL feature: {0}")]
    UnsupportedFeature(String),
    #[error("cannot express query: {0}")]
    UnsupportedConstruct(String),
    #[error("query does not form a valid semantic query: {0}")]
    Invalid(#[from] QueryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparqlText {
    pub text: String,
    pub model: GraphModel,
}

impl SparqlText {
    /// The query preceded by PREFIX declarations for every prefix it uses,
    /// for endpoints without predefined prefixes.
    pub fn with_prologue(&self) -> String {
        let mut out = String::new();
        for (prefix, ns) in vocab::PREFIXES {
            if self.text.contains(&format!("{prefix}:")) {
                let _ = writeln!(out, "PREFIX {prefix}: <{ns}>");
            }
        }
        out.push_str(&self.text);
        out
    }
}

const STATEMENT_VAR: &str = "relation";
const BRIDGE_VAR: &str = "entity";

// ---------------------------------------------------------------- emission

fn valid_var_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_')
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

pub fn literal_text(l: &Literal) -> String {
    let mut s = format!("\"{}\"", escape(l.lexical()));
    if let Some(lang) = l.language() {
        s.push('@');
        s.push_str(lang);
    } else if let Some(dt) = l.datatype() {
        s.push_str("^^");
        s.push_str(&vocab::abbreviate(dt));
    }
    s
}

struct Emitter<'q> {
    q: &'q SemanticQuery,
    bridges: BTreeMap<&'q str, String>,
}

impl<'q> Emitter<'q> {
    fn term(&mut self, t: &'q QueryTerm) -> String {
        match t {
            QueryTerm::Var(v) => format!("?{v}"),
            QueryTerm::Literal(l) => literal_text(l),
            QueryTerm::Node(n) => {
                if self.q.graph().is_bridged(n) {
                    let next = self.bridges.len() + 1;
                    format!("?{}", self.bridges.entry(n).or_insert_with(|| format!("{BRIDGE_VAR}{next}")))
                } else {
                    vocab::abbreviate(n)
                }
            }
        }
    }
}

/// Writes `q` in the dialect of its graph model.
pub fn emit(q: &SemanticQuery) -> Result<SparqlText, SparqlError> {
    let graph = q.graph();
    for v in graph.variables() {
        if !valid_var_name(&v.name) || is_reserved_name(&v.name) {
            return Err(SparqlError::UnsupportedConstruct(format!("variable name {:?}", v.name)));
        }
    }
    let mut text = String::new();
    match (q.qtype(), q.target()) {
        (QueryType::Ask, _) => text.push_str("ASK WHERE {\n"),
        (QueryType::Select, Some(v)) => {
            let _ = writeln!(text, "SELECT DISTINCT ?{} WHERE {{", v.name);
        }
        (QueryType::Count, Some(v)) => {
            let _ = writeln!(text, "SELECT (COUNT(DISTINCT(?{})) AS ?count) WHERE {{", v.name);
        }
        (_, None) => return Err(SparqlError::UnsupportedConstruct("missing target variable".into())),
    }

    let mut e = Emitter { q, bridges: BTreeMap::new() };
    let mut blocks: Vec<Vec<String>> = Vec::new();

    if q.model() == GraphModel::Direct {
        let typing: Vec<String> = graph
            .variables()
            .iter()
            .filter(|v| v.kind == VarKind::Event)
            .map(|v| format!("?{} rdf:type {} .", v.name, vocab::abbreviate(vocab::DBO_EVENT)))
            .collect();
        if !typing.is_empty() {
            blocks.push(typing);
        }
    }

    let mut statement_vars: Vec<Option<String>> = Vec::with_capacity(graph.relations().len());
    let mut run: Vec<String> = Vec::new();
    let mut n_statements = 0;
    for r in graph.relations() {
        match (q.model(), r.form) {
            (GraphModel::Reified, Provenance::Reified) => {
                if !run.is_empty() {
                    blocks.push(std::mem::take(&mut run));
                }
                n_statements += 1;
                let sv = format!("{STATEMENT_VAR}{n_statements}");
                let o = e.term(&r.object);
                let s = e.term(&r.subject);
                blocks.push(vec![
                    format!("?{sv} rdf:object {o} ."),
                    format!("?{sv} rdf:subject {s} ."),
                    format!("?{sv} sem:roleType {} .", vocab::abbreviate(&r.predicate)),
                ]);
                statement_vars.push(Some(sv));
            }
            (GraphModel::Direct, Provenance::Reified) => {
                return Err(SparqlError::UnsupportedConstruct(
                    "reified relation in a direct-model query".into(),
                ))
            }
            (_, Provenance::Direct) => {
                let s = e.term(&r.subject);
                let o = e.term(&r.object);
                run.push(format!("{s} {} {o} .", vocab::abbreviate(&r.predicate)));
                statement_vars.push(None);
            }
        }
    }
    if !run.is_empty() {
        blocks.push(run);
    }

    let mut constraint_block = Vec::new();
    if let Some(c) = q.constraint() {
        let anchor = match &c.anchor {
            TemporalAnchor::Relation(i) => match statement_vars.get(*i) {
                Some(Some(sv)) => format!("?{sv}"),
                _ => return Err(SparqlError::UnsupportedConstruct("relation anchor is not a statement".into())),
            },
            TemporalAnchor::Node(t) => e.term(t),
        };
        if !valid_var_name(&c.variable) {
            return Err(SparqlError::UnsupportedConstruct(format!("variable name {:?}", c.variable)));
        }
        constraint_block.push(format!("{anchor} {} ?{} .", vocab::abbreviate(&c.predicate), c.variable));
        let v = &c.variable;
        let filter = match (c.mode, &c.start, &c.end) {
            (TemporalMode::After, Some(s), _) => format!("?{v} > {}", literal_text(s)),
            (TemporalMode::Before, _, Some(end)) => format!("?{v} < {}", literal_text(end)),
            (TemporalMode::Within, Some(s), Some(end)) => {
                format!("?{v} >= {} && ?{v} <= {}", literal_text(s), literal_text(end))
            }
            _ => return Err(SparqlError::UnsupportedConstruct("constraint bounds".into())),
        };
        constraint_block.push(format!("FILTER ( {filter})"));
    }

    if !e.bridges.is_empty() {
        let mut bridges: Vec<(&String, &str)> = e.bridges.iter().map(|(iri, v)| (v, *iri)).collect();
        bridges.sort_by_key(|(v, _)| var_ordinal(v));
        blocks.push(
            bridges
                .into_iter()
                .map(|(v, iri)| format!("?{v} owl:sameAs {} .", vocab::abbreviate(iri)))
                .collect(),
        );
    }
    if !constraint_block.is_empty() {
        blocks.push(constraint_block);
    }

    for (i, block) in blocks.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        for line in block {
            text.push_str("  ");
            text.push_str(line);
            text.push('\n');
        }
    }
    text.push_str("}\n");
    Ok(SparqlText { text, model: q.model() })
}

fn is_reserved_name(name: &str) -> bool {
    let numbered = |prefix: &str| {
        name.strip_prefix(prefix)
            .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
    };
    numbered(STATEMENT_VAR) || numbered(BRIDGE_VAR)
}

/// Sort key putting `name2` before `name10`.
fn var_ordinal(name: &str) -> (String, u64) {
    let split = name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (head, digits) = name.split_at(split);
    (head.to_string(), digits.parse().unwrap_or(0))
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    PName(String, String),
    Iri(String),
    Var(String),
    Str(String),
    Number(String),
    LangTag(String),
    DoubleCaret,
    Punct(char),
    Op(&'static str),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, expected: &str) -> SparqlError {
        SparqlError::Parse { position: self.pos, expected: expected.into() }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        loop {
            let rest = &self.src[self.pos..];
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with('#') {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, SparqlError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            let Some(c) = self.peek_char() else {
                out.push((start, Tok::Eof));
                return Ok(out);
            };
            let rest = &self.src[self.pos..];
            let tok = match c {
                '<' => {
                    if rest.starts_with("<=") {
                        self.pos += 2;
                        Tok::Op("<=")
                    } else if let Some(iri) = iri_ref(rest) {
                        self.pos += iri.len() + 2;
                        Tok::Iri(iri.to_string())
                    } else {
                        self.pos += 1;
                        Tok::Op("<")
                    }
                }
                '>' | '=' | '!' | '&' | '|' => {
                    let op = ["&&", "||", ">=", "!=", ">", "=", "!"].into_iter().find(|op| rest.starts_with(op));
                    match op {
                        Some(op) => {
                            self.pos += op.len();
                            Tok::Op(op)
                        }
                        None => return Err(SparqlError::UnsupportedFeature("property path".into())),
                    }
                }
                '?' | '$' => {
                    self.pos += 1;
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    if name.is_empty() {
                        return Err(self.err("variable name"));
                    }
                    Tok::Var(name.to_string())
                }
                '"' | '\'' => Tok::Str(self.string(c)?),
                '@' => {
                    self.pos += 1;
                    let tag = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                    if tag.is_empty() {
                        return Err(self.err("language tag"));
                    }
                    Tok::LangTag(tag.to_string())
                }
                '^' if rest.starts_with("^^") => {
                    self.pos += 2;
                    Tok::DoubleCaret
                }
                '^' | '/' | '+' => return Err(SparqlError::UnsupportedFeature("property path".into())),
                '-' | '0'..='9' => {
                    self.pos += 1;
                    self.take_while(|c| c.is_ascii_digit() || c == '.');
                    let mut text = &self.src[start..self.pos];
                    // a trailing '.' ends the triple
                    if let Some(stripped) = text.strip_suffix('.') {
                        text = stripped;
                        self.pos -= 1;
                    }
                    if text == "-" || text.contains("..") {
                        return Err(self.err("number"));
                    }
                    Tok::Number(text.to_string())
                }
                '_' if rest.starts_with("_:") => return Err(SparqlError::UnsupportedFeature("blank node".into())),
                '{' | '}' | '(' | ')' | '.' | ';' | ',' | '*' => {
                    self.pos += 1;
                    Tok::Punct(c)
                }
                c if c.is_alphabetic() || c == ':' => {
                    let word = self.take_while(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | ':' | '.' | '%'));
                    let word = word.trim_end_matches('.');
                    self.pos = start + word.len();
                    match word.split_once(':') {
                        Some((p, l)) => Tok::PName(p.to_string(), l.to_string()),
                        None => Tok::Word(word.to_string()),
                    }
                }
                _ => return Err(self.err("a token")),
            };
            out.push((start, tok));
        }
    }

    fn string(&mut self, quote: char) -> Result<String, SparqlError> {
        if self.src[self.pos..].starts_with(&quote.to_string().repeat(3)) {
            return Err(SparqlError::UnsupportedFeature("long string literal".into()));
        }
        self.pos += 1;
        let mut out = String::new();
        loop {
            let c = self.peek_char().ok_or_else(|| self.err("closing quote"))?;
            self.pos += c.len_utf8();
            match c {
                c if c == quote => return Ok(out),
                '\n' | '\r' => return Err(self.err("closing quote")),
                '\\' => {
                    let e = self.peek_char().ok_or_else(|| self.err("escape"))?;
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        'r' => out.push('\r'),
                        't' => out.push('\t'),
                        'b' => out.push('\u{8}'),
                        'f' => out.push('\u{c}'),
                        '"' | '\'' | '\\' => out.push(e),
                        'u' | 'U' => {
                            let n = if e == 'u' { 4 } else { 8 };
                            let hex = self.src.get(self.pos..self.pos + n).ok_or_else(|| self.err("hex escape"))?;
                            let ch = u32::from_str_radix(hex, 16)
                                .ok()
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.err("hex escape"))?;
                            self.pos += n;
                            out.push(ch);
                        }
                        _ => return Err(self.err("escape")),
                    }
                }
                c => out.push(c),
            }
        }
    }
}

fn iri_ref(rest: &str) -> Option<&str> {
    let body = &rest[1..];
    for (i, c) in body.char_indices() {
        match c {
            '>' => return (i > 0).then(|| &body[..i]),
            c if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') => return None,
            _ => {}
        }
    }
    None
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum PTerm {
    Var(String),
    Iri(String),
    Lit(Literal),
}

struct Pattern {
    s: PTerm,
    p: String,
    o: PTerm,
}

struct Comparison {
    var: String,
    op: &'static str,
    value: Literal,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    prefixes: BTreeMap<String, String>,
}

const UNSUPPORTED_WORDS: &[&str] = &[
    "OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "BIND", "VALUES", "ORDER", "GROUP", "HAVING",
    "LIMIT", "OFFSET", "CONSTRUCT", "DESCRIBE", "FROM", "BASE", "NOT", "EXISTS",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn position(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> SparqlError {
        SparqlError::Parse { position: self.position(), expected: expected.into() }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x.eq_ignore_ascii_case(w))
    }

    fn check_unsupported(&self) -> Result<(), SparqlError> {
        if let Tok::Word(w) = self.peek() {
            let upper = w.to_ascii_uppercase();
            if UNSUPPORTED_WORDS.contains(&upper.as_str()) {
                return Err(SparqlError::UnsupportedFeature(upper));
            }
        }
        Ok(())
    }

    fn expect_word(&mut self, w: &str) -> Result<(), SparqlError> {
        self.check_unsupported()?;
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(w))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SparqlError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.err(&format!("'{c}'")))
        }
    }

    fn expect_var(&mut self) -> Result<String, SparqlError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(v)
            }
            _ => Err(self.err("variable")),
        }
    }

    fn iri(&mut self) -> Result<Option<String>, SparqlError> {
        match self.peek().clone() {
            Tok::Iri(i) => {
                self.bump();
                Ok(Some(i))
            }
            Tok::PName(p, l) => {
                let ns = match self.prefixes.get(&p) {
                    Some(ns) => ns.clone(),
                    None => match vocab::namespace_for(&p) {
                        Some(ns) => ns.to_string(),
                        None => return Err(self.err(&format!("a declared prefix (\"{p}:\" is unknown)"))),
                    },
                };
                self.bump();
                Ok(Some(format!("{ns}{l}")))
            }
            _ => Ok(None),
        }
    }

    fn literal(&mut self) -> Result<Option<Literal>, SparqlError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                match self.peek().clone() {
                    Tok::LangTag(tag) => {
                        self.bump();
                        Ok(Some(Literal::lang(s, tag)))
                    }
                    Tok::DoubleCaret => {
                        self.bump();
                        let dt = self.iri()?.ok_or_else(|| self.err("datatype IRI"))?;
                        Ok(Some(Literal::typed(s, dt)))
                    }
                    _ => Ok(Some(Literal::plain(s))),
                }
            }
            Tok::Number(n) => {
                self.bump();
                let dt = if n.contains('.') { "http://www.w3.org/2001/XMLSchema#decimal" } else { vocab::XSD_INTEGER };
                Ok(Some(Literal::typed(n, dt)))
            }
            Tok::Word(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Some(Literal::typed(w, "http://www.w3.org/2001/XMLSchema#boolean")))
            }
            _ => Ok(None),
        }
    }

    fn term(&mut self, what: &str) -> Result<PTerm, SparqlError> {
        if let Tok::Var(v) = self.peek().clone() {
            self.bump();
            return Ok(PTerm::Var(v));
        }
        if let Some(i) = self.iri()? {
            return Ok(PTerm::Iri(i));
        }
        if let Some(l) = self.literal()? {
            return Ok(PTerm::Lit(l));
        }
        if *self.peek() == Tok::Punct('[') || *self.peek() == Tok::Punct('(') {
            return Err(SparqlError::UnsupportedFeature("collection or blank node syntax".into()));
        }
        Err(self.err(what))
    }

    fn predicate(&mut self) -> Result<String, SparqlError> {
        if matches!(self.peek(), Tok::Word(w) if w == "a") {
            self.bump();
            return Ok(vocab::RDF_TYPE.to_string());
        }
        if matches!(self.peek(), Tok::Var(_)) {
            return Err(SparqlError::UnsupportedFeature("variable predicate".into()));
        }
        self.iri()?.ok_or_else(|| self.err("predicate IRI"))
    }

    fn prologue(&mut self) -> Result<(), SparqlError> {
        while self.is_word("PREFIX") {
            self.bump();
            let prefix = match self.bump() {
                Tok::PName(p, l) if l.is_empty() => p,
                _ => return Err(self.err("prefix name")),
            };
            let ns = match self.bump() {
                Tok::Iri(i) => i,
                _ => return Err(self.err("namespace IRI")),
            };
            self.prefixes.insert(prefix, ns);
        }
        Ok(())
    }

    /// Returns the query type and its projected variable.
    fn head(&mut self) -> Result<(QueryType, Option<String>), SparqlError> {
        self.check_unsupported()?;
        if self.is_word("ASK") {
            self.bump();
            if self.is_word("WHERE") {
                self.bump();
            }
            return Ok((QueryType::Ask, None));
        }
        self.expect_word("SELECT")?;
        if self.is_word("DISTINCT") || self.is_word("REDUCED") {
            self.bump();
        }
        let out = match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                (QueryType::Select, Some(v))
            }
            Tok::Punct('*') => return Err(SparqlError::UnsupportedFeature("SELECT *".into())),
            Tok::Punct('(') => {
                self.bump();
                self.expect_word("COUNT")?;
                self.expect_punct('(')?;
                if self.is_word("DISTINCT") {
                    self.bump();
                }
                if *self.peek() == Tok::Punct('*') {
                    return Err(SparqlError::UnsupportedFeature("COUNT(*)".into()));
                }
                let v = if self.eat_punct('(') {
                    let v = self.expect_var()?;
                    self.expect_punct(')')?;
                    v
                } else {
                    self.expect_var()?
                };
                if self.eat_punct(')') {
                    self.expect_word("AS")?;
                    self.expect_var()?;
                    self.expect_punct(')')?;
                } else {
                    // the `(COUNT(DISTINCT(?v) AS ?count))` spelling
                    self.expect_word("AS")?;
                    self.expect_var()?;
                    self.expect_punct(')')?;
                    self.expect_punct(')')?;
                }
                (QueryType::Count, Some(v))
            }
            _ => return Err(self.err("projection")),
        };
        if matches!(self.peek(), Tok::Var(_) | Tok::Punct('(')) {
            return Err(SparqlError::UnsupportedFeature("multiple projections".into()));
        }
        self.expect_word("WHERE")?;
        Ok(out)
    }

    fn group(&mut self) -> Result<(Vec<Pattern>, Vec<Comparison>), SparqlError> {
        self.expect_punct('{')?;
        let mut patterns = Vec::new();
        let mut comparisons = Vec::new();
        loop {
            self.check_unsupported()?;
            match self.peek().clone() {
                Tok::Punct('}') => {
                    self.bump();
                    break;
                }
                Tok::Punct('{') => return Err(SparqlError::UnsupportedFeature("nested group".into())),
                Tok::Punct('.') => {
                    self.bump();
                }
                Tok::Word(w) if w.eq_ignore_ascii_case("FILTER") => {
                    self.bump();
                    self.expect_punct('(')?;
                    self.conjunction(&mut comparisons)?;
                    self.expect_punct(')')?;
                }
                Tok::Eof => return Err(self.err("'}'")),
                _ => {
                    let s = self.term("subject")?;
                    loop {
                        let p = self.predicate()?;
                        loop {
                            let o = self.term("object")?;
                            patterns.push(Pattern { s: s.clone(), p: p.clone(), o });
                            if !self.eat_punct(',') {
                                break;
                            }
                        }
                        if !self.eat_punct(';') || matches!(self.peek(), Tok::Punct('.') | Tok::Punct('}')) {
                            break;
                        }
                    }
                    if !matches!(self.peek(), Tok::Punct('}')) {
                        self.expect_punct('.')?;
                    }
                }
            }
        }
        self.check_unsupported()?;
        if *self.peek() != Tok::Eof {
            return Err(self.err("end of query"));
        }
        Ok((patterns, comparisons))
    }

    fn conjunction(&mut self, out: &mut Vec<Comparison>) -> Result<(), SparqlError> {
        loop {
            if self.eat_punct('(') {
                self.conjunction(out)?;
                self.expect_punct(')')?;
            } else {
                out.push(self.comparison()?);
            }
            match self.peek() {
                Tok::Op("&&") => {
                    self.bump();
                }
                Tok::Op("||") => return Err(SparqlError::UnsupportedFeature("disjunction in FILTER".into())),
                _ => return Ok(()),
            }
        }
    }

    fn comparison(&mut self) -> Result<Comparison, SparqlError> {
        if let Tok::Word(w) | Tok::PName(w, _) = self.peek().clone() {
            return Err(SparqlError::UnsupportedFeature(format!("function {w}")));
        }
        let left = self.term("comparison operand")?;
        let op = match self.bump() {
            Tok::Op(op @ (">" | "<" | ">=" | "<=")) => op,
            Tok::Op(op) => return Err(SparqlError::UnsupportedFeature(format!("operator {op}"))),
            _ => return Err(self.err("comparison operator")),
        };
        let right = self.term("comparison operand")?;
        match (left, right) {
            (PTerm::Var(var), PTerm::Lit(value)) => Ok(Comparison { var, op, value }),
            (PTerm::Lit(value), PTerm::Var(var)) => {
                let op = match op {
                    ">" => "<",
                    "<" => ">",
                    ">=" => "<=",
                    _ => ">=",
                };
                Ok(Comparison { var, op, value })
            }
            _ => Err(SparqlError::UnsupportedFeature("comparison between two variables or constants".into())),
        }
    }
}

/// Parses the dialect back into a semantic query over graph `model`.
///
/// Statement groups (`rdf:subject`, `rdf:object`, `sem:roleType` on one
/// variable) fold into reified relations when `model` is reified. Variables
/// only used as the subject of an `owl:sameAs` pattern become bridged nodes.
pub fn parse(text: &str, model: GraphModel) -> Result<SemanticQuery, SparqlError> {
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    let mut p = Parser { toks, at: 0, prefixes: BTreeMap::new() };
    p.prologue()?;
    let (qtype, target) = p.head()?;
    let (mut patterns, comparisons) = p.group()?;

    // temporal filter
    let mut constraint_parts = None;
    if !comparisons.is_empty() {
        let var = comparisons[0].var.clone();
        if comparisons.iter().any(|c| c.var != var) {
            return Err(SparqlError::UnsupportedFeature("filter over several variables".into()));
        }
        let ops: Vec<&str> = comparisons.iter().map(|c| c.op).collect();
        let get = |op: &str| comparisons.iter().find(|c| c.op == op).map(|c| c.value.clone());
        let (mode, start, end) = match ops.as_slice() {
            [">"] => (TemporalMode::After, get(">"), None),
            ["<"] => (TemporalMode::Before, None, get("<")),
            [">=", "<="] | ["<=", ">="] => (TemporalMode::Within, get(">="), get("<=")),
            _ => return Err(SparqlError::UnsupportedFeature("filter shape".into())),
        };
        let support: Vec<usize> = patterns
            .iter()
            .enumerate()
            .filter(|(_, pt)| pt.o == PTerm::Var(var.clone()))
            .map(|(i, _)| i)
            .collect();
        let [i] = support.as_slice() else {
            return Err(SparqlError::UnsupportedFeature("filter variable must be bound by exactly one pattern".into()));
        };
        let pt = patterns.remove(*i);
        if patterns.iter().any(|x| x.s == PTerm::Var(var.clone())) {
            return Err(SparqlError::UnsupportedFeature("filter variable used as a subject".into()));
        }
        constraint_parts = Some((pt.s, pt.p, var, mode, start, end));
    }

    // event typing (direct model)
    let mut typed: BTreeSet<String> = BTreeSet::new();
    if model == GraphModel::Direct {
        patterns.retain(|pt| match (&pt.s, &pt.o) {
            (PTerm::Var(v), PTerm::Iri(c)) if pt.p == vocab::RDF_TYPE && c == vocab::DBO_EVENT => {
                typed.insert(v.clone());
                false
            }
            _ => true,
        });
    }

    // statement groups
    #[derive(Default)]
    struct Group {
        subject: Vec<PTerm>,
        object: Vec<PTerm>,
        role: Vec<String>,
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    if model == GraphModel::Reified {
        patterns.retain(|pt| {
            let PTerm::Var(v) = &pt.s else { return true };
            if Some(v) == target.as_ref() {
                return true;
            }
            let g = || -> Group { Group::default() };
            match pt.p.as_str() {
                vocab::RDF_SUBJECT => groups.entry(v.clone()).or_insert_with(g).subject.push(pt.o.clone()),
                vocab::RDF_OBJECT => groups.entry(v.clone()).or_insert_with(g).object.push(pt.o.clone()),
                vocab::SEM_ROLE_TYPE => match &pt.o {
                    PTerm::Iri(r) => groups.entry(v.clone()).or_insert_with(g).role.push(r.clone()),
                    _ => return true,
                },
                _ => return true,
            }
            false
        });
    }

    // bridges
    let mut bridges: BTreeMap<String, String> = BTreeMap::new();
    let mut bridge_patterns = Vec::new();
    for (i, pt) in patterns.iter().enumerate() {
        if let (PTerm::Var(v), PTerm::Iri(iri)) = (&pt.s, &pt.o) {
            if pt.p == vocab::OWL_SAME_AS && Some(v) != target.as_ref() && !groups.contains_key(v) {
                if bridges.insert(v.clone(), iri.clone()).is_some() {
                    return Err(SparqlError::UnsupportedFeature(format!("?{v} bridged twice")));
                }
                bridge_patterns.push(i);
            }
        }
    }
    for i in bridge_patterns.into_iter().rev() {
        patterns.remove(i);
    }

    let resolve = |t: PTerm| -> Result<QueryTerm, SparqlError> {
        Ok(match t {
            PTerm::Var(v) => match bridges.get(&v) {
                Some(iri) => QueryTerm::Node(iri.clone()),
                None if groups.contains_key(&v) => {
                    return Err(SparqlError::UnsupportedFeature(format!("statement variable ?{v} used as a node")))
                }
                None => QueryTerm::Var(v),
            },
            PTerm::Iri(i) => QueryTerm::Node(i),
            PTerm::Lit(l) => QueryTerm::Literal(l),
        })
    };

    let mut relations = Vec::new();
    let mut group_names: Vec<&String> = groups.keys().collect();
    group_names.sort_by_key(|n| var_ordinal(n));
    let mut group_relation: BTreeMap<String, usize> = BTreeMap::new();
    for name in group_names {
        let g = &groups[name];
        let ([s], [o], [role]) = (g.subject.as_slice(), g.object.as_slice(), g.role.as_slice()) else {
            return Err(SparqlError::UnsupportedFeature(format!(
                "statement ?{name} needs exactly one rdf:subject, rdf:object and sem:roleType"
            )));
        };
        group_relation.insert(name.clone(), relations.len());
        relations.push(QueryRelation::new(resolve(s.clone())?, role.clone(), resolve(o.clone())?, Provenance::Reified));
    }
    for pt in patterns {
        relations.push(QueryRelation::new(resolve(pt.s)?, pt.p, resolve(pt.o)?, Provenance::Direct));
    }

    // canonical order, stable so that equal statements keep their numbering
    let mut order: Vec<usize> = (0..relations.len()).collect();
    order.sort_by(|&a, &b| relations[a].canonical_cmp(&relations[b]));
    let position_of = |orig: usize| order.iter().position(|&i| i == orig).expect("index present");

    let mut var_names: BTreeSet<String> = BTreeSet::new();
    for r in &relations {
        for t in r.terms() {
            if let QueryTerm::Var(v) = t {
                var_names.insert(v.clone());
            }
        }
    }
    if let Some(t) = &target {
        if !var_names.contains(t) {
            return Err(SparqlError::Parse { position: 0, expected: format!("?{t} in the query pattern") });
        }
    }
    if let Some(extra) = var_names.iter().find(|v| Some(*v) != target.as_ref()) {
        return Err(SparqlError::UnsupportedFeature(format!("additional variable ?{extra}")));
    }
    let variables: Vec<Variable> = target
        .iter()
        .map(|name| {
            let kind = if typed.contains(name) || (model == GraphModel::Reified && name.starts_with("event")) {
                VarKind::Event
            } else if name.starts_with("value") {
                VarKind::Literal
            } else {
                VarKind::Entity
            };
            Variable::new(name.clone(), kind)
        })
        .collect();
    if let Some(untyped) = typed.iter().find(|t| Some(*t) != target.as_ref()) {
        return Err(SparqlError::UnsupportedFeature(format!("additional variable ?{untyped}")));
    }

    let sorted: Vec<QueryRelation> = order.iter().map(|&i| relations[i].clone()).collect();
    let bridged: BTreeSet<String> = bridges.values().cloned().collect();
    let graph = QueryGraph::new(sorted, variables, bridged)?;

    let constraint = match constraint_parts {
        None => None,
        Some((anchor_term, predicate, variable, mode, start, end)) => {
            let anchor = match &anchor_term {
                PTerm::Var(v) if group_relation.contains_key(v) => {
                    TemporalAnchor::Relation(position_of(group_relation[v]))
                }
                _ => TemporalAnchor::Node(resolve(anchor_term)?),
            };
            Some(TemporalConstraint { anchor, predicate, variable, mode, start, end })
        }
    };
    Ok(SemanticQuery::new(graph, qtype, constraint, model)?)
}
