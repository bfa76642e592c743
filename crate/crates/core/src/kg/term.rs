use std::fmt;

use serde::{Deserialize, Serialize};

use crate::vocab;

/// Identifier of a knowledge-graph node: an IRI, or a blank node label
/// prefixed with `_:`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(iri: impl Into<String>) -> Self {
        NodeId(iri.into())
    }

    pub fn blank(label: &str) -> Self {
        NodeId(format!("_:{label}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_blank(&self) -> bool {
        self.0.starts_with("_:")
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// An RDF literal. A literal carries either a datatype or a language tag,
/// never both.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    lexical: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    datatype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language: Option<String>,
}

impl Literal {
    pub fn plain(lexical: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: None, language: None }
    }

    pub fn typed(lexical: impl Into<String>, datatype: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: Some(datatype.into()), language: None }
    }

    pub fn lang(lexical: impl Into<String>, language: impl Into<String>) -> Self {
        Literal { lexical: lexical.into(), datatype: None, language: Some(language.into()) }
    }

    pub fn integer(value: i64) -> Self {
        Literal::typed(value.to_string(), vocab::XSD_INTEGER)
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> Option<&str> {
        self.datatype.as_deref()
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    /// Writes the literal in N-Triples syntax.
    pub fn to_ntriples(&self) -> String {
        let mut out = String::with_capacity(self.lexical.len() + 2);
        out.push('"');
        escape_string(&self.lexical, &mut out);
        out.push('"');
        if let Some(dt) = &self.datatype {
            out.push_str("^^<");
            escape_iri(dt, &mut out);
            out.push('>');
        } else if let Some(lang) = &self.language {
            out.push('@');
            out.push_str(lang);
        }
        out
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ntriples())
    }
}

/// Any RDF term that can occupy a triple position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Term {
    Iri { value: String },
    Blank { value: String },
    Literal { value: Literal },
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri { value: value.into() }
    }

    pub fn blank(label: impl Into<String>) -> Self {
        Term::Blank { value: label.into() }
    }

    pub fn literal(value: Literal) -> Self {
        Term::Literal { value }
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri { value } => Some(value),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal { value } => Some(value),
            _ => None,
        }
    }

    /// Node identifier for IRIs and blank nodes; `None` for literals.
    pub fn node_id(&self) -> Option<NodeId> {
        match self {
            Term::Iri { value } => Some(NodeId::new(value.clone())),
            Term::Blank { value } => Some(NodeId::blank(value)),
            Term::Literal { .. } => None,
        }
    }

    pub fn from_node(node: &NodeId) -> Self {
        match node.as_str().strip_prefix("_:") {
            Some(label) => Term::blank(label),
            None => Term::iri(node.as_str()),
        }
    }

    pub fn to_ntriples(&self) -> String {
        match self {
            Term::Iri { value } => {
                let mut out = String::with_capacity(value.len() + 2);
                out.push('<');
                escape_iri(value, &mut out);
                out.push('>');
                out
            }
            Term::Blank { value } => format!("_:{value}"),
            Term::Literal { value } => value.to_ntriples(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ntriples())
    }
}

/// One parsed statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: impl Into<String>, object: Term) -> Self {
        Triple { subject, predicate: predicate.into(), object }
    }

    /// Convenience constructor for an all-IRI triple.
    pub fn iris(s: &str, p: &str, o: &str) -> Self {
        Triple::new(Term::iri(s), p, Term::iri(o))
    }

    pub fn to_ntriples(&self) -> String {
        let mut out = self.subject.to_ntriples();
        out.push_str(" <");
        escape_iri(&self.predicate, &mut out);
        out.push_str("> ");
        out.push_str(&self.object.to_ntriples());
        out.push_str(" .");
        out
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ntriples())
    }
}

fn escape_string(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                out.push_str(&format!("\\u{:04X}", c as u32));
            }
            c => out.push(c),
        }
    }
}

pub(crate) fn iri_char_needs_escape(c: char) -> bool {
    matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') || (c as u32) <= 0x20
}

fn escape_iri(s: &str, out: &mut String) {
    for c in s.chars() {
        if iri_char_needs_escape(c) {
            out.push_str(&format!("\\u{:04X}", c as u32));
        } else {
            out.push(c);
        }
    }
}
