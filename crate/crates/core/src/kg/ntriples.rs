//! Line-oriented N-Triples reader and writer.
//!
//! Accepts the subset used by knowledge-graph dumps: IRIs in angle brackets,
//! blank nodes, literals with an optional datatype or language tag, `#`
//! comments. Input is consumed one line at a time.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use thiserror::Error;

use super::term::{Literal, Term, Triple};

#[derive(Debug, Error)]
pub enum NTriplesError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// What to do with a line that fails to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Yield the error and stop.
    #[default]
    Strict,
    /// Log the error, skip the line and keep going.
    Lenient,
}

/// Streaming iterator over the triples of an N-Triples document.
pub struct NTriplesReader<R> {
    input: R,
    mode: ParseMode,
    line_no: usize,
    buf: String,
    skipped: usize,
    done: bool,
}

impl<R: BufRead> NTriplesReader<R> {
    pub fn new(input: R, mode: ParseMode) -> Self {
        NTriplesReader { input, mode, line_no: 0, buf: String::new(), skipped: 0, done: false }
    }

    /// Lines dropped so far in lenient mode.
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl<R: BufRead> Iterator for NTriplesReader<R> {
    type Item = Result<Triple, NTriplesError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
            self.line_no += 1;
            match parse_line(&self.buf) {
                Ok(None) => continue,
                Ok(Some(triple)) => return Some(Ok(triple)),
                Err(reason) => match self.mode {
                    ParseMode::Strict => {
                        self.done = true;
                        return Some(Err(NTriplesError::MalformedLine { line: self.line_no, reason }));
                    }
                    ParseMode::Lenient => {
                        tracing::warn!(line = self.line_no, %reason, "skipping malformed N-Triples line");
                        self.skipped += 1;
                    }
                },
            }
        }
        None
    }
}

/// Opens an N-Triples file, transparently decompressing gzip input.
pub fn open(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Reads every triple of a file into memory.
pub fn read_file(path: &Path, mode: ParseMode) -> Result<Vec<Triple>, NTriplesError> {
    NTriplesReader::new(open(path)?, mode).collect()
}

pub fn parse_str(input: &str, mode: ParseMode) -> Result<Vec<Triple>, NTriplesError> {
    NTriplesReader::new(input.as_bytes(), mode).collect()
}

pub fn write<'a, W: Write>(
    mut out: W,
    triples: impl IntoIterator<Item = &'a Triple>,
) -> io::Result<()> {
    for t in triples {
        writeln!(out, "{}", t.to_ntriples())?;
    }
    Ok(())
}

pub fn to_string<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&t.to_ntriples());
        out.push('\n');
    }
    out
}

/// Parses one line. `Ok(None)` for blank and comment-only lines.
pub fn parse_line(line: &str) -> Result<Option<Triple>, String> {
    let mut cur = Cursor { s: line, pos: 0 };
    cur.skip_ws();
    if cur.at_end() || cur.peek() == Some('#') {
        return Ok(None);
    }
    let subject = match cur.peek() {
        Some('<') => Term::iri(cur.iri()?),
        Some('_') => Term::blank(cur.blank()?),
        _ => return Err("expected subject IRI or blank node".into()),
    };
    cur.skip_ws();
    let predicate = match cur.peek() {
        Some('<') => cur.iri()?,
        Some('.') | None => return Err("missing predicate".into()),
        _ => return Err("expected predicate IRI".into()),
    };
    cur.skip_ws();
    let object = match cur.peek() {
        Some('<') => Term::iri(cur.iri()?),
        Some('_') => Term::blank(cur.blank()?),
        Some('"') => Term::literal(cur.literal()?),
        Some('.') | None | Some('#') => return Err("missing object".into()),
        _ => return Err("expected object".into()),
    };
    cur.skip_ws();
    if cur.peek() != Some('.') {
        return Err("expected '.' after object".into());
    }
    cur.bump();
    cur.skip_ws();
    if !(cur.at_end() || cur.peek() == Some('#')) {
        return Err("unexpected content after '.'".into());
    }
    Ok(Some(Triple { subject, predicate, object }))
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.s.len() || self.s[self.pos..].trim_end_matches(['\n', '\r']).is_empty()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn iri(&mut self) -> Result<String, String> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('>') => return Ok(out),
                Some('\\') => out.push(self.unicode_escape()?),
                Some(c) if c == '\n' || c == '\r' => return Err("unterminated IRI".into()),
                Some(c) if matches!(c, '<' | '"' | ' ' | '{' | '}' | '|' | '^' | '`') => {
                    return Err(format!("invalid character {c:?} in IRI"))
                }
                Some(c) => out.push(c),
                None => return Err("unterminated IRI".into()),
            }
        }
    }

    fn blank(&mut self) -> Result<String, String> {
        self.bump();
        if self.bump() != Some(':') {
            return Err("expected ':' in blank node label".into());
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                self.bump();
            } else {
                break;
            }
        }
        let mut label = &self.s[start..self.pos];
        // A trailing '.' belongs to the statement terminator.
        while let Some(stripped) = label.strip_suffix('.') {
            label = stripped;
            self.pos -= 1;
        }
        if label.is_empty() {
            return Err("empty blank node label".into());
        }
        Ok(label.to_string())
    }

    fn literal(&mut self) -> Result<Literal, String> {
        self.bump();
        let mut lexical = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('t') => lexical.push('\t'),
                    Some('b') => lexical.push('\u{8}'),
                    Some('n') => lexical.push('\n'),
                    Some('r') => lexical.push('\r'),
                    Some('f') => lexical.push('\u{c}'),
                    Some('"') => lexical.push('"'),
                    Some('\'') => lexical.push('\''),
                    Some('\\') => lexical.push('\\'),
                    Some('u') => lexical.push(self.hex_char(4)?),
                    Some('U') => lexical.push(self.hex_char(8)?),
                    _ => return Err("invalid escape in literal".into()),
                },
                Some('\n') | Some('\r') | None => return Err("unterminated literal".into()),
                Some(c) => lexical.push(c),
            }
        }
        if self.s[self.pos..].starts_with("^^") {
            self.pos += 2;
            if self.peek() != Some('<') {
                return Err("expected datatype IRI after '^^'".into());
            }
            let dt = self.iri()?;
            Ok(Literal::typed(lexical, dt))
        } else if self.peek() == Some('@') {
            self.bump();
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '-' {
                    self.bump();
                } else {
                    break;
                }
            }
            let tag = &self.s[start..self.pos];
            if tag.is_empty() {
                return Err("empty language tag".into());
            }
            Ok(Literal::lang(lexical, tag))
        } else {
            Ok(Literal::plain(lexical))
        }
    }

    fn unicode_escape(&mut self) -> Result<char, String> {
        match self.bump() {
            Some('u') => self.hex_char(4),
            Some('U') => self.hex_char(8),
            _ => Err("invalid escape in IRI".into()),
        }
    }

    fn hex_char(&mut self, digits: usize) -> Result<char, String> {
        let end = self.pos + digits;
        let hex = self.s.get(self.pos..end).ok_or("truncated unicode escape")?;
        let code = u32::from_str_radix(hex, 16).map_err(|_| "invalid unicode escape")?;
        self.pos = end;
        char::from_u32(code).ok_or_else(|| "invalid code point".to_string())
    }
}
