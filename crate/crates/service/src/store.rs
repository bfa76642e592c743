//! Annotation log and the status derived from it.
//!
//! The log is append-only newline-delimited JSON. Every piece of state is a
//! fold over the log, so reopening the file restores it exactly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use eventqa_core::dataset_io::{qald_string, DatasetEntry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LANGUAGES: [&str; 3] = ["en", "pt", "de"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Verbalization,
    FlagNotUnderstood,
    FlagUnnatural,
}

impl RecordKind {
    pub fn is_flag(self) -> bool {
        self != RecordKind::Verbalization
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub query_id: String,
    pub annotator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub kind: RecordKind,
    /// The verbalization, or the comment of a flag.
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

impl AnnotationRecord {
    fn key(&self) -> (&str, &str, Option<&str>, RecordKind) {
        (&self.query_id, &self.annotator, self.language.as_deref(), self.kind)
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown query {0}")]
    UnknownQuery(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("annotation log {path}, line {line}: {reason}")]
    CorruptLog { path: String, line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dataset(#[from] eventqa_core::dataset_io::DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    Pending,
    Flagged,
    Partial,
    Verbalized,
}

/// Per-query state after folding the log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Folded {
    /// Latest record per (annotator, language, kind).
    latest: BTreeMap<(String, Option<String>, RecordKind), AnnotationRecord>,
}

impl Folded {
    fn flags(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.latest.values().filter(|r| r.kind.is_flag())
    }

    fn flagged(&self) -> bool {
        self.flags().next().is_some()
    }

    /// The newest verbalization per language; ties go to the later log entry.
    fn verbalizations(&self) -> BTreeMap<&str, &AnnotationRecord> {
        let mut out: BTreeMap<&str, &AnnotationRecord> = BTreeMap::new();
        for r in self.latest.values().filter(|r| r.kind == RecordKind::Verbalization) {
            let lang = r.language.as_deref().unwrap_or_default();
            match out.get(lang) {
                Some(prev) if prev.timestamp.cmp(&r.timestamp) == Ordering::Greater => {}
                _ => {
                    out.insert(lang, r);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryView {
    pub id: String,
    pub sparql: String,
    pub model: String,
    pub instructions: Vec<String>,
    pub status: QueryStatus,
    pub verbalizations: BTreeMap<String, String>,
}

pub const INSTRUCTIONS: [&str; 3] = [
    "Read the SPARQL query and work out what it asks for.",
    "If you cannot follow it, or nobody would plausibly ask it, flag it and say why in a comment.",
    "Otherwise write the question in your own words, phrased as a person would type it.",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub pending: usize,
    pub flagged: usize,
    pub partial: usize,
    pub verbalized: usize,
    /// Language → number of unflagged queries verbalized in it.
    pub per_language: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagNote {
    pub id: String,
    pub annotator: String,
    pub kind: RecordKind,
    pub comment: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportReport {
    pub exported: Vec<String>,
    pub flagged: Vec<FlagNote>,
    pub pending: Vec<String>,
}

/// Numeric ids sort numerically, and before any non-numeric id.
fn id_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

pub struct AnnotationStore {
    dataset_id: String,
    entries: Vec<DatasetEntry>,
    index: BTreeMap<String, usize>,
    languages: Vec<String>,
    log: Vec<AnnotationRecord>,
    state: Vec<Folded>,
    file: Option<(PathBuf, File)>,
}

impl AnnotationStore {
    /// A store without a backing file.
    pub fn in_memory(dataset_id: &str, mut entries: Vec<DatasetEntry>, languages: &[&str]) -> Self {
        entries.sort_by(|a, b| id_order(&a.id, &b.id));
        let index = entries.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();
        let state = vec![Folded::default(); entries.len()];
        AnnotationStore {
            dataset_id: dataset_id.into(),
            entries,
            index,
            languages: languages.iter().map(|l| l.to_string()).collect(),
            log: Vec::new(),
            state,
            file: None,
        }
    }

    /// Opens (or creates) the log at `path` and replays it. A final line cut
    /// short by a crash is dropped; any other bad line is an error.
    pub fn open(dataset_id: &str, entries: Vec<DatasetEntry>, languages: &[&str], path: &Path) -> Result<Self, StoreError> {
        let mut store = Self::in_memory(dataset_id, entries, languages);
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
            let ends_clean = std::fs::read(path)?.last().is_none_or(|b| *b == b'\n');
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let last = i + 1 == lines.len();
                match serde_json::from_str::<AnnotationRecord>(line) {
                    Ok(r) => {
                        if !store.index.contains_key(&r.query_id) {
                            return Err(StoreError::CorruptLog {
                                path: path.display().to_string(),
                                line: i + 1,
                                reason: format!("unknown query {}", r.query_id),
                            });
                        }
                        store.apply(r);
                    }
                    Err(_) if last && !ends_clean => {
                        tracing::warn!(line = i + 1, "dropping truncated final log line");
                    }
                    Err(e) => {
                        return Err(StoreError::CorruptLog { path: path.display().to_string(), line: i + 1, reason: e.to_string() })
                    }
                }
            }
            if !ends_clean {
                // rewrite without the torn tail so later appends start on a fresh line
                let mut text = String::new();
                for r in &store.log {
                    text.push_str(&serde_json::to_string(r).expect("record serializes"));
                    text.push('\n');
                }
                std::fs::write(path, text)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.file = Some((path.to_path_buf(), file));
        Ok(store)
    }

    fn apply(&mut self, r: AnnotationRecord) {
        let i = self.index[&r.query_id];
        let key = (r.annotator.clone(), r.language.clone(), r.kind);
        let folded = &mut self.state[i];
        match folded.latest.get(&key) {
            Some(prev) if prev.timestamp > r.timestamp => {}
            _ => {
                folded.latest.insert(key, r.clone());
            }
        }
        self.log.push(r);
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn log(&self) -> &[AnnotationRecord] {
        &self.log
    }

    fn status_at(&self, i: usize) -> QueryStatus {
        let f = &self.state[i];
        if f.flagged() {
            return QueryStatus::Flagged;
        }
        let v = f.verbalizations();
        if v.is_empty() {
            QueryStatus::Pending
        } else if self.languages.iter().all(|l| v.contains_key(l.as_str())) {
            QueryStatus::Verbalized
        } else {
            QueryStatus::Partial
        }
    }

    pub fn status(&self, id: &str) -> Option<QueryStatus> {
        self.index.get(id).map(|&i| self.status_at(i))
    }

    fn view_at(&self, i: usize) -> QueryView {
        let e = &self.entries[i];
        QueryView {
            id: e.id.clone(),
            sparql: e.sparql_eventkg.with_prologue(),
            model: e.sparql_eventkg.model.to_string(),
            instructions: INSTRUCTIONS.iter().map(|s| s.to_string()).collect(),
            status: self.status_at(i),
            verbalizations: self.state[i].verbalizations().into_iter().map(|(l, r)| (l.to_string(), r.text.clone())).collect(),
        }
    }

    pub fn view(&self, id: &str) -> Option<QueryView> {
        self.index.get(id).map(|&i| self.view_at(i))
    }

    /// The lowest-id query that nobody flagged and that has no
    /// verbalization in `language` yet.
    pub fn next_query(&self, _annotator: &str, language: &str) -> Option<QueryView> {
        (0..self.entries.len())
            .find(|&i| !self.state[i].flagged() && !self.state[i].verbalizations().contains_key(language))
            .map(|i| self.view_at(i))
    }

    pub fn validate(&self, r: &AnnotationRecord) -> Result<(), StoreError> {
        let bad = |m: &str| Err(StoreError::InvalidRecord(m.into()));
        if !self.index.contains_key(&r.query_id) {
            return Err(StoreError::UnknownQuery(r.query_id.clone()));
        }
        if r.annotator.trim().is_empty() {
            return bad("annotator name is empty");
        }
        if r.text.trim().is_empty() {
            return bad(if r.kind.is_flag() { "a flag needs a comment" } else { "verbalization is empty" });
        }
        match (&r.kind, &r.language) {
            (RecordKind::Verbalization, None) => bad("verbalization needs a language"),
            (RecordKind::Verbalization, Some(l)) if !self.languages.contains(l) => {
                bad(&format!("language {l} is not one of {}", self.languages.join(", ")))
            }
            _ => Ok(()),
        }
    }

    /// Appends a record and returns the query's new status. Repeating the
    /// latest record for the same (query, annotator, language, kind) with
    /// the same text changes nothing.
    pub fn submit(&mut self, r: AnnotationRecord) -> Result<QueryStatus, StoreError> {
        self.validate(&r)?;
        let i = self.index[&r.query_id];
        let key = r.key();
        let unchanged = self.state[i]
            .latest
            .get(&(key.1.to_string(), key.2.map(str::to_string), key.3))
            .is_some_and(|prev| prev.text == r.text);
        if !unchanged {
            if let Some((_, f)) = &mut self.file {
                let mut line = serde_json::to_string(&r).expect("record serializes");
                line.push('\n');
                f.write_all(line.as_bytes())?;
                f.flush()?;
                f.sync_data()?;
            }
            self.apply(r);
        }
        Ok(self.status_at(i))
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress { total: self.entries.len(), ..Default::default() };
        for l in &self.languages {
            p.per_language.insert(l.clone(), 0);
        }
        for i in 0..self.entries.len() {
            match self.status_at(i) {
                QueryStatus::Pending => p.pending += 1,
                QueryStatus::Flagged => p.flagged += 1,
                QueryStatus::Partial => p.partial += 1,
                QueryStatus::Verbalized => p.verbalized += 1,
            }
            if !self.state[i].flagged() {
                for l in self.state[i].verbalizations().keys() {
                    *p.per_language.entry(l.to_string()).or_default() += 1;
                }
            }
        }
        p
    }

    /// Entries with at least one verbalization and no flag, with their
    /// verbalizations merged in, plus a report on what was left out.
    pub fn export_merged(&self) -> (Vec<DatasetEntry>, ExportReport) {
        let mut out = Vec::new();
        let mut report = ExportReport::default();
        for (i, e) in self.entries.iter().enumerate() {
            let f = &self.state[i];
            if f.flagged() {
                report.flagged.extend(f.flags().map(|r| FlagNote {
                    id: e.id.clone(),
                    annotator: r.annotator.clone(),
                    kind: r.kind,
                    comment: r.text.clone(),
                }));
                continue;
            }
            let v = f.verbalizations();
            if v.is_empty() {
                report.pending.push(e.id.clone());
                continue;
            }
            let mut merged = e.clone();
            for (l, r) in v {
                merged.verbalizations.insert(l.to_string(), r.text.clone());
            }
            report.exported.push(e.id.clone());
            out.push(merged);
        }
        (out, report)
    }

    pub fn export_qald(&self) -> Result<String, StoreError> {
        Ok(qald_string(&self.export_merged().0, &self.dataset_id)?)
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.index.keys().map(String::as_str).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use eventqa_core::kg::GraphModel;
    use eventqa_core::sparql::SparqlText;

    fn entries(n: usize) -> Vec<DatasetEntry> {
        (1..=n)
            .map(|i| DatasetEntry {
                id: i.to_string(),
                sparql_eventkg: SparqlText { text: format!("ASK WHERE {{\n  dbr:E{i} dbo:p dbr:B .\n}}\n"), model: GraphModel::Direct },
                sparql_dbpedia: None,
                verbalizations: BTreeMap::new(),
                answers: None,
                metadata: Default::default(),
            })
            .collect()
    }

    fn at(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_600_000_000 + s, 0).unwrap()
    }

    fn verb(id: &str, lang: &str, text: &str, t: i64) -> AnnotationRecord {
        AnnotationRecord {
            query_id: id.into(),
            annotator: "ana".into(),
            language: Some(lang.into()),
            kind: RecordKind::Verbalization,
            text: text.into(),
            timestamp: at(t),
        }
    }

    fn flag(id: &str, comment: &str, t: i64) -> AnnotationRecord {
        AnnotationRecord {
            query_id: id.into(),
            annotator: "bo".into(),
            language: None,
            kind: RecordKind::FlagNotUnderstood,
            text: comment.into(),
            timestamp: at(t),
        }
    }

    #[test]
    fn queue_order() {
        let mut s = AnnotationStore::in_memory("x", entries(3), &DEFAULT_LANGUAGES);
        assert_eq!(s.next_query("ana", "en").unwrap().id, "1");
        s.submit(flag("1", "unclear", 0)).unwrap();
        assert_eq!(s.next_query("ana", "en").unwrap().id, "2");
        s.submit(verb("2", "en", "Is it?", 1)).unwrap();
        s.submit(verb("3", "en", "Is it so?", 2)).unwrap();
        assert!(s.next_query("ana", "en").is_none());
        assert_eq!(s.next_query("ana", "pt").unwrap().id, "2");
    }

    #[test]
    fn ids_sort_numerically() {
        let s = AnnotationStore::in_memory("x", entries(12).into_iter().rev().collect(), &DEFAULT_LANGUAGES);
        assert_eq!(s.next_query("a", "en").unwrap().id, "1");
        assert_eq!(s.entries[9].id, "10");
    }

    #[test]
    fn submit_statuses_and_errors() {
        let mut s = AnnotationStore::in_memory("x", entries(1), &DEFAULT_LANGUAGES);
        assert_eq!(s.submit(verb("1", "en", "Is it?", 0)).unwrap(), QueryStatus::Partial);
        assert!(matches!(s.submit(verb("9", "en", "x", 0)), Err(StoreError::UnknownQuery(_))));
        assert!(matches!(s.submit(verb("1", "en", " ", 0)), Err(StoreError::InvalidRecord(_))));
        assert!(matches!(s.submit(verb("1", "fr", "Est-ce?", 0)), Err(StoreError::InvalidRecord(_))));
        assert!(matches!(s.submit(flag("1", "", 0)), Err(StoreError::InvalidRecord(_))));
        s.submit(verb("1", "pt", "É?", 1)).unwrap();
        assert_eq!(s.submit(verb("1", "de", "Ist es?", 2)).unwrap(), QueryStatus::Verbalized);
        assert_eq!(s.submit(flag("1", "odd", 3)).unwrap(), QueryStatus::Flagged);
    }

    #[test]
    fn progress_after_a_flag_and_a_verbalization() {
        let mut s = AnnotationStore::in_memory("x", entries(10), &DEFAULT_LANGUAGES);
        assert_eq!(s.progress().pending, 10);
        s.submit(flag("1", "odd", 0)).unwrap();
        s.submit(verb("2", "en", "Is it?", 1)).unwrap();
        let p = s.progress();
        assert_eq!((p.pending, p.flagged, p.partial, p.verbalized), (8, 1, 1, 0));
        assert_eq!(p.per_language["en"], 1);
        assert_eq!(p.pending + p.flagged + p.partial + p.verbalized, p.total);
    }

    #[test]
    fn later_timestamp_supersedes() {
        let mut s = AnnotationStore::in_memory("x", entries(1), &DEFAULT_LANGUAGES);
        s.submit(verb("1", "en", "second", 5)).unwrap();
        s.submit(verb("1", "en", "first", 1)).unwrap();
        assert_eq!(s.view("1").unwrap().verbalizations["en"], "second");
        s.submit(verb("1", "en", "third", 9)).unwrap();
        assert_eq!(s.view("1").unwrap().verbalizations["en"], "third");
    }

    #[test]
    fn identical_submission_is_idempotent() {
        let mut s = AnnotationStore::in_memory("x", entries(2), &DEFAULT_LANGUAGES);
        s.submit(verb("1", "en", "Is it?", 0)).unwrap();
        let before = (s.log().len(), s.progress());
        s.submit(verb("1", "en", "Is it?", 0)).unwrap();
        s.submit(verb("1", "en", "Is it?", 7)).unwrap();
        assert_eq!((s.log().len(), s.progress()), before);
    }

    #[test]
    fn export_excludes_flagged() {
        let mut s = AnnotationStore::in_memory("x", entries(3), &DEFAULT_LANGUAGES);
        let (none, report) = s.export_merged();
        assert!(none.is_empty());
        assert_eq!(report.pending, ["1", "2", "3"]);
        s.submit(verb("1", "en", "Is it?", 0)).unwrap();
        s.submit(verb("2", "de", "Ist es?", 1)).unwrap();
        s.submit(flag("3", "odd", 2)).unwrap();
        let (out, report) = s.export_merged();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].verbalizations["de"], "Ist es?");
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.flagged[0].comment, "odd");
        assert_eq!(s.export_qald().unwrap(), s.export_qald().unwrap());
    }

    #[test]
    fn replay_restores_every_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.ndjson");
        let records = [
            verb("1", "en", "Is it?", 0),
            flag("2", "odd", 1),
            verb("3", "en", "Is that so?", 2),
            verb("1", "en", "Is it really?", 3),
            verb("3", "pt", "É mesmo?", 4),
        ];
        let mut live = AnnotationStore::open("x", entries(4), &DEFAULT_LANGUAGES, &path).unwrap();
        for (k, r) in records.iter().enumerate() {
            live.submit(r.clone()).unwrap();
            let reopened = AnnotationStore::open("x", entries(4), &DEFAULT_LANGUAGES, &path).unwrap();
            assert_eq!(reopened.progress(), live.progress(), "after {} records", k + 1);
            assert_eq!(reopened.export_qald().unwrap(), live.export_qald().unwrap());
        }
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.ndjson");
        let good = serde_json::to_string(&verb("1", "en", "Is it?", 0)).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"query_id\": \"2\", \"annot")).unwrap();
        let mut s = AnnotationStore::open("x", entries(2), &DEFAULT_LANGUAGES, &path).unwrap();
        assert_eq!(s.log().len(), 1);
        s.submit(verb("2", "en", "And this?", 1)).unwrap();
        let again = AnnotationStore::open("x", entries(2), &DEFAULT_LANGUAGES, &path).unwrap();
        assert_eq!(again.log().len(), 2);

        std::fs::write(&path, format!("not json\n{good}\n")).unwrap();
        assert!(matches!(
            AnnotationStore::open("x", entries(2), &DEFAULT_LANGUAGES, &path),
            Err(StoreError::CorruptLog { line: 1, .. })
        ));
    }
}
