use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::vocab;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read schema file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid schema file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid schema: {0}")]
    Invalid(String),
}

/// A `(predicate, value)` pair whose presence marks a node as an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeMarker {
    pub predicate: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReificationPredicates {
    pub subject: String,
    pub object: String,
    pub role: String,
}

/// Tells the graph builder how to read a dump: which triples mark events,
/// how statements are reified, where time stamps, labels and identity links
/// live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaConfig {
    pub event_types: Vec<TypeMarker>,
    pub reify: Option<ReificationPredicates>,
    pub time_begin: Vec<String>,
    pub time_end: Vec<String>,
    pub labels: Vec<String>,
    pub same_as: String,
}

impl SchemaConfig {
    /// EventKG conventions: `sem:Event` typing, statements reified with
    /// `rdf:subject` / `rdf:object` / `sem:roleType`.
    pub fn eventkg() -> Self {
        SchemaConfig {
            event_types: vec![TypeMarker {
                predicate: vocab::RDF_TYPE.into(),
                value: vocab::SEM_EVENT.into(),
            }],
            reify: Some(ReificationPredicates {
                subject: vocab::RDF_SUBJECT.into(),
                object: vocab::RDF_OBJECT.into(),
                role: vocab::SEM_ROLE_TYPE.into(),
            }),
            time_begin: vec![vocab::SEM_BEGIN.into()],
            time_end: vec![vocab::SEM_END.into()],
            labels: vec![vocab::RDFS_LABEL.into()],
            same_as: vocab::OWL_SAME_AS.into(),
        }
    }

    /// DBpedia conventions: direct triples, `dbo:Event` typing.
    pub fn dbpedia() -> Self {
        let event_classes = [
            "Event",
            "SportsEvent",
            "MilitaryConflict",
            "Election",
            "FootballMatch",
            "GrandPrix",
            "MusicFestival",
            "SoccerTournament",
            "SocietalEvent",
        ];
        SchemaConfig {
            event_types: event_classes
                .iter()
                .map(|c| TypeMarker {
                    predicate: vocab::RDF_TYPE.into(),
                    value: format!("{}{c}", vocab::DBO),
                })
                .collect(),
            reify: None,
            time_begin: vec![vocab::DBP_YEAR.into(), vocab::DBO_DATE.into(), vocab::DBO_START_DATE.into()],
            time_end: vec![vocab::DBO_END_DATE.into()],
            labels: vec![vocab::RDFS_LABEL.into()],
            same_as: vocab::OWL_SAME_AS.into(),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "eventkg" => Some(Self::eventkg()),
            "dbpedia" => Some(Self::dbpedia()),
            _ => None,
        }
    }

    /// Resolves a preset name or loads a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self, SchemaError> {
        match Self::preset(name_or_path) {
            Some(s) => Ok(s),
            None => Self::from_toml_file(Path::new(name_or_path)),
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, SchemaError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Reads the flat key form:
    ///
    /// ```toml
    /// event_type = "rdf:type sem:Event"
    /// reify.subject = "rdf:subject"
    /// reify.object = "rdf:object"
    /// reify.role = "sem:roleType"
    /// time.begin = "sem:hasBeginTimeStamp"
    /// time.end = "sem:hasEndTimeStamp"
    /// label = "rdfs:label"
    /// same_as = "owl:sameAs"
    /// ```
    ///
    /// Every value may also be a list. Known prefixes are expanded.
    pub fn from_toml_str(text: &str) -> Result<Self, SchemaError> {
        let raw: RawSchema = toml::from_str(text)?;
        let mut event_types = Vec::new();
        for pair in raw.event_type.into_vec() {
            let mut parts = pair.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(v), None) => {
                    event_types.push(TypeMarker { predicate: expand(p), value: expand(v) })
                }
                _ => {
                    return Err(SchemaError::Invalid(format!(
                        "event_type entry {pair:?} must be \"PREDICATE VALUE\""
                    )))
                }
            }
        }
        let reify = match raw.reify {
            None => None,
            Some(r) => match (r.subject, r.object, r.role) {
                (Some(s), Some(o), Some(role)) => Some(ReificationPredicates {
                    subject: expand(&s),
                    object: expand(&o),
                    role: expand(&role),
                }),
                _ => {
                    return Err(SchemaError::Invalid(
                        "reify needs subject, object and role".into(),
                    ))
                }
            },
        };
        let time = raw.time.unwrap_or_default();
        let schema = SchemaConfig {
            event_types,
            reify,
            time_begin: time.begin.into_vec().iter().map(|s| expand(s)).collect(),
            time_end: time.end.into_vec().iter().map(|s| expand(s)).collect(),
            labels: raw.label.into_vec().iter().map(|s| expand(s)).collect(),
            same_as: expand(&raw.same_as.unwrap_or_else(|| vocab::OWL_SAME_AS.into())),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.event_types.is_empty() {
            return Err(SchemaError::Invalid("event_type must not be empty".into()));
        }
        if self.labels.is_empty() {
            return Err(SchemaError::Invalid("label must not be empty".into()));
        }
        if self.same_as.is_empty() {
            return Err(SchemaError::Invalid("same_as must not be empty".into()));
        }
        if self.is_reified() && (self.time_begin.is_empty() || self.time_end.is_empty()) {
            return Err(SchemaError::Invalid("reified schemas need time.begin and time.end".into()));
        }
        if let Some(p) = self.time_begin.iter().find(|p| self.time_end.contains(p)) {
            return Err(SchemaError::Invalid(format!("{p} is both a begin and an end predicate")));
        }
        Ok(())
    }

    pub fn is_reified(&self) -> bool {
        self.reify.is_some()
    }

    pub fn is_event_marker(&self, predicate: &str, value: &str) -> bool {
        self.event_types.iter().any(|m| m.predicate == predicate && m.value == value)
    }

    pub fn is_type_predicate(&self, predicate: &str) -> bool {
        self.event_types.iter().any(|m| m.predicate == predicate)
    }

    pub fn is_time_predicate(&self, predicate: &str) -> bool {
        self.time_begin.iter().chain(&self.time_end).any(|p| p == predicate)
    }

    pub fn is_label_predicate(&self, predicate: &str) -> bool {
        self.labels.iter().any(|p| p == predicate)
    }
}

fn expand(s: &str) -> String {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('<').and_then(|r| r.strip_suffix('>')) {
        return inner.to_string();
    }
    if let Some((prefix, local)) = s.split_once(':') {
        if !local.starts_with("//") {
            if let Some(ns) = vocab::namespace_for(prefix) {
                return format!("{ns}{local}");
            }
        }
    }
    s.to_string()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl Default for OneOrMany {
    fn default() -> Self {
        OneOrMany::Many(Vec::new())
    }
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    #[serde(default)]
    event_type: OneOrMany,
    reify: Option<RawReify>,
    time: Option<RawTime>,
    #[serde(default)]
    label: OneOrMany,
    same_as: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReify {
    subject: Option<String>,
    object: Option<String>,
    role: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTime {
    #[serde(default)]
    begin: OneOrMany,
    #[serde(default)]
    end: OneOrMany,
}
