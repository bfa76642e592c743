//! Namespace IRIs and the prefix table used when rendering SPARQL text.

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const SEM: &str = "http://semanticweb.cs.vu.nl/2009/11/sem/";
pub const DBO: &str = "http://dbpedia.org/ontology/";
pub const DBP: &str = "http://dbpedia.org/property/";
pub const DBR: &str = "http://dbpedia.org/resource/";
pub const EVENTKG_S: &str = "http://eventKG.l3s.uni-hannover.de/schema/";
pub const EVENTKG_R: &str = "http://eventKG.l3s.uni-hannover.de/resource/";
pub const WDT: &str = "http://www.wikidata.org/prop/direct/";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_SUBJECT: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#subject";
pub const RDF_OBJECT: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#object";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const OWL_SAME_AS: &str = "http://www.w3.org/2002/07/owl#sameAs";
pub const SEM_EVENT: &str = "http://semanticweb.cs.vu.nl/2009/11/sem/Event";
pub const SEM_ROLE_TYPE: &str = "http://semanticweb.cs.vu.nl/2009/11/sem/roleType";
pub const SEM_BEGIN: &str = "http://semanticweb.cs.vu.nl/2009/11/sem/hasBeginTimeStamp";
pub const SEM_END: &str = "http://semanticweb.cs.vu.nl/2009/11/sem/hasEndTimeStamp";
pub const DBO_EVENT: &str = "http://dbpedia.org/ontology/Event";
pub const DBP_YEAR: &str = "http://dbpedia.org/property/year";
pub const DBO_DATE: &str = "http://dbpedia.org/ontology/date";
pub const DBO_START_DATE: &str = "http://dbpedia.org/ontology/startDate";
pub const DBO_END_DATE: &str = "http://dbpedia.org/ontology/endDate";
pub const SEM_CORE: &str = "http://semanticweb.cs.vu.nl/2009/11/sem/Core";
pub const EVENTKG_RELATION: &str = "http://eventKG.l3s.uni-hannover.de/schema/Relation";

pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DATE: &str = "http://www.w3.org/2001/XMLSchema#date";
pub const XSD_GYEAR: &str = "http://www.w3.org/2001/XMLSchema#gYear";
pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";

/// Prefixes recognised by the SPARQL writer and reader.
pub const PREFIXES: &[(&str, &str)] = &[
    ("rdf", RDF),
    ("rdfs", RDFS),
    ("owl", OWL),
    ("xsd", XSD),
    ("sem", SEM),
    ("dbo", DBO),
    ("dbp", DBP),
    ("dbr", DBR),
    ("eventKG-s", EVENTKG_S),
    ("eventKG-r", EVENTKG_R),
    ("wdt", WDT),
];

pub fn namespace_for(prefix: &str) -> Option<&'static str> {
    PREFIXES.iter().find(|(p, _)| *p == prefix).map(|(_, ns)| *ns)
}

/// Expands `prefix:local` with the prefix table. Anything else, including
/// `<iri>`, comes back as a bare IRI.
pub fn expand(name: &str) -> String {
    if let Some(iri) = name.strip_prefix('<').and_then(|n| n.strip_suffix('>')) {
        return iri.to_string();
    }
    match name.split_once(':').and_then(|(p, l)| namespace_for(p).map(|ns| format!("{ns}{l}"))) {
        Some(iri) => iri,
        None => name.to_string(),
    }
}

/// Text after the last `/` or `#` of an IRI.
pub fn local_name(iri: &str) -> &str {
    iri.rsplit(['/', '#']).next().unwrap_or(iri)
}

/// Abbreviates `iri` with the prefix table when the remainder is a valid
/// local name; otherwise wraps it in angle brackets.
pub fn abbreviate(iri: &str) -> String {
    let best = PREFIXES
        .iter()
        .filter(|(_, ns)| iri.starts_with(ns))
        .max_by_key(|(_, ns)| ns.len());
    if let Some((prefix, ns)) = best {
        let local = &iri[ns.len()..];
        if is_local_name(local) {
            return format!("{prefix}:{local}");
        }
    }
    format!("<{iri}>")
}

fn is_local_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphanumeric() || c == '_' => {}
        _ => return false,
    }
    s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abbreviates_known_namespaces() {
        assert_eq!(abbreviate(RDF_TYPE), "rdf:type");
        assert_eq!(abbreviate("http://dbpedia.org/resource/Peñarol"), "dbr:Peñarol");
        assert_eq!(
            abbreviate("http://dbpedia.org/resource/2002_German_Grand_Prix"),
            "dbr:2002_German_Grand_Prix"
        );
        assert_eq!(
            abbreviate("http://dbpedia.org/resource/Foo_(band)"),
            "<http://dbpedia.org/resource/Foo_(band)>"
        );
        assert_eq!(abbreviate("http://example.org/x"), "<http://example.org/x>");
        assert_eq!(abbreviate(DBO), "<http://dbpedia.org/ontology/>");
    }

    #[test]
    fn local_names() {
        assert_eq!(local_name(DBP_YEAR), "year");
        assert_eq!(local_name(RDF_TYPE), "type");
    }
}
