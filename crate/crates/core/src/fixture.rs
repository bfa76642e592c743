//! Bundled knowledge graphs: a seeded synthetic toy graph in both graph
//! models, and small hand-built graphs around the Grand Prix and Uruguayan
//! league examples.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{build_graph, ntriples, GraphModel, KnowledgeGraph, Literal, Provenance, SchemaConfig, Term, Triple};
use crate::query::{QueryGraph, QueryRelation, QueryTerm, QueryType, SemanticQuery};
use crate::sparql;
use crate::translator::MappingTable;
use crate::vocab::*;

fn iri(s: impl Into<String>) -> Term {
    Term::iri(s)
}

fn t(s: &str, p: &str, o: Term) -> Triple {
    Triple::new(iri(s), p, o)
}

fn en(s: &str) -> Term {
    Term::literal(Literal::lang(s, "en"))
}

fn int(y: i64) -> Term {
    Term::literal(Literal::integer(y))
}

fn date(s: &str) -> Term {
    Term::literal(Literal::typed(s, XSD_DATE))
}

pub fn schema_for(model: GraphModel) -> SchemaConfig {
    match model {
        GraphModel::Reified => SchemaConfig::eventkg(),
        GraphModel::Direct => SchemaConfig::dbpedia(),
    }
}

fn graph(triples: Vec<Triple>, model: GraphModel) -> KnowledgeGraph {
    build_graph(triples, &schema_for(model)).expect("bundled fixture is well formed")
}

// ------------------------------------------------------------ Grand Prix

pub const GP2002: &str = "http://dbpedia.org/resource/2002_German_Grand_Prix";
pub const GP2001: &str = "http://dbpedia.org/resource/2001_German_Grand_Prix";
pub const GP2000: &str = "http://dbpedia.org/resource/2000_German_Grand_Prix";
pub const FERRARI: &str = "http://dbpedia.org/resource/Scuderia_Ferrari";
pub const WILLIAMS: &str = "http://dbpedia.org/resource/Williams_Grand_Prix_Engineering";
pub const MCLAREN: &str = "http://dbpedia.org/resource/McLaren";

/// Direct-model graph around the 2002 German Grand Prix. Its neighbour
/// races share teams: 2001 had Ferrari but not Williams, 2000 had both.
pub fn grand_prix_triples() -> Vec<Triple> {
    let fdt = format!("{DBO}fastestDriverTeam");
    let second = format!("{DBO}secondTeam");
    let sports = format!("{DBO}SportsEvent");
    let r = |local: &str| format!("{DBR}{local}");
    vec![
        t(GP2002, RDF_TYPE, iri(DBO_EVENT)),
        t(GP2002, RDF_TYPE, iri(&sports)),
        t(GP2002, RDFS_LABEL, en("2002 German Grand Prix")),
        t(GP2002, &fdt, iri(FERRARI)),
        t(GP2002, &second, iri(WILLIAMS)),
        t(GP2002, DBP_YEAR, int(2002)),
        t(GP2002, &format!("{DBO}poleDriver"), iri(r("Michael_Schumacher"))),
        t(GP2002, &format!("{DBO}location"), iri(r("Hockenheimring"))),
        t(GP2001, RDF_TYPE, iri(DBO_EVENT)),
        t(GP2001, RDFS_LABEL, en("2001 German Grand Prix")),
        t(GP2001, &fdt, iri(FERRARI)),
        t(GP2001, &second, iri(MCLAREN)),
        t(GP2001, DBP_YEAR, int(2001)),
        t(GP2001, &format!("{DBO}location"), iri(r("Hockenheimring"))),
        t(GP2000, RDF_TYPE, iri(DBO_EVENT)),
        t(GP2000, RDFS_LABEL, en("2000 German Grand Prix")),
        t(GP2000, &fdt, iri(FERRARI)),
        t(GP2000, &second, iri(WILLIAMS)),
        t(GP2000, DBP_YEAR, int(2000)),
        t(GP2001, &format!("{DBO}nextEvent"), iri(GP2002)),
        t(FERRARI, RDFS_LABEL, en("Scuderia Ferrari")),
        t(FERRARI, &format!("{DBO}location"), iri(r("Maranello"))),
        t(WILLIAMS, RDFS_LABEL, en("Williams Grand Prix Engineering")),
        t(WILLIAMS, &format!("{DBO}location"), iri(r("Grove,_Oxfordshire"))),
        t(MCLAREN, RDFS_LABEL, en("McLaren")),
        t(&r("Michael_Schumacher"), &format!("{DBO}birthDate"), date("1969-01-03")),
        t(&r("Hockenheimring"), &format!("{DBO}country"), iri(r("Germany"))),
    ]
}

pub fn grand_prix_graph() -> KnowledgeGraph {
    graph(grand_prix_triples(), GraphModel::Direct)
}

// ------------------------------------------------------- Uruguayan league

pub const LEAGUE_1973: &str = "http://eventKG.l3s.uni-hannover.de/resource/event_1973_primera";
pub const LEAGUE_1974: &str = "http://eventKG.l3s.uni-hannover.de/resource/event_1974_primera";
pub const PENAROL: &str = "http://eventKG.l3s.uni-hannover.de/resource/entity_penarol";
pub const URUGUAY: &str = "http://eventKG.l3s.uni-hannover.de/resource/entity_uruguay";
pub const NACIONAL: &str = "http://eventKG.l3s.uni-hannover.de/resource/entity_nacional";
pub const R01: &str = "http://eventKG.l3s.uni-hannover.de/resource/eventKG-r-01";
pub const R02: &str = "http://eventKG.l3s.uni-hannover.de/resource/eventKG-r-02";

/// Reified-model graph with two league seasons: 1973 won by Peñarol,
/// 1974 won by Nacional, both in Uruguay.
pub fn league_triples() -> Vec<Triple> {
    let r03 = format!("{EVENTKG_R}eventKG-r-03");
    let r04 = format!("{EVENTKG_R}eventKG-r-04");
    let winner = format!("{DBO}soccerLeagueWinner");
    let country = format!("{DBO}country");
    let mut out = vec![
        t(LEAGUE_1973, RDF_TYPE, iri(SEM_EVENT)),
        t(LEAGUE_1973, RDFS_LABEL, en("1973 Uruguayan Primera División")),
        t(LEAGUE_1973, OWL_SAME_AS, iri(format!("{DBR}1973_Uruguayan_Primera_División"))),
        t(LEAGUE_1974, RDF_TYPE, iri(SEM_EVENT)),
        t(LEAGUE_1974, RDFS_LABEL, en("1974 Uruguayan Primera División")),
        t(LEAGUE_1974, OWL_SAME_AS, iri(format!("{DBR}1974_Uruguayan_Primera_División"))),
        t(PENAROL, RDF_TYPE, iri(SEM_CORE)),
        t(PENAROL, RDFS_LABEL, en("Peñarol")),
        t(PENAROL, OWL_SAME_AS, iri(format!("{DBR}Peñarol"))),
        t(URUGUAY, RDFS_LABEL, en("Uruguay")),
        t(URUGUAY, OWL_SAME_AS, iri(format!("{DBR}Uruguay"))),
        t(NACIONAL, RDFS_LABEL, en("Club Nacional de Football")),
        t(NACIONAL, OWL_SAME_AS, iri(format!("{DBR}Club_Nacional_de_Football"))),
    ];
    let statements = [
        (R01, LEAGUE_1973, &winner, PENAROL, "1973"),
        (R02, LEAGUE_1973, &country, URUGUAY, "1973"),
        (&r03, LEAGUE_1974, &winner, NACIONAL, "1974"),
        (&r04, LEAGUE_1974, &country, URUGUAY, "1974"),
    ];
    for (st, s, p, o, year) in statements {
        out.push(t(st, RDF_TYPE, iri(EVENTKG_RELATION)));
        out.push(t(st, RDF_SUBJECT, iri(s)));
        out.push(t(st, RDF_OBJECT, iri(o)));
        out.push(t(st, SEM_ROLE_TYPE, iri(p.as_str())));
        out.push(t(st, SEM_BEGIN, Term::literal(Literal::typed(format!("{year}-01-01"), XSD_DATE))));
        out.push(t(st, SEM_END, Term::literal(Literal::typed(format!("{year}-12-31"), XSD_DATE))));
    }
    out
}

pub fn league_graph() -> KnowledgeGraph {
    graph(league_triples(), GraphModel::Reified)
}

/// Direct-model copy of [`league_graph`] under the DBpedia names, with the
/// 1973 season typed and dated. Every league fact is present.
pub fn league_mirror() -> KnowledgeGraph {
    let src = league_graph();
    let m = MappingTable::from_graph(&src);
    let mut out = Vec::new();
    for r in src.relations() {
        let (Ok(s), Some(o)) = (m.resolve(r.subject.as_str()), r.object.as_node()) else { continue };
        let Ok(o) = m.resolve(o.as_str()) else { continue };
        out.push(Triple::iris(&s, &r.predicate, &o));
    }
    let ev = m.resolve(LEAGUE_1973).expect("linked season");
    out.push(Triple::iris(&ev, RDF_TYPE, DBO_EVENT));
    out.push(Triple::new(Term::iri(&ev), DBP_YEAR, int(1973)));
    graph(out, GraphModel::Direct)
}

/// Grand Prix count with a year filter, in the direct model.
pub const GRAND_PRIX_QUERY: &str = "SELECT (COUNT(DISTINCT(?event)) AS ?count) WHERE {
  ?event rdf:type dbo:Event .

  ?event dbo:fastestDriverTeam dbr:Scuderia_Ferrari .
  ?event dbo:secondTeam dbr:Williams_Grand_Prix_Engineering .

  ?event dbp:year ?year .
  FILTER ( ?year > \"2001\"^^xsd:integer)
}
";

/// League seasons won by Peñarol in Uruguay, in the reified model.
pub const LEAGUE_QUERY: &str = "SELECT DISTINCT ?event WHERE {
  ?relation1 rdf:object ?entity1 .
  ?relation1 rdf:subject ?event .
  ?relation1 sem:roleType dbo:soccerLeagueWinner .

  ?relation2 rdf:object ?entity2 .
  ?relation2 rdf:subject ?event .
  ?relation2 sem:roleType dbo:country .

  ?entity1 owl:sameAs dbr:Peñarol .
  ?entity2 owl:sameAs dbr:Uruguay .
}
";

/// Ten reified queries over [`league_graph`]. The three whose id starts with
/// `gap-` cannot reach [`league_mirror`]: an unlinked entity, a Wikidata
/// role type and a fact the mirror lacks.
pub fn translation_cases() -> Vec<(String, SemanticQuery)> {
    let ask = |s: &str, p: &str, o: &str| {
        let r = QueryRelation::new(QueryTerm::Node(s.into()), p, QueryTerm::Node(o.into()), Provenance::Reified);
        let bridged = [s, o].into_iter().filter(|x| x.starts_with(DBR)).map(str::to_string).collect();
        let g = QueryGraph::new(vec![r], vec![], bridged).expect("single relation");
        SemanticQuery::new(g, QueryType::Ask, None, GraphModel::Reified).expect("valid query")
    };
    let country = format!("{DBO}country");
    let winner = format!("{DBO}soccerLeagueWinner");
    let uru = format!("{DBR}Uruguay");
    let l73 = format!("{DBR}1973_Uruguayan_Primera_División");
    let league = sparql::parse(LEAGUE_QUERY, GraphModel::Reified).expect("bundled query parses");
    let mut qs: Vec<(String, SemanticQuery)> = (0..4).map(|i| (format!("ok-league-{i}"), league.clone())).collect();
    qs.push(("ok-country".into(), ask(&l73, &country, &uru)));
    qs.push(("ok-winner".into(), ask(&l73, &winner, &format!("{DBR}Peñarol"))));
    qs.push(("ok-raw".into(), ask(LEAGUE_1973, &country, URUGUAY)));
    qs.push(("gap-entity".into(), ask(&format!("{EVENTKG_R}entity_nowhere"), &country, &uru)));
    qs.push(("gap-role".into(), ask(&l73, &format!("{WDT}P17"), &uru)));
    qs.push(("gap-target".into(), ask(&l73, &format!("{DBO}location"), &uru)));
    qs
}

// ------------------------------------------------------------- toy graph

pub const TOY_SEED: u64 = 20_200_101;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Country,
    City,
    Club,
    Team,
    Person,
    League,
    GrandPrix,
    War,
    Battle,
    Election,
    Festival,
}

impl Category {
    fn is_event(self) -> bool {
        matches!(
            self,
            Category::League | Category::GrandPrix | Category::War | Category::Battle | Category::Election | Category::Festival
        )
    }

    fn dbpedia_class(self) -> &'static str {
        match self {
            Category::League | Category::GrandPrix => "SportsEvent",
            Category::War | Category::Battle => "MilitaryConflict",
            Category::Election => "Election",
            Category::Festival => "MusicFestival",
            _ => unreachable!("entities carry no event class"),
        }
    }
}

#[derive(Debug, Clone)]
struct Item {
    label: String,
    category: Category,
    /// Has an identity link to the direct-model graph.
    mapped: bool,
    /// (begin, end, year-granular)
    time: Option<(NaiveDate, NaiveDate, bool)>,
    time_in_target: bool,
}

#[derive(Debug, Clone)]
struct Fact {
    s: usize,
    p: &'static str,
    o: usize,
    reified: bool,
    /// Role type outside the DBpedia namespaces in the reified graph.
    foreign_role: Option<&'static str>,
    in_target: bool,
    validity: Option<(NaiveDate, NaiveDate)>,
}

/// The synthetic toy graph: one fact base written as an EventKG-style
/// reified dump and as a DBpedia-style direct dump, plus the identity links
/// between them.
#[derive(Debug, Clone)]
pub struct ToyKg {
    pub reified: Vec<Triple>,
    pub direct: Vec<Triple>,
    pub same_as: Vec<Triple>,
}

#[derive(Debug, Clone)]
pub struct ToyPaths {
    pub reified: PathBuf,
    pub direct: PathBuf,
    pub same_as: PathBuf,
}

pub const TOY_REIFIED_FILE: &str = "toy-eventkg.nt";
pub const TOY_DIRECT_FILE: &str = "toy-dbpedia.nt";
pub const TOY_SAME_AS_FILE: &str = "toy-sameas.nt";

impl ToyKg {
    pub fn triples(&self, model: GraphModel) -> &[Triple] {
        match model {
            GraphModel::Reified => &self.reified,
            GraphModel::Direct => &self.direct,
        }
    }

    pub fn graph(&self, model: GraphModel) -> KnowledgeGraph {
        graph(self.triples(model).to_vec(), model)
    }

    pub fn write(&self, dir: &Path) -> io::Result<ToyPaths> {
        std::fs::create_dir_all(dir)?;
        let paths = ToyPaths {
            reified: dir.join(TOY_REIFIED_FILE),
            direct: dir.join(TOY_DIRECT_FILE),
            same_as: dir.join(TOY_SAME_AS_FILE),
        };
        for (path, triples) in [(&paths.reified, &self.reified), (&paths.direct, &self.direct), (&paths.same_as, &self.same_as)] {
            let mut f = io::BufWriter::new(std::fs::File::create(path)?);
            ntriples::write(&mut f, triples)?;
        }
        Ok(paths)
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "ten", "vo", "zu", "an", "bel", "cor", "dan", "el", "fi", "gar", "hol", "is",
    "jun", "kor", "lin", "mar", "nor", "os", "pel", "quin", "ros", "sal", "tor", "ur", "val", "wen", "ñe", "dö",
];

fn name(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let n = rng.random_range(2..=3);
        let mut s: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        let mut chars = s.chars();
        let first = chars.next().expect("non-empty").to_uppercase().collect::<String>();
        s = first + chars.as_str();
        if used.insert(s.clone()) {
            return s;
        }
    }
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

fn fmt_date(d: NaiveDate) -> String {
    format!("{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
}

struct Builder {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
    items: Vec<Item>,
    facts: Vec<Fact>,
}

impl Builder {
    fn add(&mut self, label: String, category: Category, time: Option<(NaiveDate, NaiveDate, bool)>) -> usize {
        let mapped = self.rng.random_bool(if category.is_event() { 0.96 } else { 0.94 });
        let time_in_target = self.rng.random_bool(0.9);
        self.items.push(Item { label, category, mapped, time, time_in_target });
        self.items.len() - 1
    }

    fn fact(&mut self, s: usize, p: &'static str, o: usize) {
        let reified = !matches!(p, "nextEvent" | "previousEvent");
        let foreign_role = if reified && self.rng.random_bool(0.04) {
            Some(match p {
                "country" => "P17",
                "place" | "location" => "P276",
                _ => "P1344",
            })
        } else {
            None
        };
        let in_target = self.rng.random_bool(0.97);
        let validity = match self.items[s].time {
            Some((b, e, _)) if reified && self.rng.random_bool(0.3) => Some((b, e)),
            _ => None,
        };
        self.facts.push(Fact { s, p, o, reified, foreign_role, in_target, validity });
    }

    fn year_span(&mut self, lo: i32, hi: i32) -> (NaiveDate, NaiveDate, bool) {
        let y = self.rng.random_range(lo..=hi);
        (ymd(y, 1, 1), ymd(y, 12, 31), true)
    }

    fn day_span(&mut self, lo: i32, hi: i32, max_days: i64) -> (NaiveDate, NaiveDate, bool) {
        let y = self.rng.random_range(lo..=hi);
        let start = ymd(y, self.rng.random_range(1..=12), self.rng.random_range(1..=28));
        let end = start + chrono::Duration::days(self.rng.random_range(0..=max_days));
        (start, end, false)
    }

    fn pick(&mut self, pool: &[usize]) -> usize {
        *pool.choose(&mut self.rng).expect("non-empty pool")
    }
}

/// Builds the toy graph with about `events` events from `seed`.
pub fn toy_with(seed: u64, events: usize) -> ToyKg {
    let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(seed), used: BTreeSet::new(), items: Vec::new(), facts: Vec::new() };
    let scale = |share: f64| ((events as f64 * share).round() as usize).max(1);

    let countries: Vec<usize> = (0..24)
        .map(|_| {
            let n = name(&mut b.rng, &mut b.used);
            b.add(n, Category::Country, None)
        })
        .collect();
    let mut cities = Vec::new();
    for _ in 0..120 {
        let n = name(&mut b.rng, &mut b.used);
        let c = b.add(n, Category::City, None);
        let country = b.pick(&countries);
        b.fact(c, "country", country);
        cities.push(c);
    }
    let mut clubs = Vec::new();
    for i in 0..90 {
        let n = name(&mut b.rng, &mut b.used);
        let label = if i % 2 == 0 { format!("FC {n}") } else { format!("{n} United") };
        let c = b.add(label, Category::Club, None);
        let ground = b.pick(&cities);
        b.fact(c, "ground", ground);
        clubs.push(c);
    }
    let mut teams = Vec::new();
    for _ in 0..20 {
        let n = name(&mut b.rng, &mut b.used);
        let c = b.add(format!("{n} Racing"), Category::Team, None);
        let country = b.pick(&countries);
        b.fact(c, "country", country);
        teams.push(c);
    }
    let mut persons = Vec::new();
    for _ in 0..220 {
        let first = name(&mut b.rng, &mut b.used);
        let last = name(&mut b.rng, &mut b.used);
        let born = b.day_span(1850, 1990, 0);
        let c = b.add(format!("{first} {last}"), Category::Person, Some(born));
        let place = b.pick(&cities);
        b.fact(c, "birthPlace", place);
        let nat = b.pick(&countries);
        b.fact(c, "nationality", nat);
        persons.push(c);
    }

    let mut series: Vec<(usize, Vec<(i32, usize)>)> = Vec::new();
    let record = |series: &mut Vec<(usize, Vec<(i32, usize)>)>, key: usize, year: i32, ev: usize| {
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push((year, ev)),
            None => series.push((key, vec![(year, ev)])),
        }
    };

    let mut used_labels = BTreeSet::new();
    let mut unique = |label: String| -> Option<String> { used_labels.insert(label.clone()).then_some(label) };

    let mut made = 0;
    while made < scale(0.30) {
        let country = b.pick(&countries);
        let span = b.year_span(1900, 2019);
        let y = span.0.year();
        let Some(label) = unique(format!("{y} {} Football League", b.items[country].label)) else { continue };
        let ev = b.add(label, Category::League, Some(span));
        b.fact(ev, "country", country);
        let w = b.pick(&clubs);
        b.fact(ev, "soccerLeagueWinner", w);
        record(&mut series, country, y, ev);
        made += 1;
    }
    made = 0;
    while made < scale(0.24) {
        let country = b.pick(&countries);
        let span = b.year_span(1950, 2019);
        let y = span.0.year();
        let Some(label) = unique(format!("{y} {} Grand Prix", b.items[country].label)) else { continue };
        let ev = b.add(label, Category::GrandPrix, Some(span));
        b.fact(ev, "country", country);
        let loc = b.pick(&cities);
        b.fact(ev, "location", loc);
        let t1 = b.pick(&teams);
        b.fact(ev, "fastestDriverTeam", t1);
        let t2 = b.pick(&teams);
        if t2 != t1 {
            b.fact(ev, "secondTeam", t2);
        }
        let d = b.pick(&persons);
        b.fact(ev, "firstDriver", d);
        let p = b.pick(&persons);
        b.fact(ev, "poleDriver", p);
        record(&mut series, 10_000 + country, y, ev);
        made += 1;
    }
    let mut wars = Vec::new();
    for _ in 0..scale(0.04) {
        let n = name(&mut b.rng, &mut b.used);
        let span = b.day_span(1800, 1990, 2000);
        let ev = b.add(format!("{n} War"), Category::War, Some(span));
        for _ in 0..2 {
            let c = b.pick(&persons);
            b.fact(ev, "commander", c);
        }
        let place = b.pick(&countries);
        b.fact(ev, "place", place);
        wars.push(ev);
    }
    made = 0;
    while made < scale(0.22) {
        let city = b.pick(&cities);
        let war = b.pick(&wars);
        let Some(label) = unique(format!("Battle of {}", b.items[city].label)) else { continue };
        let (ws, we, _) = b.items[war].time.expect("wars are dated");
        let days = (we - ws).num_days().max(1);
        let start = ws + chrono::Duration::days(b.rng.random_range(0..days));
        let end = (start + chrono::Duration::days(b.rng.random_range(0..10))).min(we);
        let ev = b.add(label, Category::Battle, Some((start, end, false)));
        b.fact(ev, "place", city);
        let c = b.pick(&persons);
        b.fact(ev, "commander", c);
        if b.rng.random_bool(0.4) {
            let c2 = b.pick(&persons);
            b.fact(ev, "commander", c2);
        }
        b.fact(ev, "isPartOfMilitaryConflict", war);
        made += 1;
    }
    made = 0;
    while made < scale(0.12) {
        let country = b.pick(&countries);
        let span = b.year_span(1900, 2019);
        let y = span.0.year();
        let Some(label) = unique(format!("{y} {} general election", b.items[country].label)) else { continue };
        let ev = b.add(label, Category::Election, Some(span));
        b.fact(ev, "country", country);
        let leader = b.pick(&persons);
        b.fact(ev, "leader", leader);
        record(&mut series, 20_000 + country, y, ev);
        made += 1;
    }
    made = 0;
    while made < scale(0.08) {
        let n = name(&mut b.rng, &mut b.used);
        let Some(label) = unique(format!("{n} music festival")) else { continue };
        let span = b.day_span(1960, 2019, 6);
        let ev = b.add(label, Category::Festival, Some(span));
        let city = b.pick(&cities);
        b.fact(ev, "location", city);
        let country = b.pick(&countries);
        b.fact(ev, "country", country);
        made += 1;
    }
    for (_, mut evs) in series {
        evs.sort();
        for w in evs.windows(2) {
            b.fact(w[0].1, "nextEvent", w[1].1);
            b.fact(w[1].1, "previousEvent", w[0].1);
        }
    }

    render(&b.items, &b.facts)
}

pub fn toy() -> ToyKg {
    toy_with(TOY_SEED, 500)
}

fn render(items: &[Item], facts: &[Fact]) -> ToyKg {
    let ekg = |i: usize| {
        if items[i].category.is_event() {
            format!("{EVENTKG_R}event_{i}")
        } else {
            format!("{EVENTKG_R}entity_{i}")
        }
    };
    let dbr = |i: usize| format!("{DBR}{}", items[i].label.replace(' ', "_"));
    let mut reified = Vec::new();
    let mut direct = Vec::new();
    let mut same_as = Vec::new();

    for (i, item) in items.iter().enumerate() {
        let s = ekg(i);
        let is_event = item.category.is_event();
        reified.push(t(&s, RDF_TYPE, iri(if is_event { SEM_EVENT } else { SEM_CORE })));
        reified.push(t(&s, RDFS_LABEL, en(&item.label)));
        if let Some((begin, end, _)) = item.time {
            reified.push(t(&s, SEM_BEGIN, date(&fmt_date(begin))));
            if is_event {
                reified.push(t(&s, SEM_END, date(&fmt_date(end))));
            }
        }
        if !item.mapped {
            continue;
        }
        let link = t(&s, OWL_SAME_AS, iri(dbr(i)));
        reified.push(link.clone());
        same_as.push(link);

        let d = dbr(i);
        if is_event {
            direct.push(t(&d, RDF_TYPE, iri(format!("{DBO}{}", item.category.dbpedia_class()))));
        }
        direct.push(t(&d, RDFS_LABEL, en(&item.label)));
        match item.time {
            Some((begin, _, _)) if !is_event => {
                direct.push(t(&d, &format!("{DBO}birthDate"), date(&fmt_date(begin))));
            }
            Some((begin, end, year_based)) if item.time_in_target => {
                if year_based {
                    direct.push(t(&d, DBP_YEAR, int(begin.year() as i64)));
                } else if begin == end {
                    direct.push(t(&d, DBO_DATE, date(&fmt_date(begin))));
                } else {
                    direct.push(t(&d, DBO_START_DATE, date(&fmt_date(begin))));
                    direct.push(t(&d, DBO_END_DATE, date(&fmt_date(end))));
                }
            }
            _ => {}
        }
    }

    for (k, f) in facts.iter().enumerate() {
        let p = format!("{DBO}{}", f.p);
        if f.reified {
            let st = format!("{EVENTKG_R}relation_{k}");
            let role = match f.foreign_role {
                Some(pid) => format!("{WDT}{pid}"),
                None => p.clone(),
            };
            reified.push(t(&st, RDF_TYPE, iri(EVENTKG_RELATION)));
            reified.push(t(&st, RDF_SUBJECT, iri(ekg(f.s))));
            reified.push(t(&st, RDF_OBJECT, iri(ekg(f.o))));
            reified.push(t(&st, SEM_ROLE_TYPE, iri(role)));
            if let Some((b, e)) = f.validity {
                reified.push(t(&st, SEM_BEGIN, date(&fmt_date(b))));
                reified.push(t(&st, SEM_END, date(&fmt_date(e))));
            }
        } else {
            reified.push(t(&ekg(f.s), &p, iri(ekg(f.o))));
        }
        if f.in_target && items[f.s].mapped && items[f.o].mapped {
            direct.push(t(&dbr(f.s), &p, iri(dbr(f.o))));
        }
    }
    ToyKg { reified, direct, same_as }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::NodeId;

    #[test]
    fn toy_is_deterministic_and_sized() {
        let a = toy();
        let b = toy();
        assert_eq!(a.reified, b.reified);
        assert_eq!(a.direct, b.direct);
        let kg = a.graph(GraphModel::Reified);
        assert!((450..=550).contains(&kg.events().len()), "{}", kg.events().len());
        assert!((4000..=7000).contains(&kg.relations().len()), "{}", kg.relations().len());
        let direct = a.graph(GraphModel::Direct);
        assert!(direct.events().len() > 400);
        assert!(direct.relations().len() > 3000);
    }

    #[test]
    fn toy_adjacency_matches_rescan() {
        let kg = toy().graph(GraphModel::Reified);
        for (i, (node, _)) in kg.nodes().enumerate() {
            let expected: Vec<usize> =
                (0..kg.relations().len()).filter(|&r| kg.relation_at(r).touches(node)).collect();
            assert_eq!(kg.adjacency_at(i), expected.as_slice());
        }
        assert_eq!(kg.events().len() + kg.entities().len(), kg.node_count());
    }

    #[test]
    fn hand_built_graphs() {
        let gp = grand_prix_graph();
        assert!(gp.is_event(&NodeId::new(GP2002)));
        assert!(!gp.is_event(&NodeId::new(FERRARI)));
        let league = league_graph();
        assert_eq!(league.events().len(), 2);
        let r = league.relation(R01).unwrap();
        assert_eq!(r.subject.as_str(), LEAGUE_1973);
        assert_eq!(r.predicate, format!("{DBO}soccerLeagueWinner"));
    }
}
