//! Corpus parsing and persistence: RDF triple sets with reference texts,
//! ingested from WebNLG XML or the native JSON format.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Delimiter between the fields of a textual triple.
pub const TRIPLE_DELIM: &str = " | ";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed triple {line:?}: {reason}")]
    MalformedTriple { line: String, reason: String },
    #[error("duplicate triple {0:?}")]
    DuplicateTriple(String),
    #[error("xml error: {0}")]
    Xml(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Classification of an entity's raw corpus form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntityKind {
    Plain,
    QuotedLiteral,
    /// Raw value matched the ISO pattern `YYYY-MM-DD`.
    DateLiteral,
    /// Raw value matched `"NUMBER"(unit)`, e.g. `"8820.0"(minutes)`.
    UnitLiteral { value: String, unit: String },
}

/// An entity in its canonical corpus form (underscores for spaces, quotes
/// stripped). Identity, ordering and hashing are by `id` alone.
#[derive(Debug, Clone)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
}

impl PartialEq for Entity {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Entity {}
impl PartialOrd for Entity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}
impl std::hash::Hash for Entity {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    if !b
        .iter()
        .enumerate()
        .all(|(i, c)| if i == 4 || i == 7 { true } else { c.is_ascii_digit() })
    {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap();
    let day: u32 = s[8..10].parse().unwrap();
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

fn parse_unit_literal(s: &str) -> Option<(String, String)> {
    // "VALUE"(unit)
    let rest = s.strip_prefix('"')?;
    let close = rest.find('"')?;
    let (value, tail) = rest.split_at(close);
    let unit = tail
        .strip_prefix('"')?
        .strip_prefix('(')?
        .strip_suffix(')')?;
    if value.is_empty() || unit.is_empty() {
        return None;
    }
    Some((value.to_string(), unit.to_string()))
}

impl Entity {
    /// Build an entity from its raw corpus field, classifying literals.
    pub fn from_raw(raw: &str) -> Self {
        if let Some((value, unit)) = parse_unit_literal(raw) {
            return Entity {
                id: raw.to_string(),
                kind: EntityKind::UnitLiteral { value, unit },
            };
        }
        if let Some(inner) = raw
            .strip_prefix('"')
            .and_then(|r| r.strip_suffix('"'))
            .filter(|r| !r.is_empty() && !r.contains('"'))
        {
            let kind = if is_iso_date(inner) {
                EntityKind::DateLiteral
            } else {
                EntityKind::QuotedLiteral
            };
            return Entity {
                id: inner.to_string(),
                kind,
            };
        }
        if is_iso_date(raw) {
            return Entity {
                id: raw.to_string(),
                kind: EntityKind::DateLiteral,
            };
        }
        Entity {
            id: raw.to_string(),
            kind: EntityKind::Plain,
        }
    }

    /// The raw corpus form, inverse of [`Entity::from_raw`].
    pub fn raw(&self) -> String {
        match &self.kind {
            EntityKind::Plain | EntityKind::UnitLiteral { .. } => self.id.clone(),
            EntityKind::QuotedLiteral => format!("\"{}\"", self.id),
            EntityKind::DateLiteral => format!("\"{}\"", self.id),
        }
    }

    /// Surface form for realization: underscores become spaces.
    pub fn surface(&self) -> String {
        self.id.replace('_', " ")
    }

    /// The entity's tokens for fuzzy matching: the id split on underscores
    /// and whitespace; unit literals contribute their value and unit.
    pub fn tokens(&self) -> Vec<String> {
        if let EntityKind::UnitLiteral { value, unit } = &self.kind {
            return vec![value.clone(), unit.clone()];
        }
        self.id
            .split(|c: char| c == '_' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_string())
            .collect()
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// A relation label together with its deterministic token split
/// (underscores, CamelCase boundaries and digit runs, lowercased).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationType {
    pub id: String,
    pub tokens: Vec<String>,
}

fn split_camel(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut parts = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let boundary = if cur.is_empty() {
            false
        } else if c.is_ascii_digit() != chars[i - 1].is_ascii_digit() {
            // digit runs form their own tokens
            true
        } else if c.is_uppercase() {
            let prev_lower = chars[i - 1].is_lowercase();
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            prev_lower || (next_lower && chars[i - 1].is_alphabetic())
        } else {
            false
        };
        if boundary {
            parts.push(std::mem::take(&mut cur));
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts.into_iter().map(|p| p.to_lowercase()).collect()
}

impl RelationType {
    pub fn new(id: &str) -> Self {
        let mut tokens: Vec<String> = id
            .split(['_', ' '])
            .filter(|p| !p.is_empty())
            .flat_map(|p| split_camel(p))
            .collect();
        if tokens.is_empty() {
            tokens.push(id.to_lowercase());
        }
        RelationType {
            id: id.to_string(),
            tokens,
        }
    }
}

/// One RDF fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Entity,
    pub relation: RelationType,
    pub object: Entity,
}

impl Triple {
    pub fn new(subject: Entity, relation: RelationType, object: Entity) -> Result<Self, CorpusError> {
        if subject.id == object.id {
            return Err(CorpusError::MalformedTriple {
                line: format!("{} | {} | {}", subject.id, relation.id, object.id),
                reason: "subject and object are the same entity".into(),
            });
        }
        Ok(Triple {
            subject,
            relation,
            object,
        })
    }

    /// Textual form, `SUBJECT | RELATION | OBJECT`.
    pub fn to_line(&self) -> String {
        format!(
            "{}{TRIPLE_DELIM}{}{TRIPLE_DELIM}{}",
            self.subject.raw(),
            self.relation.id,
            self.object.raw()
        )
    }
}

/// Parse one `SUBJECT | RELATION | OBJECT` line.
pub fn parse_triple_line(line: &str) -> Result<Triple, CorpusError> {
    let fields: Vec<&str> = line.split(TRIPLE_DELIM).map(str::trim).collect();
    if fields.len() != 3 {
        return Err(CorpusError::MalformedTriple {
            line: line.to_string(),
            reason: format!("expected 3 fields, found {}", fields.len()),
        });
    }
    if fields.iter().any(|f| f.is_empty()) {
        return Err(CorpusError::MalformedTriple {
            line: line.to_string(),
            reason: "empty field".into(),
        });
    }
    Triple::new(
        Entity::from_raw(fields[0]),
        RelationType::new(fields[1]),
        Entity::from_raw(fields[2]),
    )
}

/// The full input fact set G.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputGraph {
    triples: Vec<Triple>,
    entities: Vec<Entity>,
    pair_unique: bool,
}

impl InputGraph {
    pub fn new(triples: Vec<Triple>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for t in &triples {
            if !seen.insert((t.subject.id.clone(), t.relation.id.clone(), t.object.id.clone())) {
                return Err(CorpusError::DuplicateTriple(t.to_line()));
            }
        }
        let mut entities: Vec<Entity> = Vec::new();
        for t in &triples {
            for e in [&t.subject, &t.object] {
                if !entities.iter().any(|x| x.id == e.id) {
                    entities.push(e.clone());
                }
            }
        }
        let mut pairs = BTreeSet::new();
        let mut pair_unique = true;
        for t in &triples {
            let mut pair = [t.subject.id.clone(), t.object.id.clone()];
            pair.sort();
            if !pairs.insert(pair) {
                pair_unique = false;
            }
        }
        Ok(InputGraph {
            triples,
            entities,
            pair_unique,
        })
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Entities in order of first occurrence.
    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    /// True iff no two triples share the same unordered entity pair.
    pub fn pair_unique(&self) -> bool {
        self.pair_unique
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entity_by_id(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// All distinct relation types in the graph.
    pub fn relations(&self) -> Vec<&RelationType> {
        let mut out: Vec<&RelationType> = Vec::new();
        for t in &self.triples {
            if !out.iter().any(|r| r.id == t.relation.id) {
                out.push(&t.relation);
            }
        }
        out
    }

    /// Membership test for a directed fact.
    pub fn contains(&self, subject: &str, relation: &str, object: &str) -> bool {
        self.triples
            .iter()
            .any(|t| t.subject.id == subject && t.relation.id == relation && t.object.id == object)
    }
}

/// One input graph paired with its reference texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub graph: InputGraph,
    pub references: Vec<String>,
    pub category: String,
    pub eid: String,
}

/// Parse a WebNLG benchmark XML document into dataset entries.
pub fn parse_webnlg_xml<R: BufRead>(reader: R) -> Result<Vec<DatasetEntry>, CorpusError> {
    let mut xml = Reader::from_reader(reader);
    xml.config_mut().trim_text(true);
    let mut entries = Vec::new();
    let mut buf = Vec::new();

    let mut eid = String::new();
    let mut category = String::new();
    let mut triples: Vec<Triple> = Vec::new();
    let mut references: Vec<String> = Vec::new();
    let mut in_mtriple = false;
    let mut in_lex = false;
    let mut text = String::new();

    loop {
        match xml.read_event_into(&mut buf) {
            Ok(Event::Start(e)) => match e.name().as_ref() {
                b"entry" => {
                    eid.clear();
                    category.clear();
                    triples.clear();
                    references.clear();
                    for attr in e.attributes().flatten() {
                        let val = attr
                            .unescape_value()
                            .map_err(|err| CorpusError::Xml(err.to_string()))?
                            .into_owned();
                        match attr.key.as_ref() {
                            b"eid" => eid = val,
                            b"category" => category = val,
                            _ => {}
                        }
                    }
                }
                b"mtriple" => {
                    in_mtriple = true;
                    text.clear();
                }
                b"lex" => {
                    in_lex = true;
                    text.clear();
                }
                _ => {}
            },
            Ok(Event::Text(t)) => {
                if in_mtriple || in_lex {
                    text.push_str(
                        &t.unescape().map_err(|err| CorpusError::Xml(err.to_string()))?,
                    );
                }
            }
            Ok(Event::End(e)) => match e.name().as_ref() {
                b"mtriple" => {
                    in_mtriple = false;
                    let triple = parse_triple_line(text.trim()).map_err(|err| match err {
                        CorpusError::MalformedTriple { line, reason } => {
                            CorpusError::MalformedTriple {
                                line,
                                reason: format!("{reason} (entry {eid})"),
                            }
                        }
                        other => other,
                    })?;
                    triples.push(triple);
                }
                b"lex" => {
                    in_lex = false;
                    let t = text.trim();
                    if !t.is_empty() {
                        references.push(t.to_string());
                    }
                }
                b"entry" => {
                    entries.push(DatasetEntry {
                        graph: InputGraph::new(std::mem::take(&mut triples))?,
                        references: std::mem::take(&mut references),
                        category: category.clone(),
                        eid: eid.clone(),
                    });
                }
                _ => {}
            },
            Ok(Event::Eof) => break,
            Err(e) => return Err(CorpusError::Xml(e.to_string())),
            _ => {}
        }
        buf.clear();
    }
    Ok(entries)
}

#[derive(Serialize, Deserialize)]
struct TripleDoc {
    s: String,
    r: String,
    o: String,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    eid: String,
    category: String,
    triples: Vec<TripleDoc>,
    references: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CorpusDoc {
    version: u32,
    entries: Vec<EntryDoc>,
}

/// Serialize entries into the native corpus JSON format.
pub fn save_corpus(entries: &[DatasetEntry]) -> Result<Vec<u8>, CorpusError> {
    let doc = CorpusDoc {
        version: 1,
        entries: entries
            .iter()
            .map(|e| EntryDoc {
                eid: e.eid.clone(),
                category: e.category.clone(),
                triples: e
                    .graph
                    .triples()
                    .iter()
                    .map(|t| TripleDoc {
                        s: t.subject.raw(),
                        r: t.relation.id.clone(),
                        o: t.object.raw(),
                    })
                    .collect(),
                references: e.references.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_vec_pretty(&doc)?)
}

/// Deserialize the native corpus JSON format.
pub fn load_corpus(bytes: &[u8]) -> Result<Vec<DatasetEntry>, CorpusError> {
    let doc: CorpusDoc = serde_json::from_slice(bytes)?;
    if doc.version != 1 {
        return Err(CorpusError::Schema(format!(
            "unsupported corpus version {}",
            doc.version
        )));
    }
    doc.entries
        .into_iter()
        .map(|e| {
            let triples = e
                .triples
                .iter()
                .map(|t| {
                    Triple::new(
                        Entity::from_raw(&t.s),
                        RelationType::new(&t.r),
                        Entity::from_raw(&t.o),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(DatasetEntry {
                graph: InputGraph::new(triples)?,
                references: e.references,
                category: e.category,
                eid: e.eid,
            })
        })
        .collect()
}
