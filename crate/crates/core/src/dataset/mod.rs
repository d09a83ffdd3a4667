//! Evaluation corpus: categories of classes, evidences, and conversation
//! histories, loaded from the `bayesian_reasoning` JSON format.
//!
//! All strings are kept byte-for-byte as they appear in the file. Leading
//! spaces and trailing punctuation are part of what gets scored, so nothing
//! here trims or normalizes whitespace.

mod prompt;
mod validate;

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use prompt::emit_generation_prompt;
pub use validate::{validate, Finding, Rule, Severity, ValidationReport};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema error in {location}: field `{field}` {message}")]
    Schema {
        location: String,
        field: String,
        message: String,
    },
    #[error("category `{category}`: evidence points to unknown class {class:?}")]
    Reference { category: String, class: String },
    #[error("category `{category}`: {message} [{rule}]")]
    Invariant {
        category: String,
        rule: Rule,
        message: String,
    },
    #[error("category name must not be empty")]
    EmptyCategoryName,
}

/// A candidate class, stored exactly as it is scored (e.g. `" Jane Austen."`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ClassLabel(String);

impl ClassLabel {
    pub fn new(text: impl Into<String>) -> Self {
        Self(text.into())
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub text: String,
    /// Class texts this evidence is meant to support; may be empty.
    pub points_to_classes: Vec<String>,
    /// Free-form label (the exemplar's `category` field on evidence objects).
    pub tag: Option<String>,
    pub extra: Map<String, Value>,
}

impl Evidence {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            points_to_classes: Vec::new(),
            tag: None,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub name: String,
    pub classes: Vec<ClassLabel>,
    pub histories: Vec<String>,
    pub evidences: Vec<Evidence>,
    pub class_elicitation: String,
    pub evidence_elicitation: String,
    /// Unrecognized fields, kept so a save round-trips them.
    pub extra: Map<String, Value>,
}

impl Category {
    pub fn class_index(&self, text: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.text() == text)
    }

    /// Number of (class pair, evidence, history) tuples this category yields.
    pub fn tuple_count(&self) -> usize {
        let k = self.classes.len();
        k * k.saturating_sub(1) / 2 * self.evidences.len() * self.histories.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub categories: Vec<Category>,
    pub source_path: String,
}

/// Coordinates of one (c1, c2, x, h, k) tuple as indices into a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TupleIndex {
    pub category: usize,
    pub c1: usize,
    pub c2: usize,
    pub evidence: usize,
    pub history: usize,
}

impl Dataset {
    pub fn new(categories: Vec<Category>) -> Self {
        Self {
            categories,
            source_path: String::new(),
        }
    }

    pub fn tuple_count(&self) -> usize {
        self.categories.iter().map(Category::tuple_count).sum()
    }

    /// All unordered class pairs × evidences × histories, in category, pair,
    /// evidence, history order. Within a pair, `c1` precedes `c2` in the file.
    pub fn enumerate_tuples(&self) -> Vec<TupleIndex> {
        let mut out = Vec::with_capacity(self.tuple_count());
        for (ci, cat) in self.categories.iter().enumerate() {
            let k = cat.classes.len();
            for c1 in 0..k {
                for c2 in (c1 + 1)..k {
                    for evidence in 0..cat.evidences.len() {
                        for history in 0..cat.histories.len() {
                            out.push(TupleIndex {
                                category: ci,
                                c1,
                                c2,
                                evidence,
                                history,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Normalized JSON form: histories as arrays, evidence as objects.
    pub fn to_json_value(&self) -> Value {
        let cats: Vec<Value> = self.categories.iter().map(category_to_json).collect();
        let mut root = Map::new();
        root.insert("bayesian_reasoning".into(), Value::Array(cats));
        Value::Object(root)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("JSON values always serialize")
    }

    /// SHA-256 of the normalized serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_pretty().as_bytes()))
    }
}

fn category_to_json(cat: &Category) -> Value {
    let mut obj = Map::new();
    obj.insert("class_type".into(), Value::String(cat.name.clone()));
    obj.insert(
        "conversation_history".into(),
        Value::Array(cat.histories.iter().cloned().map(Value::String).collect()),
    );
    obj.insert(
        "candidate_classes".into(),
        Value::Array(
            cat.classes
                .iter()
                .map(|c| Value::String(c.0.clone()))
                .collect(),
        ),
    );
    obj.insert(
        "class_elicitation".into(),
        Value::String(cat.class_elicitation.clone()),
    );
    obj.insert(
        "evidence_elicitation".into(),
        Value::String(cat.evidence_elicitation.clone()),
    );
    let evidences = cat
        .evidences
        .iter()
        .map(|e| {
            let mut eo = Map::new();
            if let Some(tag) = &e.tag {
                eo.insert("category".into(), Value::String(tag.clone()));
            }
            eo.insert("evidence_text".into(), Value::String(e.text.clone()));
            if !e.points_to_classes.is_empty() {
                eo.insert(
                    "points_to_classes".into(),
                    Value::Array(
                        e.points_to_classes
                            .iter()
                            .cloned()
                            .map(Value::String)
                            .collect(),
                    ),
                );
            }
            for (k, v) in &e.extra {
                eo.insert(k.clone(), v.clone());
            }
            Value::Object(eo)
        })
        .collect();
    obj.insert("evidence".into(), Value::Array(evidences));
    for (k, v) in &cat.extra {
        obj.insert(k.clone(), v.clone());
    }
    Value::Object(obj)
}

const KNOWN_CATEGORY_FIELDS: [&str; 6] = [
    "class_type",
    "conversation_history",
    "candidate_classes",
    "class_elicitation",
    "evidence_elicitation",
    "evidence",
];

fn schema_err(location: &str, field: &str, message: &str) -> DatasetError {
    DatasetError::Schema {
        location: location.to_string(),
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn req_str(obj: &Map<String, Value>, field: &str, location: &str) -> Result<String, DatasetError> {
    match obj.get(field) {
        None => Err(schema_err(location, field, "is missing")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(schema_err(location, field, "must be a string")),
    }
}

fn str_array(v: &Value, field: &str, location: &str) -> Result<Vec<String>, DatasetError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema_err(location, field, "must be an array of strings"))?;
    arr.iter()
        .map(|item| {
            item.as_str()
                .map(str::to_string)
                .ok_or_else(|| schema_err(location, field, "must contain only strings"))
        })
        .collect()
}

fn parse_evidence(v: &Value, location: &str) -> Result<Evidence, DatasetError> {
    match v {
        Value::String(s) => Ok(Evidence::new(s.clone())),
        Value::Object(obj) => {
            let text = req_str(obj, "evidence_text", location)?;
            let tag = match obj.get("category") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(_) => {
                    return Err(schema_err(
                        location,
                        "evidence.category",
                        "must be a string",
                    ))
                }
            };
            let points_to_classes = match obj.get("points_to_classes") {
                None | Some(Value::Null) => Vec::new(),
                Some(p) => str_array(p, "evidence.points_to_classes", location)?,
            };
            let extra = obj
                .iter()
                .filter(|(k, _)| {
                    !matches!(
                        k.as_str(),
                        "evidence_text" | "category" | "points_to_classes"
                    )
                })
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            Ok(Evidence {
                text,
                points_to_classes,
                tag,
                extra,
            })
        }
        _ => Err(schema_err(
            location,
            "evidence",
            "entries must be strings or objects",
        )),
    }
}

fn parse_category(v: &Value, index: usize) -> Result<Category, DatasetError> {
    let obj = v.as_object().ok_or_else(|| {
        schema_err(
            &format!("category #{index}"),
            "bayesian_reasoning",
            "entries must be objects",
        )
    })?;
    let name = req_str(obj, "class_type", &format!("category #{index}"))?;
    let location = format!("category `{name}`");

    let histories = match obj.get("conversation_history") {
        None => return Err(schema_err(&location, "conversation_history", "is missing")),
        Some(Value::String(s)) => vec![s.clone()],
        Some(v) => str_array(v, "conversation_history", &location)?,
    };
    let classes = match obj.get("candidate_classes") {
        None => return Err(schema_err(&location, "candidate_classes", "is missing")),
        Some(v) => str_array(v, "candidate_classes", &location)?
            .into_iter()
            .map(ClassLabel)
            .collect(),
    };
    let class_elicitation = req_str(obj, "class_elicitation", &location)?;
    let evidence_elicitation = req_str(obj, "evidence_elicitation", &location)?;
    let evidences = match obj.get("evidence") {
        None => return Err(schema_err(&location, "evidence", "is missing")),
        Some(Value::String(s)) => vec![Evidence::new(s.clone())],
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| parse_evidence(item, &location))
            .collect::<Result<_, _>>()?,
        Some(_) => {
            return Err(schema_err(
                &location,
                "evidence",
                "must be a string or an array",
            ))
        }
    };
    let extra = obj
        .iter()
        .filter(|(k, _)| !KNOWN_CATEGORY_FIELDS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    Ok(Category {
        name,
        classes,
        histories,
        evidences,
        class_elicitation,
        evidence_elicitation,
        extra,
    })
}

/// The one-category "novelists" exemplar used by the generation prompt.
pub const EXEMPLAR_JSON: &str = include_str!("../../fixtures/novelists.json");

pub fn exemplar() -> Dataset {
    parse_dataset_str(EXEMPLAR_JSON).expect("bundled exemplar parses")
}

/// Parse a dataset from JSON text without checking cross-field invariants.
///
/// Use this when the goal is to report every problem (see [`validate`]);
/// [`load_dataset`] additionally refuses datasets that cannot be scored.
pub fn parse_dataset_str(text: &str) -> Result<Dataset, DatasetError> {
    let root: Value = serde_json::from_str(text)?;
    let obj = root.as_object().ok_or_else(|| {
        schema_err(
            "top level",
            "bayesian_reasoning",
            "top level must be an object",
        )
    })?;
    let cats = obj
        .get("bayesian_reasoning")
        .ok_or_else(|| schema_err("top level", "bayesian_reasoning", "is missing"))?
        .as_array()
        .ok_or_else(|| schema_err("top level", "bayesian_reasoning", "must be an array"))?;
    let categories = cats
        .iter()
        .enumerate()
        .map(|(i, c)| parse_category(c, i))
        .collect::<Result<_, _>>()?;
    Ok(Dataset::new(categories))
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut ds = parse_dataset_str(&text)?;
    ds.source_path = path.display().to_string();
    Ok(ds)
}

/// Load a dataset and establish its invariants: at least two unique classes
/// per category, non-empty elicitations and classes, unique category names,
/// and `points_to_classes` entries that name classes of the same category.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let ds = parse_dataset(path)?;
    check_invariants(&ds)?;
    Ok(ds)
}

pub fn load_dataset_str(text: &str) -> Result<Dataset, DatasetError> {
    let ds = parse_dataset_str(text)?;
    check_invariants(&ds)?;
    Ok(ds)
}

/// First violated structural invariant, as a typed error.
pub fn check_invariants(ds: &Dataset) -> Result<(), DatasetError> {
    for cat in &ds.categories {
        for ev in &cat.evidences {
            if let Some(bad) = ev
                .points_to_classes
                .iter()
                .find(|c| cat.class_index(c).is_none())
            {
                return Err(DatasetError::Reference {
                    category: cat.name.clone(),
                    class: bad.clone(),
                });
            }
        }
    }
    let report = validate(ds, None);
    match report.errors.into_iter().next() {
        Some(f) => Err(DatasetError::Invariant {
            category: f.category,
            rule: f.rule,
            message: f.message,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub const EXEMPLAR: &str = super::EXEMPLAR_JSON;

    #[test]
    fn loads_exemplar() {
        let ds = load_dataset_str(EXEMPLAR).unwrap();
        assert_eq!(ds.categories.len(), 1);
        let cat = &ds.categories[0];
        assert_eq!(cat.name, "novelists");
        assert_eq!(cat.classes.len(), 5);
        assert_eq!(cat.evidences.len(), 8);
        assert_eq!(cat.histories.len(), 1);
        assert_eq!(cat.classes[2].text(), " Jane Austen.");
        assert_eq!(cat.evidences[1].tag.as_deref(), Some("literary_analysis"));
        assert_eq!(cat.tuple_count(), 10 * 8);
    }

    #[test]
    fn empty_dataset_loads() {
        let ds = load_dataset_str(r#"{"bayesian_reasoning": []}"#).unwrap();
        assert!(ds.categories.is_empty());
        assert!(ds.enumerate_tuples().is_empty());
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let text = EXEMPLAR.replacen(
            r#""evidence_text": " subtle irony.""#,
            r#""evidence_text": " subtle irony.", "points_to_classes": [" Mark Twain."]"#,
            1,
        );
        match load_dataset_str(&text) {
            Err(DatasetError::Reference { category, class }) => {
                assert_eq!(category, "novelists");
                assert_eq!(class, " Mark Twain.");
            }
            other => panic!("expected reference error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_names_field_and_category() {
        let text = EXEMPLAR.replacen(r#""class_elicitation": " My favourite author is","#, "", 1);
        let err = load_dataset_str(&text).unwrap_err();
        match &err {
            DatasetError::Schema {
                location, field, ..
            } => {
                assert_eq!(field, "class_elicitation");
                assert!(location.contains("novelists"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            load_dataset_str("{ not json"),
            Err(DatasetError::Parse(_))
        ));
    }

    #[test]
    fn flat_string_evidence_and_string_history_normalize() {
        let text = r#"{"bayesian_reasoning": [{
            "class_type": "colours", "conversation_history": "Hi.",
            "candidate_classes": [" red.", " blue."],
            "class_elicitation": " I like", "evidence_elicitation": " I see",
            "evidence": [" the sky.", " a rose."], "note": 7}]}"#;
        let ds = load_dataset_str(text).unwrap();
        let cat = &ds.categories[0];
        assert_eq!(cat.histories, vec!["Hi.".to_string()]);
        assert_eq!(cat.evidences[0], Evidence::new(" the sky."));
        assert_eq!(cat.extra.get("note"), Some(&Value::from(7)));
        let again = load_dataset_str(&ds.to_json_pretty()).unwrap();
        assert_eq!(again.categories, ds.categories);
    }

    #[test]
    fn enumeration_order_and_count() {
        let cat = Category {
            name: "k".into(),
            classes: (0..5).map(|i| ClassLabel::new(format!(" c{i}."))).collect(),
            histories: vec!["a".into(), "b".into(), "c".into()],
            evidences: (0..20).map(|i| Evidence::new(format!(" e{i}."))).collect(),
            class_elicitation: " x".into(),
            evidence_elicitation: " y".into(),
            extra: Map::new(),
        };
        let ds = Dataset::new(vec![cat]);
        let tuples = ds.enumerate_tuples();
        assert_eq!(tuples.len(), 600);
        assert_eq!(
            tuples[0],
            TupleIndex {
                category: 0,
                c1: 0,
                c2: 1,
                evidence: 0,
                history: 0
            }
        );
        assert_eq!(tuples[1].history, 1);
        assert_eq!(tuples[3].evidence, 1);
        assert_eq!(
            tuples[599],
            TupleIndex {
                category: 0,
                c1: 3,
                c2: 4,
                evidence: 19,
                history: 2
            }
        );
    }

    fn arb_category() -> impl proptest::strategy::Strategy<Value = Category> {
        use proptest::prelude::*;
        (2usize..7, 0usize..6, 0usize..4, "[ a-z.]{0,6}").prop_map(|(k, e, h, tail)| Category {
            name: format!("cat{tail}"),
            classes: (0..k)
                .map(|i| ClassLabel::new(format!(" c{i}{tail}")))
                .collect(),
            histories: (0..h).map(|i| format!("h{i}{tail}")).collect(),
            evidences: (0..e)
                .map(|i| Evidence {
                    text: format!(" e{i}{tail}"),
                    points_to_classes: if i % 2 == 0 {
                        vec![format!(" c0{tail}")]
                    } else {
                        vec![]
                    },
                    tag: (i % 3 == 0).then(|| "t".to_string()),
                    extra: Map::new(),
                })
                .collect(),
            class_elicitation: " I pick".into(),
            evidence_elicitation: " I saw".into(),
            extra: Map::new(),
        })
    }

    proptest::proptest! {
        #[test]
        fn tuple_count_matches_closed_form(cats in proptest::collection::vec(arb_category(), 0..4)) {
            let ds = Dataset::new(cats);
            let closed: usize = ds.categories.iter()
                .map(|c| c.classes.len() * (c.classes.len() - 1) / 2 * c.evidences.len() * c.histories.len())
                .sum();
            proptest::prop_assert_eq!(ds.enumerate_tuples().len(), closed);
        }

        #[test]
        fn serialize_round_trips(cats in proptest::collection::vec(arb_category(), 0..3)) {
            let ds = Dataset::new(cats);
            let back = parse_dataset_str(&ds.to_json_pretty()).unwrap();
            proptest::prop_assert_eq!(back.categories, ds.categories);
        }
    }
}
