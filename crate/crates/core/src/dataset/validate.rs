//! Dataset desiderata and structural checks.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    EmptyDataset,
    DuplicateCategory,
    ClassCountMinimum,
    ClassCount,
    DuplicateClass,
    EmptyClass,
    EmptyElicitation,
    DanglingClassReference,
    EqualTokenCount,
    ClassTokenLimit,
    HistoryCount,
    EvidenceCount,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::EmptyDataset => "empty-dataset",
            Rule::DuplicateCategory => "duplicate-category",
            Rule::ClassCountMinimum => "class-count-minimum",
            Rule::ClassCount => "class-count",
            Rule::DuplicateClass => "duplicate-class",
            Rule::EmptyClass => "empty-class",
            Rule::EmptyElicitation => "empty-elicitation",
            Rule::DanglingClassReference => "dangling-class-reference",
            Rule::EqualTokenCount => "equal-token-count",
            Rule::ClassTokenLimit => "class-token-limit",
            Rule::HistoryCount => "history-count",
            Rule::EvidenceCount => "evidence-count",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Rule::EmptyDataset
            | Rule::ClassCount
            | Rule::ClassTokenLimit
            | Rule::HistoryCount
            | Rule::EvidenceCount => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

pub const MIN_CLASSES: usize = 5;
pub const MIN_HISTORIES: usize = 3;
pub const MIN_EVIDENCES: usize = 20;
pub const MAX_CLASS_TOKENS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    /// Category name; empty for dataset-level findings.
    pub category: String,
    pub rule: Rule,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
    /// Class text → token count, filled only when a token counter was given.
    pub token_counts: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.errors.iter().chain(self.warnings.iter())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn push(&mut self, category: &str, rule: Rule, message: String) {
        let f = Finding {
            category: category.to_string(),
            rule,
            message,
        };
        match rule.severity() {
            Severity::Error => self.errors.push(f),
            Severity::Warning => self.warnings.push(f),
        }
    }
}

/// Check every category against the structural rules and the generation
/// desiderata. Token-count rules run only when `token_counter` is supplied.
pub fn validate(ds: &Dataset, token_counter: Option<&dyn Fn(&str) -> usize>) -> ValidationReport {
    let mut report = ValidationReport::default();

    if ds.categories.is_empty() {
        report.push(
            "",
            Rule::EmptyDataset,
            "empty dataset: no categories".into(),
        );
    }

    let mut seen_names = HashSet::new();
    for cat in &ds.categories {
        if !seen_names.insert(cat.name.as_str()) {
            report.push(
                &cat.name,
                Rule::DuplicateCategory,
                format!("category name {:?} appears more than once", cat.name),
            );
        }
    }

    for cat in &ds.categories {
        let name = cat.name.as_str();
        let k = cat.classes.len();
        if k < 2 {
            report.push(
                name,
                Rule::ClassCountMinimum,
                format!("{k} classes; at least 2 are needed to form pairs"),
            );
        } else if k < MIN_CLASSES {
            report.push(
                name,
                Rule::ClassCount,
                format!("{k} classes; at least {MIN_CLASSES} recommended"),
            );
        }

        let mut seen = HashSet::new();
        let dups: Vec<&str> = cat
            .classes
            .iter()
            .map(|c| c.text())
            .filter(|t| !seen.insert(*t))
            .collect();
        if !dups.is_empty() {
            report.push(
                name,
                Rule::DuplicateClass,
                format!("duplicate classes {dups:?}"),
            );
        }

        if cat.classes.iter().any(|c| c.text().is_empty()) {
            report.push(
                name,
                Rule::EmptyClass,
                "a candidate class is the empty string".into(),
            );
        }

        let mut empty = Vec::new();
        if cat.class_elicitation.is_empty() {
            empty.push("class_elicitation");
        }
        if cat.evidence_elicitation.is_empty() {
            empty.push("evidence_elicitation");
        }
        if !empty.is_empty() {
            report.push(
                name,
                Rule::EmptyElicitation,
                format!("empty {}", empty.join(" and ")),
            );
        }

        let dangling: Vec<&str> = cat
            .evidences
            .iter()
            .flat_map(|e| e.points_to_classes.iter())
            .filter(|c| cat.class_index(c).is_none())
            .map(String::as_str)
            .collect();
        if !dangling.is_empty() {
            report.push(
                name,
                Rule::DanglingClassReference,
                format!("points_to_classes names unknown classes {dangling:?}"),
            );
        }

        if let Some(count) = token_counter {
            let counts: Vec<(&str, usize)> = cat
                .classes
                .iter()
                .map(|c| (c.text(), count(c.text())))
                .collect();
            for (text, n) in &counts {
                report.token_counts.insert((*text).to_string(), *n);
            }
            let distinct: HashSet<usize> = counts.iter().map(|(_, n)| *n).collect();
            if distinct.len() > 1 {
                report.push(
                    name,
                    Rule::EqualTokenCount,
                    format!("class token counts differ: {counts:?}"),
                );
            }
            let long: Vec<&(&str, usize)> = counts
                .iter()
                .filter(|(_, n)| *n > MAX_CLASS_TOKENS)
                .collect();
            if !long.is_empty() {
                report.push(
                    name,
                    Rule::ClassTokenLimit,
                    format!("classes longer than {MAX_CLASS_TOKENS} tokens: {long:?}"),
                );
            }
        }

        let h = cat.histories.len();
        if h < MIN_HISTORIES {
            report.push(
                name,
                Rule::HistoryCount,
                format!("{h} conversation histories; at least {MIN_HISTORIES} recommended"),
            );
        }
        let e = cat.evidences.len();
        if e < MIN_EVIDENCES {
            report.push(
                name,
                Rule::EvidenceCount,
                format!("{e} evidences; at least {MIN_EVIDENCES} recommended"),
            );
        }
    }

    let key = |f: &Finding| (f.category.clone(), f.rule.id());
    report.errors.sort_by_key(key);
    report.warnings.sort_by_key(key);
    report
}

#[cfg(test)]
mod tests {
    use super::super::tests::EXEMPLAR;
    use super::super::*;
    use super::*;
    use crate::tokenize::count_pieces;

    #[test]
    fn exemplar_warns_on_histories_and_evidences() {
        let ds = load_dataset_str(EXEMPLAR).unwrap();
        let report = validate(&ds, None);
        assert!(report.errors.is_empty());
        let rules: Vec<Rule> = report.warnings.iter().map(|f| f.rule).collect();
        assert_eq!(rules, vec![Rule::EvidenceCount, Rule::HistoryCount]);
    }

    #[test]
    fn unequal_token_counts_are_an_error() {
        // fixed counter: pre-tokenized piece count; 3 vs 2
        assert_ne!(count_pieces(" Jane Austen."), count_pieces(" Wilde."));
        let mut ds = load_dataset_str(EXEMPLAR).unwrap();
        ds.categories[0].classes =
            vec![ClassLabel::new(" Jane Austen."), ClassLabel::new(" Wilde.")];
        let counter = |s: &str| count_pieces(s);
        let report = validate(&ds, Some(&counter));
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].rule, Rule::EqualTokenCount);
        assert_eq!(report.token_counts[" Wilde."], 2);
    }

    #[test]
    fn empty_dataset_warns() {
        let report = validate(&Dataset::new(vec![]), None);
        assert!(report.is_ok());
        assert_eq!(report.warnings[0].rule, Rule::EmptyDataset);
    }

    #[test]
    fn validate_is_deterministic() {
        let ds = load_dataset_str(EXEMPLAR).unwrap();
        let counter = |s: &str| count_pieces(s);
        assert_eq!(validate(&ds, Some(&counter)), validate(&ds, Some(&counter)));
    }

    #[test]
    fn report_json_has_stable_key_order() {
        let report = validate(&Dataset::new(vec![]), None);
        let json = report.to_json_pretty();
        let e = json.find("\"errors\"").unwrap();
        let w = json.find("\"warnings\"").unwrap();
        let t = json.find("\"token_counts\"").unwrap();
        assert!(e < w && w < t);
        assert!(json.contains("\"rule\": \"empty-dataset\""));
    }
}
