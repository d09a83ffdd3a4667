//! Explicit categorical worlds and the binding from dataset strings to them.

use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::dataset::Dataset;

const SUM_TOL: f64 = 1e-12;

/// Ground-truth world: a prior over classes and, for every class, a
/// distribution over evidences whose unassigned mass falls on an implicit
/// sink token.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularWorld {
    classes: Vec<String>,
    evidences: Vec<String>,
    prior: Vec<f64>,
    /// likelihood[evidence][class]
    likelihood: Vec<Vec<f64>>,
}

fn construction(msg: String) -> BackendError {
    BackendError::Construction(msg)
}

fn unique(names: &[String], what: &str) -> Result<(), BackendError> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(construction(format!("duplicate {what} {n:?}")));
        }
    }
    Ok(())
}

impl TabularWorld {
    /// `likelihood[e][c]` is P(evidence e | class c). All probabilities must be
    /// in (0, 1]; the prior must sum to 1 and each class's likelihood column
    /// to at most 1 (both within 1e-12).
    pub fn new(
        classes: Vec<String>,
        evidences: Vec<String>,
        prior: Vec<f64>,
        likelihood: Vec<Vec<f64>>,
    ) -> Result<Self, BackendError> {
        if classes.len() < 2 {
            return Err(construction("world needs at least 2 classes".into()));
        }
        if evidences.is_empty() {
            return Err(construction("world needs at least 1 evidence".into()));
        }
        unique(&classes, "class")?;
        unique(&evidences, "evidence")?;
        if prior.len() != classes.len() {
            return Err(construction(format!(
                "prior has {} entries for {} classes",
                prior.len(),
                classes.len()
            )));
        }
        if likelihood.len() != evidences.len()
            || likelihood.iter().any(|row| row.len() != classes.len())
        {
            return Err(construction(
                "likelihood table shape does not match evidences × classes".into(),
            ));
        }
        let in_unit = |p: f64| p > 0.0 && p <= 1.0;
        if let Some((i, p)) = prior.iter().enumerate().find(|(_, p)| !in_unit(**p)) {
            return Err(construction(format!(
                "prior of {:?} is {p}; must be in (0, 1]",
                classes[i]
            )));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(construction(format!("prior sums to {total}, not 1")));
        }
        for (e, row) in likelihood.iter().enumerate() {
            if let Some((c, p)) = row.iter().enumerate().find(|(_, p)| !in_unit(**p)) {
                return Err(construction(format!(
                    "P({:?} | {:?}) = {p}; must be in (0, 1]",
                    evidences[e], classes[c]
                )));
            }
        }
        for (c, class) in classes.iter().enumerate() {
            let col: f64 = likelihood.iter().map(|row| row[c]).sum();
            if col > 1.0 + SUM_TOL {
                return Err(construction(format!(
                    "likelihoods given {class:?} sum to {col} > 1"
                )));
            }
        }
        Ok(Self {
            classes,
            evidences,
            prior,
            likelihood,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn evidences(&self) -> &[String] {
        &self.evidences
    }

    pub fn prior(&self, class: usize) -> f64 {
        self.prior[class]
    }

    pub fn likelihood(&self, evidence: usize, class: usize) -> f64 {
        self.likelihood[evidence][class]
    }

    /// Exact Bayes posterior P(class | evidence).
    pub fn posterior(&self, class: usize, evidence: usize) -> f64 {
        let joint = |c: usize| self.likelihood[evidence][c] * self.prior[c];
        joint(class) / (0..self.classes.len()).map(joint).sum::<f64>()
    }

    pub fn from_file(file: &WorldFile) -> Result<Self, BackendError> {
        let prior = file
            .classes
            .iter()
            .map(|c| {
                file.prior
                    .get(c)
                    .copied()
                    .ok_or_else(|| construction(format!("no prior for class {c:?}")))
            })
            .collect::<Result<_, _>>()?;
        let likelihood =
            file.evidences
                .iter()
                .map(|e| {
                    let row = file.likelihood.get(e).ok_or_else(|| {
                        construction(format!("no likelihood row for evidence {e:?}"))
                    })?;
                    file.classes
                        .iter()
                        .map(|c| {
                            row.get(c)
                                .copied()
                                .ok_or_else(|| construction(format!("no P({e:?} | {c:?})")))
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()?;
        Self::new(
            file.classes.clone(),
            file.evidences.clone(),
            prior,
            likelihood,
        )
    }

    pub fn to_file(&self) -> WorldFile {
        WorldFile {
            classes: self.classes.clone(),
            evidences: self.evidences.clone(),
            prior: self
                .classes
                .iter()
                .cloned()
                .zip(self.prior.iter().copied())
                .collect(),
            likelihood: self
                .evidences
                .iter()
                .zip(&self.likelihood)
                .map(|(e, row)| {
                    (
                        e.clone(),
                        self.classes
                            .iter()
                            .cloned()
                            .zip(row.iter().copied())
                            .collect(),
                    )
                })
                .collect(),
            binding: None,
        }
    }
}

/// JSON world file: `{classes, evidences, prior, likelihood, binding?}` with
/// `likelihood` keyed evidence → class → probability and an optional
/// `binding` from dataset strings to world symbol names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    pub classes: Vec<String>,
    pub evidences: Vec<String>,
    pub prior: IndexMap<String, f64>,
    pub likelihood: IndexMap<String, IndexMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<IndexMap<String, String>>,
}

impl WorldFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| construction(format!("cannot read world file {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| construction(format!("malformed world file {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Class(usize),
    Evidence(usize),
}

/// Map from dataset strings (class and evidence texts) to world symbols.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding {
    map: HashMap<String, Symbol>,
}

impl Binding {
    pub fn get(&self, text: &str) -> Option<Symbol> {
        self.map.get(text).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Symbol)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }

    fn insert(&mut self, text: &str, sym: Symbol) -> Result<(), BackendError> {
        match self.map.insert(text.to_string(), sym) {
            Some(prev) if prev != sym => Err(BackendError::Binding(format!(
                "{text:?} bound to both {prev:?} and {sym:?}"
            ))),
            _ => Ok(()),
        }
    }

    /// Every world class and evidence name binds to itself.
    pub fn identity(world: &TabularWorld) -> Result<Self, BackendError> {
        let mut b = Self::default();
        for (i, c) in world.classes().iter().enumerate() {
            b.insert(c, Symbol::Class(i))?;
        }
        for (i, e) in world.evidences().iter().enumerate() {
            b.insert(e, Symbol::Evidence(i))?;
        }
        Ok(b)
    }

    /// Explicit dataset string → world symbol name pairs.
    pub fn by_name<'a>(
        world: &TabularWorld,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, BackendError> {
        let mut b = Self::default();
        for (text, name) in pairs {
            let sym = if let Some(i) = world.classes().iter().position(|c| c == name) {
                Symbol::Class(i)
            } else if let Some(i) = world.evidences().iter().position(|e| e == name) {
                Symbol::Evidence(i)
            } else {
                return Err(BackendError::Binding(format!(
                    "{name:?} is not a world symbol"
                )));
            };
            b.insert(text, sym)?;
        }
        Ok(b)
    }

    /// In every category, the i-th class binds to world class i and the j-th
    /// evidence to world evidence j.
    pub fn positional(dataset: &Dataset, world: &TabularWorld) -> Result<Self, BackendError> {
        let mut b = Self::default();
        for cat in &dataset.categories {
            if cat.classes.len() > world.classes().len()
                || cat.evidences.len() > world.evidences().len()
            {
                return Err(BackendError::Binding(format!(
                    "category `{}` has {} classes / {} evidences; world has {} / {}",
                    cat.name,
                    cat.classes.len(),
                    cat.evidences.len(),
                    world.classes().len(),
                    world.evidences().len()
                )));
            }
            for (i, c) in cat.classes.iter().enumerate() {
                b.insert(c.text(), Symbol::Class(i))?;
            }
            for (j, e) in cat.evidences.iter().enumerate() {
                b.insert(&e.text, Symbol::Evidence(j))?;
            }
        }
        Ok(b)
    }

    /// Binding for a world file: its explicit `binding` table if present,
    /// identity if every dataset string is a world name, positional otherwise.
    pub fn for_dataset(
        file: &WorldFile,
        world: &TabularWorld,
        dataset: &Dataset,
    ) -> Result<Self, BackendError> {
        if let Some(map) = &file.binding {
            return Self::by_name(world, map.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        }
        let identity = Self::identity(world)?;
        let all_named = dataset.categories.iter().all(|cat| {
            cat.classes
                .iter()
                .all(|c| matches!(identity.get(c.text()), Some(Symbol::Class(_))))
                && cat
                    .evidences
                    .iter()
                    .all(|e| matches!(identity.get(&e.text), Some(Symbol::Evidence(_))))
        });
        if all_named {
            Ok(identity)
        } else {
            Self::positional(dataset, world)
        }
    }
}
