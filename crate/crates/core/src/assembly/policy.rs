//! Segment orders for the three contexts.
//!
//! A policy is either `standard` or an explicit layout such as
//! `prior=h+ce;likelihood=h+ce+c+ee;posterior=h+ee+e+ce`, where
//! `h` = history, `ce` = class elicitation, `c` = class,
//! `ee` = evidence elicitation, `e` = evidence.

use super::{AssemblyError, ContextTriple};
use crate::dataset::{Category, ClassLabel, Evidence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    History,
    ClassElicitation,
    Class,
    EvidenceElicitation,
    Evidence,
}

impl Segment {
    fn code(self) -> &'static str {
        match self {
            Segment::History => "h",
            Segment::ClassElicitation => "ce",
            Segment::Class => "c",
            Segment::EvidenceElicitation => "ee",
            Segment::Evidence => "e",
        }
    }

    fn parse(code: &str) -> Option<Self> {
        Some(match code {
            "h" => Segment::History,
            "ce" => Segment::ClassElicitation,
            "c" => Segment::Class,
            "ee" => Segment::EvidenceElicitation,
            "e" => Segment::Evidence,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblyPolicy {
    id: String,
    prior: Vec<Segment>,
    likelihood: Vec<Segment>,
    posterior: Vec<Segment>,
}

use Segment::*;

impl AssemblyPolicy {
    pub fn standard() -> Self {
        Self {
            id: "standard".into(),
            prior: vec![History, ClassElicitation],
            likelihood: vec![History, ClassElicitation, Class, EvidenceElicitation],
            posterior: vec![History, EvidenceElicitation, Evidence, ClassElicitation],
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Parse `standard` or an explicit `prior=..;likelihood=..;posterior=..`
    /// layout. The likelihood context must contain the class and the
    /// posterior context the evidence; the prior context may contain
    /// neither.
    pub fn parse(text: &str) -> Result<Self, AssemblyError> {
        let text = text.trim();
        if text == "standard" {
            return Ok(Self::standard());
        }
        let bad = |m: String| AssemblyError::Policy(format!("{text:?}: {m}"));
        let (mut prior, mut likelihood, mut posterior) = (None, None, None);
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, layout) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected name=segments, got {part:?}")))?;
            let segments = layout
                .split('+')
                .map(|s| {
                    Segment::parse(s.trim()).ok_or_else(|| bad(format!("unknown segment {s:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let slot = match name.trim() {
                "prior" => &mut prior,
                "likelihood" => &mut likelihood,
                "posterior" => &mut posterior,
                other => return Err(bad(format!("unknown context {other:?}"))),
            };
            if slot.replace(segments).is_some() {
                return Err(bad(format!("{name} given twice")));
            }
        }
        let (Some(prior), Some(likelihood), Some(posterior)) = (prior, likelihood, posterior)
        else {
            return Err(bad(
                "prior, likelihood, and posterior must all be given".into()
            ));
        };
        if prior.contains(&Class) || prior.contains(&Evidence) {
            return Err(bad(
                "the prior context cannot contain the class or the evidence".into(),
            ));
        }
        if !likelihood.contains(&Class) || likelihood.contains(&Evidence) {
            return Err(bad(
                "the likelihood context must contain the class and not the evidence".into(),
            ));
        }
        if !posterior.contains(&Evidence) || posterior.contains(&Class) {
            return Err(bad(
                "the posterior context must contain the evidence and not the class".into(),
            ));
        }
        let mut p = Self {
            id: String::new(),
            prior,
            likelihood,
            posterior,
        };
        p.id = if p.same_layout(&Self::standard()) {
            "standard".into()
        } else {
            p.layout()
        };
        Ok(p)
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.prior == other.prior
            && self.likelihood == other.likelihood
            && self.posterior == other.posterior
    }

    /// Explicit layout string; parses back to an equal policy.
    pub fn layout(&self) -> String {
        let join = |s: &[Segment]| s.iter().map(|x| x.code()).collect::<Vec<_>>().join("+");
        format!(
            "prior={};likelihood={};posterior={}",
            join(&self.prior),
            join(&self.likelihood),
            join(&self.posterior)
        )
    }

    pub fn contexts(
        &self,
        category: &Category,
        class: &ClassLabel,
        evidence: &Evidence,
        history: &str,
    ) -> ContextTriple {
        let render = |segments: &[Segment]| {
            let mut out = String::new();
            for s in segments {
                out.push_str(match s {
                    History => history,
                    ClassElicitation => &category.class_elicitation,
                    Class => class.text(),
                    EvidenceElicitation => &category.evidence_elicitation,
                    Evidence => &evidence.text,
                });
            }
            out
        };
        ContextTriple {
            prior_context: render(&self.prior),
            prior_continuation: class.text().to_string(),
            likelihood_context: render(&self.likelihood),
            likelihood_continuation: evidence.text.clone(),
            posterior_context: render(&self.posterior),
            posterior_continuation: class.text().to_string(),
        }
    }
}

impl Default for AssemblyPolicy {
    fn default() -> Self {
        Self::standard()
    }
}

impl std::str::FromStr for AssemblyPolicy {
    type Err = AssemblyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_round_trips_through_layout() {
        let s = AssemblyPolicy::standard();
        assert_eq!(
            s.layout(),
            "prior=h+ce;likelihood=h+ce+c+ee;posterior=h+ee+e+ce"
        );
        let back = AssemblyPolicy::parse(&s.layout()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.id(), "standard");
    }

    #[test]
    fn custom_layout_keeps_its_layout_as_id() {
        let p = AssemblyPolicy::parse("prior=ce;likelihood=ce+c+ee;posterior=ee+e+ce+h").unwrap();
        assert_eq!(p.id(), p.layout());
        assert_ne!(p, AssemblyPolicy::standard());
    }

    #[test]
    fn rejects_malformed_layouts() {
        for bad in [
            "nonsense",
            "prior=h+ce;likelihood=h+ce+ee;posterior=h+ee+e+ce",
            "prior=h+ce+c;likelihood=h+ce+c+ee;posterior=h+ee+e+ce",
            "prior=h+ce;likelihood=h+ce+c+ee",
            "prior=h+x;likelihood=h+ce+c+ee;posterior=h+ee+e+ce",
            "prior=h;prior=h;likelihood=c;posterior=e",
        ] {
            assert!(AssemblyPolicy::parse(bad).is_err(), "{bad}");
        }
    }
}
