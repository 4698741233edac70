//! Plans and subtasks: the structured decomposition of an instruction into
//! atomic editing steps, serialized as closed-vocabulary token sequences.

mod generate;
mod model;
mod refine;

pub use generate::{generate_plan, generate_plan_checklist, ood_tokens_for_plan, CoverageMap};
pub use model::{PlannerModel, TokenStream, PLANNER_SCHEMA};
pub use refine::{refine_plans, RefinementConfig, RefinementReport};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scene::{Constraint, RelKind, ReplaceField, SceneDoc, Selector};
use crate::vocab;

pub const PLAN_SCHEMA: &str = "plan/1";
pub const MAX_PLAN_LEN: usize = 10;
pub const MAX_SUBTASK_TOKENS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("coverage-error: {0}")]
    Coverage(String),
    #[error("data-error: {0}")]
    Data(String),
    #[error("malformed subtask tokens: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verb {
    ReplaceText,
    Recolor,
    RecolorBackground,
    SwapMotif,
    AddObject,
    RemoveElement,
}

impl Verb {
    pub const ALL: [Verb; 6] = [
        Verb::ReplaceText,
        Verb::Recolor,
        Verb::RecolorBackground,
        Verb::SwapMotif,
        Verb::AddObject,
        Verb::RemoveElement,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            Verb::ReplaceText => "replace_text",
            Verb::Recolor => "recolor",
            Verb::RecolorBackground => "recolor_background",
            Verb::SwapMotif => "swap_motif",
            Verb::AddObject => "add_object",
            Verb::RemoveElement => "remove_element",
        }
    }

    pub fn from_token(t: &str) -> Option<Verb> {
        Verb::ALL.iter().copied().find(|v| v.token() == t)
    }

    pub fn index(&self) -> usize {
        Verb::ALL.iter().position(|v| v == self).unwrap()
    }

    /// Token count of a full subtask for this verb, including the verb token.
    pub fn arity(&self) -> usize {
        match self {
            Verb::ReplaceText => 4,
            Verb::Recolor => 3,
            Verb::RecolorBackground => 3,
            Verb::SwapMotif => 3,
            Verb::AddObject => 5,
            Verb::RemoveElement => 2,
        }
    }

    /// Whether the target slot takes an element id (vs. the background).
    pub fn targets_element(&self) -> bool {
        !matches!(self, Verb::RecolorBackground | Verb::SwapMotif)
    }
}

/// One atomic editing step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTask {
    pub id: String,
    pub verb: Verb,
    pub target: Selector,
    pub payload: Vec<String>,
}

impl SubTask {
    pub fn new(id: impl Into<String>, verb: Verb, target: Selector, payload: Vec<String>) -> Self {
        SubTask {
            id: id.into(),
            verb,
            target,
            payload,
        }
    }

    /// Closed-vocabulary token sequence `[verb, target, payload...]`.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = vec![self.verb.token().to_string()];
        match &self.target {
            Selector::Id(t) => out.push(t.clone()),
            Selector::Background => out.push(vocab::SEL_BACKGROUND.to_string()),
            Selector::Label(l) => out.push(l.clone()),
        }
        out.extend(self.payload.iter().cloned());
        out
    }

    pub fn parse_tokens(id: &str, tokens: &[String]) -> Result<SubTask, PlannerError> {
        let bad = |m: &str| PlannerError::Parse(format!("{m}: {tokens:?}"));
        let verb = tokens
            .first()
            .and_then(|t| Verb::from_token(t))
            .ok_or_else(|| bad("missing or unknown verb"))?;
        if tokens.len() != verb.arity() {
            return Err(bad(&format!(
                "verb {} expects {} tokens",
                verb.token(),
                verb.arity()
            )));
        }
        let target = if verb.targets_element() {
            Selector::Id(tokens[1].clone())
        } else if tokens[1] == vocab::SEL_BACKGROUND {
            Selector::Background
        } else {
            return Err(bad("background verb requires sel_background"));
        };
        if let Selector::Id(t) = &target {
            if !vocab::ELEMENT_IDS.contains(&t.as_str()) {
                return Err(bad("target is not an element id token"));
            }
        }
        let payload: Vec<String> = tokens[2..].to_vec();
        match verb {
            Verb::ReplaceText => {
                if !payload.iter().all(|w| vocab::CONTENT_WORDS.contains(&w.as_str())) {
                    return Err(bad("replace_text payload must be content words"));
                }
            }
            Verb::Recolor | Verb::RecolorBackground => {
                if !vocab::COLORS.contains(&payload[0].as_str()) {
                    return Err(bad("recolor payload must be a color"));
                }
            }
            Verb::SwapMotif => {
                if !vocab::MOTIFS.contains(&payload[0].as_str()) {
                    return Err(bad("swap_motif payload must be a motif"));
                }
            }
            Verb::AddObject => {
                if !vocab::LABELS.contains(&payload[0].as_str()) {
                    return Err(bad("add_object payload[0] must be a label"));
                }
                if !vocab::COLORS.contains(&payload[1].as_str()) {
                    return Err(bad("add_object payload[1] must be a color"));
                }
                if RelKind::from_token(&payload[2]).is_none() {
                    return Err(bad("add_object payload[2] must be a relation"));
                }
            }
            Verb::RemoveElement => {}
        }
        Ok(SubTask {
            id: id.to_string(),
            verb,
            target,
            payload,
        })
    }

    /// The final-state constraints this subtask commits to, derived against
    /// the document it is about to edit.
    pub fn implied_constraints(&self, before: &SceneDoc) -> Vec<Constraint> {
        match self.verb {
            Verb::ReplaceText => {
                let original = match &self.target {
                    Selector::Id(t) => before
                        .element(t)
                        .map(|e| e.content_words().iter().map(|w| w.to_string()).collect())
                        .unwrap_or_default(),
                    _ => Vec::new(),
                };
                vec![Constraint::Replace {
                    subject: self.target.clone(),
                    field: ReplaceField::Content,
                    original,
                    new: self.payload.clone(),
                }]
            }
            Verb::Recolor => {
                let original = match &self.target {
                    Selector::Id(t) => before
                        .element(t)
                        .and_then(|e| e.color())
                        .unwrap_or("white")
                        .to_string(),
                    _ => "white".to_string(),
                };
                vec![Constraint::Replace {
                    subject: self.target.clone(),
                    field: ReplaceField::Color,
                    original: vec![original],
                    new: vec![self.payload[0].clone()],
                }]
            }
            Verb::RecolorBackground => vec![Constraint::Replace {
                subject: Selector::Background,
                field: ReplaceField::BackgroundColor,
                original: vec![before.background.color.clone()],
                new: vec![self.payload[0].clone()],
            }],
            Verb::SwapMotif => vec![Constraint::Replace {
                subject: Selector::Background,
                field: ReplaceField::Motif,
                original: vec![before.background.motif.clone()],
                new: vec![self.payload[0].clone()],
            }],
            Verb::AddObject => {
                let rel = RelKind::from_token(&self.payload[2]).unwrap_or(RelKind::Above);
                vec![
                    Constraint::Add {
                        label: self.payload[0].clone(),
                        color: Some(self.payload[1].clone()),
                    },
                    Constraint::Relation {
                        subject: Selector::Label(self.payload[0].clone()),
                        relation: rel,
                        anchor: self.target.clone(),
                    },
                ]
            }
            Verb::RemoveElement => vec![Constraint::Remove {
                subject: self.target.clone(),
            }],
        }
    }
}

// Subtasks serialize as `{id, tokens}` so plan files carry token arrays.
#[derive(Serialize, Deserialize)]
struct SubTaskWire {
    id: String,
    tokens: Vec<String>,
}

impl Serialize for SubTask {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SubTaskWire {
            id: self.id.clone(),
            tokens: self.tokens(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubTask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = SubTaskWire::deserialize(deserializer)?;
        SubTask::parse_tokens(&wire.id, &wire.tokens).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ChecklistGuided,
    Sampled,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub instruction_id: String,
    pub subtasks: Vec<SubTask>,
    pub provenance: Provenance,
}

impl Plan {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.subtasks.is_empty() || self.subtasks.len() > MAX_PLAN_LEN {
            return Err(PlannerError::Parse(format!(
                "plan must hold 1..={MAX_PLAN_LEN} subtasks, got {}",
                self.subtasks.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.subtasks {
            if !seen.insert(&s.id) {
                return Err(PlannerError::Parse(format!("duplicate subtask id {}", s.id)));
            }
            if s.tokens().len() > MAX_SUBTASK_TOKENS {
                return Err(PlannerError::Parse("subtask too long".into()));
            }
        }
        Ok(())
    }

    /// Flat token stream: subtasks joined by `<sub>`, closed by `<eop>`.
    pub fn token_stream(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, s) in self.subtasks.iter().enumerate() {
            if i > 0 {
                out.push(vocab::TOK_SUB.to_string());
            }
            out.extend(s.tokens());
        }
        out.push(vocab::TOK_EOP.to_string());
        out
    }
}

/// Corpus file wrapper (`plan/1`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema: String,
    pub plans: Vec<Plan>,
}

impl PlanFile {
    pub fn new(plans: Vec<Plan>) -> Self {
        PlanFile {
            schema: PLAN_SCHEMA.to_string(),
            plans,
        }
    }
}
