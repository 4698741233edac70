//! The scene-document world: canvases of layered elements standing in for
//! advertisement images, plus the instructions and checklists that drive
//! editing episodes.
//!
//! All types are immutable values in practice: operations take documents by
//! reference and return fresh ones. Serialization is canonical JSON.

mod check;
mod gen;

pub use check::{
    apply_constraint_effect, constraint_satisfaction, diff_untouched, place_with_relation,
};
pub use gen::{feasible_relation, generate_instance, Difficulty};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::{self, Vocab};

pub const CANVAS_W: i64 = 1000;
pub const CANVAS_H: i64 = 1000;
/// Region edits act on masks dilated by this many canvas units.
pub const MASK_DILATION: i64 = 100;
/// Layer bands 0..=3.
pub const LAYER_BANDS: u8 = 4;

pub const SCENE_SCHEMA: &str = "scene/1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SceneError {
    #[error("selector-error: {0}")]
    Selector(String),
    #[error("empty goal")]
    EmptyGoal,
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// Axis-aligned rectangle in canvas units, `x0 < x1`, `y0 < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        debug_assert!(x0 < x1 && y0 < y1, "degenerate rect {x0},{y0},{x1},{y1}");
        Rect { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> i64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    /// Grow by `d` on all sides, clamped to the canvas.
    pub fn dilate(&self, d: i64) -> Rect {
        Rect {
            x0: (self.x0 - d).max(0),
            y0: (self.y0 - d).max(0),
            x1: (self.x1 + d).min(CANVAS_W),
            y1: (self.y1 + d).min(CANVAS_H),
        }
    }

    pub fn within_canvas(&self) -> bool {
        self.x0 >= 0 && self.y0 >= 0 && self.x1 <= CANVAS_W && self.y1 <= CANVAS_H
    }
}

/// A mask is a rectangle or a union of rectangles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mask {
    Rect(Rect),
    Union(Vec<Rect>),
}

impl Mask {
    pub fn rects(&self) -> &[Rect] {
        match self {
            Mask::Rect(r) => std::slice::from_ref(r),
            Mask::Union(rs) => rs,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rects().is_empty()
    }

    pub fn intersects_dilated(&self, bbox: &Rect, d: i64) -> bool {
        self.rects().iter().any(|r| r.dilate(d).intersects(bbox))
    }

    /// True when `bbox` lies entirely inside some single dilated rect.
    pub fn swallows_dilated(&self, bbox: &Rect, d: i64) -> bool {
        self.rects().iter().any(|r| r.dilate(d).contains_rect(bbox))
    }

    /// Bounding rectangle of the whole mask (None when empty).
    pub fn bounding(&self) -> Option<Rect> {
        let rs = self.rects();
        let first = rs.first()?;
        let mut b = *first;
        for r in &rs[1..] {
            b.x0 = b.x0.min(r.x0);
            b.y0 = b.y0.min(r.y0);
            b.x1 = b.x1.max(r.x1);
            b.y1 = b.y1.max(r.y1);
        }
        Some(b)
    }

    pub fn within_canvas(&self) -> bool {
        self.rects().iter().all(Rect::within_canvas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Text,
    Object,
    Decoration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub kind: ElementKind,
    pub bbox: Rect,
    pub layer: u8,
    /// Closed attribute schema per kind: text carries `content` (and
    /// `color`), objects and decorations carry `label` and `color`.
    pub attrs: BTreeMap<String, String>,
}

impl Element {
    pub fn content_words(&self) -> Vec<&str> {
        self.attrs
            .get("content")
            .map(|c| c.split(' ').collect())
            .unwrap_or_default()
    }

    pub fn label(&self) -> Option<&str> {
        self.attrs.get("label").map(String::as_str)
    }

    pub fn color(&self) -> Option<&str> {
        self.attrs.get("color").map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Background {
    pub color: String,
    pub motif: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    GarbledText,
    Seam,
    Clutter,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectAnchor {
    Element(String),
    Region(Rect),
}

/// A visual-quality blemish injected by a tool, bound to an element or a
/// rectangle. Stored as a sorted multiset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DefectTag {
    pub kind: DefectKind,
    pub anchor: DefectAnchor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDoc {
    pub width: i64,
    pub height: i64,
    pub background: Background,
    pub elements: Vec<Element>,
    pub defects: Vec<DefectTag>,
}

impl SceneDoc {
    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn element_mut(&mut self, id: &str) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.id == id)
    }

    pub fn remove_element(&mut self, id: &str) -> bool {
        let before = self.elements.len();
        self.elements.retain(|e| e.id != id);
        self.elements.len() != before
    }

    /// Keep the defect multiset in canonical sorted order.
    pub fn normalize(&mut self) {
        self.defects.sort();
    }

    /// First id token from the pool that no current element uses.
    pub fn unused_id(&self) -> Option<&'static str> {
        vocab::ELEMENT_IDS
            .iter()
            .copied()
            .find(|cand| self.elements.iter().all(|e| e.id != *cand))
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.width <= 0 || self.height <= 0 {
            return Err(SceneError::Invalid("non-positive canvas".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.elements {
            if !e.bbox.within_canvas() {
                return Err(SceneError::Invalid(format!("element {} out of canvas", e.id)));
            }
            if e.layer >= LAYER_BANDS {
                return Err(SceneError::Invalid(format!("element {} bad layer", e.id)));
            }
            if !seen.insert(&e.id) {
                return Err(SceneError::Invalid(format!("duplicate element id {}", e.id)));
            }
            if e.kind == ElementKind::Text && !e.attrs.contains_key("content") {
                return Err(SceneError::Invalid(format!("text {} missing content", e.id)));
            }
        }
        Ok(())
    }
}

/// Reference to an element, the background, or a labelled (possibly
/// to-be-added) element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Id(String),
    Background,
    Label(String),
}

impl Selector {
    /// Validity is purely lexical: id tokens must come from the element-id
    /// pool and labels from the label vocabulary.
    pub fn check_lexical(&self) -> Result<(), SceneError> {
        match self {
            Selector::Id(t) if !vocab::ELEMENT_IDS.contains(&t.as_str()) => {
                Err(SceneError::Selector(format!("unknown id token {t}")))
            }
            Selector::Label(l) if !vocab::LABELS.contains(&l.as_str()) => {
                Err(SceneError::Selector(format!("unknown label token {l}")))
            }
            _ => Ok(()),
        }
    }

    /// Elements of `doc` this selector denotes.
    pub fn resolve<'d>(&self, doc: &'d SceneDoc) -> Vec<&'d Element> {
        match self {
            Selector::Id(t) => doc.element(t).into_iter().collect(),
            Selector::Background => Vec::new(),
            Selector::Label(l) => doc
                .elements
                .iter()
                .filter(|e| e.label() == Some(l.as_str()))
                .collect(),
        }
    }

    pub fn matches_element(&self, e: &Element) -> bool {
        match self {
            Selector::Id(t) => e.id == *t,
            Selector::Background => false,
            Selector::Label(l) => e.label() == Some(l.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelKind {
    Above,
    Below,
    LeftOf,
    RightOf,
    Inside,
}

impl RelKind {
    pub fn token(&self) -> &'static str {
        match self {
            RelKind::Above => "above",
            RelKind::Below => "below",
            RelKind::LeftOf => "left_of",
            RelKind::RightOf => "right_of",
            RelKind::Inside => "inside",
        }
    }

    pub fn from_token(t: &str) -> Option<RelKind> {
        Some(match t {
            "above" => RelKind::Above,
            "below" => RelKind::Below,
            "left_of" => RelKind::LeftOf,
            "right_of" => RelKind::RightOf,
            "inside" => RelKind::Inside,
            _ => return None,
        })
    }

    pub fn holds(&self, a: &Rect, b: &Rect) -> bool {
        match self {
            RelKind::Above => a.y1 <= b.y0,
            RelKind::Below => a.y0 >= b.y1,
            RelKind::LeftOf => a.x1 <= b.x0,
            RelKind::RightOf => a.x0 >= b.x1,
            RelKind::Inside => b.contains_rect(a),
        }
    }
}

/// Which attribute a replace constraint rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplaceField {
    Content,
    Color,
    Motif,
    BackgroundColor,
}

/// Frozen copy of an element used by preserve checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSnapshot {
    pub kind: ElementKind,
    pub bbox: Rect,
    pub layer: u8,
    pub attrs: BTreeMap<String, String>,
}

impl ElementSnapshot {
    pub fn of(e: &Element) -> Self {
        ElementSnapshot {
            kind: e.kind,
            bbox: e.bbox,
            layer: e.layer,
            attrs: e.attrs.clone(),
        }
    }

    pub fn matches(&self, e: &Element) -> bool {
        self.kind == e.kind && self.bbox == e.bbox && self.layer == e.layer && self.attrs == e.attrs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreserveRef {
    Element(ElementSnapshot),
    Background(Background),
}

/// One atomic final-state requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Constraint {
    Preserve {
        subject: Selector,
        reference: PreserveRef,
    },
    Remove {
        subject: Selector,
    },
    Replace {
        subject: Selector,
        field: ReplaceField,
        original: Vec<String>,
        new: Vec<String>,
    },
    Add {
        label: String,
        color: Option<String>,
    },
    Relation {
        subject: Selector,
        relation: RelKind,
        anchor: Selector,
    },
}

impl Constraint {
    pub fn kind_token(&self) -> &'static str {
        match self {
            Constraint::Preserve { .. } => "preserve",
            Constraint::Remove { .. } => "remove",
            Constraint::Replace { .. } => "replace",
            Constraint::Add { .. } => "add",
            Constraint::Relation { .. } => "relation",
        }
    }

    /// The selector an edit of this constraint is allowed to touch, if any.
    pub fn edited_subject(&self) -> Option<Selector> {
        match self {
            Constraint::Preserve { .. } => None,
            Constraint::Remove { subject } => Some(subject.clone()),
            Constraint::Replace { subject, .. } => Some(subject.clone()),
            Constraint::Add { label, .. } => Some(Selector::Label(label.clone())),
            Constraint::Relation { subject, .. } => Some(subject.clone()),
        }
    }
}

/// Subjects of all non-preserve constraints: the parts of the document an
/// edit is entitled to change.
pub fn edited_subjects(goal: &[Constraint]) -> Vec<Selector> {
    let mut out: Vec<Selector> = goal.iter().filter_map(Constraint::edited_subject).collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub criterion: String,
    pub detail: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checklist {
    pub items: Vec<ChecklistItem>,
}

impl Checklist {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.items.is_empty() || self.items.len() > 12 {
            return Err(SceneError::Invalid(format!(
                "checklist must hold 1..=12 items, got {}",
                self.items.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for it in &self.items {
            if !seen.insert((it.criterion.clone(), it.detail.clone())) {
                return Err(SceneError::Invalid("duplicate checklist item".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub category: String,
    pub params: Vec<String>,
    pub goal_spec: Vec<Constraint>,
}

impl Instruction {
    pub fn category_index(&self) -> u8 {
        vocab::INSTRUCTION_CATEGORIES
            .iter()
            .position(|c| *c == self.category)
            .unwrap_or(0) as u8
    }
}

/// One complete task: a document, the instruction over it, and the
/// checklist derived from the instruction's goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub schema: String,
    pub id: String,
    pub doc: SceneDoc,
    pub instruction: Instruction,
    pub checklist: Checklist,
}

impl Instance {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.schema != SCENE_SCHEMA {
            return Err(SceneError::Invalid(format!("unknown schema {}", self.schema)));
        }
        self.doc.validate()?;
        if self.instruction.goal_spec.is_empty() {
            return Err(SceneError::EmptyGoal);
        }
        for c in &self.instruction.goal_spec {
            if let Some(s) = c.edited_subject() {
                s.check_lexical()?;
            }
        }
        self.checklist.validate()
    }
}

/// Snap a coordinate down to the 10%-step grid (100 canvas units).
pub fn grid_floor(v: i64) -> i64 {
    (v.div_euclid(100)) * 100
}

/// Snap a coordinate up to the 10%-step grid.
pub fn grid_ceil(v: i64) -> i64 {
    ((v + 99).div_euclid(100)) * 100
}

/// Token id sanity for content words (used by attr schema checks).
pub fn is_content_word(w: &str) -> bool {
    vocab::CONTENT_WORDS.contains(&w)
}

pub fn vocab_size() -> usize {
    Vocab::global().len()
}
