//! Deterministic generator of scene documents, editing instructions, and
//! the checklists derived from them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Background, Checklist, ChecklistItem, Constraint, Element, ElementKind, ElementSnapshot,
    Instance, Instruction, PreserveRef, Rect, RelKind, ReplaceField, SceneDoc, Selector,
    CANVAS_H, CANVAS_W, SCENE_SCHEMA,
};
use crate::util::rng_for;
use crate::vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Small,
    Medium,
}

impl Difficulty {
    pub fn token(&self) -> &'static str {
        match self {
            Difficulty::Small => "small",
            Difficulty::Medium => "medium",
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(Difficulty::Small),
            "medium" => Ok(Difficulty::Medium),
            other => Err(format!("unknown difficulty {other}")),
        }
    }
}

const FESTIVE_MOTIFS: &[&str] = &["fireworks", "lanterns", "snowflakes", "blossoms", "stars", "confetti"];
const FESTIVE_WORDS: &[&str] = &["festival", "harvest", "lunar", "solstice", "winter", "summer"];
const SALE_WORDS: &[&str] = &["sale", "deal", "now", "today", "save", "free"];
const AUDIENCE_WORDS: &[&str] = &["business", "family", "travel", "sport", "city", "garden"];
const DECOR_LABELS: &[&str] = &["wreath", "lantern", "pumpkin", "gift", "flag", "ribbon", "badge"];
const PRODUCT_LABELS: &[&str] = &["soda", "phone", "sneaker", "watch", "burger", "laptop", "car", "bicycle", "sofa", "lamp", "drone", "jacket", "mug"];
const BRAND_WORDS: &[&str] = &["classic", "premium", "fresh", "more"];

/// Extra placement slots beyond the brand/slogan/product anchors.
const EXTRA_SLOTS: &[(i64, i64, i64, i64)] = &[
    (700, 80, 180, 120),
    (720, 600, 200, 200),
    (60, 760, 180, 140),
    (520, 120, 200, 100),
    (700, 350, 220, 160),
    (80, 240, 160, 120),
    (420, 780, 220, 140),
    (640, 830, 200, 120),
    (300, 150, 200, 90),
];

fn jitter_rect(rng: &mut ChaCha8Rng, x: i64, y: i64, w: i64, h: i64) -> Rect {
    let dx: i64 = rng.gen_range(-20..=20);
    let dy: i64 = rng.gen_range(-20..=20);
    let x0 = (x + dx).clamp(0, CANVAS_W - w);
    let y0 = (y + dy).clamp(0, CANVAS_H - h);
    Rect::new(x0, y0, x0 + w, y0 + h)
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn pick_other<'a>(rng: &mut ChaCha8Rng, items: &[&'a str], not: &str) -> &'a str {
    loop {
        let c = pick(rng, items);
        if c != not {
            return c;
        }
    }
}

fn text_element(id: &str, bbox: Rect, layer: u8, words: &[&str], color: &str) -> Element {
    let mut attrs = BTreeMap::new();
    attrs.insert("content".to_string(), words.join(" "));
    attrs.insert("color".to_string(), color.to_string());
    Element {
        id: id.to_string(),
        kind: ElementKind::Text,
        bbox,
        layer,
        attrs,
    }
}

fn object_element(id: &str, kind: ElementKind, bbox: Rect, layer: u8, label: &str, color: &str) -> Element {
    let mut attrs = BTreeMap::new();
    attrs.insert("label".to_string(), label.to_string());
    attrs.insert("color".to_string(), color.to_string());
    Element {
        id: id.to_string(),
        kind,
        bbox,
        layer,
        attrs,
    }
}

/// Pick a relation that `place_with_relation` can realize for a decoration
/// of roughly 200x150 against this anchor.
pub fn feasible_relation(anchor: &Rect) -> RelKind {
    if anchor.y0 >= 220 {
        RelKind::Above
    } else if CANVAS_H - anchor.y1 >= 220 {
        RelKind::Below
    } else if anchor.x0 >= 260 {
        RelKind::LeftOf
    } else {
        RelKind::RightOf
    }
}

struct Builder {
    doc: SceneDoc,
    product: String,
    slogan: String,
    brand: String,
    decor_ids: Vec<String>,
}

fn build_doc(rng: &mut ChaCha8Rng, difficulty: Difficulty) -> Builder {
    let n_elements = match difficulty {
        Difficulty::Small => rng.gen_range(3..=5usize),
        Difficulty::Medium => rng.gen_range(6..=12usize),
    };
    let mut ids: Vec<&str> = vocab::ELEMENT_IDS.to_vec();
    ids.shuffle(rng);

    let bg = Background {
        color: pick(rng, vocab::COLORS).to_string(),
        motif: pick(rng, &["plain", "stripes", "dots", "waves", "gradient", "leaves"]).to_string(),
    };

    let product_id = ids[0].to_string();
    let slogan_id = ids[1].to_string();
    let brand_id = ids[2].to_string();

    let product_label = pick(rng, PRODUCT_LABELS);
    let product_color = pick(rng, vocab::COLORS);
    let slogan_words = [pick(rng, SALE_WORDS), pick(rng, SALE_WORDS)];
    let brand_words = [pick(rng, BRAND_WORDS), pick(rng, BRAND_WORDS)];

    let mut elements = vec![
        object_element(
            &product_id,
            ElementKind::Object,
            jitter_rect(rng, 150, 560, 260, 280),
            1,
            product_label,
            product_color,
        ),
        text_element(
            &slogan_id,
            jitter_rect(rng, 250, 430, 400, 80),
            2,
            &slogan_words,
            pick(rng, vocab::COLORS),
        ),
        text_element(
            &brand_id,
            jitter_rect(rng, 60, 30, 300, 70),
            2,
            &brand_words,
            pick(rng, vocab::COLORS),
        ),
    ];

    let mut decor_ids = Vec::new();
    let mut slots: Vec<(i64, i64, i64, i64)> = EXTRA_SLOTS.to_vec();
    slots.shuffle(rng);
    for i in 3..n_elements {
        let id = ids[i].to_string();
        let (x, y, w, h) = slots[(i - 3) % slots.len()];
        let bbox = jitter_rect(rng, x, y, w, h);
        let roll = rng.gen_range(0..3u8);
        let e = match roll {
            0 => {
                decor_ids.push(id.clone());
                object_element(
                    &id,
                    ElementKind::Decoration,
                    bbox,
                    if rng.gen_bool(0.5) { 0 } else { 3 },
                    pick(rng, DECOR_LABELS),
                    pick(rng, vocab::COLORS),
                )
            }
            1 => {
                let label = pick_other(rng, PRODUCT_LABELS, product_label);
                object_element(&id, ElementKind::Object, bbox, 1, label, pick(rng, vocab::COLORS))
            }
            _ => text_element(
                &id,
                Rect::new(bbox.x0, bbox.y0, bbox.x1, (bbox.y0 + 70).min(bbox.y1)),
                2,
                &[pick(rng, SALE_WORDS), pick(rng, AUDIENCE_WORDS)],
                pick(rng, vocab::COLORS),
            ),
        };
        elements.push(e);
    }

    let doc = SceneDoc {
        width: CANVAS_W,
        height: CANVAS_H,
        background: bg,
        elements,
        defects: Vec::new(),
    };
    Builder {
        doc,
        product: product_id,
        slogan: slogan_id,
        brand: brand_id,
        decor_ids,
    }
}

/// A label no current element carries, so add-constraints start unsatisfied.
fn fresh_label<'a>(rng: &mut ChaCha8Rng, doc: &SceneDoc, pool: &[&'a str]) -> &'a str {
    let mut tries = 0;
    loop {
        let l = pick(rng, pool);
        if doc.elements.iter().all(|e| e.label() != Some(l)) {
            return l;
        }
        tries += 1;
        if tries > 64 {
            return l;
        }
    }
}

fn build_goal(
    rng: &mut ChaCha8Rng,
    b: &Builder,
    category: &str,
    difficulty: Difficulty,
) -> (Vec<String>, Vec<Constraint>) {
    let doc = &b.doc;
    let medium = difficulty == Difficulty::Medium;
    let mut goal = Vec::new();
    let mut params = Vec::new();

    let slogan_el = doc.element(&b.slogan).unwrap();
    let product_el = doc.element(&b.product).unwrap();
    let brand_el = doc.element(&b.brand).unwrap();
    let old_slogan: Vec<String> = slogan_el.content_words().iter().map(|s| s.to_string()).collect();

    match category {
        "festival-adapt" => {
            let motif = pick_other(rng, FESTIVE_MOTIFS, &doc.background.motif);
            let words = vec![pick(rng, FESTIVE_WORDS).to_string(), pick(rng, SALE_WORDS).to_string()];
            let decor = fresh_label(rng, doc, DECOR_LABELS);
            let decor_color = pick(rng, &["gold", "red", "green", "silver", "crimson"]);
            params.extend([motif.to_string(), words[0].clone(), decor.to_string()]);
            goal.push(Constraint::Replace {
                subject: Selector::Background,
                field: ReplaceField::Motif,
                original: vec![doc.background.motif.clone()],
                new: vec![motif.to_string()],
            });
            goal.push(Constraint::Replace {
                subject: Selector::Id(b.slogan.clone()),
                field: ReplaceField::Content,
                original: old_slogan,
                new: words,
            });
            goal.push(Constraint::Add {
                label: decor.to_string(),
                color: Some(decor_color.to_string()),
            });
            if medium {
                goal.push(Constraint::Relation {
                    subject: Selector::Label(decor.to_string()),
                    relation: feasible_relation(&product_el.bbox),
                    anchor: Selector::Id(b.product.clone()),
                });
                goal.push(Constraint::Preserve {
                    subject: Selector::Id(b.brand.clone()),
                    reference: PreserveRef::Element(ElementSnapshot::of(brand_el)),
                });
                if rng.gen_bool(0.5) {
                    let new_color = pick_other(rng, vocab::COLORS, product_el.color().unwrap_or(""));
                    goal.push(Constraint::Replace {
                        subject: Selector::Id(b.product.clone()),
                        field: ReplaceField::Color,
                        original: vec![product_el.color().unwrap_or("white").to_string()],
                        new: vec![new_color.to_string()],
                    });
                }
            }
        }
        "audience-retarget" => {
            let audience = pick(rng, AUDIENCE_WORDS);
            let words = vec![audience.to_string(), pick_other(rng, SALE_WORDS, &old_slogan.first().cloned().unwrap_or_default()).to_string()];
            let new_color = pick_other(rng, vocab::COLORS, product_el.color().unwrap_or(""));
            let extra = fresh_label(rng, doc, PRODUCT_LABELS);
            params.extend([audience.to_string(), new_color.to_string(), extra.to_string()]);
            goal.push(Constraint::Replace {
                subject: Selector::Id(b.slogan.clone()),
                field: ReplaceField::Content,
                original: old_slogan,
                new: words,
            });
            goal.push(Constraint::Replace {
                subject: Selector::Id(b.product.clone()),
                field: ReplaceField::Color,
                original: vec![product_el.color().unwrap_or("white").to_string()],
                new: vec![new_color.to_string()],
            });
            goal.push(Constraint::Add {
                label: extra.to_string(),
                color: Some(pick(rng, vocab::COLORS).to_string()),
            });
            if medium {
                goal.push(Constraint::Relation {
                    subject: Selector::Label(extra.to_string()),
                    relation: feasible_relation(&product_el.bbox),
                    anchor: Selector::Id(b.product.clone()),
                });
                goal.push(Constraint::Preserve {
                    subject: Selector::Id(b.brand.clone()),
                    reference: PreserveRef::Element(ElementSnapshot::of(brand_el)),
                });
                // Removal targets a label carried by exactly one element, so
                // the constraint survives element-id recycling.
                let removable = b.decor_ids.iter().find_map(|id| {
                    let label = doc.element(id)?.label()?;
                    let unique = doc.elements.iter().filter(|e| e.label() == Some(label)).count() == 1;
                    unique.then(|| label.to_string())
                });
                if let Some(label) = removable {
                    if rng.gen_bool(0.5) {
                        goal.push(Constraint::Remove {
                            subject: Selector::Label(label),
                        });
                    }
                }
            }
        }
        _ => {
            // product-swap
            let new_label = fresh_label(rng, doc, PRODUCT_LABELS);
            let new_color = pick(rng, vocab::COLORS);
            let words = vec![pick(rng, &["new", "fresh", "premium", "classic"]).to_string(), pick(rng, SALE_WORDS).to_string()];
            params.extend([new_label.to_string(), new_color.to_string()]);
            let old_label = product_el.label().unwrap_or("soda").to_string();
            goal.push(Constraint::Remove {
                subject: Selector::Label(old_label),
            });
            goal.push(Constraint::Add {
                label: new_label.to_string(),
                color: Some(new_color.to_string()),
            });
            goal.push(Constraint::Replace {
                subject: Selector::Id(b.slogan.clone()),
                field: ReplaceField::Content,
                original: old_slogan,
                new: words,
            });
            if medium {
                goal.push(Constraint::Relation {
                    subject: Selector::Label(new_label.to_string()),
                    relation: feasible_relation(&brand_el.bbox),
                    anchor: Selector::Id(b.brand.clone()),
                });
                goal.push(Constraint::Preserve {
                    subject: Selector::Background,
                    reference: PreserveRef::Background(doc.background.clone()),
                });
            }
        }
    }
    (params, goal)
}

fn checklist_for(goal: &[Constraint]) -> Checklist {
    let items = goal
        .iter()
        .map(|c| {
            let detail: Vec<String> = match c {
                Constraint::Preserve { subject, .. } => subject_tokens(subject),
                Constraint::Remove { subject } => subject_tokens(subject),
                Constraint::Replace {
                    subject, field, new, ..
                } => {
                    let mut d = subject_tokens(subject);
                    d.push(field_token(field).to_string());
                    d.extend(new.iter().cloned());
                    d
                }
                Constraint::Add { label, color } => {
                    let mut d = vec![label.clone()];
                    if let Some(c) = color {
                        d.push(c.clone());
                    }
                    d
                }
                Constraint::Relation {
                    subject,
                    relation,
                    anchor,
                } => {
                    let mut d = subject_tokens(subject);
                    d.push(relation.token().to_string());
                    d.extend(subject_tokens(anchor));
                    d
                }
            };
            ChecklistItem {
                criterion: c.kind_token().to_string(),
                detail,
            }
        })
        .collect();
    Checklist { items }
}

fn subject_tokens(s: &Selector) -> Vec<String> {
    match s {
        Selector::Id(t) => vec![t.clone()],
        Selector::Background => vec![vocab::SEL_BACKGROUND.to_string()],
        Selector::Label(l) => vec![l.clone()],
    }
}

fn field_token(f: &ReplaceField) -> &'static str {
    match f {
        ReplaceField::Content => "content",
        ReplaceField::Color => "color",
        ReplaceField::Motif => "motif",
        ReplaceField::BackgroundColor => "bg_color",
    }
}

/// Build one deterministic task instance. Total in (seed, difficulty).
pub fn generate_instance(seed: u64, difficulty: Difficulty) -> Instance {
    let mut rng = rng_for(seed, &["instance", "docgen", difficulty.token()]);
    let category = vocab::INSTRUCTION_CATEGORIES[rng.gen_range(0..vocab::INSTRUCTION_CATEGORIES.len())];
    let builder = build_doc(&mut rng, difficulty);
    let (params, goal) = build_goal(&mut rng, &builder, category, difficulty);
    let checklist = checklist_for(&goal);
    let instance = Instance {
        schema: SCENE_SCHEMA.to_string(),
        id: format!("{}-{seed:08x}", difficulty.token()),
        doc: builder.doc,
        instruction: Instruction {
            category: category.to_string(),
            params,
            goal_spec: goal,
        },
        checklist,
    };
    debug_assert!(instance.validate().is_ok(), "generated instance invalid");
    instance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::canonical_json;

    #[test]
    fn deterministic_in_seed() {
        let a = generate_instance(0, Difficulty::Small);
        let b = generate_instance(0, Difficulty::Small);
        assert_eq!(canonical_json(&a), canonical_json(&b));
    }

    #[test]
    fn seeds_produce_distinct_id_sets() {
        let ids = |inst: &Instance| -> Vec<String> {
            let mut v: Vec<String> = inst.doc.elements.iter().map(|e| e.id.clone()).collect();
            v.sort();
            v
        };
        let a = generate_instance(1, Difficulty::Small);
        let b = generate_instance(2, Difficulty::Small);
        assert_ne!(ids(&a), ids(&b));

        // Adjacent-seed collision sweep.
        let mut distinct = 0;
        let mut total = 0;
        let mut prev = ids(&generate_instance(0, Difficulty::Small));
        for seed in 1..1000u64 {
            let cur = ids(&generate_instance(seed, Difficulty::Small));
            total += 1;
            if cur != prev {
                distinct += 1;
            }
            prev = cur;
        }
        assert!(
            distinct as f64 / total as f64 > 0.99,
            "adjacent seeds collide too often: {distinct}/{total}"
        );
    }

    #[test]
    fn instances_validate_across_seeds() {
        for seed in 0..200u64 {
            generate_instance(seed, Difficulty::Small).validate().unwrap();
            generate_instance(seed, Difficulty::Medium).validate().unwrap();
        }
    }

    #[test]
    fn small_instances_stay_small() {
        for seed in 0..200u64 {
            let inst = generate_instance(seed, Difficulty::Small);
            assert!((3..=5).contains(&inst.doc.elements.len()));
            let actionable = inst
                .instruction
                .goal_spec
                .iter()
                .filter(|c| !matches!(c, Constraint::Preserve { .. } | Constraint::Relation { .. }))
                .count();
            assert!(actionable <= 3, "seed {seed} actionable {actionable}");
        }
        for seed in 0..200u64 {
            let inst = generate_instance(seed, Difficulty::Medium);
            assert!((3..=12).contains(&inst.doc.elements.len()));
            assert!(inst.checklist.items.len() <= 12);
        }
    }

    #[test]
    fn serialization_round_trips() {
        for seed in [0u64, 7, 99] {
            for d in [Difficulty::Small, Difficulty::Medium] {
                let inst = generate_instance(seed, d);
                let json = canonical_json(&inst);
                let back: Instance = serde_json::from_str(&json).unwrap();
                assert_eq!(inst, back);
                assert_eq!(canonical_json(&back), json);
            }
        }
    }
}
