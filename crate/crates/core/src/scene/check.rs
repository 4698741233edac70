//! Decidable goal checks: constraint satisfaction, untouched-element diff,
//! and the canonical effect executor used by oracles.

use std::collections::BTreeMap;

use super::{
    Constraint, Element, ElementKind, PreserveRef, Rect, RelKind, ReplaceField, SceneDoc,
    SceneError, Selector,
};

fn constraint_holds(doc: &SceneDoc, c: &Constraint) -> Result<bool, SceneError> {
    Ok(match c {
        Constraint::Preserve { subject, reference } => match (subject, reference) {
            (Selector::Background, PreserveRef::Background(b)) => doc.background == *b,
            (sel, PreserveRef::Element(snap)) => {
                sel.check_lexical()?;
                sel.resolve(doc).iter().any(|e| snap.matches(e))
            }
            _ => false,
        },
        Constraint::Remove { subject } => {
            subject.check_lexical()?;
            subject.resolve(doc).is_empty()
        }
        Constraint::Replace {
            subject,
            field,
            original,
            new,
        } => {
            match field {
                ReplaceField::Motif => doc.background.motif == new[0],
                ReplaceField::BackgroundColor => doc.background.color == new[0],
                ReplaceField::Content => {
                    subject.check_lexical()?;
                    subject.resolve(doc).iter().any(|e| {
                        let words: Vec<&str> = e.content_words();
                        let wanted: Vec<&str> = new.iter().map(String::as_str).collect();
                        let old: Vec<&str> = original.iter().map(String::as_str).collect();
                        words == wanted && words != old
                    })
                }
                ReplaceField::Color => {
                    subject.check_lexical()?;
                    subject
                        .resolve(doc)
                        .iter()
                        .any(|e| e.color() == Some(new[0].as_str()))
                }
            }
        }
        Constraint::Add { label, color } => doc.elements.iter().any(|e| {
            e.label() == Some(label.as_str())
                && color
                    .as_ref()
                    .map(|c| e.color() == Some(c.as_str()))
                    .unwrap_or(true)
        }),
        Constraint::Relation {
            subject,
            relation,
            anchor,
        } => {
            subject.check_lexical()?;
            anchor.check_lexical()?;
            let subjects = subject.resolve(doc);
            let anchors = anchor.resolve(doc);
            subjects
                .iter()
                .any(|s| anchors.iter().any(|a| relation.holds(&s.bbox, &a.bbox)))
        }
    })
}

/// Fraction of goal constraints the document satisfies.
pub fn constraint_satisfaction(doc: &SceneDoc, goal: &[Constraint]) -> Result<f64, SceneError> {
    if goal.is_empty() {
        return Err(SceneError::EmptyGoal);
    }
    let mut satisfied = 0usize;
    for c in goal {
        if constraint_holds(doc, c)? {
            satisfied += 1;
        }
    }
    Ok(satisfied as f64 / goal.len() as f64)
}

/// Fraction of `before`'s elements outside `edited_subjects` that survive
/// into `after` attribute- and bbox-identical. An empty denominator counts
/// as fully preserved.
pub fn diff_untouched(before: &SceneDoc, after: &SceneDoc, edited_subjects: &[Selector]) -> f64 {
    let untouched: Vec<&Element> = before
        .elements
        .iter()
        .filter(|e| !edited_subjects.iter().any(|s| s.matches_element(e)))
        .collect();
    if untouched.is_empty() {
        return 1.0;
    }
    let intact = untouched
        .iter()
        .filter(|e| after.element(&e.id).map(|a| a == **e).unwrap_or(false))
        .count();
    intact as f64 / untouched.len() as f64
}

/// Default bbox for canonically added elements (center block).
fn default_add_bbox() -> Rect {
    Rect::new(400, 400, 600, 600)
}

/// Apply the canonical effect of one constraint and return the new document.
///
/// This is the reference executor: it performs exactly the change the
/// constraint asks for and nothing else. Preserve constraints are no-ops;
/// relation constraints move their subject next to the anchor.
pub fn apply_constraint_effect(doc: &SceneDoc, c: &Constraint) -> SceneDoc {
    let mut out = doc.clone();
    match c {
        Constraint::Preserve { .. } => {}
        Constraint::Remove { subject } => {
            let ids: Vec<String> = subject.resolve(&out).iter().map(|e| e.id.clone()).collect();
            for id in ids {
                out.remove_element(&id);
            }
        }
        Constraint::Replace {
            subject,
            field,
            new,
            ..
        } => match field {
            ReplaceField::Motif => out.background.motif = new[0].clone(),
            ReplaceField::BackgroundColor => out.background.color = new[0].clone(),
            ReplaceField::Content => {
                let ids: Vec<String> =
                    subject.resolve(&out).iter().map(|e| e.id.clone()).collect();
                for id in ids {
                    if let Some(e) = out.element_mut(&id) {
                        e.attrs.insert("content".into(), new.join(" "));
                    }
                }
            }
            ReplaceField::Color => {
                let ids: Vec<String> =
                    subject.resolve(&out).iter().map(|e| e.id.clone()).collect();
                for id in ids {
                    if let Some(e) = out.element_mut(&id) {
                        e.attrs.insert("color".into(), new[0].clone());
                    }
                }
            }
        },
        Constraint::Add { label, color } => {
            if let Some(id) = out.unused_id() {
                let mut attrs = BTreeMap::new();
                attrs.insert("label".to_string(), label.clone());
                attrs.insert(
                    "color".to_string(),
                    color.clone().unwrap_or_else(|| "white".to_string()),
                );
                out.elements.push(Element {
                    id: id.to_string(),
                    kind: ElementKind::Object,
                    bbox: default_add_bbox(),
                    layer: 3,
                    attrs,
                });
            }
        }
        Constraint::Relation {
            subject,
            relation,
            anchor,
        } => {
            let anchor_bbox = anchor.resolve(&out).first().map(|e| e.bbox);
            let subj_ids: Vec<String> =
                subject.resolve(&out).iter().map(|e| e.id.clone()).collect();
            if let (Some(ab), Some(id)) = (anchor_bbox, subj_ids.first()) {
                if let Some(e) = out.element_mut(id) {
                    e.bbox = place_with_relation(&e.bbox, relation, &ab);
                }
            }
        }
    }
    out.normalize();
    out
}

/// A bbox of the subject's size positioned so `relation` holds against the
/// anchor, clamped to the canvas.
pub fn place_with_relation(subject: &Rect, relation: &RelKind, anchor: &Rect) -> Rect {
    let w = subject.x1 - subject.x0;
    let h = subject.y1 - subject.y0;
    let clamp = |x0: i64, y0: i64, w: i64, h: i64| -> Rect {
        let x0 = x0.clamp(0, super::CANVAS_W - w);
        let y0 = y0.clamp(0, super::CANVAS_H - h);
        Rect::new(x0, y0, x0 + w, y0 + h)
    };
    match relation {
        RelKind::Above => clamp(anchor.x0, anchor.y0 - h - 10, w, h),
        RelKind::Below => clamp(anchor.x0, anchor.y1 + 10, w, h),
        RelKind::LeftOf => clamp(anchor.x0 - w - 10, anchor.y0, w, h),
        RelKind::RightOf => clamp(anchor.x1 + 10, anchor.y0, w, h),
        RelKind::Inside => {
            let w = w.min(anchor.x1 - anchor.x0 - 2).max(1);
            let h = h.min(anchor.y1 - anchor.y0 - 2).max(1);
            let x0 = anchor.x0 + 1;
            let y0 = anchor.y0 + 1;
            Rect::new(x0, y0, x0 + w, y0 + h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::gen::{generate_instance, Difficulty};
    use super::*;

    fn sample() -> SceneDoc {
        generate_instance(3, Difficulty::Small).doc
    }

    #[test]
    fn diff_untouched_identity_is_one() {
        let d = sample();
        assert_eq!(diff_untouched(&d, &d, &[]), 1.0);
        assert_eq!(
            diff_untouched(&d, &d, &[Selector::Id(d.elements[0].id.clone())]),
            1.0
        );
    }

    #[test]
    fn diff_untouched_total_recolor_is_zero() {
        let before = sample();
        let mut after = before.clone();
        for e in &mut after.elements {
            let flipped = if e.color() == Some("drab") { "ivory" } else { "drab" };
            e.attrs.insert("color".into(), flipped.into());
        }
        assert_eq!(diff_untouched(&before, &after, &[]), 0.0);
    }

    #[test]
    fn diff_untouched_counts_single_drift() {
        let mut before = sample();
        // Force exactly five untouched elements.
        while before.elements.len() < 5 {
            let id = before.unused_id().unwrap().to_string();
            let mut attrs = BTreeMap::new();
            attrs.insert("label".into(), "badge".into());
            attrs.insert("color".into(), "white".into());
            let n = before.elements.len() as i64;
            before.elements.push(Element {
                id,
                kind: ElementKind::Decoration,
                bbox: Rect::new(10 + 150 * n, 10, 100 + 150 * n, 100),
                layer: 0,
                attrs,
            });
        }
        before.elements.truncate(5);
        let mut after = before.clone();
        after.elements[2].attrs.insert("color".into(), "drab".into());
        assert!((diff_untouched(&before, &after, &[]) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unsatisfied_adds_score_zero() {
        let d = sample();
        let goal = vec![
            Constraint::Add {
                label: "wreath".into(),
                color: None,
            },
            Constraint::Add {
                label: "gift".into(),
                color: None,
            },
            Constraint::Add {
                label: "flag".into(),
                color: None,
            },
        ];
        // The generator never emits these labels as initial elements here.
        assert_eq!(constraint_satisfaction(&d, &goal).unwrap(), 0.0);
    }

    #[test]
    fn all_preserve_identity_scores_one() {
        let d = sample();
        let goal: Vec<Constraint> = d
            .elements
            .iter()
            .map(|e| Constraint::Preserve {
                subject: Selector::Id(e.id.clone()),
                reference: PreserveRef::Element(super::super::ElementSnapshot::of(e)),
            })
            .collect();
        assert_eq!(constraint_satisfaction(&d, &goal).unwrap(), 1.0);
    }

    #[test]
    fn half_applied_goal_scores_half() {
        let mut base = sample();
        base.elements.retain(|e| e.kind != ElementKind::Decoration);
        let goal: Vec<Constraint> = ["wreath", "gift", "flag", "pumpkin"]
            .iter()
            .map(|l| Constraint::Add {
                label: l.to_string(),
                color: None,
            })
            .collect();
        let mut doc = base.clone();
        for c in goal.iter().take(2) {
            doc = apply_constraint_effect(&doc, c);
        }
        assert_eq!(constraint_satisfaction(&base, &goal).unwrap(), 0.0);
        assert_eq!(constraint_satisfaction(&doc, &goal).unwrap(), 0.5);
    }

    #[test]
    fn empty_goal_is_an_error() {
        let d = sample();
        assert_eq!(constraint_satisfaction(&d, &[]), Err(SceneError::EmptyGoal));
    }

    #[test]
    fn bad_selector_token_is_selector_error() {
        let d = sample();
        let goal = vec![Constraint::Remove {
            subject: Selector::Id("zz".into()),
        }];
        assert!(matches!(
            constraint_satisfaction(&d, &goal),
            Err(SceneError::Selector(_))
        ));
    }

    #[test]
    fn applying_effects_is_monotone() {
        for seed in 0..30u64 {
            let inst = generate_instance(seed, Difficulty::Medium);
            let goal = &inst.instruction.goal_spec;
            let mut doc = inst.doc.clone();
            let mut prev = constraint_satisfaction(&doc, goal).unwrap();
            for c in goal {
                doc = apply_constraint_effect(&doc, c);
                let cur = constraint_satisfaction(&doc, goal).unwrap();
                assert!(
                    cur >= prev - 1e-12,
                    "seed {seed}: score dropped {prev} -> {cur} after {c:?}"
                );
                prev = cur;
            }
            assert!((prev - 1.0).abs() < 1e-12, "seed {seed}: goal not fully satisfied");
        }
    }
}
