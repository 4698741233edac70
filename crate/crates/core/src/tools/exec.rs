//! Simulated tool dynamics.
//!
//! The region editor touches only elements intersecting the selected mask
//! dilated by `MASK_DILATION`; everything outside stays bit-identical.
//! Global editors apply the verb document-wide and may drift elements near
//! the edited area or inject defects, per their fidelity profile.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    is_analysis, is_global_editor, is_registered, ProfileSet, RegionProposal, ToolCall, ToolError,
    GLOBAL_EDITOR_A, REGION_EDITOR,
};
use crate::planner::{SubTask, Verb};
use crate::scene::{
    DefectAnchor, DefectKind, DefectTag, Element, ElementKind, Mask, Rect, SceneDoc, CANVAS_H,
    CANVAS_W, MASK_DILATION,
};
use crate::util::rng_for;
use crate::vocab::{DRAB, GARBLED};

fn drift(e: &mut Element) {
    if e.kind == ElementKind::Text {
        e.attrs.insert("content".into(), GARBLED.to_string());
    } else {
        e.attrs.insert("color".into(), DRAB.to_string());
    }
}

fn coin(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.gen::<f64>() < p
}

fn add_element(out: &mut SceneDoc, bbox: Rect, label: &str, color: &str) {
    if let Some(id) = out.unused_id() {
        let mut attrs = BTreeMap::new();
        attrs.insert("label".to_string(), label.to_string());
        attrs.insert("color".to_string(), color.to_string());
        out.elements.push(Element {
            id: id.to_string(),
            kind: ElementKind::Object,
            bbox,
            layer: 3,
            attrs,
        });
    }
}

fn apply_intended_on_targets(out: &mut SceneDoc, subtask: &SubTask, target_ids: &[String]) {
    match subtask.verb {
        Verb::ReplaceText => {
            for id in target_ids {
                if let Some(e) = out.element_mut(id) {
                    if e.kind == ElementKind::Text {
                        e.attrs.insert("content".into(), subtask.payload.join(" "));
                    }
                }
            }
        }
        Verb::Recolor => {
            for id in target_ids {
                if let Some(e) = out.element_mut(id) {
                    e.attrs.insert("color".into(), subtask.payload[0].clone());
                }
            }
        }
        Verb::RemoveElement => {
            for id in target_ids {
                out.remove_element(id);
            }
        }
        Verb::RecolorBackground => out.background.color = subtask.payload[0].clone(),
        Verb::SwapMotif => out.background.motif = subtask.payload[0].clone(),
        Verb::AddObject => unreachable!("add handled by caller"),
    }
}

fn execute_region_edit(
    doc: &SceneDoc,
    call: &ToolCall,
    analysis: &[RegionProposal],
    subtask: &SubTask,
    profiles: &ProfileSet,
    seed: u64,
) -> Result<SceneDoc, ToolError> {
    let profile = profiles.get(REGION_EDITOR)?;
    if !profile.supports(subtask.verb.token()) {
        return Err(ToolError::Verb(format!(
            "region editor does not support verb {}",
            subtask.verb.token()
        )));
    }
    let number = call.region_number().ok_or_else(|| ToolError::Schema {
        path: "arguments.region_number".into(),
        message: "region editor call requires an integer region_number".into(),
    })?;
    if number < 1 || number as usize > analysis.len() {
        return Err(ToolError::Index(format!(
            "region_number {number} outside 1..={}",
            analysis.len()
        )));
    }
    let mask = &analysis[number as usize - 1].mask;
    let mut rng = rng_for(seed, &["exec", REGION_EDITOR]);
    let mut out = doc.clone();

    let in_mask = |e: &Element| mask.intersects_dilated(&e.bbox, MASK_DILATION);
    let target_ids: Vec<String> = match subtask.verb {
        Verb::AddObject => Vec::new(),
        _ => doc
            .elements
            .iter()
            .filter(|e| subtask.target.matches_element(e) && in_mask(e))
            .map(|e| e.id.clone())
            .collect(),
    };

    let success = coin(&mut rng, profile.success_for(subtask.verb.token()));
    if success {
        if subtask.verb == Verb::AddObject {
            if let Some(bounding) = mask.bounding() {
                add_element(&mut out, bounding, &subtask.payload[0], &subtask.payload[1]);
            }
        } else {
            apply_intended_on_targets(&mut out, subtask, &target_ids);
        }
    }

    // Non-target content inside the dilated mask is at the editor's mercy:
    // fully swallowed elements vanish, partially covered ones drift.
    for e in &doc.elements {
        if target_ids.contains(&e.id) || !in_mask(e) {
            continue;
        }
        if coin(&mut rng, profile.collateral) {
            if mask.swallows_dilated(&e.bbox, MASK_DILATION) {
                out.remove_element(&e.id);
            } else if let Some(live) = out.element_mut(&e.id) {
                drift(live);
            }
        }
    }

    if coin(&mut rng, profile.defect_rate) {
        let anchor = mask
            .bounding()
            .unwrap_or(Rect::new(0, 0, CANVAS_W, CANVAS_H));
        out.defects.push(DefectTag {
            kind: DefectKind::Seam,
            anchor: DefectAnchor::Region(anchor),
        });
    }
    out.normalize();
    Ok(out)
}

fn execute_global_edit(
    doc: &SceneDoc,
    call: &ToolCall,
    subtask: &SubTask,
    profiles: &ProfileSet,
    seed: u64,
) -> Result<SceneDoc, ToolError> {
    let profile = profiles.get(&call.tool)?;
    if !profile.supports(subtask.verb.token()) {
        return Err(ToolError::Verb(format!(
            "{} does not support verb {}",
            call.tool,
            subtask.verb.token()
        )));
    }
    let mut rng = rng_for(seed, &["exec", &call.tool]);
    let mut out = doc.clone();

    let target_ids: Vec<String> = match subtask.verb {
        Verb::AddObject | Verb::RecolorBackground | Verb::SwapMotif => Vec::new(),
        _ => doc
            .elements
            .iter()
            .filter(|e| subtask.target.matches_element(e))
            .map(|e| e.id.clone())
            .collect(),
    };

    let add_placement = Rect::new(400, 420, 600, 580);
    let success = coin(&mut rng, profile.success_for(subtask.verb.token()));
    if success {
        if subtask.verb == Verb::AddObject {
            add_element(&mut out, add_placement, &subtask.payload[0], &subtask.payload[1]);
        } else {
            apply_intended_on_targets(&mut out, subtask, &target_ids);
        }
    }

    // Collateral radiates from the edited area; background-level verbs put
    // the whole canvas in play.
    let zone: Mask = match subtask.verb {
        Verb::RecolorBackground | Verb::SwapMotif => {
            Mask::Rect(Rect::new(0, 0, CANVAS_W, CANVAS_H))
        }
        Verb::AddObject => Mask::Rect(add_placement),
        _ => Mask::Union(
            doc.elements
                .iter()
                .filter(|e| target_ids.contains(&e.id))
                .map(|e| e.bbox)
                .collect(),
        ),
    };
    for e in &doc.elements {
        if target_ids.contains(&e.id) || !zone.intersects_dilated(&e.bbox, MASK_DILATION) {
            continue;
        }
        if coin(&mut rng, profile.collateral) {
            if let Some(live) = out.element_mut(&e.id) {
                drift(live);
            }
        }
    }

    if coin(&mut rng, profile.defect_rate) {
        let kind = if call.tool == GLOBAL_EDITOR_A {
            DefectKind::GarbledText
        } else {
            DefectKind::Clutter
        };
        let anchor = zone
            .bounding()
            .unwrap_or(Rect::new(0, 0, CANVAS_W, CANVAS_H));
        out.defects.push(DefectTag {
            kind,
            anchor: DefectAnchor::Region(anchor),
        });
    }
    out.normalize();
    Ok(out)
}

/// Execute one tool call against a document. Pure in all inputs: identical
/// arguments and seed produce byte-identical results.
pub fn execute_tool(
    doc: &SceneDoc,
    call: &ToolCall,
    analysis: Option<&[RegionProposal]>,
    subtask: &SubTask,
    profiles: &ProfileSet,
    seed: u64,
) -> Result<SceneDoc, ToolError> {
    if !is_registered(&call.tool) {
        return Err(ToolError::UnknownTool(call.tool.clone()));
    }
    if call.tool == REGION_EDITOR {
        let analysis = analysis.ok_or_else(|| {
            ToolError::Composition("region editor requires a prior analysis result".into())
        })?;
        return execute_region_edit(doc, call, analysis, subtask, profiles, seed);
    }
    if is_global_editor(&call.tool) {
        if analysis.is_some() {
            return Err(ToolError::Composition(format!(
                "{} runs standalone, not on analysis output",
                call.tool
            )));
        }
        return execute_global_edit(doc, call, subtask, profiles, seed);
    }
    debug_assert!(is_analysis(&call.tool));
    Err(ToolError::Composition(format!(
        "{} is an analysis tool, not an editor",
        call.tool
    )))
}
