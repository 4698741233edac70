//! Analysis tools: region discovery over scene documents.

use rand::Rng;

use super::{ProfileSet, RegionProposal, ToolError, BBOX_TOOL, LAYERS_TOOL, OCR_TOOL, SEGMENT_TOOL};
use crate::planner::{SubTask, Verb};
use crate::scene::{
    grid_ceil, grid_floor, place_with_relation, Element, ElementKind, Mask, Rect, RelKind,
    SceneDoc, Selector, CANVAS_H, CANVAS_W, LAYER_BANDS,
};
use crate::util::rng_for;

const SEGMENT_CAP: usize = 8;
const TEXT_CAP: usize = 10;

fn describe(e: &Element) -> Vec<String> {
    let mut d = vec![match e.kind {
        ElementKind::Text => "text".to_string(),
        ElementKind::Object => "object".to_string(),
        ElementKind::Decoration => "decoration".to_string(),
    }];
    if let Some(l) = e.label() {
        d.push(l.to_string());
    }
    if let Some(c) = e.attrs.get("content") {
        d.extend(c.split(' ').map(str::to_string));
    }
    if let Some(c) = e.color() {
        d.push(c.to_string());
    }
    d
}

fn area_sorted<'d>(elements: impl Iterator<Item = &'d Element>) -> Vec<&'d Element> {
    let mut v: Vec<&Element> = elements.collect();
    v.sort_by(|a, b| b.bbox.area().cmp(&a.bbox.area()).then(a.id.cmp(&b.id)));
    v
}

/// Semantic segmentation analog: one proposal per element, largest areas
/// first, capped at eight.
pub fn analyze_segments(doc: &SceneDoc) -> Vec<RegionProposal> {
    area_sorted(doc.elements.iter())
        .into_iter()
        .take(SEGMENT_CAP)
        .enumerate()
        .map(|(i, e)| RegionProposal {
            index: i as u32 + 1,
            mask: Mask::Rect(e.bbox),
            description: describe(e),
            source_tool: SEGMENT_TOOL.to_string(),
        })
        .collect()
}

/// Text/layout detection analog: text elements only, largest areas first,
/// capped at ten.
pub fn analyze_text(doc: &SceneDoc) -> Vec<RegionProposal> {
    area_sorted(doc.elements.iter().filter(|e| e.kind == ElementKind::Text))
        .into_iter()
        .take(TEXT_CAP)
        .enumerate()
        .map(|(i, e)| RegionProposal {
            index: i as u32 + 1,
            mask: Mask::Rect(e.bbox),
            description: describe(e),
            source_tool: OCR_TOOL.to_string(),
        })
        .collect()
}

/// Layer decomposition analog: exactly four proposals, one per layer band;
/// the mask is the union of that band's element bboxes (possibly empty).
pub fn analyze_layers(doc: &SceneDoc) -> Vec<RegionProposal> {
    (0..LAYER_BANDS)
        .map(|band| {
            let rects: Vec<Rect> = doc
                .elements
                .iter()
                .filter(|e| e.layer == band)
                .map(|e| e.bbox)
                .collect();
            RegionProposal {
                index: band as u32 + 1,
                mask: Mask::Union(rects),
                description: vec![format!("layer_{band}")],
                source_tool: LAYERS_TOOL.to_string(),
            }
        })
        .collect()
}

fn snap_out(r: &Rect) -> Rect {
    let x0 = grid_floor(r.x0).clamp(0, CANVAS_W - 100);
    let y0 = grid_floor(r.y0).clamp(0, CANVAS_H - 100);
    let x1 = grid_ceil(r.x1).clamp(x0 + 100, CANVAS_W);
    let y1 = grid_ceil(r.y1).clamp(y0 + 100, CANVAS_H);
    Rect::new(x0, y0, x1, y1)
}

fn shift_on_grid(r: &Rect, dx: i64, dy: i64) -> Rect {
    let w = r.x1 - r.x0;
    let h = r.y1 - r.y0;
    let x0 = (r.x0 + dx * 100).clamp(0, CANVAS_W - w);
    let y0 = (r.y0 + dy * 100).clamp(0, CANVAS_H - h);
    Rect::new(x0, y0, x0 + w, y0 + h)
}

fn random_grid_box(rng: &mut rand_chacha::ChaCha8Rng) -> Rect {
    let w = 100 * rng.gen_range(1..=3i64);
    let h = 100 * rng.gen_range(1..=3i64);
    let x0 = 100 * rng.gen_range(0..=(CANVAS_W - w) / 100);
    let y0 = 100 * rng.gen_range(0..=(CANVAS_H - h) / 100);
    Rect::new(x0, y0, x0 + w, y0 + h)
}

/// Goal-conditioned box proposer: three candidate boxes snapped to the 10%
/// grid plus a fourth union proposal.
pub fn propose_goal_bboxes(
    doc: &SceneDoc,
    subtask: &SubTask,
    seed: u64,
    profiles: &ProfileSet,
) -> Result<Vec<RegionProposal>, ToolError> {
    let profile = profiles.get(BBOX_TOOL)?;
    if !profile.supports(subtask.verb.token()) {
        return Err(ToolError::Verb(format!(
            "bbox proposer does not support verb {}",
            subtask.verb.token()
        )));
    }
    let subtask_key = subtask.tokens().join(" ");
    let mut rng = rng_for(seed, &["bbox", &subtask_key]);

    let fallback = Rect::new(400, 400, 600, 600);
    let ideal = match subtask.verb {
        Verb::AddObject => {
            let anchor = match &subtask.target {
                Selector::Id(t) => doc.element(t).map(|e| e.bbox),
                _ => None,
            };
            match anchor {
                Some(ab) => {
                    let rel = RelKind::from_token(&subtask.payload[2]).unwrap_or(RelKind::Above);
                    let seatbox = Rect::new(0, 0, 200, 160);
                    snap_out(&place_with_relation(&seatbox, &rel, &ab))
                }
                None => fallback,
            }
        }
        _ => match &subtask.target {
            Selector::Id(t) => doc.element(t).map(|e| snap_out(&e.bbox)).unwrap_or(fallback),
            _ => fallback,
        },
    };

    let dirs = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
    let (dx, dy) = dirs[rng.gen_range(0..dirs.len())];
    let shifted = shift_on_grid(&ideal, dx, dy);
    let wild = random_grid_box(&mut rng);

    let boxes = [ideal, shifted, wild];
    let mut out: Vec<RegionProposal> = boxes
        .iter()
        .enumerate()
        .map(|(i, r)| RegionProposal {
            index: i as u32 + 1,
            mask: Mask::Rect(*r),
            description: vec![format!("goal_box_{}", i + 1)],
            source_tool: BBOX_TOOL.to_string(),
        })
        .collect();
    out.push(RegionProposal {
        index: 4,
        mask: Mask::Union(boxes.to_vec()),
        description: vec!["goal_box_union".to_string()],
        source_tool: BBOX_TOOL.to_string(),
    });
    Ok(out)
}
