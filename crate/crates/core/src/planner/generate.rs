//! Plan generation: grammar-masked sampling from the plan model, and the
//! checklist-constrained decode used at data-construction time.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Plan, PlannerError, PlannerModel, Provenance, SubTask, Verb, MAX_PLAN_LEN};
use crate::scene::{Checklist, ChecklistItem, ElementKind, Instance, RelKind, SceneDoc, Selector};
use crate::util::rng_for;
use crate::vocab::{self, Vocab};

/// Which checklist item each subtask index covers. Preserve items are
/// covered ambiently by every subtask that leaves their subject alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMap {
    /// item index -> indices of covering subtasks
    pub by_item: BTreeMap<usize, Vec<usize>>,
}

impl CoverageMap {
    pub fn total(&self, checklist: &Checklist) -> bool {
        (0..checklist.items.len()).all(|i| !self.by_item.get(&i).map_or(true, Vec::is_empty))
    }
}

fn ids(tokens: &[&str]) -> Vec<u16> {
    let v = Vocab::global();
    tokens.iter().map(|t| v.id(t).expect("vocab token")).collect()
}

/// Token positions of one in-flight subtask during decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Verb,
    Target(Verb),
    Payload(Verb, usize),
    Boundary,
}

fn legal_for(slot: Slot, doc: &SceneDoc, subtasks_done: usize) -> Vec<u16> {
    match slot {
        Slot::Verb => ids(&Verb::ALL.map(|v| v.token())),
        Slot::Target(verb) => {
            if verb.targets_element() {
                // The full id-token pool stays legal; targets that are absent
                // from the document simply execute as no-ops downstream.
                ids(vocab::ELEMENT_IDS)
            } else {
                ids(&[vocab::SEL_BACKGROUND])
            }
        }
        Slot::Payload(verb, i) => match (verb, i) {
            (Verb::ReplaceText, _) => ids(vocab::CONTENT_WORDS),
            (Verb::Recolor, 0) | (Verb::RecolorBackground, 0) => ids(vocab::COLORS),
            (Verb::SwapMotif, 0) => ids(vocab::MOTIFS),
            (Verb::AddObject, 0) => ids(vocab::LABELS),
            (Verb::AddObject, 1) => ids(vocab::COLORS),
            (Verb::AddObject, 2) => ids(vocab::RELATIONS),
            _ => unreachable!("verb {verb:?} has no payload slot {i}"),
        },
        Slot::Boundary => {
            if subtasks_done >= MAX_PLAN_LEN {
                ids(&[vocab::TOK_EOP])
            } else {
                ids(&[vocab::TOK_SUB, vocab::TOK_EOP])
            }
        }
    }
    .to_vec()
}

fn sample_masked(
    model: &PlannerModel,
    category: u8,
    history: &[u16],
    legal: &[u16],
    rng: &mut ChaCha8Rng,
) -> u16 {
    let key = model.context_of(category, history);
    let probs = model.masked_probs(&key, legal);
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (p, &tok) in probs.iter().zip(legal) {
        acc += p;
        if draw < acc {
            return tok;
        }
    }
    *legal.last().expect("non-empty legal set")
}

struct Decoder<'m> {
    model: &'m PlannerModel,
    category: u8,
    history: Vec<u16>,
}

impl<'m> Decoder<'m> {
    fn new(model: &'m PlannerModel, category: u8) -> Self {
        Decoder {
            model,
            category,
            history: Vec::new(),
        }
    }

    fn emit(&mut self, token: u16) {
        self.history.push(token);
    }

    /// Sample one full subtask, optionally forcing the emitted tokens.
    fn subtask(
        &mut self,
        doc: &SceneDoc,
        done: usize,
        forced: Option<&[u16]>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<u16> {
        let mut out = Vec::new();
        let mut pick = |slot: Slot, decoder: &mut Self, out: &mut Vec<u16>, pos: usize| {
            let legal = legal_for(slot, doc, done);
            let tok = match forced {
                Some(f) => f[pos],
                None => sample_masked(decoder.model, decoder.category, &decoder.history, &legal, rng),
            };
            decoder.emit(tok);
            out.push(tok);
        };
        pick(Slot::Verb, self, &mut out, 0);
        let verb = Verb::from_token(Vocab::global().token(out[0])).expect("verb token");
        pick(Slot::Target(verb), self, &mut out, 1);
        for i in 0..verb.arity() - 2 {
            pick(Slot::Payload(verb, i), self, &mut out, 2 + i);
        }
        out
    }

    fn boundary(&mut self, doc: &SceneDoc, done: usize, force: Option<u16>, rng: &mut ChaCha8Rng) -> u16 {
        let legal = legal_for(Slot::Boundary, doc, done);
        let tok = match force {
            Some(t) => t,
            None => sample_masked(self.model, self.category, &self.history, &legal, rng),
        };
        self.emit(tok);
        tok
    }
}

fn subtask_from_ids(id: &str, token_ids: &[u16]) -> SubTask {
    let v = Vocab::global();
    let tokens: Vec<String> = token_ids.iter().map(|&t| v.token(t).to_string()).collect();
    SubTask::parse_tokens(id, &tokens).expect("grammar-masked tokens parse")
}

/// Free sampling: a plan from the model conditioned on the instruction
/// category, constrained only by the grammar mask. Deterministic in `seed`.
pub fn generate_plan(model: &PlannerModel, instance: &Instance, seed: u64) -> Plan {
    let mut rng = rng_for(seed, &["plan_free", &instance.id]);
    let category = instance.instruction.category_index();
    let mut decoder = Decoder::new(model, category);
    let mut subtasks = Vec::new();
    loop {
        let toks = decoder.subtask(&instance.doc, subtasks.len(), None, &mut rng);
        subtasks.push(subtask_from_ids(&format!("s{}", subtasks.len()), &toks));
        let eop = Vocab::global().id(vocab::TOK_EOP).unwrap();
        if decoder.boundary(&instance.doc, subtasks.len(), None, &mut rng) == eop {
            break;
        }
    }
    let plan = Plan {
        instruction_id: instance.id.clone(),
        subtasks,
        provenance: Provenance::Sampled,
    };
    debug_assert!(plan.validate().is_ok());
    plan
}

/// Does a subtask discharge one checklist item? The table is exact token
/// matching on the item's detail.
pub fn covers(doc: &SceneDoc, subtask: &SubTask, item: &ChecklistItem) -> bool {
    let d = &item.detail;
    let target_id = match &subtask.target {
        Selector::Id(t) => Some(t.as_str()),
        _ => None,
    };
    match item.criterion.as_str() {
        "replace" => match d.get(1).map(String::as_str) {
            Some("motif") => subtask.verb == Verb::SwapMotif && subtask.payload[0] == d[2],
            Some("bg_color") => {
                subtask.verb == Verb::RecolorBackground && subtask.payload[0] == d[2]
            }
            Some("content") => {
                subtask.verb == Verb::ReplaceText
                    && target_id == Some(d[0].as_str())
                    && subtask.payload == d[2..]
            }
            Some("color") => {
                subtask.verb == Verb::Recolor
                    && target_id == Some(d[0].as_str())
                    && subtask.payload[0] == d[2]
            }
            _ => false,
        },
        "add" => {
            subtask.verb == Verb::AddObject
                && subtask.payload[0] == d[0]
                && d.get(1).map(|c| &subtask.payload[1] == c).unwrap_or(true)
        }
        "relation" => {
            subtask.verb == Verb::AddObject
                && subtask.payload[0] == d[0]
                && subtask.payload[2] == d[1]
                && target_id == Some(d[2].as_str())
        }
        "remove" => {
            subtask.verb == Verb::RemoveElement
                && target_id
                    .and_then(|t| doc.element(t))
                    .map(|e| e.label() == Some(d[0].as_str()) || e.id == d[0])
                    .unwrap_or(false)
        }
        "preserve" => {
            // Ambient coverage: the subtask leaves the preserved subject alone.
            let subject = d[0].as_str();
            if subject == vocab::SEL_BACKGROUND {
                !matches!(subtask.verb, Verb::SwapMotif | Verb::RecolorBackground)
            } else {
                target_id != Some(subject)
            }
        }
        _ => false,
    }
}

pub fn coverage_map(doc: &SceneDoc, checklist: &Checklist, plan: &Plan) -> CoverageMap {
    let mut by_item = BTreeMap::new();
    for (i, item) in checklist.items.iter().enumerate() {
        let covering: Vec<usize> = plan
            .subtasks
            .iter()
            .enumerate()
            .filter(|(_, s)| covers(doc, s, item))
            .map(|(j, _)| j)
            .collect();
        by_item.insert(i, covering);
    }
    CoverageMap { by_item }
}

/// The forced token sequence that discharges one actionable checklist item.
/// Relation items fold into the add item with the same label.
fn forced_tokens_for_item(
    doc: &SceneDoc,
    checklist: &Checklist,
    item: &ChecklistItem,
) -> Result<Vec<u16>, PlannerError> {
    let v = Vocab::global();
    let tok = |s: &str| -> Result<u16, PlannerError> {
        v.id(s)
            .ok_or_else(|| PlannerError::Coverage(format!("token {s} outside vocabulary")))
    };
    let d = &item.detail;
    let toks: Vec<String> = match item.criterion.as_str() {
        "replace" => match d.get(1).map(String::as_str) {
            Some("motif") => vec!["swap_motif".into(), vocab::SEL_BACKGROUND.into(), d[2].clone()],
            Some("bg_color") => {
                vec!["recolor_background".into(), vocab::SEL_BACKGROUND.into(), d[2].clone()]
            }
            Some("content") => {
                let mut t = vec!["replace_text".into(), d[0].clone()];
                t.extend(d[2..].iter().cloned());
                t
            }
            Some("color") => vec!["recolor".into(), d[0].clone(), d[2].clone()],
            other => {
                return Err(PlannerError::Coverage(format!(
                    "replace item with unknown field {other:?}"
                )))
            }
        },
        "add" => {
            let label = &d[0];
            let color = d.get(1).cloned().unwrap_or_else(|| "white".to_string());
            // Reuse the paired relation item when one names this label.
            let relation = checklist
                .items
                .iter()
                .find(|it| it.criterion == "relation" && it.detail.first() == Some(label));
            let (anchor, rel) = match relation {
                Some(r) => (r.detail[2].clone(), r.detail[1].clone()),
                None => {
                    let anchor = doc
                        .elements
                        .iter()
                        .filter(|e| e.kind == ElementKind::Object)
                        .max_by_key(|e| e.bbox.area())
                        .or_else(|| doc.elements.first())
                        .ok_or_else(|| {
                            PlannerError::Coverage("add item needs an anchor element".into())
                        })?;
                    let rel = crate::scene::feasible_relation(&anchor.bbox);
                    (anchor.id.clone(), rel.token().to_string())
                }
            };
            vec!["add_object".into(), anchor, label.clone(), color, rel]
        }
        "remove" => {
            let el = doc
                .elements
                .iter()
                .find(|e| e.label() == Some(d[0].as_str()) || e.id == d[0])
                .ok_or_else(|| {
                    PlannerError::Coverage(format!("remove item target {} not in document", d[0]))
                })?;
            vec!["remove_element".into(), el.id.clone()]
        }
        other => {
            return Err(PlannerError::Coverage(format!(
                "no forced decode for criterion {other}"
            )))
        }
    };
    toks.iter().map(|t| tok(t)).collect()
}

/// Checklist-guided constrained decode: every actionable item is discharged
/// by a forced subtask, the model fills in extra steps, and the result is
/// rejected and resampled until the coverage map is total (budget 64).
pub fn generate_plan_checklist(
    model: &PlannerModel,
    instance: &Instance,
    seed: u64,
) -> Result<(Plan, CoverageMap), PlannerError> {
    let checklist = &instance.checklist;
    if checklist.items.is_empty() {
        return Err(PlannerError::Coverage("checklist is empty".into()));
    }
    let category = instance.instruction.category_index();
    let doc = &instance.doc;

    // Relation items ride along with their add item; preserve items are
    // ambient. Everything else needs a forced subtask.
    let actionable: Vec<&ChecklistItem> = checklist
        .items
        .iter()
        .filter(|it| matches!(it.criterion.as_str(), "replace" | "add" | "remove"))
        .collect();

    let mut forced: Vec<Vec<u16>> = Vec::new();
    for item in &actionable {
        forced.push(forced_tokens_for_item(doc, checklist, item)?);
    }

    for attempt in 0..64u64 {
        let mut rng = rng_for(seed, &["plan_checklist", &instance.id, &attempt.to_string()]);
        let room = MAX_PLAN_LEN.saturating_sub(forced.len().max(1));
        let extras = rng.gen_range(0..=2usize).min(room);
        let mut decoder = Decoder::new(model, category);
        let mut subtasks: Vec<SubTask> = Vec::new();
        let total = forced.len().max(1) + extras;

        let mut forced_idx = 0usize;
        for slot in 0..total {
            let forced_left = forced.len() - forced_idx;
            let slots_left = total - slot;
            // Forced subtasks must all fit; free extras fill the slack.
            let force_now = forced_left > 0 && (forced_left >= slots_left || rng.gen_bool(0.7));
            let toks = if force_now {
                let f = &forced[forced_idx];
                forced_idx += 1;
                decoder.subtask(doc, subtasks.len(), Some(f), &mut rng)
            } else {
                decoder.subtask(doc, subtasks.len(), None, &mut rng)
            };
            subtasks.push(subtask_from_ids(&format!("s{}", subtasks.len()), &toks));
            let is_last = slot + 1 == total;
            let eop = Vocab::global().id(vocab::TOK_EOP).unwrap();
            let sub = Vocab::global().id(vocab::TOK_SUB).unwrap();
            decoder.boundary(doc, subtasks.len(), Some(if is_last { eop } else { sub }), &mut rng);
        }

        let plan = Plan {
            instruction_id: instance.id.clone(),
            subtasks,
            provenance: Provenance::ChecklistGuided,
        };
        if plan.validate().is_err() {
            continue;
        }
        let map = coverage_map(doc, checklist, &plan);
        if map.total(checklist) {
            return Ok((plan, map));
        }
    }
    Err(PlannerError::Coverage(format!(
        "no covering plan for {} within the retry budget",
        instance.id
    )))
}

/// Re-phrase a plan with the disjoint out-of-distribution template: subtask
/// order reversed and each subtask's tokens reversed.
pub fn ood_tokens_for_plan(plan: &Plan) -> Vec<u16> {
    let v = Vocab::global();
    let mut out: Vec<u16> = Vec::new();
    for (i, s) in plan.subtasks.iter().rev().enumerate() {
        if i > 0 {
            out.push(v.id(vocab::TOK_SUB).unwrap());
        }
        for t in s.tokens().iter().rev() {
            out.push(v.id(t).unwrap());
        }
    }
    out.push(v.id(vocab::TOK_EOP).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_instance, Difficulty};

    #[test]
    fn checklist_guided_plan_covers_every_item() {
        let model = PlannerModel::uniform();
        for seed in 0..40u64 {
            for d in [Difficulty::Small, Difficulty::Medium] {
                let inst = generate_instance(seed, d);
                let (plan, map) = generate_plan_checklist(&model, &inst, seed).unwrap();
                assert!(map.total(&inst.checklist), "seed {seed} {d:?}");
                plan.validate().unwrap();
                assert_eq!(plan.provenance, Provenance::ChecklistGuided);
            }
        }
    }

    #[test]
    fn checklist_decode_is_deterministic() {
        let model = PlannerModel::uniform();
        let inst = generate_instance(17, Difficulty::Medium);
        let (a, _) = generate_plan_checklist(&model, &inst, 5).unwrap();
        let (b, _) = generate_plan_checklist(&model, &inst, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_item_checklist_yields_covering_plan() {
        let model = PlannerModel::uniform();
        let mut inst = generate_instance(3, Difficulty::Small);
        inst.instruction.goal_spec.truncate(1);
        inst.checklist.items.truncate(1);
        let (plan, map) = generate_plan_checklist(&model, &inst, 0).unwrap();
        assert!(map.total(&inst.checklist));
        assert!(covers(&inst.doc, &plan.subtasks[map.by_item[&0][0]], &inst.checklist.items[0]));
    }

    #[test]
    fn free_sampling_parses_under_uniform_model() {
        let model = PlannerModel::uniform();
        for seed in 0..30u64 {
            let inst = generate_instance(seed, Difficulty::Small);
            let plan = generate_plan(&model, &inst, seed);
            plan.validate().unwrap();
            assert!(plan.subtasks.len() <= MAX_PLAN_LEN);
        }
    }

    #[test]
    fn free_sampling_is_deterministic() {
        let model = PlannerModel::uniform();
        let inst = generate_instance(2, Difficulty::Small);
        assert_eq!(generate_plan(&model, &inst, 9), generate_plan(&model, &inst, 9));
    }

    #[test]
    fn sampled_verb_frequencies_match_model_marginals() {
        // Compare first-verb frequencies against the exact masked marginal.
        let mut model = PlannerModel::uniform();
        let inst = generate_instance(4, Difficulty::Small);
        let cat = inst.instruction.category_index();
        // Train on a tiny corpus skewed toward swap_motif openings.
        let mk = |verb: &str| {
            let sub = SubTask::parse_tokens(
                "s0",
                &[verb.to_string(), vocab::SEL_BACKGROUND.to_string(), "stars".to_string()],
            );
            let _ = sub;
        };
        mk("swap_motif");
        let plan = Plan {
            instruction_id: inst.id.clone(),
            subtasks: vec![SubTask::new(
                "s0",
                Verb::SwapMotif,
                Selector::Background,
                vec!["stars".to_string()],
            )],
            provenance: Provenance::ChecklistGuided,
        };
        let stream = TokenStreamHelper::stream(cat, &plan);
        model.train(&vec![stream; 8], 40, 2.0).unwrap();

        let key = model.context_of(cat, &[]);
        let legal = ids(&Verb::ALL.map(|v| v.token()));
        let marginals = model.masked_probs(&key, &legal);

        let n = 100u64;
        let mut counts = vec![0usize; Verb::ALL.len()];
        for seed in 0..n {
            let plan = generate_plan(&model, &inst, seed);
            let first = plan.subtasks[0].verb;
            counts[first.index()] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = marginals[i];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = c as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-9,
                "verb {i}: freq {freq} vs p {p} (sigma {sigma})"
            );
        }
    }

    struct TokenStreamHelper;
    impl TokenStreamHelper {
        fn stream(category: u8, plan: &Plan) -> crate::planner::TokenStream {
            let v = Vocab::global();
            crate::planner::TokenStream {
                category,
                tokens: plan
                    .token_stream()
                    .iter()
                    .map(|t| v.id(t).unwrap())
                    .collect(),
            }
        }
    }

    #[test]
    fn ood_phrasing_differs_and_scores_high_perplexity() {
        let model = PlannerModel::uniform();
        let inst = generate_instance(2, Difficulty::Medium);
        let (plan, _) = generate_plan_checklist(&model, &inst, 0).unwrap();
        let normal = TokenStreamHelper::stream(0, &plan).tokens;
        let ood = ood_tokens_for_plan(&plan);
        assert_ne!(normal, ood);
        assert_eq!(normal.len(), ood.len());
    }
}
