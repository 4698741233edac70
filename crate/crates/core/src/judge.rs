//! The rubric judge: (IE, IP, VQ) triples over 0..=5, geometric-mean
//! aggregation, expected scores over logit distributions, variance-reduced
//! repeat execution, and the boundary-noise verifier used at inference.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::planner::SubTask;
use crate::scene::{constraint_satisfaction, diff_untouched, edited_subjects, Constraint, SceneDoc, SceneError};
use crate::tools::{execute_tool, ProfileSet, RegionProposal, ToolCall, ToolError};
use crate::util::{digest, rng_for};

/// Rubric band cut points over fractions in [0,1]; crossing one raises the
/// band score by one. Stored in config rather than hard-coded.
pub const DEFAULT_CUT_POINTS: [f64; 4] = [0.2, 0.5, 0.8, 0.99];
/// Defect count at or beyond which visual quality bottoms out.
pub const DEFECT_CAP: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardTriple {
    pub ie: u8,
    pub ip: u8,
    pub vq: u8,
}

impl RewardTriple {
    pub fn new(ie: u8, ip: u8, vq: u8) -> Self {
        debug_assert!(ie <= 5 && ip <= 5 && vq <= 5);
        RewardTriple { ie, ip, vq }
    }
}

/// Geometric mean of the three criterion scores. Zero anywhere zeroes the
/// whole reward.
pub fn aggregate(t: RewardTriple) -> f64 {
    ((t.ie as f64) * (t.ip as f64) * (t.vq as f64)).cbrt()
}

/// Per-criterion logits over the six score levels 0..=5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub ie: [f64; 6],
    pub ip: [f64; 6],
    pub vq: [f64; 6],
}

fn softmax6(z: &[f64; 6]) -> [f64; 6] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e = [0.0; 6];
    let mut sum = 0.0;
    for k in 0..6 {
        e[k] = (z[k] - m).exp();
        sum += e[k];
    }
    for v in &mut e {
        *v /= sum;
    }
    e
}

fn expectation(z: &[f64; 6]) -> f64 {
    softmax6(z)
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * p)
        .sum()
}

/// Expected score per criterion: sum over levels of `k * softmax(z)_k`.
pub fn expected_scores(d: &ScoreDistribution) -> (f64, f64, f64) {
    (expectation(&d.ie), expectation(&d.ip), expectation(&d.vq))
}

/// Verifier-style scalar: geometric mean of the three expected scores.
pub fn expected_reward(d: &ScoreDistribution) -> f64 {
    let (ie, ip, vq) = expected_scores(d);
    (ie * ip * vq).cbrt()
}

/// Judge configuration: band cut points live in config, not code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub cut_points: [f64; 4],
    pub defect_cap: u32,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            cut_points: DEFAULT_CUT_POINTS,
            defect_cap: DEFECT_CAP,
        }
    }
}

impl JudgeConfig {
    /// Map a satisfaction fraction onto the 0..=5 rubric ladder: exactly
    /// zero scores 0, then each crossed cut point raises the band.
    pub fn band(&self, fraction: f64) -> u8 {
        if fraction <= 0.0 {
            return 0;
        }
        1 + self.cut_points.iter().filter(|c| fraction >= **c).count() as u8
    }

    fn vq_score(&self, defect_count: usize) -> u8 {
        let capped = (defect_count as u32).min(self.defect_cap);
        (5u32.saturating_sub(capped * 5 / self.defect_cap)) as u8
    }
}

/// Score an edit against a goal: IE bands the satisfied-constraint
/// fraction, IP bands the untouched-element survival fraction, VQ counts
/// defects. `goal` may be a subtask's derived constraints or a full
/// instruction goal.
pub fn score_edit(
    cfg: &JudgeConfig,
    before: &SceneDoc,
    after: &SceneDoc,
    goal: &[Constraint],
) -> Result<RewardTriple, SceneError> {
    let ie_fraction = constraint_satisfaction(after, goal)?;
    let edited = edited_subjects(goal);
    let ip_fraction = diff_untouched(before, after, &edited);
    Ok(RewardTriple {
        ie: cfg.band(ie_fraction),
        ip: cfg.band(ip_fraction),
        vq: cfg.vq_score(after.defects.len()),
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Tool(#[from] ToolError),
}
use thiserror::Error;

/// One table entry: the judged samples for a (subtask, tool, region) key
/// and their mean aggregated reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub subtask_id: String,
    pub candidate_key: String,
    pub samples: Vec<RewardTriple>,
    pub reward: f64,
    /// Set when every execution failed; such entries keep reward zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Execute a call `n_repeats` times with distinct derived seeds, score each
/// output, and average the aggregated rewards.
#[allow(clippy::too_many_arguments)]
pub fn reward_with_repeats(
    cfg: &JudgeConfig,
    profiles: &ProfileSet,
    before: &SceneDoc,
    subtask: &SubTask,
    goal: &[Constraint],
    call: &ToolCall,
    analysis: Option<&[RegionProposal]>,
    candidate_key: &str,
    episode_seed: u64,
    subtask_index: usize,
    n_repeats: u32,
) -> Result<RewardRecord, JudgeError> {
    assert!(n_repeats >= 1, "n_repeats must be at least 1");
    let mut samples = Vec::with_capacity(n_repeats as usize);
    let mut total = 0.0;
    for attempt in 0..n_repeats {
        let seed = crate::util::derive_seed(
            episode_seed,
            &["exec", &subtask_index.to_string(), &call.tool, &attempt.to_string()],
        );
        let after = execute_tool(before, call, analysis, subtask, profiles, seed)?;
        let triple = score_edit(cfg, before, &after, goal)?;
        total += aggregate(triple);
        samples.push(triple);
    }
    Ok(RewardRecord {
        subtask_id: subtask.id.clone(),
        candidate_key: candidate_key.to_string(),
        reward: total / n_repeats as f64,
        samples,
        error: None,
    })
}

/// Inference-time scorer distilled from the exact judge: band boundaries
/// are perturbed with logistic noise scaled by `temperature`, the perturbed
/// bands become one-hot score distributions, and the result is the
/// geometric mean of their expected scores. Temperature zero reproduces
/// the exact judge.
#[derive(Debug, Clone)]
pub struct Verifier {
    pub cfg: JudgeConfig,
    pub temperature: f64,
    pub seed: u64,
}

/// Per-unit-temperature logistic scale, as a fraction of the smaller gap
/// between a boundary and its neighbours. Disagreement concentrates near
/// band edges and vanishes deep inside a band.
const BOUNDARY_NOISE_FACTOR: f64 = 0.25;

fn logistic_sample(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(1e-12..(1.0 - 1e-12));
    (u / (1.0 - u)).ln()
}

impl Verifier {
    pub fn new(cfg: JudgeConfig, temperature: f64, seed: u64) -> Self {
        Verifier {
            cfg,
            temperature,
            seed,
        }
    }

    fn boundary_scale(&self, i: usize) -> f64 {
        let c = &self.cfg.cut_points;
        let left = if i == 0 { c[i] } else { c[i] - c[i - 1] };
        let right = if i + 1 == c.len() { 1.0 - c[i] } else { c[i + 1] - c[i] };
        BOUNDARY_NOISE_FACTOR * left.min(right)
    }

    fn noisy_band(&self, fraction: f64, rng: &mut ChaCha8Rng) -> u8 {
        if fraction <= 0.0 {
            return 0;
        }
        let mut band = 1u8;
        for (i, c) in self.cfg.cut_points.iter().enumerate() {
            let shifted = c + self.temperature * self.boundary_scale(i) * logistic_sample(rng);
            if fraction >= shifted {
                band += 1;
            }
        }
        band.min(5)
    }

    fn noisy_vq(&self, defects: usize, rng: &mut ChaCha8Rng) -> u8 {
        let mut score = 5i32;
        for i in 1..=self.cfg.defect_cap as i64 {
            let shifted =
                i as f64 + self.temperature * BOUNDARY_NOISE_FACTOR * logistic_sample(rng);
            if defects as f64 >= shifted {
                score -= 1;
            }
        }
        score.clamp(0, 5) as u8
    }

    fn one_hot(score: u8) -> [f64; 6] {
        let mut z = [0.0; 6];
        z[score as usize] = 40.0;
        z
    }

    /// Score a candidate edit of one subtask against the state it edited.
    pub fn score(
        &self,
        before: &SceneDoc,
        after: &SceneDoc,
        subtask: &SubTask,
    ) -> Result<f64, SceneError> {
        let goal = subtask.implied_constraints(before);
        let exact = score_edit(&self.cfg, before, after, &goal)?;
        if self.temperature == 0.0 {
            return Ok(aggregate(exact));
        }
        let mut rng = rng_for(
            self.seed,
            &["verifier", &digest(before), &digest(after), &subtask.id],
        );
        let ie_fraction = constraint_satisfaction(after, &goal)?;
        let ip_fraction = diff_untouched(before, after, &edited_subjects(&goal));
        let dist = ScoreDistribution {
            ie: Self::one_hot(self.noisy_band(ie_fraction, &mut rng)),
            ip: Self::one_hot(self.noisy_band(ip_fraction, &mut rng)),
            vq: Self::one_hot(self.noisy_vq(after.defects.len(), &mut rng)),
        };
        Ok(expected_reward(&dist))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::Verb;
    use crate::scene::{generate_instance, Difficulty, Selector};

    #[test]
    fn aggregate_known_values() {
        assert_eq!(aggregate(RewardTriple::new(5, 5, 5)), 5.0);
        assert_eq!(aggregate(RewardTriple::new(0, 5, 5)), 0.0);
        // Independent route: Newton's method on x^3 = 32.
        let mut x = 3.0f64;
        for _ in 0..64 {
            x -= (x * x * x - 32.0) / (3.0 * x * x);
        }
        assert!((aggregate(RewardTriple::new(2, 4, 4)) - x).abs() < 1e-9);
    }

    #[test]
    fn aggregate_properties() {
        for ie in 0..=5u8 {
            for ip in 0..=5u8 {
                for vq in 0..=5u8 {
                    let r = aggregate(RewardTriple::new(ie, ip, vq));
                    let perms = [
                        aggregate(RewardTriple::new(ip, ie, vq)),
                        aggregate(RewardTriple::new(vq, ip, ie)),
                        aggregate(RewardTriple::new(ie, vq, ip)),
                    ];
                    for p in perms {
                        assert!((r - p).abs() < 1e-12);
                    }
                    if ie == 0 || ip == 0 || vq == 0 {
                        assert_eq!(r, 0.0);
                    } else {
                        let lo = ie.min(ip).min(vq) as f64;
                        let hi = ie.max(ip).max(vq) as f64;
                        assert!(r >= lo - 1e-12 && r <= hi + 1e-12);
                        // Strict monotonicity when positive.
                        if ie < 5 {
                            assert!(aggregate(RewardTriple::new(ie + 1, ip, vq)) > r);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn expected_scores_uniform_and_one_hot() {
        let d = ScoreDistribution {
            ie: [0.0; 6],
            ip: [1.0; 6],
            vq: [-2.0; 6],
        };
        let (a, b, c) = expected_scores(&d);
        assert!((a - 2.5).abs() < 1e-9);
        assert!((b - 2.5).abs() < 1e-9);
        assert!((c - 2.5).abs() < 1e-9);

        let mut hot = [0.0; 6];
        hot[3] = 40.0;
        let d = ScoreDistribution {
            ie: hot,
            ip: hot,
            vq: hot,
        };
        let (a, _, _) = expected_scores(&d);
        assert!((a - 3.0).abs() < 1e-6);
    }

    #[test]
    fn expected_scores_closed_form_tail() {
        // logits (0,0,0,0,0,ln 5): p5 = 5/10, others 1/10 each.
        let z = [0.0, 0.0, 0.0, 0.0, 0.0, 5.0f64.ln()];
        let d = ScoreDistribution {
            ie: z,
            ip: z,
            vq: z,
        };
        let (s, _, _) = expected_scores(&d);
        let expect = (0.0 + 1.0 + 2.0 + 3.0 + 4.0) / 10.0 + 5.0 * 0.5;
        assert!((s - expect).abs() < 1e-9);
        assert!((s - 3.5).abs() < 1e-9);
    }

    #[test]
    fn expected_scores_invariant_to_constant_shift() {
        let z = [0.3, -1.0, 2.0, 0.1, 0.0, 1.4];
        let mut shifted = z;
        for v in &mut shifted {
            *v += 7.25;
        }
        let a = expectation(&z);
        let b = expectation(&shifted);
        assert!((a - b).abs() < 1e-9);
        assert!((0.0..=5.0).contains(&a));
    }

    #[test]
    fn band_table_matches_rubric_ladder() {
        let cfg = JudgeConfig::default();
        assert_eq!(cfg.band(0.0), 0);
        assert_eq!(cfg.band(0.1), 1);
        assert_eq!(cfg.band(0.2), 2);
        assert_eq!(cfg.band(0.5), 3);
        assert_eq!(cfg.band(0.8), 4);
        assert_eq!(cfg.band(0.99), 5);
        assert_eq!(cfg.band(1.0), 5);
    }

    #[test]
    fn score_edit_banded_example() {
        // 2/4 constraints satisfied, 1 of 5 untouched drifted, 2 defects.
        let cfg = JudgeConfig::default();
        let inst = generate_instance(2, Difficulty::Small);
        let mut before = inst.doc.clone();
        before.elements.truncate(3);
        // Five untouched elements besides the edited subject.
        while before.elements.len() < 6 {
            let id = before.unused_id().unwrap().to_string();
            let n = before.elements.len() as i64;
            let mut attrs = std::collections::BTreeMap::new();
            attrs.insert("label".into(), "badge".into());
            attrs.insert("color".into(), "white".into());
            before.elements.push(crate::scene::Element {
                id,
                kind: crate::scene::ElementKind::Decoration,
                bbox: crate::scene::Rect::new(10 + 120 * n, 850, 100 + 120 * n, 950),
                layer: 0,
                attrs,
            });
        }
        let edited_id = before.elements[0].id.clone();
        let goal = vec![
            Constraint::Replace {
                subject: Selector::Id(edited_id.clone()),
                field: crate::scene::ReplaceField::Color,
                original: vec![before.elements[0].color().unwrap().to_string()],
                new: vec!["navy".to_string()],
            },
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
        let mut after = before.clone();
        after.element_mut(&edited_id).unwrap().attrs.insert("color".into(), "navy".into());
        // Satisfy one add (2/4 total satisfied with the recolor).
        after = crate::scene::apply_constraint_effect(&after, &goal[1]);
        // Drift exactly one untouched element.
        let drift_id = after.elements[2].id.clone();
        after.element_mut(&drift_id).unwrap().attrs.insert("color".into(), "drab".into());
        // Two defects.
        for _ in 0..2 {
            after.defects.push(crate::scene::DefectTag {
                kind: crate::scene::DefectKind::Clutter,
                anchor: crate::scene::DefectAnchor::Region(crate::scene::Rect::new(0, 0, 100, 100)),
            });
        }
        after.normalize();
        let triple = score_edit(&cfg, &before, &after, &goal).unwrap();
        assert_eq!((triple.ie, triple.ip, triple.vq), (3, 4, 3));
    }

    #[test]
    fn identity_edit_scores_clean() {
        let cfg = JudgeConfig::default();
        let inst = generate_instance(6, Difficulty::Small);
        let goal: Vec<Constraint> = inst
            .doc
            .elements
            .iter()
            .map(|e| Constraint::Preserve {
                subject: Selector::Id(e.id.clone()),
                reference: crate::scene::PreserveRef::Element(crate::scene::ElementSnapshot::of(e)),
            })
            .collect();
        let t = score_edit(&cfg, &inst.doc, &inst.doc, &goal).unwrap();
        assert_eq!((t.ie, t.ip, t.vq), (5, 5, 5));
    }

    fn recolor_subtask(doc: &SceneDoc) -> SubTask {
        let obj = doc
            .elements
            .iter()
            .find(|e| e.kind == crate::scene::ElementKind::Object)
            .expect("object element");
        let color = if obj.color() == Some("navy") { "teal" } else { "navy" };
        SubTask::new("s0", Verb::Recolor, Selector::Id(obj.id.clone()), vec![color.into()])
    }

    #[test]
    fn repeats_with_deterministic_profile_match_single_sample() {
        let cfg = JudgeConfig::default();
        let profiles = ProfileSet::deterministic_set();
        let inst = generate_instance(12, Difficulty::Small);
        let subtask = recolor_subtask(&inst.doc);
        let goal = subtask.implied_constraints(&inst.doc);
        let call = ToolCall::global(crate::tools::GLOBAL_EDITOR_A, &subtask.tokens());
        let one = reward_with_repeats(
            &cfg, &profiles, &inst.doc, &subtask, &goal, &call, None, "k", 5, 0, 1,
        )
        .unwrap();
        let two = reward_with_repeats(
            &cfg, &profiles, &inst.doc, &subtask, &goal, &call, None, "k", 5, 0, 2,
        )
        .unwrap();
        assert_eq!(two.samples.len(), 2);
        assert_eq!(two.samples[0], two.samples[1]);
        assert!((one.reward - two.reward).abs() < 1e-12);
    }

    #[test]
    fn repeat_mean_tracks_analytic_expectation() {
        // Success probability one half, no collateral, no defects: the
        // analytic mean reward is (R_hit + R_miss) / 2.
        let cfg = JudgeConfig::default();
        let mut profiles = ProfileSet::default_set();
        {
            let a = profiles.tools.get_mut(crate::tools::GLOBAL_EDITOR_A).unwrap();
            a.success.insert("recolor".into(), 0.5);
            a.collateral = 0.0;
            a.defect_rate = 0.0;
        }
        let inst = generate_instance(13, Difficulty::Small);
        let subtask = recolor_subtask(&inst.doc);
        let goal = subtask.implied_constraints(&inst.doc);
        let call = ToolCall::global(crate::tools::GLOBAL_EDITOR_A, &subtask.tokens());

        let hit = {
            let after = crate::scene::apply_constraint_effect(&inst.doc, &goal[0]);
            aggregate(score_edit(&cfg, &inst.doc, &after, &goal).unwrap())
        };
        let miss = aggregate(score_edit(&cfg, &inst.doc, &inst.doc, &goal).unwrap());
        let expectation = (hit + miss) / 2.0;
        let sigma = (hit - miss).abs() / 2.0;

        let n = 1000u64;
        let mut total = 0.0;
        for s in 0..n {
            let rec = reward_with_repeats(
                &cfg, &profiles, &inst.doc, &subtask, &goal, &call, None, "k", s, 0, 1,
            )
            .unwrap();
            total += rec.reward;
        }
        let mean = total / n as f64;
        let tol = 3.0 * sigma / (n as f64).sqrt();
        assert!(
            (mean - expectation).abs() < tol,
            "mean {mean} vs expectation {expectation} (tol {tol})"
        );
    }

    #[test]
    fn verifier_temperature_zero_equals_exact_judge() {
        let profiles = ProfileSet::default_set();
        let verifier = Verifier::new(JudgeConfig::default(), 0.0, 17);
        for seed in 0..20u64 {
            let inst = generate_instance(seed, Difficulty::Small);
            let subtask = recolor_subtask(&inst.doc);
            let goal = subtask.implied_constraints(&inst.doc);
            let call = ToolCall::global(crate::tools::GLOBAL_EDITOR_B, &subtask.tokens());
            let after = execute_tool(&inst.doc, &call, None, &subtask, &profiles, seed).unwrap();
            let exact = aggregate(
                score_edit(&JudgeConfig::default(), &inst.doc, &after, &goal).unwrap(),
            );
            let got = verifier.score(&inst.doc, &after, &subtask).unwrap();
            assert_eq!(got, exact);
        }
    }

    #[test]
    fn verifier_perfect_edit_scores_five_at_zero_temperature() {
        let verifier = Verifier::new(JudgeConfig::default(), 0.0, 0);
        let inst = generate_instance(21, Difficulty::Small);
        let subtask = recolor_subtask(&inst.doc);
        let goal = subtask.implied_constraints(&inst.doc);
        let after = crate::scene::apply_constraint_effect(&inst.doc, &goal[0]);
        assert_eq!(verifier.score(&inst.doc, &after, &subtask).unwrap(), 5.0);
    }

    #[test]
    fn verifier_noise_is_calibrated() {
        let inst = generate_instance(23, Difficulty::Small);
        let subtask = recolor_subtask(&inst.doc);
        let goal = subtask.implied_constraints(&inst.doc);
        let after = crate::scene::apply_constraint_effect(&inst.doc, &goal[0]);
        let exact = Verifier::new(JudgeConfig::default(), 0.0, 0)
            .score(&inst.doc, &after, &subtask)
            .unwrap();
        let mut total = 0.0;
        let n = 1000;
        for seed in 0..n {
            let v = Verifier::new(JudgeConfig::default(), 1.0, seed);
            total += v.score(&inst.doc, &after, &subtask).unwrap();
        }
        let mean = total / n as f64;
        assert!(
            (mean - exact).abs() < 0.2,
            "noisy mean {mean} drifted from exact {exact}"
        );
    }
}
