//! Closed-loop plan refinement: drop subtasks whose best achievable reward
//! across all tool-region candidates falls below the threshold, then drop
//! plans left too short to be useful training targets.

use serde::{Deserialize, Serialize};

use super::{Plan, PlannerError, Provenance};

pub const REFINE_SCHEMA: &str = "refine/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    /// Reward threshold on the 0..=5 scale.
    pub tau: f64,
    /// Plans shrinking below this many subtasks are dropped whole.
    pub min_retained: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            tau: 3.0,
            min_retained: 1,
        }
    }
}

/// Pre/post statistics emitted alongside the refined corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub schema: String,
    pub tau: f64,
    pub plans_before: usize,
    pub plans_after: usize,
    pub subtasks_before: usize,
    pub subtasks_after: usize,
    pub pre_mean_max_reward: f64,
    pub post_mean_max_reward: f64,
}

/// Best-candidate rewards per subtask of one plan, keyed by subtask id.
/// Callers look them up from the reward table.
pub trait MaxRewardLookup {
    fn max_reward(&self, instruction_id: &str, subtask_id: &str) -> Option<f64>;
}

impl MaxRewardLookup for std::collections::BTreeMap<(String, String), f64> {
    fn max_reward(&self, instruction_id: &str, subtask_id: &str) -> Option<f64> {
        self.get(&(instruction_id.to_string(), subtask_id.to_string())).copied()
    }
}

/// Filter a plan corpus by per-subtask best reward. Retained subtasks keep
/// their relative order; plans falling under `min_retained` are dropped.
pub fn refine_plans<L: MaxRewardLookup>(
    plans: &[Plan],
    rewards: &L,
    cfg: &RefinementConfig,
) -> Result<(Vec<Plan>, RefinementReport), PlannerError> {
    let mut pre_sum = 0.0;
    let mut pre_n = 0usize;
    let mut post_sum = 0.0;
    let mut post_n = 0usize;
    let mut out = Vec::new();

    for plan in plans {
        let mut kept = Vec::new();
        for s in &plan.subtasks {
            let best = rewards.max_reward(&plan.instruction_id, &s.id).ok_or_else(|| {
                PlannerError::Coverage(format!(
                    "reward table missing entry for {}/{}",
                    plan.instruction_id, s.id
                ))
            })?;
            pre_sum += best;
            pre_n += 1;
            if best >= cfg.tau {
                post_sum += best;
                post_n += 1;
                kept.push(s.clone());
            }
        }
        if kept.len() >= cfg.min_retained.max(1) {
            out.push(Plan {
                instruction_id: plan.instruction_id.clone(),
                subtasks: kept,
                provenance: Provenance::Refined,
            });
        }
    }

    let report = RefinementReport {
        schema: REFINE_SCHEMA.to_string(),
        tau: cfg.tau,
        plans_before: plans.len(),
        plans_after: out.len(),
        subtasks_before: pre_n,
        subtasks_after: post_n,
        pre_mean_max_reward: if pre_n == 0 { 0.0 } else { pre_sum / pre_n as f64 },
        post_mean_max_reward: if post_n == 0 { 0.0 } else { post_sum / post_n as f64 },
    };
    Ok((out, report))
}
