//! Tool fidelity profiles: per-verb success probabilities, collateral and
//! defect rates. Profiles ship as data (`profiles/1` JSON) so experiments
//! and tests can swap in degenerate ones.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ToolError;
use crate::vocab;

pub const PROFILE_SCHEMA: &str = "profiles/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolProfile {
    /// Probability the intended effect lands, keyed by verb token.
    pub success: BTreeMap<String, f64>,
    /// Probability each non-target element in the blast zone drifts.
    pub collateral: f64,
    /// Probability one defect is injected per execution.
    pub defect_rate: f64,
    /// Verbs this tool accepts at all.
    pub supported_verbs: Vec<String>,
}

impl ToolProfile {
    pub fn success_for(&self, verb: &str) -> f64 {
        self.success.get(verb).copied().unwrap_or(0.0)
    }

    pub fn supports(&self, verb: &str) -> bool {
        self.supported_verbs.iter().any(|v| v == verb)
    }

    fn validate(&self, tool: &str) -> Result<(), ToolError> {
        for verb in vocab::VERBS {
            let p = self.success.get(*verb).ok_or_else(|| {
                ToolError::Profile(format!("tool {tool} missing success entry for verb {verb}"))
            })?;
            if !(0.0..=1.0).contains(p) {
                return Err(ToolError::Profile(format!(
                    "tool {tool} verb {verb}: probability {p} outside [0,1]"
                )));
            }
        }
        for (name, p) in [("collateral", self.collateral), ("defect_rate", self.defect_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ToolError::Profile(format!(
                    "tool {tool} {name}: probability {p} outside [0,1]"
                )));
            }
        }
        for v in &self.supported_verbs {
            if !vocab::VERBS.contains(&v.as_str()) {
                return Err(ToolError::Profile(format!("tool {tool}: unknown verb {v}")));
            }
        }
        Ok(())
    }
}

/// The profile set for all editing tools plus the bbox proposer's verb list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSet {
    pub schema: String,
    pub tools: BTreeMap<String, ToolProfile>,
}

impl ProfileSet {
    pub fn get(&self, tool: &str) -> Result<&ToolProfile, ToolError> {
        self.tools
            .get(tool)
            .ok_or_else(|| ToolError::Profile(format!("no profile for tool {tool}")))
    }

    pub fn validate(&self) -> Result<(), ToolError> {
        if self.schema != PROFILE_SCHEMA {
            return Err(ToolError::Profile(format!("unknown profile schema {}", self.schema)));
        }
        for required in [super::REGION_EDITOR, super::GLOBAL_EDITOR_A, super::GLOBAL_EDITOR_B, super::BBOX_TOOL] {
            if !self.tools.contains_key(required) {
                return Err(ToolError::Profile(format!("missing profile for {required}")));
            }
        }
        for (tool, p) in &self.tools {
            p.validate(tool)?;
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<ProfileSet, ToolError> {
        let set: ProfileSet =
            serde_json::from_str(json).map_err(|e| ToolError::Profile(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<ProfileSet, ToolError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ToolError::Profile(format!("read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The stock profile set: a precise region editor with heavy in-mask
    /// collateral, a cautious global editor that cannot rewrite text, and an
    /// aggressive global editor that damages nearby content.
    pub fn default_set() -> ProfileSet {
        Self::from_json(include_str!("profiles_default.json")).expect("embedded default profiles")
    }

    /// Fully deterministic profiles (all probabilities 0 or 1) used by the
    /// brute-force comparison suite.
    pub fn deterministic_set() -> ProfileSet {
        Self::from_json(include_str!("profiles_deterministic.json"))
            .expect("embedded deterministic profiles")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_sets_validate() {
        ProfileSet::default_set();
        ProfileSet::deterministic_set();
    }

    #[test]
    fn deterministic_set_is_zero_one() {
        let set = ProfileSet::deterministic_set();
        for p in set.tools.values() {
            for v in p.success.values() {
                assert!(*v == 0.0 || *v == 1.0);
            }
            assert!(p.collateral == 0.0 || p.collateral == 1.0);
            assert!(p.defect_rate == 0.0 || p.defect_rate == 1.0);
        }
    }

    #[test]
    fn missing_verb_rejected() {
        let mut set = ProfileSet::default_set();
        set.tools
            .get_mut(super::super::GLOBAL_EDITOR_A)
            .unwrap()
            .success
            .remove("recolor");
        assert!(matches!(set.validate(), Err(ToolError::Profile(_))));
    }

    #[test]
    fn out_of_range_probability_rejected() {
        let mut set = ProfileSet::default_set();
        set.tools.get_mut(super::super::REGION_EDITOR).unwrap().collateral = 1.5;
        assert!(matches!(set.validate(), Err(ToolError::Profile(_))));
    }
}
