//! The tool suite: analysis tools that propose editable regions, a region
//! editor that modifies masked areas, two whole-scene editors, and the
//! structured JSON call protocol tying them together.
//!
//! Composition rules: each analysis tool feeds the region editor; global
//! editors run standalone. Nothing else is legal.

mod analysis;
mod exec;
mod profile;
mod protocol;
mod remote;

pub use analysis::{analyze_layers, analyze_segments, analyze_text, propose_goal_bboxes};
pub use exec::execute_tool;
pub use profile::{ProfileSet, ToolProfile, PROFILE_SCHEMA};
pub use protocol::{canonical_call_json, validate_call};
pub use remote::{RemoteBackend, RemoteRequest, RemoteResponse};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::scene::Mask;

/// Region-level editor driven by analysis-tool masks.
pub const REGION_EDITOR: &str = "flux_inpaint";
/// Whole-scene editor profiled for preservation over execution strength.
pub const GLOBAL_EDITOR_A: &str = "global_editor_a";
/// Whole-scene editor profiled for execution strength over preservation.
pub const GLOBAL_EDITOR_B: &str = "global_editor_b";

pub const SEGMENT_TOOL: &str = "segment";
pub const OCR_TOOL: &str = "ocr";
pub const LAYERS_TOOL: &str = "layers";
pub const BBOX_TOOL: &str = "bbox";

pub const ANALYSIS_TOOLS: [&str; 4] = [SEGMENT_TOOL, OCR_TOOL, LAYERS_TOOL, BBOX_TOOL];
pub const GLOBAL_EDITORS: [&str; 2] = [GLOBAL_EDITOR_A, GLOBAL_EDITOR_B];
pub const ALL_TOOLS: [&str; 7] = [
    SEGMENT_TOOL,
    OCR_TOOL,
    LAYERS_TOOL,
    BBOX_TOOL,
    REGION_EDITOR,
    GLOBAL_EDITOR_A,
    GLOBAL_EDITOR_B,
];

pub fn is_registered(tool: &str) -> bool {
    ALL_TOOLS.contains(&tool)
}

pub fn is_analysis(tool: &str) -> bool {
    ANALYSIS_TOOLS.contains(&tool)
}

pub fn is_global_editor(tool: &str) -> bool {
    GLOBAL_EDITORS.contains(&tool)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("parse-error: {0}")]
    Parse(String),
    #[error("schema-error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unknown-tool-error: {0}")]
    UnknownTool(String),
    #[error("composition-error: {0}")]
    Composition(String),
    #[error("index-error: {0}")]
    Index(String),
    #[error("verb-error: {0}")]
    Verb(String),
    #[error("profile-error: {0}")]
    Profile(String),
    #[error("remote-error: {0}")]
    Remote(String),
}

impl ToolError {
    /// Stable class token used by conformance tables.
    pub fn class(&self) -> &'static str {
        match self {
            ToolError::Parse(_) => "parse-error",
            ToolError::Schema { .. } => "schema-error",
            ToolError::UnknownTool(_) => "unknown-tool-error",
            ToolError::Composition(_) => "composition-error",
            ToolError::Index(_) => "index-error",
            ToolError::Verb(_) => "verb-error",
            ToolError::Profile(_) => "profile-error",
            ToolError::Remote(_) => "remote-error",
        }
    }
}

/// A structured tool invocation: `{"tool": t, "arguments": a}` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub arguments: Map<String, Value>,
}

impl ToolCall {
    pub fn region(analysis_tool: &str, region_number: u64, payload: &[String]) -> ToolCall {
        let mut arguments = Map::new();
        arguments.insert("analysis".into(), Value::String(analysis_tool.to_string()));
        arguments.insert("region_number".into(), Value::from(region_number));
        arguments.insert(
            "payload".into(),
            Value::Array(payload.iter().map(|t| Value::String(t.clone())).collect()),
        );
        ToolCall {
            tool: REGION_EDITOR.to_string(),
            arguments,
        }
    }

    pub fn global(tool: &str, payload: &[String]) -> ToolCall {
        let mut arguments = Map::new();
        arguments.insert(
            "payload".into(),
            Value::Array(payload.iter().map(|t| Value::String(t.clone())).collect()),
        );
        ToolCall {
            tool: tool.to_string(),
            arguments,
        }
    }

    pub fn region_number(&self) -> Option<u64> {
        self.arguments.get("region_number").and_then(Value::as_u64)
    }

    pub fn analysis_tool(&self) -> Option<&str> {
        self.arguments.get("analysis").and_then(Value::as_str)
    }
}

/// One editable region proposed by an analysis tool. Indices within a
/// result are contiguous from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProposal {
    pub index: u32,
    pub mask: Mask,
    pub description: Vec<String>,
    pub source_tool: String,
}
