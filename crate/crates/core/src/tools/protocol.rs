//! Wire protocol for tool calls: parsing, schema validation, and canonical
//! re-serialization of `{"tool": <string>, "arguments": <object>}` payloads.

use serde_json::Value;

use super::{is_analysis, is_global_editor, is_registered, ToolCall, ToolError, REGION_EDITOR};
use crate::util::canonical_json;

fn schema_err(path: &str, message: impl Into<String>) -> ToolError {
    ToolError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn check_payload(path: &str, v: &Value) -> Result<(), ToolError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema_err(path, "payload must be an array of strings"))?;
    for (i, item) in arr.iter().enumerate() {
        if !item.is_string() {
            return Err(schema_err(&format!("{path}[{i}]"), "payload entries must be strings"));
        }
    }
    Ok(())
}

/// Parse and schema-validate a raw tool call.
///
/// Error classes: malformed JSON is a `parse-error`; an unregistered tool is
/// an `unknown-tool-error`; everything else wrong is a `schema-error` naming
/// the offending field path.
pub fn validate_call(raw: &[u8]) -> Result<ToolCall, ToolError> {
    let value: Value =
        serde_json::from_slice(raw).map_err(|e| ToolError::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema_err("", "tool call must be a JSON object"))?;

    for key in obj.keys() {
        if key != "tool" && key != "arguments" {
            return Err(schema_err(key, "unexpected top-level field"));
        }
    }
    let tool = obj
        .get("tool")
        .ok_or_else(|| schema_err("tool", "missing field"))?
        .as_str()
        .ok_or_else(|| schema_err("tool", "must be a string"))?
        .to_string();
    if !is_registered(&tool) {
        return Err(ToolError::UnknownTool(tool));
    }
    let arguments = match obj.get("arguments") {
        None => return Err(schema_err("arguments", "missing field")),
        Some(v) => v
            .as_object()
            .ok_or_else(|| schema_err("arguments", "must be an object"))?
            .clone(),
    };

    if tool == REGION_EDITOR {
        match arguments.get("region_number") {
            None => {
                return Err(schema_err("arguments.region_number", "missing required field"))
            }
            Some(v) => {
                let n = v.as_u64().ok_or_else(|| {
                    schema_err("arguments.region_number", "must be a non-negative integer")
                })?;
                if n < 1 {
                    return Err(schema_err("arguments.region_number", "must be >= 1"));
                }
            }
        }
        for (key, v) in &arguments {
            match key.as_str() {
                "region_number" => {}
                "analysis" => {
                    let name = v.as_str().ok_or_else(|| {
                        schema_err("arguments.analysis", "must be a string")
                    })?;
                    if !is_analysis(name) {
                        return Err(schema_err(
                            "arguments.analysis",
                            format!("{name} is not an analysis tool"),
                        ));
                    }
                }
                "payload" => check_payload("arguments.payload", v)?,
                other => {
                    return Err(schema_err(
                        &format!("arguments.{other}"),
                        "unexpected field for the region editor",
                    ))
                }
            }
        }
    } else if is_global_editor(&tool) {
        for (key, v) in &arguments {
            match key.as_str() {
                "payload" => check_payload("arguments.payload", v)?,
                other => {
                    return Err(schema_err(
                        &format!("arguments.{other}"),
                        "unexpected field for a global editor",
                    ))
                }
            }
        }
    } else {
        // Analysis tools take no arguments.
        if let Some(key) = arguments.keys().next() {
            return Err(schema_err(
                &format!("arguments.{key}"),
                "analysis tools take no arguments",
            ));
        }
    }

    Ok(ToolCall { tool, arguments })
}

/// Canonical wire bytes of a call: sorted keys, compact separators.
pub fn canonical_call_json(call: &ToolCall) -> String {
    canonical_json(call)
}
