//! Remote backend adapter: the same tool-call JSON POSTed to an external
//! endpoint that returns the edited document. Disabled by default; the
//! engine only builds one of these when a config names an endpoint.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ToolCall, ToolError};
use crate::planner::SubTask;
use crate::scene::SceneDoc;
use crate::util::canonical_json;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub call: ToolCall,
    pub doc: SceneDoc,
    pub subtask: SubTask,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<SceneDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Minimal blocking HTTP/1.1 client for the tool endpoint.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    host: String,
    port: u16,
    path: String,
    timeout: Duration,
}

impl RemoteBackend {
    /// Accepts `http://host:port/path` endpoints.
    pub fn new(endpoint: &str) -> Result<RemoteBackend, ToolError> {
        let rest = endpoint
            .strip_prefix("http://")
            .ok_or_else(|| ToolError::Remote(format!("unsupported endpoint {endpoint}")))?;
        let (authority, path) = match rest.find('/') {
            Some(i) => (&rest[..i], rest[i..].to_string()),
            None => (rest, "/".to_string()),
        };
        let (host, port) = match authority.rsplit_once(':') {
            Some((h, p)) => (
                h.to_string(),
                p.parse::<u16>()
                    .map_err(|_| ToolError::Remote(format!("bad port in {endpoint}")))?,
            ),
            None => (authority.to_string(), 80),
        };
        Ok(RemoteBackend {
            host,
            port,
            path,
            timeout: Duration::from_secs(10),
        })
    }

    pub fn execute(
        &self,
        call: &ToolCall,
        doc: &SceneDoc,
        subtask: &SubTask,
        seed: u64,
    ) -> Result<SceneDoc, ToolError> {
        let body = canonical_json(&RemoteRequest {
            call: call.clone(),
            doc: doc.clone(),
            subtask: subtask.clone(),
            seed,
        });
        let raw = self.post(&body)?;
        let resp: RemoteResponse = serde_json::from_str(&raw)
            .map_err(|e| ToolError::Remote(format!("bad response body: {e}")))?;
        if let Some(err) = resp.error {
            return Err(ToolError::Remote(err));
        }
        resp.doc
            .ok_or_else(|| ToolError::Remote("response carried neither doc nor error".into()))
    }

    fn post(&self, body: &str) -> Result<String, ToolError> {
        let addr = format!("{}:{}", self.host, self.port);
        let mut stream = TcpStream::connect(&addr)
            .map_err(|e| ToolError::Remote(format!("connect {addr}: {e}")))?;
        stream.set_read_timeout(Some(self.timeout)).ok();
        stream.set_write_timeout(Some(self.timeout)).ok();
        let request = format!(
            "POST {} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            self.path,
            self.host,
            body.len(),
            body
        );
        stream
            .write_all(request.as_bytes())
            .map_err(|e| ToolError::Remote(format!("write: {e}")))?;
        let mut buf = Vec::new();
        stream
            .read_to_end(&mut buf)
            .map_err(|e| ToolError::Remote(format!("read: {e}")))?;
        let text = String::from_utf8_lossy(&buf);
        let mut sections = text.splitn(2, "\r\n\r\n");
        let head = sections.next().unwrap_or("");
        let body = sections.next().unwrap_or("").to_string();
        let status = head.lines().next().unwrap_or("");
        if !status.contains(" 200") {
            return Err(ToolError::Remote(format!("http status: {status}")));
        }
        Ok(body)
    }
}
