//! Client for the constraint-generation bridge.
//!
//! The bridge is a separate process that turns natural-language instructions
//! into constraint functions and answers membership queries for them. The
//! two sides talk newline-delimited JSON over the child's stdin/stdout, one
//! response line per request line:
//!
//! ```text
//! {"op":"generate","instruction":...,"env":...,"params":...} -> {"handle":H,"bbox":...,"provenance":...}
//! {"op":"eval","handle":H,"points":[[x,y,z],...]}           -> {"results":[bool,...]}
//! {"op":"bbox","handle":H}                                    -> {"bbox":...}
//! {"op":"shutdown"}                                           -> clean exit
//! ```
//!
//! Failures come back as `{"error":{"code":...,"message":...}}` and do not end
//! the session.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::constraint::{ConstraintExpr, ExternalOracle};
use crate::geometry::{Aabb, Point3};
use crate::scene::{BridgeRequest, ConstraintSource, EnvironmentModel, Scenario};

/// Environment variable overriding the bridge launch command.
pub const BRIDGE_CMD_ENV: &str = "STPR_BRIDGE_CMD";
pub const DEFAULT_BRIDGE_CMD: &str = "stpr-bridge";
/// Largest point batch sent in one `eval` request.
pub const MAX_EVAL_BATCH: usize = 100_000;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("bridge unavailable: {0}")]
    Unavailable(String),
    #[error("bridge i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bridge protocol: {0}")]
    Protocol(String),
    #[error("bridge error {code}: {message}")]
    Remote { code: String, message: String },
}

/// One request/response exchange with the bridge.
pub trait Transport {
    fn exchange(&mut self, request: &str) -> Result<String, BridgeError>;
}

/// Transport over a child process speaking the stdio protocol.
pub struct ProcessTransport {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl ProcessTransport {
    /// Launch `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, BridgeError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BridgeError::Unavailable(format!("cannot launch `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child
            .stdout
            .take()
            .map(BufReader::new)
            .ok_or_else(|| BridgeError::Unavailable("child has no stdout".into()))?;
        Ok(ProcessTransport { child, stdin, stdout })
    }

    fn finish(&mut self) -> Result<std::process::ExitStatus, BridgeError> {
        drop(self.stdin.take());
        Ok(self.child.wait()?)
    }
}

impl Transport for ProcessTransport {
    fn exchange(&mut self, request: &str) -> Result<String, BridgeError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| BridgeError::Protocol("session already closed".into()))?;
        let sent = stdin
            .write_all(request.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush());
        if let Err(e) = sent {
            return Err(match e.kind() {
                std::io::ErrorKind::BrokenPipe => BridgeError::Unavailable("bridge exited".into()),
                _ => BridgeError::Io(e),
            });
        }
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(BridgeError::Unavailable("bridge closed its output".into()));
        }
        Ok(line)
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            drop(self.stdin.take());
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// Result of a `generate` request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedHandle {
    pub handle: String,
    #[serde(default)]
    pub bbox: Option<Aabb>,
    #[serde(default)]
    pub provenance: Value,
    /// Wall-clock time of the request, seconds.
    #[serde(skip)]
    pub elapsed: f64,
}

impl GeneratedHandle {
    pub fn to_expr(&self) -> ConstraintExpr {
        ConstraintExpr::External {
            handle: self.handle.clone(),
            bbox: self.bbox,
        }
    }
}

/// A serial request/response session with the bridge.
pub struct BridgeSession<T: Transport = ProcessTransport> {
    transport: T,
    batch_size: usize,
}

impl BridgeSession<ProcessTransport> {
    /// Start the bridge named by `STPR_BRIDGE_CMD` (or the default command),
    /// appending `extra_args`.
    pub fn launch(command: Option<&str>, extra_args: &[&str]) -> Result<Self, BridgeError> {
        let base = match command {
            Some(c) => c.to_owned(),
            None => std::env::var(BRIDGE_CMD_ENV).unwrap_or_else(|_| DEFAULT_BRIDGE_CMD.to_owned()),
        };
        let mut cmd = base;
        for a in extra_args {
            cmd.push(' ');
            cmd.push_str(a);
        }
        Ok(BridgeSession::new(ProcessTransport::spawn(&cmd)?))
    }

    /// Send `shutdown` and wait for the child to exit.
    pub fn shutdown(mut self) -> Result<(), BridgeError> {
        // the reply, if any, is irrelevant once the child exits
        let _ = self.transport.exchange(r#"{"op":"shutdown"}"#);
        let status = self.transport.finish()?;
        if status.success() {
            Ok(())
        } else {
            Err(BridgeError::Protocol(format!("bridge exited with {status}")))
        }
    }
}

impl<T: Transport> BridgeSession<T> {
    pub fn new(transport: T) -> Self {
        BridgeSession {
            transport,
            batch_size: MAX_EVAL_BATCH,
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.clamp(1, MAX_EVAL_BATCH);
        self
    }

    fn call(&mut self, request: &Value) -> Result<Value, BridgeError> {
        let line = self.transport.exchange(&request.to_string())?;
        let v: Value = serde_json::from_str(line.trim_end())
            .map_err(|e| BridgeError::Protocol(format!("unparseable response: {e}")))?;
        if let Some(err) = v.get("error") {
            return Err(BridgeError::Remote {
                code: err.get("code").and_then(Value::as_str).unwrap_or("unknown").to_owned(),
                message: err.get("message").and_then(Value::as_str).unwrap_or_default().to_owned(),
            });
        }
        Ok(v)
    }

    pub fn generate(
        &mut self,
        instruction: &str,
        env: &EnvironmentModel,
        params: &BTreeMap<String, Value>,
        fixture: Option<&str>,
    ) -> Result<GeneratedHandle, BridgeError> {
        let mut req = json!({
            "op": "generate",
            "instruction": instruction,
            "env": env,
            "params": params,
        });
        if let Some(f) = fixture {
            req["fixture"] = json!(f);
        }
        let t0 = Instant::now();
        let resp = self.call(&req)?;
        let mut out: GeneratedHandle = serde_json::from_value(resp)
            .map_err(|e| BridgeError::Protocol(format!("bad generate response: {e}")))?;
        out.elapsed = t0.elapsed().as_secs_f64();
        Ok(out)
    }

    pub fn eval(&mut self, handle: &str, points: &[Point3]) -> Result<Vec<bool>, BridgeError> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(self.batch_size) {
            let coords: Vec<[f64; 3]> = chunk.iter().map(|p| p.to_array()).collect();
            let resp = self.call(&json!({"op": "eval", "handle": handle, "points": coords}))?;
            let results = resp
                .get("results")
                .and_then(Value::as_array)
                .ok_or_else(|| BridgeError::Protocol("eval response lacks `results`".into()))?;
            if results.len() != chunk.len() {
                return Err(BridgeError::Protocol(format!(
                    "sent {} points, got {} results",
                    chunk.len(),
                    results.len()
                )));
            }
            for r in results {
                out.push(
                    r.as_bool()
                        .ok_or_else(|| BridgeError::Protocol(format!("non-boolean result {r}")))?,
                );
            }
        }
        Ok(out)
    }

    pub fn bbox(&mut self, handle: &str) -> Result<Aabb, BridgeError> {
        let resp = self.call(&json!({"op": "bbox", "handle": handle}))?;
        let b = resp
            .get("bbox")
            .cloned()
            .ok_or_else(|| BridgeError::Protocol("bbox response lacks `bbox`".into()))?;
        serde_json::from_value(b).map_err(|e| BridgeError::Protocol(format!("bad bbox: {e}")))
    }

    /// Generate code for every bridge-backed constraint in `scenario`,
    /// replacing each with an external leaf. Returns the total time spent in
    /// `generate` requests.
    pub fn resolve_scenario(&mut self, scenario: &mut Scenario) -> Result<f64, BridgeError> {
        let pending: Vec<(String, BridgeRequest)> = scenario
            .constraints
            .iter()
            .filter_map(|c| match &c.source {
                ConstraintSource::Bridge(req) => Some((c.label.clone(), req.clone())),
                ConstraintSource::Expr(_) => None,
            })
            .collect();
        let mut elapsed = 0.0;
        for (label, req) in pending {
            let h = self.generate(&req.instruction, &scenario.environment, &req.params, req.fixture.as_deref())?;
            elapsed += h.elapsed;
            scenario.resolve(&label, h.to_expr());
        }
        Ok(elapsed)
    }

    pub fn into_transport(self) -> T {
        self.transport
    }
}

impl<T: Transport> ExternalOracle for BridgeSession<T> {
    fn eval_batch(&mut self, handle: &str, points: &[Point3]) -> Result<Vec<bool>, BridgeError> {
        self.eval(handle, points)
    }
}
