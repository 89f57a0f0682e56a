//! Evaluation through a child process speaking JSON lines on stdin/stdout.
//!
//! Each request is one line `{"id", "genome", "resolution", "objectives"}`;
//! each response is one line `{"id", "accuracy", "extras"}` or
//! `{"id", "error"}`. Responses may arrive in any order. Unanswered requests
//! are resent after the timeout, a crashed child is restarted and its
//! outstanding requests resent; answers for ids no longer outstanding are
//! dropped.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalRequest, EvalResult, Evaluator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        ExternalConfig { command: Vec::new(), timeout_secs: 24.0 * 3600.0, max_retries: 3 }
    }
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    id: Option<u64>,
    accuracy: Option<f64>,
    #[serde(default)]
    extras: BTreeMap<String, f64>,
    error: Option<String>,
}

struct ChildProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl ChildProcess {
    fn spawn(cfg: &ExternalConfig) -> Result<ChildProcess, EvalError> {
        let (program, args) = cfg.command.split_first().ok_or_else(|| EvalError::Spawn("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Spawn(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ChildProcess { child, stdin, lines })
    }

    fn send(&mut self, req: &EvalRequest) -> std::io::Result<()> {
        let line = serde_json::to_string(req).expect("request serializes");
        writeln!(self.stdin, "{line}")?;
        self.stdin.flush()
    }

    fn shutdown(mut self) {
        drop(self.stdin);
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct Pending<'a> {
    request: &'a EvalRequest,
    attempts: u32,
    sent_at: Instant,
    deadline: Instant,
}

pub struct ExternalEvaluator {
    cfg: ExternalConfig,
    process: Option<ChildProcess>,
}

impl ExternalEvaluator {
    pub fn new(cfg: ExternalConfig) -> ExternalEvaluator {
        ExternalEvaluator { cfg, process: None }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.cfg.timeout_secs.max(0.0))
    }

    fn process(&mut self) -> Result<&mut ChildProcess, EvalError> {
        if self.process.is_none() {
            self.process = Some(ChildProcess::spawn(&self.cfg)?);
        }
        Ok(self.process.as_mut().expect("just spawned"))
    }

    fn restart(&mut self) -> Result<(), EvalError> {
        if let Some(old) = self.process.take() {
            old.shutdown();
        }
        self.process()?;
        Ok(())
    }

    /// Sends everything in `pending`; a write failure means the child is gone.
    fn send_all(&mut self, pending: &mut HashMap<u64, Pending<'_>>, ids: &[u64]) -> Result<bool, EvalError> {
        let timeout = self.timeout();
        let process = self.process()?;
        for id in ids {
            let p = pending.get_mut(id).expect("pending id");
            p.sent_at = Instant::now();
            p.deadline = p.sent_at + timeout;
            if process.send(p.request).is_err() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Per-request outcomes in request order. Only failures that affect the
    /// whole batch (crash loops, unparseable output) are returned as `Err`.
    pub fn evaluate_each(&mut self, batch: &[EvalRequest]) -> Result<Vec<Result<EvalResult, EvalError>>, EvalError> {
        let now = Instant::now();
        let mut pending: HashMap<u64, Pending<'_>> = batch
            .iter()
            .map(|r| (r.id, Pending { request: r, attempts: 0, sent_at: now, deadline: now }))
            .collect();
        let mut done: HashMap<u64, Result<EvalResult, EvalError>> = HashMap::new();
        let mut restarts = 0;

        let order: Vec<u64> = batch.iter().map(|r| r.id).collect();
        let mut alive = self.send_all(&mut pending, &order)?;

        while !pending.is_empty() {
            if !alive {
                restarts += 1;
                if restarts > self.cfg.max_retries {
                    let reason = "restart limit reached".to_string();
                    if let Some(old) = self.process.take() {
                        old.shutdown();
                    }
                    return Err(EvalError::ChildCrashed(reason));
                }
                log::warn!("evaluator process exited; restarting ({restarts}/{})", self.cfg.max_retries);
                self.restart()?;
                let mut ids: Vec<u64> = pending.keys().copied().collect();
                ids.sort_unstable();
                alive = self.send_all(&mut pending, &ids)?;
                continue;
            }

            let next_deadline = pending.values().map(|p| p.deadline).min().expect("non-empty");
            let wait = next_deadline.saturating_duration_since(Instant::now());
            let received = self.process()?.lines.recv_timeout(wait);
            match received {
                Ok(line) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let resp: WireResponse =
                        serde_json::from_str(&line).map_err(|_| EvalError::MalformedResponse(line.clone()))?;
                    let Some(id) = resp.id else {
                        return Err(EvalError::MalformedResponse(line));
                    };
                    let Some(p) = pending.get_mut(&id) else { continue };
                    if let Some(message) = resp.error {
                        p.attempts += 1;
                        if p.attempts > self.cfg.max_retries {
                            pending.remove(&id);
                            done.insert(id, Err(EvalError::Rejected { id, message }));
                        } else {
                            alive = self.send_all(&mut pending, &[id])?;
                        }
                        continue;
                    }
                    let accuracy = resp.accuracy.ok_or_else(|| EvalError::MalformedResponse(line.clone()))?;
                    let p = pending.remove(&id).expect("pending id");
                    let outcome = if accuracy.is_finite() && (0.0..=1.0).contains(&accuracy) {
                        let mut res = EvalResult::new(id, accuracy, self.id());
                        res.extras = resp.extras;
                        res.wall_time = p.sent_at.elapsed().as_secs_f64();
                        Ok(res)
                    } else {
                        Err(EvalError::InvalidAccuracy { id, value: accuracy })
                    };
                    done.insert(id, outcome);
                }
                Err(RecvTimeoutError::Timeout) => {
                    let now = Instant::now();
                    let mut expired: Vec<u64> =
                        pending.iter().filter(|(_, p)| p.deadline <= now).map(|(&id, _)| id).collect();
                    expired.sort_unstable();
                    let mut resend = Vec::new();
                    for id in expired {
                        let p = pending.get_mut(&id).expect("pending id");
                        p.attempts += 1;
                        if p.attempts > self.cfg.max_retries {
                            pending.remove(&id);
                            done.insert(id, Err(EvalError::Timeout(id)));
                        } else {
                            log::warn!("request {id} timed out; resending (attempt {})", p.attempts + 1);
                            resend.push(id);
                        }
                    }
                    alive = self.send_all(&mut pending, &resend)?;
                }
                Err(RecvTimeoutError::Disconnected) => alive = false,
            }
        }
        Ok(order.iter().map(|id| done.remove(id).expect("every id resolved")).collect())
    }
}

impl Evaluator for ExternalEvaluator {
    fn id(&self) -> &str {
        "external"
    }

    fn evaluate(&mut self, batch: &[EvalRequest]) -> Result<Vec<EvalResult>, EvalError> {
        self.evaluate_each(batch)?.into_iter().collect()
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Some(p) = self.process.take() {
            p.shutdown();
        }
    }
}
