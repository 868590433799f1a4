//! Client for evaluator processes speaking line-delimited JSON over
//! stdin/stdout.
//!
//! The process announces itself with a handshake line, then answers each
//! request line with one response line. Requests of a batch are written
//! back to back and answers are matched by id, in any order.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::Deserialize;

use super::{EvalError, EvalRequest, EvalResponse, Evaluator};

pub const HANDSHAKE_PROTOCOL: &str = "esrn-eval";
pub const HANDSHAKE_VERSION: u32 = 1;

#[derive(Deserialize)]
struct Handshake {
    protocol: String,
    version: u32,
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    /// `None` marks end of stdout.
    lines: Receiver<Option<String>>,
}

impl Worker {
    fn spawn(command: &[String], timeout: Duration) -> Result<Worker, EvalError> {
        let (program, args) = command.split_first().ok_or(EvalError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| EvalError::Spawn { command: command.join(" "), source })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Some(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(None);
        });
        let mut worker = Worker { child, stdin, lines };
        worker.handshake(timeout)?;
        Ok(worker)
    }

    fn handshake(&mut self, timeout: Duration) -> Result<(), EvalError> {
        let line = match self.lines.recv_timeout(timeout) {
            Ok(Some(line)) => line,
            Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                return Err(EvalError::Handshake("process exited before handshake".into()))
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(EvalError::Handshake("no handshake within timeout".into()))
            }
        };
        let hs: Handshake = serde_json::from_str(&line)
            .map_err(|e| EvalError::Handshake(format!("{e}: {line}")))?;
        if hs.protocol != HANDSHAKE_PROTOCOL || hs.version != HANDSHAKE_VERSION {
            return Err(EvalError::Handshake(format!(
                "unsupported protocol {} v{}",
                hs.protocol, hs.version
            )));
        }
        Ok(())
    }

    fn send(&mut self, req: &EvalRequest) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(req)?;
        line.push(b'\n');
        self.stdin.write_all(&line)?;
        self.stdin.flush()
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Pipelined client for an external evaluator process.
///
/// Timeouts count inactivity: a round fails when no response arrives for
/// `timeout`. Pending requests are resent once after the first timeout and
/// failed after the second. If the process exits it is restarted once per
/// client lifetime; after that, outstanding and future requests fail.
pub struct ExternalEvaluator {
    command: Vec<String>,
    timeout: Duration,
    worker: Option<Worker>,
    restart_available: bool,
    dead: bool,
}

impl ExternalEvaluator {
    /// Starts the process and checks its handshake.
    pub fn spawn(command: Vec<String>, timeout: Duration) -> Result<Self, EvalError> {
        let worker = Worker::spawn(&command, timeout)?;
        Ok(ExternalEvaluator {
            command,
            timeout,
            worker: Some(worker),
            restart_available: true,
            dead: false,
        })
    }

    fn restart(&mut self) -> bool {
        self.worker = None;
        if !self.restart_available {
            self.dead = true;
            return false;
        }
        self.restart_available = false;
        warn!("evaluator process exited; restarting `{}`", self.command.join(" "));
        match Worker::spawn(&self.command, self.timeout) {
            Ok(w) => {
                self.worker = Some(w);
                true
            }
            Err(e) => {
                warn!("evaluator restart failed: {e}");
                self.dead = true;
                false
            }
        }
    }

    /// Restarts the process and resends `pending`; false once no restart is
    /// left or the new process cannot be fed either.
    fn recover(&mut self, requests: &[EvalRequest], pending: &[usize]) -> bool {
        while self.restart() {
            if self.send_pending(requests, pending) {
                return true;
            }
        }
        false
    }

    /// Writes every pending request; returns false if the pipe is broken.
    fn send_pending(&mut self, requests: &[EvalRequest], pending: &[usize]) -> bool {
        let Some(worker) = self.worker.as_mut() else { return false };
        pending.iter().all(|&i| worker.send(&requests[i]).is_ok())
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResponse>, EvalError> {
        let mut results: Vec<Option<EvalResponse>> = vec![None; requests.len()];
        let index: HashMap<&str, usize> =
            requests.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
        let pending = |results: &[Option<EvalResponse>]| -> Vec<usize> {
            (0..results.len()).filter(|&i| results[i].is_none()).collect()
        };

        let mut retried = false;
        let mut failure: Option<&'static str> = None;
        if self.dead {
            failure = Some("evaluator process is gone");
        } else {
            let all = pending(&results);
            if !self.send_pending(requests, &all) && !self.recover(requests, &all) {
                failure = Some("evaluator process exited");
            }
        }

        while failure.is_none() && results.iter().any(Option::is_none) {
            let worker = self.worker.as_ref().expect("worker is running");
            match worker.lines.recv_timeout(self.timeout) {
                Ok(Some(line)) => match EvalResponse::parse_line(&line) {
                    Ok(resp) => match index.get(resp.id.as_str()) {
                        Some(&i) if results[i].is_none() => {
                            results[i] = Some(resp.checked(&requests[i].genome));
                        }
                        _ => debug!("ignoring response for id {:?}", resp.id),
                    },
                    Err(e) => warn!("evaluator protocol error ({e}); raw line: {line}"),
                },
                Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                    if !self.recover(requests, &pending(&results)) {
                        failure = Some("evaluator process exited");
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    if retried {
                        failure = Some("evaluator timed out");
                    } else {
                        retried = true;
                        let left = pending(&results);
                        warn!("evaluator timed out; resending {} requests", left.len());
                        if !self.send_pending(requests, &left) && !self.recover(requests, &left) {
                            failure = Some("evaluator process exited");
                        }
                    }
                }
            }
        }

        Ok(results
            .into_iter()
            .zip(requests)
            .map(|(r, req)| {
                r.unwrap_or_else(|| {
                    EvalResponse::error(req.id.clone(), failure.unwrap_or("no response"))
                })
            })
            .collect())
    }
}
