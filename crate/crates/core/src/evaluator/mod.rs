//! Fitness evaluation contract, wire records and backends.
//!
//! An evaluator answers [`EvalRequest`]s with [`EvalResponse`]s. A successful
//! response carries the fitness of the network truncated after every active
//! block, preceded by the floor fitness of the bare head + tail network.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::Genome;

mod external;
mod surrogate;

pub use external::{ExternalEvaluator, HANDSHAKE_PROTOCOL, HANDSHAKE_VERSION};
pub use surrogate::{noise_unit, SurrogateEvaluator, SURROGATE_FLOOR};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("failed to spawn evaluator `{command}`: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("evaluator handshake failed: {0}")]
    Handshake(String),
    #[error("empty evaluator command")]
    EmptyCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub id: String,
    pub genome: Genome,
    pub scale: u32,
    pub budget: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub id: String,
    pub status: EvalStatus,
    #[serde(default, deserialize_with = "nullable_f64")]
    pub fitness: f64,
    #[serde(default, deserialize_with = "nullable_f64s")]
    pub prefix_fitness: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

// Evaluators written in other languages may emit NaN / Infinity; those are
// mapped to null before parsing and surface here as NaN.
fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nullable_f64s<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?
        .into_iter()
        .map(|v| v.unwrap_or(f64::NAN))
        .collect())
}

impl EvalResponse {
    pub fn ok(id: impl Into<String>, prefix_fitness: Vec<f64>) -> Self {
        let fitness = prefix_fitness.last().copied().unwrap_or(f64::NAN);
        EvalResponse { id: id.into(), status: EvalStatus::Ok, fitness, prefix_fitness, message: None }
    }

    pub fn error(id: impl Into<String>, message: impl Into<String>) -> Self {
        EvalResponse {
            id: id.into(),
            status: EvalStatus::Error,
            fitness: f64::NAN,
            prefix_fitness: Vec::new(),
            message: Some(message.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }

    /// Checks the success contract against the genome that was evaluated.
    pub fn check(&self, genome: &Genome) -> Result<(), String> {
        if self.status != EvalStatus::Ok {
            return Ok(());
        }
        let expected = genome.active_count() + 1;
        if self.prefix_fitness.len() != expected {
            return Err(format!(
                "expected {expected} prefix values, got {}",
                self.prefix_fitness.len()
            ));
        }
        if !self.fitness.is_finite() || self.prefix_fitness.iter().any(|v| !v.is_finite()) {
            return Err("non-finite fitness".into());
        }
        if self.prefix_fitness.last() != Some(&self.fitness) {
            return Err("fitness differs from last prefix value".into());
        }
        Ok(())
    }

    /// Turns a contract-violating success into an error response.
    pub fn checked(self, genome: &Genome) -> Self {
        match self.check(genome) {
            Ok(()) => self,
            Err(msg) => EvalResponse::error(self.id, msg),
        }
    }

    /// Parses one wire line, accepting the non-standard NaN / Infinity tokens.
    pub fn parse_line(line: &str) -> Result<Self, serde_json::Error> {
        match serde_json::from_str(line) {
            Ok(r) => Ok(r),
            Err(first) => {
                let lenient = line
                    .replace("-Infinity", "null")
                    .replace("Infinity", "null")
                    .replace("NaN", "null");
                if lenient == line {
                    return Err(first);
                }
                serde_json::from_str(&lenient).map_err(|_| first)
            }
        }
    }
}

/// A fitness backend. Responses are returned in request order, one per
/// request; per-request failures are error responses, not `Err`.
pub trait Evaluator {
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResponse>, EvalError>;
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate_batch(&mut self, requests: &[EvalRequest]) -> Result<Vec<EvalResponse>, EvalError> {
        (**self).evaluate_batch(requests)
    }
}

/// Memo of successful evaluations keyed by genome text, scale, budget and
/// seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCache {
    entries: BTreeMap<String, EvalResponse>,
    #[serde(skip)]
    backend_requests: usize,
}

impl EvalCache {
    pub fn key(req: &EvalRequest) -> String {
        format!("{}|x{}|b{}|s{}", req.genome.encode_text(), req.scale, req.budget, req.seed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Requests forwarded to a backend since this cache was created or loaded.
    pub fn backend_requests(&self) -> usize {
        self.backend_requests
    }

    /// Answers hits from the memo and forwards the distinct misses to
    /// `backend` in a single batch. Only successes are memoized.
    pub fn evaluate(
        &mut self,
        backend: &mut dyn Evaluator,
        requests: &[EvalRequest],
    ) -> Result<Vec<EvalResponse>, EvalError> {
        let keys: Vec<String> = requests.iter().map(Self::key).collect();
        let mut miss_keys: Vec<&str> = Vec::new();
        let mut misses = Vec::new();
        for (req, key) in requests.iter().zip(&keys) {
            if !self.entries.contains_key(key) && !miss_keys.contains(&key.as_str()) {
                miss_keys.push(key);
                misses.push(req.clone());
            }
        }
        let mut fresh: BTreeMap<&str, EvalResponse> = BTreeMap::new();
        if !misses.is_empty() {
            self.backend_requests += misses.len();
            let answers = backend.evaluate_batch(&misses)?;
            for ((key, req), resp) in miss_keys.iter().zip(&misses).zip(answers) {
                let resp = resp.checked(&req.genome);
                if resp.is_ok() {
                    self.entries.insert(key.to_string(), resp.clone());
                }
                fresh.insert(key, resp);
            }
        }
        Ok(requests
            .iter()
            .zip(&keys)
            .map(|(req, key)| {
                let mut resp = self
                    .entries
                    .get(key)
                    .or_else(|| fresh.get(key.as_str()))
                    .cloned()
                    .expect("every key is cached or freshly answered");
                resp.id = req.id.clone();
                resp
            })
            .collect())
    }
}

/// Evaluates one genome through the cache.
pub fn cached_evaluate(
    cache: &mut EvalCache,
    backend: &mut dyn Evaluator,
    request: &EvalRequest,
) -> Result<EvalResponse, EvalError> {
    Ok(cache.evaluate(backend, std::slice::from_ref(request))?.remove(0))
}
