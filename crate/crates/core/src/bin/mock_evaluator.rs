//! Evaluator process backed by the surrogate, for exercising the wire
//! protocol end to end. Misbehaviour flags make it usable as a fault
//! injector in tests:
//!
//!   --nan            answer with a NaN fitness
//!   --garbage        print a malformed line before every answer
//!   --extra-keys     add unknown keys to every answer
//!   --batch N        buffer N requests, then answer them in reverse order
//!   --stall-first    ignore the first request it sees (answers a resend)
//!   --stall          never answer
//!   --exit-after N   exit after N answers
//!   --bad-handshake  announce an unknown protocol

use std::io::{self, BufRead, Write};

use esrn::evaluator::{EvalRequest, EvalResponse, SurrogateEvaluator};

#[derive(Default)]
struct Flags {
    nan: bool,
    garbage: bool,
    extra_keys: bool,
    batch: usize,
    stall_first: bool,
    stall: bool,
    exit_after: Option<usize>,
    bad_handshake: bool,
}

fn parse_flags() -> Flags {
    let mut f = Flags { batch: 1, ..Default::default() };
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let mut number = || args.next().and_then(|v| v.parse().ok()).expect("numeric argument");
        match a.as_str() {
            "--nan" => f.nan = true,
            "--garbage" => f.garbage = true,
            "--extra-keys" => f.extra_keys = true,
            "--batch" => f.batch = number(),
            "--stall-first" => f.stall_first = true,
            "--stall" => f.stall = true,
            "--exit-after" => f.exit_after = Some(number()),
            "--bad-handshake" => f.bad_handshake = true,
            other => {
                eprintln!("unknown flag {other}");
                std::process::exit(2);
            }
        }
    }
    f
}

fn answer(surrogate: &SurrogateEvaluator, flags: &Flags, line: &str) -> String {
    let req: EvalRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_owned))
                .unwrap_or_default();
            return serde_json::to_string(&EvalResponse::error(id, e.to_string())).unwrap();
        }
    };
    let resp = surrogate.evaluate(&req.id, &req.genome, req.seed);
    let mut value = serde_json::to_value(&resp).unwrap();
    if flags.extra_keys {
        value["trainer"] = serde_json::json!({"epochs": 0});
    }
    let text = value.to_string();
    if flags.nan {
        let fitness = serde_json::to_string(&resp.fitness).unwrap();
        return text.replacen(&format!("\"fitness\":{fitness}"), "\"fitness\":NaN", 1);
    }
    text
}

fn main() {
    let flags = parse_flags();
    let surrogate = SurrogateEvaluator::default();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let protocol = if flags.bad_handshake { "other" } else { "esrn-eval" };
    writeln!(out, "{{\"protocol\": \"{protocol}\", \"version\": 1}}").unwrap();
    out.flush().unwrap();

    let mut answered = 0usize;
    let mut skipped_first = false;
    let mut buffer: Vec<String> = Vec::new();
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() || flags.stall {
            continue;
        }
        if flags.stall_first && !skipped_first {
            skipped_first = true;
            continue;
        }
        buffer.push(line);
        if buffer.len() < flags.batch {
            continue;
        }
        for req in buffer.drain(..).rev() {
            if flags.garbage {
                writeln!(out, "{{not json").unwrap();
            }
            writeln!(out, "{}", answer(&surrogate, &flags, &req)).unwrap();
            out.flush().unwrap();
            answered += 1;
            if flags.exit_after == Some(answered) {
                std::process::exit(0);
            }
        }
    }
}
