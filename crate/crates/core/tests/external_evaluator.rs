use std::time::Duration;

use esrn::evaluator::{EvalError, EvalRequest, EvalResponse, Evaluator, ExternalEvaluator, SurrogateEvaluator};
use esrn::evolution::{run_search, EvaluatorKind, SearchConfig};
use esrn::genome::random_genome;
use esrn::persistence::backend_for;

const MOCK: &str = env!("CARGO_BIN_EXE_esrn-mock-evaluator");

fn mock(flags: &[&str], timeout_ms: u64) -> Result<ExternalEvaluator, EvalError> {
    let mut cmd = vec![MOCK.to_string()];
    cmd.extend(flags.iter().map(|s| s.to_string()));
    ExternalEvaluator::spawn(cmd, Duration::from_millis(timeout_ms))
}

fn requests(n: usize) -> Vec<EvalRequest> {
    (0..n)
        .map(|i| EvalRequest {
            id: format!("r{i}"),
            genome: random_genome(i as u64, 2).unwrap(),
            scale: 2,
            budget: 1,
            seed: 11,
        })
        .collect()
}

fn reference(reqs: &[EvalRequest]) -> Vec<EvalResponse> {
    SurrogateEvaluator::default().evaluate_batch(reqs).unwrap()
}

#[test]
fn responses_match_in_process_surrogate() {
    let reqs = requests(5);
    let got = mock(&[], 5_000).unwrap().evaluate_batch(&reqs).unwrap();
    assert_eq!(got, reference(&reqs));
    assert!(got.iter().zip(&reqs).all(|(r, q)| r.id == q.id));
}

#[test]
fn unknown_keys_are_ignored() {
    let reqs = requests(3);
    let got = mock(&["--extra-keys"], 5_000).unwrap().evaluate_batch(&reqs).unwrap();
    assert_eq!(got, reference(&reqs));
}

#[test]
fn malformed_lines_are_skipped() {
    let reqs = requests(3);
    let got = mock(&["--garbage"], 5_000).unwrap().evaluate_batch(&reqs).unwrap();
    assert_eq!(got, reference(&reqs));
}

#[test]
fn nan_fitness_becomes_an_error() {
    let reqs = requests(2);
    let got = mock(&["--nan"], 5_000).unwrap().evaluate_batch(&reqs).unwrap();
    assert!(got.iter().all(|r| !r.is_ok()));
}

#[test]
fn out_of_order_answers_are_matched_by_id() {
    let reqs = requests(4);
    let got = mock(&["--batch", "4"], 5_000).unwrap().evaluate_batch(&reqs).unwrap();
    assert_eq!(got, reference(&reqs));
}

#[test]
fn lost_request_is_resent_after_timeout() {
    let reqs = requests(3);
    let got = mock(&["--stall-first"], 400).unwrap().evaluate_batch(&reqs).unwrap();
    assert_eq!(got, reference(&reqs));
}

#[test]
fn silent_process_fails_after_one_retry() {
    let reqs = requests(2);
    let mut ev = mock(&["--stall"], 200).unwrap();
    let got = ev.evaluate_batch(&reqs).unwrap();
    assert!(got.iter().all(|r| !r.is_ok()));
    assert_eq!(got[1].id, "r1");
}

#[test]
fn crashed_process_is_restarted_once() {
    let reqs = requests(5);
    let mut ev = mock(&["--exit-after", "2"], 5_000).unwrap();
    let got = ev.evaluate_batch(&reqs).unwrap();
    // two answers per process lifetime, one restart allowed
    assert_eq!(got.iter().filter(|r| r.is_ok()).count(), 4);
    let later = ev.evaluate_batch(&requests(1)).unwrap();
    assert!(!later[0].is_ok());
}

#[test]
fn bad_handshake_is_rejected() {
    assert!(matches!(mock(&["--bad-handshake"], 5_000), Err(EvalError::Handshake(_))));
}

#[test]
fn missing_program_is_a_spawn_error() {
    let r = ExternalEvaluator::spawn(vec!["/nonexistent/evaluator".into()], Duration::from_secs(1));
    assert!(matches!(r, Err(EvalError::Spawn { .. })));
}

#[test]
fn search_through_process_matches_in_process_search() {
    let base = SearchConfig { generations: 3, seed: 21, ..SearchConfig::default() };
    let local = run_search(base.clone(), &mut SurrogateEvaluator::default()).unwrap();
    let cfg = SearchConfig {
        evaluator: EvaluatorKind::External,
        evaluator_command: Some(format!("{MOCK} --extra-keys")),
        eval_timeout_secs: 5,
        ..base
    };
    let mut backend = backend_for(&cfg).unwrap();
    let remote = run_search(cfg, backend.as_mut()).unwrap();
    assert_eq!(remote.history, local.history);
    assert_eq!(remote.population, local.population);
}
