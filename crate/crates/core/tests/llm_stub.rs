mod common;

use std::time::Duration;

use common::stub::{chat_body, StubServer};
use qsynth_core::circuit::{AngleSet, Circuit, Gate};
use qsynth_core::llm::{build_prompt, complete, LlmError, LlmParams};
use qsynth_core::proposer::{ProposalContext, ProposalError};
use qsynth_core::{LlmProposer, Proposer};

fn params(base_url: &str) -> LlmParams {
    LlmParams {
        base_url: base_url.to_string(),
        model: "stub-model".into(),
        temperature: 0.2,
        timeout: Duration::from_secs(10),
        initial_backoff: Duration::from_millis(1),
        api_key: Some("sk-test".into()),
        ..LlmParams::default()
    }
}

fn ctx() -> ProposalContext {
    ProposalContext {
        current_circuit: Circuit::new(3, vec![Gate::h(0), Gate::cnot(0, 1), Gate::ry(10.0, 2)]),
        current_q: 0.0,
        delta_q: None,
        step_index: 0,
        query_index: 0,
        allowed_angles: AngleSet::default(),
        gate_budget: 3,
    }
}

#[test]
fn request_shape() {
    let server = StubServer::start(vec![(200, chat_body("  reply text \n"))]);
    let prompt = build_prompt(&ctx(), true);
    let out = complete(&prompt, &params(&server.base_url)).unwrap();
    assert_eq!(out.text, "  reply text \n");
    assert_eq!(out.attempts, 1);

    let reqs = server.join();
    assert_eq!(reqs.len(), 1);
    let r = &reqs[0];
    assert!(
        r.request_line.starts_with("POST /v1/chat/completions "),
        "{}",
        r.request_line
    );
    assert_eq!(r.header("authorization"), Some("Bearer sk-test"));
    let body = r.json();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0.2);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 2);
    assert_eq!(messages[0]["role"], "system");
    assert_eq!(messages[0]["content"], prompt.system.as_str());
    assert_eq!(messages[1]["role"], "user");
    assert_eq!(messages[1]["content"], prompt.user.as_str());
}

#[test]
fn no_key_no_auth_header() {
    let server = StubServer::start(vec![(200, chat_body("x"))]);
    let mut p = params(&server.base_url);
    p.api_key = None;
    complete(&build_prompt(&ctx(), false), &p).unwrap();
    assert_eq!(server.join()[0].header("authorization"), None);
}

#[test]
fn retries_server_errors() {
    let server = StubServer::start(vec![
        (500, "{}".into()),
        (503, "{}".into()),
        (200, chat_body("ok")),
    ]);
    let out = complete(&build_prompt(&ctx(), true), &params(&server.base_url)).unwrap();
    assert_eq!(out.text, "ok");
    assert_eq!(out.attempts, 3);
    assert_eq!(server.join().len(), 3);
}

#[test]
fn gives_up_after_max_retries() {
    let server = StubServer::start(vec![(500, "{}".into()); 3]);
    let mut p = params(&server.base_url);
    p.max_retries = 2;
    let err = complete(&build_prompt(&ctx(), true), &p).unwrap_err();
    assert!(
        matches!(err, LlmError::Transport { attempts: 3, .. }),
        "{err}"
    );
    assert_eq!(server.join().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = StubServer::start(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let err = complete(&build_prompt(&ctx(), true), &params(&server.base_url)).unwrap_err();
    assert_eq!(
        err,
        LlmError::Status {
            status: 401,
            body: r#"{"error":"bad key"}"#.into()
        }
    );
    assert_eq!(server.join().len(), 1);
}

#[test]
fn malformed_body_is_protocol_error() {
    let server = StubServer::start(vec![(200, r#"{"choices": []}"#.into())]);
    let err = complete(&build_prompt(&ctx(), true), &params(&server.base_url)).unwrap_err();
    assert!(matches!(err, LlmError::Protocol(_)), "{err}");
    server.join();
}

#[test]
fn proposer_curates_reply() {
    let reply = "Sure.\n<python>\n```python\n[('H', [0]), ('CNOT', [0, 2]), ('RY', [3.0, 1])]\n```\n</python>\nDone.";
    let server = StubServer::start(vec![
        (200, chat_body(reply)),
        (200, chat_body("no list here")),
    ]);
    let mut proposer = LlmProposer::new(params(&server.base_url), true);
    assert_eq!(proposer.id(), "llm:stub-model");

    let first = proposer.propose(&ctx());
    assert_eq!(first.raw_text, reply);
    assert_eq!(
        first.parsed.unwrap(),
        Circuit::new(3, vec![Gate::h(0), Gate::cnot(0, 2), Gate::ry(3.0, 1)])
    );
    let second = proposer.propose(&ctx());
    assert!(matches!(second.parsed, Err(ProposalError::Parse(_))));
    server.join();
}
