//! Utterance corpus, model-reply generators and the interpreter checks.

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;
use supervisor_core::command::{
    interpret_offline, parse_intent_grammar, parse_model_reply, ClientError, Interpreter,
    ModelClient, ModelReply, PromptBundle,
};
use supervisor_core::intent::{Direction, StatusTopic};
use supervisor_core::{Intent, RobotStatus};

const CORPUS: &str = include_str!("../../data/utterances.ndjson");

pub fn corpus() -> Vec<(String, Option<Intent>)> {
    CORPUS
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let v: Value = serde_json::from_str(line).expect("corpus line is JSON");
            let utterance = v["utterance"].as_str().unwrap().to_string();
            let intent = match &v["intent"] {
                Value::Null => None,
                other => Some(Intent::from_json(other).expect("corpus intent is valid")),
            };
            (utterance, intent)
        })
        .collect()
}

/// Every corpus line parses to exactly its expected intent. Returns the
/// corpus size.
pub fn corpus_exact_match() -> Result<usize, String> {
    let corpus = corpus();
    if corpus.len() < 30 {
        return Err(format!("corpus has only {} lines", corpus.len()));
    }
    let mismatches: Vec<String> = corpus
        .iter()
        .filter_map(|(utterance, expected)| {
            let got = parse_intent_grammar(utterance).ok();
            (got != *expected).then(|| format!("{utterance:?}: expected {expected:?}, got {got:?}"))
        })
        .collect();
    if mismatches.is_empty() {
        Ok(corpus.len())
    } else {
        Err(mismatches.join("\n"))
    }
}

pub fn arb_simple_intent() -> impl Strategy<Value = Intent> {
    let label = "[a-z][a-z ]{0,15}[a-z]";
    prop_oneof![
        Just(Intent::Sit),
        Just(Intent::Stand),
        (1u32..=10_000, 0usize..4).prop_map(|(cm, d)| Intent::Move {
            distance_m: f64::from(cm) / 100.0,
            direction: Direction::ALL[d],
        }),
        label.prop_map(|label| Intent::ReturnTo { label }),
        label.prop_map(|label| Intent::RecordLocation { label }),
        any::<bool>().prop_map(|on| Intent::Lights { on }),
    ]
}

pub fn arb_intent() -> impl Strategy<Value = Intent> {
    prop_oneof![
        4 => arb_simple_intent(),
        1 => (arb_simple_intent(), 1u32..100_000).prop_map(|(inner, delay_s)| Intent::Schedule {
            inner: Box::new(inner),
            delay_s
        }),
        1 => (0usize..5).prop_map(|t| Intent::QueryStatus { topic: StatusTopic::ALL[t] }),
        1 => Just(Intent::QueryCapabilities),
    ]
}

pub fn arb_reply() -> impl Strategy<Value = ModelReply> {
    prop_oneof![
        (arb_intent(), ".{0,40}").prop_map(|(i, s)| ModelReply::command(i, s)),
        ".{0,80}".prop_map(ModelReply::answer),
    ]
}

/// Draws `n` deterministic samples from a strategy.
pub fn samples<S: Strategy>(strategy: S, n: usize, seed: u8) -> Vec<S::Value> {
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        proptest::test_runner::TestRng::from_seed(
            proptest::test_runner::RngAlgorithm::ChaCha,
            &[seed; 32],
        ),
    );
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).unwrap().current())
        .collect()
}

/// parse(render(r)) == r, bare and wrapped in prose and a code fence.
pub fn reply_round_trip(n: usize) -> Result<(), String> {
    for (i, reply) in samples(arb_reply(), n, 7).into_iter().enumerate() {
        let bare = reply.render();
        let fenced = format!("Sure.\n```json\n{bare}\n```\nDone!");
        for text in [&bare, &fenced] {
            match parse_model_reply(text) {
                Ok(got) if got == reply => {}
                other => return Err(format!("case {i}: {text:?} parsed as {other:?}")),
            }
        }
    }
    Ok(())
}

/// Replays fixed client output.
pub struct FakeClient {
    pub text: String,
    pub delay: Option<Duration>,
}

#[async_trait]
impl ModelClient for FakeClient {
    async fn complete(&self, _: &PromptBundle) -> Result<String, ClientError> {
        if let Some(d) = self.delay {
            tokio::time::sleep(d).await;
        }
        Ok(self.text.clone())
    }
}

fn check_interpretation(reply: &ModelReply) -> Result<(), String> {
    if reply.speech.is_empty() {
        return Err("empty speech".into());
    }
    if let Some(intent) = reply.intent() {
        intent
            .validate()
            .map_err(|e| format!("invalid intent {intent:?}: {e}"))?;
    }
    Ok(())
}

/// Interpretation of `n` fuzzed utterances offline and `n` fuzzed model
/// replies through the client path yields a valid reply without panicking.
pub fn interpret_fuzz(n: usize) -> Result<(), String> {
    let snapshot = RobotStatus::new("rat");
    for bytes in samples(proptest::collection::vec(any::<u8>(), 0..120), n, 11) {
        let text = String::from_utf8_lossy(&bytes);
        check_interpretation(&interpret_offline(&text, &snapshot))?;
    }
    let pairs = samples(
        (
            "\\PC{0,60}",
            prop_oneof![
                "\\PC{0,200}",
                arb_reply().prop_map(|r| r.render()),
                arb_reply().prop_map(|r| {
                    let s = r.render();
                    s.chars().take(s.chars().count() / 2).collect()
                }),
            ],
        ),
        n,
        13,
    );
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async {
        for (utterance, text) in pairs {
            let interp = Interpreter::with_client(
                Arc::new(FakeClient { text, delay: None }),
                Duration::from_secs(1),
            );
            check_interpretation(&interp.interpret(&utterance, &snapshot, &[]).await.reply)?;
        }
        Ok(())
    })
}
