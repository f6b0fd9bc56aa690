use std::sync::Arc;
use std::time::Duration;

use mythmark::gateway::{
    build_annotation_prompt, prompt_digest, BackendConfig, Clock, Gateway, GatewayError, MockBackend,
    MockEntry, MockScript, RetryPolicy, TranscriptCache,
};

const PASSAGE: &str = "belle et légère comme Diane, laissant";
const TAGGED: &str = "belle et légère comme <mythEntity type=\"deity\">Diane</mythEntity>, laissant";

fn script(transient_failures: u32) -> MockScript {
    MockScript {
        entries: vec![MockEntry {
            passage: PASSAGE.into(),
            replies: vec![TAGGED.into()],
            commentary: None,
        }],
        transient_failures,
        ..Default::default()
    }
}

fn fast() -> RetryPolicy {
    RetryPolicy { base_delay: Duration::from_millis(1), ..RetryPolicy::default() }
}

fn gateway(mock: Arc<MockBackend>) -> Gateway {
    Gateway::new(mock, BackendConfig::new("mock://", "mock"))
        .unwrap()
        .with_retry(fast())
        .with_clock(Clock::epoch())
}

#[tokio::test]
async fn canned_response_verbatim() {
    let mock = Arc::new(MockBackend::new(script(0)));
    let g = gateway(mock.clone());
    let prompt = build_annotation_prompt(PASSAGE).unwrap();
    let c = g.complete(&prompt, PASSAGE).await.unwrap();
    assert_eq!(c.transcript.response, TAGGED);
    assert_eq!(c.transcript.prompt_digest, prompt_digest("mock", &prompt));
    assert!(c.transcript.digest_matches());
    assert_eq!(c.attempts, 1);
}

#[tokio::test]
async fn fails_twice_then_succeeds_in_three_attempts() {
    let mock = Arc::new(MockBackend::new(script(2)));
    let g = gateway(mock.clone());
    let prompt = build_annotation_prompt(PASSAGE).unwrap();
    let c = g.complete(&prompt, PASSAGE).await.unwrap();
    assert_eq!(c.attempts, 3);
    assert_eq!(mock.calls(), 3);
    assert_eq!(c.transcript.response, TAGGED);
}

#[tokio::test]
async fn persistent_failure_surfaces_after_retries() {
    let mock = Arc::new(MockBackend::new(script(10)));
    let g = gateway(mock.clone());
    let prompt = build_annotation_prompt(PASSAGE).unwrap();
    let err = g.complete(&prompt, PASSAGE).await.unwrap_err();
    assert!(matches!(err, GatewayError::Transport(_)));
    assert_eq!(mock.calls(), 4);
}

#[tokio::test]
async fn cache_hit_makes_no_call() {
    let dir = tempfile::tempdir().unwrap();
    let prompt = build_annotation_prompt(PASSAGE).unwrap();

    let mock = Arc::new(MockBackend::new(script(0)));
    let g = gateway(mock.clone()).with_cache(TranscriptCache::open(dir.path()).unwrap());
    let first = g.complete(&prompt, PASSAGE).await.unwrap();
    assert!(!first.cached);

    let mock2 = Arc::new(MockBackend::new(MockScript::default()));
    let g2 = gateway(mock2.clone()).with_cache(TranscriptCache::open(dir.path()).unwrap());
    let second = g2.complete(&prompt, PASSAGE).await.unwrap();
    assert!(second.cached);
    assert_eq!(second.attempts, 0);
    assert_eq!(mock2.calls(), 0);
    assert_eq!(second.transcript, first.transcript);

    // a renewed request is a different cache entry
    assert!(matches!(
        g2.complete_variant(&prompt, PASSAGE, 1).await,
        Err(GatewayError::NoCannedResponse)
    ));
}

#[tokio::test]
async fn deterministic_under_mock() {
    let prompt = build_annotation_prompt(PASSAGE).unwrap();
    let a = gateway(Arc::new(MockBackend::new(script(0))))
        .complete(&prompt, PASSAGE)
        .await
        .unwrap();
    let b = gateway(Arc::new(MockBackend::new(script(0))))
        .complete(&prompt, PASSAGE)
        .await
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.transcript.timestamp, "1970-01-01T00:00:00Z");
}

#[tokio::test]
async fn in_flight_bound_is_respected() {
    use async_trait::async_trait;
    use mythmark::gateway::{ChatBackend, ChatRequest};
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[derive(Default)]
    struct Slow {
        now: AtomicUsize,
        peak: AtomicUsize,
    }
    #[async_trait]
    impl ChatBackend for Slow {
        async fn chat(&self, r: &ChatRequest) -> Result<String, GatewayError> {
            let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(n, Ordering::SeqCst);
            tokio::time::sleep(Duration::from_millis(5)).await;
            self.now.fetch_sub(1, Ordering::SeqCst);
            Ok(r.prompt.clone())
        }
    }

    let slow = Arc::new(Slow::default());
    let mut cfg = BackendConfig::new("x", "m");
    cfg.max_in_flight = 2;
    let g = Gateway::new(slow.clone(), cfg).unwrap();
    let prompts: Vec<String> = (0..8).map(|i| format!("p{i}")).collect();
    let futs = prompts.iter().map(|p| g.complete(p, p));
    let out = futures::future::join_all(futs).await;
    assert!(out.iter().all(Result::is_ok));
    assert_eq!(slow.peak.load(Ordering::SeqCst), 2);
}
