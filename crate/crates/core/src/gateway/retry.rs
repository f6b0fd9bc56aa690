use std::future::Future;
use std::time::Duration;

use super::GatewayError;

/// Exponential backoff: after failed attempt `n` (1-based) wait
/// `base_delay * factor^(n-1)`. No jitter, so tests can reason about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    pub fn delay_after(&self, attempt: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(attempt.saturating_sub(1))
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or
    /// the retries are used up. Returns the outcome and the attempt count.
    pub async fn run<F, Fut, T>(&self, mut op: F) -> (Result<T, GatewayError>, u32)
    where
        F: FnMut() -> Fut,
        Fut: Future<Output = Result<T, GatewayError>>,
    {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match op().await {
                Ok(v) => return (Ok(v), attempt),
                Err(e) if e.is_retryable() && attempt <= self.max_retries => {
                    let wait = self.delay_after(attempt);
                    tracing::warn!(attempt, error = %e, ?wait, "backend call failed, retrying");
                    tokio::time::sleep(wait).await;
                }
                Err(e) => return (Err(e), attempt),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn delays_double() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_after(1), Duration::from_secs(1));
        assert_eq!(p.delay_after(2), Duration::from_secs(2));
        assert_eq!(p.delay_after(3), Duration::from_secs(4));
    }

    #[tokio::test(start_paused = true)]
    async fn gives_up_after_three_retries() {
        let calls = AtomicU32::new(0);
        let (res, attempts) = RetryPolicy::default()
            .run(|| async {
                calls.fetch_add(1, Ordering::SeqCst);
                Err::<(), _>(GatewayError::RateLimited)
            })
            .await;
        assert!(matches!(res, Err(GatewayError::RateLimited)));
        assert_eq!(attempts, 4);
        assert_eq!(calls.load(Ordering::SeqCst), 4);
    }

    #[tokio::test(start_paused = true)]
    async fn non_retryable_stops_at_once() {
        let (res, attempts) = RetryPolicy::default()
            .run(|| async { Err::<(), _>(GatewayError::BadResponse("x".into())) })
            .await;
        assert!(res.is_err());
        assert_eq!(attempts, 1);
    }
}
