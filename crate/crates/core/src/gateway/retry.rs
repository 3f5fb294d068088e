use rand::Rng;

use super::{Clock, CompletionOutcome, CompletionStatus, RetryPolicy, Transport, TransportFailure};
use crate::protocol::{parse_verdict, Decision, Verdict};

fn jitter_unit(policy: &RetryPolicy) -> f64 {
    if policy.jitter_fraction == 0.0 {
        0.0
    } else {
        rand::thread_rng().gen_range(-1.0..=1.0)
    }
}

/// Query `transport` until it yields an interpretable answer, a content
/// violation, or the attempt budget runs out.
///
/// Transport errors and rate limiting are retried. An answer that
/// [`parse_verdict`] cannot read is re-queried up to
/// `policy.invalid_output_retries` times. Before attempt `k + 1` the clock
/// sleeps for `policy.jittered_delay(k, _)`.
pub fn complete_with_retry(
    transport: &dyn Transport,
    policy: &RetryPolicy,
    clock: &dyn Clock,
    prompt: &str,
) -> CompletionOutcome {
    let started = clock.now();
    let max_attempts = policy.max_attempts.max(1);
    let mut invalid_seen = 0;
    let mut last_status = CompletionStatus::TransportError;
    let mut last_text = None;

    let finish = |status, raw_text, attempts| CompletionOutcome {
        status,
        raw_text,
        attempts,
        latency: clock.now().saturating_sub(started),
        completed_at: clock.utc_now(),
    };

    for attempt in 1..=max_attempts {
        if attempt > 1 {
            clock.sleep(policy.jittered_delay(attempt - 1, jitter_unit(policy)));
        }
        match transport.send(prompt) {
            Ok(text) => {
                if parse_verdict(&text) != Verdict::Uninterpretable {
                    return finish(CompletionStatus::Ok, Some(text), attempt);
                }
                invalid_seen += 1;
                last_status = CompletionStatus::InvalidOutput;
                last_text = Some(text);
                if invalid_seen > policy.invalid_output_retries {
                    return finish(last_status, last_text, attempt);
                }
            }
            Err(TransportFailure::ContentViolation(message)) => {
                return finish(CompletionStatus::ContentViolation, Some(message), attempt);
            }
            Err(TransportFailure::RateLimited(message)) => {
                log::debug!("rate limited on attempt {attempt}: {message}");
                last_status = CompletionStatus::RateLimited;
                last_text = None;
            }
            Err(TransportFailure::Transport(message)) => {
                log::debug!("transport error on attempt {attempt}: {message}");
                last_status = CompletionStatus::TransportError;
                last_text = None;
            }
        }
    }
    finish(last_status, last_text, max_attempts)
}

/// Map any outcome to a binary decision. Everything that is not a readable
/// Include or Exclude becomes Include, flagged as a fallback.
pub fn apply_include_fallback(outcome: &CompletionOutcome) -> (Decision, bool) {
    if outcome.status == CompletionStatus::Ok {
        if let Some(decision) = outcome
            .raw_text
            .as_deref()
            .and_then(|text| parse_verdict(text).decision())
        {
            return (decision, false);
        }
    }
    (Decision::Include, true)
}
