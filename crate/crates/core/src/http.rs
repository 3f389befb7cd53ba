//! Blocking HTTP helpers shared by the embedder, LLM and endpoint clients.

use std::time::Duration;

use serde_json::Value;

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum HttpFailure {
    Timeout,
    Transport(String),
}

impl From<ureq::Error> for HttpFailure {
    fn from(e: ureq::Error) -> Self {
        match e {
            ureq::Error::Timeout(_) => HttpFailure::Timeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => HttpFailure::Timeout,
            other => HttpFailure::Transport(other.to_string()),
        }
    }
}

pub(crate) struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
}

pub(crate) fn read_reply(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Reply, HttpFailure> {
    let mut resp = result?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_vec()?;
    Ok(Reply { status, body })
}

/// Status codes worth retrying: rate limiting and server-side failures.
pub(crate) fn is_transient_status(status: u16) -> bool {
    status == 429 || status == 408 || (500..600).contains(&status)
}

/// Result of one attempt inside [`with_retries`].
pub(crate) enum Attempt<E> {
    Retry(E),
    Fail(E),
}

/// Run `op` up to `max_retries + 1` times, sleeping `base * 2^k` between
/// attempts. Returns the value or the last error, together with the number
/// of attempts made.
pub(crate) fn with_retries<T, E>(
    max_retries: u32,
    base: Duration,
    mut op: impl FnMut() -> Result<T, Attempt<E>>,
) -> Result<(T, u32), (E, u32)> {
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        match op() {
            Ok(v) => return Ok((v, attempt)),
            Err(Attempt::Fail(e)) => return Err((e, attempt)),
            Err(Attempt::Retry(e)) if attempt > max_retries => return Err((e, attempt)),
            Err(Attempt::Retry(_)) => {
                let factor = 1u32.checked_shl(attempt - 1).unwrap_or(u32::MAX);
                std::thread::sleep(base.saturating_mul(factor));
            }
        }
    }
}

/// Follow a dotted path (`choices.0.text`) through objects and arrays.
pub fn json_path<'v>(value: &'v Value, path: &str) -> Option<&'v Value> {
    if path.is_empty() {
        return Some(value);
    }
    path.split('.').try_fold(value, |v, seg| match v {
        Value::Object(o) => o.get(seg),
        Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn paths() {
        let v = json!({"choices": [{"text": "SELECT"}], "a": {"b": 1}});
        assert_eq!(json_path(&v, "choices.0.text"), Some(&json!("SELECT")));
        assert_eq!(json_path(&v, "a.b"), Some(&json!(1)));
        assert_eq!(json_path(&v, "choices.1.text"), None);
        assert_eq!(json_path(&v, ""), Some(&v));
    }

    #[test]
    fn retries_stop_after_budget() {
        let mut calls = 0;
        let r: Result<((), u32), (&str, u32)> = with_retries(2, Duration::ZERO, || {
            calls += 1;
            Err(Attempt::Retry("boom"))
        });
        assert_eq!(r, Err(("boom", 3)));
        assert_eq!(calls, 3);
    }

    #[test]
    fn permanent_failure_is_not_retried() {
        let r: Result<((), u32), (&str, u32)> = with_retries(5, Duration::ZERO, || Err(Attempt::Fail("bad request")));
        assert_eq!(r, Err(("bad request", 1)));
    }

    #[test]
    fn success_after_transient_failure() {
        let mut calls = 0;
        let r: Result<(i32, u32), (&str, u32)> = with_retries(3, Duration::ZERO, || {
            calls += 1;
            if calls < 2 {
                Err(Attempt::Retry("flaky"))
            } else {
                Ok(7)
            }
        });
        assert_eq!(r, Ok((7, 2)));
    }
}
