//! Home of the `acceptance` test target. It lives in its own package so that
//! `cargo test --workspace` runs it after the unit and integration tests of
//! the other crates, and a failing criterion does not hide their results.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

static LOCK: Mutex<()> = Mutex::new(());

/// Serializes checks so wall-clock limits are measured without interference.
pub fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes one `criterion N [PASS|FAIL] ...` line to stderr, bypassing the
/// test harness's output capture, and returns `pass`.
pub fn report(id: &str, pass: bool, text: impl AsRef<str>) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id} [{verdict}] {}", text.as_ref());
    pass
}
