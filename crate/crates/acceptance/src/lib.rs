//! Acceptance checks for `strata-audit` live in `tests/acceptance.rs`; this
//! crate has no library code of its own.
