//! Acceptance checks for the homodyne workspace; see `tests/acceptance.rs`.
