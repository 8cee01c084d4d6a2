//! Acceptance suite for the qwalk workspace. The checks live in `tests/acceptance.rs`.
