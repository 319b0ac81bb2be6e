//! Acceptance checks live in `tests/acceptance`; run them with
//! `cargo test -p radaract-validation --test acceptance`.
