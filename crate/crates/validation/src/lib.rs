//! Holds the workspace acceptance suite (`cargo test -p netmarket-validation`).
//! The package sorts after the library and CLI packages, so `cargo test
//! --workspace` runs their tests first.
