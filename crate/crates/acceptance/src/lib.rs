//! Holds the `acceptance` test target: `cargo test -p seqteach-acceptance`.
