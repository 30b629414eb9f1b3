//! The guide's chapters as modules so `cargo test --doc` runs their code
//! blocks.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/load_cases.md")]
pub mod load_cases {}
#[doc = include_str!("../../../book/src/validation.md")]
pub mod validation {}
#[doc = include_str!("../../../book/src/fea.md")]
pub mod fea {}
#[doc = include_str!("../../../book/src/agent_loop.md")]
pub mod agent_loop {}
#[doc = include_str!("../../../book/src/benchmark.md")]
pub mod benchmark {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
