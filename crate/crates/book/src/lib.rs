//! Runs the code blocks of the book under `book/src` as doctests, one module
//! per chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}
#[doc = include_str!("../../../book/src/isolation-forest.md")]
pub mod isolation_forest {}
#[doc = include_str!("../../../book/src/mining.md")]
pub mod mining {}
#[doc = include_str!("../../../book/src/classifier.md")]
pub mod classifier {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
