//! Keeps the book's code snippets honest: every chapter is included as a
//! doc comment here, so `cargo test --doc` compiles and runs them.

#[cfg(doctest)]
mod chapters {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/frames.md")]
    pub mod frames {}
    #[doc = include_str!("../../../book/src/motion.md")]
    pub mod motion {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    pub mod refinement {}
    #[doc = include_str!("../../../book/src/codec.md")]
    pub mod codec {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
