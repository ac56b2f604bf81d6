//! Bilevel surveillance-evasion game: an attacker trajectory against
//! boundary-constrained sensor placements, solved by alternating best
//! responses.
//!
//! The guide in `book/` walks through the modules in order.

pub mod attacker;
pub mod defender;
pub mod game;
pub mod geometry;
pub mod harness;
pub mod optimizer;
pub mod sensing;

/// Chapters of the guide in `book/`, compiled here so their snippets run as doctests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/sensing.md")]
    pub mod sensing {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    pub mod optimizer {}
    #[doc = include_str!("../../../book/src/best_responses.md")]
    pub mod best_responses {}
    #[doc = include_str!("../../../book/src/game.md")]
    pub mod game {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
