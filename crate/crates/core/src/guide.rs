//! The user guide, compiled as doctests.
//!
//! Each module below carries one chapter of the mdbook under `book/` as
//! its documentation, so `cargo test --doc` executes every code snippet
//! the book shows. Build the rendered book with `mdbook build book`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}

#[doc = include_str!("../../../book/src/projection.md")]
pub mod projection {}

#[doc = include_str!("../../../book/src/stabilization.md")]
pub mod stabilization {}

#[doc = include_str!("../../../book/src/wavelets.md")]
pub mod wavelets {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
