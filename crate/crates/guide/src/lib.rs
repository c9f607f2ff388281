//! The book's chapters, compiled as doc-tests so every listing stays in
//! sync with the library. Build the book itself with `mdbook build book`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/variants.md")]
pub mod variants {}

#[doc = include_str!("../../../book/src/taxonomy.md")]
pub mod taxonomy {}

#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}

#[doc = include_str!("../../../book/src/ensemble.md")]
pub mod ensemble {}

#[doc = include_str!("../../../book/src/reports.md")]
pub mod reports {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
