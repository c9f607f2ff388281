//! Input-level hallucination mitigation for vision-language responders.
//!
//! Each image is shown to a responder three times: unaltered (ORG), median
//! filtered (NR) and Laplacian sharpened (EE). Every answer is scored with an
//! NLI contradiction probability against reference text, and an ensemble
//! keeps the variant whose answer contradicts the least.
//!
//! Module map:
//!
//! * [`imaging`]: the three image transforms, PNG/JPEG codec.
//! * [`taxonomy`]: lexical question categories.
//! * [`corpus`]: manifest loading and image fetching.
//! * [`responder`]: vision-language clients (HTTP and mock).
//! * [`nli`] and [`scoring`]: NLI logits and contradiction scores.
//! * [`ensemble`]: per-record and per-category variant selection.
//! * [`report`]: win-count tables, summaries, score series.
//! * [`pipeline`]: cached, resumable orchestration of all of the above.

pub mod corpus;
pub mod ensemble;
mod error;
mod fsutil;
pub mod imaging;
pub mod nli;
pub mod pipeline;
pub mod report;
pub mod responder;
pub mod retry;
pub mod scoring;
pub mod taxonomy;

pub use error::{Error, Result};
pub use imaging::{ImageBuffer, Variant};
