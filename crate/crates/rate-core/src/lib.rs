//! Core pipeline for retrieval-augmented technology-term extraction.
//!
//! The pipeline turns bibliographic records into validated per-paper
//! technology lists in five stages:
//!
//! 1. [`corpus`] — parse records and assemble one normalized text document
//!    per paper.
//! 2. [`kb`] — build a local vector store over public technology lists and
//!    retrieve diverse context chunks for each document.
//! 3. [`extract`] — prompt a chat model with document + context and parse
//!    its scored candidate list.
//! 4. [`heuristic`] + [`definitional`] — ground candidates in the source
//!    text with a deterministic rule cascade, then ask a second model
//!    whether each grounded phrase is a technology under four scholarly
//!    definitions.
//! 5. [`postprocess`] — normalize, blocklist-filter, acronym-deduplicate,
//!    and sort the final list; [`evaluation`] scores lists against a gold
//!    standard.
//!
//! All model traffic goes through [`gateway`], which caches responses on
//! disk so that warmed runs are deterministic and replayable offline.

pub mod corpus;
pub mod definitional;
pub mod error;
pub mod evaluation;
pub mod extract;
pub mod gateway;
pub mod heuristic;
pub mod kb;
pub mod postprocess;
pub mod prompt;

pub use error::{Error, Result};
