//! Viewpoint analytics for news corpora.
//!
//! The pipeline extracts actor-attributed claims from articles
//! ([`extraction`]), induces a topic's viewpoints with a model plus a human
//! review pass ([`viewpoints`]), enriches actors with Wikidata context
//! ([`wikidata`]), builds a labelled benchmark from raw annotations
//! ([`dataset`]), classifies every claim against every viewpoint under three
//! context configurations ([`classify`]) and scores the results
//! ([`eval`]). All model traffic goes through [`llm::Gateway`], which can
//! replay recorded transcripts for deterministic runs.

pub mod llm;
pub mod model;
pub mod classify;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod extraction;
pub mod par;
pub mod pipeline;
pub mod prompts;
pub mod retry;
pub mod text;
pub mod viewpoints;
pub mod wikidata;
