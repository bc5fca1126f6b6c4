//! Shell-operation knowledge extraction and recommendation.
//!
//! The pipeline turns raw shell logs into sessions ([`parser`]), mines
//! frequent gap-constrained command sequences ([`miner`]), groups them for
//! macro authoring ([`aggregator`]), labels commands with intents
//! ([`intents`]), stores everything in a property graph ([`graph`]) and ranks
//! command / sequence continuations against it ([`recommender`]).
//! [`evaluator`] estimates the typing effort saved and measures latency.

pub mod aggregator;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod graph;
mod hash;
pub mod intents;
pub mod io;
pub mod miner;
pub mod parser;
pub mod pipeline;
pub mod recommender;

pub use error::{Error, Result};
pub use graph::{BuildInputs, Graph, Tag};
pub use intents::{IntentLabel, IntentName, IntentRule};
pub use miner::{MiningConfig, SequencePattern};
pub use parser::{ParseConfig, ParsedCommand, RawEvent, Session};
pub use recommender::{CommandRequest, Engine, ScoredCandidate, SequenceRequest, Weights};
