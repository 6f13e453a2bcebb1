//! Pool-based active learning for morphological inflection.
//!
//! The crate covers the whole simulation loop: reading inflection data
//! ([`corpus`]), a built-in affix-rewrite learner ([`rulelearner`]), a
//! file-and-argv protocol for external learners ([`adapter`]), seven
//! sampling strategies ([`strategies`]), evaluation statistics
//! ([`metrics`]) and the cycle driver with report emission ([`driver`]).

pub mod adapter;
pub mod corpus;
pub mod driver;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod rulelearner;
pub mod strategies;
pub mod synthetic;

pub use corpus::{ColumnOrder, Dataset, ExampleId, IdSet, Split, SplitSpec, Triple};
pub use error::{Error, Result};
pub use metrics::{Aggregate, CorrelationResult};
pub use rulelearner::{Hypothesis, PredictInput, PredictionSet, RuleModel};
pub use strategies::{ScoredExample, SelectionConfig, StrategyKind};
