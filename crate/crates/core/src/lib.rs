pub mod asymptotics;
pub mod closed_form;
pub mod error;
pub mod greedy;
pub mod solver;
pub mod theorem;
pub mod tuple;

pub use closed_form::ClosedForm;
pub use error::{Error, Result};
pub use greedy::{Caps, GreedySequence};
pub use solver::{AvoidanceRule, Budget, TermSet, Witness};
pub use theorem::{ConditionReport, DiscoveryOptions};
pub use tuple::{CoefficientTuple, SubsetSumTable};

/// Growth envelopes in double precision.
pub type BoundsReport = asymptotics::Bounds<f64>;
pub type Section4Report = asymptotics::Section4<f64>;
