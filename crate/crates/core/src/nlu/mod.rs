//! Turn-level understanding: encodes a (question, response) exchange and
//! turns it into a distribution over candidates, over attributes, and an
//! "unknown" probability. Also an exact-match variant working from
//! structured answers.

mod beliefs;
mod model;
mod train;

pub use beliefs::TurnBeliefs;
pub use model::{NluParams, TurnInput};
pub use train::{
    build_examples, evaluate_nlu, train_nlu, NluConfig, NluEval, NluExample, NluReport,
};
