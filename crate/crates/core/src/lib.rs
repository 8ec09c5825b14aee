// Negated float comparisons are how config checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod dst;
pub mod encoder;
pub mod engine;
pub mod error;
pub mod nlu;
pub mod nn;
pub mod policy;
pub mod service;
pub mod text;

pub use error::{Md3Error, Result};
