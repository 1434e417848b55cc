//! Plan selection by classification.
//!
//! Plans are enumerated from AND/OR project graphs or solved in Blocksworld,
//! collected into a labeled training set, and learned by an induction graph
//! (decision tree). The tree is compiled into a Boolean cellular knowledge
//! base whose fixed-point inference assigns a plan to a new case.

pub mod bits;
pub mod blocksworld;
pub mod casi;
pub mod dataset;
pub mod discretize;
pub mod eval;
pub mod knn;
pub mod plans;
pub mod project;
pub mod tree;
