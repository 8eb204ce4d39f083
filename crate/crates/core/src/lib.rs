//! Model-guided search for REST API test cases.
//!
//! Log lines emitted while a test case runs are mined into templates, the
//! template sequences are learned into a frequency automaton, and test cases
//! that drive the system through rarely visited states are preferred.

pub mod api;
pub mod automaton;
pub mod engine;
pub mod exec;
pub mod experiment;
pub mod fitness;
pub mod http;
pub mod report;
pub mod sim;
pub mod stats;
pub mod templates;
pub mod trace;
