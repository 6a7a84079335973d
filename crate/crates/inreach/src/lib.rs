//! Innermost-strategy reachability analysis by tree automata completion.

pub mod airr;
pub mod automata;
pub mod completion;
pub mod inference;
pub mod par;
pub mod rewriting;
pub mod terms;
pub mod timbuk;
