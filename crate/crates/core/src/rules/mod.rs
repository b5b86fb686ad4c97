//! Forward-chaining N3 rule engine.

mod builtins;
mod engine;
mod matcher;
mod rule;
mod skolem;
mod trace;
pub mod values;

pub use builtins::{eval_builtin, Builtin, BuiltinError, BuiltinTable, EvalFn, Requirement};
pub use engine::{
    forward_chain, Derivation, Diagnostic, ForwardChainError, Limits, ReasonError, Reasoner, ReasonerOptions,
    Reasoning, Strategy,
};
pub use matcher::{match_formula, match_formula_with, resolve, unify, BindingSet, MatchError, TripleStore};
pub use rule::{Rule, RuleError, ANTECEDENT_BLANK_PREFIX};
pub use skolem::skolem_blank;
pub use trace::{read_trace, replay, write_trace, ReplayError, TraceError};
pub use values::DurationValue;
