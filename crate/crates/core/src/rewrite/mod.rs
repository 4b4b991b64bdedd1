//! Matching, substitution, conditional rewriting and predicate evaluation.

mod builtins;
mod eval;
mod interval;
mod matching;
mod pred;
mod rule;
mod strategy;

pub use builtins::{poly_degree, reduce, FUNCTIONS as BUILTIN_FUNCTIONS};
pub use eval::{eval_exact, eval_f64, eval_f64_env, eval_number, round_to, Dual, Env};
pub use interval::{in_interval, sign_of, Interval, NotAnInterval, Sign};
pub use matching::{match_into, match_term, rename_apart, rename_free, substitute, Substitution};
pub use pred::{eval_pred, Truth};
pub use rule::{apply_rule, replay, Justification, NotApplicable, ReplayError, RewriteRule, RuleError, RuleSet, Strategy};
pub use strategy::{normalize, normalize_traced, rewrite_once, CancelToken, NormalizeError, Step, DEFAULT_FUEL};
