use serde::{Deserialize, Serialize};

use crate::rewrite::{Interval, RewriteRule, Strategy};
use crate::term::{OpDecl, Path, Term};

pub const FORMAT_VERSION: u32 = 1;

/// One explanation of a symbol at a given audience level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub level: String,
    pub text: String,
}

/// Rule set as written in a theory file: rule names, resolved at load.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSetDecl {
    pub name: String,
    #[serde(default)]
    pub strategy: Strategy,
    pub rules: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theory {
    pub name: String,
    #[serde(default)]
    pub imports: Vec<String>,
    #[serde(default)]
    pub signature: Vec<OpDecl>,
    #[serde(default)]
    pub definitions: std::collections::BTreeMap<String, Vec<Explanation>>,
    #[serde(default)]
    pub rules: Vec<RewriteRule>,
    #[serde(default)]
    pub rulesets: Vec<RuleSetDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

/// A labelled template slot, e.g. `"Constants"` bound to `?Constants`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemTemplate {
    pub label: String,
    pub pattern: Term,
}

/// Shape shared by problem patterns and method guards.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelTemplate {
    #[serde(default)]
    pub given: Vec<ItemTemplate>,
    #[serde(default, rename = "where")]
    pub where_: Vec<Term>,
    #[serde(default)]
    pub find: Vec<ItemTemplate>,
    #[serde(default)]
    pub relate: Vec<ItemTemplate>,
}

impl ModelTemplate {
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.given
            .iter()
            .chain(&self.find)
            .chain(&self.relate)
            .map(|i| &i.pattern)
            .chain(&self.where_)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemPattern {
    pub id: String,
    pub theory: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(flatten)]
    pub model: ModelTemplate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postcondition: Option<Term>,
    #[serde(default)]
    pub children: Vec<ProblemPattern>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Method {
    pub id: String,
    pub theory: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<ModelTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<Vec<Statement>>,
    #[serde(default)]
    pub children: Vec<Method>,
}

/// A step of a method program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statement {
    /// Run a tactic; its result (a term) is bound to `bind` when given.
    Step {
        tactic: Tactic,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bind: Option<String>,
    },
    Let { name: String, value: Term },
    /// Open a sub-problem; the last formula of the body is its result.
    Sub {
        problem: String,
        #[serde(default)]
        collapsed: bool,
        body: Vec<Statement>,
    },
    Branch {
        #[serde(rename = "if")]
        cond: Term,
        then: Vec<Statement>,
        #[serde(default, rename = "else")]
        otherwise: Vec<Statement>,
    },
    Repeat {
        body: Vec<Statement>,
        until: Term,
        #[serde(default = "default_repeat_max")]
        max: usize,
    },
    Result { values: Vec<Term> },
}

fn default_repeat_max() -> usize {
    100
}

/// A calculation step. In method programs the term fields are templates
/// over the program's `?`-bindings; once instantiated they are concrete.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tactic {
    Rewrite { rule: String, path: Path },
    Simplify { ruleset: String },
    Substitute {
        equation: Term,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        function_of: Option<Term>,
    },
    SolveUnivariate {
        equation: Term,
        unknown: Term,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        within: Option<Term>,
    },
    Differentiate { function: Term, variable: Term },
    FilterByInterval { list: Term, interval: Term },
    TakeEquation { list: Term, index: usize },
    SwitchToFloat { digits: u8 },
    SubProblem { problem: String },
}

impl Tactic {
    pub fn name(&self) -> &'static str {
        match self {
            Tactic::Rewrite { .. } => "rewrite",
            Tactic::Simplify { .. } => "simplify",
            Tactic::Substitute { .. } => "substitute",
            Tactic::SolveUnivariate { .. } => "solve_univariate",
            Tactic::Differentiate { .. } => "differentiate",
            Tactic::FilterByInterval { .. } => "filter_by_interval",
            Tactic::TakeEquation { .. } => "take_equation",
            Tactic::SwitchToFloat { .. } => "switch_to_float",
            Tactic::SubProblem { .. } => "sub_problem",
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Tactic::Substitute { equation, function_of } => std::iter::once(equation).chain(function_of).collect(),
            Tactic::SolveUnivariate { equation, unknown, within } => vec![equation, unknown].into_iter().chain(within).collect(),
            Tactic::Differentiate { function, variable } => vec![function, variable],
            Tactic::FilterByInterval { list, interval } => vec![list, interval],
            Tactic::TakeEquation { list, .. } => vec![list],
            _ => Vec::new(),
        }
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Result<Term, String>) -> Result<Tactic, String> {
        Ok(match self {
            Tactic::Substitute { equation, function_of } => Tactic::Substitute {
                equation: f(equation)?,
                function_of: function_of.as_ref().map(&mut f).transpose()?,
            },
            Tactic::SolveUnivariate { equation, unknown, within } => Tactic::SolveUnivariate {
                equation: f(equation)?,
                unknown: f(unknown)?,
                within: within.as_ref().map(&mut f).transpose()?,
            },
            Tactic::Differentiate { function, variable } => {
                Tactic::Differentiate { function: f(function)?, variable: f(variable)? }
            }
            Tactic::FilterByInterval { list, interval } => Tactic::FilterByInterval { list: f(list)?, interval: f(interval)? },
            Tactic::TakeEquation { list, index } => Tactic::TakeEquation { list: f(list)?, index: *index },
            other => other.clone(),
        })
    }
}

impl std::fmt::Display for Tactic {
    /// One-line, ASCII form as shown beside calculation steps.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tactic::Rewrite { rule, path } => write!(f, "rewrite {rule} at {path}"),
            Tactic::Simplify { ruleset } => write!(f, "simplify {ruleset}"),
            Tactic::Substitute { equation, function_of: None } => write!(f, "Substitute {equation}"),
            Tactic::Substitute { equation, function_of: Some(x) } => write!(f, "Substitute {equation} as function of {x}"),
            Tactic::SolveUnivariate { equation, unknown, within: None } => write!(f, "solve_univariate({equation}, {unknown})"),
            Tactic::SolveUnivariate { equation, unknown, within: Some(w) } => {
                write!(f, "solve_univariate({equation}, {unknown}) within {w}")
            }
            Tactic::Differentiate { function, variable } => write!(f, "differentiate({function}, {variable})"),
            Tactic::FilterByInterval { list, interval } => write!(f, "filter {list} by {interval}"),
            Tactic::TakeEquation { list, index } => write!(f, "take equation {index} of {list}"),
            Tactic::SwitchToFloat { digits } => write!(f, "switch to floating-point numbers ({digits} digits)"),
            Tactic::SubProblem { problem } => write!(f, "Problem \"{problem}\""),
        }
    }
}

/// Items of one template field in a formalisation, e.g. `Constants: [r=7]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledItems {
    pub label: String,
    pub items: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct References {
    pub theory: String,
    pub problem: String,
    pub method: String,
}

/// The hidden answer key for one way of modelling an example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Formalisation {
    pub name: String,
    pub given: Vec<LabeledItems>,
    pub find: Vec<LabeledItems>,
    pub relate: Vec<Term>,
    pub interval: Interval,
    pub references: References,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl Formalisation {
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.given
            .iter()
            .chain(&self.find)
            .flat_map(|l| l.items.iter())
            .chain(&self.relate)
            .chain([&self.interval.lower, &self.interval.upper])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example {
    pub id: String,
    pub statement: String,
    pub problem: String,
    pub methods: Vec<String>,
    pub formalisations: Vec<Formalisation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}
