use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use super::builtins::{BuiltinError, BuiltinTable};
use super::matcher::{build_plan, execute, is_builtin, BindingSet, Plan, TripleStore, Window};
use super::rule::{Rule, RuleError};
use super::skolem::skolem_blank;
use crate::par::{self, Execution};
use crate::rdf::{Graph, Term, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_iterations: usize,
    pub max_triples: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            max_triples: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    SemiNaive,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReasonerOptions {
    pub limits: Limits,
    pub strategy: Strategy,
    /// Builtin errors abort the run instead of dropping the candidate.
    pub strict: bool,
    /// Scheduling of per-rule matching within one iteration.
    pub execution: Execution,
}

impl Default for ReasonerOptions {
    fn default() -> Self {
        Self {
            limits: Limits::default(),
            strategy: Strategy::default(),
            strict: false,
            execution: Execution::Sequential,
        }
    }
}

/// One rule firing: the bindings used and the triples it added first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: Arc<str>,
    pub bindings: BindingSet,
    pub produced: Vec<Triple>,
    pub iteration: usize,
}

/// A discarded candidate firing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Diagnostic {
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Reasoning {
    pub graph: Graph,
    pub derivations: Vec<Derivation>,
    pub diagnostics: Vec<Diagnostic>,
    pub iterations: usize,
}

impl Reasoning {
    pub fn inferred(&self, input: &Graph) -> Graph {
        self.graph.difference(input)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReasonError {
    #[error("iteration limit of {0} exceeded; the rule set may not terminate")]
    IterationLimit(usize),
    #[error("triple limit of {0} exceeded; the rule set may not terminate")]
    TripleLimit(usize),
    #[error("rule {rule}: {source}")]
    Builtin { rule: String, source: BuiltinError },
    #[error("rule {rule}: invalid conclusion: {message}")]
    InvalidConclusion { rule: String, message: String },
}

struct CompiledRule {
    rule: Rule,
    naive: Plan,
    deltas: Vec<Plan>,
}

/// Rules compiled into evaluation plans; reusable across graphs and threads.
pub struct Reasoner {
    rules: Vec<CompiledRule>,
    builtins: BuiltinTable,
    options: ReasonerOptions,
}

impl Reasoner {
    pub fn new(rules: Vec<Rule>, options: ReasonerOptions) -> Result<Self, RuleError> {
        Self::with_builtins(rules, BuiltinTable::standard(), options)
    }

    /// Fails when some builtin of a rule can never have its arguments bound.
    pub fn with_builtins(
        rules: Vec<Rule>,
        builtins: BuiltinTable,
        options: ReasonerOptions,
    ) -> Result<Self, RuleError> {
        let mut compiled = Vec::with_capacity(rules.len());
        for rule in rules {
            let patterns = rule.antecedent().triples();
            let unbound = |t: Triple| RuleError::UnboundBuiltinArguments {
                rule: rule.id().to_string(),
                pattern: t.to_string(),
            };
            let naive = build_plan(patterns, &builtins, &BTreeSet::new(), None).map_err(unbound)?;
            let mut deltas = Vec::new();
            for (i, t) in patterns.iter().enumerate() {
                if !is_builtin(t, &builtins) {
                    deltas.push(build_plan(patterns, &builtins, &BTreeSet::new(), Some(i)).map_err(unbound)?);
                }
            }
            compiled.push(CompiledRule { rule, naive, deltas });
        }
        Ok(Self {
            rules: compiled,
            builtins,
            options,
        })
    }

    pub fn options(&self) -> &ReasonerOptions {
        &self.options
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().map(|c| &c.rule)
    }

    fn matches(
        &self,
        rule: &CompiledRule,
        store: &TripleStore,
        window: &Window,
        iteration: usize,
    ) -> Result<(Vec<BindingSet>, Vec<Diagnostic>), ReasonError> {
        let mut diagnostics = Vec::new();
        let strict = self.options.strict;
        let rule_id = rule.rule.id();
        let mut on_error = |e: BuiltinError| {
            if strict {
                Err(ReasonError::Builtin {
                    rule: rule_id.to_string(),
                    source: e,
                })
            } else {
                diagnostics.push(Diagnostic {
                    rule: rule_id.to_string(),
                    message: e.to_string(),
                });
                Ok(())
            }
        };
        let plans: Vec<(&Plan, Window)> = match self.options.strategy {
            Strategy::Naive => vec![(&rule.naive, Window::everything(store))],
            Strategy::SemiNaive if rule.deltas.is_empty() => {
                // No data patterns: the result cannot change after round one.
                if iteration == 1 {
                    vec![(&rule.naive, window.clone())]
                } else {
                    Vec::new()
                }
            }
            Strategy::SemiNaive => rule.deltas.iter().map(|p| (p, window.clone())).collect(),
        };
        let mut out = Vec::new();
        for (plan, w) in plans {
            out.extend(execute(
                plan,
                store,
                &self.builtins,
                &w,
                BindingSet::new(),
                &mut on_error,
            )?);
        }
        Ok((out, diagnostics))
    }

    /// Runs to fixpoint over `input`.
    pub fn run(&self, input: &Graph) -> Result<Reasoning, ReasonError> {
        let limits = self.options.limits;
        let mut store = TripleStore::from_graph(input);
        if store.len() > limits.max_triples {
            return Err(ReasonError::TripleLimit(limits.max_triples));
        }
        let mut fired: HashSet<(usize, BindingSet)> = HashSet::new();
        let mut derivations = Vec::new();
        let mut diagnostics = BTreeSet::new();
        let mut window = Window {
            delta_start: 0,
            end: store.len() as u32,
        };
        let mut iteration = 0;
        loop {
            iteration += 1;
            if iteration > limits.max_iterations {
                return Err(ReasonError::IterationLimit(limits.max_iterations));
            }
            let found = par::map(self.options.execution, &self.rules, |rule| {
                self.matches(rule, &store, &window, iteration)
            });
            let mut skolems: HashMap<Arc<str>, Term> = HashMap::new();
            for (idx, result) in found.into_iter().enumerate() {
                let (bindings, diags) = result?;
                diagnostics.extend(diags);
                let rule = &self.rules[idx].rule;
                for b in bindings {
                    if fired.contains(&(idx, b.clone())) {
                        continue;
                    }
                    skolems.clear();
                    let mut produced = Vec::new();
                    for t in rule.consequent().triples() {
                        let triple = match instantiate(rule, t, &b, &mut skolems) {
                            Ok(triple) => triple,
                            Err(message) if self.options.strict => {
                                return Err(ReasonError::InvalidConclusion {
                                    rule: rule.id().to_string(),
                                    message,
                                })
                            }
                            Err(message) => {
                                diagnostics.insert(Diagnostic {
                                    rule: rule.id().to_string(),
                                    message,
                                });
                                continue;
                            }
                        };
                        if store.insert(triple.clone()) {
                            produced.push(triple);
                            if store.len() > limits.max_triples {
                                return Err(ReasonError::TripleLimit(limits.max_triples));
                            }
                        }
                    }
                    derivations.push(Derivation {
                        rule: rule.id_arc().clone(),
                        bindings: b.clone(),
                        produced,
                        iteration,
                    });
                    fired.insert((idx, b));
                }
            }
            let end = store.len() as u32;
            if end == window.end {
                break;
            }
            window = Window {
                delta_start: window.end,
                end,
            };
        }
        log::debug!(
            "fixpoint after {iteration} iterations: {} input + {} inferred triples",
            input.len(),
            store.len() - input.len()
        );
        let mut graph = store.to_graph();
        graph.extend_prefixes(input.prefixes());
        Ok(Reasoning {
            graph,
            derivations,
            diagnostics: diagnostics.into_iter().collect(),
            iterations: iteration,
        })
    }
}

/// Instantiates one consequent pattern. Skolem nodes are cached per firing
/// so a template label maps to a single node across the consequent.
pub(crate) fn instantiate(
    rule: &Rule,
    t: &Triple,
    b: &BindingSet,
    skolems: &mut HashMap<Arc<str>, Term>,
) -> Result<Triple, String> {
    // Skolemize the template's own blanks before substituting, so blank
    // nodes arriving through bindings are kept as they are.
    let mut term = |x: &Term| {
        x.map_blanks(&mut |label| {
            skolems
                .entry(label.clone())
                .or_insert_with(|| skolem_blank(rule.id(), label, b))
                .clone()
        })
        .map_vars(&mut |v| b.get(v).cloned())
    };
    let (s, o) = (term(t.subject()), term(t.object()));
    if !s.is_ground() || !o.is_ground() {
        return Err(format!("unbound variable in `{t}`"));
    }
    Triple::new(s, t.predicate().clone(), o).map_err(|e| e.to_string())
}

/// Runs `rules` over `g` with default options.
pub fn forward_chain(g: &Graph, rules: &[Rule], limits: Limits) -> Result<(Graph, Vec<Derivation>), ForwardChainError> {
    let options = ReasonerOptions {
        limits,
        ..ReasonerOptions::default()
    };
    let reasoning = Reasoner::new(rules.to_vec(), options)?.run(g)?;
    Ok((reasoning.graph, reasoning.derivations))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForwardChainError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Reason(#[from] ReasonError),
}
