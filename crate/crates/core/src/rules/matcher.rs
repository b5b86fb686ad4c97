use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;
use std::sync::Arc;

use super::builtins::{eval_builtin, BuiltinError, BuiltinTable, Requirement};
use crate::rdf::{Formula, Graph, Term, Triple};

/// Variable name -> bound term, ordered so it has a canonical form.
pub type BindingSet = BTreeMap<Arc<str>, Term>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("unbound builtin arguments in `{0}`")]
    UnboundBuiltinArguments(String),
    #[error(transparent)]
    Builtin(#[from] BuiltinError),
}

/// Substitutes bound variables; unbound ones stay in place.
pub fn resolve(t: &Term, b: &BindingSet) -> Term {
    match t {
        Term::Variable(v) => b.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Iri(_) | Term::Literal(_) | Term::BlankNode(_) => t.clone(),
        _ => t.map_vars(&mut |v| b.get(v).cloned()),
    }
}

/// Extends `b` so that `pattern` equals the ground `value`. Lists unify
/// element-wise. `b` may be partially extended when this returns false.
pub fn unify(pattern: &Term, value: &Term, b: &mut BindingSet) -> bool {
    match (pattern, value) {
        (Term::Variable(v), _) => match b.get(v) {
            Some(bound) => bound == value,
            None => {
                b.insert(v.clone(), value.clone());
                true
            }
        },
        (Term::List(ps), Term::List(vs)) => ps.len() == vs.len() && ps.iter().zip(vs).all(|(p, v)| unify(p, v, b)),
        (Term::Graph(_), Term::Graph(_)) if !pattern.is_ground() => {
            // Quoted formulas only match syntactically after substitution.
            resolve(pattern, b) == *value
        }
        _ => pattern == value,
    }
}

type Key = (Arc<str>, Term);

/// Append-only triple store with predicate, predicate+subject and
/// predicate+object indexes. Triple ids follow insertion order.
#[derive(Debug, Default, Clone)]
pub struct TripleStore {
    triples: Vec<Triple>,
    ids: HashMap<Triple, u32>,
    by_p: HashMap<Arc<str>, Vec<u32>>,
    by_ps: HashMap<Key, Vec<u32>>,
    by_po: HashMap<Key, Vec<u32>>,
}

fn predicate_arc(t: &Triple) -> Arc<str> {
    match t.predicate() {
        Term::Iri(p) => p.clone(),
        _ => unreachable!("predicates are IRIs"),
    }
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graph(g: &Graph) -> Self {
        let mut store = Self::new();
        for t in g {
            store.insert(t.clone());
        }
        store
    }

    pub fn insert(&mut self, t: Triple) -> bool {
        if self.ids.contains_key(&t) {
            return false;
        }
        let id = self.triples.len() as u32;
        let p = predicate_arc(&t);
        self.by_p.entry(p.clone()).or_default().push(id);
        self.by_ps.entry((p.clone(), t.subject().clone())).or_default().push(id);
        self.by_po.entry((p, t.object().clone())).or_default().push(id);
        self.ids.insert(t.clone(), id);
        self.triples.push(t);
        true
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.ids.contains_key(t)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn to_graph(&self) -> Graph {
        self.triples.iter().cloned().collect()
    }

    fn candidates(&self, p: &Arc<str>, s: &Term, o: &Term) -> &[u32] {
        let found = if s.is_ground() {
            self.by_ps.get(&(p.clone(), s.clone()))
        } else if o.is_ground() {
            self.by_po.get(&(p.clone(), o.clone()))
        } else {
            self.by_p.get(p)
        };
        found.map(Vec::as_slice).unwrap_or(&[])
    }

    /// Extensions of `b` matching `pattern` against triples with ids in `range`.
    fn match_pattern(&self, pattern: &Triple, b: &BindingSet, range: Range<u32>, out: &mut Vec<BindingSet>) {
        let p = predicate_arc(pattern);
        let s = resolve(pattern.subject(), b);
        let o = resolve(pattern.object(), b);
        let ids = self.candidates(&p, &s, &o);
        let lo = ids.partition_point(|&i| i < range.start);
        let hi = ids.partition_point(|&i| i < range.end);
        for &id in &ids[lo..hi] {
            let t = &self.triples[id as usize];
            let mut ext = b.clone();
            if unify(&s, t.subject(), &mut ext) && unify(&o, t.object(), &mut ext) {
                out.push(ext);
            }
        }
    }
}

/// Which slice of the store a data pattern is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scope {
    All,
    Old,
    Delta,
}

#[derive(Debug, Clone)]
pub(crate) enum Step {
    Data(Triple, Scope),
    Builtin(Triple),
}

/// Static evaluation order for one antecedent.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub steps: Vec<Step>,
}

pub(crate) fn is_builtin(t: &Triple, builtins: &BuiltinTable) -> bool {
    builtins.contains(t.predicate_iri())
}

fn vars_of(t: &Term, into: &mut BTreeSet<Arc<str>>) {
    t.for_each_var(&mut |v| {
        into.insert(v.clone());
    });
}

fn covered(t: &Term, bound: &BTreeSet<Arc<str>>) -> bool {
    let mut ok = true;
    t.for_each_var(&mut |v| ok &= bound.contains(v));
    ok
}

/// How cheaply a data pattern can be looked up once `bound` is bound:
/// a bound subject beats a bound object beats a shared variable.
fn selectivity(t: &Triple, bound: &BTreeSet<Arc<str>>) -> u8 {
    let mut shares = false;
    for x in [t.subject(), t.object()] {
        x.for_each_var(&mut |v| shares |= bound.contains(v));
    }
    match (covered(t.subject(), bound), covered(t.object(), bound)) {
        (true, true) => 4,
        (true, false) => 3,
        (false, true) => 2,
        _ if shares => 1,
        _ => 0,
    }
}

/// Orders `patterns`: the delta pattern (if any) first, then greedily the
/// most selective data pattern. A builtin runs once its arguments are bound
/// and every data pattern written before it has been placed, so it never
/// sees bindings the written order would have filtered out.
/// On failure returns the first builtin that can never run.
pub(crate) fn build_plan(
    patterns: &[Triple],
    builtins: &BuiltinTable,
    seed: &BTreeSet<Arc<str>>,
    delta: Option<usize>,
) -> Result<Plan, Triple> {
    let mut bound = seed.clone();
    let mut steps = Vec::with_capacity(patterns.len());
    let mut remaining: Vec<usize> = (0..patterns.len()).collect();
    let scope_of = |j: usize| match delta {
        None => Scope::All,
        Some(i) if j == i => Scope::Delta,
        Some(i) if j < i => Scope::Old,
        Some(_) => Scope::All,
    };
    if let Some(i) = delta {
        remaining.retain(|&j| j != i);
        let t = &patterns[i];
        vars_of(t.subject(), &mut bound);
        vars_of(t.object(), &mut bound);
        steps.push(Step::Data(t.clone(), Scope::Delta));
    }
    while !remaining.is_empty() {
        let ready_builtin = remaining.iter().position(|&j| {
            let t = &patterns[j];
            let Some(b) = builtins.get(t.predicate_iri()) else {
                return false;
            };
            let args = match b.requirement {
                Requirement::Subject => covered(t.subject(), &bound),
                Requirement::Both => covered(t.subject(), &bound) && covered(t.object(), &bound),
                Requirement::Either => covered(t.subject(), &bound) || covered(t.object(), &bound),
            };
            args && remaining.iter().all(|&k| k >= j || is_builtin(&patterns[k], builtins))
        });
        let best_data = remaining
            .iter()
            .enumerate()
            .filter(|(_, &j)| !is_builtin(&patterns[j], builtins))
            .max_by_key(|(_, &j)| (selectivity(&patterns[j], &bound), std::cmp::Reverse(j)))
            .map(|(pos, _)| pos);
        let Some(pos) = ready_builtin.or(best_data) else {
            return Err(patterns[remaining[0]].clone());
        };
        let j = remaining.remove(pos);
        let t = &patterns[j];
        vars_of(t.subject(), &mut bound);
        vars_of(t.object(), &mut bound);
        if is_builtin(t, builtins) {
            steps.push(Step::Builtin(t.clone()));
        } else {
            steps.push(Step::Data(t.clone(), scope_of(j)));
        }
    }
    Ok(Plan { steps })
}

/// Id ranges for the three scopes of one semi-naive round.
#[derive(Debug, Clone)]
pub(crate) struct Window {
    pub delta_start: u32,
    pub end: u32,
}

impl Window {
    pub fn everything(store: &TripleStore) -> Self {
        Self {
            delta_start: 0,
            end: store.len() as u32,
        }
    }

    fn range(&self, scope: Scope) -> Range<u32> {
        match scope {
            Scope::All => 0..self.end,
            Scope::Old => 0..self.delta_start,
            Scope::Delta => self.delta_start..self.end,
        }
    }
}

/// Runs `plan` from `seed`. Builtin failures go to `on_error`; returning
/// `Err` from it aborts the evaluation.
pub(crate) fn execute<E>(
    plan: &Plan,
    store: &TripleStore,
    builtins: &BuiltinTable,
    window: &Window,
    seed: BindingSet,
    on_error: &mut dyn FnMut(BuiltinError) -> Result<(), E>,
) -> Result<Vec<BindingSet>, E> {
    let mut frontier = vec![seed];
    for step in &plan.steps {
        let mut next = Vec::new();
        match step {
            Step::Data(t, scope) => {
                let range = window.range(*scope);
                for b in &frontier {
                    store.match_pattern(t, b, range.clone(), &mut next);
                }
            }
            Step::Builtin(t) => {
                for b in &frontier {
                    match eval_builtin(builtins, t.predicate_iri(), t.subject(), t.object(), b) {
                        Ok(mut ext) => next.append(&mut ext),
                        Err(e) => on_error(e)?,
                    }
                }
            }
        }
        if next.is_empty() {
            return Ok(next);
        }
        frontier = next;
    }
    Ok(frontier)
}

/// All extensions of `seed` satisfying every pattern of `f` in `g`.
/// Builtin errors are returned rather than skipped.
pub fn match_formula(f: &Formula, g: &Graph, seed: &BindingSet) -> Result<Vec<BindingSet>, MatchError> {
    match_formula_with(f, &TripleStore::from_graph(g), seed, &BuiltinTable::standard())
}

pub fn match_formula_with(
    f: &Formula,
    store: &TripleStore,
    seed: &BindingSet,
    builtins: &BuiltinTable,
) -> Result<Vec<BindingSet>, MatchError> {
    let seed_vars = seed.keys().cloned().collect();
    let plan = build_plan(f.triples(), builtins, &seed_vars, None)
        .map_err(|t| MatchError::UnboundBuiltinArguments(t.to_string()))?;
    let mut results = execute(
        &plan,
        store,
        builtins,
        &Window::everything(store),
        seed.clone(),
        &mut |e| Err(MatchError::Builtin(e)),
    )?;
    results.sort();
    results.dedup();
    Ok(results)
}
