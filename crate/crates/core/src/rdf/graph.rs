use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::term::{Term, Triple};

/// A set of ground triples plus the prefix map used when serializing.
///
/// Iteration follows the term ordering, so two graphs holding the same
/// triples always serialize identically.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    triples: BTreeSet<Triple>,
    prefixes: BTreeMap<String, String>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_prefixes(prefixes: BTreeMap<String, String>) -> Self {
        Self {
            triples: BTreeSet::new(),
            prefixes,
        }
    }

    /// Adds a triple; returns false when it was already present.
    ///
    /// # Panics
    /// When the triple contains a variable.
    pub fn insert(&mut self, triple: Triple) -> bool {
        assert!(triple.is_ground(), "graphs hold ground triples only: {triple}");
        self.triples.insert(triple)
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn set_prefix(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        self.prefixes.insert(prefix.into(), namespace.into());
    }

    pub fn extend_prefixes<'a>(&mut self, prefixes: impl IntoIterator<Item = (&'a String, &'a String)>) {
        for (p, ns) in prefixes {
            self.prefixes.entry(p.clone()).or_insert_with(|| ns.clone());
        }
    }

    /// Triples in `self` that are not in `other`.
    pub fn difference(&self, other: &Graph) -> Graph {
        Graph {
            triples: self.triples.difference(&other.triples).cloned().collect(),
            prefixes: self.prefixes.clone(),
        }
    }

    pub fn is_superset(&self, other: &Graph) -> bool {
        self.triples.is_superset(&other.triples)
    }

    pub fn blank_nodes(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        for t in &self.triples {
            t.subject().for_each_blank(&mut |b| {
                out.insert(b.clone());
            });
            t.object().for_each_blank(&mut |b| {
                out.insert(b.clone());
            });
        }
        out
    }

    pub fn objects<'a>(&'a self, subject: &'a Term, predicate: &'a str) -> impl Iterator<Item = &'a Term> + 'a {
        // Triples sort by subject, then predicate, and `<>` is the least term.
        let start = Triple::new(subject.clone(), Term::iri(predicate), Term::iri("")).ok();
        start
            .into_iter()
            .flat_map(move |start| self.triples.range(start..))
            .take_while(move |t| t.subject() == subject && t.predicate_iri() == predicate)
            .map(Triple::object)
    }

    /// Builds a subject -> predicate -> objects index for repeated path walks.
    pub fn subject_index(&self) -> HashMap<&Term, HashMap<&str, Vec<&Term>>> {
        let mut index: HashMap<&Term, HashMap<&str, Vec<&Term>>> = HashMap::new();
        for t in &self.triples {
            index
                .entry(t.subject())
                .or_default()
                .entry(t.predicate_iri())
                .or_default()
                .push(t.object());
        }
        index
    }

    pub fn into_triples(self) -> BTreeSet<Triple> {
        self.triples
    }
}

impl Extend<Triple> for Graph {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        for t in iter {
            self.insert(t);
        }
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut g = Graph::new();
        g.extend(iter);
        g
    }
}

impl<'a> IntoIterator for &'a Graph {
    type Item = &'a Triple;
    type IntoIter = std::collections::btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

/// Prefix for skolem blank nodes minted by the rule engine. Such labels are
/// deterministic functions of a rule firing and therefore shared across
/// graphs rather than renamed apart.
pub const SKOLEM_PREFIX: &str = "sk_";

/// Standard RDF merge: the union of all triples, with blank nodes from
/// different inputs kept apart. Skolem blank nodes keep their labels.
pub fn merge_graphs(graphs: &[Graph]) -> Graph {
    let mut owners: HashMap<Arc<str>, usize> = HashMap::new();
    let mut label_sets = Vec::with_capacity(graphs.len());
    for g in graphs {
        let labels: BTreeSet<Arc<str>> = g
            .blank_nodes()
            .into_iter()
            .filter(|b| !b.starts_with(SKOLEM_PREFIX))
            .collect();
        for b in &labels {
            *owners.entry(b.clone()).or_default() += 1;
        }
        label_sets.push(labels);
    }

    let mut taken: BTreeSet<Arc<str>> = owners.keys().cloned().collect();
    let mut out = Graph::new();
    for (i, g) in graphs.iter().enumerate() {
        out.extend_prefixes(g.prefixes());
        let mut renames: HashMap<Arc<str>, Arc<str>> = HashMap::new();
        for b in &label_sets[i] {
            if owners[b] > 1 {
                let mut candidate = format!("{b}_g{i}");
                while taken.contains(candidate.as_str()) {
                    candidate.push('x');
                }
                let candidate: Arc<str> = candidate.into();
                taken.insert(candidate.clone());
                renames.insert(b.clone(), candidate);
            }
        }
        if renames.is_empty() {
            out.triples.extend(g.triples.iter().cloned());
        } else {
            for t in g {
                out.triples.insert(
                    t.map_blanks(&mut |b| Term::BlankNode(renames.get(b).cloned().unwrap_or_else(|| b.clone()))),
                );
            }
        }
    }
    out
}
