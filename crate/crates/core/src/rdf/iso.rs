use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::term::{Term, Triple};
use super::Graph;

type Colours = HashMap<Arc<str>, u64>;

struct Side<'a> {
    graph: &'a Graph,
    blanks: Vec<Arc<str>>,
    // blank label -> triples mentioning it
    mentions: HashMap<Arc<str>, Vec<&'a Triple>>,
}

impl<'a> Side<'a> {
    fn new(graph: &'a Graph) -> Self {
        let mut mentions: HashMap<Arc<str>, Vec<&Triple>> = HashMap::new();
        for t in graph {
            let mut seen = HashSet::new();
            for term in [t.subject(), t.object()] {
                term.for_each_blank(&mut |b| {
                    if seen.insert(b.clone()) {
                        mentions.entry(b.clone()).or_default().push(t);
                    }
                });
            }
        }
        Self {
            graph,
            blanks: graph.blank_nodes().into_iter().collect(),
            mentions,
        }
    }

    fn refine(&self, colours: &Colours) -> Colours {
        let mut next = HashMap::with_capacity(colours.len());
        for b in &self.blanks {
            let mut sigs: Vec<u64> = self.mentions[b]
                .iter()
                .map(|t| {
                    let coloured = t.map_blanks(&mut |x| {
                        if x == b {
                            Term::blank("*")
                        } else {
                            Term::blank(colours[x].to_string())
                        }
                    });
                    hash_of(&coloured)
                })
                .collect();
            sigs.sort_unstable();
            next.insert(b.clone(), hash_of(&(colours[b], sigs)));
        }
        next
    }
}

fn hash_of<T: Hash>(value: &T) -> u64 {
    let mut h = DefaultHasher::new();
    value.hash(&mut h);
    h.finish()
}

fn distinct(a: &Colours, b: &Colours) -> usize {
    a.values().chain(b.values()).collect::<HashSet<_>>().len()
}

fn histogram(c: &Colours) -> BTreeMap<u64, usize> {
    let mut out = BTreeMap::new();
    for v in c.values() {
        *out.entry(*v).or_insert(0) += 1;
    }
    out
}

/// True when the graphs are equal up to a bijective renaming of blank nodes.
pub fn isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let ground_a: Vec<&Triple> = a.iter().filter(|t| !t.has_blank()).collect();
    if ground_a.len() != b.iter().filter(|t| !t.has_blank()).count() || !ground_a.iter().all(|t| b.contains(t)) {
        return false;
    }
    let (sa, sb) = (Side::new(a), Side::new(b));
    if sa.blanks.len() != sb.blanks.len() {
        return false;
    }
    if sa.blanks.is_empty() {
        return true;
    }

    // Both sides get the same number of rounds so colours stay comparable.
    let mut ca: Colours = sa.blanks.iter().map(|x| (x.clone(), 0)).collect();
    let mut cb: Colours = sb.blanks.iter().map(|x| (x.clone(), 0)).collect();
    let mut classes = 1;
    for _ in 0..=sa.blanks.len() {
        let (na, nb) = (sa.refine(&ca), sb.refine(&cb));
        let n = distinct(&na, &nb);
        ca = na;
        cb = nb;
        if histogram(&ca) != histogram(&cb) {
            return false;
        }
        if n == classes {
            break;
        }
        classes = n;
    }

    let class_size = histogram(&ca);
    let mut order = sa.blanks.clone();
    order.sort_by_key(|x| (class_size[&ca[x]], ca[x]));
    let position: HashMap<&Arc<str>, usize> = order.iter().enumerate().map(|(i, x)| (x, i)).collect();

    // Triples become checkable once their last blank (in `order`) is mapped.
    let mut checks: Vec<Vec<&Triple>> = vec![Vec::new(); order.len()];
    for t in a.iter().filter(|t| t.has_blank()) {
        let mut last = 0;
        for term in [t.subject(), t.object()] {
            term.for_each_blank(&mut |x| last = last.max(position[x]));
        }
        checks[last].push(t);
    }

    let mut by_colour: HashMap<u64, Vec<&Arc<str>>> = HashMap::new();
    for x in &sb.blanks {
        by_colour.entry(cb[x]).or_default().push(x);
    }

    let mut search = Search {
        order: &order,
        colours: &ca,
        candidates: &by_colour,
        checks: &checks,
        target: sb.graph,
        mapping: HashMap::new(),
        used: HashSet::new(),
    };
    search.extend(0)
}

struct Search<'a> {
    order: &'a [Arc<str>],
    colours: &'a Colours,
    candidates: &'a HashMap<u64, Vec<&'a Arc<str>>>,
    checks: &'a [Vec<&'a Triple>],
    target: &'a Graph,
    mapping: HashMap<Arc<str>, Arc<str>>,
    used: HashSet<Arc<str>>,
}

impl Search<'_> {
    fn extend(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let x = &self.order[depth];
        let Some(cands) = self.candidates.get(&self.colours[x]) else {
            return false;
        };
        for &y in cands {
            if self.used.contains(y) {
                continue;
            }
            self.mapping.insert(x.clone(), y.clone());
            self.used.insert(y.clone());
            let ok = self.checks[depth].iter().all(|t| {
                let mapped = t.map_blanks(&mut |b| Term::BlankNode(self.mapping[b].clone()));
                self.target.contains(&mapped)
            });
            if ok && self.extend(depth + 1) {
                return true;
            }
            self.used.remove(y);
            self.mapping.remove(x);
        }
        false
    }
}
