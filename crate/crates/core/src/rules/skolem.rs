use sha2::{Digest, Sha256};

use super::matcher::BindingSet;
use crate::rdf::{Term, SKOLEM_PREFIX};

/// Deterministic blank node for consequent label `label` of a firing of
/// `rule_id` under `bindings`.
pub fn skolem_blank(rule_id: &str, label: &str, bindings: &BindingSet) -> Term {
    let mut h = Sha256::new();
    h.update(rule_id.as_bytes());
    h.update([0]);
    h.update(label.as_bytes());
    h.update([0]);
    // BindingSet is ordered by variable name, so this is canonical.
    for (var, term) in bindings {
        h.update(var.as_bytes());
        h.update([0]);
        h.update(term.to_string().as_bytes());
        h.update([0]);
    }
    let digest = h.finalize();
    Term::blank(format!("{SKOLEM_PREFIX}{}", hex::encode(&digest[..8])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(weight: i64) -> BindingSet {
        [("weight".into(), Term::integer(weight))].into_iter().collect()
    }

    #[test]
    fn deterministic_and_firing_specific() {
        assert_eq!(skolem_blank("r#3", "b0", &b(72)), skolem_blank("r#3", "b0", &b(72)));
        assert_ne!(skolem_blank("r#3", "b0", &b(72)), skolem_blank("r#3", "b0", &b(73)));
        assert_ne!(skolem_blank("r#3", "b0", &b(72)), skolem_blank("r#3", "b1", &b(72)));
        assert_ne!(skolem_blank("r#3", "b0", &b(72)), skolem_blank("r#4", "b0", &b(72)));
        let Term::BlankNode(label) = skolem_blank("r", "x", &b(1)) else {
            panic!()
        };
        assert_eq!(label.len(), SKOLEM_PREFIX.len() + 16);
    }
}
