//! Parser for the N3 subset used by data, ontology and rule files.
//!
//! Supported: `@prefix`, `@base`, prefixed names, `<...>` IRIs, string
//! literals with `^^` datatypes, numeric and boolean shorthand, `a`, `;` and
//! `,` abbreviations, `[...]` property lists, `(...)` lists, `{...}` formulas,
//! top-level `=>` rules, `?x` variables and the forward path `!`. Everything
//! else is reported as an unsupported feature.

use std::collections::{BTreeMap, HashSet};

use super::lexer::{tokenize, LexError, Pos, Tok, Token};
use super::term::{Formula, Term, Triple};
use super::vocab::{log, rdf, xsd};
use super::Graph;
use crate::rules::{Rule, RuleError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum N3Error {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unresolvable prefix '{prefix}:'")]
    UnknownPrefix { pos: Pos, prefix: String },
    #[error("{pos}: relative IRI <{iri}> with no base")]
    RelativeIri { pos: Pos, iri: String },
    #[error("{pos}: unsupported N3 feature: {feature}")]
    Unsupported { pos: Pos, feature: String },
    #[error("{pos}: {source}")]
    InvalidRule { pos: Pos, source: RuleError },
}

impl N3Error {
    pub fn pos(&self) -> Pos {
        match self {
            N3Error::Syntax { pos, .. }
            | N3Error::UnknownPrefix { pos, .. }
            | N3Error::RelativeIri { pos, .. }
            | N3Error::Unsupported { pos, .. }
            | N3Error::InvalidRule { pos, .. } => *pos,
        }
    }
}

impl From<LexError> for N3Error {
    fn from(e: LexError) -> Self {
        N3Error::Syntax {
            pos: e.pos,
            message: e.message,
        }
    }
}

/// Result of parsing one N3 text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub prefixes: BTreeMap<String, String>,
    pub graph: Graph,
    pub rules: Vec<Rule>,
}

/// Parses `text`, resolving relative IRIs against `base`. Rule ids are
/// `inline#1`, `inline#2`, ...; use [`N3Parser::source`] to name them.
pub fn parse_n3(text: &str, base: Option<&str>) -> Result<Document, N3Error> {
    let mut parser = N3Parser::new();
    if let Some(base) = base {
        parser = parser.base(base);
    }
    parser.parse(text)
}

#[derive(Debug, Clone)]
pub struct N3Parser {
    base: Option<String>,
    source: String,
}

impl Default for N3Parser {
    fn default() -> Self {
        Self::new()
    }
}

impl N3Parser {
    pub fn new() -> Self {
        Self {
            base: None,
            source: "inline".to_string(),
        }
    }

    pub fn base(mut self, base: impl Into<String>) -> Self {
        self.base = Some(base.into());
        self
    }

    /// Name used as the rule-id prefix (`{source}#{ordinal}`).
    pub fn source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn parse(&self, text: &str) -> Result<Document, N3Error> {
        let tokens = tokenize(text)?;
        let explicit_blanks = tokens
            .iter()
            .filter_map(|t| match &t.tok {
                Tok::Blank(b) => Some(b.clone()),
                _ => None,
            })
            .collect();
        let mut p = Parser {
            tokens,
            idx: 0,
            prefixes: BTreeMap::new(),
            base: self.base.clone(),
            stack: vec![Vec::new()],
            explicit_blanks,
            anon_counter: 0,
            fresh_vars: 0,
        };
        let mut doc = Document::default();
        let mut ordinal = 0;
        while p.peek() != &Tok::Eof {
            let start = p.pos();
            if p.directive()? {
                continue;
            }
            p.fresh_vars = 0;
            p.triples()?;
            p.expect(Tok::Dot, "'.' at end of statement")?;
            for triple in std::mem::take(&mut p.stack[0]) {
                if triple.predicate_iri() == log::IMPLIES {
                    let (Term::Graph(ante), Term::Graph(cons)) = (triple.subject(), triple.object()) else {
                        return Err(N3Error::Unsupported {
                            pos: start,
                            feature: "log:implies between non-formula terms".into(),
                        });
                    };
                    ordinal += 1;
                    let rule = Rule::new(format!("{}#{ordinal}", self.source), ante.clone(), cons.clone())
                        .map_err(|source| N3Error::InvalidRule { pos: start, source })?;
                    doc.rules.push(rule);
                } else {
                    if !triple.is_ground() {
                        return Err(N3Error::Unsupported {
                            pos: start,
                            feature: "variables outside rule formulas".into(),
                        });
                    }
                    doc.graph.insert(triple);
                }
            }
        }
        for (prefix, ns) in &p.prefixes {
            doc.graph.set_prefix(prefix.clone(), ns.clone());
        }
        doc.prefixes = p.prefixes;
        Ok(doc)
    }
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    prefixes: BTreeMap<String, String>,
    base: Option<String>,
    /// One triple buffer per open formula; index 0 is the document.
    stack: Vec<Vec<Triple>>,
    explicit_blanks: HashSet<String>,
    anon_counter: usize,
    fresh_vars: usize,
}

fn has_scheme(iri: &str) -> bool {
    match iri.find(':') {
        Some(0) | None => false,
        Some(i) => {
            let scheme = &iri[..i];
            scheme.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        }
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.idx].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].pos
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        if t.tok != Tok::Eof {
            self.idx += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, N3Error> {
        Err(N3Error::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn unsupported<T>(&self, pos: Pos, feature: &str) -> Result<T, N3Error> {
        Err(N3Error::Unsupported {
            pos,
            feature: feature.to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), N3Error> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.syntax(format!("expected {what}, found {}", self.peek()))
        }
    }

    fn depth(&self) -> usize {
        self.stack.len() - 1
    }

    fn directive(&mut self) -> Result<bool, N3Error> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::At(word) => {
                self.next();
                match word.as_str() {
                    "prefix" => {
                        let prefix = match self.next().tok {
                            Tok::PName { prefix, local } if local.is_empty() => prefix,
                            other => return self.syntax(format!("expected prefix name, found {other}")),
                        };
                        let iri = match self.next() {
                            Token {
                                tok: Tok::IriRef(iri),
                                pos,
                            } => self.resolve(&iri, pos)?,
                            t => return self.syntax(format!("expected <namespace>, found {}", t.tok)),
                        };
                        self.expect(Tok::Dot, "'.' after @prefix")?;
                        self.prefixes.insert(prefix, iri);
                    }
                    "base" => {
                        let iri = match self.next() {
                            Token {
                                tok: Tok::IriRef(iri),
                                pos,
                            } => self.resolve(&iri, pos)?,
                            t => return self.syntax(format!("expected <base>, found {}", t.tok)),
                        };
                        self.expect(Tok::Dot, "'.' after @base")?;
                        self.base = Some(iri);
                    }
                    "forAll" | "forSome" => return self.unsupported(pos, &format!("@{word}")),
                    "keywords" => return self.unsupported(pos, "@keywords"),
                    other => return self.unsupported(pos, &format!("directive @{other}")),
                }
                Ok(true)
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("prefix") || w.eq_ignore_ascii_case("base") => {
                self.unsupported(pos, "SPARQL-style PREFIX/BASE directives")
            }
            _ => Ok(false),
        }
    }

    fn resolve(&self, iri: &str, pos: Pos) -> Result<String, N3Error> {
        if has_scheme(iri) {
            return Ok(iri.to_string());
        }
        let Some(base) = &self.base else {
            return Err(N3Error::RelativeIri {
                pos,
                iri: iri.to_string(),
            });
        };
        url::Url::parse(base)
            .and_then(|b| b.join(iri))
            .map(|u| u.to_string())
            .map_err(|_| N3Error::RelativeIri {
                pos,
                iri: iri.to_string(),
            })
    }

    fn fresh_anon(&mut self) -> Term {
        loop {
            let label = format!("b{}", self.anon_counter);
            self.anon_counter += 1;
            if !self.explicit_blanks.contains(&label) {
                return Term::blank(label);
            }
        }
    }

    /// Term standing for the result of a `!` path step.
    fn fresh_path_term(&mut self) -> Term {
        if self.depth() == 0 {
            self.fresh_anon()
        } else {
            let v = Term::var(format!("_v{}", self.fresh_vars));
            self.fresh_vars += 1;
            v
        }
    }

    fn emit(&mut self, s: Term, p: Term, o: Term, pos: Pos) -> Result<(), N3Error> {
        let triple = Triple::new(s, p, o).map_err(|e| N3Error::Syntax {
            pos,
            message: e.to_string(),
        })?;
        if self.depth() > 0 && triple.predicate_iri() == log::IMPLIES {
            return self.unsupported(pos, "nested rules inside formulas");
        }
        self.stack.last_mut().expect("document buffer").push(triple);
        Ok(())
    }

    fn triples(&mut self) -> Result<(), N3Error> {
        if *self.peek() == Tok::LBracket {
            let subject = self.node()?;
            if matches!(self.peek(), Tok::Dot | Tok::RBrace) {
                return Ok(());
            }
            return self.predicate_object_list(subject);
        }
        let subject = self.path()?;
        self.predicate_object_list(subject)
    }

    fn predicate_object_list(&mut self, subject: Term) -> Result<(), N3Error> {
        loop {
            let predicate = self.verb()?;
            loop {
                let pos = self.pos();
                let object = self.path()?;
                self.emit(subject.clone(), predicate.clone(), object, pos)?;
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
            if *self.peek() != Tok::Semi {
                return Ok(());
            }
            while *self.peek() == Tok::Semi {
                self.next();
            }
            if matches!(self.peek(), Tok::Dot | Tok::RBracket | Tok::RBrace | Tok::Eof) {
                return Ok(());
            }
        }
    }

    fn verb(&mut self) -> Result<Term, N3Error> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Word(w) if w == "a" => {
                self.next();
                Ok(Term::iri(rdf::TYPE))
            }
            Tok::Implies => {
                self.next();
                Ok(Term::iri(log::IMPLIES))
            }
            Tok::ImpliedBy => self.unsupported(pos, "backward rules (<=)"),
            Tok::Equals => self.unsupported(pos, "'=' (owl:sameAs shorthand)"),
            Tok::Word(w) if w == "has" || w == "is" => self.unsupported(pos, &format!("'{w}' predicate keywords")),
            Tok::At(w) if w == "has" || w == "is" => self.unsupported(pos, &format!("'@{w}' predicate keywords")),
            _ => {
                let term = self.path()?;
                match term {
                    Term::Iri(_) => Ok(term),
                    Term::Variable(_) => self.unsupported(pos, "variable in predicate position"),
                    other => Err(N3Error::Syntax {
                        pos,
                        message: format!("predicate must be an IRI, found {other}"),
                    }),
                }
            }
        }
    }

    fn path(&mut self) -> Result<Term, N3Error> {
        let mut current = self.node()?;
        loop {
            let pos = self.pos();
            match self.peek() {
                Tok::Bang => {
                    self.next();
                    let predicate = self.node()?;
                    if !matches!(predicate, Term::Iri(_)) {
                        return Err(N3Error::Syntax {
                            pos,
                            message: "path step must be an IRI".into(),
                        });
                    }
                    let result = self.fresh_path_term();
                    self.emit(current, predicate, result.clone(), pos)?;
                    current = result;
                }
                Tok::Caret => return self.unsupported(pos, "reverse paths (^)"),
                _ => return Ok(current),
            }
        }
    }

    fn node(&mut self) -> Result<Term, N3Error> {
        let Token { tok, pos } = self.next();
        match tok {
            Tok::IriRef(iri) => Ok(Term::iri(self.resolve(&iri, pos)?)),
            Tok::PName { prefix, local } => self.pname(&prefix, &local, pos),
            Tok::Blank(label) => Ok(Term::blank(label)),
            Tok::Var(name) => {
                if self.depth() == 0 {
                    self.unsupported(pos, "variables outside rule formulas")
                } else {
                    Ok(Term::var(name))
                }
            }
            Tok::Str(lexical) => match self.peek().clone() {
                Tok::Caret2 => {
                    self.next();
                    let dt_pos = self.pos();
                    let datatype = self.node()?;
                    match datatype {
                        Term::Iri(dt) => Ok(Term::literal(lexical, dt)),
                        _ => Err(N3Error::Syntax {
                            pos: dt_pos,
                            message: "datatype must be an IRI".into(),
                        }),
                    }
                }
                Tok::At(_) => self.unsupported(self.pos(), "language-tagged literals"),
                _ => Ok(Term::string(lexical)),
            },
            Tok::Integer(n) => Ok(Term::literal(n, xsd::INTEGER)),
            Tok::Decimal(n) => Ok(Term::literal(n, xsd::DECIMAL)),
            Tok::Double(n) => Ok(Term::literal(n, xsd::DOUBLE)),
            Tok::Word(w) if w == "true" || w == "false" => Ok(Term::literal(w, xsd::BOOLEAN)),
            Tok::LBracket => {
                let blank = self.fresh_anon();
                if *self.peek() != Tok::RBracket {
                    self.predicate_object_list(blank.clone())?;
                }
                self.expect(Tok::RBracket, "']'")?;
                Ok(blank)
            }
            Tok::LParen => {
                let mut items = Vec::new();
                while *self.peek() != Tok::RParen {
                    if *self.peek() == Tok::Eof {
                        return self.syntax("unterminated list");
                    }
                    items.push(self.path()?);
                }
                self.next();
                Ok(Term::List(items))
            }
            Tok::LBrace => {
                self.stack.push(Vec::new());
                loop {
                    match self.peek() {
                        Tok::RBrace => break,
                        Tok::Eof => return self.syntax("unterminated formula"),
                        Tok::At(_) => {
                            let pos = self.pos();
                            return self.unsupported(pos, "directives inside formulas");
                        }
                        _ => {}
                    }
                    self.triples()?;
                    match self.peek() {
                        Tok::Dot => {
                            self.next();
                        }
                        Tok::RBrace => break,
                        other => return self.syntax(format!("expected '.' or '}}', found {other}")),
                    }
                }
                self.next();
                let triples = self.stack.pop().expect("formula buffer");
                Ok(Term::Graph(Formula::new(triples)))
            }
            Tok::At(w) if w == "forAll" || w == "forSome" => self.unsupported(pos, &format!("@{w}")),
            Tok::ImpliedBy => self.unsupported(pos, "backward rules (<=)"),
            Tok::Caret => self.unsupported(pos, "reverse paths (^)"),
            other => Err(N3Error::Syntax {
                pos,
                message: format!("expected a term, found {other}"),
            }),
        }
    }

    fn pname(&self, prefix: &str, local: &str, pos: Pos) -> Result<Term, N3Error> {
        match self.prefixes.get(prefix) {
            Some(ns) => Ok(Term::iri(format!("{ns}{local}"))),
            None => Err(N3Error::UnknownPrefix {
                pos,
                prefix: prefix.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::vocab::{math, rdfs};

    const CIS: &str = "http://example.org/cis/";

    fn prefixes() -> String {
        format!(
            "@prefix rdfs: <{}>.\n@prefix hosstay: <{CIS}HospitalStay#>.\n@prefix natperson: <{CIS}Natperson#>.\n\
             @prefix human: <http://example.org/do/human#>.\n@prefix math: <{}>.\n",
            rdfs::NS,
            math::NS
        )
    }

    #[test]
    fn class_declaration() {
        let doc = parse_n3(&format!("{}hosstay:HospitalStay a rdfs:Class.", prefixes()), None).unwrap();
        assert_eq!(doc.graph.len(), 1);
        let t = doc.graph.iter().next().unwrap();
        assert_eq!(t.subject(), &Term::iri(format!("{CIS}HospitalStay#HospitalStay")));
        assert_eq!(t.predicate_iri(), rdf::TYPE);
        assert_eq!(t.object(), &Term::iri(rdfs::CLASS));
    }

    #[test]
    fn simple_rule() {
        let doc = parse_n3(
            &format!(
                "{}{{?person a natperson:Natperson}} => {{?person a human:Person}}.",
                prefixes()
            ),
            None,
        )
        .unwrap();
        assert_eq!(doc.rules.len(), 1);
        assert_eq!(doc.rules[0].antecedent().len(), 1);
        assert_eq!(doc.rules[0].consequent().len(), 1);
        assert_eq!(doc.rules[0].id(), "inline#1");
        assert!(doc.graph.is_empty());
    }

    #[test]
    fn empty_input() {
        let doc = parse_n3("", None).unwrap();
        assert!(doc.graph.is_empty());
        assert!(doc.rules.is_empty());
    }

    #[test]
    fn forward_path_desugars_in_place() {
        let doc = parse_n3(
            &format!(
                "{}{{(?weightValue (?lengthValue 2)!math:exponentiation) math:quotient ?bmi}} => {{?bmi a human:Bmi}}.",
                prefixes()
            ),
            None,
        )
        .unwrap();
        let ante = doc.rules[0].antecedent().triples();
        assert_eq!(ante.len(), 2);
        assert_eq!(
            ante[0].subject(),
            &Term::List(vec![Term::var("lengthValue"), Term::literal("2", xsd::INTEGER)])
        );
        assert_eq!(ante[0].predicate_iri(), math::EXPONENTIATION);
        assert_eq!(ante[0].object(), &Term::var("_v0"));
        assert_eq!(
            ante[1].subject(),
            &Term::List(vec![Term::var("weightValue"), Term::var("_v0")])
        );
        assert_eq!(ante[1].predicate_iri(), math::QUOTIENT);
        assert_eq!(ante[1].object(), &Term::var("bmi"));
    }

    #[test]
    fn property_lists_and_abbreviations() {
        let doc = parse_n3(
            &format!(
                "{}<{CIS}Natperson/1#this> human:weighs [ human:v 72; human:u human:kg ], [ human:v 73 ]; human:n \"x\".",
                prefixes()
            ),
            None,
        )
        .unwrap();
        assert_eq!(doc.graph.len(), 6);
        assert_eq!(doc.graph.blank_nodes().len(), 2);
    }

    #[test]
    fn anonymous_labels_avoid_explicit_ones() {
        let doc = parse_n3(&format!("{}_:b0 human:p [ human:q 1 ].", prefixes()), None).unwrap();
        assert_eq!(doc.graph.blank_nodes().len(), 2);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_n3("@prefix x: <http://x#>.\nx:a x:b .", None).unwrap_err();
        assert!(
            matches!(
                err,
                N3Error::Syntax {
                    pos: Pos { line: 2, .. },
                    ..
                }
            ),
            "{err}"
        );
        assert!(matches!(
            parse_n3("y:a y:b y:c.", None),
            Err(N3Error::UnknownPrefix { .. })
        ));
        assert!(matches!(
            parse_n3("<a> <b> <c>.", None),
            Err(N3Error::RelativeIri { .. })
        ));
        let doc = parse_n3("<a> <b> <c>.", Some("http://ex.org/dir/")).unwrap();
        assert!(doc.graph.iter().next().unwrap().subject() == &Term::iri("http://ex.org/dir/a"));
    }

    #[test]
    fn unsupported_constructs_are_explicit() {
        let cases = [
            "@forAll <http://x#a>.",
            "{<http://x#a> <http://x#b> ?c} <= {<http://x#a> <http://x#b> ?c}.",
            "<http://x#a> <http://x#b> \"x\"@en.",
            "<http://x#a>^<http://x#b> <http://x#c> <http://x#d>.",
            "{?a <http://x#b> ?c} => {{?a <http://x#b> ?c} => {?a <http://x#d> ?c}}.",
            "<http://x#a> = <http://x#b>.",
            "{?a ?p ?c} => {?a <http://x#b> ?c}.",
            "?a <http://x#b> <http://x#c>.",
        ];
        for case in cases {
            let err = parse_n3(case, None).unwrap_err();
            assert!(matches!(err, N3Error::Unsupported { .. }), "{case}: {err}");
        }
    }
}
