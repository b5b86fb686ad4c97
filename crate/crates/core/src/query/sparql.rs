//! The SPARQL subset for DDO queries: `PREFIX`/`BASE` declarations and one
//! basic graph pattern under `CONSTRUCT` or `SELECT`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::rdf::lexer::{tokenize, Pos, Tok, Token};
use crate::rdf::vocab::{rdf, xsd};
use crate::rdf::{Formula, Term, Triple};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unsupported SPARQL feature: {feature}")]
    Unsupported { pos: Pos, feature: String },
    #[error("{pos}: unresolvable prefix '{prefix}:'")]
    UnknownPrefix { pos: Pos, prefix: String },
    #[error("template variable ?{0} does not occur in the WHERE pattern")]
    UnboundTemplateVariable(String),
}

/// A BGP query. `select` is `Some` for SELECT queries, whose template is
/// empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BgpConstructQuery {
    pub template: Formula,
    pub bgp: Formula,
    pub prefixes: BTreeMap<String, String>,
    pub select: Option<Vec<Arc<str>>>,
}

impl BgpConstructQuery {
    pub fn variables(&self) -> Vec<Arc<str>> {
        self.bgp.variables()
    }
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "OPTIONAL", "FILTER", "UNION", "MINUS", "GRAPH", "BIND", "VALUES", "SERVICE", "ORDER", "GROUP", "HAVING", "LIMIT",
    "OFFSET", "ASK", "DESCRIBE", "FROM", "NOT", "EXISTS",
];

pub fn parse_query(text: &str) -> Result<BgpConstructQuery, QueryParseError> {
    let tokens = tokenize(text).map_err(|e| {
        // Constructs such as FILTER expressions do not even lex; name the
        // feature rather than the stray character.
        let feature = text
            .split(|c: char| !c.is_ascii_alphanumeric())
            .map(|w| w.to_ascii_uppercase())
            .find(|w| UNSUPPORTED_KEYWORDS.contains(&w.as_str()));
        match feature {
            Some(feature) => QueryParseError::Unsupported { pos: e.pos, feature },
            None => QueryParseError::Syntax {
                pos: e.pos,
                message: e.message,
            },
        }
    })?;
    let mut p = Parser {
        tokens,
        idx: 0,
        prefixes: BTreeMap::new(),
        base: None,
    };
    p.query()
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    prefixes: BTreeMap<String, String>,
    base: Option<String>,
}

fn keyword(tok: &Tok) -> Option<String> {
    match tok {
        Tok::Word(w) => Some(w.to_ascii_uppercase()),
        _ => None,
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

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, QueryParseError> {
        Err(QueryParseError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn unsupported<T>(&self, feature: impl Into<String>) -> Result<T, QueryParseError> {
        Err(QueryParseError::Unsupported {
            pos: self.pos(),
            feature: feature.into(),
        })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        keyword(self.peek()).as_deref() == Some(kw)
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.syntax(format!("expected '{tok}', found {}", self.peek()))
        }
    }

    fn check_unsupported_keyword(&self) -> Result<(), QueryParseError> {
        if let Some(kw) = keyword(self.peek()) {
            if UNSUPPORTED_KEYWORDS.contains(&kw.as_str()) {
                return self.unsupported(kw);
            }
        }
        Ok(())
    }

    fn iri_ref(&mut self) -> Result<String, QueryParseError> {
        let pos = self.pos();
        match self.next().tok {
            Tok::IriRef(iri) => {
                if url::Url::parse(&iri).is_ok() {
                    Ok(iri)
                } else if let Some(base) = &self.base {
                    url::Url::parse(base)
                        .and_then(|b| b.join(&iri))
                        .map(|u| u.to_string())
                        .map_err(|_| QueryParseError::Syntax {
                            pos,
                            message: format!("cannot resolve <{iri}>"),
                        })
                } else {
                    Err(QueryParseError::Syntax {
                        pos,
                        message: format!("relative IRI <{iri}> with no BASE"),
                    })
                }
            }
            other => Err(QueryParseError::Syntax {
                pos,
                message: format!("expected an IRI, found {other}"),
            }),
        }
    }

    fn query(&mut self) -> Result<BgpConstructQuery, QueryParseError> {
        loop {
            if self.is_keyword("PREFIX") {
                self.next();
                let prefix = match self.next().tok {
                    Tok::PName { prefix, local } if local.is_empty() => prefix,
                    other => return self.syntax(format!("expected 'prefix:', found {other}")),
                };
                let iri = self.iri_ref()?;
                self.prefixes.insert(prefix, iri);
            } else if self.is_keyword("BASE") {
                self.next();
                self.base = Some(self.iri_ref()?);
            } else if matches!(self.peek(), Tok::At(_)) {
                return self.unsupported("N3-style @prefix directives");
            } else {
                break;
            }
        }

        let (template, select) = if self.is_keyword("CONSTRUCT") {
            self.next();
            self.expect(Tok::LBrace)?;
            let template = self.triples(true)?;
            self.expect(Tok::RBrace)?;
            (template, None)
        } else if self.is_keyword("SELECT") {
            self.next();
            if self.is_keyword("DISTINCT") || self.is_keyword("REDUCED") {
                self.next();
            }
            let mut vars = Vec::new();
            if *self.peek() == Tok::Star {
                self.next();
            } else {
                while let Tok::Var(v) = self.peek().clone() {
                    self.next();
                    vars.push(Arc::<str>::from(v));
                }
                if *self.peek() == Tok::LParen {
                    return self.unsupported("SELECT expressions");
                }
                if vars.is_empty() {
                    return self.syntax("expected '*' or variables after SELECT");
                }
            }
            (Vec::new(), Some(vars))
        } else {
            self.check_unsupported_keyword()?;
            return self.syntax(format!("expected CONSTRUCT or SELECT, found {}", self.peek()));
        };

        if self.is_keyword("WHERE") {
            self.next();
        }
        self.check_unsupported_keyword()?;
        self.expect(Tok::LBrace)?;
        let bgp = self.triples(false)?;
        self.expect(Tok::RBrace)?;
        self.check_unsupported_keyword()?;
        if *self.peek() != Tok::Eof {
            return self.syntax(format!("unexpected {} after the WHERE clause", self.peek()));
        }

        let bgp = Formula::new(bgp);
        let bound: BTreeSet<Arc<str>> = bgp.variables().into_iter().collect();
        let template = Formula::new(template);
        for v in template.variables() {
            if !bound.contains(&v) {
                return Err(QueryParseError::UnboundTemplateVariable(v.to_string()));
            }
        }
        let select = match select {
            Some(vars) if vars.is_empty() => Some(bgp.variables()),
            Some(vars) => {
                if let Some(v) = vars.iter().find(|v| !bound.contains(*v)) {
                    return Err(QueryParseError::UnboundTemplateVariable(v.to_string()));
                }
                Some(vars)
            }
            None => None,
        };
        Ok(BgpConstructQuery {
            template,
            bgp,
            prefixes: self.prefixes.clone(),
            select,
        })
    }

    fn triples(&mut self, template: bool) -> Result<Vec<Triple>, QueryParseError> {
        let mut out = Vec::new();
        loop {
            if *self.peek() == Tok::RBrace {
                return Ok(out);
            }
            self.check_unsupported_keyword()?;
            if *self.peek() == Tok::LBrace {
                return self.unsupported("nested group patterns");
            }
            let subject = self.term(template)?;
            self.predicate_objects(subject, template, &mut out)?;
            match self.peek() {
                Tok::Dot => {
                    self.next();
                }
                Tok::RBrace => return Ok(out),
                _ => {
                    self.check_unsupported_keyword()?;
                    return self.syntax(format!("expected '.' or '}}', found {}", self.peek()));
                }
            }
        }
    }

    fn predicate_objects(
        &mut self,
        subject: Term,
        template: bool,
        out: &mut Vec<Triple>,
    ) -> Result<(), QueryParseError> {
        loop {
            let pos = self.pos();
            let predicate = match self.next().tok {
                Tok::Word(w) if w == "a" => Term::iri(rdf::TYPE),
                Tok::Var(_) => {
                    return Err(QueryParseError::Unsupported {
                        pos,
                        feature: "unbound predicate".into(),
                    })
                }
                Tok::IriRef(_) => {
                    self.idx -= 1;
                    Term::iri(self.iri_ref()?)
                }
                Tok::PName { prefix, local } => self.pname(&prefix, &local, pos)?,
                Tok::Caret | Tok::Bang | Tok::LParen => {
                    return Err(QueryParseError::Unsupported {
                        pos,
                        feature: "property paths".into(),
                    })
                }
                other => {
                    return Err(QueryParseError::Syntax {
                        pos,
                        message: format!("expected a predicate, found {other}"),
                    })
                }
            };
            if matches!(
                self.peek(),
                Tok::Slash | Tok::Pipe | Tok::Star | Tok::Plus | Tok::Question | Tok::Caret
            ) {
                return self.unsupported("property paths");
            }
            loop {
                let object = self.term(template)?;
                let triple =
                    Triple::new(subject.clone(), predicate.clone(), object).map_err(|e| QueryParseError::Syntax {
                        pos,
                        message: e.to_string(),
                    })?;
                out.push(triple);
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
            if matches!(self.peek(), Tok::Dot | Tok::RBrace) {
                return Ok(());
            }
        }
    }

    fn pname(&self, prefix: &str, local: &str, pos: Pos) -> Result<Term, QueryParseError> {
        self.prefixes
            .get(prefix)
            .map(|ns| Term::iri(format!("{ns}{local}")))
            .ok_or_else(|| QueryParseError::UnknownPrefix {
                pos,
                prefix: prefix.to_string(),
            })
    }

    fn term(&mut self, _template: bool) -> Result<Term, QueryParseError> {
        let pos = self.pos();
        match self.next().tok {
            Tok::Var(v) => Ok(Term::var(v)),
            Tok::IriRef(_) => {
                self.idx -= 1;
                Ok(Term::iri(self.iri_ref()?))
            }
            Tok::PName { prefix, local } => self.pname(&prefix, &local, pos),
            Tok::Str(lexical) => match self.peek().clone() {
                Tok::Caret2 => {
                    self.next();
                    let dt_pos = self.pos();
                    match self.next().tok {
                        Tok::IriRef(_) => {
                            self.idx -= 1;
                            Ok(Term::literal(lexical, self.iri_ref()?))
                        }
                        Tok::PName { prefix, local } => match self.pname(&prefix, &local, dt_pos)? {
                            Term::Iri(dt) => Ok(Term::literal(lexical, dt)),
                            _ => unreachable!(),
                        },
                        other => Err(QueryParseError::Syntax {
                            pos: dt_pos,
                            message: format!("expected a datatype IRI, found {other}"),
                        }),
                    }
                }
                Tok::At(_) => self.unsupported("language-tagged literals"),
                _ => Ok(Term::string(lexical)),
            },
            Tok::Integer(n) => Ok(Term::literal(n, xsd::INTEGER)),
            Tok::Decimal(n) => Ok(Term::literal(n, xsd::DECIMAL)),
            Tok::Double(n) => Ok(Term::literal(n, xsd::DOUBLE)),
            Tok::Word(w) if w == "true" || w == "false" => Ok(Term::literal(w, xsd::BOOLEAN)),
            Tok::Blank(_) | Tok::LBracket => Err(QueryParseError::Unsupported {
                pos,
                feature: "blank nodes".into(),
            }),
            Tok::LParen => Err(QueryParseError::Unsupported {
                pos,
                feature: "collections".into(),
            }),
            other => {
                if let Some(kw) = keyword(&other) {
                    if UNSUPPORTED_KEYWORDS.contains(&kw.as_str()) {
                        return Err(QueryParseError::Unsupported { pos, feature: kw });
                    }
                }
                Err(QueryParseError::Syntax {
                    pos,
                    message: format!("expected a term, found {other}"),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FORM_WEIGHT: &str = include_str!("../../assets/queries/form_weight.rq");

    #[test]
    fn form_weight_query_shape() {
        let q = parse_query(FORM_WEIGHT).unwrap();
        assert_eq!(q.bgp.len(), 7);
        assert_eq!(q.template.len(), 7);
        assert!(q.select.is_none());
    }

    #[test]
    fn unsupported_features_are_named() {
        let cases = [
            ("CONSTRUCT {?s ?p ?o} WHERE {?s ?p ?o}", "unbound predicate"),
            (
                "PREFIX e: <http://e/#> SELECT ?s WHERE {?s e:p ?o OPTIONAL {?s e:q ?x}}",
                "OPTIONAL",
            ),
            (
                "PREFIX e: <http://e/#> SELECT ?s WHERE {?s e:p ?o FILTER(?o > 3)}",
                "FILTER",
            ),
            (
                "PREFIX e: <http://e/#> SELECT ?s WHERE {{?s e:p ?o} UNION {?s e:q ?o}}",
                "nested group patterns",
            ),
            (
                "PREFIX e: <http://e/#> SELECT ?s WHERE {?s e:p/e:q ?o}",
                "property paths",
            ),
            ("PREFIX e: <http://e/#> SELECT ?s WHERE {?s e:p+ ?o}", "property paths"),
            (
                "PREFIX e: <http://e/#> SELECT ?s WHERE {?s e:p [ e:q ?o ]}",
                "blank nodes",
            ),
        ];
        for (text, feature) in cases {
            match parse_query(text) {
                Err(QueryParseError::Unsupported { feature: f, .. }) => assert_eq!(f, feature, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn template_variables_must_be_bound() {
        let err = parse_query("PREFIX e: <http://e/#> CONSTRUCT {?s e:p ?z} WHERE {?s e:p ?o}").unwrap_err();
        assert_eq!(err, QueryParseError::UnboundTemplateVariable("z".into()));
    }

    #[test]
    fn select_star_lists_all_variables() {
        let q = parse_query("PREFIX e: <http://e/#> SELECT * WHERE {?s e:p ?o; a e:C}").unwrap();
        assert_eq!(q.select.unwrap(), vec![Arc::<str>::from("s"), Arc::from("o")]);
        assert_eq!(q.bgp.len(), 2);
    }
}
