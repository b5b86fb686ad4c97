use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write;
use std::sync::Arc;

use super::convert::cell_to_term;
use super::sparql::BgpConstructQuery;
use crate::ddo::{decode_instance_iri, SchemaManifest, SqlType, SqlValue, TableDef};
use crate::rdf::vocab::{rdf, rdfs};
use crate::rdf::{Graph, Literal, Term};
use crate::rules::values::parse_double;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("empty basic graph pattern")]
    EmptyBgp,
    #[error("predicate <{0}> is not a DDO property")]
    PredicateNotInDdo(String),
    #[error("<{0}> is not a DDO class")]
    UnknownClass(String),
    #[error("class patterns need a constant class, found {0}")]
    VariableClass(String),
    #[error("{node} implies both table {first} and table {second}")]
    DomainConflict {
        node: String,
        first: String,
        second: String,
    },
    #[error("?{0} is used both as a resource and as a literal value")]
    KindConflict(String),
    #[error("the pattern is disconnected; it would need a cross product")]
    DisconnectedBgp,
    #[error("template subject {0} is not bound to a resource")]
    TemplateSubject(String),
}

/// `alias.column` in a plan; aliases index [`SqlPlan::aliases`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub alias: usize,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SqlConst {
    Integer(i64),
    Real(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    NotNull(ColumnRef),
    /// `left = right`; `foreign_key` marks joins along a foreign key.
    Equal {
        left: ColumnRef,
        right: ColumnRef,
        foreign_key: bool,
    },
    EqualConst(ColumnRef, SqlConst),
    InConsts(ColumnRef, Vec<SqlConst>),
}

impl Condition {
    fn link(&self) -> Option<(usize, usize)> {
        match self {
            Condition::Equal { left, right, .. } if left.alias != right.alias => Some((left.alias, right.alias)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alias {
    pub table: String,
    /// Table name or `(backingView)`.
    pub source: String,
}

/// How an output column turns into a term.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputKind {
    /// Key of the named table, minted into an instance IRI.
    Node {
        table: String,
    },
    Value {
        sql_type: SqlType,
        datatype: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub var: Arc<str>,
    pub column: ColumnRef,
    pub kind: OutputKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqlPlan {
    /// Aliases in join order; alias `i` renders as `t{i}`.
    pub aliases: Vec<Alias>,
    /// ON conditions for aliases[1..].
    pub joins: Vec<Vec<Condition>>,
    pub filters: Vec<Condition>,
    pub outputs: Vec<Output>,
    /// Set when the pattern can never match (e.g. a literal of the wrong
    /// datatype); the SQL then carries `0 = 1`.
    pub unsatisfiable: Option<String>,
}

fn quote_ident(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn render_const(c: &SqlConst) -> String {
    match c {
        SqlConst::Integer(i) => i.to_string(),
        SqlConst::Real(r) if r.is_finite() => format!("{r:?}"),
        SqlConst::Real(r) if r.is_nan() => "(0.0/0.0)".into(),
        SqlConst::Real(r) => (if *r > 0.0 { "9e999" } else { "-9e999" }).into(),
        SqlConst::Text(s) => format!("'{}'", s.replace('\'', "''")),
    }
}

fn render_col(c: &ColumnRef) -> String {
    format!("t{}.{}", c.alias, quote_ident(&c.column))
}

fn render_condition(c: &Condition) -> String {
    match c {
        Condition::NotNull(col) => format!("{} IS NOT NULL", render_col(col)),
        Condition::Equal { left, right, .. } => format!("{} = {}", render_col(left), render_col(right)),
        Condition::EqualConst(col, v) => format!("{} = {}", render_col(col), render_const(v)),
        Condition::InConsts(col, vs) => format!(
            "{} IN ({})",
            render_col(col),
            vs.iter().map(render_const).collect::<Vec<_>>().join(", ")
        ),
    }
}

impl SqlPlan {
    pub fn sql(&self) -> String {
        let mut out = String::from("SELECT ");
        if self.outputs.is_empty() {
            out.push('1');
        } else {
            let items: Vec<String> = self
                .outputs
                .iter()
                .enumerate()
                .map(|(i, o)| format!("{} AS c{i}", render_col(&o.column)))
                .collect();
            out.push_str(&items.join(", "));
        }
        let _ = write!(out, " FROM {} AS t0", self.aliases[0].source);
        for (i, conds) in self.joins.iter().enumerate() {
            let on: Vec<String> = conds.iter().map(render_condition).collect();
            let _ = write!(
                out,
                " JOIN {} AS t{} ON {}",
                self.aliases[i + 1].source,
                i + 1,
                on.join(" AND ")
            );
        }
        let mut filters: Vec<String> = self.filters.iter().map(render_condition).collect();
        if self.unsatisfiable.is_some() {
            filters.push("0 = 1".into());
        }
        if !filters.is_empty() {
            let _ = write!(out, " WHERE {}", filters.join(" AND "));
        }
        out
    }

    /// XSD datatype of a value variable, or `None` for resources.
    pub fn datatype(&self, var: &str) -> Option<&str> {
        self.outputs
            .iter()
            .find(|o| &*o.var == var)
            .and_then(|o| match &o.kind {
                OutputKind::Value { datatype, .. } => Some(datatype.as_str()),
                OutputKind::Node { .. } => None,
            })
    }

    /// Join conditions along foreign keys.
    pub fn foreign_key_joins(&self) -> usize {
        self.joins
            .iter()
            .flatten()
            .chain(&self.filters)
            .filter(|c| matches!(c, Condition::Equal { foreign_key: true, left, right } if left.alias != right.alias))
            .count()
    }
}

struct PropertyInfo<'m> {
    table: &'m TableDef,
    column: &'m str,
    sql_type: SqlType,
    target: Option<&'m TableDef>,
}

struct Schema<'m> {
    manifest: &'m SchemaManifest,
    classes: HashMap<String, &'m TableDef>,
    properties: HashMap<String, PropertyInfo<'m>>,
}

impl<'m> Schema<'m> {
    /// Properties come from the DDO's domain/range declarations; the
    /// manifest supplies the column behind each.
    fn new(ddo: &Graph, m: &'m SchemaManifest) -> Self {
        let by_class: HashMap<String, &TableDef> = m.tables.iter().map(|t| (m.class_iri(t), t)).collect();
        let mut classes = HashMap::new();
        let mut domains: HashMap<&str, &str> = HashMap::new();
        let mut ranges: HashMap<&str, &str> = HashMap::new();
        for t in ddo {
            let (Some(s), Some(o)) = (t.subject().as_iri(), t.object().as_iri()) else {
                continue;
            };
            match t.predicate_iri() {
                rdf::TYPE if o == rdfs::CLASS => {
                    if let Some(table) = by_class.get(s) {
                        classes.insert(s.to_string(), *table);
                    }
                }
                rdfs::DOMAIN => {
                    domains.insert(s, o);
                }
                rdfs::RANGE => {
                    ranges.insert(s, o);
                }
                _ => {}
            }
        }
        let mut properties = HashMap::new();
        for (prop, domain) in domains {
            let Some(table) = by_class.get(domain) else { continue };
            let Some(col) = table.data_columns().find(|c| m.property_iri(table, c) == prop) else {
                continue;
            };
            let target = ranges.get(prop).and_then(|r| by_class.get(*r)).copied();
            if target.is_some() != col.foreign_key.is_some() {
                continue;
            }
            properties.insert(
                prop.to_string(),
                PropertyInfo {
                    table,
                    column: &col.name,
                    sql_type: col.sql_type,
                    target,
                },
            );
        }
        Self {
            manifest: m,
            classes,
            properties,
        }
    }
}

/// SQL comparison constant for key text of `table`, if it is canonical.
fn key_const(table: &TableDef, key: &str) -> Option<SqlConst> {
    let pk = table.primary_key_column();
    match pk.sql_type {
        SqlType::Integer | SqlType::BigInt => {
            let i: i64 = key.parse().ok()?;
            (i.to_string() == key).then_some(SqlConst::Integer(i))
        }
        SqlType::Real => {
            let r = parse_double(key)?;
            (format!("{r:?}") == key).then_some(SqlConst::Real(r))
        }
        _ => Some(SqlConst::Text(key.to_string())),
    }
}

/// SQL condition matching cells that convert to exactly `lit`.
fn literal_condition(col: ColumnRef, sql_type: SqlType, lit: &Literal) -> Option<Condition> {
    let c = match sql_type {
        SqlType::Integer | SqlType::BigInt => SqlConst::Integer(lit.lexical().parse().ok()?),
        SqlType::Real => SqlConst::Real(parse_double(lit.lexical())?),
        SqlType::Boolean => {
            let options = match lit.lexical() {
                "true" => vec![
                    SqlConst::Integer(1),
                    SqlConst::Text("1".into()),
                    SqlConst::Text("true".into()),
                ],
                "false" => vec![
                    SqlConst::Integer(0),
                    SqlConst::Text("0".into()),
                    SqlConst::Text("false".into()),
                ],
                _ => return None,
            };
            return Some(Condition::InConsts(col, options));
        }
        SqlType::Text | SqlType::Date | SqlType::Timestamp => SqlConst::Text(lit.lexical().to_string()),
    };
    let rendered = match &c {
        SqlConst::Integer(i) => SqlValue::Integer(*i),
        SqlConst::Real(r) => SqlValue::Real(*r),
        SqlConst::Text(s) => SqlValue::Text(s.clone()),
    };
    // Only canonical lexical forms can come out of the database.
    let canonical = cell_to_term(sql_type, &rendered).ok().flatten()?;
    (canonical.as_literal() == Some(lit)).then_some(Condition::EqualConst(col, c))
}

enum ValueUse {
    Column(ColumnRef, SqlType, String),
}

struct Builder<'a, 'm> {
    schema: &'a Schema<'m>,
    nodes: Vec<(Term, &'m TableDef)>,
    node_index: HashMap<Term, usize>,
    conditions: Vec<Condition>,
    outputs: Vec<Output>,
    unsatisfiable: Option<String>,
}

impl<'a, 'm> Builder<'a, 'm> {
    fn node(&mut self, term: &Term, table: &'m TableDef) -> Result<usize, CompileError> {
        if let Some(&i) = self.node_index.get(term) {
            let existing = self.nodes[i].1;
            if existing.name != table.name {
                return Err(CompileError::DomainConflict {
                    node: term.to_string(),
                    first: existing.name.clone(),
                    second: table.name.clone(),
                });
            }
            return Ok(i);
        }
        let i = self.nodes.len();
        self.nodes.push((term.clone(), table));
        self.node_index.insert(term.clone(), i);
        Ok(i)
    }

    fn unsat(&mut self, reason: String) {
        self.unsatisfiable.get_or_insert(reason);
    }
}

/// Compiles the query's BGP against the manifest, using the DDO for
/// property domains and ranges.
pub fn compile_to_sql(q: &BgpConstructQuery, ddo: &Graph, m: &SchemaManifest) -> Result<SqlPlan, CompileError> {
    let schema = Schema::new(ddo, m);
    compile_with(q, &schema)
}

fn compile_with(q: &BgpConstructQuery, schema: &Schema) -> Result<SqlPlan, CompileError> {
    let patterns = q.bgp.triples();
    if patterns.is_empty() {
        return Err(CompileError::EmptyBgp);
    }
    let mut b = Builder {
        schema,
        nodes: Vec::new(),
        node_index: HashMap::new(),
        conditions: Vec::new(),
        outputs: Vec::new(),
        unsatisfiable: None,
    };

    // Pass 1: subject nodes in first-mention order, with their tables.
    for t in patterns {
        let p = t.predicate_iri();
        let table = if p == rdf::TYPE {
            match t.object() {
                Term::Iri(class) => *b
                    .schema
                    .classes
                    .get(&**class)
                    .ok_or_else(|| CompileError::UnknownClass(class.to_string()))?,
                other => return Err(CompileError::VariableClass(other.to_string())),
            }
        } else {
            b.schema
                .properties
                .get(p)
                .ok_or_else(|| CompileError::PredicateNotInDdo(p.to_string()))?
                .table
        };
        b.node(t.subject(), table)?;
    }
    let subject_count = b.nodes.len();

    // Resource-valued objects: foreign-key targets.
    let mut fk_objects: BTreeMap<usize, Vec<(usize, &PropertyInfo)>> = BTreeMap::new();
    let mut values: HashMap<Arc<str>, ValueUse> = HashMap::new();
    let mut value_order: Vec<Arc<str>> = Vec::new();

    for t in patterns {
        let p = t.predicate_iri();
        if p == rdf::TYPE {
            continue;
        }
        let s = b.node_index[t.subject()];
        let info = &b.schema.properties[p];
        let col = ColumnRef {
            alias: s,
            column: info.column.to_string(),
        };
        match (info.target, t.object()) {
            (Some(target), o @ (Term::Variable(_) | Term::Iri(_))) => {
                if let Term::Variable(v) = o {
                    if values.contains_key(v) {
                        return Err(CompileError::KindConflict(v.to_string()));
                    }
                }
                if let Term::Iri(iri) = o {
                    if !b.node_index.contains_key(o) {
                        match decode_instance_iri(b.schema.manifest, iri) {
                            Some((table, _)) if table.name == target.name => {}
                            _ => {
                                b.unsat(format!("{o} is not an instance of {}", target.name));
                                continue;
                            }
                        }
                    }
                }
                let o_idx = b.node(o, target)?;
                fk_objects.entry(o_idx).or_default().push((s, info));
                b.conditions.push(Condition::NotNull(col));
            }
            (Some(_), other) => b.unsat(format!("{other} cannot be a resource")),
            (None, Term::Variable(v)) => {
                if b.node_index.contains_key(t.object()) {
                    return Err(CompileError::KindConflict(v.to_string()));
                }
                let datatype = crate::ddo::map_column_datatype(info.sql_type).to_string();
                b.conditions.push(Condition::NotNull(col.clone()));
                match values.get(v) {
                    Some(ValueUse::Column(first, _, first_dt)) => {
                        if *first_dt == datatype {
                            b.conditions.push(Condition::Equal {
                                left: first.clone(),
                                right: col,
                                foreign_key: false,
                            });
                        } else {
                            b.unsat(format!("?{v} cannot be both {first_dt} and {datatype}"));
                        }
                    }
                    None => {
                        values.insert(v.clone(), ValueUse::Column(col, info.sql_type, datatype));
                        value_order.push(v.clone());
                    }
                }
            }
            (None, Term::Literal(lit)) => match literal_condition(col, info.sql_type, lit) {
                Some(c) => b.conditions.push(c),
                None => b.unsat(format!("{lit:?} never occurs in {}", info.column)),
            },
            (None, other) => b.unsat(format!("{other} is not a literal")),
        }
    }

    // Aliases exist for subject nodes only; objects that are never
    // subjects are read from the referencing column.
    let mut node_outputs: HashMap<usize, ColumnRef> = HashMap::new();
    for i in 0..subject_count {
        let (term, table) = b.nodes[i].clone();
        let pk = ColumnRef {
            alias: i,
            column: table.primary_key.clone(),
        };
        b.conditions.push(Condition::NotNull(pk.clone()));
        if let Term::Iri(iri) = &term {
            match decode_instance_iri(b.schema.manifest, iri) {
                Some((t, key)) if t.name == table.name => match key_const(table, &key) {
                    Some(c) => b.conditions.push(Condition::EqualConst(pk.clone(), c)),
                    None => b.unsat(format!("{term} has a non-canonical key")),
                },
                _ => b.unsat(format!("{term} is not an instance of {}", table.name)),
            }
        }
        node_outputs.insert(i, pk);
    }
    for (&o_idx, refs) in &fk_objects {
        let (term, target) = b.nodes[o_idx].clone();
        let fk_col = |(s, info): &(usize, &PropertyInfo)| ColumnRef {
            alias: *s,
            column: info.column.to_string(),
        };
        if o_idx < subject_count {
            let pk = node_outputs[&o_idx].clone();
            for r in refs {
                b.conditions.push(Condition::Equal {
                    left: fk_col(r),
                    right: pk.clone(),
                    foreign_key: true,
                });
            }
            continue;
        }
        let first = fk_col(&refs[0]);
        for r in &refs[1..] {
            b.conditions.push(Condition::Equal {
                left: first.clone(),
                right: fk_col(r),
                foreign_key: false,
            });
        }
        if let Term::Iri(iri) = &term {
            let (_, key) = decode_instance_iri(b.schema.manifest, iri).expect("checked above");
            match key_const(target, &key) {
                Some(c) => b.conditions.push(Condition::EqualConst(first.clone(), c)),
                None => b.unsat(format!("{term} has a non-canonical key")),
            }
        }
        node_outputs.insert(o_idx, first);
    }

    // Outputs: node variables, then value variables, in first-mention order.
    for (i, (term, table)) in b.nodes.clone().iter().enumerate() {
        if let Term::Variable(v) = term {
            b.outputs.push(Output {
                var: v.clone(),
                column: node_outputs[&i].clone(),
                kind: OutputKind::Node {
                    table: table.name.clone(),
                },
            });
        }
    }
    for v in &value_order {
        let ValueUse::Column(col, sql_type, datatype) = &values[v];
        b.outputs.push(Output {
            var: v.clone(),
            column: col.clone(),
            kind: OutputKind::Value {
                sql_type: *sql_type,
                datatype: datatype.clone(),
            },
        });
    }
    let order: Vec<Arc<str>> = q.bgp.variables();
    b.outputs.sort_by_key(|o| order.iter().position(|v| *v == o.var));

    for t in q.template.triples() {
        let s = t.subject();
        let ok = match s {
            Term::Iri(_) => true,
            Term::Variable(_) => b.node_index.contains_key(s),
            _ => false,
        };
        if !ok {
            return Err(CompileError::TemplateSubject(s.to_string()));
        }
    }

    let (aliases, joins, filters) = plan_joins(&b, subject_count)?;
    let mut outputs = b.outputs;
    for o in &mut outputs {
        o.column.alias = aliases.1[o.column.alias];
    }
    Ok(SqlPlan {
        aliases: aliases.0,
        joins,
        filters,
        outputs,
        unsatisfiable: b.unsatisfiable,
    })
}

type AliasOrder = (Vec<Alias>, Vec<usize>);

/// Breadth-first join order from the first alias; conditions linking a
/// newly joined alias to earlier ones become its ON clause.
/// Alias order, ON conditions per joined alias, and WHERE filters.
type JoinLayout = (AliasOrder, Vec<Vec<Condition>>, Vec<Condition>);

fn plan_joins(b: &Builder, n: usize) -> Result<JoinLayout, CompileError> {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in &b.conditions {
        if let Some((x, y)) = c.link() {
            adjacency[x].push(y);
            adjacency[y].push(x);
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(x) = queue.pop_front() {
        order.push(x);
        for &y in &adjacency[x] {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    if order.len() != n {
        return Err(CompileError::DisconnectedBgp);
    }
    let mut rank = vec![0; n];
    for (r, &x) in order.iter().enumerate() {
        rank[x] = r;
    }
    let remap = |c: &Condition| -> Condition {
        let fix = |col: &ColumnRef| ColumnRef {
            alias: rank[col.alias],
            column: col.column.clone(),
        };
        match c {
            Condition::NotNull(col) => Condition::NotNull(fix(col)),
            Condition::Equal {
                left,
                right,
                foreign_key,
            } => Condition::Equal {
                left: fix(left),
                right: fix(right),
                foreign_key: *foreign_key,
            },
            Condition::EqualConst(col, v) => Condition::EqualConst(fix(col), v.clone()),
            Condition::InConsts(col, vs) => Condition::InConsts(fix(col), vs.clone()),
        }
    };
    let mut joins: Vec<Vec<Condition>> = vec![Vec::new(); n.saturating_sub(1)];
    let mut filters = Vec::new();
    for c in &b.conditions {
        let c = remap(c);
        // Repeated patterns repeat their conditions; emit each once.
        let slot = match c.link() {
            Some((x, y)) => &mut joins[x.max(y) - 1],
            None => &mut filters,
        };
        if !slot.contains(&c) {
            slot.push(c);
        }
    }
    let aliases = order
        .iter()
        .map(|&x| {
            let table = b.nodes[x].1;
            Alias {
                table: table.name.clone(),
                source: match &table.backing_view {
                    Some(view) => format!("({view})"),
                    None => quote_ident(&table.name),
                },
            }
        })
        .collect();
    Ok(((aliases, rank), joins, filters))
}
