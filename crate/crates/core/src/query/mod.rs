//! Counting queries against a summary.
//!
//! A conjunctive range predicate is answered by zeroing every 1D variable
//! whose value fails it and evaluating `P` again: the answer is
//! `n · P[zeroed] / P`. Multi-dimensional variables are never zeroed.

mod parse;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse, Condition, Literal, ParseError, QueryAst, SortOrder};

use crate::exec::Execution;
use crate::polynomial::{Assignment, PolyError};
use crate::predicate::{Interval, RangePredicate};
use crate::schema::{AttributeKind, Schema};
use crate::summary::Summary;

/// Group-by plans enumerating more groups than this are refused.
pub const MAX_GROUPS: u128 = 100_000;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{attr}` has no value `{value}`")]
    UnknownValue { attr: String, value: String },
    #[error("range on `{attr}` is empty ({lo} > {hi})")]
    EmptyRange { attr: String, lo: String, hi: String },
    #[error("attribute `{0}` is grouped twice")]
    DuplicateGroup(String),
    #[error("plan enumerates {groups} groups, above the limit of {max}")]
    PlanTooLarge { groups: u128, max: u128 },
    #[error("plan has {got} attributes, summary has {expected}")]
    Arity { got: usize, expected: usize },
    #[error(transparent)]
    Polynomial(#[from] PolyError),
}

impl QueryError {
    /// Whether the error comes from the query text rather than the engine.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, QueryError::Polynomial(_) | QueryError::PlanTooLarge { .. })
    }
}

/// The condition on one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrFilter {
    Any,
    Range(Interval),
    /// contradictory conditions: no tuple qualifies
    Nothing,
}

impl AttrFilter {
    fn and(self, r: Interval) -> AttrFilter {
        match self {
            AttrFilter::Any => AttrFilter::Range(r),
            AttrFilter::Range(cur) => cur.intersect(&r).map_or(AttrFilter::Nothing, AttrFilter::Range),
            AttrFilter::Nothing => AttrFilter::Nothing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub filters: Vec<AttrFilter>,
    pub group_by: Vec<usize>,
    pub order: Option<SortOrder>,
    pub limit: Option<usize>,
}

impl QueryPlan {
    /// `COUNT(*)` with no conditions.
    pub fn all(m: usize) -> Self {
        QueryPlan {
            filters: vec![AttrFilter::Any; m],
            group_by: Vec::new(),
            order: None,
            limit: None,
        }
    }

    pub fn from_predicate(pred: &RangePredicate) -> Self {
        QueryPlan {
            filters: pred
                .0
                .iter()
                .map(|r| r.map_or(AttrFilter::Any, AttrFilter::Range))
                .collect(),
            ..QueryPlan::all(0)
        }
    }

    pub fn grouped(mut self, attrs: Vec<usize>) -> Self {
        self.group_by = attrs;
        self
    }

    /// Number of groups the plan enumerates.
    pub fn group_count(&self, sizes: &[usize]) -> u128 {
        self.group_by
            .iter()
            .map(|&a| match self.filters[a] {
                AttrFilter::Any => sizes[a] as u128,
                AttrFilter::Range(r) => r.width() as u128,
                AttrFilter::Nothing => 0,
            })
            .product()
    }

    /// Renders the plan back to query text over `schema`.
    pub fn to_sql(&self, schema: &Schema, table: &str) -> String {
        let names: Vec<String> = self.group_by.iter().map(|&a| quote_name(&schema.attributes[a].name)).collect();
        let mut sql = String::from("SELECT ");
        for n in &names {
            sql.push_str(n);
            sql.push_str(", ");
        }
        sql.push_str("COUNT(*) AS cnt FROM ");
        sql.push_str(&quote_name(table));
        let mut conds = Vec::new();
        for (a, f) in self.filters.iter().enumerate() {
            let name = quote_name(&schema.attributes[a].name);
            match f {
                AttrFilter::Any => {}
                AttrFilter::Range(r) if r.is_point() => {
                    conds.push(format!("{name} = {}", literal_for(schema, a, r.lo)));
                }
                AttrFilter::Range(r) => conds.push(format!(
                    "{name} IN [{}, {}]",
                    literal_for(schema, a, r.lo),
                    literal_for(schema, a, r.hi)
                )),
                AttrFilter::Nothing => {
                    // an impossible pair of points
                    conds.push(format!("{name} = {}", literal_for(schema, a, 0)));
                    let other = if schema.attributes[a].size() > 1 { 1 } else { 0 };
                    conds.push(format!("{name} = {}", literal_for(schema, a, other)));
                }
            }
        }
        if !conds.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&conds.join(" AND "));
        }
        if !names.is_empty() {
            sql.push_str(" GROUP BY ");
            sql.push_str(&names.join(", "));
        }
        if let Some(order) = self.order {
            sql.push_str(match order {
                SortOrder::Desc => " ORDER BY cnt DESC",
                SortOrder::Asc => " ORDER BY cnt ASC",
            });
        }
        if let Some(k) = self.limit {
            sql.push_str(&format!(" LIMIT {k}"));
        }
        sql
    }
}

fn quote_name(name: &str) -> String {
    let plain = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_')
        && !matches!(
            name.to_ascii_uppercase().as_str(),
            "SELECT" | "FROM" | "WHERE" | "AND" | "OR" | "NOT" | "IN" | "GROUP" | "BY" | "ORDER" | "LIMIT" | "AS" | "DESC" | "ASC"
        );
    if plain {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

/// A literal that resolves to bucket `index` of attribute `attr`.
fn literal_for(schema: &Schema, attr: usize, index: usize) -> String {
    match &schema.attributes[attr].kind {
        AttributeKind::Categorical { values } => format!("'{}'", values[index].replace('\'', "''")),
        AttributeKind::Numeric { lo, hi, buckets } => {
            let width = (hi - lo) / *buckets as f64;
            // bucket midpoint lands inside the bucket
            format!("{}", lo + width * (index as f64 + 0.5))
        }
    }
}

fn resolve_literal(schema: &Schema, attr: usize, lit: &Literal) -> Result<usize, QueryError> {
    let domain = &schema.attributes[attr];
    let unknown = || QueryError::UnknownValue {
        attr: domain.name.clone(),
        value: lit.text().to_string(),
    };
    match &domain.kind {
        AttributeKind::Categorical { values } => {
            if let Some(i) = values.iter().position(|v| v == lit.text()) {
                return Ok(i);
            }
            // unquoted integers fall back to bucket indices
            match lit {
                Literal::Bare(s) => match s.parse::<usize>() {
                    Ok(i) if i < values.len() => Ok(i),
                    _ => Err(unknown()),
                },
                Literal::Str(_) => Err(unknown()),
            }
        }
        AttributeKind::Numeric { .. } => {
            let x: f64 = lit.text().trim().parse().map_err(|_| unknown())?;
            domain.bucketize_f64(x).map(|b| b.index).map_err(|_| unknown())
        }
    }
}

/// Resolves a syntax tree against a schema.
pub fn plan(schema: &Schema, ast: &QueryAst) -> Result<QueryPlan, QueryError> {
    let m = schema.arity();
    let attr = |name: &str| schema.index_of(name).map_err(|_| QueryError::UnknownAttribute(name.to_string()));
    let mut filters = vec![AttrFilter::Any; m];
    for cond in &ast.conditions {
        match cond {
            Condition::Eq { attr: name, value } => {
                let a = attr(name)?;
                let v = resolve_literal(schema, a, value)?;
                filters[a] = filters[a].and(Interval::point(v));
            }
            Condition::Range { attr: name, lo, hi } => {
                let a = attr(name)?;
                let (l, h) = (resolve_literal(schema, a, lo)?, resolve_literal(schema, a, hi)?);
                if l > h {
                    return Err(QueryError::EmptyRange {
                        attr: schema.attributes[a].name.clone(),
                        lo: lo.to_string(),
                        hi: hi.to_string(),
                    });
                }
                filters[a] = filters[a].and(Interval::new(l, h));
            }
        }
    }
    let mut group_by = Vec::new();
    for name in &ast.group_by {
        let a = attr(name)?;
        if group_by.contains(&a) {
            return Err(QueryError::DuplicateGroup(name.clone()));
        }
        group_by.push(a);
    }
    Ok(QueryPlan {
        filters,
        group_by,
        order: ast.order,
        limit: ast.limit,
    })
}

/// Parses and resolves query text.
pub fn parse_query(sql: &str, schema: &Schema) -> Result<QueryPlan, QueryError> {
    plan(schema, &parse(sql)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    /// labels of the grouped values
    pub values: Vec<String>,
    /// bucket indices of the grouped values
    pub indices: Vec<usize>,
    pub raw: f64,
    pub rounded: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAnswer {
    pub columns: Vec<String>,
    pub groups: Vec<GroupRow>,
    pub wall_ms: f64,
}

/// Nearest integer, halves away from zero, never negative.
pub fn round_estimate(raw: f64) -> u64 {
    let r = raw.round();
    if r > 0.0 {
        r as u64
    } else {
        0
    }
}

/// Expected count of tuples satisfying `pred`.
pub fn estimate(summary: &Summary, pred: &RangePredicate) -> Result<f64, QueryError> {
    let filters: Vec<AttrFilter> = pred.0.iter().map(|r| r.map_or(AttrFilter::Any, AttrFilter::Range)).collect();
    estimate_filters(summary, &filters)
}

fn estimate_filters(summary: &Summary, filters: &[AttrFilter]) -> Result<f64, QueryError> {
    let poly = summary.polynomial();
    if filters.len() != poly.sizes().len() {
        return Err(QueryError::Arity {
            got: filters.len(),
            expected: poly.sizes().len(),
        });
    }
    if filters.contains(&AttrFilter::Nothing) {
        return Ok(0.0);
    }
    if filters.iter().all(|f| *f == AttrFilter::Any) {
        return Ok(summary.n() as f64);
    }
    let mut assign = Assignment::new(summary.values());
    for (a, f) in filters.iter().enumerate() {
        if let AttrFilter::Range(r) = f {
            poly.zero_outside(&mut assign, a, *r);
        }
    }
    let pq = poly.evaluate_value(&assign)?;
    Ok(summary.n() as f64 * pq.ratio(summary.p()))
}

/// Answers a plan; one evaluation per group.
pub fn answer(summary: &Summary, plan: &QueryPlan) -> Result<QueryAnswer, QueryError> {
    answer_with(summary, plan, Execution::default())
}

pub fn answer_with(summary: &Summary, plan: &QueryPlan, exec: Execution) -> Result<QueryAnswer, QueryError> {
    let start = Instant::now();
    let schema = summary.schema();
    let sizes = schema.sizes();
    if plan.filters.len() != sizes.len() {
        return Err(QueryError::Arity {
            got: plan.filters.len(),
            expected: sizes.len(),
        });
    }
    let groups = plan.group_count(&sizes);
    if groups > MAX_GROUPS {
        return Err(QueryError::PlanTooLarge {
            groups,
            max: MAX_GROUPS,
        });
    }
    let axes: Vec<Interval> = plan
        .group_by
        .iter()
        .map(|&a| match plan.filters[a] {
            AttrFilter::Range(r) => r,
            _ => Interval::new(0, sizes[a] - 1),
        })
        .collect();
    let mut cells: Vec<Vec<usize>> = Vec::with_capacity(groups as usize);
    if groups > 0 {
        let mut cur: Vec<usize> = axes.iter().map(|r| r.lo).collect();
        'outer: loop {
            cells.push(cur.clone());
            let mut k = axes.len();
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                if cur[k] < axes[k].hi {
                    cur[k] += 1;
                    break;
                }
                cur[k] = axes[k].lo;
            }
        }
    }
    let raws = exec.map_min(&cells, 2, |cell| {
        let mut filters = plan.filters.clone();
        for (&a, &v) in plan.group_by.iter().zip(cell) {
            filters[a] = AttrFilter::Range(Interval::point(v));
        }
        estimate_filters(summary, &filters)
    });
    let mut rows = Vec::with_capacity(cells.len());
    for (cell, raw) in cells.into_iter().zip(raws) {
        let raw = raw?;
        rows.push(GroupRow {
            values: plan
                .group_by
                .iter()
                .zip(&cell)
                .map(|(&a, &v)| schema.attributes[a].label(v))
                .collect(),
            indices: cell,
            raw,
            rounded: round_estimate(raw),
        });
    }
    match plan.order {
        Some(SortOrder::Desc) => rows.sort_by(|x, y| y.raw.total_cmp(&x.raw)),
        Some(SortOrder::Asc) => rows.sort_by(|x, y| x.raw.total_cmp(&y.raw)),
        None => {}
    }
    if let Some(k) = plan.limit {
        rows.truncate(k);
    }
    Ok(QueryAnswer {
        columns: plan.group_by.iter().map(|&a| schema.attributes[a].name.clone()).collect(),
        groups: rows,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Parses, plans and answers query text.
pub fn run_sql(summary: &Summary, sql: &str) -> Result<QueryAnswer, QueryError> {
    let plan = parse_query(sql, summary.schema())?;
    answer(summary, &plan)
}
