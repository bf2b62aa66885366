//! Recursive-descent parser for the supported select-project-join subset,
//! followed by name resolution against the star schema.
//!
//! ```text
//! query      := SELECT [DISTINCT] items FROM tables [WHERE conj] [GROUP BY cols]
//!               [ORDER BY <ignored>] [;]
//! items      := '*' | item (',' item)*
//! item       := agg '(' [DISTINCT] (col | '*') ')' [[AS] alias] | col [[AS] alias]
//! tables     := table (',' table | [INNER] JOIN table ON conj)*
//! conj       := pred (AND pred)*
//! pred       := '(' conj ')' | operand '=' operand | col IN '(' lit (',' lit)* ')'
//!             | col BETWEEN lit AND lit
//! ```

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Spanned, Token};
use super::{Aggregate, AnalyticalQuery, Measure, ParseError, PredicateKind, RestrictionPredicate};
use crate::schema::{AttrRef, StarSchema};

#[derive(Debug, Clone)]
struct RawColumn {
    qualifier: Option<String>,
    name: String,
    offset: usize,
}

#[derive(Debug)]
enum SelectItem {
    Star,
    Column(RawColumn),
    Aggregate(Aggregate, Option<RawColumn>),
}

#[derive(Debug)]
struct TableRef {
    name: String,
    alias: Option<String>,
    offset: usize,
}

#[derive(Debug)]
enum Operand {
    Column(RawColumn),
    Literal(usize),
}

#[derive(Debug)]
enum RawPredicate {
    Eq(Operand, Operand),
    In(RawColumn, Vec<String>),
    Between(RawColumn),
}

#[derive(Debug, Default)]
struct RawSelect {
    items: Vec<SelectItem>,
    tables: Vec<TableRef>,
    predicates: Vec<RawPredicate>,
    group_by: Vec<RawColumn>,
}

/// Words that end an alias position or belong to the grammar.
const RESERVED: &[&str] = &[
    "select",
    "from",
    "where",
    "group",
    "by",
    "order",
    "having",
    "and",
    "or",
    "not",
    "in",
    "between",
    "join",
    "inner",
    "left",
    "right",
    "full",
    "outer",
    "cross",
    "natural",
    "on",
    "as",
    "union",
    "intersect",
    "except",
    "limit",
    "distinct",
    "exists",
    "like",
    "is",
];

/// Constructs the grammar deliberately does not accept.
const UNSUPPORTED: &[&str] = &[
    "or",
    "not",
    "having",
    "left",
    "right",
    "full",
    "outer",
    "cross",
    "natural",
    "union",
    "intersect",
    "except",
    "limit",
    "exists",
    "like",
    "is",
    "case",
    "with",
    "offset",
    "fetch",
];

struct Parser<'a> {
    tokens: &'a [Spanned],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn peek_at(&self, ahead: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + ahead).map(|s| &s.token)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |s| s.offset)
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "end of input".to_string(), Token::describe)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos).map(|s| &s.token);
        self.pos += 1;
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat(&mut self, token: &Token) -> bool {
        if self.peek() == Some(token) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn syntax_err(&self, expected: &str) -> ParseError {
        if let Some(tok) = self.peek() {
            if let Some(kw) = UNSUPPORTED.iter().find(|kw| tok.is_keyword(kw)) {
                return ParseError::unsupported(self.offset(), &kw.to_ascii_uppercase());
            }
        }
        ParseError::syntax(self.offset(), expected, &self.found())
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.syntax_err(&kw.to_ascii_uppercase()))
        }
    }

    fn expect(&mut self, token: Token) -> Result<(), ParseError> {
        if self.eat(&token) {
            Ok(())
        } else {
            Err(self.syntax_err(&format!("`{}`", token.describe())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token::Ident(s, quoted)) if *quoted || !is_reserved(s) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.syntax_err("an identifier")),
        }
    }

    fn subquery_guard(&self) -> Result<(), ParseError> {
        if self.peek() == Some(&Token::LParen) && self.peek_at(1).is_some_and(|t| t.is_keyword("select")) {
            return Err(ParseError::unsupported(self.offset(), "subquery"));
        }
        Ok(())
    }

    fn column(&mut self) -> Result<RawColumn, ParseError> {
        let offset = self.offset();
        let first = self.ident()?;
        if self.eat(&Token::Dot) {
            let name = self.ident()?;
            Ok(RawColumn { qualifier: Some(first), name, offset })
        } else {
            Ok(RawColumn { qualifier: None, name: first, offset })
        }
    }

    fn literal(&mut self) -> Result<String, ParseError> {
        // DATE '2001-01-01' is an ordinary string literal here.
        if matches!(self.peek_at(1), Some(Token::Str(_))) && (self.at_keyword("date") || self.at_keyword("timestamp")) {
            self.pos += 1;
        }
        match self.peek() {
            Some(Token::Str(s)) => {
                self.pos += 1;
                Ok(format!("'{s}'"))
            }
            Some(Token::Number(n)) => {
                self.pos += 1;
                Ok(n.clone())
            }
            Some(Token::Op(op)) if op == "-" => {
                self.pos += 1;
                match self.bump() {
                    Some(Token::Number(n)) => Ok(format!("-{n}")),
                    _ => {
                        self.pos -= 1;
                        Err(self.syntax_err("a number"))
                    }
                }
            }
            _ => {
                self.subquery_guard()?;
                Err(self.syntax_err("a literal"))
            }
        }
    }

    fn alias(&mut self) -> Result<Option<String>, ParseError> {
        if self.eat_keyword("as") {
            return self.ident().map(Some);
        }
        match self.peek() {
            Some(Token::Ident(s, quoted)) if *quoted || !is_reserved(s) => {
                self.pos += 1;
                Ok(Some(s.clone()))
            }
            _ => Ok(None),
        }
    }

    fn select(&mut self) -> Result<RawSelect, ParseError> {
        let mut q = RawSelect::default();
        self.expect_keyword("select")?;
        self.eat_keyword("distinct");
        self.select_items(&mut q)?;
        self.expect_keyword("from")?;
        self.table_list(&mut q)?;
        if self.eat_keyword("where") {
            self.conjunction(&mut q.predicates)?;
        }
        if self.eat_keyword("group") {
            self.expect_keyword("by")?;
            loop {
                q.group_by.push(self.column()?);
                if !self.eat(&Token::Comma) {
                    break;
                }
            }
        }
        if self.at_keyword("having") {
            return Err(ParseError::unsupported(self.offset(), "HAVING"));
        }
        if self.eat_keyword("order") {
            self.expect_keyword("by")?;
            // Ordering is irrelevant for indexing: skip to the end of the statement,
            // still refusing anything that would change the query's meaning.
            while let Some(tok) = self.peek() {
                if *tok == Token::Semicolon {
                    break;
                }
                if let Some(kw) = ["limit", "union", "intersect", "except"].iter().find(|kw| tok.is_keyword(kw)) {
                    return Err(ParseError::unsupported(self.offset(), &kw.to_ascii_uppercase()));
                }
                self.subquery_guard()?;
                self.pos += 1;
            }
        }
        self.eat(&Token::Semicolon);
        if self.peek().is_some() {
            return Err(self.syntax_err("end of statement"));
        }
        Ok(q)
    }

    fn select_items(&mut self, q: &mut RawSelect) -> Result<(), ParseError> {
        loop {
            if self.eat(&Token::Star) {
                q.items.push(SelectItem::Star);
            } else {
                self.subquery_guard()?;
                let agg = match self.peek() {
                    Some(t) if self.peek_at(1) == Some(&Token::LParen) => Aggregate::from_token(t),
                    _ => None,
                };
                if let Some(func) = agg {
                    self.pos += 2;
                    self.subquery_guard_inside()?;
                    self.eat_keyword("distinct");
                    let arg = if self.eat(&Token::Star) { None } else { Some(self.column()?) };
                    self.reject_expression()?;
                    self.expect(Token::RParen)?;
                    q.items.push(SelectItem::Aggregate(func, arg));
                } else {
                    let col = self.column()?;
                    self.reject_expression()?;
                    q.items.push(SelectItem::Column(col));
                }
                self.alias()?;
            }
            if !self.eat(&Token::Comma) {
                return Ok(());
            }
        }
    }

    fn reject_expression(&self) -> Result<(), ParseError> {
        match self.peek() {
            Some(t @ (Token::Op(_) | Token::Star)) => {
                Err(ParseError::unsupported(self.offset(), &format!("expression operator `{}`", t.describe())))
            }
            _ => Ok(()),
        }
    }

    fn subquery_guard_inside(&self) -> Result<(), ParseError> {
        if self.at_keyword("select") {
            return Err(ParseError::unsupported(self.offset(), "subquery"));
        }
        Ok(())
    }

    fn table_ref(&mut self) -> Result<TableRef, ParseError> {
        self.subquery_guard()?;
        let offset = self.offset();
        let name = self.ident()?;
        let alias = self.alias()?;
        Ok(TableRef { name, alias, offset })
    }

    fn table_list(&mut self, q: &mut RawSelect) -> Result<(), ParseError> {
        q.tables.push(self.table_ref()?);
        loop {
            if self.eat(&Token::Comma) {
                q.tables.push(self.table_ref()?);
            } else if self.at_keyword("join") || self.at_keyword("inner") {
                if self.eat_keyword("inner") && !self.at_keyword("join") {
                    return Err(self.syntax_err("JOIN"));
                }
                self.expect_keyword("join")?;
                q.tables.push(self.table_ref()?);
                self.expect_keyword("on")?;
                self.conjunction(&mut q.predicates)?;
            } else {
                return Ok(());
            }
        }
    }

    fn conjunction(&mut self, out: &mut Vec<RawPredicate>) -> Result<(), ParseError> {
        loop {
            self.predicate(out)?;
            if self.at_keyword("or") {
                return Err(ParseError::unsupported(self.offset(), "OR"));
            }
            if !self.eat_keyword("and") {
                return Ok(());
            }
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        self.subquery_guard()?;
        let typed_literal = self.peek_at(1).is_some_and(|t| matches!(t, Token::Str(_)))
            && (self.at_keyword("date") || self.at_keyword("timestamp"));
        match self.peek() {
            Some(Token::Ident(s, quoted)) if !typed_literal && (*quoted || !is_reserved(s)) => {
                Ok(Operand::Column(self.column()?))
            }
            _ => {
                let offset = self.offset();
                self.literal()?;
                Ok(Operand::Literal(offset))
            }
        }
    }

    fn predicate(&mut self, out: &mut Vec<RawPredicate>) -> Result<(), ParseError> {
        if self.peek() == Some(&Token::LParen) {
            self.subquery_guard()?;
            self.pos += 1;
            self.conjunction(out)?;
            return self.expect(Token::RParen);
        }
        if self.at_keyword("not") || self.at_keyword("exists") {
            return Err(self.syntax_err("a predicate"));
        }
        let left = self.operand()?;
        match self.peek() {
            Some(Token::Eq) => {
                self.pos += 1;
                let right = self.operand()?;
                out.push(RawPredicate::Eq(left, right));
                Ok(())
            }
            Some(t) if t.is_keyword("in") => {
                let col = self.predicate_column(left)?;
                self.pos += 1;
                self.expect(Token::LParen)?;
                self.subquery_guard_inside()?;
                let mut values = vec![self.literal()?];
                while self.eat(&Token::Comma) {
                    values.push(self.literal()?);
                }
                self.expect(Token::RParen)?;
                out.push(RawPredicate::In(col, values));
                Ok(())
            }
            Some(t) if t.is_keyword("between") => {
                let col = self.predicate_column(left)?;
                self.pos += 1;
                self.literal()?;
                self.expect_keyword("and")?;
                self.literal()?;
                out.push(RawPredicate::Between(col));
                Ok(())
            }
            Some(Token::Op(op)) => Err(ParseError::unsupported(self.offset(), &format!("operator `{op}`"))),
            _ => Err(self.syntax_err("`=`, IN or BETWEEN")),
        }
    }

    fn predicate_column(&self, operand: Operand) -> Result<RawColumn, ParseError> {
        match operand {
            Operand::Column(c) => Ok(c),
            Operand::Literal(offset) => Err(ParseError::syntax(offset, "a column", "a literal")),
        }
    }
}

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|kw| word.eq_ignore_ascii_case(kw))
}

impl Aggregate {
    fn from_token(t: &Token) -> Option<Aggregate> {
        let Token::Ident(s, false) = t else {
            return None;
        };
        Some(match s.to_ascii_uppercase().as_str() {
            "SUM" => Aggregate::Sum,
            "AVG" => Aggregate::Avg,
            "MIN" => Aggregate::Min,
            "MAX" => Aggregate::Max,
            "COUNT" => Aggregate::Count,
            _ => return None,
        })
    }
}

/// Name scope built from the FROM clause.
struct Scope<'s> {
    schema: &'s StarSchema,
    /// alias or table name -> table name
    bindings: BTreeMap<String, String>,
    tables: Vec<String>,
}

impl<'s> Scope<'s> {
    fn resolve(&self, col: &RawColumn) -> Result<AttrRef, ParseError> {
        match &col.qualifier {
            Some(q) => {
                let table = self
                    .bindings
                    .get(q)
                    .ok_or_else(|| ParseError::resolution(col.offset, &format!("unknown table or alias `{q}`")))?;
                let stats = self.schema.table(table).expect("bound tables exist");
                if !stats.has_attribute(&col.name) {
                    return Err(ParseError::resolution(col.offset, &format!("unknown attribute `{q}.{}`", col.name)));
                }
                Ok(AttrRef::new(table.clone(), col.name.clone()))
            }
            None => {
                let owners: Vec<&String> = self
                    .tables
                    .iter()
                    .filter(|t| self.schema.table(t).is_some_and(|s| s.has_attribute(&col.name)))
                    .collect();
                match owners.as_slice() {
                    [one] => Ok(AttrRef::new((*one).clone(), col.name.clone())),
                    [] => Err(ParseError::resolution(col.offset, &format!("unknown attribute `{}`", col.name))),
                    _ => Err(ParseError::resolution(col.offset, &format!("ambiguous attribute `{}`", col.name))),
                }
            }
        }
    }
}

/// Parses one statement into the analytical-query model.
///
/// The returned query has an empty id and weight 1; batch loading assigns both.
pub fn parse_query(text: &str, schema: &StarSchema) -> Result<AnalyticalQuery, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens: &tokens, pos: 0, end: text.len() };
    let raw = parser.select()?;
    resolve(raw, schema)
}

fn resolve(raw: RawSelect, schema: &StarSchema) -> Result<AnalyticalQuery, ParseError> {
    let mut scope = Scope { schema, bindings: BTreeMap::new(), tables: Vec::new() };
    let mut fact_offset = None;
    for t in &raw.tables {
        if schema.table(&t.name).is_none() {
            return Err(ParseError::resolution(t.offset, &format!("unknown table `{}`", t.name)));
        }
        if scope.tables.contains(&t.name) {
            return Err(ParseError::unsupported(t.offset, &format!("self-join on `{}`", t.name)));
        }
        if schema.is_fact(&t.name) {
            fact_offset = Some(t.offset);
        }
        scope.tables.push(t.name.clone());
        scope.bindings.insert(t.name.clone(), t.name.clone());
        if let Some(alias) = &t.alias {
            if scope.bindings.insert(alias.clone(), t.name.clone()).is_some_and(|prev| prev != t.name) {
                return Err(ParseError::resolution(t.offset, &format!("alias `{alias}` is bound twice")));
            }
        }
    }
    if fact_offset.is_none() {
        return Err(ParseError::resolution(
            raw.tables.first().map_or(0, |t| t.offset),
            &format!("fact table `{}` is not referenced", schema.fact.name),
        ));
    }

    let mut query = AnalyticalQuery::default();
    let is_dimension_attr = |a: &AttrRef| !schema.is_fact(&a.table);

    for item in &raw.items {
        match item {
            SelectItem::Star => {}
            // Plain attributes outside GROUP BY are resolved for validity only.
            SelectItem::Column(c) => {
                scope.resolve(c)?;
            }
            SelectItem::Aggregate(func, arg) => {
                let attr = arg.as_ref().map(|c| scope.resolve(c)).transpose()?;
                match attr {
                    Some(a) if !schema.is_fact(&a.table) => {}
                    attribute => query.measures.push(Measure { function: *func, attribute }),
                }
            }
        }
    }

    let mut joined = BTreeSet::new();
    let mut restrictions: Vec<RestrictionPredicate> = Vec::new();
    for pred in raw.predicates {
        match pred {
            RawPredicate::Eq(Operand::Column(l), Operand::Column(r)) => {
                let la = scope.resolve(&l)?;
                let ra = scope.resolve(&r)?;
                let dim = star_join(schema, &la, &ra)
                    .or_else(|| star_join(schema, &ra, &la))
                    .ok_or_else(|| ParseError::unsupported(l.offset, &format!("non-star join `{la} = {ra}`")))?;
                joined.insert(dim);
            }
            RawPredicate::Eq(Operand::Column(c), Operand::Literal(..))
            | RawPredicate::Eq(Operand::Literal(..), Operand::Column(c)) => {
                restrictions.push(restriction(&scope, &c, PredicateKind::Equality, 1)?);
            }
            RawPredicate::Eq(Operand::Literal(offset), Operand::Literal(..)) => {
                return Err(ParseError::unsupported(offset, "constant predicate"));
            }
            RawPredicate::In(c, values) => {
                let distinct: BTreeSet<String> = values.into_iter().collect();
                restrictions.push(restriction(&scope, &c, PredicateKind::InList, distinct.len() as u64)?);
            }
            RawPredicate::Between(c) => {
                restrictions.push(restriction(&scope, &c, PredicateKind::Between, 1)?);
            }
        }
    }

    for t in &raw.tables {
        if !schema.is_fact(&t.name) && !joined.contains(&t.name) {
            return Err(ParseError::unsupported(
                t.offset,
                &format!("dimension `{}` is not joined to the fact table", t.name),
            ));
        }
    }

    for c in &raw.group_by {
        let attr = scope.resolve(c)?;
        if !is_dimension_attr(&attr) {
            return Err(ParseError::unsupported(c.offset, &format!("GROUP BY on fact attribute `{attr}`")));
        }
        query.grouping.insert(attr);
    }

    query.restrictions = restrictions;
    query.joined_dimensions = joined;
    Ok(query)
}

/// `fk_side = pk_side` is a declared star join; returns the dimension.
fn star_join(schema: &StarSchema, fk_side: &AttrRef, pk_side: &AttrRef) -> Option<String> {
    if !schema.is_fact(&fk_side.table) {
        return None;
    }
    let target = schema.join_keys.get(&fk_side.attribute)?;
    (target.dimension == pk_side.table && target.primary_key == pk_side.attribute).then(|| target.dimension.clone())
}

fn restriction(
    scope: &Scope<'_>,
    col: &RawColumn,
    kind: PredicateKind,
    value_count: u64,
) -> Result<RestrictionPredicate, ParseError> {
    let attribute = scope.resolve(col)?;
    if scope.schema.is_fact(&attribute.table) {
        return Err(ParseError::unsupported(col.offset, &format!("restriction on fact attribute `{attribute}`")));
    }
    Ok(RestrictionPredicate { attribute, kind, value_count })
}
