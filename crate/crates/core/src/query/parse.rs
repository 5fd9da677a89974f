//! Tokenizer and recursive-descent parser for the counting-query subset:
//!
//! ```text
//! SELECT [attr, ...,] COUNT(*) [AS alias] FROM name
//!   [WHERE cond AND cond ...]
//!   [GROUP BY attr, ...]
//!   [ORDER BY alias|COUNT(*) [DESC|ASC]]
//!   [LIMIT k]
//! cond := attr = literal | attr IN [literal, literal]
//! ```
//!
//! The parser only produces syntax; names are resolved against a schema in
//! [`super::plan`].

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub message: String,
    /// byte offset into the query text
    pub position: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.position)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Str(String),
    Number(String),
    Sym(char),
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    let err = |pos: usize, message: String| ParseError { message, position: pos };
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_' || chars[i].1 == '.') {
                i += 1;
            }
            let word: String = chars[start..i].iter().map(|c| c.1).collect();
            out.push(Token { tok: Tok::Word(word), pos });
        } else if c.is_ascii_digit() || ((c == '-' || c == '+' || c == '.') && chars.get(i + 1).is_some_and(|n| n.1.is_ascii_digit() || n.1 == '.')) {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i].1;
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1].1, 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let number: String = chars[start..i].iter().map(|c| c.1).collect();
            if number.parse::<f64>().is_err() {
                return Err(err(pos, format!("malformed number `{number}`")));
            }
            out.push(Token { tok: Tok::Number(number), pos });
        } else if c == '\'' || c == '"' {
            let quote = c;
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&(_, d)) = chars.get(i) else {
                    return Err(err(pos, "unterminated quoted literal".into()));
                };
                i += 1;
                if d == quote {
                    if chars.get(i).is_some_and(|n| n.1 == quote) {
                        s.push(quote);
                        i += 1;
                    } else {
                        break;
                    }
                } else {
                    s.push(d);
                }
            }
            let tok = if quote == '\'' { Tok::Str(s) } else { Tok::Quoted(s) };
            out.push(Token { tok, pos });
        } else if "()*,=[];".contains(c) {
            out.push(Token { tok: Tok::Sym(c), pos });
            i += 1;
        } else {
            return Err(err(pos, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

/// A literal as written; resolution depends on the attribute's kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    /// single-quoted string
    Str(String),
    /// unquoted number or bare word
    Bare(String),
}

impl Literal {
    pub fn text(&self) -> &str {
        match self {
            Literal::Str(s) | Literal::Bare(s) => s,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Bare(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Eq { attr: String, value: Literal },
    Range { attr: String, lo: Literal, hi: Literal },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    Desc,
    Asc,
}

/// Syntax tree of a counting query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub select: Vec<String>,
    pub alias: Option<String>,
    pub table: String,
    pub conditions: Vec<Condition>,
    pub group_by: Vec<String>,
    pub order: Option<SortOrder>,
    pub limit: Option<usize>,
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |t| t.pos)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            message: message.into(),
            position: self.pos(),
        })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.fail(format!("expected {kw}"))
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.fail(format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) if !is_reserved(w) => {
                let w = w.clone();
                self.at += 1;
                Ok(w)
            }
            Some(Tok::Quoted(w)) => {
                let w = w.clone();
                self.at += 1;
                Ok(w)
            }
            _ => self.fail("expected an attribute name"),
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let lit = match self.peek() {
            Some(Tok::Str(s)) => Literal::Str(s.clone()),
            Some(Tok::Number(s)) => Literal::Bare(s.clone()),
            Some(Tok::Word(w)) if !is_reserved(w) => Literal::Bare(w.clone()),
            _ => return self.fail("expected a literal"),
        };
        self.at += 1;
        Ok(lit)
    }

    /// `COUNT(*)`, after checking the aggregate name.
    fn count_star(&mut self) -> Result<(), ParseError> {
        self.expect_sym('(')?;
        if !self.eat_sym('*') {
            return self.fail("only COUNT(*) is supported");
        }
        self.expect_sym(')')
    }

    fn at_aggregate(&self) -> Option<String> {
        match (self.peek(), self.tokens.get(self.at + 1).map(|t| &t.tok)) {
            (Some(Tok::Word(w)), Some(Tok::Sym('('))) => Some(w.to_ascii_uppercase()),
            _ => None,
        }
    }

    fn query(&mut self) -> Result<QueryAst, ParseError> {
        self.expect_keyword("SELECT")?;
        let mut select = Vec::new();
        let mut counted = false;
        let mut alias = None;
        loop {
            if let Some(agg) = self.at_aggregate() {
                if agg != "COUNT" {
                    return self.fail(format!("unsupported aggregate {agg}; only COUNT(*) is allowed"));
                }
                if counted {
                    return self.fail("COUNT(*) listed twice");
                }
                self.at += 1;
                self.count_star()?;
                counted = true;
                if self.eat_keyword("AS") {
                    alias = Some(self.ident()?);
                }
            } else {
                select.push(self.ident()?);
            }
            if !self.eat_sym(',') {
                break;
            }
        }
        if !counted {
            return self.fail("the select list must contain COUNT(*)");
        }
        self.expect_keyword("FROM")?;
        let table = self.ident()?;

        let mut conditions = Vec::new();
        if self.eat_keyword("WHERE") {
            loop {
                if self.is_keyword("NOT") {
                    return self.fail("negation is not supported; WHERE must be a conjunction");
                }
                let attr = self.ident()?;
                if self.eat_sym('=') {
                    conditions.push(Condition::Eq {
                        attr,
                        value: self.literal()?,
                    });
                } else if self.eat_keyword("IN") {
                    if self.peek() == Some(&Tok::Sym('(')) {
                        return self.fail("IN lists are disjunctions; use IN [lo, hi] for a range");
                    }
                    self.expect_sym('[')?;
                    let lo = self.literal()?;
                    self.expect_sym(',')?;
                    let hi = self.literal()?;
                    self.expect_sym(']')?;
                    conditions.push(Condition::Range { attr, lo, hi });
                } else {
                    return self.fail("expected `=` or IN");
                }
                if self.is_keyword("OR") {
                    return self.fail("OR is not supported; WHERE must be a conjunction");
                }
                if !self.eat_keyword("AND") {
                    break;
                }
            }
        }

        let mut group_by = Vec::new();
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            loop {
                group_by.push(self.ident()?);
                if !self.eat_sym(',') {
                    break;
                }
            }
        }

        let mut order = None;
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            if self.at_aggregate().is_some_and(|a| a == "COUNT") {
                self.at += 1;
                self.count_star()?;
            } else {
                let key = self.ident()?;
                let matches_alias = alias.as_ref().is_some_and(|a| a.eq_ignore_ascii_case(&key));
                if !matches_alias {
                    return self.fail(format!("can only order by the count, not `{key}`"));
                }
            }
            order = Some(if self.eat_keyword("ASC") {
                SortOrder::Asc
            } else {
                self.eat_keyword("DESC");
                SortOrder::Desc
            });
        }

        let mut limit = None;
        if self.eat_keyword("LIMIT") {
            match self.peek() {
                Some(Tok::Number(s)) => match s.parse::<usize>() {
                    Ok(k) => {
                        limit = Some(k);
                        self.at += 1;
                    }
                    Err(_) => return self.fail("LIMIT needs a non-negative integer"),
                },
                _ => return self.fail("LIMIT needs a non-negative integer"),
            }
        }
        self.eat_sym(';');
        if self.at < self.tokens.len() {
            return self.fail("unexpected trailing input");
        }

        let mut sorted_select: Vec<String> = select.iter().map(|s| s.to_ascii_lowercase()).collect();
        let mut sorted_group: Vec<String> = group_by.iter().map(|s| s.to_ascii_lowercase()).collect();
        sorted_select.sort();
        sorted_group.sort();
        if sorted_select != sorted_group {
            return Err(ParseError {
                message: "selected attributes must match the GROUP BY list".into(),
                position: 0,
            });
        }
        Ok(QueryAst {
            select,
            alias,
            table,
            conditions,
            group_by,
            order,
            limit,
        })
    }
}

fn is_reserved(w: &str) -> bool {
    const RESERVED: [&str; 14] = [
        "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "IN", "GROUP", "BY", "ORDER", "LIMIT", "AS", "DESC", "ASC",
    ];
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(w))
}

/// Parses query text into a syntax tree.
pub fn parse(text: &str) -> Result<QueryAst, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        at: 0,
        end: text.len(),
    };
    p.query()
}
