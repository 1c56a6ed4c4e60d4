//! Line-based query text format.
//!
//! ```text
//! query q5mod
//! table nation
//! table customer as c
//! join nation.n_nationkey = c.c_nationkey
//! filter nation.n_name = 'ALGERIA'
//! select c.c_name, lineitem.l_extendedprice * (1.00 - lineitem.l_discount)
//! ```
//!
//! `#` starts a comment. One directive per line; `join` takes one edge with
//! `and`-separated key pairs; `select` takes comma-separated items and may
//! repeat. Numeric literals with a decimal point are scaled by 100 into the
//! fixed-point integer domain (`1.00` becomes 100, `0.05` becomes 5), so
//! they line up with decimal columns; bare integers are left as written.

use crate::expr::{ArithOp, CmpOp, Expr};
use crate::query::{AttrRef, FilterSpec, JoinEdge, KeyPair, QueryIR, SelectItem, TableBinding};
use crate::IrError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Dot,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Eq,
    Lt,
    Gt,
    Comma,
    And,
}

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let mut toks = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            '*' => {
                toks.push(Tok::Star);
                i += 1;
            }
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '=' => {
                toks.push(Tok::Eq);
                i += 1;
            }
            '<' => {
                toks.push(Tok::Lt);
                i += 1;
            }
            '>' => {
                toks.push(Tok::Gt);
                i += 1;
            }
            ',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            '.' => {
                toks.push(Tok::Dot);
                i += 1;
            }
            '\'' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j] as char != '\'' {
                    j += 1;
                }
                if j == bytes.len() {
                    return Err("unterminated string literal".into());
                }
                toks.push(Tok::Str(s[start..j].to_string()));
                i = j + 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                // A dot directly followed by a digit makes this a scaled
                // decimal literal, otherwise the dot is a separate token.
                if i + 1 < bytes.len()
                    && bytes[i] as char == '.'
                    && (bytes[i + 1] as char).is_ascii_digit()
                {
                    let int_part: i64 = s[start..i].parse().map_err(|_| "bad number")?;
                    i += 1;
                    let fstart = i;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                    let frac = &s[fstart..i];
                    if frac.len() > 2 {
                        return Err(format!(
                            "decimal literal '{}' has more than 2 fraction digits",
                            &s[start..i]
                        ));
                    }
                    let mut frac_val: i64 = frac.parse().map_err(|_| "bad number")?;
                    if frac.len() == 1 {
                        frac_val *= 10;
                    }
                    toks.push(Tok::Int(int_part * 100 + frac_val));
                } else {
                    let v: i64 = s[start..i]
                        .parse()
                        .map_err(|_| format!("integer '{}' out of range", &s[start..i]))?;
                    toks.push(Tok::Int(v));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &s[start..i];
                if word.eq_ignore_ascii_case("and") {
                    toks.push(Tok::And);
                } else {
                    toks.push(Tok::Ident(word.to_string()));
                }
            }
            other => return Err(format!("unexpected character '{other}'")),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn new(toks: Vec<Tok>) -> Parser {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), String> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(format!("expected {what}"))
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.toks.len()
    }

    fn ident(&mut self, what: &str) -> Result<String, String> {
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => Err(format!("expected {what}")),
        }
    }

    fn attr(&mut self) -> Result<AttrRef, String> {
        let table = self.ident("table alias")?;
        self.expect(Tok::Dot, "'.' after table alias")?;
        let column = self.ident("column name")?;
        Ok(AttrRef { table, column })
    }

    // expr := cmp ('and' cmp)*
    fn expr(&mut self) -> Result<Expr, String> {
        let mut e = self.cmp()?;
        while self.eat(&Tok::And) {
            let rhs = self.cmp()?;
            e = Expr::And(Box::new(e), Box::new(rhs));
        }
        Ok(e)
    }

    // cmp := sum (('='|'<'|'>') sum)?
    fn cmp(&mut self) -> Result<Expr, String> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Some(Tok::Eq) => CmpOp::Eq,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Gt) => CmpOp::Gt,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.sum()?;
        Ok(Expr::Cmp(Box::new(lhs), op, Box::new(rhs)))
    }

    // sum := term (('+'|'-') term)*
    fn sum(&mut self) -> Result<Expr, String> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(e),
            };
            self.pos += 1;
            let rhs = self.term()?;
            e = Expr::Arith(Box::new(e), op, Box::new(rhs));
        }
    }

    // term := atom ('*' atom)*
    fn term(&mut self) -> Result<Expr, String> {
        let mut e = self.atom()?;
        while self.eat(&Tok::Star) {
            let rhs = self.atom()?;
            e = Expr::Arith(Box::new(e), ArithOp::Mul, Box::new(rhs));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, String> {
        match self.bump() {
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Int(v)) => Ok(Expr::IntLit(v)),
            Some(Tok::Str(s)) => Ok(Expr::StrLit(s)),
            Some(Tok::Ident(table)) => {
                self.expect(Tok::Dot, "'.' after table alias")?;
                let column = self.ident("column name")?;
                Ok(Expr::Col(AttrRef { table, column }))
            }
            other => Err(format!("expected expression, found {other:?}")),
        }
    }
}

fn parse_full_expr(toks: Vec<Tok>) -> Result<Expr, String> {
    let mut p = Parser::new(toks);
    let e = p.expr()?;
    if !p.at_end() {
        return Err("trailing tokens after expression".into());
    }
    Ok(e)
}

/// Parse the declarative query text. `fallback_name` names the query when
/// the text carries no `query` directive.
pub fn parse_query_text(text: &str, fallback_name: &str) -> Result<QueryIR, IrError> {
    let mut ir = QueryIR {
        name: fallback_name.to_string(),
        tables: Vec::new(),
        joins: Vec::new(),
        filters: Vec::new(),
        select: Vec::new(),
    };
    let mut named = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let fail = |msg: String| IrError::Parse(format!("line {lineno}: {msg}"));
        let line = match raw.find('#') {
            Some(h) => &raw[..h],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (word, rest) = match line.split_once(char::is_whitespace) {
            Some((w, r)) => (w, r.trim()),
            None => (line, ""),
        };
        match word.to_ascii_lowercase().as_str() {
            "query" => {
                if named {
                    return Err(fail("duplicate query directive".into()));
                }
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(fail("query directive takes one name".into()));
                }
                ir.name = rest.to_string();
                named = true;
            }
            "table" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let (table, alias) = match parts.as_slice() {
                    [t] => (t.to_string(), t.to_string()),
                    [t, kw, a] if kw.eq_ignore_ascii_case("as") => {
                        (t.to_string(), a.to_string())
                    }
                    _ => return Err(fail("expected 'table NAME' or 'table NAME as ALIAS'".into())),
                };
                ir.tables.push(TableBinding { table, alias });
            }
            "join" => {
                let toks = lex(rest).map_err(&fail)?;
                let mut p = Parser::new(toks);
                let mut keys = Vec::new();
                loop {
                    let left = p.attr().map_err(&fail)?;
                    p.expect(Tok::Eq, "'=' between join keys").map_err(&fail)?;
                    let right = p.attr().map_err(&fail)?;
                    keys.push(KeyPair { left, right });
                    if !p.eat(&Tok::And) {
                        break;
                    }
                }
                if !p.at_end() {
                    return Err(fail("trailing tokens after join edge".into()));
                }
                ir.joins.push(JoinEdge { keys });
            }
            "filter" => {
                let toks = lex(rest).map_err(&fail)?;
                let expr = parse_full_expr(toks).map_err(&fail)?;
                ir.filters.push(FilterSpec { expr });
            }
            "select" => {
                let toks = lex(rest).map_err(&fail)?;
                let mut p = Parser::new(toks);
                loop {
                    let e = p.expr().map_err(&fail)?;
                    ir.select.push(match e {
                        Expr::Col(a) => SelectItem::Attr(a),
                        other => SelectItem::Expr(other),
                    });
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
                if !p.at_end() {
                    return Err(fail("trailing tokens after select list".into()));
                }
            }
            other => {
                return Err(fail(format!(
                    "unknown directive '{other}' (expected query/table/join/filter/select)"
                )))
            }
        }
    }

    if ir.tables.is_empty() {
        return Err(IrError::Parse("query text binds no tables".into()));
    }
    if ir.select.is_empty() {
        return Err(IrError::Parse("query text has no select items".into()));
    }
    Ok(ir)
}
