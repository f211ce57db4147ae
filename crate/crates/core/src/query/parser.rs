//! Search-block parser.
//!
//! Accepted F-policy forms:
//!
//! ```text
//! mode=local, hop=1, query="Markov chain sampling Gibbs sampler"
//! mode=(local, hop=2), query=Gibbs sampler convergence
//! mode=global, anchor=b, query={co-purchased items}
//! ```
//!
//! Any malformed structural field resolves to `Local(1)` and yields a
//! [`FallbackEvent`]; only a missing query text is an error.

use super::{
    AnchorSelector, FallbackEvent, FallbackReason, ParsedSearch, QueryError, SearchSpace,
    StructuredQuery, Traversal,
};
use crate::embedding::tokenize;

pub fn parse_search_block(raw: &str, policy: Traversal) -> Result<ParsedSearch, QueryError> {
    match policy {
        Traversal::R => Ok(ParsedSearch {
            // Scope in R mode comes from the traversal state, not the text.
            query: StructuredQuery::new(SearchSpace::Local(1), usable_text(raw)?),
            fallback: None,
        }),
        Traversal::F => parse_flexible(raw),
    }
}

fn usable_text(s: &str) -> Result<String, QueryError> {
    let t = s.trim();
    if tokenize(t).next().is_none() {
        return Err(QueryError::EmptyQueryText);
    }
    Ok(t.to_string())
}

#[derive(Default)]
struct Fields {
    mode: Option<String>,
    hop: Option<String>,
    query: Option<String>,
    anchor: Option<String>,
    any: bool,
}

impl Fields {
    fn set(&mut self, key: &str, value: String) {
        self.any = true;
        let slot = match key.to_ascii_lowercase().as_str() {
            "mode" | "scope" => &mut self.mode,
            "hop" | "hops" => &mut self.hop,
            "query" => &mut self.query,
            "anchor" => &mut self.anchor,
            _ => return,
        };
        // First occurrence wins.
        if slot.is_none() {
            *slot = Some(value);
        }
    }
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace() || c == ',' || c == ';') {
            self.bump();
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        (self.pos > start).then(|| &self.s[start..self.pos])
    }

    /// Quoted string with `\"` and `\\` escapes; unterminated runs to the end.
    fn quoted(&mut self, quote: char) -> String {
        let mut out = String::new();
        while let Some(c) = self.bump() {
            if c == '\\' {
                match self.peek() {
                    Some(n) if n == quote || n == '\\' => {
                        out.push(n);
                        self.bump();
                    }
                    _ => out.push(c),
                }
            } else if c == quote {
                break;
            } else {
                out.push(c);
            }
        }
        out
    }

    fn delimited(&mut self, close: char) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == close {
                let inner = self.s[start..self.pos].to_string();
                self.bump();
                return inner;
            }
            self.bump();
        }
        self.s[start..].to_string()
    }

    fn until_comma(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c != ',') {
            self.bump();
        }
        self.s[start..self.pos].trim().to_string()
    }
}

fn scan_fields(raw: &str) -> (Fields, Option<String>) {
    let mut fields = Fields::default();
    let mut cur = Cursor { s: raw, pos: 0 };
    loop {
        cur.skip_separators();
        if cur.peek().is_none() {
            return (fields, None);
        }
        let save = cur.pos;
        let key = cur.ident();
        cur.skip_ws();
        let Some(key) = key.filter(|_| cur.peek() == Some('=')) else {
            // Not key=value: whatever remains is free text.
            let leftover = raw[save..].trim().to_string();
            return (fields, Some(leftover));
        };
        cur.bump();
        cur.skip_ws();
        let is_query = key.eq_ignore_ascii_case("query");
        let value = match cur.peek() {
            Some(q @ ('"' | '\'')) => {
                cur.bump();
                cur.quoted(q)
            }
            Some('{') => {
                cur.bump();
                cur.delimited('}')
            }
            Some('(') if !is_query => {
                cur.bump();
                let inner = cur.delimited(')');
                scan_group(&inner, key, &mut fields);
                continue;
            }
            _ if is_query => {
                let v = cur.rest().trim().to_string();
                cur.pos = raw.len();
                v
            }
            _ => cur.until_comma(),
        };
        fields.set(key, value);
    }
}

/// `mode=(local, hop=1)`: the first bare item is the value of `key`, the
/// rest are ordinary fields.
fn scan_group(inner: &str, key: &str, fields: &mut Fields) {
    let mut bare_seen = false;
    for item in inner.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        match item.split_once('=') {
            Some((k, v)) => fields.set(k.trim(), v.trim().to_string()),
            None if !bare_seen => {
                bare_seen = true;
                fields.set(key, item.to_string());
            }
            None => {}
        }
    }
}

fn strip_wrapping(v: &str) -> &str {
    let v = v.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('{', '}'), ('(', ')')] {
        if v.len() >= 2 && v.starts_with(open) && v.ends_with(close) {
            return v[1..v.len() - 1].trim();
        }
    }
    v
}

fn parse_flexible(raw: &str) -> Result<ParsedSearch, QueryError> {
    let (fields, leftover) = scan_fields(raw);
    if !fields.any {
        return Ok(ParsedSearch {
            query: StructuredQuery::new(SearchSpace::Local(1), usable_text(raw)?),
            fallback: Some(FallbackEvent {
                reason: FallbackReason::Unstructured,
            }),
        });
    }
    let text = match (&fields.query, leftover) {
        (Some(q), _) => usable_text(q)?,
        (None, Some(rest)) => usable_text(&rest)?,
        (None, None) => return Err(QueryError::EmptyQueryText),
    };

    let hop = fields.hop.as_deref().map(|h| {
        let h = strip_wrapping(h);
        match h.parse::<u8>() {
            Ok(v @ (1 | 2)) => Ok(v),
            _ => Err(h.to_string()),
        }
    });
    let mode = fields
        .mode
        .as_deref()
        .map(|m| strip_wrapping(m).to_ascii_lowercase());

    let resolved = match (mode.as_deref(), hop) {
        (None, _) => Err(FallbackReason::MissingMode),
        (Some(_), Some(Err(bad))) => Err(FallbackReason::HopOutOfRange(bad)),
        (Some("local"), Some(Ok(h))) => Ok(SearchSpace::Local(h)),
        (Some("local"), None) => Err(FallbackReason::MissingHop),
        (Some("global"), _) => Ok(SearchSpace::Global),
        (Some("attribute"), _) => Ok(SearchSpace::Attribute),
        (Some(other), _) => Err(FallbackReason::UnknownMode(other.to_string())),
    };
    let (space, fallback) = match resolved {
        Ok(space) => (space, None),
        Err(reason) => (SearchSpace::Local(1), Some(FallbackEvent { reason })),
    };

    let anchor = match fields
        .anchor
        .as_deref()
        .map(|a| strip_wrapping(a).to_ascii_lowercase())
        .as_deref()
    {
        Some("b" | "second" | "2") => AnchorSelector::Second,
        _ => AnchorSelector::First,
    };

    Ok(ParsedSearch {
        query: StructuredQuery {
            space,
            text,
            anchor,
        },
        fallback,
    })
}
