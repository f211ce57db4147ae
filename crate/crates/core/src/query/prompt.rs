//! Prompt templates with `{placeholder}` fields.
//!
//! A template file is split into `[task]`, `[format]`, `[policy]`,
//! `[example]` and `[context]` sections. Placeholders are `{name}` with a
//! lowercase identifier; any other braces (such as the schema line's
//! `{local|global}`) are literal text.

use std::collections::BTreeMap;
use std::path::Path;

use super::QueryError;

/// Search schema line shown to the model under the flexible traversal.
pub const SEARCH_SCHEMA: &str =
    "mode={local|global}, hop={1|2}, query={your query with keywords}";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    ClassificationF,
    /// Flexible traversal advertising the attribute mode as well.
    ClassificationF3,
    ClassificationR,
    LinkF,
    LinkR,
}

impl TemplateKind {
    fn source(self) -> &'static str {
        match self {
            TemplateKind::ClassificationF => include_str!("../../templates/classification_f.txt"),
            TemplateKind::ClassificationF3 => include_str!("../../templates/classification_f3.txt"),
            TemplateKind::ClassificationR => include_str!("../../templates/classification_r.txt"),
            TemplateKind::LinkF => include_str!("../../templates/link_f.txt"),
            TemplateKind::LinkR => include_str!("../../templates/link_r.txt"),
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateKind::ClassificationF => "classification_f.txt",
            TemplateKind::ClassificationF3 => "classification_f3.txt",
            TemplateKind::ClassificationR => "classification_r.txt",
            TemplateKind::LinkF => "link_f.txt",
            TemplateKind::LinkR => "link_r.txt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub task_block: String,
    pub format_block: String,
    pub policy_block: String,
    pub example_block: String,
    /// Target attributes, domain knowledge (degree statistics) and class list.
    pub context_block: String,
}

impl PromptTemplate {
    pub fn builtin(kind: TemplateKind) -> Self {
        Self::parse(kind.source()).expect("shipped templates are well-formed")
    }

    pub fn from_file(path: &Path) -> Result<Self, QueryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QueryError::TemplateInvalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            let t = line.trim();
            if t.starts_with('[') && t.ends_with(']') && t.len() > 2 && !t.contains(' ') {
                current = Some(t[1..t.len() - 1].to_string());
                sections.entry(t[1..t.len() - 1].to_string()).or_default();
                continue;
            }
            match &current {
                Some(name) => {
                    let s = sections.get_mut(name).expect("section exists");
                    s.push_str(line);
                    s.push('\n');
                }
                None if t.is_empty() => {}
                None => {
                    return Err(QueryError::TemplateInvalid(
                        "text before the first [section] header".into(),
                    ))
                }
            }
        }
        for name in sections.keys() {
            if !["task", "format", "policy", "example", "context"].contains(&name.as_str()) {
                return Err(QueryError::TemplateInvalid(format!("unknown section [{name}]")));
            }
        }
        let mut take = |name: &str| sections.remove(name).unwrap_or_default().trim().to_string();
        let tmpl = PromptTemplate {
            task_block: take("task"),
            format_block: take("format"),
            policy_block: take("policy"),
            example_block: take("example"),
            context_block: take("context"),
        };
        if tmpl.task_block.is_empty() || tmpl.format_block.is_empty() {
            return Err(QueryError::TemplateInvalid(
                "[task] and [format] sections are required".into(),
            ));
        }
        Ok(tmpl)
    }

    fn blocks(&self) -> [&str; 5] {
        [
            &self.task_block,
            &self.format_block,
            &self.policy_block,
            &self.example_block,
            &self.context_block,
        ]
    }
}

/// Values substituted into a template.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptContext {
    values: BTreeMap<String, String>,
}

fn article_for(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

impl PromptContext {
    pub fn new(dataset: &str, graph_kind: &str, node_noun: &str, domain_description: &str) -> Self {
        let mut ctx = PromptContext::default();
        ctx.set("article", article_for(dataset));
        ctx.set("dataset", dataset);
        ctx.set("graph_kind", graph_kind);
        ctx.set("node_noun", node_noun);
        ctx.set("domain_description", domain_description);
        ctx
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.values.insert(key.to_string(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn classification(
        mut self,
        target_text: &str,
        degree: usize,
        avg_degree: f64,
        classes: &[String],
    ) -> Self {
        self.set("target_text", target_text);
        self.set("degree", degree.to_string());
        self.set("avg_degree", format!("{avg_degree:.2}"));
        if !classes.is_empty() {
            self.set("class_list", classes.join("; "));
        }
        self
    }

    pub fn link(
        mut self,
        a_text: &str,
        b_text: &str,
        degree_a: usize,
        degree_b: usize,
        avg_degree: f64,
    ) -> Self {
        self.set("target_a_text", a_text);
        self.set("target_b_text", b_text);
        self.set("degree_a", degree_a.to_string());
        self.set("degree_b", degree_b.to_string());
        self.set("avg_degree", format!("{avg_degree:.2}"));
        self
    }
}

fn substitute(block: &str, ctx: &PromptContext) -> Result<String, QueryError> {
    let mut out = String::with_capacity(block.len());
    let mut rest = block;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            let value = ctx
                .get(name)
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| QueryError::MissingField(name.to_string()))?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

pub fn render_prompt(tmpl: &PromptTemplate, ctx: &PromptContext) -> Result<String, QueryError> {
    let mut parts = Vec::new();
    for block in tmpl.blocks() {
        if !block.is_empty() {
            parts.push(substitute(block, ctx)?);
        }
    }
    Ok(parts.join("\n\n") + "\n")
}
