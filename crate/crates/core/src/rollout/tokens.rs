use serde::Serialize;

use crate::query::Phase;

/// Deterministic approximate token count: each maximal run of word
/// characters (alphanumeric or `_`) is one token, and every other
/// non-whitespace character is a token of its own.
pub fn count_tokens(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !c.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TokenCounts {
    pub think: usize,
    pub search: usize,
    pub information: usize,
    pub answer: usize,
}

impl TokenCounts {
    pub fn total(&self) -> usize {
        self.think + self.search + self.information + self.answer
    }

    pub fn get(&self, phase: Phase) -> usize {
        match phase {
            Phase::Think => self.think,
            Phase::Search => self.search,
            Phase::Information => self.information,
            Phase::Answer => self.answer,
        }
    }

    pub fn add(&mut self, phase: Phase, n: usize) {
        match phase {
            Phase::Think => self.think += n,
            Phase::Search => self.search += n,
            Phase::Information => self.information += n,
            Phase::Answer => self.answer += n,
        }
    }
}
