//! Detector for rating-style numeric expressions ("3 out of 10", "4 / 10",
//! "vote 3", ...) and a small case-insensitive pattern wrapper.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use regex_automata::meta::Regex;
use regex_automata::util::syntax;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid pattern {pattern}: {message}")]
pub struct PatternError {
    pub pattern: String,
    pub message: String,
}

/// A case-insensitive regular expression over space-joined token text.
#[derive(Debug, Clone)]
pub struct TextPattern {
    source: String,
    re: Regex,
}

impl TextPattern {
    pub fn new(expr: &str) -> Result<Self, PatternError> {
        let re = Regex::builder()
            .syntax(syntax::Config::new().case_insensitive(true))
            .build(expr)
            .map_err(|e| PatternError { pattern: expr.to_string(), message: e.to_string() })?;
        Ok(TextPattern { source: expr.to_string(), re })
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.re.is_match(text)
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }
}

/// Number forms substituted for `NUMBER` in every rating expression.
pub const NUMBER: &str = r"zero|one|two|three|four|five|six|seven|eight|nine|ten|\d+|\d+\.\d+|\d+ \. \d+|\d+\+";

/// Rating expressions with a `NUMBER` placeholder, in matching order.
pub const RATING_EXPRESSIONS: [&str; 23] = [
    r": (NUMBER) \( out of\b",
    r"\b(NUMBER) out of\b",
    r"\b(NUMBER)\* out of\b",
    r"\b(NUMBER) outta \d+\b",
    // excludes "my top 10 of"
    r"\b[^(top )](NUMBER) of \d+\b",
    r"\b(NUMBER) on \d+\b",
    r"\b(NUMBER) out \d+\b",
    r"\b(NUMBER) / 10\b",
    r"\b(NUMBER) / 5\b",
    r"\bvote \( (NUMBER) \)",
    r"\bvote (NUMBER)\b",
    r#"\bvoted \" (NUMBER) \""#,
    r"\bvote is (NUMBER)\b",
    r"\bgive this a (NUMBER)\b",
    r"\bgive it a (NUMBER)\b",
    r"\bgets a (NUMBER)\b",
    r"\brate this a (NUMBER)\b",
    r#"\" (NUMBER) \" rating\b"#,
    r"\b(NUMBER) star\b",
    r"\b(NUMBER) - star\b",
    r"\b(NUMBER) stars\b",
    r"\b(NUMBER) points\b",
    // excludes "at 1 point"
    r"\b[^(at)] (NUMBER) point\b",
];

/// Which expression fired, by position in [`RATING_EXPRESSIONS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumericMatch {
    pub expression: usize,
}

impl NumericMatch {
    pub fn template(&self) -> &'static str {
        RATING_EXPRESSIONS[self.expression]
    }
}

#[derive(Debug, Clone)]
pub struct NumericMatcher {
    patterns: Vec<TextPattern>,
}

impl Default for NumericMatcher {
    fn default() -> Self {
        Self::new()
    }
}

impl NumericMatcher {
    pub fn new() -> Self {
        let patterns = RATING_EXPRESSIONS
            .iter()
            .map(|t| TextPattern::new(&t.replace("NUMBER", NUMBER)).expect("built-in expression compiles"))
            .collect();
        NumericMatcher { patterns }
    }

    pub fn expressions(&self) -> impl Iterator<Item = &str> {
        self.patterns.iter().map(|p| p.as_str())
    }

    /// First expression matching `text`, if any.
    pub fn detect(&self, text: &str) -> Option<NumericMatch> {
        self.patterns.iter().position(|p| p.is_match(text)).map(|expression| NumericMatch { expression })
    }

    pub fn detect_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Option<NumericMatch> {
        let text: Vec<&str> = tokens.iter().map(|t| t.as_ref()).collect();
        self.detect(&text.join(" "))
    }
}
