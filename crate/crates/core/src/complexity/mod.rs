//! Rule-based static analysis of guest programs. Source is normalized
//! (comments removed, string literals emptied), split into logical lines,
//! and matched against a per-language pattern table. Loop nesting,
//! recursion and in-loop comparisons are found structurally from block
//! layout; the other categories count matching lines.
//!
//! The score rubric and its thresholds are our own; the report is meant as
//! advisory input for a reviewer, not a verdict.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

const PYTHON_TABLE: &str = include_str!("tables/python.json");
const JAVASCRIPT_TABLE: &str = include_str!("tables/javascript.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStyle {
    Indent,
    Brace,
}

/// A versioned rule set for one guest language, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternTable {
    pub language: String,
    pub version: u32,
    pub extension: String,
    pub block_style: BlockStyle,
    pub line_comment: Option<String>,
    pub block_comment: Option<(String, String)>,
    /// Longest delimiters first.
    pub string_quotes: Vec<String>,
    pub loop_header: String,
    /// Must capture the function name in a group named `name` (or `name2`).
    pub function_header: String,
    pub conditional: String,
    pub comparison: String,
    pub search_frontier: Vec<String>,
    pub combinatorial: Vec<String>,
    pub numeric_functions: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("pattern table JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pattern table regex: {0}")]
    Regex(#[from] regex::Error),
}

impl PatternTable {
    pub fn from_json(text: &str) -> Result<Self, TableError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn compile(&self) -> Result<CompiledTable, TableError> {
        let any = |pats: &[String]| -> Result<Vec<Regex>, regex::Error> {
            pats.iter().map(|p| Regex::new(p)).collect()
        };
        let numeric = if self.numeric_functions.is_empty() {
            None
        } else {
            Some(Regex::new(&self.numeric_functions.join("|"))?)
        };
        Ok(CompiledTable {
            table: self.clone(),
            loop_header: Regex::new(&self.loop_header)?,
            function_header: Regex::new(&self.function_header)?,
            conditional: Regex::new(&self.conditional)?,
            comparison: Regex::new(&self.comparison)?,
            search_frontier: any(&self.search_frontier)?,
            combinatorial: any(&self.combinatorial)?,
            numeric_functions: numeric,
        })
    }

    /// `language@version`, recorded in every report.
    pub fn id(&self) -> String {
        format!("{}@{}", self.language, self.version)
    }
}

#[derive(Debug, Clone)]
pub struct CompiledTable {
    pub table: PatternTable,
    loop_header: Regex,
    function_header: Regex,
    conditional: Regex,
    comparison: Regex,
    search_frontier: Vec<Regex>,
    combinatorial: Vec<Regex>,
    numeric_functions: Option<Regex>,
}

/// Built-in table for a guest language (`python`, `javascript`).
pub fn builtin_table(language: &str) -> Option<&'static CompiledTable> {
    static PY: OnceLock<CompiledTable> = OnceLock::new();
    static JS: OnceLock<CompiledTable> = OnceLock::new();
    let (cell, src) = match language {
        "python" | "py" => (&PY, PYTHON_TABLE),
        "javascript" | "js" => (&JS, JAVASCRIPT_TABLE),
        _ => return None,
    };
    Some(cell.get_or_init(|| {
        PatternTable::from_json(src)
            .and_then(|t| t.compile())
            .expect("built-in pattern tables are valid")
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub loops: u32,
    pub nested_loops: u32,
    pub recursion: u32,
    pub search_frontier: u32,
    pub numeric_ops: u32,
    pub combinatorial_enumeration: u32,
    pub constraint_checks: u32,
}

impl CategoryCounts {
    pub const NAMES: [&'static str; 7] = [
        "loops",
        "nested_loops",
        "recursion",
        "search_frontier",
        "numeric_ops",
        "combinatorial_enumeration",
        "constraint_checks",
    ];

    pub fn as_map(&self) -> BTreeMap<&'static str, u32> {
        Self::NAMES.into_iter().zip(self.values()).collect()
    }

    pub fn values(&self) -> [u32; 7] {
        [
            self.loops,
            self.nested_loops,
            self.recursion,
            self.search_frontier,
            self.numeric_ops,
            self.combinatorial_enumeration,
            self.constraint_checks,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Trivial,
    Moderate,
    Symbolic,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Trivial => "trivial",
            Classification::Moderate => "moderate",
            Classification::Symbolic => "symbolic",
        })
    }
}

/// Category weights and class thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub loops: u32,
    pub nested_loops: u32,
    pub recursion: u32,
    pub search_frontier: u32,
    pub combinatorial_enumeration: u32,
    pub constraint_checks: u32,
    /// Numeric operations contribute `floor(count / numeric_divisor)`.
    pub numeric_divisor: u32,
    pub moderate_at: u32,
    pub symbolic_at: u32,
}

impl Default for Rubric {
    fn default() -> Self {
        Rubric {
            loops: 1,
            nested_loops: 2,
            recursion: 3,
            search_frontier: 3,
            combinatorial_enumeration: 3,
            constraint_checks: 1,
            numeric_divisor: 10,
            moderate_at: 2,
            symbolic_at: 5,
        }
    }
}

impl Rubric {
    pub fn score(&self, c: &CategoryCounts) -> u32 {
        self.loops * c.loops
            + self.nested_loops * c.nested_loops
            + self.recursion * c.recursion
            + self.search_frontier * c.search_frontier
            + self.combinatorial_enumeration * c.combinatorial_enumeration
            + self.constraint_checks * c.constraint_checks
            + c.numeric_ops / self.numeric_divisor.max(1)
    }

    pub fn classify(&self, score: u32) -> Classification {
        if score >= self.symbolic_at {
            Classification::Symbolic
        } else if score >= self.moderate_at {
            Classification::Moderate
        } else {
            Classification::Trivial
        }
    }
}

pub fn score_and_classify(counts: &CategoryCounts) -> (u32, Classification) {
    let r = Rubric::default();
    let s = r.score(counts);
    (s, r.classify(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub counts: CategoryCounts,
    pub score: u32,
    pub classification: Classification,
    pub summary: String,
    pub pattern_table: String,
}

/// Removes comments and empties string literals (keeping a `""` token).
pub fn normalize(source: &str, table: &PatternTable) -> String {
    let bytes = source.as_bytes();
    let mut out = String::with_capacity(source.len());
    let mut i = 0;
    let starts = |i: usize, pat: &str| bytes[i..].starts_with(pat.as_bytes());
    'scan: while i < bytes.len() {
        if let Some(lc) = &table.line_comment {
            if starts(i, lc) {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
        }
        if let Some((open, close)) = &table.block_comment {
            if starts(i, open) {
                i += open.len();
                match source[i..].find(close.as_str()) {
                    Some(k) => i += k + close.len(),
                    None => i = bytes.len(),
                }
                out.push(' ');
                continue;
            }
        }
        for q in &table.string_quotes {
            if starts(i, q) {
                let multiline = q.len() == 3 || q == "`";
                i += q.len();
                while i < bytes.len() {
                    if bytes[i] == b'\\' {
                        i += 2;
                        continue;
                    }
                    if starts(i, q) {
                        i += q.len();
                        break;
                    }
                    if bytes[i] == b'\n' && !multiline {
                        break;
                    }
                    i += 1;
                }
                i = i.min(bytes.len());
                out.push_str("\"\"");
                continue 'scan;
            }
        }
        let ch = source[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

/// Logical lines with their indentation width.
fn logical_lines(normalized: &str, style: BlockStyle) -> Vec<(usize, String)> {
    let indent_of = |l: &str| {
        l.chars()
            .take_while(|c| c.is_whitespace())
            .map(|c| if c == '\t' { 8 } else { 1 })
            .sum::<usize>()
    };
    let mut out = Vec::new();
    match style {
        BlockStyle::Brace => {
            for l in normalized.lines() {
                if !l.trim().is_empty() {
                    out.push((indent_of(l), l.trim().to_string()));
                }
            }
        }
        BlockStyle::Indent => {
            let mut current: Option<(usize, String)> = None;
            let mut depth: i32 = 0;
            for l in normalized.lines() {
                let joined = current.is_some();
                if !joined && l.trim().is_empty() {
                    continue;
                }
                let entry = current.get_or_insert_with(|| (indent_of(l), String::new()));
                if joined {
                    entry.1.push(' ');
                }
                let body = l.trim();
                let continued = body.ends_with('\\');
                entry.1.push_str(body.trim_end_matches('\\'));
                for c in body.chars() {
                    match c {
                        '(' | '[' | '{' => depth += 1,
                        ')' | ']' | '}' => depth -= 1,
                        _ => {}
                    }
                }
                if depth <= 0 && !continued {
                    depth = 0;
                    out.extend(current.take());
                }
            }
            out.extend(current.take());
        }
    }
    out
}

/// Arithmetic operator tokens: `+ - * / % ** //`, with `++`/`--` counted
/// once and exponent signs in float literals and `->` skipped.
fn count_operators(line: &str) -> u32 {
    let b = line.as_bytes();
    let mut n = 0;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let next = b.get(i + 1).copied();
        match c {
            b'*' | b'/' if next == Some(c) => {
                n += 1;
                i += 2;
                continue;
            }
            b'+' | b'-' if next == Some(c) => {
                n += 1;
                i += 2;
                continue;
            }
            b'-' if next == Some(b'>') => {
                i += 2;
                continue;
            }
            b'+' | b'-' => {
                let exponent = i >= 2
                    && matches!(b[i - 1], b'e' | b'E')
                    && b[i - 2].is_ascii_digit()
                    && next.is_some_and(|d| d.is_ascii_digit());
                if !exponent {
                    n += 1;
                }
            }
            b'*' | b'/' | b'%' => n += 1,
            _ => {}
        }
        i += 1;
    }
    n
}

#[derive(Debug, Clone)]
enum Frame {
    Loop,
    Func(usize),
    Other,
}

struct Walker<'a> {
    t: &'a CompiledTable,
    counts: CategoryCounts,
    functions: Vec<(String, bool)>,
}

impl Walker<'_> {
    fn function_name(&self, line: &str) -> Option<String> {
        let caps = self.t.function_header.captures(line)?;
        caps.name("name")
            .or_else(|| caps.name("name2"))
            .map(|m| m.as_str().to_string())
    }

    /// Counts one logical line given the frames enclosing it. Returns the
    /// frame this line opens, if it is a loop or function header.
    fn line(&mut self, text: &str, enclosing: &[Frame]) -> Option<Frame> {
        let loop_depth = enclosing.iter().filter(|f| matches!(f, Frame::Loop)).count();
        let mut opens = None;
        let mut own_def = None;
        if self.t.loop_header.is_match(text) {
            self.counts.loops += 1;
            if loop_depth > 0 {
                self.counts.nested_loops += 1;
            }
            opens = Some(Frame::Loop);
        } else if let Some(name) = self.function_name(text) {
            self.functions.push((name, false));
            let idx = self.functions.len() - 1;
            own_def = Some(idx);
            opens = Some(Frame::Func(idx));
        }
        for f in enclosing {
            if let Frame::Func(idx) = f {
                if Some(*idx) == own_def || self.functions[*idx].1 {
                    continue;
                }
                let call = format!(r"\b{}\s*\(", regex::escape(&self.functions[*idx].0));
                if Regex::new(&call).is_ok_and(|r| r.is_match(text)) {
                    self.functions[*idx].1 = true;
                }
            }
        }
        if loop_depth > 0 && self.t.conditional.is_match(text) && self.t.comparison.is_match(text) {
            self.counts.constraint_checks += 1;
        }
        if self.t.search_frontier.iter().any(|r| r.is_match(text)) {
            self.counts.search_frontier += 1;
        }
        if self.t.combinatorial.iter().any(|r| r.is_match(text)) {
            self.counts.combinatorial_enumeration += 1;
        }
        let funcs = self
            .t
            .numeric_functions
            .as_ref()
            .map_or(0, |r| r.find_iter(text).count() as u32);
        self.counts.numeric_ops += count_operators(text) + funcs;
        opens
    }
}

pub fn analyze(source: &str, table: &CompiledTable) -> ComplexityReport {
    let normalized = normalize(source, &table.table);
    let lines = logical_lines(&normalized, table.table.block_style);
    let mut w = Walker {
        t: table,
        counts: CategoryCounts::default(),
        functions: Vec::new(),
    };
    match table.table.block_style {
        BlockStyle::Indent => {
            let mut frames: Vec<(usize, Frame)> = Vec::new();
            for (indent, text) in &lines {
                while frames.last().is_some_and(|(i, _)| *i >= *indent) {
                    frames.pop();
                }
                let enclosing: Vec<Frame> = frames.iter().map(|(_, f)| f.clone()).collect();
                if let Some(f) = w.line(text, &enclosing) {
                    frames.push((*indent, f));
                }
            }
        }
        BlockStyle::Brace => {
            let mut stack: Vec<Frame> = Vec::new();
            let mut pending: Option<Frame> = None;
            for (_, text) in &lines {
                let leading_close = text.starts_with('}');
                if leading_close {
                    stack.pop();
                }
                if let Some(f) = w.line(text, &stack) {
                    pending = Some(f);
                }
                let rest = if leading_close { &text[1..] } else { text.as_str() };
                for c in rest.chars() {
                    match c {
                        '{' => stack.push(pending.take().unwrap_or(Frame::Other)),
                        '}' => {
                            stack.pop();
                        }
                        _ => {}
                    }
                }
                if text.ends_with(';') {
                    pending = None;
                }
            }
        }
    }
    w.counts.recursion = w.functions.iter().filter(|(_, r)| *r).count() as u32;
    let (score, classification) = score_and_classify(&w.counts);
    ComplexityReport {
        counts: w.counts,
        score,
        classification,
        summary: summarize(&w.counts, score, classification),
        pattern_table: table.table.id(),
    }
}

/// Analysis with the built-in Python table.
pub fn analyze_python(source: &str) -> ComplexityReport {
    analyze(source, builtin_table("python").expect("built in"))
}

fn summarize(c: &CategoryCounts, score: u32, class: Classification) -> String {
    format!(
        "Complexity score {score} ({class}). Detected {} loop(s), {} nested; {} recursive function(s); \
         {} search-frontier use(s); {} combinatorial enumeration(s); {} in-loop constraint check(s); \
         {} numeric operation(s). This score is a heuristic hint, not a judgement of correctness.",
        c.loops,
        c.nested_loops,
        c.recursion,
        c.search_frontier,
        c.combinatorial_enumeration,
        c.constraint_checks,
        c.numeric_ops
    )
}
