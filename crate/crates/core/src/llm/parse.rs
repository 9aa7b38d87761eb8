use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on curriculum length.
pub const MAX_TASKS: usize = 8;
/// Curricula longer than this are accepted with a warning.
pub const SOFT_MAX_TASKS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no `Task <n>` blocks found")]
    NoTasksFound,
    #[error("task {0} has no {1}")]
    MissingField(usize, &'static str),
    #[error("curriculum has {0} tasks, at most {MAX_TASKS} are allowed")]
    TooManyTasks(usize),
    #[error("no `Decision: Agent <n>` line found")]
    NoDecisionFound,
    #[error("decision names agent {index} but only {k} candidates exist")]
    IndexOutOfRange { index: u64, k: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub index: usize,
    pub name: String,
    pub description: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curriculum {
    pub tasks: Vec<TaskSpec>,
}

impl Curriculum {
    /// The last task stands for the target task.
    pub fn target(&self) -> &TaskSpec {
        self.tasks.last().expect("curriculum is never empty")
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Plain `Task n / Name / Description / Reason` blocks.
    pub fn to_text(&self) -> String {
        let blocks: Vec<String> = self
            .tasks
            .iter()
            .map(|t| {
                format!(
                    "Task {}\nName: {}\nDescription: {}\nReason: {}\n",
                    t.index, t.name, t.description, t.reason
                )
            })
            .collect();
        blocks.join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Name,
    Description,
    Reason,
}

impl Field {
    fn label(self) -> &'static str {
        match self {
            Field::Name => "Name",
            Field::Description => "Description",
            Field::Reason => "Reason",
        }
    }
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^[\s#>*_\-]*task\s+(\d{1,6})\b[\s*_]*(.*)$").unwrap())
}

fn field_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:^|[\s*_\-])(name|description|reason)[\s*_]*:").unwrap())
}

fn decision_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bdecision\b[\s*_]*:?[\s*_]*(?:agent\b)?[\s*_#]*\[?\s*(\d+)\s*\]?").unwrap())
}

fn reason_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\breason\b[\s*_]*:").unwrap())
}

/// Trims whitespace, markdown emphasis and one wrapping pair of brackets.
fn clean(s: &str) -> String {
    let s = s.trim().trim_matches(|c: char| c == '*' || c == '_' || c == '`' || c.is_whitespace());
    let s = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .filter(|inner| !inner.contains(['[', ']']))
        .unwrap_or(s);
    s.trim().to_string()
}

#[derive(Default)]
struct Draft {
    number: usize,
    name: String,
    description: String,
    reason: String,
    header_title: String,
}

impl Draft {
    fn slot(&mut self, f: Field) -> &mut String {
        match f {
            Field::Name => &mut self.name,
            Field::Description => &mut self.description,
            Field::Reason => &mut self.reason,
        }
    }

    fn finish(self) -> Result<TaskSpec, ParseError> {
        let mut name = clean(&self.name);
        if name.is_empty() {
            name = clean(&self.header_title);
        }
        let description = clean(&self.description);
        let reason = clean(&self.reason);
        for (value, field) in [(&name, Field::Name), (&description, Field::Description), (&reason, Field::Reason)] {
            if value.is_empty() {
                return Err(ParseError::MissingField(self.number, field.label()));
            }
        }
        Ok(TaskSpec {
            index: self.number,
            name,
            description,
            reason,
        })
    }
}

fn append(slot: &mut String, text: &str) {
    let text = text.trim();
    if text.is_empty() {
        return;
    }
    if !slot.is_empty() {
        slot.push(' ');
    }
    slot.push_str(text);
}

/// Splits a line into the text before the first field label and `(field, text)` pairs.
fn split_fields(line: &str) -> (&str, Vec<(Field, &str)>) {
    let marks: Vec<(usize, usize, Field)> = field_re()
        .captures_iter(line)
        .map(|c| {
            let whole = c.get(0).unwrap();
            let label = c.get(1).unwrap();
            let f = match label.as_str().to_ascii_lowercase().as_str() {
                "name" => Field::Name,
                "description" => Field::Description,
                _ => Field::Reason,
            };
            (label.start(), whole.end(), f)
        })
        .collect();
    let lead = marks.first().map_or(line, |m| &line[..m.0]);
    let mut fields = Vec::with_capacity(marks.len());
    for (i, &(_, body_start, f)) in marks.iter().enumerate() {
        let end = marks.get(i + 1).map_or(line.len(), |m| m.0);
        fields.push((f, &line[body_start..end]));
    }
    (lead, fields)
}

/// Reads `Task <n>` blocks with `Name:`, `Description:` and `Reason:` fields.
/// Field text may continue over following lines until a blank line.
pub fn parse_curriculum(text: &str) -> Result<Curriculum, ParseError> {
    let mut drafts: Vec<Draft> = Vec::new();
    let mut current: Option<Field> = None;

    for raw in text.lines() {
        let line = raw.trim_end();
        if line.trim().is_empty() {
            current = None;
            continue;
        }
        if let Some(c) = header_re().captures(line) {
            let rest = c.get(2).map_or("", |m| m.as_str());
            let (lead, fields) = split_fields(rest);
            let lead_clean = clean(lead.trim_start_matches([':', '.', '-', ')']));
            // "Task 2 builds on ..." is prose, not a header
            let is_header = lead.trim().is_empty() || lead.trim_start().starts_with([':', '.', '-', ')']) || !fields.is_empty();
            if is_header {
                let number = c[1].parse().unwrap_or(usize::MAX);
                let mut d = Draft {
                    number,
                    header_title: lead_clean,
                    ..Draft::default()
                };
                current = None;
                for (f, body) in fields {
                    append(d.slot(f), body);
                    current = Some(f);
                }
                drafts.push(d);
                continue;
            }
        }
        let Some(d) = drafts.last_mut() else { continue };
        let (lead, fields) = split_fields(line);
        if fields.is_empty() || !lead.trim().trim_matches(['*', '_', '-']).is_empty() {
            // continuation line
            if let Some(f) = current {
                append(d.slot(f), line);
            }
            continue;
        }
        for (f, body) in fields {
            let slot = d.slot(f);
            slot.clear();
            append(slot, body);
            current = Some(f);
        }
    }

    if drafts.is_empty() {
        return Err(ParseError::NoTasksFound);
    }
    if drafts.len() > MAX_TASKS {
        return Err(ParseError::TooManyTasks(drafts.len()));
    }
    if drafts.len() > SOFT_MAX_TASKS {
        log::warn!("curriculum has {} tasks; more than {SOFT_MAX_TASKS} is unusual", drafts.len());
    }
    let tasks = drafts.into_iter().map(Draft::finish).collect::<Result<Vec<_>, _>>()?;
    Ok(Curriculum { tasks })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub agent_index: usize,
    pub reason: String,
}

/// First `Decision: Agent <n>` (brackets optional) in `text`; the text after the next
/// `Reason:` becomes the reason.
pub fn parse_decision(text: &str, k: usize) -> Result<Decision, ParseError> {
    let c = decision_re().captures(text).ok_or(ParseError::NoDecisionFound)?;
    let digits = &c[1];
    let index: u64 = digits.parse().unwrap_or(u64::MAX);
    if index >= k as u64 {
        return Err(ParseError::IndexOutOfRange { index, k });
    }
    let tail = &text[c.get(0).unwrap().end()..];
    let reason = reason_re()
        .find(tail)
        .map(|m| tail[m.end()..].trim().to_string())
        .unwrap_or_default();
    Ok(Decision {
        agent_index: index as usize,
        reason,
    })
}
